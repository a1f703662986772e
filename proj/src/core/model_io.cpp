#include "redlab/model_io.hpp"

#include <fstream>
#include <sstream>

namespace redlab {

using nlohmann::json;

namespace {

// Collects structural problems instead of throwing on the first one so that
// `validate` can report everything at once.
struct Reader {
  const json& doc;
  std::vector<Violation>& out;

  const json* field(const char* name) {
    auto it = doc.find(name);
    if (it == doc.end()) {
      out.push_back({name, "missing required field", 0.0});
      return nullptr;
    }
    return &*it;
  }

  bool number(const char* name, double& value) {
    const json* f = field(name);
    if (f == nullptr) return false;
    if (!f->is_number()) {
      out.push_back({name, "expected a number", 0.0});
      return false;
    }
    value = f->get<double>();
    return true;
  }

  bool count(const char* name, std::size_t& value) {
    const json* f = field(name);
    if (f == nullptr) return false;
    if (!f->is_number_integer() || f->get<long long>() < 0) {
      out.push_back({name, "expected a non-negative integer", 0.0});
      return false;
    }
    value = f->get<std::size_t>();
    return true;
  }

  bool vector(const char* name, std::vector<double>& value) {
    const json* f = field(name);
    if (f == nullptr) return false;
    if (!f->is_array()) {
      out.push_back({name, "expected an array of numbers", 0.0});
      return false;
    }
    value.clear();
    for (std::size_t i = 0; i < f->size(); ++i) {
      if (!(*f)[i].is_number()) {
        out.push_back({name, "entry " + std::to_string(i) + " is not a number", 0.0});
        return false;
      }
      value.push_back((*f)[i].get<double>());
    }
    return true;
  }

  bool matrix(const char* name, Eigen::MatrixXd& value) {
    const json* f = field(name);
    if (f == nullptr) return false;
    if (!f->is_array() || f->empty() || !(*f)[0].is_array()) {
      out.push_back({name, "expected a non-empty array of rows", 0.0});
      return false;
    }
    const std::size_t cols = (*f)[0].size();
    value.resize(static_cast<Eigen::Index>(f->size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < f->size(); ++r) {
      const json& row = (*f)[r];
      if (!row.is_array() || row.size() != cols) {
        out.push_back({name, "row " + std::to_string(r) + " does not have " + std::to_string(cols) +
                                 " entries like row 0", 0.0});
        return false;
      }
      for (std::size_t c = 0; c < cols; ++c) {
        if (!row[c].is_number()) {
          out.push_back({name, "entry (" + std::to_string(r) + "," + std::to_string(c) +
                                   ") is not a number", 0.0});
          return false;
        }
        value(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c].get<double>();
      }
    }
    return true;
  }
};

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open model file '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

json parse_text(const std::string& text) {
  try {
    return json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("model document is not valid JSON: ") + e.what());
  }
}

std::string id_or(const json& doc, const std::string& fallback) {
  auto it = doc.find("id");
  if (it != doc.end() && it->is_string()) return it->get<std::string>();
  return fallback;
}

// Returns the spec pieces if structurally sound; violations accumulate in `out`.
struct ParsedModel {
  ModelKind kind = ModelKind::discrete;
  DiscreteSpec discrete;
  TopicSpec topic;
  double sigma2 = 0.0;
  std::string id;
};

bool parse_model(const json& doc, ParsedModel& p, std::vector<Violation>& out) {
  if (!doc.is_object()) {
    out.push_back({"", "model document must be an object", 0.0});
    return false;
  }
  Reader rd{doc, out};
  const json* kind = rd.field("kind");
  if (kind == nullptr) return false;
  const std::string k = kind->is_string() ? kind->get<std::string>() : "";
  const std::size_t before = out.size();
  if (k == "discrete") {
    p.kind = ModelKind::discrete;
    p.discrete.id = p.id = id_or(doc, "discrete");
    rd.vector("prior", p.discrete.prior);
    rd.matrix("x_given_h", p.discrete.x_given_h);
    rd.matrix("z_given_h", p.discrete.z_given_h);
    rd.vector("label_of_h", p.discrete.label_of_h);
    if (doc.contains("num_hidden")) {
      std::size_t s = 0;
      if (rd.count("num_hidden", s) && s != p.discrete.prior.size()) {
        out.push_back({"num_hidden", "is " + std::to_string(s) + " but prior has " +
                                         std::to_string(p.discrete.prior.size()) + " entries", 0.0});
      }
    }
  } else if (k == "topic") {
    p.kind = ModelKind::topic;
    p.topic.id = p.id = id_or(doc, "topic");
    rd.count("num_topics", p.topic.num_topics);
    rd.number("alpha", p.topic.alpha);
    rd.matrix("topic_word", p.topic.topic_word);
    rd.vector("label_direction", p.topic.label_direction);
  } else if (k == "gaussian") {
    p.kind = ModelKind::gaussian;
    p.id = id_or(doc, "gaussian");
    rd.number("sigma2", p.sigma2);
  } else {
    out.push_back({"kind", "must be one of discrete, topic, gaussian", 0.0});
  }
  return out.size() == before;
}

}  // namespace

ModelPtr model_from_json(const json& doc) {
  std::vector<Violation> problems;
  ParsedModel p;
  if (!parse_model(doc, p, problems)) throw ModelError(std::move(problems));
  switch (p.kind) {
    case ModelKind::discrete: return std::make_shared<DiscreteHiddenModel>(std::move(p.discrete));
    case ModelKind::topic: return std::make_shared<TopicModel>(std::move(p.topic));
    case ModelKind::gaussian: return std::make_shared<GaussianModel>(p.sigma2, p.id);
  }
  throw ConfigError("unknown model kind");
}

ModelPtr model_from_text(const std::string& text) { return model_from_json(parse_text(text)); }

ModelPtr model_from_file(const std::string& path) { return model_from_text(read_file(path)); }

std::vector<Violation> validate_model_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    return {{"", std::string("not valid JSON: ") + e.what(), 0.0}};
  }
  std::vector<Violation> out;
  ParsedModel p;
  if (!parse_model(doc, p, out)) return out;
  switch (p.kind) {
    case ModelKind::discrete: return DiscreteHiddenModel::validate(p.discrete);
    case ModelKind::topic: return TopicModel::validate(p.topic);
    case ModelKind::gaussian: return GaussianModel::validate(p.sigma2);
  }
  return out;
}

namespace {

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

json model_to_json(const MultiViewModel& model) {
  json doc;
  doc["kind"] = to_string(model.kind());
  doc["id"] = model.id();
  if (const auto* d = dynamic_cast<const DiscreteHiddenModel*>(&model)) {
    doc["num_hidden"] = d->num_hidden();
    doc["prior"] = d->spec().prior;
    doc["x_given_h"] = matrix_json(d->spec().x_given_h);
    doc["z_given_h"] = matrix_json(d->spec().z_given_h);
    doc["label_of_h"] = d->spec().label_of_h;
  } else if (const auto* t = dynamic_cast<const TopicModel*>(&model)) {
    doc["num_topics"] = t->num_topics();
    doc["alpha"] = t->alpha();
    doc["topic_word"] = matrix_json(t->spec().topic_word);
    doc["label_direction"] = t->spec().label_direction;
  } else if (const auto* g = dynamic_cast<const GaussianModel*>(&model)) {
    doc["sigma2"] = g->sigma2();
  }
  return doc;
}

// ---------------------------------------------------------------------------

TopicSpec uniform_topic_spec(std::size_t k, double alpha, std::size_t words_per_topic) {
  if (k == 0 || words_per_topic == 0) throw ConfigError("topic model needs K >= 1 and >= 1 word per topic");
  TopicSpec spec;
  std::ostringstream id;
  id << "topic-k" << k << "-a" << alpha;
  spec.id = id.str();
  spec.num_topics = k;
  spec.alpha = alpha;
  const auto v = static_cast<Eigen::Index>(k * words_per_topic);
  spec.topic_word = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), v);
  for (std::size_t t = 0; t < k; ++t) {
    for (std::size_t w = 0; w < words_per_topic; ++w) {
      spec.topic_word(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(t * words_per_topic + w)) =
          1.0 / static_cast<double>(words_per_topic);
    }
  }
  spec.label_direction.resize(k);
  for (std::size_t t = 0; t < k; ++t) {
    spec.label_direction[t] = k == 1 ? 1.0 : 1.0 - 2.0 * static_cast<double>(t) / static_cast<double>(k - 1);
  }
  return spec;
}

DiscreteSpec flip_spec(double flip) {
  DiscreteSpec spec;
  spec.id = "flip01";
  spec.prior = {0.5, 0.5};
  spec.x_given_h.resize(2, 2);
  spec.x_given_h << 1.0 - flip, flip, flip, 1.0 - flip;
  spec.z_given_h = spec.x_given_h;
  spec.label_of_h = {1.0, -1.0};
  return spec;
}

DiscreteSpec random_discrete_spec(std::uint64_t seed, std::size_t max_hidden, std::size_t max_x,
                                  std::size_t max_z, std::size_t min_hidden) {
  Rng rng(seed, 0x6d6f64656cULL);
  auto draw = [&](std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(rng.uniform() * static_cast<double>(hi - lo + 1));
  };
  const std::size_t s = draw(std::max<std::size_t>(1, min_hidden), max_hidden);
  const std::size_t nx = draw(1, max_x);
  const std::size_t nz = draw(1, max_z);
  DiscreteSpec spec;
  spec.id = "random-" + std::to_string(seed);
  spec.prior = rng.dirichlet(1.0, s);
  spec.x_given_h.resize(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(nx));
  spec.z_given_h.resize(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(nz));
  for (std::size_t h = 0; h < s; ++h) {
    const auto rx = rng.dirichlet(1.0, nx);
    const auto rz = rng.dirichlet(1.0, nz);
    for (std::size_t i = 0; i < nx; ++i) spec.x_given_h(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(i)) = rx[i];
    for (std::size_t i = 0; i < nz; ++i) spec.z_given_h(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(i)) = rz[i];
    spec.label_of_h.push_back(2.0 * rng.uniform() - 1.0);
  }
  return spec;
}

std::vector<std::string> builtin_model_names() {
  return {"flip01", "mixture3", "independent", "identity2", "topic-k2", "topic-k5", "gaussian"};
}

ModelPtr builtin_model(const std::string& name, double sigma2) {
  if (name == "flip01") return std::make_shared<DiscreteHiddenModel>(flip_spec(0.1));
  if (name == "mixture3") {
    DiscreteSpec spec;
    spec.id = "mixture3";
    spec.prior = {0.5, 0.3, 0.2};
    spec.x_given_h.resize(3, 4);
    spec.x_given_h << 0.70, 0.15, 0.10, 0.05,
                      0.10, 0.60, 0.20, 0.10,
                      0.05, 0.15, 0.30, 0.50;
    spec.z_given_h.resize(3, 5);
    spec.z_given_h << 0.50, 0.30, 0.10, 0.05, 0.05,
                      0.10, 0.10, 0.60, 0.10, 0.10,
                      0.05, 0.05, 0.10, 0.40, 0.40;
    spec.label_of_h = {1.0, -0.5, 0.2};
    return std::make_shared<DiscreteHiddenModel>(std::move(spec));
  }
  if (name == "independent") {
    DiscreteSpec spec;
    spec.id = "independent";
    spec.prior = {0.4, 0.6};
    spec.x_given_h.resize(2, 3);
    spec.x_given_h << 0.2, 0.3, 0.5, 0.2, 0.3, 0.5;
    spec.z_given_h.resize(2, 3);
    spec.z_given_h << 0.6, 0.3, 0.1, 0.6, 0.3, 0.1;
    spec.label_of_h = {0.8, -0.2};
    return std::make_shared<DiscreteHiddenModel>(std::move(spec));
  }
  if (name == "identity2") {
    DiscreteSpec spec = flip_spec(0.0);
    spec.id = "identity2";
    return std::make_shared<DiscreteHiddenModel>(std::move(spec));
  }
  if (name == "topic-k2") {
    TopicSpec spec = uniform_topic_spec(2, 1.0, 2);
    spec.id = "topic-k2";
    return std::make_shared<TopicModel>(std::move(spec));
  }
  if (name == "topic-k5") {
    TopicSpec spec = uniform_topic_spec(5, 1.0, 3);
    spec.id = "topic-k5";
    return std::make_shared<TopicModel>(std::move(spec));
  }
  if (name == "gaussian") {
    std::ostringstream id;
    id << "gaussian-s" << sigma2;
    return std::make_shared<GaussianModel>(sigma2, id.str());
  }
  throw ConfigError("unknown builtin model '" + name + "'");
}

}  // namespace redlab
