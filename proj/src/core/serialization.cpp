#include "redlab/serialization.hpp"

namespace redlab {

using nlohmann::json;

namespace {

template <class T>
T field(const json& j, const char* name) {
  if (!j.is_object() || !j.contains(name)) throw ConfigError(std::string("missing field '") + name + "'");
  try {
    return j.at(name).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("field '") + name + "': " + e.what());
  }
}

void expect_format(const json& j, const char* format) {
  const auto f = field<std::string>(j, "format");
  if (f != format) throw ConfigError("expected a '" + std::string(format) + "' document, got '" + f + "'");
  if (field<int>(j, "version") != 1) throw ConfigError("unsupported format version");
}

Scale scale_from(const std::string& s) {
  if (s == "odds") return Scale::odds;
  if (s == "log_odds") return Scale::log_odds;
  throw ConfigError("unknown scale '" + s + "'");
}

}  // namespace

json matrix_to_json(const Eigen::MatrixXd& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto rows = field<Eigen::Index>(j, "rows");
  const auto cols = field<Eigen::Index>(j, "cols");
  const auto data = field<std::vector<double>>(j, "data");
  if (rows < 0 || cols < 0 || static_cast<std::size_t>(rows * cols) != data.size()) {
    throw ConfigError("matrix: rows x cols does not match the data length");
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r * cols + c)];
  return m;
}

json scorer_to_json(const PairScorer& s) {
  json j = {{"format", "redlab.scorer"}, {"version", 1}, {"scale", to_string(s.scale())}};
  switch (s.form()) {
    case PairScorer::Form::oracle:
      j["form"] = "oracle";
      j["model_id"] = s.model()->id();
      break;
    case PairScorer::Form::table:
      j["form"] = "table";
      j["values"] = matrix_to_json(s.values());
      break;
    case PairScorer::Form::factorized:
      j["form"] = "factorized";
      j["eta"] = matrix_to_json(s.eta());
      j["psi"] = matrix_to_json(s.psi());
      break;
  }
  j["info"] = {{"trainer", s.info.trainer},       {"seed", s.info.seed},         {"final_loss", s.info.final_loss},
               {"steps", s.info.steps},           {"restarts", s.info.restarts}, {"train_count", s.info.train_count}};
  return j;
}

PairScorer scorer_from_json(const json& j, ModelPtr model) {
  expect_format(j, "redlab.scorer");
  const auto form = field<std::string>(j, "form");
  const Scale scale = scale_from(field<std::string>(j, "scale"));
  auto out = [&]() {
    if (form == "oracle") {
      if (!model) throw ConfigError("oracle scorer document needs its model");
      if (model->id() != field<std::string>(j, "model_id")) throw ConfigError("oracle scorer: model id mismatch");
      return PairScorer::oracle(model, scale);
    }
    if (form == "table") return PairScorer::table(matrix_from_json(field<json>(j, "values")), scale);
    if (form == "factorized") {
      return PairScorer::factorized(matrix_from_json(field<json>(j, "eta")), matrix_from_json(field<json>(j, "psi")));
    }
    throw ConfigError("unknown scorer form '" + form + "'");
  }();
  if (j.contains("info")) {
    const json& i = j.at("info");
    out.info.trainer = field<std::string>(i, "trainer");
    out.info.seed = field<std::uint64_t>(i, "seed");
    out.info.final_loss = field<double>(i, "final_loss");
    out.info.steps = field<std::size_t>(i, "steps");
    out.info.restarts = field<std::size_t>(i, "restarts");
    out.info.train_count = field<std::size_t>(i, "train_count");
  }
  return out;
}

json embedding_to_json(const LandmarkEmbedding& e) {
  return {{"format", "redlab.embedding"}, {"version", 1},       {"kind", "landmark"},
          {"landmarks", e.landmarks()},   {"source", e.source()}, {"seed", e.seed()},
          {"scorer", scorer_to_json(e.scorer())}};
}

json embedding_to_json(const FactorizedEmbedding& e) {
  json j = {{"format", "redlab.embedding"}, {"version", 1}, {"kind", "factorized"}, {"source", e.source()},
            {"seed", e.seed()}, {"dim", e.dim()}};
  if (e.tabular()) {
    j["eta"] = matrix_to_json(e.eta_table());
    j["psi"] = matrix_to_json(e.psi_table());
  } else {
    j["hidden"] = e.hidden();
  }
  return j;
}

LandmarkEmbedding landmark_embedding_from_json(const json& j, ModelPtr model) {
  expect_format(j, "redlab.embedding");
  if (field<std::string>(j, "kind") != "landmark") throw ConfigError("not a landmark embedding");
  return LandmarkEmbedding(field<std::vector<double>>(j, "landmarks"),
                           scorer_from_json(field<json>(j, "scorer"), std::move(model)),
                           field<std::string>(j, "source"), field<std::uint64_t>(j, "seed"));
}

FactorizedEmbedding factorized_embedding_from_json(const json& j, ModelPtr model) {
  expect_format(j, "redlab.embedding");
  if (field<std::string>(j, "kind") != "factorized") throw ConfigError("not a factorized embedding");
  if (j.contains("hidden")) {
    if (!model) throw ConfigError("sampled embedding document needs its model");
    return FactorizedEmbedding(std::move(model), field<std::vector<Hidden>>(j, "hidden"),
                               field<std::uint64_t>(j, "seed"));
  }
  return FactorizedEmbedding(matrix_from_json(field<json>(j, "eta")), matrix_from_json(field<json>(j, "psi")),
                             field<std::string>(j, "source"), field<std::uint64_t>(j, "seed"));
}

json weights_to_json(const WeightVector& w) {
  return {{"format", "redlab.weights"},
          {"version", 1},
          {"source", to_string(w.source)},
          {"w", std::vector<double>(w.w.data(), w.w.data() + w.w.size())}};
}

WeightVector weights_from_json(const json& j) {
  expect_format(j, "redlab.weights");
  WeightVector out;
  const auto src = field<std::string>(j, "source");
  bool known = false;
  for (WeightSource s : {WeightSource::landmark_block, WeightSource::exact_factorization, WeightSource::ridge_fit,
                         WeightSource::transfer_block}) {
    if (to_string(s) == src) {
      out.source = s;
      known = true;
    }
  }
  if (!known) throw ConfigError("unknown weight source '" + src + "'");
  const auto w = field<std::vector<double>>(j, "w");
  out.w = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
  if (!out.w.allFinite()) throw ConfigError("weights must be finite");
  return out;
}

}  // namespace redlab
