#pragma once

// Model specification documents (JSON, comments allowed) and the bundled
// model catalogue. The schema is described in docs/formats.md.

#include <json.hpp>

#include <string>
#include <vector>

#include "redlab/models.hpp"

namespace redlab {

/// Builds a model from a parsed specification. Throws ModelError listing
/// every violated invariant, or ConfigError for structural problems.
ModelPtr model_from_json(const nlohmann::json& doc);
ModelPtr model_from_text(const std::string& text);
ModelPtr model_from_file(const std::string& path);

/// Every problem with a specification document, structural or numerical.
/// Empty means the document builds a valid model.
std::vector<Violation> validate_model_text(const std::string& text);

nlohmann::json model_to_json(const MultiViewModel& model);

/// Bundled models: flip01, mixture3, independent, identity2, topic-k2,
/// topic-k5, gaussian. `sigma2` is used by gaussian only.
ModelPtr builtin_model(const std::string& name, double sigma2 = 1.0);
std::vector<std::string> builtin_model_names();

/// K topics with `words_per_topic` equally likely words each and labels
/// v_k running linearly from +1 to -1.
TopicSpec uniform_topic_spec(std::size_t k, double alpha, std::size_t words_per_topic);

/// |S|=2, uniform prior, binary symmetric channels with the given flip
/// probability, labels (+1, -1).
DiscreteSpec flip_spec(double flip);

/// Random valid discrete model: sizes uniform in [1, max_*] (hidden at
/// least `min_hidden`), Dirichlet(1) rows, labels uniform on [-1, 1].
DiscreteSpec random_discrete_spec(std::uint64_t seed, std::size_t max_hidden, std::size_t max_x,
                                  std::size_t max_z, std::size_t min_hidden = 1);

}  // namespace redlab
