#pragma once

// Structured-text (JSON) form of scorers, embeddings and weight vectors.
// Tables are stored row-major with explicit dimensions; see docs/formats.md.

#include <json.hpp>

#include "redlab/contrastive.hpp"
#include "redlab/embeddings.hpp"

namespace redlab {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);

nlohmann::json scorer_to_json(const PairScorer& s);
/// Oracle scorers need the model they were built from.
PairScorer scorer_from_json(const nlohmann::json& j, ModelPtr model = nullptr);

nlohmann::json embedding_to_json(const LandmarkEmbedding& e);
nlohmann::json embedding_to_json(const FactorizedEmbedding& e);
LandmarkEmbedding landmark_embedding_from_json(const nlohmann::json& j, ModelPtr model = nullptr);
/// Sampled (non-tabular) embeddings need the model their hidden draws came from.
FactorizedEmbedding factorized_embedding_from_json(const nlohmann::json& j, ModelPtr model = nullptr);

nlohmann::json weights_to_json(const WeightVector& w);
WeightVector weights_from_json(const nlohmann::json& j);

}  // namespace redlab
