#pragma once

#include <functional>
#include <string>
#include <vector>

#include "redlab/experiments.hpp"

namespace redlab::detail {

struct LoadedModel {
  std::string token;
  ModelPtr model;  // null for pseudo-models such as topic-scaling
};

struct TaskOutput {
  std::vector<ReportRow> rows;
  std::vector<std::string> notes;
};

enum class AggregateRule {
  coverage,  // fraction of replicates inside their bound >= 1 - delta
  mean,      // mean over replicates <= bound + 3 se
};

struct AggregateKey {
  std::string model_id;
  std::size_t m = 0;
  AggregateRule rule = AggregateRule::coverage;
};

struct Plan {
  std::vector<std::function<TaskOutput()>> tasks;
  std::vector<AggregateKey> aggregates;
};

Plan plan_scenario(const ExperimentConfig& config, const std::vector<LoadedModel>& models);

std::uint64_t row_seed(std::uint64_t seed, const std::string& model_id, std::size_t m, long replicate);

}  // namespace redlab::detail
