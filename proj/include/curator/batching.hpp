#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "curator/types.hpp"

namespace curator {

enum class GroupKey { dataset_id, task_type };

struct BatchConfig {
  std::size_t batch_size = 48;  // pre-train default is 512
  double mixing_ratio = 0.0;    // fraction of homogeneous batches pooled and refilled
  std::uint64_t seed = 0;
  GroupKey group_key = GroupKey::dataset_id;
  bool pad_remainder = false;  // resample instead of drop-and-report

  std::string validate() const;
};

struct Batch {
  std::vector<std::string> example_ids;  // size == batch_size
  std::string origin_group;
  bool mixed = false;
};

struct BatchPlan {
  std::size_t batch_size = 0;
  std::vector<Batch> batches;
  std::vector<std::string> dropped_ids;  // remainders too small to batch
};

// Groups examples, shuffles within each group, cuts consecutive batches of
// batch_size, then shuffles batch order. All randomness is seeded.
BatchPlan build_homogeneous(const std::vector<TrainingExample>& examples,
                            const BatchConfig& cfg);

// Homogeneous plan, then floor(ratio * #batches) batches are selected,
// their examples pooled and shuffled, and the same slots refilled in order.
// Selected batches are flagged mixed.
BatchPlan build_semi_homogeneous(const std::vector<TrainingExample>& examples,
                                 const BatchConfig& cfg);

// Ordered pairs (i, j), i != j, within a batch where one of j's positives
// normalizes equal to i's query or one of i's positives. A proxy for
// in-batch false negatives; highest for label-style positives.
std::vector<std::size_t> audit_false_negative_risk(const BatchPlan& plan,
                                                   const std::vector<TrainingExample>& examples);

nlohmann::json plan_to_json(const BatchPlan& plan);
BatchPlan plan_from_json(const nlohmann::json& j);

}  // namespace curator
