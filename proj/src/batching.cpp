#include "curator/batching.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "curator/rng.hpp"
#include "curator/text.hpp"

namespace curator {

std::string BatchConfig::validate() const {
  if (batch_size < 2) return "batch_size must be >= 2";
  if (mixing_ratio < 0.0 || mixing_ratio > 1.0) return "mixing_ratio must be in [0, 1]";
  return {};
}

BatchPlan build_homogeneous(const std::vector<TrainingExample>& examples,
                            const BatchConfig& cfg) {
  if (auto err = cfg.validate(); !err.empty()) {
    throw std::runtime_error("invalid batch config: " + err);
  }

  // Group in first-appearance order so grouping is order-stable.
  std::vector<std::string> group_order;
  std::unordered_map<std::string, std::vector<std::string>> groups;
  for (const auto& ex : examples) {
    const std::string key =
        cfg.group_key == GroupKey::dataset_id ? ex.dataset_id : to_string(ex.task_type);
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) group_order.push_back(key);
    it->second.push_back(ex.id);
  }

  BatchPlan plan;
  plan.batch_size = cfg.batch_size;
  for (const auto& key : group_order) {
    auto& ids = groups[key];
    Rng rng = keyed_rng(cfg.seed, "group/" + key);
    rng.shuffle(ids);

    std::size_t full = ids.size() / cfg.batch_size;
    for (std::size_t b = 0; b < full; ++b) {
      Batch batch;
      batch.origin_group = key;
      batch.example_ids.assign(ids.begin() + static_cast<std::ptrdiff_t>(b * cfg.batch_size),
                               ids.begin() + static_cast<std::ptrdiff_t>((b + 1) * cfg.batch_size));
      plan.batches.push_back(std::move(batch));
    }

    std::size_t remainder = ids.size() - full * cfg.batch_size;
    if (remainder > 0) {
      if (cfg.pad_remainder && full * cfg.batch_size > 0) {
        Batch batch;
        batch.origin_group = key;
        batch.example_ids.assign(ids.end() - static_cast<std::ptrdiff_t>(remainder), ids.end());
        // Pad by resampling from the already-batched portion of the group.
        std::size_t padable = full * cfg.batch_size;
        while (batch.example_ids.size() < cfg.batch_size) {
          batch.example_ids.push_back(ids[rng.bounded(padable)]);
        }
        plan.batches.push_back(std::move(batch));
      } else {
        for (std::size_t i = ids.size() - remainder; i < ids.size(); ++i) {
          plan.dropped_ids.push_back(ids[i]);
        }
      }
    }
  }

  // Final order shuffle so group order leaks no curriculum.
  Rng order_rng = keyed_rng(cfg.seed, "batch_order");
  order_rng.shuffle(plan.batches);
  return plan;
}

BatchPlan build_semi_homogeneous(const std::vector<TrainingExample>& examples,
                                 const BatchConfig& cfg) {
  BatchPlan plan = build_homogeneous(examples, cfg);
  const std::size_t n_selected =
      static_cast<std::size_t>(std::floor(cfg.mixing_ratio * static_cast<double>(plan.batches.size())));
  if (n_selected == 0) return plan;

  Rng rng = keyed_rng(cfg.seed, "mixing");
  std::vector<std::size_t> selected =
      rng.sample_without_replacement(plan.batches.size(), n_selected);
  std::sort(selected.begin(), selected.end());

  std::vector<std::string> pooled;
  for (std::size_t idx : selected) {
    auto& b = plan.batches[idx];
    pooled.insert(pooled.end(), b.example_ids.begin(), b.example_ids.end());
    b.mixed = true;
  }
  rng.shuffle(pooled);

  std::size_t cursor = 0;
  for (std::size_t idx : selected) {
    auto& b = plan.batches[idx];
    for (auto& slot : b.example_ids) slot = pooled[cursor++];
  }
  return plan;
}

std::vector<std::size_t> audit_false_negative_risk(
    const BatchPlan& plan, const std::vector<TrainingExample>& examples) {
  std::unordered_map<std::string, const TrainingExample*> by_id;
  for (const auto& ex : examples) by_id[ex.id] = &ex;

  std::vector<std::size_t> counts;
  counts.reserve(plan.batches.size());
  for (const auto& batch : plan.batches) {
    std::vector<std::unordered_set<std::string>> own_texts;  // query + positives, normalized
    std::vector<std::vector<std::string>> positives;
    for (const auto& id : batch.example_ids) {
      auto it = by_id.find(id);
      if (it == by_id.end()) throw std::runtime_error("plan references unknown example " + id);
      const TrainingExample& ex = *it->second;
      std::unordered_set<std::string> texts{normalize_text(ex.query)};
      std::vector<std::string> pos;
      for (const auto& p : ex.positives) {
        texts.insert(normalize_text(p));
        pos.push_back(normalize_text(p));
      }
      own_texts.push_back(std::move(texts));
      positives.push_back(std::move(pos));
    }

    std::size_t collisions = 0;
    for (std::size_t i = 0; i < batch.example_ids.size(); ++i) {
      for (std::size_t j = 0; j < batch.example_ids.size(); ++j) {
        if (i == j) continue;
        for (const auto& p : positives[j]) {
          if (own_texts[i].count(p)) {
            ++collisions;
            break;
          }
        }
      }
    }
    counts.push_back(collisions);
  }
  return counts;
}

nlohmann::json plan_to_json(const BatchPlan& plan) {
  nlohmann::json batches = nlohmann::json::array();
  for (const auto& b : plan.batches) {
    batches.push_back({{"ids", b.example_ids}, {"origin_group", b.origin_group}, {"mixed", b.mixed}});
  }
  return {{"batch_size", plan.batch_size}, {"batches", batches}, {"dropped", plan.dropped_ids}};
}

BatchPlan plan_from_json(const nlohmann::json& j) {
  BatchPlan plan;
  plan.batch_size = j.at("batch_size").get<std::size_t>();
  for (const auto& b : j.at("batches")) {
    Batch batch;
    batch.example_ids = b.at("ids").get<std::vector<std::string>>();
    batch.origin_group = b.at("origin_group").get<std::string>();
    batch.mixed = b.at("mixed").get<bool>();
    plan.batches.push_back(std::move(batch));
  }
  if (j.contains("dropped")) plan.dropped_ids = j.at("dropped").get<std::vector<std::string>>();
  return plan;
}

}  // namespace curator
