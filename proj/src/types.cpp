#include "curator/types.hpp"

#include <unordered_set>

#include <nlohmann/json.hpp>

#include "curator/text.hpp"

namespace curator {

const char* to_string(TaskType t) {
  switch (t) {
    case TaskType::retrieval: return "retrieval";
    case TaskType::sts: return "sts";
    case TaskType::classification: return "classification";
    case TaskType::clustering: return "clustering";
    case TaskType::reranking: return "reranking";
    case TaskType::pair_classification: return "pair_classification";
  }
  return "?";
}

const char* to_string(Category c) {
  switch (c) {
    case Category::s2p: return "s2p";
    case Category::s2s: return "s2s";
    case Category::p2s: return "p2s";
  }
  return "?";
}

const char* to_string(Symmetry s) {
  return s == Symmetry::symmetric ? "symmetric" : "asymmetric";
}

std::optional<TaskType> parse_task_type(const std::string& s) {
  if (s == "retrieval") return TaskType::retrieval;
  if (s == "sts") return TaskType::sts;
  if (s == "classification") return TaskType::classification;
  if (s == "clustering") return TaskType::clustering;
  if (s == "reranking") return TaskType::reranking;
  if (s == "pair_classification") return TaskType::pair_classification;
  return std::nullopt;
}

std::optional<Category> parse_category(const std::string& s) {
  if (s == "s2p") return Category::s2p;
  if (s == "s2s") return Category::s2s;
  if (s == "p2s") return Category::p2s;
  return std::nullopt;
}

std::optional<Symmetry> parse_symmetry(const std::string& s) {
  if (s == "symmetric") return Symmetry::symmetric;
  if (s == "asymmetric") return Symmetry::asymmetric;
  return std::nullopt;
}

Symmetry default_symmetry(TaskType t) {
  switch (t) {
    case TaskType::sts:
    case TaskType::pair_classification:
      return Symmetry::symmetric;
    default:
      return Symmetry::asymmetric;
  }
}

std::string TrainingExample::validate() const {
  if (id.empty()) return "empty id";
  if (dataset_id.empty()) return "empty dataset_id";
  if (utf8_length(query) < 1) return "empty query";
  if (positives.empty()) return "no positives";
  for (const auto& p : positives) {
    if (p.empty()) return "empty positive";
  }
  if (symmetry == Symmetry::symmetric && instruction.has_value()) {
    return "symmetric example carries an instruction";
  }
  std::unordered_set<std::string> pos;
  for (const auto& p : positives) pos.insert(normalize_text(p));
  for (const auto& n : hard_negatives) {
    if (pos.count(normalize_text(n))) return "text appears in both positives and hard_negatives";
  }
  return {};
}

nlohmann::json to_json(const TrainingExample& ex) {
  nlohmann::json j{
      {"id", ex.id},
      {"dataset_id", ex.dataset_id},
      {"task_type", to_string(ex.task_type)},
      {"category", to_string(ex.category)},
      {"symmetry", to_string(ex.symmetry)},
      {"language", ex.language},
      {"query", ex.query},
      {"positives", ex.positives},
      {"hard_negatives", ex.hard_negatives},
  };
  if (ex.instruction) j["instruction"] = *ex.instruction;
  return j;
}

TrainingExample example_from_json(const nlohmann::json& j) {
  TrainingExample ex;
  ex.id = j.at("id").get<std::string>();
  ex.dataset_id = j.at("dataset_id").get<std::string>();

  const auto tt = parse_task_type(j.at("task_type").get<std::string>());
  if (!tt) throw std::runtime_error("invalid task_type");
  ex.task_type = *tt;

  if (j.contains("category")) {
    const auto c = parse_category(j.at("category").get<std::string>());
    if (!c) throw std::runtime_error("invalid category");
    ex.category = *c;
  }
  if (j.contains("symmetry")) {
    const auto s = parse_symmetry(j.at("symmetry").get<std::string>());
    if (!s) throw std::runtime_error("invalid symmetry");
    ex.symmetry = *s;
  } else {
    ex.symmetry = default_symmetry(ex.task_type);
  }
  if (j.contains("language")) ex.language = j.at("language").get<std::string>();
  if (j.contains("instruction") && !j.at("instruction").is_null()) {
    ex.instruction = j.at("instruction").get<std::string>();
  }
  ex.query = j.at("query").get<std::string>();
  ex.positives = j.at("positives").get<std::vector<std::string>>();
  if (j.contains("hard_negatives")) {
    ex.hard_negatives = j.at("hard_negatives").get<std::vector<std::string>>();
  }

  if (auto err = ex.validate(); !err.empty()) throw std::runtime_error(err);
  return ex;
}

}  // namespace curator
