#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace curator {

enum class TaskType { retrieval, sts, classification, clustering, reranking, pair_classification };
enum class Category { s2p, s2s, p2s };
enum class Symmetry { symmetric, asymmetric };

const char* to_string(TaskType t);
const char* to_string(Category c);
const char* to_string(Symmetry s);
std::optional<TaskType> parse_task_type(const std::string& s);
std::optional<Category> parse_category(const std::string& s);
std::optional<Symmetry> parse_symmetry(const std::string& s);

// Symmetric tasks (STS, pair classification) take no instruction.
Symmetry default_symmetry(TaskType t);

struct TrainingExample {
  std::string id;
  std::string dataset_id;
  TaskType task_type = TaskType::retrieval;
  Category category = Category::s2p;
  Symmetry symmetry = Symmetry::asymmetric;
  std::string language = "en";
  std::optional<std::string> instruction;
  std::string query;
  std::vector<std::string> positives;
  std::vector<std::string> hard_negatives;

  // Empty string means valid; otherwise the violated invariant.
  std::string validate() const;
};

nlohmann::json to_json(const TrainingExample& ex);

// Throws std::runtime_error naming the offending field on invalid input.
TrainingExample example_from_json(const nlohmann::json& j);

struct LabelSpace {
  std::string dataset_id;
  std::vector<std::string> labels;  // full phrases, distinct after normalization
};

}  // namespace curator
