#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "curator/rng.hpp"
#include "curator/types.hpp"

namespace curator {

struct RejectRecord {
  std::size_t line_no = 0;
  std::string reason;
  std::string raw;
};

struct IngestResult {
  std::vector<TrainingExample> examples;
  std::vector<RejectRecord> rejects;
};

// Reads a JSONL corpus. Malformed or invariant-violating lines go to the
// reject list with their line number, never silently dropped.
// schema_overrides maps input field names to canonical ones.
IngestResult ingest(const std::string& path,
                    const std::map<std::string, std::string>& schema_overrides = {});

void write_reject_log(const std::vector<RejectRecord>& rejects, const std::string& path);

// Registered label spaces plus abbreviation -> full-phrase mappings.
// Label negatives for classification data are sampled from the union
// across all registered datasets.
class LabelRegistry {
 public:
  void register_space(const LabelSpace& space);

  // (dataset_id, abbreviation, phrase) rows.
  void add_mapping(const std::string& dataset_id, const std::string& abbreviation,
                   const std::string& phrase);

  // Loads a JSON config: [{"dataset_id":..,"abbreviation":..,"phrase":..}, ...]
  void load_mapping_file(const std::string& path);

  // Maps a raw label to its full phrase (identity when no mapping exists)
  // and checks membership in the dataset's label space.
  std::optional<std::string> resolve(const std::string& dataset_id,
                                     const std::string& raw_label) const;

  const std::vector<std::string>& union_labels() const { return union_labels_; }

 private:
  std::unordered_map<std::string, std::unordered_set<std::string>> spaces_;
  std::unordered_map<std::string, std::unordered_map<std::string, std::string>> mappings_;
  std::vector<std::string> union_labels_;  // insertion order, deduplicated
  std::unordered_set<std::string> union_seen_;
};

struct ConversionResult {
  std::vector<TrainingExample> examples;
  std::vector<RejectRecord> rejects;  // unmappable labels
};

// Turns (sentence, label) rows into contrastive examples: the full label
// phrase is the positive, distinct labels from the registry union are the
// hard negatives. Sampling is keyed per example id, so order of processing
// cannot change the draw.
ConversionResult convert_classification(
    const std::vector<std::pair<std::string, std::string>>& sentences,
    const std::string& dataset_id, const LabelRegistry& registry,
    std::size_t num_label_negatives, std::uint64_t seed,
    TaskType task_type = TaskType::classification);

class ContaminationSet {
 public:
  void add_text(const std::string& text);
  void load_texts_file(const std::string& path);  // JSONL {"text": ...} or raw lines
  bool contains(const std::string& text) const;
  std::size_t size() const { return keys_.size(); }

 private:
  std::unordered_set<Hash128, Hash128Hasher> keys_;
};

struct FilterResult {
  std::vector<TrainingExample> kept;
  std::unordered_map<std::string, std::size_t> removed_per_dataset;
  std::size_t removed_total = 0;
};

// Removes an example when its query or any positive matches the set.
FilterResult filter_contamination(const std::vector<TrainingExample>& examples,
                                  const ContaminationSet& contamination);

// Removes an example when every positive is shorter than min_chars.
FilterResult filter_short(const std::vector<TrainingExample>& examples, std::size_t min_chars);

// Dataset-specific quality rules are not specified upstream; callers can
// plug any predicate here. Returns kept examples and the removed count.
FilterResult filter_predicate(const std::vector<TrainingExample>& examples,
                              const std::function<bool(const TrainingExample&)>& keep);

inline constexpr const char* kGeneralRetrievalInstruction =
    "Given a query, retrieve documents that answer the query.";

// Per-dataset instructions for classification/clustering tasks.
class InstructionTable {
 public:
  InstructionTable();  // preloaded with the shipped defaults
  void set(const std::string& dataset_id, const std::string& instruction);
  std::optional<std::string> get(const std::string& dataset_id) const;

 private:
  std::unordered_map<std::string, std::string> table_;
};

// Renders the query an encoder should see. Asymmetric examples get the
// instruction prefix; symmetric ones pass through unchanged.
// Throws std::runtime_error("missing instruction") when an asymmetric
// example has neither its own instruction nor a task default.
std::string format_instruction(const TrainingExample& ex,
                               const InstructionTable& table = InstructionTable());

}  // namespace curator
