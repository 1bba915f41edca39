#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "curator/corpus.hpp"
#include "curator/encoder.hpp"
#include "curator/types.hpp"

namespace curator {

enum class MiningFallback { skip_mining, sample_tail };

struct CurationConfig {
  std::size_t topk_threshold = 50;  // keep a pair only when its positive ranks <= this
  std::size_t num_negatives = 7;
  std::size_t rank_lo = 50;  // 1-indexed inclusive mining interval, positives excluded
  std::size_t rank_hi = 100;
  std::uint64_t seed = 0;
  MiningFallback fallback = MiningFallback::skip_mining;

  std::string validate() const;
};

struct DatasetCurationStats {
  std::size_t pairs_in = 0;
  std::size_t pairs_kept = 0;
  std::size_t pairs_filtered = 0;
  std::size_t negatives_attached = 0;
  std::size_t fallback_count = 0;
};

struct CurationReport {
  std::map<std::string, DatasetCurationStats> per_dataset;
  DatasetCurationStats totals() const;
};

struct DocumentPool {
  std::vector<std::string> ids;    // "doc/<index>"
  std::vector<std::string> texts;  // deduplicated by normalized text
  // example id -> pool indices of that example's positives
  std::unordered_map<std::string, std::vector<std::size_t>> membership;
};

// Deduplicated union of all positives plus any extra corpus documents.
DocumentPool build_document_pool(const std::vector<TrainingExample>& examples,
                                 const std::vector<std::string>& extra_documents = {});

struct CurationResult {
  std::vector<TrainingExample> kept;  // with hard_negatives attached
  CurationReport report;
};

// Single-pass filtering + mining: embeds rendered queries and the document
// pool once, ranks each query over the pool, drops pairs whose best positive
// ranks beyond the threshold (other positives removed from the ranking
// first), and mines negatives from [rank_lo, rank_hi] of the
// positive-excluded ranking.
CurationResult curate(const std::vector<TrainingExample>& examples,
                      const std::vector<std::string>& extra_documents,
                      const EncoderSpec& encoder, const CurationConfig& cfg,
                      const InstructionTable& instructions = InstructionTable());

}  // namespace curator
