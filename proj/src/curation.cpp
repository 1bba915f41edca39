#include "curator/curation.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>

#include "curator/sim_engine.hpp"
#include "curator/text.hpp"

namespace curator {

std::string CurationConfig::validate() const {
  if (topk_threshold < 1) return "topk_threshold must be >= 1";
  if (rank_lo < 1 || rank_lo > rank_hi) return "rank interval must satisfy 1 <= lo <= hi";
  if (topk_threshold > rank_hi) return "topk_threshold must be <= rank_hi";
  if (num_negatives > rank_hi - rank_lo + 1) return "num_negatives exceeds rank interval size";
  return {};
}

DatasetCurationStats CurationReport::totals() const {
  DatasetCurationStats t;
  for (const auto& [_, s] : per_dataset) {
    t.pairs_in += s.pairs_in;
    t.pairs_kept += s.pairs_kept;
    t.pairs_filtered += s.pairs_filtered;
    t.negatives_attached += s.negatives_attached;
    t.fallback_count += s.fallback_count;
  }
  return t;
}

DocumentPool build_document_pool(const std::vector<TrainingExample>& examples,
                                 const std::vector<std::string>& extra_documents) {
  DocumentPool pool;
  std::unordered_map<std::string, std::size_t> index_by_key;

  auto intern = [&](const std::string& text) {
    const std::string key = normalize_text(text);
    if (auto it = index_by_key.find(key); it != index_by_key.end()) return it->second;
    std::size_t idx = pool.texts.size();
    index_by_key.emplace(key, idx);
    pool.texts.push_back(text);
    pool.ids.push_back("doc/" + std::to_string(idx));
    return idx;
  };

  for (const auto& ex : examples) {
    auto& member = pool.membership[ex.id];
    for (const auto& p : ex.positives) member.push_back(intern(p));
  }
  for (const auto& doc : extra_documents) intern(doc);
  return pool;
}

CurationResult curate(const std::vector<TrainingExample>& examples,
                      const std::vector<std::string>& extra_documents,
                      const EncoderSpec& encoder, const CurationConfig& cfg,
                      const InstructionTable& instructions) {
  if (auto err = cfg.validate(); !err.empty()) {
    throw std::runtime_error("invalid curation config: " + err);
  }

  DocumentPool pool = build_document_pool(examples, extra_documents);
  for (const auto& ex : examples) {
    if (pool.membership.at(ex.id).empty()) {
      throw std::runtime_error("corpus missing positives for example " + ex.id);
    }
  }

  // Unique rendered queries, embedded once. Mining and filtering both use
  // the instruction-prefixed form so they see the same geometry.
  std::vector<std::string> query_texts, query_ids;
  std::unordered_map<std::string, std::size_t> query_index;
  std::vector<std::size_t> example_query(examples.size());
  std::size_t max_positives = 1;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const std::string rendered = format_instruction(examples[i], instructions);
    auto [it, inserted] = query_index.emplace(rendered, query_texts.size());
    if (inserted) {
      query_ids.push_back("q/" + std::to_string(query_texts.size()));
      query_texts.push_back(rendered);
    }
    example_query[i] = it->second;
    max_positives = std::max(max_positives, examples[i].positives.size());
  }

  EmbeddingStore query_store = embed_texts(query_texts, query_ids, encoder);
  EmbeddingStore doc_store = embed_texts(pool.texts, pool.ids, encoder);

  // Depth: rank_hi positions must survive removing a query's positives.
  const std::size_t depth = cfg.rank_hi + max_positives;
  std::vector<RankedList> ranked = topk(query_store, doc_store, depth);

  CurationResult result;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const TrainingExample& ex = examples[i];
    auto& stats = result.report.per_dataset[ex.dataset_id];
    ++stats.pairs_in;

    const RankedList& list = ranked[example_query[i]];
    std::unordered_set<std::string> positive_ids;
    for (std::size_t pidx : pool.membership.at(ex.id)) positive_ids.insert(pool.ids[pidx]);

    // Rank of the best positive with the example's other positives removed:
    // count non-positive docs ahead of the first positive encountered.
    std::size_t best_rank = kBeyondK;
    std::size_t non_positive_seen = 0;
    std::vector<std::size_t> candidates;  // pool entry indices, positive-excluded ranking
    candidates.reserve(list.entries.size());
    for (const auto& entry : list.entries) {
      if (positive_ids.count(entry.doc_id)) {
        if (best_rank == kBeyondK) best_rank = non_positive_seen + 1;
      } else {
        ++non_positive_seen;
        candidates.push_back(std::stoul(entry.doc_id.substr(4)));
      }
    }

    if (best_rank == kBeyondK || best_rank > cfg.topk_threshold) {
      ++stats.pairs_filtered;
      continue;
    }
    ++stats.pairs_kept;

    // Candidates within [lo, hi] of the positive-excluded ranking.
    std::vector<std::size_t> in_range;
    for (std::size_t r = cfg.rank_lo; r <= cfg.rank_hi && r <= candidates.size(); ++r) {
      in_range.push_back(candidates[r - 1]);
    }

    TrainingExample kept = ex;
    kept.hard_negatives.clear();
    Rng rng = keyed_rng(cfg.seed, ex.id);
    if (in_range.size() >= cfg.num_negatives) {
      for (std::size_t idx :
           rng.sample_without_replacement(in_range.size(), cfg.num_negatives)) {
        kept.hard_negatives.push_back(pool.texts[in_range[idx]]);
      }
    } else {
      ++stats.fallback_count;
      for (std::size_t pool_idx : in_range) kept.hard_negatives.push_back(pool.texts[pool_idx]);
      if (cfg.fallback == MiningFallback::sample_tail) {
        // Top up from the deepest ranks below lo.
        std::size_t r = std::min(cfg.rank_lo - 1, candidates.size());
        while (kept.hard_negatives.size() < cfg.num_negatives && r >= 1) {
          kept.hard_negatives.push_back(pool.texts[candidates[r - 1]]);
          --r;
        }
      }
    }
    stats.negatives_attached += kept.hard_negatives.size();
    result.kept.push_back(std::move(kept));
  }
  return result;
}

}  // namespace curator
