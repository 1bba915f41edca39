#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "curator/embedding_store.hpp"

namespace curator {

struct RankedEntry {
  std::string doc_id;
  float score = 0.0f;
};

struct RankedList {
  std::string query_id;
  std::vector<RankedEntry> entries;  // descending score, ties by ascending doc_id
  std::size_t k = 0;                 // requested depth
};

inline constexpr std::size_t kBeyondK = 0;  // rank_of sentinel (ranks are 1-indexed)

struct TopKOptions {
  std::size_t chunk_rows = 8192;
  unsigned threads = 0;  // 0 = hardware concurrency
};

// Exact cosine top-k of every query over the whole corpus. Dot products
// accumulate in 64-bit; the (score desc, doc_id asc) order is total, so
// output is identical for any chunk size or thread count.
std::vector<RankedList> topk(const EmbeddingStore& queries, const EmbeddingStore& corpus,
                             std::size_t k, const TopKOptions& options = {});

// 1-indexed rank of doc_id in the list, or kBeyondK when absent.
std::size_t rank_of(const RankedList& ranked, const std::string& doc_id);

}  // namespace curator
