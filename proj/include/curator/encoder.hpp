#pragma once

#include <atomic>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "curator/embedding_store.hpp"

namespace curator {

struct EncoderSpec {
  std::string endpoint = "mock";  // URL, or "mock" for the built-in encoder
  std::uint32_t dim = 64;
  std::size_t max_chars = 2048;
  std::size_t batch_size = 32;
  bool normalize = true;
  int max_retries = 3;
  std::string auth_token;  // sent as Bearer when non-empty
};

// Deterministic embedding from hashed character n-grams. Lexically similar
// texts share buckets and score higher under cosine; no global state, no
// platform dependence.
Eigen::VectorXf mock_encode(const std::string& text, std::uint32_t dim);

// Embeds texts in input order through the configured encoder. ids[i] in the
// returned store corresponds to texts[i]. Throws on service failure after
// retries or on a dimension mismatch.
EmbeddingStore embed_texts(const std::vector<std::string>& texts,
                           const std::vector<std::string>& ids, const EncoderSpec& spec);

// Per-process counter of texts actually encoded, for auditing that each
// unique text is embedded exactly once per curation run.
std::uint64_t encode_call_count();
void reset_encode_call_count();

}  // namespace curator
