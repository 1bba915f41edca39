#include "curator/encoder.hpp"

#include <chrono>
#include <stdexcept>
#include <thread>

#define CPPHTTPLIB_NO_EXCEPTIONS 0
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "curator/rng.hpp"
#include "curator/text.hpp"

namespace curator {

namespace {

std::atomic<std::uint64_t> g_encode_calls{0};

Eigen::VectorXf mock_encode_impl(const std::string& text, std::uint32_t dim) {
  Eigen::VectorXf v = Eigen::VectorXf::Zero(dim);
  const std::string padded = "^" + text + "$";

  auto bump = [&](std::string_view gram, float weight) {
    std::uint64_t h = fnv1a64(gram);
    std::uint32_t bucket = static_cast<std::uint32_t>(h % dim);
    float sign = (h >> 32) & 1 ? 1.0f : -1.0f;
    v[bucket] += sign * weight;
  };

  // Character trigrams carry most of the lexical signal; unigrams keep very
  // short strings from collapsing to the zero vector.
  for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
    bump(std::string_view(padded).substr(i, 3), 1.0f);
  }
  for (std::size_t i = 0; i < padded.size(); ++i) {
    bump(std::string_view(padded).substr(i, 1), 0.25f);
  }
  return v;
}

EmbeddingStore assemble(const std::vector<std::string>& ids, std::uint32_t dim,
                        std::vector<Eigen::VectorXf> rows, bool normalize) {
  EmbeddingStore store;
  store.dim = dim;
  store.ids = ids;
  store.vectors.resize(static_cast<Eigen::Index>(rows.size()), dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Eigen::VectorXf& r = rows[i];
    if (normalize) {
      float n = r.norm();
      if (n > 0) r /= n;
    }
    store.vectors.row(static_cast<Eigen::Index>(i)) = r.transpose();
  }
  if (auto err = store.validate(); !err.empty()) {
    throw std::runtime_error("encoder produced invalid store: " + err);
  }
  return store;
}

std::vector<Eigen::VectorXf> embed_batch_http(httplib::Client& client,
                                              const std::vector<std::string>& batch,
                                              const EncoderSpec& spec, std::size_t batch_index) {
  nlohmann::json body{{"texts", batch}};
  httplib::Headers headers;
  if (!spec.auth_token.empty()) {
    headers.emplace("Authorization", "Bearer " + spec.auth_token);
  }

  for (int attempt = 0;; ++attempt) {
    auto res = client.Post("/embed", headers, body.dump(), "application/json");
    if (res && res->status >= 200 && res->status < 300) {
      nlohmann::json parsed = nlohmann::json::parse(res->body);
      std::vector<Eigen::VectorXf> out;
      for (const auto& row : parsed.at("vectors")) {
        Eigen::VectorXf v(spec.dim);
        if (row.size() != spec.dim) {
          throw std::runtime_error(
              "encoder returned dimension " + std::to_string(row.size()) + ", expected " +
              std::to_string(spec.dim) + " (batch " + std::to_string(batch_index) + ")");
        }
        for (std::uint32_t i = 0; i < spec.dim; ++i) v[i] = row[i].get<float>();
        out.push_back(std::move(v));
      }
      if (out.size() != batch.size()) {
        throw std::runtime_error("encoder returned " + std::to_string(out.size()) +
                                 " vectors for " + std::to_string(batch.size()) + " texts");
      }
      return out;
    }
    if (attempt >= spec.max_retries) {
      std::string status = res ? std::to_string(res->status) : "transport error";
      throw std::runtime_error("encoder request failed after " +
                               std::to_string(attempt + 1) + " attempts (batch " +
                               std::to_string(batch_index) + "): " + status);
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(50 << attempt));
  }
}

}  // namespace

Eigen::VectorXf mock_encode(const std::string& text, std::uint32_t dim) {
  if (dim < 1) throw std::runtime_error("mock_encode: dim must be >= 1");
  return mock_encode_impl(text, dim);
}

EmbeddingStore embed_texts(const std::vector<std::string>& texts,
                           const std::vector<std::string>& ids, const EncoderSpec& spec) {
  if (texts.size() != ids.size()) throw std::runtime_error("texts/ids length mismatch");

  std::vector<std::string> truncated;
  truncated.reserve(texts.size());
  for (const auto& t : texts) truncated.push_back(utf8_truncate(t, spec.max_chars));

  g_encode_calls += truncated.size();

  std::vector<Eigen::VectorXf> rows;
  rows.reserve(truncated.size());
  if (spec.endpoint == "mock") {
    for (const auto& t : truncated) rows.push_back(mock_encode_impl(t, spec.dim));
  } else {
    httplib::Client client(spec.endpoint);
    client.set_read_timeout(60);
    for (std::size_t start = 0; start < truncated.size(); start += spec.batch_size) {
      std::size_t end = std::min(start + spec.batch_size, truncated.size());
      std::vector<std::string> batch(truncated.begin() + start, truncated.begin() + end);
      auto vecs = embed_batch_http(client, batch, spec, start / spec.batch_size);
      for (auto& v : vecs) rows.push_back(std::move(v));
    }
  }
  return assemble(ids, spec.dim, std::move(rows), spec.normalize);
}

std::uint64_t encode_call_count() { return g_encode_calls.load(); }
void reset_encode_call_count() { g_encode_calls.store(0); }

}  // namespace curator
