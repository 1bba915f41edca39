#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "curator/encoder.hpp"
#include "curator/rng.hpp"
#include "curator/sim_engine.hpp"

using namespace curator;

namespace {

// Independent oracle: scalar cosine for every pair, full sort under the
// (score desc, doc_id asc) rule.
std::vector<RankedEntry> naive_topk(const EmbeddingStore& queries, std::size_t q,
                                    const EmbeddingStore& corpus, std::size_t k) {
  struct Scored {
    std::string id;
    double score;
  };
  std::vector<Scored> all;
  for (std::size_t d = 0; d < corpus.count(); ++d) {
    double dot = 0, qn = 0, dn = 0;
    for (std::uint32_t i = 0; i < corpus.dim; ++i) {
      double qa = queries.vectors(static_cast<Eigen::Index>(q), i);
      double da = corpus.vectors(static_cast<Eigen::Index>(d), i);
      dot += qa * da;
      qn += qa * qa;
      dn += da * da;
    }
    double denom = std::sqrt(qn) * std::sqrt(dn);
    all.push_back({corpus.ids[d], denom > 0 ? dot / denom : 0.0});
  }
  std::sort(all.begin(), all.end(), [](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  all.resize(std::min(k, all.size()));
  std::vector<RankedEntry> out;
  for (const auto& s : all) out.push_back({s.id, static_cast<float>(s.score)});
  return out;
}

EmbeddingStore random_store(std::size_t count, std::uint32_t dim, Rng& rng,
                            const std::string& prefix) {
  EmbeddingStore store;
  store.dim = dim;
  store.vectors.resize(static_cast<Eigen::Index>(count), dim);
  for (std::size_t i = 0; i < count; ++i) {
    store.ids.push_back(prefix + std::to_string(i));
    for (std::uint32_t j = 0; j < dim; ++j) {
      store.vectors(static_cast<Eigen::Index>(i), j) = static_cast<float>(rng.gaussian());
    }
  }
  return store;
}

void check_against_oracle(const EmbeddingStore& queries, const EmbeddingStore& corpus,
                          std::size_t k, const TopKOptions& options = {}) {
  auto got = topk(queries, corpus, k, options);
  REQUIRE(got.size() == queries.count());
  for (std::size_t q = 0; q < queries.count(); ++q) {
    auto expected = naive_topk(queries, q, corpus, k);
    REQUIRE(got[q].entries.size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
      CHECK(got[q].entries[i].doc_id == expected[i].doc_id);
      CHECK(got[q].entries[i].score == doctest::Approx(expected[i].score).epsilon(1e-6));
    }
  }
}

}  // namespace

TEST_CASE("query identical to a corpus vector ranks itself first") {
  Rng rng(3);
  EmbeddingStore corpus = random_store(20, 16, rng, "d");
  EmbeddingStore queries;
  queries.dim = 16;
  queries.ids = {"q0"};
  queries.vectors = corpus.vectors.row(7);
  auto r = topk(queries, corpus, 3);
  CHECK(r[0].entries[0].doc_id == "d7");
  CHECK(r[0].entries[0].score == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("4-doc corpus matches the scalar oracle exactly") {
  EmbeddingStore corpus;
  corpus.dim = 2;
  corpus.ids = {"a", "b", "c", "d"};
  corpus.vectors.resize(4, 2);
  corpus.vectors << 1.0f, 0.0f, 0.8f, 0.6f, 0.0f, 1.0f, -1.0f, 0.0f;
  EmbeddingStore queries;
  queries.dim = 2;
  queries.ids = {"q"};
  queries.vectors.resize(1, 2);
  queries.vectors << 1.0f, 0.1f;

  check_against_oracle(queries, corpus, 4);
  auto r = topk(queries, corpus, 4);
  CHECK(r[0].entries[0].doc_id == "a");
  CHECK(r[0].entries[3].doc_id == "d");

  SUBCASE("rank_of agrees with the oracle for a mid-list doc") {
    CHECK(rank_of(r[0], "b") == 2);
    CHECK(rank_of(r[0], "c") == 3);
  }
}

TEST_CASE("k larger than corpus returns everything fully sorted") {
  Rng rng(11);
  EmbeddingStore corpus = random_store(9, 8, rng, "d");
  EmbeddingStore queries = random_store(2, 8, rng, "q");
  auto r = topk(queries, corpus, 50);
  for (const auto& list : r) {
    CHECK(list.entries.size() == 9);
    for (std::size_t i = 1; i < list.entries.size(); ++i) {
      CHECK(list.entries[i - 1].score >= list.entries[i].score);
    }
  }
  check_against_oracle(queries, corpus, 50);
}

TEST_CASE("ties break by ascending doc_id") {
  EmbeddingStore corpus;
  corpus.dim = 2;
  corpus.ids = {"z", "m", "a"};
  corpus.vectors.resize(3, 2);
  // identical vectors: all cosines tie
  corpus.vectors << 1.0f, 1.0f, 1.0f, 1.0f, 1.0f, 1.0f;
  EmbeddingStore queries;
  queries.dim = 2;
  queries.ids = {"q"};
  queries.vectors.resize(1, 2);
  queries.vectors << 1.0f, 0.0f;
  auto r = topk(queries, corpus, 3);
  CHECK(r[0].entries[0].doc_id == "a");
  CHECK(r[0].entries[1].doc_id == "m");
  CHECK(r[0].entries[2].doc_id == "z");
}

TEST_CASE("chunk size and thread count do not change results") {
  Rng rng(23);
  EmbeddingStore corpus = random_store(300, 12, rng, "d");
  EmbeddingStore queries = random_store(10, 12, rng, "q");

  auto reference = topk(queries, corpus, 25, {.chunk_rows = 8192, .threads = 1});
  for (std::size_t chunk : {1ul, 7ul, 100ul}) {
    for (unsigned threads : {1u, 4u}) {
      auto r = topk(queries, corpus, 25, {.chunk_rows = chunk, .threads = threads});
      for (std::size_t q = 0; q < queries.count(); ++q) {
        REQUIRE(r[q].entries.size() == reference[q].entries.size());
        for (std::size_t i = 0; i < r[q].entries.size(); ++i) {
          CHECK(r[q].entries[i].doc_id == reference[q].entries[i].doc_id);
          CHECK(r[q].entries[i].score == reference[q].entries[i].score);
        }
      }
    }
  }
}

TEST_CASE("larger k extends the smaller-k prefix") {
  Rng rng(31);
  EmbeddingStore corpus = random_store(200, 10, rng, "d");
  EmbeddingStore queries = random_store(5, 10, rng, "q");
  auto small = topk(queries, corpus, 10);
  auto large = topk(queries, corpus, 40);
  for (std::size_t q = 0; q < queries.count(); ++q) {
    for (std::size_t i = 0; i < 10; ++i) {
      CHECK(large[q].entries[i].doc_id == small[q].entries[i].doc_id);
    }
  }
}

TEST_CASE("dimension mismatch is fatal") {
  Rng rng(1);
  EmbeddingStore corpus = random_store(4, 8, rng, "d");
  EmbeddingStore queries = random_store(1, 16, rng, "q");
  CHECK_THROWS(topk(queries, corpus, 2));
}

TEST_CASE("rank_of returns the sentinel for absent docs") {
  RankedList list;
  list.query_id = "q";
  list.entries = {{"a", 0.9f}, {"b", 0.5f}};
  CHECK(rank_of(list, "a") == 1);
  CHECK(rank_of(list, "zzz") == kBeyondK);
}

TEST_CASE("random corpora equal the oracle") {
  Rng rng(99);
  for (int trial = 0; trial < 10; ++trial) {
    std::size_t n = 20 + rng.bounded(200);
    std::uint32_t dim = static_cast<std::uint32_t>(4 + rng.bounded(60));
    EmbeddingStore corpus = random_store(n, dim, rng, "d");
    EmbeddingStore queries = random_store(3, dim, rng, "q");
    check_against_oracle(queries, corpus, 1 + rng.bounded(n + 5));
  }
}
