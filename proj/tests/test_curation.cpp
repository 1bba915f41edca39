#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "curator/curation.hpp"
#include "curator/text.hpp"

using namespace curator;

namespace {

TrainingExample make_example(const std::string& id, const std::string& query,
                             std::vector<std::string> positives,
                             const std::string& dataset = "ds") {
  TrainingExample ex;
  ex.id = id;
  ex.dataset_id = dataset;
  ex.task_type = TaskType::sts;  // symmetric: rendered query == query
  ex.symmetry = Symmetry::symmetric;
  ex.query = query;
  ex.positives = std::move(positives);
  return ex;
}

// Scalar mock-embedding cosine, independent of sim_engine.
double oracle_cosine(const std::string& a, const std::string& b, std::uint32_t dim) {
  Eigen::VectorXd va = mock_encode(a, dim).cast<double>();
  Eigen::VectorXd vb = mock_encode(b, dim).cast<double>();
  return va.dot(vb) / (va.norm() * vb.norm());
}

// 1-indexed rank of `doc` for `query` over `pool` with all texts in
// `excluded` (normalized) removed first. 0 when doc itself is excluded.
std::size_t oracle_rank(const std::string& query, const std::string& doc,
                        const std::vector<std::string>& pool,
                        const std::unordered_set<std::string>& excluded, std::uint32_t dim) {
  struct Scored {
    std::string text;
    double score;
  };
  std::vector<Scored> scored;
  for (const auto& p : pool) {
    if (excluded.count(normalize_text(p)) && normalize_text(p) != normalize_text(doc)) continue;
    scored.push_back({p, oracle_cosine(query, p, dim)});
  }
  std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.text < b.text;  // stable enough for distinct fixture texts
  });
  for (std::size_t i = 0; i < scored.size(); ++i) {
    if (normalize_text(scored[i].text) == normalize_text(doc)) return i + 1;
  }
  return 0;
}

std::vector<std::string> filler_docs(std::size_t n) {
  std::vector<std::string> docs;
  for (std::size_t i = 0; i < n; ++i) {
    docs.push_back("unique filler document number " + std::to_string(i) + " about subject " +
                   std::to_string(i * 31 % 97));
  }
  return docs;
}

}  // namespace

TEST_CASE("build_document_pool dedups shared positives") {
  auto pool = build_document_pool({make_example("1", "q1", {"shared doc"}),
                                   make_example("2", "q2", {"shared doc", "other"})});
  CHECK(pool.texts.size() == 2);
  CHECK(pool.membership.at("1").size() == 1);
  CHECK(pool.membership.at("2").size() == 2);
  CHECK(pool.membership.at("1")[0] == pool.membership.at("2")[0]);
}

TEST_CASE("build_document_pool counts distinct positives") {
  auto pool = build_document_pool({make_example("1", "q1", {"a", "b"}),
                                   make_example("2", "q2", {"c"}),
                                   make_example("3", "q3", {"d", "e"})});
  CHECK(pool.texts.size() == 5);
}

TEST_CASE("pool dedups documents only, not queries") {
  auto pool = build_document_pool({make_example("1", "same text", {"same text"})});
  CHECK(pool.texts.size() == 1);  // the positive; the query is not a pool member
}

TEST_CASE("k >= corpus size filters nothing") {
  std::vector<TrainingExample> examples;
  for (int i = 0; i < 5; ++i) {
    examples.push_back(make_example("e" + std::to_string(i), "query " + std::to_string(i),
                                    {"document " + std::to_string(i)}));
  }
  EncoderSpec spec;
  spec.dim = 32;
  CurationConfig cfg;
  cfg.topk_threshold = 100;
  cfg.rank_lo = 100;
  cfg.rank_hi = 100;
  cfg.num_negatives = 1;
  auto r = curate(examples, {}, spec, cfg);
  CHECK(r.kept.size() == 5);
  CHECK(r.report.totals().pairs_filtered == 0);
}

TEST_CASE("planted-rank fixture filters exactly the unrelated pair") {
  // Example "good": positive is a verbatim copy of the query (rank 1).
  // Example "bad": positive is unrelated; near-duplicates of the query
  // planted in the corpus push it beyond the threshold.
  std::vector<TrainingExample> examples = {
      make_example("good", "the cat sat on the mat", {"the cat sat on the mat"}),
      make_example("bad", "the dog barked loudly at dawn", {"quarterly financial revenue report"}),
  };
  std::vector<std::string> extra;
  for (int i = 0; i < 8; ++i) {
    extra.push_back("the dog barked loudly at dusk variant " + std::to_string(i));
  }
  auto more = filler_docs(10);
  extra.insert(extra.end(), more.begin(), more.end());

  EncoderSpec spec;
  spec.dim = 64;
  CurationConfig cfg;
  cfg.topk_threshold = 3;
  cfg.rank_lo = 3;
  cfg.rank_hi = 8;
  cfg.num_negatives = 2;

  // Confirm the plant with the independent oracle before asserting.
  std::vector<std::string> pool = {"the cat sat on the mat", "quarterly financial revenue report"};
  pool.insert(pool.end(), extra.begin(), extra.end());
  REQUIRE(oracle_rank("the dog barked loudly at dawn", "quarterly financial revenue report", pool,
                      {}, spec.dim) > cfg.topk_threshold);

  auto r = curate(examples, extra, spec, cfg);
  REQUIRE(r.kept.size() == 1);
  CHECK(r.kept[0].id == "good");
  CHECK(r.report.per_dataset.at("ds").pairs_filtered == 1);
}

TEST_CASE("mined negatives lie in the configured rank interval and exclude positives") {
  std::vector<TrainingExample> examples;
  for (int i = 0; i < 3; ++i) {
    std::string topic = "topic" + std::to_string(i);
    examples.push_back(make_example("e" + std::to_string(i), "find " + topic + " information",
                                    {"find " + topic + " information"}));
  }
  std::vector<std::string> extra = filler_docs(200);

  EncoderSpec spec;
  spec.dim = 64;
  CurationConfig cfg;  // paper defaults: k=50, m=7, [50, 100]
  cfg.seed = 17;

  auto r = curate(examples, extra, spec, cfg);
  REQUIRE(r.kept.size() == 3);
  for (const auto& ex : r.kept) {
    CHECK(ex.hard_negatives.size() == 7);

    std::vector<std::string> pool;
    for (const auto& e : examples) pool.push_back(e.positives[0]);
    pool.insert(pool.end(), extra.begin(), extra.end());
    std::unordered_set<std::string> own_positives;
    for (const auto& p : ex.positives) own_positives.insert(normalize_text(p));

    for (const auto& neg : ex.hard_negatives) {
      CHECK(own_positives.count(normalize_text(neg)) == 0);
      std::size_t rank = oracle_rank(ex.query, neg, pool, own_positives, spec.dim);
      CHECK(rank >= cfg.rank_lo);
      CHECK(rank <= cfg.rank_hi);
    }
  }
}

TEST_CASE("skip_mining attaches only what the range holds") {
  std::vector<TrainingExample> examples = {
      make_example("1", "tiny corpus query", {"tiny corpus query answer"})};
  std::vector<std::string> extra = filler_docs(4);  // pool of 5, range mostly empty

  EncoderSpec spec;
  spec.dim = 32;
  CurationConfig cfg;
  cfg.topk_threshold = 3;
  cfg.rank_lo = 3;
  cfg.rank_hi = 10;
  cfg.num_negatives = 5;
  cfg.fallback = MiningFallback::skip_mining;

  auto r = curate(examples, extra, spec, cfg);
  REQUIRE(r.kept.size() == 1);
  CHECK(r.kept[0].hard_negatives.size() < 5);
  CHECK(r.report.totals().fallback_count == 1);

  SUBCASE("sample_tail tops up from shallower ranks") {
    cfg.fallback = MiningFallback::sample_tail;
    auto r2 = curate(examples, extra, spec, cfg);
    CHECK(r2.kept[0].hard_negatives.size() > r.kept[0].hard_negatives.size());
  }
}

TEST_CASE("curation is deterministic and embeds each unique text once") {
  std::vector<TrainingExample> examples;
  for (int i = 0; i < 10; ++i) {
    examples.push_back(make_example("e" + std::to_string(i), "query number " + std::to_string(i),
                                    {"document number " + std::to_string(i)}));
  }
  std::vector<std::string> extra = filler_docs(60);

  EncoderSpec spec;
  spec.dim = 32;
  CurationConfig cfg;
  cfg.topk_threshold = 20;
  cfg.rank_lo = 20;
  cfg.rank_hi = 40;
  cfg.num_negatives = 3;
  cfg.seed = 5;

  reset_encode_call_count();
  auto r1 = curate(examples, extra, spec, cfg);
  // 10 unique queries + 70 unique pool docs
  CHECK(encode_call_count() == 80);

  auto r2 = curate(examples, extra, spec, cfg);
  REQUIRE(r1.kept.size() == r2.kept.size());
  for (std::size_t i = 0; i < r1.kept.size(); ++i) {
    CHECK(r1.kept[i].id == r2.kept[i].id);
    CHECK(r1.kept[i].hard_negatives == r2.kept[i].hard_negatives);
  }
}

TEST_CASE("report conserves pairs per dataset") {
  std::vector<TrainingExample> examples;
  for (int i = 0; i < 6; ++i) {
    examples.push_back(make_example("a" + std::to_string(i), "alpha query " + std::to_string(i),
                                    {"alpha doc " + std::to_string(i)}, "alpha"));
    examples.push_back(make_example("b" + std::to_string(i), "beta query " + std::to_string(i),
                                    {"beta doc " + std::to_string(i)}, "beta"));
  }
  EncoderSpec spec;
  spec.dim = 32;
  CurationConfig cfg;
  cfg.topk_threshold = 4;
  cfg.rank_lo = 4;
  cfg.rank_hi = 8;
  cfg.num_negatives = 2;

  auto r = curate(examples, filler_docs(30), spec, cfg);
  for (const auto& [ds, s] : r.report.per_dataset) {
    CHECK(s.pairs_in == s.pairs_kept + s.pairs_filtered);
    CHECK(s.pairs_in == 6);
  }
}

TEST_CASE("multi-positive queries are not filtered for self-competition") {
  // Query with two near-duplicate positives: the second positive would
  // occupy rank 1, but it is excluded before ranks are assigned.
  std::vector<TrainingExample> examples = {
      make_example("multi", "shared subject query", {"shared subject query answer one",
                                                     "shared subject query answer two"})};
  EncoderSpec spec;
  spec.dim = 64;
  CurationConfig cfg;
  cfg.topk_threshold = 1;
  cfg.rank_lo = 1;
  cfg.rank_hi = 4;
  cfg.num_negatives = 1;

  auto r = curate(examples, filler_docs(10), spec, cfg);
  CHECK(r.kept.size() == 1);
}

TEST_CASE("invalid config is rejected") {
  CurationConfig cfg;
  cfg.rank_lo = 10;
  cfg.rank_hi = 5;
  CHECK_FALSE(cfg.validate().empty());
  cfg = {};
  cfg.num_negatives = 200;
  CHECK_FALSE(cfg.validate().empty());
}
