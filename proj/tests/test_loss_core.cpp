#include <doctest.h>

#include <cmath>

#include "curator/loss_core.hpp"
#include "curator/rng.hpp"

using namespace curator;

namespace {

LossConfig small_config(Eigen::Index dim) {
  LossConfig cfg;
  cfg.mrl_dims = {dim, dim / 2, dim / 4};
  cfg.mrl_weights = {1.0, 0.3, 0.1};
  return cfg;
}

BatchTexts small_batch(std::size_t n, bool with_negatives) {
  BatchTexts batch;
  for (std::size_t i = 0; i < n; ++i) {
    batch.queries.push_back("question about subject " + std::to_string(i));
    batch.positives.push_back("answer describing subject " + std::to_string(i));
    if (with_negatives) {
      batch.hard_negatives.push_back("distractor passage " + std::to_string(i));
    }
  }
  return batch;
}

Eigen::MatrixXd unit_rows(std::initializer_list<std::initializer_list<double>> rows) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index r = 0;
  for (const auto& row : rows) {
    Eigen::Index c = 0;
    for (double v : row) m(r, c++) = v;
    m.row(r) /= m.row(r).norm();
    ++r;
  }
  return m;
}

}  // namespace

TEST_CASE("mean_pool basics") {
  Eigen::MatrixXd tokens(2, 2);
  tokens << 1.0, 0.0, 0.0, 1.0;

  SUBCASE("single unmasked token is returned as-is") {
    Eigen::VectorXd v = mean_pool(tokens, {true, false});
    CHECK(v(0) == 1.0);
    CHECK(v(1) == 0.0);
  }
  SUBCASE("two unmasked tokens average") {
    Eigen::VectorXd v = mean_pool(tokens, {true, true});
    CHECK(v(0) == doctest::Approx(0.5));
    CHECK(v(1) == doctest::Approx(0.5));
  }
  SUBCASE("all masked is an error") {
    CHECK_THROWS(mean_pool(tokens, {false, false}));
  }
}

TEST_CASE("mean_pool matches a scalar loop on random tokens") {
  Rng rng(5);
  Eigen::MatrixXd tokens(5, 7);
  for (Eigen::Index i = 0; i < 5; ++i) {
    for (Eigen::Index j = 0; j < 7; ++j) tokens(i, j) = rng.gaussian();
  }
  std::vector<bool> mask = {true, false, true, true, false};
  Eigen::VectorXd got = mean_pool(tokens, mask);
  for (Eigen::Index j = 0; j < 7; ++j) {
    double sum = 0.0;
    int n = 0;
    for (Eigen::Index i = 0; i < 5; ++i) {
      if (mask[static_cast<std::size_t>(i)]) {
        sum += tokens(i, j);
        ++n;
      }
    }
    CHECK(got(j) == doctest::Approx(sum / n).epsilon(1e-7));
  }
}

TEST_CASE("truncate_renorm") {
  SUBCASE("full dimension on a unit vector is the identity") {
    Eigen::VectorXd v(3);
    v << 0.6, 0.8, 0.0;
    Eigen::VectorXd r = truncate_renorm(v, 3);
    CHECK((r - v).norm() < 1e-6);
  }
  SUBCASE("3-4-5 triangle") {
    Eigen::VectorXd v(3);
    v << 3.0, 4.0, 12.0;
    Eigen::VectorXd r = truncate_renorm(v, 2);
    CHECK(r(0) == doctest::Approx(0.6));
    CHECK(r(1) == doctest::Approx(0.8));
  }
  SUBCASE("random truncation keeps unit norm and matches scalar cosine") {
    Rng rng(9);
    Eigen::VectorXd v(128);
    for (Eigen::Index i = 0; i < 128; ++i) v(i) = rng.gaussian();
    v /= v.norm();
    Eigen::VectorXd r = truncate_renorm(v, 64);
    CHECK(r.norm() == doctest::Approx(1.0).epsilon(1e-6));
    double scalar_dot = 0.0, scalar_norm = 0.0;
    for (Eigen::Index i = 0; i < 64; ++i) {
      scalar_dot += v(i) * v(i);
      scalar_norm += v(i) * v(i);
    }
    double expected_cos = scalar_dot / std::sqrt(scalar_norm);  // cos to the full unit vector
    CHECK(r.dot(v.head(64)) / v.head(64).norm() * 1.0 ==
          doctest::Approx(1.0).epsilon(1e-9));
    CHECK(r.dot(v) == doctest::Approx(expected_cos).epsilon(1e-9));
  }
  SUBCASE("zero prefix is an error") {
    Eigen::VectorXd v(3);
    v << 0.0, 0.0, 1.0;
    CHECK_THROWS(truncate_renorm(v, 2));
  }
}

TEST_CASE("infonce closed forms") {
  Eigen::VectorXd e1(2), e2(2);
  e1 << 1.0, 0.0;
  e2 << 0.0, 1.0;

  SUBCASE("no negatives gives zero loss") {
    CHECK(infonce(e1, e1, {}, 0.01) == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("symmetric tie gives ln 2 regardless of temperature") {
    // q.p == q.n == 0: the two logits tie and tau cancels.
    CHECK(std::abs(infonce(e1, e2, {e2}, 0.5) - std::log(2.0)) < 1e-12);
    CHECK(std::abs(infonce(e1, e2, {e2}, 0.01) - std::log(2.0)) < 1e-12);
    // extreme temperature: max-subtraction keeps the tie exact
    CHECK(std::abs(infonce(e1, e2, {e2}, 1e-6) - std::log(2.0)) < 1e-12);
  }
  SUBCASE("orthogonal negative at tau=0.01 matches scalar arithmetic") {
    double loss = infonce(e1, e1, {e2}, 0.01);
    // scalar: logits 100 and 0 -> -log(e^100/(e^100+e^0)) = log(1+e^-100)
    double expected = std::log1p(std::exp(-100.0));
    CHECK(loss == doctest::Approx(expected).epsilon(1e-9));
  }
  SUBCASE("dimension mismatch is an error") {
    Eigen::VectorXd bad(3);
    bad << 1, 0, 0;
    CHECK_THROWS(infonce(e1, bad, {}, 0.01));
  }
}

TEST_CASE("batch_infonce on 2 orthogonal pairs matches 2x2 enumeration") {
  Eigen::MatrixXd q = unit_rows({{1, 0}, {0, 1}});
  Eigen::MatrixXd p = unit_rows({{1, 0}, {0, 1}});
  LossConfig cfg;
  cfg.temperature = 1.0;
  cfg.use_hard_negatives = false;
  double got = batch_infonce(q, p, Eigen::MatrixXd(0, 2), cfg);
  // each query: logits (1, 0) with target first -> loss = log(1 + e^-1)
  double expected = std::log1p(std::exp(-1.0));
  CHECK(got == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("batch_infonce with no negative sources is zero") {
  Eigen::MatrixXd q = unit_rows({{1, 0}, {0, 1}});
  LossConfig cfg;
  cfg.in_batch_negatives = false;
  cfg.use_hard_negatives = false;
  CHECK(batch_infonce(q, q, Eigen::MatrixXd(0, 2), cfg) == 0.0);
}

TEST_CASE("duplicate positives raise the loss above distinct positives") {
  LossConfig cfg;
  cfg.temperature = 0.1;
  cfg.use_hard_negatives = false;
  Eigen::MatrixXd q = unit_rows({{1, 0, 0}, {0, 1, 0}});
  Eigen::MatrixXd distinct = unit_rows({{1, 0.1, 0}, {0.1, 1, 0}});
  Eigen::MatrixXd duplicate = unit_rows({{1, 0.1, 0}, {1, 0.1, 0}});
  double loss_distinct = batch_infonce(q, distinct, Eigen::MatrixXd(0, 3), cfg);
  double loss_duplicate = batch_infonce(q, duplicate, Eigen::MatrixXd(0, 3), cfg);
  CHECK(loss_duplicate > loss_distinct);
}

TEST_CASE("loss is invariant to example order within the batch") {
  Rng rng(13);
  Eigen::MatrixXd q(4, 8), p(4, 8);
  for (Eigen::Index i = 0; i < 4; ++i) {
    for (Eigen::Index j = 0; j < 8; ++j) {
      q(i, j) = rng.gaussian();
      p(i, j) = rng.gaussian();
    }
    q.row(i) /= q.row(i).norm();
    p.row(i) /= p.row(i).norm();
  }
  LossConfig cfg;
  cfg.temperature = 0.05;
  cfg.use_hard_negatives = false;
  double base = batch_infonce(q, p, Eigen::MatrixXd(0, 8), cfg);

  Eigen::PermutationMatrix<Eigen::Dynamic> perm(4);
  perm.setIdentity();
  perm.indices() << 2, 0, 3, 1;
  double permuted = batch_infonce(perm * q, perm * p, Eigen::MatrixXd(0, 8), cfg);
  CHECK(std::abs(base - permuted) < 1e-9);
}

TEST_CASE("mrl_loss with weight only on the full dim equals batch_infonce") {
  Rng rng(21);
  Eigen::MatrixXd q(3, 16), p(3, 16);
  for (Eigen::Index i = 0; i < 3; ++i) {
    for (Eigen::Index j = 0; j < 16; ++j) {
      q(i, j) = rng.gaussian();
      p(i, j) = rng.gaussian();
    }
  }
  LossConfig cfg;
  cfg.mrl_dims = {16, 8, 4, 2};
  cfg.mrl_weights = {1.0, 0.0, 0.0, 0.0};
  cfg.use_hard_negatives = false;
  MrlLoss loss = mrl_loss(q, p, Eigen::MatrixXd(0, 16), cfg);
  double direct = batch_infonce(truncate_renorm_rows(q, 16), truncate_renorm_rows(p, 16),
                                Eigen::MatrixXd(0, 16), cfg);
  CHECK(std::abs(loss.total - direct) < 1e-12);
}

TEST_CASE("mrl total recomposes from the per-dim breakdown") {
  Rng rng(22);
  Eigen::MatrixXd q(4, 32), p(4, 32);
  for (Eigen::Index i = 0; i < 4; ++i) {
    for (Eigen::Index j = 0; j < 32; ++j) {
      q(i, j) = rng.gaussian();
      p(i, j) = rng.gaussian();
    }
  }
  LossConfig cfg;
  cfg.mrl_dims = {32, 16, 8, 4, 2};
  cfg.mrl_weights = {1.0, 0.3, 0.2, 0.1, 0.1};
  cfg.use_hard_negatives = false;
  MrlLoss loss = mrl_loss(q, p, Eigen::MatrixXd(0, 32), cfg);
  double recomposed = 0.0;
  for (std::size_t i = 0; i < loss.per_dim.size(); ++i) {
    recomposed += cfg.mrl_weights[i] * loss.per_dim[i];
  }
  CHECK(std::abs(loss.total - recomposed) < 1e-9);
}

TEST_CASE("mrl_loss is linear in the weights") {
  Rng rng(23);
  Eigen::MatrixXd q(3, 8), p(3, 8);
  for (Eigen::Index i = 0; i < 3; ++i) {
    for (Eigen::Index j = 0; j < 8; ++j) {
      q(i, j) = rng.gaussian();
      p(i, j) = rng.gaussian();
    }
  }
  LossConfig cfg;
  cfg.mrl_dims = {8, 4};
  cfg.mrl_weights = {0.7, 0.4};
  cfg.use_hard_negatives = false;
  MrlLoss base = mrl_loss(q, p, Eigen::MatrixXd(0, 8), cfg);

  LossConfig doubled = cfg;
  doubled.mrl_weights = {1.4, 0.8};
  CHECK(std::abs(mrl_loss(q, p, Eigen::MatrixXd(0, 8), doubled).total - 2.0 * base.total) < 1e-9);
}

TEST_CASE("gradient check against central finite differences") {
  BatchTexts batch = small_batch(8, true);
  LossConfig cfg = small_config(24);

  SUBCASE("tau = 0.01") {
    cfg.temperature = 0.01;
    ToyEncoder encoder(24, 32, 123);
    CHECK(grad_check(encoder, batch, cfg) < 1e-5);
  }
  SUBCASE("tau = 1.0") {
    cfg.temperature = 1.0;
    ToyEncoder encoder(24, 32, 123);
    CHECK(grad_check(encoder, batch, cfg) < 1e-5);
  }
}

TEST_CASE("zero-weight dims contribute zero gradient") {
  BatchTexts batch = small_batch(4, false);
  ToyEncoder encoder(16, 24, 7);

  LossConfig with_zero;
  with_zero.mrl_dims = {16, 8};
  with_zero.mrl_weights = {1.0, 0.0};
  with_zero.use_hard_negatives = false;
  Eigen::MatrixXd g_with_zero;
  mrl_loss_and_grad(encoder, batch, with_zero, g_with_zero);

  LossConfig single;
  single.mrl_dims = {16};
  single.mrl_weights = {1.0};
  single.use_hard_negatives = false;
  Eigen::MatrixXd g_single;
  mrl_loss_and_grad(encoder, batch, single, g_single);

  CHECK((g_with_zero - g_single).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("train_toy with lr=0 leaves parameters unchanged") {
  auto corpus = make_toy_corpus(24, 4, 3);
  BatchConfig bcfg;
  bcfg.batch_size = 8;
  bcfg.seed = 3;
  auto plan = build_homogeneous(corpus, bcfg);

  LossConfig cfg;
  cfg.mrl_dims = {32, 16};
  cfg.mrl_weights = {1.0, 0.3};
  cfg.use_hard_negatives = false;

  ToyEncoder reference(32, 64, 5);
  auto result = train_toy(corpus, plan, cfg, 0.0, 2, 5, 64);
  CHECK((result.encoder.weights() - reference.weights()).cwiseAbs().maxCoeff() == 0.0);
  // with frozen weights each batch's loss repeats exactly across epochs
  const std::size_t period = plan.batches.size();
  for (std::size_t i = period; i < result.trace.size(); ++i) {
    CHECK(result.trace[i].total_loss == result.trace[i % period].total_loss);
  }
}

TEST_CASE("train_toy is deterministic for a fixed seed") {
  auto corpus = make_toy_corpus(24, 4, 11);
  BatchConfig bcfg;
  bcfg.batch_size = 8;
  bcfg.seed = 11;
  auto plan = build_homogeneous(corpus, bcfg);

  LossConfig cfg;
  cfg.mrl_dims = {32, 16};
  cfg.mrl_weights = {1.0, 0.3};
  cfg.use_hard_negatives = false;

  auto a = train_toy(corpus, plan, cfg, 1e-3, 3, 11, 64);
  auto b = train_toy(corpus, plan, cfg, 1e-3, 3, 11, 64);
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    CHECK(a.trace[i].total_loss == b.trace[i].total_loss);
  }
  CHECK(a.encoder.weights() == b.encoder.weights());
}

TEST_CASE("single-cell sweep equals a direct train_toy call") {
  auto corpus = make_toy_corpus(24, 4, 2);
  std::vector<std::string> pool;
  for (const auto& ex : corpus) pool.push_back(ex.positives[0]);

  LossConfig cfg;
  cfg.mrl_dims = {32, 16};
  cfg.mrl_weights = {1.0, 0.3};
  cfg.use_hard_negatives = false;

  auto cells = sweep(corpus, corpus, pool, {8}, {2}, {0.0}, cfg, 1e-3, 2, 64);
  REQUIRE(cells.size() == 1);
  CHECK_FALSE(cells[0].failed);

  BatchConfig bcfg;
  bcfg.batch_size = 8;
  bcfg.seed = 2;
  auto plan = build_semi_homogeneous(corpus, bcfg);
  auto direct = train_toy(corpus, plan, cfg, 1e-3, 2, 2, 64);
  CHECK(cells[0].final_loss == direct.trace.back().total_loss);
}

TEST_CASE("sweep grid emits one reproducible row per cell") {
  auto corpus = make_toy_corpus(32, 4, 6);
  std::vector<std::string> pool;
  for (const auto& ex : corpus) pool.push_back(ex.positives[0]);
  LossConfig cfg;
  cfg.mrl_dims = {16, 8};
  cfg.mrl_weights = {1.0, 0.3};
  cfg.use_hard_negatives = false;

  auto a = sweep(corpus, corpus, pool, {4, 8, 16}, {1, 2, 3}, {0.0}, cfg, 1e-3, 6, 64);
  auto b = sweep(corpus, corpus, pool, {4, 8, 16}, {1, 2, 3}, {0.0}, cfg, 1e-3, 6, 64);
  REQUIRE(a.size() == 9);
  for (std::size_t i = 0; i < 9; ++i) {
    CHECK(a[i].final_loss == b[i].final_loss);
    CHECK(a[i].recall_full == b[i].recall_full);
  }
}

TEST_CASE("loss config validation") {
  LossConfig cfg;
  CHECK(cfg.validate(896).empty());
  CHECK_FALSE(cfg.validate(512).empty());
  cfg.mrl_dims = {64, 64};
  cfg.mrl_weights = {1.0, 0.5};
  CHECK_FALSE(cfg.validate(64).empty());
  cfg = {};
  cfg.temperature = 0.0;
  CHECK_FALSE(cfg.validate(896).empty());
}
