#include "curator/loss_core.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "curator/embedding_store.hpp"
#include "curator/encoder.hpp"
#include "curator/rng.hpp"
#include "curator/sim_engine.hpp"
#include "curator/text.hpp"

namespace curator {

std::string LossConfig::validate(Eigen::Index encoder_dim) const {
  if (temperature <= 0) return "temperature must be > 0";
  if (mrl_dims.size() != mrl_weights.size()) return "mrl_dims and mrl_weights length mismatch";
  if (mrl_dims.empty()) return "mrl_dims empty";
  if (mrl_dims.front() != encoder_dim) return "mrl_dims[0] must equal the encoder dimension";
  for (std::size_t i = 1; i < mrl_dims.size(); ++i) {
    if (mrl_dims[i] >= mrl_dims[i - 1]) return "mrl_dims must be strictly descending";
  }
  for (double w : mrl_weights) {
    if (w < 0) return "mrl_weights must be non-negative";
  }
  return {};
}

Eigen::VectorXd mean_pool(const Eigen::MatrixXd& token_vectors, const std::vector<bool>& mask) {
  if (static_cast<Eigen::Index>(mask.size()) != token_vectors.rows()) {
    throw std::runtime_error("mean_pool: mask length != token count");
  }
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(token_vectors.cols());
  std::size_t n = 0;
  for (Eigen::Index t = 0; t < token_vectors.rows(); ++t) {
    if (mask[static_cast<std::size_t>(t)]) {
      sum += token_vectors.row(t).transpose();
      ++n;
    }
  }
  if (n == 0) throw std::runtime_error("mean_pool: all tokens masked");
  return sum / static_cast<double>(n);
}

Eigen::VectorXd truncate_renorm(const Eigen::VectorXd& v, Eigen::Index dim_out) {
  if (dim_out < 1 || dim_out > v.size()) {
    throw std::runtime_error("truncate_renorm: bad target dimension");
  }
  Eigen::VectorXd head = v.head(dim_out);
  double n = head.norm();
  if (n == 0) throw std::runtime_error("truncate_renorm: zero prefix");
  return head / n;
}

Eigen::MatrixXd truncate_renorm_rows(const Eigen::MatrixXd& rows, Eigen::Index dim_out) {
  Eigen::MatrixXd out(rows.rows(), dim_out);
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    out.row(i) = truncate_renorm(rows.row(i).transpose(), dim_out).transpose();
  }
  return out;
}

double infonce(const Eigen::VectorXd& query, const Eigen::VectorXd& positive,
               const std::vector<Eigen::VectorXd>& negatives, double temperature) {
  if (temperature <= 0) throw std::runtime_error("infonce: temperature must be > 0");
  if (query.size() != positive.size()) throw std::runtime_error("infonce: dimension mismatch");

  std::vector<double> logits;
  logits.reserve(negatives.size() + 1);
  logits.push_back(query.dot(positive) / temperature);
  for (const auto& n : negatives) {
    if (n.size() != query.size()) throw std::runtime_error("infonce: dimension mismatch");
    logits.push_back(query.dot(n) / temperature);
  }

  double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - m);
  return -(logits[0] - m - std::log(z));
}

namespace {

// Shared forward/backward for the batched loss. Inputs are unit-norm rows;
// optional outputs receive d(mean loss)/d(row matrices).
double batch_infonce_impl(const Eigen::MatrixXd& uq, const Eigen::MatrixXd& up,
                          const Eigen::MatrixXd& un, const LossConfig& cfg,
                          Eigen::MatrixXd* gq, Eigen::MatrixXd* gp, Eigen::MatrixXd* gn) {
  const Eigen::Index b = uq.rows();
  const Eigen::Index m = un.rows();
  if (up.rows() != b) throw std::runtime_error("batch_infonce: queries/positives shape mismatch");
  if (up.cols() != uq.cols() || (m > 0 && un.cols() != uq.cols())) {
    throw std::runtime_error("batch_infonce: dimension mismatch");
  }
  if (cfg.in_batch_negatives && b < 2) {
    throw std::runtime_error("batch_infonce: in-batch negatives need batch size >= 2");
  }

  const bool use_hard = cfg.use_hard_negatives && m > 0;
  const Eigen::Index n_cand = b + (use_hard ? m : 0);

  Eigen::MatrixXd cand(n_cand, uq.cols());
  cand.topRows(b) = up;
  if (use_hard) cand.bottomRows(m) = un;

  Eigen::MatrixXd logits = uq * cand.transpose() / cfg.temperature;  // b x n_cand

  auto allowed = [&](Eigen::Index i, Eigen::Index j) {
    if (j == i) return true;
    if (j < b) return cfg.in_batch_negatives;
    return true;  // hard-negative columns only exist when enabled
  };

  Eigen::MatrixXd soft = Eigen::MatrixXd::Zero(b, n_cand);
  double total = 0.0;
  for (Eigen::Index i = 0; i < b; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n_cand; ++j) {
      if (allowed(i, j)) mx = std::max(mx, logits(i, j));
    }
    double z = 0.0;
    for (Eigen::Index j = 0; j < n_cand; ++j) {
      if (allowed(i, j)) {
        soft(i, j) = std::exp(logits(i, j) - mx);
        z += soft(i, j);
      }
    }
    soft.row(i) /= z;
    total += -(logits(i, i) - mx - std::log(z));
  }
  total /= static_cast<double>(b);

  if (gq != nullptr) {
    Eigen::MatrixXd g = soft;  // d(mean loss)/d(logits)
    for (Eigen::Index i = 0; i < b; ++i) g(i, i) -= 1.0;
    g /= static_cast<double>(b);

    *gq = g * cand / cfg.temperature;
    Eigen::MatrixXd gcand = g.transpose() * uq / cfg.temperature;
    *gp = gcand.topRows(b);
    if (gn != nullptr) {
      if (use_hard) {
        *gn = gcand.bottomRows(m);
      } else {
        *gn = Eigen::MatrixXd::Zero(m, uq.cols());
      }
    }
  }
  return total;
}

// Backprop through row-wise truncate+renorm: g_norm is the gradient at the
// unit vector, prefix is the un-normalized head, out accumulates into the
// leading dim_out columns of the full-dimension gradient.
void renorm_backward_rows(const Eigen::MatrixXd& raw, const Eigen::MatrixXd& unit,
                          const Eigen::MatrixXd& g_norm, double weight,
                          Eigen::MatrixXd& full_grad) {
  const Eigen::Index d = unit.cols();
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    double n = raw.row(i).head(d).norm();
    Eigen::RowVectorXd u = unit.row(i);
    Eigen::RowVectorXd g = g_norm.row(i);
    full_grad.row(i).head(d) += weight * (g - (g.dot(u)) * u) / n;
  }
}

}  // namespace

double batch_infonce(const Eigen::MatrixXd& queries, const Eigen::MatrixXd& positives,
                     const Eigen::MatrixXd& hard_negatives, const LossConfig& cfg) {
  if (!cfg.in_batch_negatives && (!cfg.use_hard_negatives || hard_negatives.rows() == 0)) {
    return 0.0;  // single-candidate softmax for every query
  }
  return batch_infonce_impl(queries, positives, hard_negatives, cfg, nullptr, nullptr, nullptr);
}

MrlLoss mrl_loss(const Eigen::MatrixXd& queries, const Eigen::MatrixXd& positives,
                 const Eigen::MatrixXd& hard_negatives, const LossConfig& cfg) {
  if (auto err = cfg.validate(queries.cols()); !err.empty()) {
    throw std::runtime_error("invalid loss config: " + err);
  }
  MrlLoss out;
  for (std::size_t level = 0; level < cfg.mrl_dims.size(); ++level) {
    const Eigen::Index d = cfg.mrl_dims[level];
    Eigen::MatrixXd uq = truncate_renorm_rows(queries, d);
    Eigen::MatrixXd up = truncate_renorm_rows(positives, d);
    Eigen::MatrixXd un = hard_negatives.rows() > 0
                             ? truncate_renorm_rows(hard_negatives, d)
                             : Eigen::MatrixXd(0, d);
    double loss = batch_infonce(uq, up, un, cfg);
    out.per_dim.push_back(loss);
    out.total += cfg.mrl_weights[level] * loss;
  }
  return out;
}

ToyEncoder::ToyEncoder(Eigen::Index out_dim, Eigen::Index feat_dim, std::uint64_t seed) {
  Rng rng = keyed_rng(seed, "toy_encoder_init");
  weights_.resize(out_dim, feat_dim);
  // Small init: the loss only sees renormalized outputs, so the weight scale
  // just sets how far a fixed learning rate moves the encoder per step.
  const double scale = 0.01 / std::sqrt(static_cast<double>(feat_dim));
  for (Eigen::Index i = 0; i < out_dim; ++i) {
    for (Eigen::Index j = 0; j < feat_dim; ++j) {
      weights_(i, j) = scale * rng.gaussian();
    }
  }
}

Eigen::VectorXd ToyEncoder::features(const std::string& text) const {
  Eigen::VectorXf f = mock_encode(text, static_cast<std::uint32_t>(feat_dim()));
  Eigen::VectorXd x = f.cast<double>();
  double n = x.norm();
  if (n > 0) x /= n;
  return x;
}

Eigen::VectorXd ToyEncoder::encode(const std::string& text) const {
  return weights_ * features(text);
}

Eigen::MatrixXd ToyEncoder::encode_rows(const std::vector<std::string>& texts) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(texts.size()), out_dim());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = encode(texts[i]).transpose();
  }
  return out;
}

MrlLoss mrl_loss_and_grad(const ToyEncoder& encoder, const BatchTexts& batch,
                          const LossConfig& cfg, Eigen::MatrixXd& grad_out) {
  if (auto err = cfg.validate(encoder.out_dim()); !err.empty()) {
    throw std::runtime_error("invalid loss config: " + err);
  }

  const Eigen::Index b = static_cast<Eigen::Index>(batch.queries.size());
  const Eigen::Index m = static_cast<Eigen::Index>(batch.hard_negatives.size());
  const Eigen::Index dim = encoder.out_dim();

  Eigen::MatrixXd xq(b, encoder.feat_dim()), xp(b, encoder.feat_dim());
  Eigen::MatrixXd xn(m, encoder.feat_dim());
  for (Eigen::Index i = 0; i < b; ++i) {
    xq.row(i) = encoder.features(batch.queries[static_cast<std::size_t>(i)]).transpose();
    xp.row(i) = encoder.features(batch.positives[static_cast<std::size_t>(i)]).transpose();
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    xn.row(i) = encoder.features(batch.hard_negatives[static_cast<std::size_t>(i)]).transpose();
  }

  Eigen::MatrixXd eq = xq * encoder.weights().transpose();
  Eigen::MatrixXd ep = xp * encoder.weights().transpose();
  Eigen::MatrixXd en = xn * encoder.weights().transpose();

  Eigen::MatrixXd deq = Eigen::MatrixXd::Zero(b, dim);
  Eigen::MatrixXd dep = Eigen::MatrixXd::Zero(b, dim);
  Eigen::MatrixXd den = Eigen::MatrixXd::Zero(m, dim);

  const bool degenerate =
      !cfg.in_batch_negatives && (!cfg.use_hard_negatives || m == 0);

  MrlLoss out;
  for (std::size_t level = 0; level < cfg.mrl_dims.size(); ++level) {
    const Eigen::Index d = cfg.mrl_dims[level];
    const double w = cfg.mrl_weights[level];

    Eigen::MatrixXd uq = truncate_renorm_rows(eq, d);
    Eigen::MatrixXd up = truncate_renorm_rows(ep, d);
    Eigen::MatrixXd un = m > 0 ? truncate_renorm_rows(en, d) : Eigen::MatrixXd(0, d);

    if (degenerate) {
      out.per_dim.push_back(0.0);
      continue;
    }

    Eigen::MatrixXd guq, gup, gun;
    double loss = batch_infonce_impl(uq, up, un, cfg, &guq, &gup, &gun);
    out.per_dim.push_back(loss);
    out.total += w * loss;

    if (w != 0.0) {
      renorm_backward_rows(eq, uq, guq, w, deq);
      renorm_backward_rows(ep, up, gup, w, dep);
      if (m > 0) renorm_backward_rows(en, un, gun, w, den);
    }
  }

  grad_out = deq.transpose() * xq + dep.transpose() * xp;
  if (m > 0) grad_out += den.transpose() * xn;
  return out;
}

double grad_check(const ToyEncoder& encoder, const BatchTexts& batch, const LossConfig& cfg,
                  double epsilon) {
  Eigen::MatrixXd analytic;
  mrl_loss_and_grad(encoder, batch, cfg, analytic);

  ToyEncoder probe = encoder;
  double max_rel = 0.0;
  for (Eigen::Index i = 0; i < probe.weights().rows(); ++i) {
    for (Eigen::Index j = 0; j < probe.weights().cols(); ++j) {
      const double orig = probe.weights()(i, j);
      Eigen::MatrixXd unused;

      probe.weights()(i, j) = orig + epsilon;
      const double up = mrl_loss_and_grad(probe, batch, cfg, unused).total;
      probe.weights()(i, j) = orig - epsilon;
      const double down = mrl_loss_and_grad(probe, batch, cfg, unused).total;
      probe.weights()(i, j) = orig;

      const double numeric = (up - down) / (2.0 * epsilon);
      const double denom = std::max({std::abs(numeric), std::abs(analytic(i, j)), 1e-8});
      max_rel = std::max(max_rel, std::abs(numeric - analytic(i, j)) / denom);
    }
  }
  return max_rel;
}

ToyTrainResult train_toy(const std::vector<TrainingExample>& corpus, const BatchPlan& plan,
                         const LossConfig& cfg, double lr, std::size_t epochs,
                         std::uint64_t seed, Eigen::Index feat_dim) {
  if (lr < 0) throw std::runtime_error("train_toy: lr must be >= 0");

  std::unordered_map<std::string, const TrainingExample*> by_id;
  for (const auto& ex : corpus) by_id[ex.id] = &ex;

  ToyTrainResult result{ToyEncoder(cfg.mrl_dims.front(), feat_dim, seed), {}};
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    for (const auto& batch : plan.batches) {
      BatchTexts texts;
      for (const auto& id : batch.example_ids) {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw std::runtime_error("plan references unknown example " + id);
        const TrainingExample& ex = *it->second;
        texts.queries.push_back(ex.query);
        texts.positives.push_back(ex.positives.front());
        if (cfg.use_hard_negatives) {
          for (const auto& n : ex.hard_negatives) texts.hard_negatives.push_back(n);
        }
      }

      Eigen::MatrixXd grad;
      MrlLoss loss = mrl_loss_and_grad(result.encoder, texts, cfg, grad);
      ++step;
      if (!std::isfinite(loss.total)) {
        throw std::runtime_error("train_toy: loss diverged at step " + std::to_string(step));
      }
      result.encoder.weights() -= lr * grad;
      if (!result.encoder.weights().allFinite()) {
        throw std::runtime_error("train_toy: parameters diverged at step " + std::to_string(step));
      }
      result.trace.push_back({step, loss.total, loss.per_dim});
    }
  }
  return result;
}

double recall_at_1(const ToyEncoder& encoder, const std::vector<TrainingExample>& queries,
                   const std::vector<std::string>& document_pool, Eigen::Index dim) {
  // Dedup pool documents by normalized text.
  std::vector<std::string> docs;
  std::unordered_set<std::string> seen;
  for (const auto& d : document_pool) {
    if (seen.insert(normalize_text(d)).second) docs.push_back(d);
  }
  if (docs.empty() || queries.empty()) return 0.0;

  auto store_from = [&](const std::vector<std::string>& texts, const char* prefix) {
    EmbeddingStore store;
    store.dim = static_cast<std::uint32_t>(dim);
    store.vectors.resize(static_cast<Eigen::Index>(texts.size()), dim);
    for (std::size_t i = 0; i < texts.size(); ++i) {
      Eigen::VectorXd v = truncate_renorm(encoder.encode(texts[i]), dim);
      store.vectors.row(static_cast<Eigen::Index>(i)) = v.cast<float>().transpose();
      store.ids.push_back(std::string(prefix) + std::to_string(i));
    }
    return store;
  };

  std::vector<std::string> query_texts;
  for (const auto& ex : queries) query_texts.push_back(ex.query);

  EmbeddingStore qstore = store_from(query_texts, "q");
  EmbeddingStore dstore = store_from(docs, "d");
  std::vector<RankedList> ranked = topk(qstore, dstore, 1);

  std::size_t hits = 0;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const std::string& top_id = ranked[i].entries.front().doc_id;
    std::size_t doc_idx = std::stoul(top_id.substr(1));
    const std::string top_key = normalize_text(docs[doc_idx]);
    for (const auto& p : queries[i].positives) {
      if (normalize_text(p) == top_key) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(queries.size());
}

std::vector<SweepCell> sweep(const std::vector<TrainingExample>& corpus,
                             const std::vector<TrainingExample>& held_out,
                             const std::vector<std::string>& document_pool,
                             const std::vector<std::size_t>& batch_sizes,
                             const std::vector<std::size_t>& epochs_list,
                             const std::vector<double>& ratios, const LossConfig& cfg,
                             double lr, std::uint64_t seed, Eigen::Index feat_dim) {
  std::vector<SweepCell> cells;
  for (std::size_t bs : batch_sizes) {
    for (std::size_t epochs : epochs_list) {
      for (double ratio : ratios) {
        SweepCell cell;
        cell.batch_size = bs;
        cell.epochs = epochs;
        cell.mixing_ratio = ratio;
        try {
          BatchConfig bcfg;
          bcfg.batch_size = bs;
          bcfg.mixing_ratio = ratio;
          bcfg.seed = seed;
          BatchPlan plan = build_semi_homogeneous(corpus, bcfg);
          ToyTrainResult r = train_toy(corpus, plan, cfg, lr, epochs, seed, feat_dim);
          cell.trace = r.trace;
          cell.final_loss = r.trace.empty() ? 0.0 : r.trace.back().total_loss;
          cell.recall_full = recall_at_1(r.encoder, held_out, document_pool, cfg.mrl_dims.front());
          cell.recall_low = recall_at_1(r.encoder, held_out, document_pool, cfg.mrl_dims.back());
        } catch (const std::exception& e) {
          cell.failed = true;
          cell.error = e.what();
        }
        cells.push_back(std::move(cell));
      }
    }
  }
  return cells;
}

std::vector<TrainingExample> make_toy_corpus(std::size_t n_pairs, std::size_t n_clusters,
                                             std::uint64_t seed) {
  std::vector<TrainingExample> out;
  Rng rng = keyed_rng(seed, "toy_corpus");
  // Pair identity is a combination of attributes from a shared vocabulary, so
  // an encoder that amplifies attribute tokens over filler noise generalizes
  // to pairs it never trained on.
  constexpr std::size_t kAttrVocab = 120;
  constexpr std::size_t kAttrsPerPair = 4;
  for (std::size_t i = 0; i < n_pairs; ++i) {
    std::size_t cluster = i % n_clusters;
    std::string topic;
    for (int t = 0; t < 3; ++t) {
      topic += " topic" + std::to_string(cluster) + "word" + std::to_string(t);
    }
    std::string attrs;
    for (std::size_t a : rng.sample_without_replacement(kAttrVocab, kAttrsPerPair)) {
      attrs += " attr" + std::to_string(a);
    }

    auto noise = [&] {
      std::string s;
      for (int t = 0; t < 4; ++t) s += " filler" + std::to_string(rng.bounded(100000));
      return s;
    };

    TrainingExample ex;
    ex.id = "toy/" + std::to_string(i);
    ex.dataset_id = "toy";
    ex.task_type = TaskType::sts;
    ex.category = Category::s2s;
    ex.symmetry = Symmetry::symmetric;
    ex.query = "query" + topic + attrs + noise();
    ex.positives = {"doc" + topic + attrs + noise()};
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace curator
