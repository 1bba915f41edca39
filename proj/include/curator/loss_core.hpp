#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "curator/batching.hpp"
#include "curator/types.hpp"

namespace curator {

struct LossConfig {
  double temperature = 0.01;
  std::vector<Eigen::Index> mrl_dims = {896, 512, 256, 128, 64};
  std::vector<double> mrl_weights = {1.0, 0.3, 0.2, 0.1, 0.1};
  bool use_hard_negatives = true;
  bool in_batch_negatives = true;

  std::string validate(Eigen::Index encoder_dim) const;
};

// Arithmetic mean of the unmasked rows. Throws when everything is masked.
Eigen::VectorXd mean_pool(const Eigen::MatrixXd& token_vectors, const std::vector<bool>& mask);

// First dim_out components, rescaled to unit norm. Throws on a zero prefix.
Eigen::VectorXd truncate_renorm(const Eigen::VectorXd& v, Eigen::Index dim_out);
Eigen::MatrixXd truncate_renorm_rows(const Eigen::MatrixXd& rows, Eigen::Index dim_out);

// -log( exp(q.p/t) / (exp(q.p/t) + sum_n exp(q.n/t)) ), max-subtracted.
double infonce(const Eigen::VectorXd& query, const Eigen::VectorXd& positive,
               const std::vector<Eigen::VectorXd>& negatives, double temperature);

// Mean InfoNCE over the batch. Row i of queries/positives is example i; each
// query's candidates are its positive, the other positives when
// in_batch_negatives, and every hard negative row when use_hard_negatives.
// Rows are renormalized prefixes already (unit vectors).
double batch_infonce(const Eigen::MatrixXd& queries, const Eigen::MatrixXd& positives,
                     const Eigen::MatrixXd& hard_negatives, const LossConfig& cfg);

struct MrlLoss {
  double total = 0.0;
  std::vector<double> per_dim;
};

// Weighted sum of batch_infonce over truncate_renorm'd copies at each MRL
// dim. Inputs are raw (un-normalized) encoder outputs at full dimension.
MrlLoss mrl_loss(const Eigen::MatrixXd& queries, const Eigen::MatrixXd& positives,
                 const Eigen::MatrixXd& hard_negatives, const LossConfig& cfg);

// Linear map over deterministic text features; stands in for a real encoder
// so the training math can be checked at desk scale.
class ToyEncoder {
 public:
  ToyEncoder(Eigen::Index out_dim, Eigen::Index feat_dim, std::uint64_t seed);

  Eigen::VectorXd features(const std::string& text) const;  // unit-norm, deterministic
  Eigen::VectorXd encode(const std::string& text) const;
  Eigen::MatrixXd encode_rows(const std::vector<std::string>& texts) const;

  Eigen::MatrixXd& weights() { return weights_; }
  const Eigen::MatrixXd& weights() const { return weights_; }
  Eigen::Index out_dim() const { return weights_.rows(); }
  Eigen::Index feat_dim() const { return weights_.cols(); }

 private:
  Eigen::MatrixXd weights_;  // out_dim x feat_dim
};

struct BatchTexts {
  std::vector<std::string> queries;
  std::vector<std::string> positives;
  std::vector<std::string> hard_negatives;
};

// Loss and analytic d(loss)/d(weights) of mrl_loss on the encoded batch.
MrlLoss mrl_loss_and_grad(const ToyEncoder& encoder, const BatchTexts& batch,
                          const LossConfig& cfg, Eigen::MatrixXd& grad_out);

// Max relative error between the analytic gradient and central finite
// differences, component-wise over every weight.
double grad_check(const ToyEncoder& encoder, const BatchTexts& batch, const LossConfig& cfg,
                  double epsilon = 1e-6);

struct StepTrace {
  std::size_t step = 0;
  double total_loss = 0.0;
  std::vector<double> per_dim;
};

struct ToyTrainResult {
  ToyEncoder encoder;
  std::vector<StepTrace> trace;
};

// Plain gradient descent over the plan's batches, in order, repeated for the
// given number of epochs. Aborts when the loss turns non-finite.
ToyTrainResult train_toy(const std::vector<TrainingExample>& corpus, const BatchPlan& plan,
                         const LossConfig& cfg, double lr, std::size_t epochs,
                         std::uint64_t seed, Eigen::Index feat_dim = 256);

// Fraction of queries whose nearest pool document (cosine, at the given
// truncation dim) is one of their positives.
double recall_at_1(const ToyEncoder& encoder, const std::vector<TrainingExample>& queries,
                   const std::vector<std::string>& document_pool, Eigen::Index dim);

struct SweepCell {
  std::size_t batch_size = 0;
  std::size_t epochs = 0;
  double mixing_ratio = 0.0;
  bool failed = false;
  std::string error;
  double final_loss = 0.0;
  double recall_full = 0.0;
  double recall_low = 0.0;  // at the smallest MRL dim
  std::vector<StepTrace> trace;
};

std::vector<SweepCell> sweep(const std::vector<TrainingExample>& corpus,
                             const std::vector<TrainingExample>& held_out,
                             const std::vector<std::string>& document_pool,
                             const std::vector<std::size_t>& batch_sizes,
                             const std::vector<std::size_t>& epochs_list,
                             const std::vector<double>& ratios, const LossConfig& cfg,
                             double lr, std::uint64_t seed, Eigen::Index feat_dim = 256);

// Clustered, linearly separable synthetic pairs for trainer verification.
std::vector<TrainingExample> make_toy_corpus(std::size_t n_pairs, std::size_t n_clusters,
                                             std::uint64_t seed);

}  // namespace curator
