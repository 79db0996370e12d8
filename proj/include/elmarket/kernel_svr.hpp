#pragma once

// Epsilon support vector regression with a Gaussian kernel.
//
// The dual is solved with a pairwise (SMO-style) ascent over the 2n box
// variables (alpha_i, alpha_i*), using the maximal-violating-pair rule with
// second-order working-set selection. Trained models only keep the samples
// whose coefficient difference beta_i = alpha_i - alpha_i* is nonzero.

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace elmarket::svr {

using FeatureVector = std::vector<double>;

enum class KernelKind { Gaussian };

struct KernelSpec {
  KernelKind kind = KernelKind::Gaussian;
  double sigma = 0.5;

  void validate() const;
};

struct SvrHyperparams {
  double c = 100.0;
  double epsilon = 1.0;
  KernelSpec kernel{};
  double kkt_tolerance = 1e-3;
  int max_passes = 10000;

  void validate() const;
};

struct Sample {
  FeatureVector features;
  double target = 0.0;
};

struct TrainingSet {
  std::vector<Sample> samples;
  std::size_t feature_dim = 0;

  bool empty() const { return samples.empty(); }
  std::size_t size() const { return samples.size(); }
  void add(FeatureVector features, double target);
  void validate() const;
};

/// Per-dimension affine map onto [0, 1] fitted on a training set.
class FeatureScaler {
 public:
  struct Range {
    double min = 0.0;
    double max = 1.0;
  };

  FeatureScaler() = default;
  explicit FeatureScaler(std::vector<Range> ranges);

  /// The map x -> x in every dimension.
  static FeatureScaler identity(std::size_t dim);

  std::size_t dim() const { return ranges_.size(); }
  const std::vector<Range>& ranges() const { return ranges_; }

  /// Constant dimensions (max == min) scale to 0.
  FeatureVector scale(std::span<const double> x) const;

 private:
  std::vector<Range> ranges_;
};

FeatureScaler fit_scaler(const TrainingSet& ts);

struct SvrModel {
  std::vector<FeatureVector> support_vectors;  // stored in scaled space
  std::vector<double> beta;
  std::vector<std::size_t> support_indices;  // position in the training set
  double bias = 0.0;
  KernelSpec kernel{};
  FeatureScaler feature_scaler{};

  std::size_t feature_dim() const { return feature_scaler.dim(); }
};

/// Thrown by train() when the KKT residual is still above tolerance after
/// max_passes epochs. Carries the best model found so callers may accept it.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(double residual, SvrModel model);
  double residual() const { return residual_; }
  const SvrModel& model() const { return model_; }

 private:
  double residual_;
  SvrModel model_;
};

double kernel_eval(const KernelSpec& spec, std::span<const double> x,
                   std::span<const double> y);

/// Trains on `ts` after mapping its features through `scaler`.
SvrModel train(const TrainingSet& ts, const SvrHyperparams& hp,
               const FeatureScaler& scaler);

/// Trains with a scaler fitted on `ts`.
SvrModel train(const TrainingSet& ts, const SvrHyperparams& hp);

/// x is in raw feature space; the model's scaler is applied first.
double predict(const SvrModel& m, std::span<const double> x);

/// Largest violation of the dual optimality conditions over the training
/// set: complementary slackness against the epsilon tube, the box
/// |beta_i| <= C and the equality sum(beta) = 0. Zero at an exact optimum.
double kkt_residual(const SvrModel& m, const TrainingSet& ts,
                    const SvrHyperparams& hp);

/// Dual objective in minimisation form,
///   1/2 beta' K beta + epsilon * |beta|_1 - y' beta,
/// evaluated for the model's coefficients on `ts`.
double dual_objective(const SvrModel& m, const TrainingSet& ts,
                      const SvrHyperparams& hp);

}  // namespace elmarket::svr
