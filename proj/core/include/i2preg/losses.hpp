#pragma once

#include <span>
#include <vector>

#include "i2preg/features.hpp"
#include "i2preg/geometry.hpp"

namespace i2preg {

struct NormalLoss {
  double value = 0.0;
  std::vector<Vec3> gradient;  // d value / d predicted, zero where not jointly valid
  std::size_t valid_count = 0;
};

/// 1 - mean(predicted . target) over jointly valid entries.
NormalLoss normal_consistency_loss(const NormalField& predicted, const NormalField& target);

/// S = F F^T for row-normalized F (rows within 1e-6 of unit norm).
Eigen::MatrixXd self_similarity(const FeatureField& features);

struct GdcLoss {
  double value = 0.0;
  FeatureMatrix grad_image;
  FeatureMatrix grad_cloud;
};

/// Squared Frobenius distance between image and cloud self-similarity
/// matrices. Gradients treat the (normalized) rows as free variables.
GdcLoss gdc_loss(const FeatureField& image, const FeatureField& cloud);

struct CircleLossConfig {
  double gamma = 24.0;
  double delta_p = 0.1;
  double delta_n = 1.4;
  double lambda_p = 1.0;  // used when the per-pair arrays are empty
  double lambda_n = 1.0;
  std::vector<double> lambda_p_per_pair;
  std::vector<double> lambda_n_per_pair;

  void validate() const;
};

/// Circle loss for one anchor over L2 feature distances to its positives
/// and negatives, evaluated as softplus of two log-sum-exps.
double circle_loss(std::span<const double> positive_distances, std::span<const double> negative_distances,
                   const CircleLossConfig& config = {});

/// The same quantity evaluated term by term without log-sum-exp; overflows
/// for large exponents. Kept for cross-checking.
double circle_loss_naive(std::span<const double> positive_distances, std::span<const double> negative_distances,
                         const CircleLossConfig& config = {});

struct LossWeights {
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double lambda3 = 0.5;

  void validate() const;
};

double total_loss(double matching, double normal, double gdc, const LossWeights& weights = {});

struct WarmupSchedule {
  int start_epoch = 10;
  int end_epoch = 20;

  void validate() const;
};

/// 0 before start, linear ramp on [start, end), 1 from end onward.
double warmup_weight(int epoch, const WarmupSchedule& schedule = {});

/// Plug-in squared MMD with a Gaussian kernel of the given bandwidth,
/// clamped at zero.
double mmd(const FeatureField& a, const FeatureField& b, double bandwidth);

/// Median pairwise distance of the pooled samples (1 if that median is 0).
double median_heuristic_bandwidth(const FeatureField& a, const FeatureField& b);

}  // namespace i2preg
