#include "i2preg/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "i2preg/error.hpp"

namespace i2preg {

NormalLoss normal_consistency_loss(const NormalField& predicted, const NormalField& target) {
  if (predicted.size() != target.size()) {
    throw Error(ErrorCode::DimensionMismatch, "predicted and target normal fields are not aligned");
  }
  NormalLoss out;
  out.gradient.assign(predicted.size(), Vec3::Zero());
  double sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted.valid[i] == 0 || target.valid[i] == 0) continue;
    sum += predicted.normals[i].dot(target.normals[i]);
    ++out.valid_count;
  }
  if (out.valid_count == 0) throw Error(ErrorCode::EmptyOverlap, "no jointly valid normals");
  const double inv = 1.0 / static_cast<double>(out.valid_count);
  out.value = 1.0 - sum * inv;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted.valid[i] != 0 && target.valid[i] != 0) out.gradient[i] = -target.normals[i] * inv;
  }
  return out;
}

namespace {

void require_normalized(const FeatureField& f, const char* what) {
  for (Eigen::Index i = 0; i < f.rows(); ++i) {
    if (std::abs(f.vectors.row(i).norm() - 1.0) > 1e-6) {
      throw Error(ErrorCode::NotNormalized, std::string(what) + " row " + std::to_string(i) + " is not unit norm");
    }
  }
}

}  // namespace

Eigen::MatrixXd self_similarity(const FeatureField& features) {
  require_normalized(features, "feature");
  return features.vectors * features.vectors.transpose();
}

GdcLoss gdc_loss(const FeatureField& image, const FeatureField& cloud) {
  if (image.rows() != cloud.rows() || image.channels() != cloud.channels()) {
    throw Error(ErrorCode::ShapeMismatch, "image and cloud features must both be M x C");
  }
  const Eigen::MatrixXd diff = self_similarity(image) - self_similarity(cloud);
  GdcLoss out;
  out.value = diff.squaredNorm();
  out.grad_image = 4.0 * diff * image.vectors;
  out.grad_cloud = -4.0 * diff * cloud.vectors;
  return out;
}

void CircleLossConfig::validate() const {
  if (!(gamma > 0.0)) throw Error(ErrorCode::InvalidArgument, "circle loss gamma must be > 0");
  if (!(delta_p < delta_n)) throw Error(ErrorCode::InvalidArgument, "circle loss needs delta_p < delta_n");
}

namespace {

double lambda_at(const std::vector<double>& per_pair, double fallback, std::size_t i, std::size_t n) {
  if (per_pair.empty()) return fallback;
  if (per_pair.size() != n) throw Error(ErrorCode::LengthMismatch, "per-pair scaling factors must match the pairs");
  return per_pair[i];
}

// Exponents of the positive and negative terms. The adaptive weights are
// clamped at zero so a pair that already satisfies its margin stops pulling.
std::vector<double> positive_exponents(std::span<const double> d, const CircleLossConfig& c) {
  std::vector<double> e(d.size());
  for (std::size_t j = 0; j < d.size(); ++j) {
    const double gap = d[j] - c.delta_p;
    const double beta = c.gamma * lambda_at(c.lambda_p_per_pair, c.lambda_p, j, d.size()) * std::max(gap, 0.0);
    e[j] = beta * gap;
  }
  return e;
}

std::vector<double> negative_exponents(std::span<const double> d, const CircleLossConfig& c) {
  std::vector<double> e(d.size());
  for (std::size_t k = 0; k < d.size(); ++k) {
    const double gap = c.delta_n - d[k];
    const double beta = c.gamma * lambda_at(c.lambda_n_per_pair, c.lambda_n, k, d.size()) * std::max(gap, 0.0);
    e[k] = beta * gap;
  }
  return e;
}

double log_sum_exp(const std::vector<double>& x) {
  const double m = *std::max_element(x.begin(), x.end());
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s);
}

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

}  // namespace

double circle_loss(std::span<const double> positive_distances, std::span<const double> negative_distances,
                   const CircleLossConfig& config) {
  config.validate();
  if (positive_distances.empty() || negative_distances.empty()) return 0.0;
  const double lp = log_sum_exp(positive_exponents(positive_distances, config));
  const double ln = log_sum_exp(negative_exponents(negative_distances, config));
  return softplus(lp + ln) / config.gamma;
}

double circle_loss_naive(std::span<const double> positive_distances, std::span<const double> negative_distances,
                         const CircleLossConfig& config) {
  config.validate();
  double sp = 0.0;
  for (double e : positive_exponents(positive_distances, config)) sp += std::exp(e);
  double sn = 0.0;
  for (double e : negative_exponents(negative_distances, config)) sn += std::exp(e);
  return std::log(1.0 + sp * sn) / config.gamma;
}

void LossWeights::validate() const {
  if (lambda1 < 0.0 || lambda2 < 0.0 || lambda3 < 0.0) {
    throw Error(ErrorCode::InvalidArgument, "loss weights must be non-negative");
  }
}

double total_loss(double matching, double normal, double gdc, const LossWeights& weights) {
  weights.validate();
  return weights.lambda1 * matching + weights.lambda2 * normal + weights.lambda3 * gdc;
}

void WarmupSchedule::validate() const {
  if (start_epoch < 0 || end_epoch < start_epoch) {
    throw Error(ErrorCode::InvalidArgument, "warm-up needs 0 <= start_epoch <= end_epoch");
  }
}

double warmup_weight(int epoch, const WarmupSchedule& schedule) {
  schedule.validate();
  if (epoch < 0) throw Error(ErrorCode::InvalidArgument, "epoch must be >= 0");
  if (epoch >= schedule.end_epoch) return 1.0;
  if (epoch < schedule.start_epoch) return 0.0;
  return static_cast<double>(epoch - schedule.start_epoch) /
         static_cast<double>(schedule.end_epoch - schedule.start_epoch);
}

namespace {

double mean_kernel(const FeatureMatrix& x, const FeatureMatrix& y, double inv_two_sigma2) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < y.rows(); ++j) {
      sum += std::exp(-(x.row(i) - y.row(j)).squaredNorm() * inv_two_sigma2);
    }
  }
  return sum / (static_cast<double>(x.rows()) * static_cast<double>(y.rows()));
}

}  // namespace

double mmd(const FeatureField& a, const FeatureField& b, double bandwidth) {
  if (a.rows() == 0 || b.rows() == 0) throw Error(ErrorCode::EmptySample, "MMD needs non-empty samples");
  if (a.channels() != b.channels()) throw Error(ErrorCode::ChannelMismatch, "samples differ in channel count");
  if (!(bandwidth > 0.0)) throw Error(ErrorCode::InvalidArgument, "bandwidth must be > 0");
  const double g = 1.0 / (2.0 * bandwidth * bandwidth);
  const double value =
      mean_kernel(a.vectors, a.vectors, g) - 2.0 * mean_kernel(a.vectors, b.vectors, g) + mean_kernel(b.vectors, b.vectors, g);
  return std::max(value, 0.0);
}

double median_heuristic_bandwidth(const FeatureField& a, const FeatureField& b) {
  if (a.rows() == 0 || b.rows() == 0) throw Error(ErrorCode::EmptySample, "MMD needs non-empty samples");
  if (a.channels() != b.channels()) throw Error(ErrorCode::ChannelMismatch, "samples differ in channel count");
  FeatureMatrix pooled(a.rows() + b.rows(), a.channels());
  pooled << a.vectors, b.vectors;
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(pooled.rows() * (pooled.rows() - 1) / 2));
  for (Eigen::Index i = 0; i < pooled.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < pooled.rows(); ++j) d.push_back((pooled.row(i) - pooled.row(j)).norm());
  }
  if (d.empty()) return 1.0;
  const auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  return *mid > 0.0 ? *mid : 1.0;
}

}  // namespace i2preg
