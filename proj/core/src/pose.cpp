#include "i2preg/pose.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "i2preg/error.hpp"
#include "i2preg/random.hpp"

namespace i2preg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool project_safe(const CameraIntrinsics& k, const Vec3& p, Vec2& out) {
  if (!(p.z() > 0.0)) return false;
  out = {k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy};
  return true;
}

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

// Best rigid map of `from` onto `to` in the least-squares sense.
RigidTransform kabsch(std::span<const Vec3> from, std::span<const Vec3> to) {
  Vec3 cf = Vec3::Zero();
  Vec3 ct = Vec3::Zero();
  for (std::size_t i = 0; i < from.size(); ++i) {
    cf += from[i];
    ct += to[i];
  }
  cf /= static_cast<double>(from.size());
  ct /= static_cast<double>(to.size());
  Mat3 h = Mat3::Zero();
  for (std::size_t i = 0; i < from.size(); ++i) h += (from[i] - cf) * (to[i] - ct).transpose();
  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  RigidTransform t;
  t.rotation = svd.matrixV() * d * svd.matrixU().transpose();
  t.translation = ct - t.rotation * cf;
  return t;
}

std::vector<double> real_quartic_roots(const std::array<double, 5>& c) {
  // c[0] v^4 + ... + c[4]
  std::vector<double> roots;
  if (std::abs(c[0]) < 1e-14 * (std::abs(c[1]) + std::abs(c[2]) + std::abs(c[3]) + std::abs(c[4]))) return roots;
  Eigen::Matrix4d companion = Eigen::Matrix4d::Zero();
  for (int i = 0; i < 4; ++i) companion(0, i) = -c[static_cast<std::size_t>(i) + 1] / c[0];
  companion(1, 0) = companion(2, 1) = companion(3, 2) = 1.0;
  Eigen::EigenSolver<Eigen::Matrix4d> es(companion, false);
  for (int i = 0; i < 4; ++i) {
    const auto z = es.eigenvalues()[i];
    if (std::abs(z.imag()) > 1e-6 * std::max(1.0, std::abs(z.real()))) continue;
    double v = z.real();
    for (int it = 0; it < 4; ++it) {
      const double f = (((c[0] * v + c[1]) * v + c[2]) * v + c[3]) * v + c[4];
      const double df = ((4.0 * c[0] * v + 3.0 * c[1]) * v + 2.0 * c[2]) * v + c[3];
      if (df == 0.0) break;
      v -= f / df;
    }
    roots.push_back(v);
  }
  return roots;
}

}  // namespace

double reprojection_error(const PnpCorrespondence& c, const CameraIntrinsics& k, const RigidTransform& pose) {
  Vec2 px;
  if (!project_safe(k, pose.apply(c.point), px)) return kInf;
  return (px - c.pixel).norm();
}

double total_reprojection_error(std::span<const PnpCorrespondence> corrs, const CameraIntrinsics& k,
                                const RigidTransform& pose) {
  double sum = 0.0;
  for (const auto& c : corrs) {
    Vec2 px;
    if (!project_safe(k, pose.apply(c.point), px)) return kInf;
    sum += (px - c.pixel).squaredNorm();
  }
  return sum;
}

RigidTransform refine_pose(std::span<const PnpCorrespondence> corrs, const CameraIntrinsics& k,
                           const RigidTransform& initial, const GaussNewtonOptions& options) {
  RigidTransform pose = initial;
  double cost = total_reprojection_error(corrs, k, pose);
  if (!std::isfinite(cost)) return pose;
  using Vec6 = Eigen::Matrix<double, 6, 1>;
  using Mat6 = Eigen::Matrix<double, 6, 6>;
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    Mat6 jtj = Mat6::Zero();
    Vec6 jtr = Vec6::Zero();
    for (const auto& c : corrs) {
      const Vec3 rx = pose.rotation * c.point;
      const Vec3 p = rx + pose.translation;
      const double iz = 1.0 / p.z();
      Eigen::Matrix<double, 2, 3> dpi;
      dpi << k.fx * iz, 0.0, -k.fx * p.x() * iz * iz, 0.0, k.fy * iz, -k.fy * p.y() * iz * iz;
      Eigen::Matrix<double, 3, 6> dp;
      dp.leftCols<3>() = -skew(rx);
      dp.rightCols<3>() = Mat3::Identity();
      const Eigen::Matrix<double, 2, 6> j = dpi * dp;
      const Vec2 r(k.fx * p.x() * iz + k.cx - c.pixel.x(), k.fy * p.y() * iz + k.cy - c.pixel.y());
      jtj += j.transpose() * j;
      jtr += j.transpose() * r;
    }
    Vec6 step = jtj.ldlt().solve(-jtr);
    if (!step.allFinite()) break;

    bool accepted = false;
    for (int halving = 0; halving < 40; ++halving) {
      if (step.norm() < options.step_tolerance) break;
      RigidTransform trial;
      trial.rotation = rotation_from_axis_angle(step.head<3>()) * pose.rotation;
      trial.translation = pose.translation + step.tail<3>();
      const double trial_cost = total_reprojection_error(corrs, k, trial);
      if (trial_cost <= cost) {
        pose = trial;
        cost = trial_cost;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted || step.norm() < options.step_tolerance) break;
  }
  return pose;
}

RigidTransform pnp_solve(std::span<const PnpCorrespondence> corrs, const CameraIntrinsics& k,
                         const GaussNewtonOptions& options) {
  if (corrs.size() < 6) throw Error(ErrorCode::InsufficientPoints, "pnp_solve needs at least 6 correspondences");
  if (!k.is_valid()) throw Error(ErrorCode::InvalidArgument, "invalid camera intrinsics");

  Vec3 centroid = Vec3::Zero();
  for (const auto& c : corrs) centroid += c.point;
  centroid /= static_cast<double>(corrs.size());
  Mat3 spread = Mat3::Zero();
  double mean_dist = 0.0;
  for (const auto& c : corrs) {
    const Vec3 d = c.point - centroid;
    spread += d * d.transpose();
    mean_dist += d.norm();
  }
  mean_dist /= static_cast<double>(corrs.size());
  const Vec3 sv = Eigen::JacobiSVD<Mat3>(spread).singularValues();
  if (mean_dist <= 0.0 || sv[2] < 1e-9 * sv[0]) {
    throw Error(ErrorCode::DegenerateConfiguration, "points are coplanar or collinear");
  }
  const double s = std::sqrt(3.0) / mean_dist;

  Eigen::MatrixXd a(2 * static_cast<Eigen::Index>(corrs.size()), 12);
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    const Vec3 x = s * (corrs[i].point - centroid);
    const double xn = (corrs[i].pixel.x() - k.cx) / k.fx;
    const double yn = (corrs[i].pixel.y() - k.cy) / k.fy;
    const auto r = static_cast<Eigen::Index>(2 * i);
    a.row(r) << x.x(), x.y(), x.z(), 1.0, 0.0, 0.0, 0.0, 0.0, -xn * x.x(), -xn * x.y(), -xn * x.z(), -xn;
    a.row(r + 1) << 0.0, 0.0, 0.0, 0.0, x.x(), x.y(), x.z(), 1.0, -yn * x.x(), -yn * x.y(), -yn * x.z(), -yn;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sigma = svd.singularValues();
  if (sigma[10] < 1e-9 * sigma[0]) {
    throw Error(ErrorCode::DegenerateConfiguration, "projection system has a multi-dimensional null space");
  }
  const Eigen::VectorXd p = svd.matrixV().col(11);
  Eigen::Matrix<double, 3, 4> proj;
  proj << p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7], p[8], p[9], p[10], p[11];

  // Undo the point normalization: x ~ (s A) X + (b - s A c).
  Mat3 m = s * proj.leftCols<3>();
  Vec3 b = proj.col(3) - m * centroid;
  if (m.determinant() < 0.0) {
    m = -m;
    b = -b;
  }
  Eigen::JacobiSVD<Mat3> msvd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double scale = msvd.singularValues().mean();
  RigidTransform pose;
  pose.rotation = project_to_rotation(m);
  pose.translation = b / scale;
  return refine_pose(corrs, k, pose, options);
}

std::vector<RigidTransform> solve_p3p(const std::array<Vec3, 3>& f, const std::array<Vec3, 3>& x) {
  std::vector<RigidTransform> out;
  const double a2 = (x[1] - x[2]).squaredNorm();
  const double b2 = (x[0] - x[2]).squaredNorm();
  const double c2 = (x[0] - x[1]).squaredNorm();
  if (a2 < 1e-18 || b2 < 1e-18 || c2 < 1e-18) return out;
  if ((x[1] - x[0]).cross(x[2] - x[0]).norm() < 1e-12 * std::sqrt(b2 * c2)) return out;
  const double ca = f[1].dot(f[2]);
  const double cb = f[0].dot(f[2]);
  const double cg = f[0].dot(f[1]);

  // Grunert's elimination with s2 = u s1, s3 = v s1, quartic in v.
  const double p = (a2 - c2) / b2;
  const double q = (a2 + c2) / b2;
  const std::array<double, 5> coeff{
      (p - 1.0) * (p - 1.0) - 4.0 * c2 / b2 * ca * ca,
      4.0 * (p * (1.0 - p) * cb - (1.0 - q) * ca * cg + 2.0 * c2 / b2 * ca * ca * cb),
      2.0 * (p * p - 1.0 + 2.0 * p * p * cb * cb + 2.0 * (b2 - c2) / b2 * ca * ca - 4.0 * q * ca * cb * cg +
             2.0 * (b2 - a2) / b2 * cg * cg),
      4.0 * (-p * (1.0 + p) * cb + 2.0 * a2 / b2 * cg * cg * cb - (1.0 - q) * ca * cg),
      (1.0 + p) * (1.0 + p) - 4.0 * a2 / b2 * cg * cg,
  };
  for (double v : real_quartic_roots(coeff)) {
    const double den = 2.0 * (cg - v * ca);
    if (std::abs(den) < 1e-14) continue;
    const double u = ((p - 1.0) * v * v - 2.0 * p * cb * v + 1.0 + p) / den;
    const double d1 = 1.0 + v * v - 2.0 * v * cb;
    if (!(d1 > 0.0) || u <= 0.0 || v <= 0.0) continue;
    const double s1 = std::sqrt(b2 / d1);
    const std::array<Vec3, 3> cam{s1 * f[0], u * s1 * f[1], v * s1 * f[2]};
    out.push_back(kabsch(x, cam));
  }
  return out;
}

void RansacConfig::validate() const {
  if (max_iterations < 1) throw Error(ErrorCode::InvalidArgument, "max_iterations must be >= 1");
  if (!(inlier_threshold_px > 0.0)) throw Error(ErrorCode::InvalidArgument, "inlier threshold must be > 0");
  if (min_sample < 4) throw Error(ErrorCode::InvalidArgument, "min_sample must be >= 4");
  if (!(confidence > 0.0 && confidence < 1.0)) throw Error(ErrorCode::InvalidArgument, "confidence must be in (0,1)");
}

std::size_t PoseEstimate::inlier_count() const {
  return static_cast<std::size_t>(std::count(inlier_mask.begin(), inlier_mask.end(), 1));
}

namespace {

std::size_t count_inliers(std::span<const PnpCorrespondence> corrs, const CameraIntrinsics& k,
                          const RigidTransform& pose, double threshold, std::vector<std::uint8_t>* mask) {
  std::size_t n = 0;
  if (mask != nullptr) mask->assign(corrs.size(), 0);
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    if (reprojection_error(corrs[i], k, pose) < threshold) {
      ++n;
      if (mask != nullptr) (*mask)[i] = 1;
    }
  }
  return n;
}

std::vector<PnpCorrespondence> select(std::span<const PnpCorrespondence> corrs, const std::vector<std::uint8_t>& mask) {
  std::vector<PnpCorrespondence> out;
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    if (mask[i] != 0) out.push_back(corrs[i]);
  }
  return out;
}

}  // namespace

PoseEstimate pnp_ransac(std::span<const PnpCorrespondence> corrs, const CameraIntrinsics& k,
                        const RansacConfig& config) {
  config.validate();
  if (!k.is_valid()) throw Error(ErrorCode::InvalidArgument, "invalid camera intrinsics");
  const auto sample_size = static_cast<std::size_t>(config.min_sample);
  if (corrs.size() < sample_size) throw Error(ErrorCode::InsufficientPoints, "fewer correspondences than min_sample");

  std::vector<Vec3> bearings(corrs.size());
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    bearings[i] = Vec3((corrs[i].pixel.x() - k.cx) / k.fx, (corrs[i].pixel.y() - k.cy) / k.fy, 1.0).normalized();
  }

  Rng rng = make_rng(config.seed, 0x7a5);
  std::uniform_int_distribution<std::size_t> pick(0, corrs.size() - 1);
  GaussNewtonOptions sample_gn;
  sample_gn.max_iterations = 10;

  RigidTransform best_pose;
  std::size_t best_count = 0;
  int iterations = 0;
  double needed = static_cast<double>(config.max_iterations);
  std::vector<std::size_t> sample;
  std::vector<PnpCorrespondence> sample_corrs;
  for (int iter = 0; iter < config.max_iterations && iter < needed; ++iter) {
    iterations = iter + 1;
    sample.clear();
    while (sample.size() < sample_size) {
      const std::size_t s = pick(rng);
      if (std::find(sample.begin(), sample.end(), s) == sample.end()) sample.push_back(s);
    }
    sample_corrs.clear();
    for (std::size_t s : sample) sample_corrs.push_back(corrs[s]);

    const auto candidates = solve_p3p({bearings[sample[0]], bearings[sample[1]], bearings[sample[2]]},
                                      {corrs[sample[0]].point, corrs[sample[1]].point, corrs[sample[2]].point});
    if (candidates.empty()) continue;
    // The remaining sample members choose among the three-point solutions.
    const RigidTransform* chosen = nullptr;
    double chosen_err = kInf;
    for (const auto& c : candidates) {
      double err = 0.0;
      for (std::size_t j = 3; j < sample_size; ++j) err += reprojection_error(corrs[sample[j]], k, c);
      if (err < chosen_err) {
        chosen_err = err;
        chosen = &c;
      }
    }
    if (chosen == nullptr) continue;
    const RigidTransform hypothesis = refine_pose(sample_corrs, k, *chosen, sample_gn);
    const std::size_t count = count_inliers(corrs, k, hypothesis, config.inlier_threshold_px, nullptr);
    if (count > best_count) {
      best_count = count;
      best_pose = hypothesis;
      const double w = static_cast<double>(count) / static_cast<double>(corrs.size());
      const double miss = 1.0 - std::pow(w, static_cast<double>(sample_size));
      if (miss <= 0.0) {
        needed = 0.0;
      } else if (miss < 1.0) {
        needed = std::log(1.0 - config.confidence) / std::log(miss);
      }
    }
  }
  if (best_count < 6) throw Error(ErrorCode::NoConsensus, "no hypothesis reached 6 inliers");

  std::vector<std::uint8_t> mask;
  count_inliers(corrs, k, best_pose, config.inlier_threshold_px, &mask);
  const auto inliers = select(corrs, mask);
  RigidTransform final_pose;
  try {
    final_pose = pnp_solve(inliers, k);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::DegenerateConfiguration) throw;
    final_pose = refine_pose(inliers, k, best_pose);
  }
  // Keep the refit only if it explains the consensus set at least as well.
  if (total_reprojection_error(inliers, k, final_pose) > total_reprojection_error(inliers, k, best_pose)) {
    final_pose = refine_pose(inliers, k, best_pose);
  }

  PoseEstimate est;
  est.transform = final_pose;
  est.iterations = iterations;
  const std::size_t final_count = count_inliers(corrs, k, final_pose, config.inlier_threshold_px, &est.inlier_mask);
  if (final_count < 6) throw Error(ErrorCode::NoConsensus, "refit pose lost the consensus set");
  double sum = 0.0;
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    if (est.inlier_mask[i] != 0) sum += reprojection_error(corrs[i], k, final_pose);
  }
  est.mean_reprojection_error = sum / static_cast<double>(final_count);
  return est;
}

}  // namespace i2preg
