#pragma once

#include <Eigen/Core>

namespace i2preg {

enum class Carrier { Image, Cloud };

using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// M x C descriptors, one row per pixel, point or graph node.
struct FeatureField {
  FeatureMatrix vectors;
  Carrier carrier = Carrier::Image;

  [[nodiscard]] Eigen::Index rows() const { return vectors.rows(); }
  [[nodiscard]] Eigen::Index channels() const { return vectors.cols(); }
};

/// Rows scaled to unit L2 norm; zero rows stay zero.
FeatureMatrix normalize_rows(const FeatureMatrix& m);

}  // namespace i2preg
