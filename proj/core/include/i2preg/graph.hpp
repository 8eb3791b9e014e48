#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "i2preg/features.hpp"
#include "i2preg/geometry.hpp"

namespace i2preg {

/// k-NN graph over 2D pixel or 3D point positions. No self loops; every
/// node has exactly min(k, node_count - 1) neighbors, nearest first.
struct KnnGraph {
  std::size_t node_count = 0;
  std::vector<std::vector<int>> neighbors;
  Eigen::MatrixXd positions;  // node_count x dim
};

KnnGraph build_knn_graph(std::span<const Vec2> positions, std::size_t k);
KnnGraph build_knn_graph(std::span<const Vec3> positions, std::size_t k);

/// Single-head scaled dot-product graph attention with a sigmoid-gated
/// fusion MLP. All matrices act on column feature vectors.
struct GraphAttentionParams {
  Eigen::MatrixXd query_proj;  // C x C
  Eigen::MatrixXd key_proj;  // C x C
  Eigen::MatrixXd value_proj;  // C x C
  Eigen::MatrixXd gate_hidden;  // C x 2C
  Eigen::VectorXd gate_hidden_bias;  // C
  Eigen::MatrixXd gate_out;  // C x C
  Eigen::VectorXd gate_out_bias;  // C
  std::uint64_t seed = 0;

  [[nodiscard]] Eigen::Index channels() const { return query_proj.rows(); }

  /// Weights uniform in [-1/sqrt(C), 1/sqrt(C)], biases zero.
  static GraphAttentionParams random(Eigen::Index channels, std::uint64_t seed);
  static GraphAttentionParams identity(Eigen::Index channels);

  /// Throws DimensionMismatch if the shapes are inconsistent.
  void validate() const;

  /// Flat little-endian float32 blob (tensors in declaration order,
  /// row-major) plus a JSON sidecar with shapes, offsets and seed.
  void save(const std::filesystem::path& blob, const std::filesystem::path& sidecar) const;
  static GraphAttentionParams load(const std::filesystem::path& blob, const std::filesystem::path& sidecar);
};

/// Softmax attention weights of every node over its neighbor list.
std::vector<std::vector<double>> attention_weights(const KnnGraph& graph, const FeatureField& features,
                                                   const GraphAttentionParams& params);

/// Attention-weighted sum of projected neighbor values for every node.
FeatureField light_gat_forward(const KnnGraph& graph, const FeatureField& features,
                               const GraphAttentionParams& params);

/// Per-channel gate g = sigmoid(gate([original | refined])), output
/// g * refined + (1 - g) * original.
FeatureField gated_fusion(const FeatureField& original, const FeatureField& refined,
                          const GraphAttentionParams& params);

/// The gate values themselves (M x C), exposed for inspection.
FeatureMatrix fusion_gate(const FeatureField& original, const FeatureField& refined,
                          const GraphAttentionParams& params);

}  // namespace i2preg
