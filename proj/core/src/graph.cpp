#include "i2preg/graph.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>

#include <nlohmann/json.hpp>

#include "i2preg/error.hpp"
#include "i2preg/knn.hpp"
#include "i2preg/random.hpp"

namespace i2preg {

FeatureMatrix normalize_rows(const FeatureMatrix& m) {
  FeatureMatrix out = m;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double n = out.row(i).norm();
    if (n > 0.0) out.row(i) /= n;
  }
  return out;
}

namespace {

template <int Dim>
KnnGraph build_graph(std::span<const Eigen::Matrix<double, Dim, 1>> positions, std::size_t k) {
  if (positions.size() < 2) throw Error(ErrorCode::InvalidArgument, "a k-NN graph needs at least two nodes");
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
  KnnGraph g;
  g.node_count = positions.size();
  g.positions.resize(static_cast<Eigen::Index>(positions.size()), Dim);
  for (std::size_t i = 0; i < positions.size(); ++i) {
    g.positions.row(static_cast<Eigen::Index>(i)) = positions[i].transpose();
  }
  const std::size_t kk = std::min(k, positions.size() - 1);
  const KdTree<Dim> tree(positions);
  g.neighbors.resize(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const auto nn = tree.knn_of(static_cast<int>(i), kk);
    auto& list = g.neighbors[i];
    list.reserve(nn.size());
    for (const auto& n : nn) list.push_back(n.index);
  }
  return g;
}

void check_inputs(const KnnGraph& graph, const FeatureField& features, const GraphAttentionParams& params) {
  params.validate();
  if (static_cast<std::size_t>(features.rows()) != graph.node_count) {
    throw Error(ErrorCode::DimensionMismatch, "feature rows must equal the graph node count");
  }
  if (features.channels() != params.channels()) {
    throw Error(ErrorCode::DimensionMismatch, "feature channels do not match the attention parameters");
  }
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

KnnGraph build_knn_graph(std::span<const Vec2> positions, std::size_t k) { return build_graph<2>(positions, k); }
KnnGraph build_knn_graph(std::span<const Vec3> positions, std::size_t k) { return build_graph<3>(positions, k); }

GraphAttentionParams GraphAttentionParams::random(Eigen::Index channels, std::uint64_t seed) {
  if (channels < 1) throw Error(ErrorCode::InvalidArgument, "channels must be >= 1");
  Rng rng = make_rng(seed, 0x6a7);
  const double bound = 1.0 / std::sqrt(static_cast<double>(channels));
  std::uniform_real_distribution<double> uni(-bound, bound);
  auto fill = [&](Eigen::Index r, Eigen::Index c) {
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) m(i, j) = uni(rng);
    return m;
  };
  GraphAttentionParams p;
  p.query_proj = fill(channels, channels);
  p.key_proj = fill(channels, channels);
  p.value_proj = fill(channels, channels);
  p.gate_hidden = fill(channels, 2 * channels);
  p.gate_hidden_bias = Eigen::VectorXd::Zero(channels);
  p.gate_out = fill(channels, channels);
  p.gate_out_bias = Eigen::VectorXd::Zero(channels);
  p.seed = seed;
  return p;
}

GraphAttentionParams GraphAttentionParams::identity(Eigen::Index channels) {
  GraphAttentionParams p;
  p.query_proj = Eigen::MatrixXd::Identity(channels, channels);
  p.key_proj = Eigen::MatrixXd::Identity(channels, channels);
  p.value_proj = Eigen::MatrixXd::Identity(channels, channels);
  p.gate_hidden = Eigen::MatrixXd::Zero(channels, 2 * channels);
  p.gate_hidden_bias = Eigen::VectorXd::Zero(channels);
  p.gate_out = Eigen::MatrixXd::Zero(channels, channels);
  p.gate_out_bias = Eigen::VectorXd::Zero(channels);
  return p;
}

void GraphAttentionParams::validate() const {
  const Eigen::Index c = query_proj.rows();
  const bool ok = c >= 1 && query_proj.cols() == c && key_proj.rows() == c && key_proj.cols() == c &&
                  value_proj.rows() == c && value_proj.cols() == c && gate_hidden.rows() == c &&
                  gate_hidden.cols() == 2 * c && gate_hidden_bias.size() == c && gate_out.rows() == c &&
                  gate_out.cols() == c && gate_out_bias.size() == c;
  if (!ok) throw Error(ErrorCode::DimensionMismatch, "graph attention parameter shapes are inconsistent");
}

namespace {

struct TensorRef {
  const char* name;
  Eigen::Index rows;
  Eigen::Index cols;
};

std::vector<TensorRef> layout(Eigen::Index c) {
  return {{"query_proj", c, c},   {"key_proj", c, c},   {"value_proj", c, c},   {"gate_hidden", c, 2 * c},
          {"gate_hidden_bias", c, 1}, {"gate_out", c, c}, {"gate_out_bias", c, 1}};
}

template <typename Fn>
void for_each_tensor(GraphAttentionParams& p, Fn&& fn) {
  fn(p.query_proj);
  fn(p.key_proj);
  fn(p.value_proj);
  fn(p.gate_hidden);
  fn(p.gate_hidden_bias);
  fn(p.gate_out);
  fn(p.gate_out_bias);
}

}  // namespace

void GraphAttentionParams::save(const std::filesystem::path& blob, const std::filesystem::path& sidecar) const {
  validate();
  std::ofstream out(blob, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + blob.string());
  auto copy = *this;
  for_each_tensor(copy, [&](auto& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(m(i, j)));
        if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
        char buf[4];
        std::memcpy(buf, &bits, 4);
        out.write(buf, 4);
      }
    }
  });
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + blob.string());

  nlohmann::json meta;
  meta["dtype"] = "float32";
  meta["byte_order"] = "little";
  meta["layout"] = "row_major";
  meta["channels"] = channels();
  meta["seed"] = seed;
  nlohmann::json tensors = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& t : layout(channels())) {
    tensors.push_back({{"name", t.name}, {"shape", {t.rows, t.cols}}, {"offset", offset}});
    offset += static_cast<std::size_t>(t.rows * t.cols) * 4;
  }
  meta["tensors"] = tensors;
  std::ofstream side(sidecar, std::ios::trunc);
  if (!side) throw Error(ErrorCode::IoError, "cannot open " + sidecar.string());
  side << meta.dump(2) << '\n';
}

GraphAttentionParams GraphAttentionParams::load(const std::filesystem::path& blob,
                                                const std::filesystem::path& sidecar) {
  std::ifstream side(sidecar);
  if (!side) throw Error(ErrorCode::IoError, "cannot open " + sidecar.string());
  nlohmann::json meta;
  try {
    side >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, sidecar.string() + ": " + e.what());
  }
  if (meta.value("dtype", "") != "float32" || meta.value("byte_order", "") != "little") {
    throw Error(ErrorCode::ParseError, "unsupported parameter blob encoding");
  }
  const auto c = meta.at("channels").get<Eigen::Index>();
  const auto expected = layout(c);
  const auto& tensors = meta.at("tensors");
  if (tensors.size() != expected.size()) throw Error(ErrorCode::ParseError, "unexpected tensor count");
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const auto shape = tensors[i].at("shape").get<std::vector<Eigen::Index>>();
    if (tensors[i].at("name").get<std::string>() != expected[i].name || shape.size() != 2 ||
        shape[0] != expected[i].rows || shape[1] != expected[i].cols) {
      throw Error(ErrorCode::ParseError, "tensor " + std::to_string(i) + " has an unexpected name or shape");
    }
  }

  GraphAttentionParams p;
  p.query_proj.resize(c, c);
  p.key_proj.resize(c, c);
  p.value_proj.resize(c, c);
  p.gate_hidden.resize(c, 2 * c);
  p.gate_hidden_bias.resize(c);
  p.gate_out.resize(c, c);
  p.gate_out_bias.resize(c);
  p.seed = meta.value("seed", std::uint64_t{0});

  std::ifstream in(blob, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + blob.string());
  for_each_tensor(p, [&](auto& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        char buf[4];
        if (!in.read(buf, 4)) throw Error(ErrorCode::ParseError, "parameter blob is truncated");
        std::uint32_t bits = 0;
        std::memcpy(&bits, buf, 4);
        if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
        m(i, j) = static_cast<double>(std::bit_cast<float>(bits));
      }
    }
  });
  return p;
}

std::vector<std::vector<double>> attention_weights(const KnnGraph& graph, const FeatureField& features,
                                                   const GraphAttentionParams& params) {
  check_inputs(graph, features, params);
  const double inv_sqrt_c = 1.0 / std::sqrt(static_cast<double>(params.channels()));
  // Row-wise projections: row i of Q is (query_proj * f_i)^T.
  const Eigen::MatrixXd q = features.vectors * params.query_proj.transpose();
  const Eigen::MatrixXd k = features.vectors * params.key_proj.transpose();

  std::vector<std::vector<double>> alpha(graph.node_count);
  for (std::size_t i = 0; i < graph.node_count; ++i) {
    const auto& nbrs = graph.neighbors[i];
    auto& a = alpha[i];
    a.resize(nbrs.size());
    double max_score = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < nbrs.size(); ++j) {
      a[j] = q.row(static_cast<Eigen::Index>(i)).dot(k.row(nbrs[j])) * inv_sqrt_c;
      max_score = std::max(max_score, a[j]);
    }
    double sum = 0.0;
    for (double& s : a) {
      s = std::exp(s - max_score);
      sum += s;
    }
    for (double& s : a) s /= sum;
  }
  return alpha;
}

FeatureField light_gat_forward(const KnnGraph& graph, const FeatureField& features,
                               const GraphAttentionParams& params) {
  const auto alpha = attention_weights(graph, features, params);
  const Eigen::MatrixXd v = features.vectors * params.value_proj.transpose();
  FeatureField out;
  out.carrier = features.carrier;
  out.vectors = FeatureMatrix::Zero(features.rows(), features.channels());
  for (std::size_t i = 0; i < graph.node_count; ++i) {
    const auto& nbrs = graph.neighbors[i];
    for (std::size_t j = 0; j < nbrs.size(); ++j) {
      out.vectors.row(static_cast<Eigen::Index>(i)) += alpha[i][j] * v.row(nbrs[j]);
    }
  }
  return out;
}

FeatureMatrix fusion_gate(const FeatureField& original, const FeatureField& refined,
                          const GraphAttentionParams& params) {
  params.validate();
  if (original.rows() != refined.rows() || original.channels() != refined.channels()) {
    throw Error(ErrorCode::DimensionMismatch, "original and refined features must have equal shapes");
  }
  if (original.channels() != params.channels()) {
    throw Error(ErrorCode::DimensionMismatch, "feature channels do not match the gate parameters");
  }
  const Eigen::Index c = params.channels();
  FeatureMatrix gate(original.rows(), c);
  Eigen::VectorXd x(2 * c);
  for (Eigen::Index i = 0; i < original.rows(); ++i) {
    x.head(c) = original.vectors.row(i).transpose();
    x.tail(c) = refined.vectors.row(i).transpose();
    const Eigen::VectorXd hidden = (params.gate_hidden * x + params.gate_hidden_bias).cwiseMax(0.0);
    const Eigen::VectorXd logits = params.gate_out * hidden + params.gate_out_bias;
    for (Eigen::Index j = 0; j < c; ++j) gate(i, j) = sigmoid(logits[j]);
  }
  return gate;
}

FeatureField gated_fusion(const FeatureField& original, const FeatureField& refined,
                          const GraphAttentionParams& params) {
  const FeatureMatrix g = fusion_gate(original, refined, params);
  FeatureField out;
  out.carrier = original.carrier;
  out.vectors = g.cwiseProduct(refined.vectors) + (1.0 - g.array()).matrix().cwiseProduct(original.vectors);
  return out;
}

}  // namespace i2preg
