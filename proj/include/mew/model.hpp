#pragma once

// Two-branch multiplex model.
//
// Each branch maps its K+1 precomputed hop matrices through per-hop linear
// maps, an activation, a combiner and a second activation:
//
//   H_k = act(hop_k W_k + b_k)            (n x D, dropout in training)
//   Z   = act(sum_k H_k Wz_k + bz)        (Wz_k = rows kD..(k+1)D of Wz)
//
// which is the concatenated form [H_0 .. H_K] Wz written blockwise. The two
// branch embeddings are fused per node (attention, sum, concat-then-linear,
// or a single branch), passed through one 3-layer MLP head per task, and
// the node outputs are pooled into one prediction per graph.

#include "mew/manifest.hpp"
#include "mew/matrix.hpp"
#include "mew/precompute.hpp"
#include "mew/rng.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mew {

enum class Fusion { Attention, Sum, Concat, VoronoiOnly, CelltypeOnly };
enum class Activation { Relu, Prelu, Identity };
enum class Pooling { Mean, Max, Sum };

std::string_view fusion_name(Fusion f);
Fusion parse_fusion(const std::string& s);
std::string_view activation_name(Activation a);
Activation parse_activation(const std::string& s);
std::string_view pooling_name(Pooling p);
Pooling parse_pooling(const std::string& s);

/// Negative slope of the attention LeakyReLU.
inline constexpr double kAttentionSlope = 0.3;
inline constexpr double kPreluInitialSlope = 0.25;

struct ModelConfig {
  std::size_t feature_dim = 0;
  std::size_t hidden_dim = 64;
  int hops = 3;
  bool shared_weights = true;
  double dropout = 0.0;
  Fusion fusion = Fusion::Attention;
  Activation activation = Activation::Relu;
  Pooling pooling = Pooling::Mean;
  std::vector<TaskSpec> tasks;

  /// 2 logits for binary tasks, 1 risk score for hazard tasks.
  std::size_t task_outputs(std::size_t t) const { return tasks.at(t).kind == TaskKind::Binary ? 2 : 1; }
  bool uses_voronoi() const { return fusion != Fusion::CelltypeOnly; }
  bool uses_celltype() const { return fusion != Fusion::VoronoiOnly; }
};

/// Location of one parameter block inside the flat parameter vector.
struct Slot {
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t size() const { return rows * cols; }
};

enum class BlockKind { Weight, Bias, Slope };

struct NamedBlock {
  std::string name;
  Slot slot;
  BlockKind kind;
};

inline constexpr int kVoronoi = 0;
inline constexpr int kCelltype = 1;

struct HeadLayout {
  Slot w1, b1, w2, b2, w3, b3;
};

/// With shared weights the cell-type hop slots alias the Voronoi ones, so
/// both branches accumulate into one gradient.
struct ParamLayout {
  std::array<std::vector<Slot>, 2> hop_w;
  std::array<std::vector<Slot>, 2> hop_b;
  std::array<Slot, 2> comb_w;
  std::array<Slot, 2> comb_b;
  std::array<Slot, 2> sigma_slope;  // PReLU only
  std::array<Slot, 2> xi_slope;     // PReLU only
  Slot attention;                   // D x 1
  Slot concat_w, concat_b;          // concat fusion only
  std::vector<HeadLayout> heads;
  std::vector<NamedBlock> blocks;   // unique blocks in storage order
  std::size_t total = 0;
};

ParamLayout make_layout(const ModelConfig& config);

class ModelParams {
 public:
  ModelParams() = default;
  explicit ModelParams(ModelConfig config);

  /// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero,
  /// PReLU slopes 0.25.
  void initialize(std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const ParamLayout& layout() const { return layout_; }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  ConstMatrixView view(const Slot& s) const { return {values_.data() + s.offset, s.rows, s.cols}; }
  MatrixView view(const Slot& s) { return {values_.data() + s.offset, s.rows, s.cols}; }
  std::span<const double> span(const Slot& s) const { return {values_.data() + s.offset, s.size()}; }

 private:
  ModelConfig config_;
  ParamLayout layout_;
  std::vector<double> values_;
};

enum class Mode { Train, Eval };

struct BranchTrace {
  std::vector<Matrix> pre;     // hop_k W_k + b_k
  std::vector<Matrix> hidden;  // H_k after activation and dropout
  std::vector<Matrix> mask;    // dropout scale (0 or 1/(1-p)); empty when off
  Matrix pre_out;              // before the second activation
  Matrix z;

  /// [H_0 | H_1 | ... | H_K], n x D(K+1).
  Matrix concatenated_hidden() const;
};

struct HeadTrace {
  Matrix pre1, hidden1, mask1;
  Matrix pre2, hidden2, mask2;
  Matrix out;                       // node outputs, n x C
  std::vector<double> pooled;       // C
  std::vector<std::size_t> argmax;  // max pooling only
};

struct ForwardTrace {
  BranchTrace voronoi;
  BranchTrace celltype;
  std::vector<double> score_voronoi;   // a^T z before LeakyReLU
  std::vector<double> score_celltype;  // a^T z' before LeakyReLU
  std::vector<double> alpha_voronoi;   // per node; cell-type weight is 1 - alpha
  Matrix fused;
  std::vector<HeadTrace> heads;

  /// Mean Voronoi / cell-type attention over nodes (0.5 / 0.5 without attention).
  double mean_alpha_voronoi() const;
  double mean_alpha_celltype() const { return 1.0 - mean_alpha_voronoi(); }
};

double leaky_relu(double x, double slope = kAttentionSlope);

/// One branch: per-hop transforms, activation, dropout, combiner.
BranchTrace branch_forward(const ModelParams& params, int branch, std::span<const Matrix> hops, Mode mode,
                           Rng* dropout_rng);

struct FusedEmbedding {
  Matrix z;
  std::vector<double> alpha_voronoi;
  std::vector<double> score_voronoi;
  std::vector<double> score_celltype;
};

/// alpha = softmax(LeakyReLU(a^T z_l), LeakyReLU(a^T z'_l)) per node.
FusedEmbedding attention_fuse(const Matrix& z, const Matrix& z_celltype, std::span<const double> a);

/// Pools node rows into one vector. Throws EmptyGraph.
std::vector<double> pool(const Matrix& node_values, Pooling pooling);

/// Full forward pass for one graph. `dropout_rng` is required in training
/// mode when dropout > 0.
ForwardTrace full_forward(const ModelParams& params, const PrecomputedFeatures& pf, Mode mode,
                          Rng* dropout_rng = nullptr);

/// Accumulates dL/dtheta into `grads` (same layout as the parameters) given
/// dL/dpooled for every task (empty vector = no gradient for that task).
void backward(const ModelParams& params, const PrecomputedFeatures& pf, const ForwardTrace& trace,
              std::span<const std::vector<double>> pooled_grads, std::span<double> grads);

/// Prediction per task from pooled outputs: P(class 1) for binary tasks,
/// the risk score for hazard tasks.
double task_score(const ModelConfig& config, std::size_t task, std::span<const double> pooled);

}  // namespace mew
