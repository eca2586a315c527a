#include "mew/model.hpp"

#include "mew/error.hpp"
#include "mew/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace mew {

namespace {

Matrix zeros_like(const Matrix& m) { return Matrix(m.rows(), m.cols()); }

void add_bias(Matrix& m, std::span<const double> b) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double* r = m.row(i);
    for (std::size_t j = 0; j < m.cols(); ++j) r[j] += b[j];
  }
}

double activate(double u, Activation act, double slope) {
  switch (act) {
    case Activation::Relu: return u > 0.0 ? u : 0.0;
    case Activation::Prelu: return u > 0.0 ? u : slope * u;
    case Activation::Identity: return u;
  }
  return u;
}

double activate_grad(double u, Activation act, double slope) {
  switch (act) {
    case Activation::Relu: return u > 0.0 ? 1.0 : 0.0;
    case Activation::Prelu: return u > 0.0 ? 1.0 : slope;
    case Activation::Identity: return 1.0;
  }
  return 1.0;
}

double slope_of(const ModelParams& p, const Slot& s) {
  return p.config().activation == Activation::Prelu ? p.values()[s.offset] : 0.0;
}

/// Rows kD..(k+1)D of a combiner block.
Slot comb_block(const Slot& comb, std::size_t k, std::size_t d) { return {comb.offset + k * d * d, d, d}; }

Matrix dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng& rng) {
  Matrix mask(rows, cols);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (double& v : mask.values()) v = uniform01(rng) < rate ? 0.0 : keep_scale;
  return mask;
}

bool dropout_active(const ModelConfig& c, Mode mode) { return mode == Mode::Train && c.dropout > 0.0; }

Rng& require_rng(Rng* rng) {
  if (rng == nullptr) throw Error(Errc::InvalidConfig, "training-mode dropout needs a random generator");
  return *rng;
}

void check_dims(const ModelConfig& c, const PrecomputedFeatures& pf) {
  const std::size_t need = static_cast<std::size_t>(c.hops) + 1;
  if (pf.voronoi_hops.size() < need || pf.celltype_hops.size() < need) {
    throw Error(Errc::DimMismatch, "precomputed features have " + std::to_string(pf.voronoi_hops.size()) +
                                       " hop matrices, model needs " + std::to_string(need));
  }
  if (pf.n() == 0) throw Error(Errc::EmptyGraph, "graph has no nodes");
  if (pf.feature_dim() != c.feature_dim) {
    throw Error(Errc::DimMismatch, "feature dimension " + std::to_string(pf.feature_dim()) + " != model " +
                                       std::to_string(c.feature_dim));
  }
}

}  // namespace

std::string_view fusion_name(Fusion f) {
  switch (f) {
    case Fusion::Attention: return "attention";
    case Fusion::Sum: return "sum";
    case Fusion::Concat: return "concat";
    case Fusion::VoronoiOnly: return "voronoi";
    case Fusion::CelltypeOnly: return "celltype";
  }
  return "attention";
}

Fusion parse_fusion(const std::string& s) {
  for (Fusion f : {Fusion::Attention, Fusion::Sum, Fusion::Concat, Fusion::VoronoiOnly, Fusion::CelltypeOnly}) {
    if (fusion_name(f) == s) return f;
  }
  throw Error(Errc::InvalidConfig, "unknown fusion \"" + s + "\"");
}

std::string_view activation_name(Activation a) {
  switch (a) {
    case Activation::Relu: return "relu";
    case Activation::Prelu: return "prelu";
    case Activation::Identity: return "identity";
  }
  return "relu";
}

Activation parse_activation(const std::string& s) {
  for (Activation a : {Activation::Relu, Activation::Prelu, Activation::Identity}) {
    if (activation_name(a) == s) return a;
  }
  throw Error(Errc::InvalidConfig, "unknown activation \"" + s + "\"");
}

std::string_view pooling_name(Pooling p) {
  switch (p) {
    case Pooling::Mean: return "mean";
    case Pooling::Max: return "max";
    case Pooling::Sum: return "sum";
  }
  return "mean";
}

Pooling parse_pooling(const std::string& s) {
  for (Pooling p : {Pooling::Mean, Pooling::Max, Pooling::Sum}) {
    if (pooling_name(p) == s) return p;
  }
  throw Error(Errc::InvalidConfig, "unknown pooling \"" + s + "\"");
}

ParamLayout make_layout(const ModelConfig& c) {
  if (c.feature_dim == 0 || c.hidden_dim == 0) throw Error(Errc::InvalidConfig, "model dimensions must be positive");
  if (c.hops < 0) throw Error(Errc::InvalidConfig, "hops must be non-negative");
  if (!(c.dropout >= 0.0 && c.dropout < 1.0)) throw Error(Errc::InvalidConfig, "dropout must be in [0, 1)");
  if (c.tasks.empty()) throw Error(Errc::InvalidConfig, "model needs at least one task");

  ParamLayout l;
  const std::size_t f = c.feature_dim, d = c.hidden_dim, k1 = static_cast<std::size_t>(c.hops) + 1;
  auto add = [&](std::string name, std::size_t rows, std::size_t cols, BlockKind kind) {
    Slot s{l.total, rows, cols};
    l.total += s.size();
    l.blocks.push_back({std::move(name), s, kind});
    return s;
  };
  const bool prelu = c.activation == Activation::Prelu;
  const char* branch_names[2] = {"voronoi", "celltype"};
  for (int b : {kVoronoi, kCelltype}) {
    const std::string pre = branch_names[b];
    const bool used = b == kVoronoi ? c.uses_voronoi() : c.uses_celltype();
    if (!used) continue;
    const bool alias = b == kCelltype && c.shared_weights && c.uses_voronoi();
    if (alias) {
      l.hop_w[b] = l.hop_w[kVoronoi];
      l.hop_b[b] = l.hop_b[kVoronoi];
      if (prelu) l.sigma_slope[b] = l.sigma_slope[kVoronoi];
    } else {
      for (std::size_t k = 0; k < k1; ++k) {
        l.hop_w[b].push_back(add(pre + ".hop" + std::to_string(k) + ".weight", f, d, BlockKind::Weight));
        l.hop_b[b].push_back(add(pre + ".hop" + std::to_string(k) + ".bias", 1, d, BlockKind::Bias));
      }
      if (prelu) l.sigma_slope[b] = add(pre + ".hop_slope", 1, 1, BlockKind::Slope);
    }
    l.comb_w[b] = add(pre + ".combine.weight", d * k1, d, BlockKind::Weight);
    l.comb_b[b] = add(pre + ".combine.bias", 1, d, BlockKind::Bias);
    if (prelu) l.xi_slope[b] = add(pre + ".combine_slope", 1, 1, BlockKind::Slope);
  }
  if (c.fusion == Fusion::Attention) l.attention = add("attention", d, 1, BlockKind::Weight);
  if (c.fusion == Fusion::Concat) {
    l.concat_w = add("concat.weight", 2 * d, d, BlockKind::Weight);
    l.concat_b = add("concat.bias", 1, d, BlockKind::Bias);
  }
  for (std::size_t t = 0; t < c.tasks.size(); ++t) {
    const std::string pre = "head." + c.tasks[t].name;
    HeadLayout h;
    h.w1 = add(pre + ".w1", d, d, BlockKind::Weight);
    h.b1 = add(pre + ".b1", 1, d, BlockKind::Bias);
    h.w2 = add(pre + ".w2", d, d, BlockKind::Weight);
    h.b2 = add(pre + ".b2", 1, d, BlockKind::Bias);
    h.w3 = add(pre + ".w3", d, c.task_outputs(t), BlockKind::Weight);
    h.b3 = add(pre + ".b3", 1, c.task_outputs(t), BlockKind::Bias);
    l.heads.push_back(h);
  }
  return l;
}

ModelParams::ModelParams(ModelConfig config)
    : config_(std::move(config)), layout_(make_layout(config_)), values_(layout_.total, 0.0) {}

void ModelParams::initialize(std::uint64_t seed) {
  Rng rng(seed);
  for (const NamedBlock& b : layout_.blocks) {
    double* p = values_.data() + b.slot.offset;
    switch (b.kind) {
      case BlockKind::Weight: {
        const double bound = std::sqrt(6.0 / static_cast<double>(b.slot.rows + b.slot.cols));
        for (std::size_t i = 0; i < b.slot.size(); ++i) p[i] = uniform(rng, -bound, bound);
        break;
      }
      case BlockKind::Bias: std::fill(p, p + b.slot.size(), 0.0); break;
      case BlockKind::Slope: std::fill(p, p + b.slot.size(), kPreluInitialSlope); break;
    }
  }
}

Matrix BranchTrace::concatenated_hidden() const {
  if (hidden.empty()) return {};
  const std::size_t n = hidden.front().rows(), d = hidden.front().cols();
  Matrix h(n, d * hidden.size());
  for (std::size_t k = 0; k < hidden.size(); ++k) {
    for (std::size_t i = 0; i < n; ++i) std::copy_n(hidden[k].row(i), d, h.row(i) + k * d);
  }
  return h;
}

double ForwardTrace::mean_alpha_voronoi() const {
  if (alpha_voronoi.empty()) return 0.5;
  double s = 0.0;
  for (double a : alpha_voronoi) s += a;
  return s / static_cast<double>(alpha_voronoi.size());
}

double leaky_relu(double x, double slope) { return x > 0.0 ? x : slope * x; }

BranchTrace branch_forward(const ModelParams& params, int branch, std::span<const Matrix> hops, Mode mode,
                           Rng* dropout_rng) {
  const ModelConfig& c = params.config();
  const ParamLayout& l = params.layout();
  const std::size_t k1 = static_cast<std::size_t>(c.hops) + 1, d = c.hidden_dim;
  if (hops.size() < k1) throw Error(Errc::DimMismatch, "branch needs " + std::to_string(k1) + " hop matrices");
  const std::size_t n = hops.front().rows();
  const double sigma_slope = slope_of(params, l.sigma_slope[branch]);
  const double xi_slope = slope_of(params, l.xi_slope[branch]);
  const bool drop = dropout_active(c, mode);

  BranchTrace t;
  t.pre_out = Matrix(n, d);
  for (std::size_t k = 0; k < k1; ++k) {
    const Matrix& x = hops[k];
    if (x.rows() != n || x.cols() != c.feature_dim) throw Error(Errc::DimMismatch, "hop matrix shape mismatch");
    Matrix u(n, d);
    kernels::matmul(x.view(), params.view(l.hop_w[branch][k]), u.view());
    add_bias(u, params.span(l.hop_b[branch][k]));
    Matrix h(n, d);
    for (std::size_t i = 0; i < u.size(); ++i) h.storage()[i] = activate(u.storage()[i], c.activation, sigma_slope);
    if (drop) {
      Matrix mask = dropout_mask(n, d, c.dropout, require_rng(dropout_rng));
      for (std::size_t i = 0; i < h.size(); ++i) h.storage()[i] *= mask.storage()[i];
      t.mask.push_back(std::move(mask));
    }
    kernels::matmul(h.view(), params.view(comb_block(l.comb_w[branch], k, d)), t.pre_out.view(), true);
    t.pre.push_back(std::move(u));
    t.hidden.push_back(std::move(h));
  }
  add_bias(t.pre_out, params.span(l.comb_b[branch]));
  t.z = Matrix(n, d);
  for (std::size_t i = 0; i < t.z.size(); ++i) t.z.storage()[i] = activate(t.pre_out.storage()[i], c.activation, xi_slope);
  return t;
}

FusedEmbedding attention_fuse(const Matrix& z, const Matrix& zc, std::span<const double> a) {
  if (z.rows() != zc.rows() || z.cols() != zc.cols() || a.size() != z.cols()) {
    throw Error(Errc::DimMismatch, "attention inputs have mismatched shapes");
  }
  const std::size_t n = z.rows(), d = z.cols();
  FusedEmbedding out;
  out.z = Matrix(n, d);
  out.alpha_voronoi.resize(n);
  out.score_voronoi.resize(n);
  out.score_celltype.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0, sc = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      s += a[j] * z(i, j);
      sc += a[j] * zc(i, j);
    }
    out.score_voronoi[i] = s;
    out.score_celltype[i] = sc;
    const double alpha = 1.0 / (1.0 + std::exp(leaky_relu(sc) - leaky_relu(s)));
    out.alpha_voronoi[i] = alpha;
    for (std::size_t j = 0; j < d; ++j) out.z(i, j) = alpha * z(i, j) + (1.0 - alpha) * zc(i, j);
  }
  return out;
}

std::vector<double> pool(const Matrix& v, Pooling pooling) {
  if (v.rows() == 0) throw Error(Errc::EmptyGraph, "cannot pool an empty graph");
  std::vector<double> out(v.cols(), 0.0);
  if (pooling == Pooling::Max) {
    for (std::size_t j = 0; j < v.cols(); ++j) out[j] = v(0, j);
    for (std::size_t i = 1; i < v.rows(); ++i) {
      for (std::size_t j = 0; j < v.cols(); ++j) out[j] = std::max(out[j], v(i, j));
    }
    return out;
  }
  for (std::size_t i = 0; i < v.rows(); ++i) {
    for (std::size_t j = 0; j < v.cols(); ++j) out[j] += v(i, j);
  }
  if (pooling == Pooling::Mean) {
    for (double& x : out) x /= static_cast<double>(v.rows());
  }
  return out;
}

ForwardTrace full_forward(const ModelParams& params, const PrecomputedFeatures& pf, Mode mode, Rng* dropout_rng) {
  const ModelConfig& c = params.config();
  const ParamLayout& l = params.layout();
  check_dims(c, pf);
  const std::size_t n = pf.n(), d = c.hidden_dim;
  const bool drop = dropout_active(c, mode);

  ForwardTrace t;
  if (c.uses_voronoi()) t.voronoi = branch_forward(params, kVoronoi, pf.voronoi_hops, mode, dropout_rng);
  if (c.uses_celltype()) t.celltype = branch_forward(params, kCelltype, pf.celltype_hops, mode, dropout_rng);

  switch (c.fusion) {
    case Fusion::Attention: {
      FusedEmbedding f = attention_fuse(t.voronoi.z, t.celltype.z, params.span(l.attention));
      t.fused = std::move(f.z);
      t.alpha_voronoi = std::move(f.alpha_voronoi);
      t.score_voronoi = std::move(f.score_voronoi);
      t.score_celltype = std::move(f.score_celltype);
      break;
    }
    case Fusion::Sum:
      t.fused = t.voronoi.z;
      for (std::size_t i = 0; i < t.fused.size(); ++i) t.fused.storage()[i] += t.celltype.z.storage()[i];
      break;
    case Fusion::Concat: {
      t.fused = Matrix(n, d);
      const ConstMatrixView w = params.view(l.concat_w);
      kernels::matmul(t.voronoi.z.view(), ConstMatrixView{w.data, d, d}, t.fused.view());
      kernels::matmul(t.celltype.z.view(), ConstMatrixView{w.data + d * d, d, d}, t.fused.view(), true);
      add_bias(t.fused, params.span(l.concat_b));
      break;
    }
    case Fusion::VoronoiOnly: t.fused = t.voronoi.z; break;
    case Fusion::CelltypeOnly: t.fused = t.celltype.z; break;
  }

  for (std::size_t task = 0; task < c.tasks.size(); ++task) {
    const HeadLayout& hl = l.heads[task];
    HeadTrace h;
    h.pre1 = Matrix(n, d);
    kernels::matmul(t.fused.view(), params.view(hl.w1), h.pre1.view());
    add_bias(h.pre1, params.span(hl.b1));
    h.hidden1 = zeros_like(h.pre1);
    for (std::size_t i = 0; i < h.pre1.size(); ++i) h.hidden1.storage()[i] = std::max(h.pre1.storage()[i], 0.0);
    if (drop) {
      h.mask1 = dropout_mask(n, d, c.dropout, require_rng(dropout_rng));
      for (std::size_t i = 0; i < h.hidden1.size(); ++i) h.hidden1.storage()[i] *= h.mask1.storage()[i];
    }
    h.pre2 = Matrix(n, d);
    kernels::matmul(h.hidden1.view(), params.view(hl.w2), h.pre2.view());
    add_bias(h.pre2, params.span(hl.b2));
    h.hidden2 = zeros_like(h.pre2);
    for (std::size_t i = 0; i < h.pre2.size(); ++i) h.hidden2.storage()[i] = std::max(h.pre2.storage()[i], 0.0);
    if (drop) {
      h.mask2 = dropout_mask(n, d, c.dropout, require_rng(dropout_rng));
      for (std::size_t i = 0; i < h.hidden2.size(); ++i) h.hidden2.storage()[i] *= h.mask2.storage()[i];
    }
    h.out = Matrix(n, c.task_outputs(task));
    kernels::matmul(h.hidden2.view(), params.view(hl.w3), h.out.view());
    add_bias(h.out, params.span(hl.b3));
    h.pooled = pool(h.out, c.pooling);
    if (c.pooling == Pooling::Max) {
      h.argmax.assign(h.out.cols(), 0);
      for (std::size_t j = 0; j < h.out.cols(); ++j) {
        for (std::size_t i = 1; i < n; ++i) {
          if (h.out(i, j) > h.out(h.argmax[j], j)) h.argmax[j] = i;
        }
      }
    }
    t.heads.push_back(std::move(h));
  }
  return t;
}

namespace {

struct GradWriter {
  std::span<double> g;
  MatrixView view(const Slot& s) const { return {g.data() + s.offset, s.rows, s.cols}; }
  std::span<double> span(const Slot& s) const { return g.subspan(s.offset, s.size()); }
};

void branch_backward(const ModelParams& params, int branch, std::span<const Matrix> hops, const BranchTrace& t,
                     const Matrix& dz, const GradWriter& g) {
  const ModelConfig& c = params.config();
  const ParamLayout& l = params.layout();
  const std::size_t k1 = static_cast<std::size_t>(c.hops) + 1, d = c.hidden_dim;
  const bool prelu = c.activation == Activation::Prelu;
  const double sigma_slope = slope_of(params, l.sigma_slope[branch]);
  const double xi_slope = slope_of(params, l.xi_slope[branch]);

  Matrix dv = zeros_like(dz);
  double d_xi = 0.0;
  for (std::size_t i = 0; i < dz.size(); ++i) {
    const double u = t.pre_out.storage()[i];
    dv.storage()[i] = dz.storage()[i] * activate_grad(u, c.activation, xi_slope);
    if (prelu && u <= 0.0) d_xi += dz.storage()[i] * u;
  }
  if (prelu) g.g[l.xi_slope[branch].offset] += d_xi;
  kernels::column_sums_acc(dv.view(), g.span(l.comb_b[branch]));

  double d_sigma = 0.0;
  for (std::size_t k = 0; k < k1; ++k) {
    const Slot wz = comb_block(l.comb_w[branch], k, d);
    kernels::matmul_tn_acc(t.hidden[k].view(), dv.view(), g.view(wz));
    Matrix du(dv.rows(), d);
    kernels::matmul_nt(dv.view(), params.view(wz), du.view());
    const bool masked = !t.mask.empty();
    for (std::size_t i = 0; i < du.size(); ++i) {
      double dh = du.storage()[i];
      if (masked) dh *= t.mask[k].storage()[i];
      const double u = t.pre[k].storage()[i];
      if (prelu && u <= 0.0) d_sigma += dh * u;
      du.storage()[i] = dh * activate_grad(u, c.activation, sigma_slope);
    }
    kernels::matmul_tn_acc(hops[k].view(), du.view(), g.view(l.hop_w[branch][k]));
    kernels::column_sums_acc(du.view(), g.span(l.hop_b[branch][k]));
  }
  if (prelu) g.g[l.sigma_slope[branch].offset] += d_sigma;
}

}  // namespace

void backward(const ModelParams& params, const PrecomputedFeatures& pf, const ForwardTrace& t,
              std::span<const std::vector<double>> pooled_grads, std::span<double> grads) {
  const ModelConfig& c = params.config();
  const ParamLayout& l = params.layout();
  if (grads.size() != params.size()) throw Error(Errc::DimMismatch, "gradient buffer size mismatch");
  if (pooled_grads.size() != c.tasks.size()) throw Error(Errc::DimMismatch, "one pooled gradient per task expected");
  const std::size_t n = pf.n(), d = c.hidden_dim;
  const GradWriter g{grads};

  Matrix dfused(n, d);
  bool any = false;
  for (std::size_t task = 0; task < c.tasks.size(); ++task) {
    const std::vector<double>& gp = pooled_grads[task];
    if (gp.empty()) continue;
    const HeadTrace& h = t.heads[task];
    const HeadLayout& hl = l.heads[task];
    const std::size_t out_dim = c.task_outputs(task);
    if (gp.size() != out_dim) throw Error(Errc::DimMismatch, "pooled gradient has wrong size");
    any = true;

    Matrix dout(n, out_dim);
    switch (c.pooling) {
      case Pooling::Mean:
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < out_dim; ++j) dout(i, j) = gp[j] / static_cast<double>(n);
        break;
      case Pooling::Sum:
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < out_dim; ++j) dout(i, j) = gp[j];
        break;
      case Pooling::Max:
        for (std::size_t j = 0; j < out_dim; ++j) dout(h.argmax[j], j) = gp[j];
        break;
    }
    kernels::matmul_tn_acc(h.hidden2.view(), dout.view(), g.view(hl.w3));
    kernels::column_sums_acc(dout.view(), g.span(hl.b3));

    Matrix dpre2(n, d);
    kernels::matmul_nt(dout.view(), params.view(hl.w3), dpre2.view());
    for (std::size_t i = 0; i < dpre2.size(); ++i) {
      double v = dpre2.storage()[i];
      if (!h.mask2.empty()) v *= h.mask2.storage()[i];
      dpre2.storage()[i] = h.pre2.storage()[i] > 0.0 ? v : 0.0;
    }
    kernels::matmul_tn_acc(h.hidden1.view(), dpre2.view(), g.view(hl.w2));
    kernels::column_sums_acc(dpre2.view(), g.span(hl.b2));

    Matrix dpre1(n, d);
    kernels::matmul_nt(dpre2.view(), params.view(hl.w2), dpre1.view());
    for (std::size_t i = 0; i < dpre1.size(); ++i) {
      double v = dpre1.storage()[i];
      if (!h.mask1.empty()) v *= h.mask1.storage()[i];
      dpre1.storage()[i] = h.pre1.storage()[i] > 0.0 ? v : 0.0;
    }
    kernels::matmul_tn_acc(t.fused.view(), dpre1.view(), g.view(hl.w1));
    kernels::column_sums_acc(dpre1.view(), g.span(hl.b1));
    kernels::matmul_nt(dpre1.view(), params.view(hl.w1), dfused.view(), true);
  }
  if (!any) return;

  Matrix dz, dzc;
  switch (c.fusion) {
    case Fusion::Attention: {
      const Matrix& z = t.voronoi.z;
      const Matrix& zc = t.celltype.z;
      const std::span<const double> a = params.span(l.attention);
      std::span<double> da = g.span(l.attention);
      dz = Matrix(n, d);
      dzc = Matrix(n, d);
      for (std::size_t i = 0; i < n; ++i) {
        const double alpha = t.alpha_voronoi[i];
        double dalpha = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          const double gf = dfused(i, j);
          dz(i, j) = alpha * gf;
          dzc(i, j) = (1.0 - alpha) * gf;
          dalpha += gf * (z(i, j) - zc(i, j));
        }
        // alpha = sigmoid(lrelu(s) - lrelu(s'))
        const double dgap = dalpha * alpha * (1.0 - alpha);
        const double ds = dgap * (t.score_voronoi[i] > 0.0 ? 1.0 : kAttentionSlope);
        const double dsc = -dgap * (t.score_celltype[i] > 0.0 ? 1.0 : kAttentionSlope);
        for (std::size_t j = 0; j < d; ++j) {
          da[j] += ds * z(i, j) + dsc * zc(i, j);
          dz(i, j) += ds * a[j];
          dzc(i, j) += dsc * a[j];
        }
      }
      break;
    }
    case Fusion::Sum:
      dz = dfused;
      dzc = dfused;
      break;
    case Fusion::Concat: {
      const ConstMatrixView w = params.view(l.concat_w);
      const MatrixView gw = g.view(l.concat_w);
      kernels::matmul_tn_acc(t.voronoi.z.view(), dfused.view(), MatrixView{gw.data, d, d});
      kernels::matmul_tn_acc(t.celltype.z.view(), dfused.view(), MatrixView{gw.data + d * d, d, d});
      kernels::column_sums_acc(dfused.view(), g.span(l.concat_b));
      dz = Matrix(n, d);
      dzc = Matrix(n, d);
      kernels::matmul_nt(dfused.view(), ConstMatrixView{w.data, d, d}, dz.view());
      kernels::matmul_nt(dfused.view(), ConstMatrixView{w.data + d * d, d, d}, dzc.view());
      break;
    }
    case Fusion::VoronoiOnly: dz = dfused; break;
    case Fusion::CelltypeOnly: dzc = dfused; break;
  }
  if (c.uses_voronoi()) branch_backward(params, kVoronoi, pf.voronoi_hops, t.voronoi, dz, g);
  if (c.uses_celltype()) branch_backward(params, kCelltype, pf.celltype_hops, t.celltype, dzc, g);
}

double task_score(const ModelConfig& config, std::size_t task, std::span<const double> pooled) {
  if (config.tasks.at(task).kind == TaskKind::Hazard) return pooled[0];
  // softmax probability of class 1
  return 1.0 / (1.0 + std::exp(pooled[0] - pooled[1]));
}

}  // namespace mew
