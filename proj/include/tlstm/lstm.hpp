#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "tlstm/synth.hpp"
#include "tlstm/tensor.hpp"

namespace tlstm {

enum class Gate : int { Input = 0, Forget = 1, Output = 2, Cell = 3 };

/// One LSTM layer. The four gates are stacked row-wise in the order
/// input, forget, output, cell candidate: rows [g*H, (g+1)*H) belong to gate g.
struct LstmLayer {
  Matrix w;  // 4H x D input weights
  Matrix u;  // 4H x H recurrent weights
  Vector b;  // 4H

  LstmLayer() = default;
  LstmLayer(std::size_t input_dim, std::size_t hidden)
      : w(Matrix::Zero(4 * static_cast<Eigen::Index>(hidden), static_cast<Eigen::Index>(input_dim))),
        u(Matrix::Zero(4 * static_cast<Eigen::Index>(hidden), static_cast<Eigen::Index>(hidden))),
        b(Vector::Zero(4 * static_cast<Eigen::Index>(hidden))) {}

  std::size_t hidden() const noexcept { return static_cast<std::size_t>(u.cols()); }
  std::size_t input_dim() const noexcept { return static_cast<std::size_t>(w.cols()); }

  auto w_gate(Gate g) { return w.middleRows(static_cast<int>(g) * u.cols(), u.cols()); }
  auto u_gate(Gate g) { return u.middleRows(static_cast<int>(g) * u.cols(), u.cols()); }
  auto b_gate(Gate g) { return b.segment(static_cast<int>(g) * u.cols(), u.cols()); }
  auto w_gate(Gate g) const { return w.middleRows(static_cast<int>(g) * u.cols(), u.cols()); }
  auto u_gate(Gate g) const { return u.middleRows(static_cast<int>(g) * u.cols(), u.cols()); }
  auto b_gate(Gate g) const { return b.segment(static_cast<int>(g) * u.cols(), u.cols()); }
};

/// Trainable parameters of the two stacked layers plus the linear head.
/// Gradients use the same type.
struct LstmParams {
  std::array<LstmLayer, 2> layers;
  Eigen::RowVectorXd w_fc;  // 1 x H
  double b_fc = 0.0;

  /// Visits every parameter block as a flat Map in the fixed declared order:
  /// layer0.{w,u,b}, layer1.{w,u,b}, w_fc, b_fc. Matrices are column-major.
  template <typename Fn>
  void for_each_block(Fn&& fn) {
    for (auto& l : layers) {
      fn(Eigen::Map<Vector>(l.w.data(), l.w.size()));
      fn(Eigen::Map<Vector>(l.u.data(), l.u.size()));
      fn(Eigen::Map<Vector>(l.b.data(), l.b.size()));
    }
    fn(Eigen::Map<Vector>(w_fc.data(), w_fc.size()));
    fn(Eigen::Map<Vector>(&b_fc, 1));
  }
  template <typename Fn>
  void for_each_block(Fn&& fn) const {
    for (const auto& l : layers) {
      fn(Eigen::Map<const Vector>(l.w.data(), l.w.size()));
      fn(Eigen::Map<const Vector>(l.u.data(), l.u.size()));
      fn(Eigen::Map<const Vector>(l.b.data(), l.b.size()));
    }
    fn(Eigen::Map<const Vector>(w_fc.data(), w_fc.size()));
    fn(Eigen::Map<const Vector>(&b_fc, 1));
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each_block([&](const auto& m) { n += static_cast<std::size_t>(m.size()); });
    return n;
  }

  /// Same shapes, all zeros.
  LstmParams zeros_like() const {
    LstmParams z;
    for (std::size_t i = 0; i < layers.size(); ++i) z.layers[i] = LstmLayer(layers[i].input_dim(), layers[i].hidden());
    z.w_fc = Eigen::RowVectorXd::Zero(w_fc.size());
    return z;
  }

  friend bool operator==(const LstmParams& a, const LstmParams& b) {
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
      const auto& x = a.layers[i];
      const auto& y = b.layers[i];
      if (x.w.rows() != y.w.rows() || x.w.cols() != y.w.cols() || x.u.cols() != y.u.cols()) return false;
      if (x.w != y.w || x.u != y.u || x.b != y.b) return false;
    }
    return a.w_fc.size() == b.w_fc.size() && a.w_fc == b.w_fc && a.b_fc == b.b_fc;
  }
};

struct LstmModel {
  LstmParams params;
  double dropout_p = 0.2;

  std::size_t input_dim() const noexcept { return params.layers[0].input_dim(); }
  std::size_t hidden() const noexcept { return params.layers[0].hidden(); }

  friend bool operator==(const LstmModel&, const LstmModel&) = default;
};

inline constexpr std::size_t kDefaultHidden = 64;
inline constexpr double kDefaultDropout = 0.2;

/// Uniform(-1/sqrt(H), 1/sqrt(H)) for every weight including the head;
/// forget-gate biases 1, other biases and b_fc 0.
inline LstmModel init_params(std::uint64_t seed, std::size_t input_dim, std::size_t hidden = kDefaultHidden,
                             double dropout_p = kDefaultDropout) {
  if (input_dim == 0 || hidden == 0) throw Error(Errc::InvalidArgument, "input_dim and hidden must be positive");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw Error(Errc::InvalidArgument, "dropout_p must be in [0, 1)");
  LstmModel m;
  m.dropout_p = dropout_p;
  m.params.layers[0] = LstmLayer(input_dim, hidden);
  m.params.layers[1] = LstmLayer(hidden, hidden);
  m.params.w_fc = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(hidden));

  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  auto fill = [&](auto& mat) {
    for (Eigen::Index j = 0; j < mat.cols(); ++j)
      for (Eigen::Index i = 0; i < mat.rows(); ++i) mat(i, j) = rng.uniform(-bound, bound);
  };
  for (auto& l : m.params.layers) {
    fill(l.w);
    fill(l.u);
    l.b.setZero();
    l.b_gate(Gate::Forget).setOnes();
  }
  fill(m.params.w_fc);
  m.params.b_fc = 0.0;
  return m;
}

namespace detail {

template <typename Derived>
Matrix sigmoid(const Eigen::MatrixBase<Derived>& z) {
  return (1.0 / (1.0 + (-z.array()).exp())).matrix();
}

// tanh through the vectorized exp: 1 - 2 / (1 + exp(2z)). Saturates to +-1
// without overflow trouble; absolute error stays at the 1e-16 level.
template <typename Derived>
Matrix tanh(const Eigen::MatrixBase<Derived>& z) {
  return (1.0 - 2.0 / (1.0 + (2.0 * z.array()).exp())).matrix();
}

}  // namespace detail

/// Activations of one cell step for a batch (columns are samples).
struct CellCache {
  Matrix i, f, o, g;  // gates and candidate, H x B
  Matrix c;           // new cell state
  Matrix tanh_c;
  Matrix h;           // new hidden state
};

/// Gate activations from stacked pre-activations z (4H x B).
inline CellCache cell_from_preactivation(const Matrix& z, const Matrix& c_prev) {
  const Eigen::Index h = z.rows() / 4;
  CellCache out;
  out.i = detail::sigmoid(z.middleRows(0, h));
  out.f = detail::sigmoid(z.middleRows(h, h));
  out.o = detail::sigmoid(z.middleRows(2 * h, h));
  out.g = detail::tanh(z.middleRows(3 * h, h));
  out.c = (out.f.array() * c_prev.array() + out.i.array() * out.g.array()).matrix();
  out.tanh_c = detail::tanh(out.c);
  out.h = (out.o.array() * out.tanh_c.array()).matrix();
  return out;
}

/// One step of the LSTM recurrence for a batch of column vectors.
inline CellCache cell_forward_batch(const Matrix& x, const Matrix& h_prev, const Matrix& c_prev,
                                    const LstmLayer& p) {
  Matrix z = p.w * x;
  z.noalias() += p.u * h_prev;
  z.colwise() += p.b;
  return cell_from_preactivation(z, c_prev);
}

struct CellStep {
  Vector h, c;
  CellCache cache;
};

/// Single-sample cell step: i, f, o = sigmoid(W x + U h + b), candidate =
/// tanh(...), c = f*c_prev + i*candidate, h = o*tanh(c).
inline CellStep cell_forward(const Vector& x, const Vector& h_prev, const Vector& c_prev, const LstmLayer& p) {
  if (static_cast<std::size_t>(x.size()) != p.input_dim() ||
      static_cast<std::size_t>(h_prev.size()) != p.hidden() ||
      static_cast<std::size_t>(c_prev.size()) != p.hidden())
    throw Error(Errc::DimMismatch, "cell_forward shape mismatch");
  CellCache cc = cell_forward_batch(x, h_prev, c_prev, p);
  Vector hv = cc.h.col(0);
  Vector cv = cc.c.col(0);
  return {std::move(hv), std::move(cv), std::move(cc)};
}

enum class Mode { Train, Eval };

/// Inverted-dropout masks for the layer-1 output sequence: masks[t] is H x B
/// with entries 0 or 1/(1-p). Element (h, b) at step t uses uniform draw
/// number ((t*B + b)*H + h) of Rng(seed).
inline std::vector<Matrix> make_dropout_masks(std::size_t batch, std::size_t steps, std::size_t hidden, double p,
                                              std::uint64_t seed) {
  std::vector<Matrix> masks(steps, Matrix(static_cast<Eigen::Index>(hidden), static_cast<Eigen::Index>(batch)));
  Rng rng(seed);
  const double keep_scale = 1.0 / (1.0 - p);
  for (auto& m : masks)
    for (Eigen::Index b = 0; b < m.cols(); ++b)
      for (Eigen::Index h = 0; h < m.rows(); ++h) m(h, b) = rng.uniform() < p ? 0.0 : keep_scale;
  return masks;
}

/// Everything backward() needs from one forward call. Sequences are stored
/// time-major as one matrix: column t*B + b holds sample b at step t.
struct ForwardTape {
  std::size_t batch = 0, steps = 0, input_dim = 0, hidden = 0;
  Matrix inputs;                              // D x (T*B)
  std::array<std::vector<CellCache>, 2> layers;
  std::vector<Matrix> masks;                  // empty when no dropout was applied
  Matrix layer2_inputs;                       // H x (T*B), masked layer-1 outputs
};

struct ForwardResult {
  Vector predictions;
  ForwardTape tape;
};

namespace detail {

inline ForwardResult forward_impl(const Tensor3& batch, const LstmModel& m, std::vector<Matrix> masks) {
  if (batch.features() != m.input_dim())
    throw Error(Errc::DimMismatch, "batch feature width " + std::to_string(batch.features()) +
                                       " does not match model input width " + std::to_string(m.input_dim()));
  const std::size_t bsz = batch.samples();
  const std::size_t steps = batch.window();
  const std::size_t hid = m.hidden();
  const auto B = static_cast<Eigen::Index>(bsz);
  const auto H = static_cast<Eigen::Index>(hid);
  const auto D = static_cast<Eigen::Index>(batch.features());

  ForwardTape tape;
  tape.batch = bsz;
  tape.steps = steps;
  tape.input_dim = batch.features();
  tape.hidden = hid;
  tape.masks = std::move(masks);
  tape.inputs.resize(D, B * static_cast<Eigen::Index>(steps));
  for (std::size_t t = 0; t < steps; ++t)
    for (Eigen::Index b = 0; b < B; ++b)
      tape.inputs.col(static_cast<Eigen::Index>(t) * B + b) =
          Eigen::Map<const Vector>(batch.data().data() + batch.offset(static_cast<std::size_t>(b), t, 0), D);

  const Matrix zero = Matrix::Zero(H, B);
  auto run_layer = [&](const LstmLayer& p, const Matrix& in, std::vector<CellCache>& out) {
    Matrix zx = p.w * in;
    zx.colwise() += p.b;
    out.reserve(steps);
    for (std::size_t t = 0; t < steps; ++t) {
      const Matrix& h_prev = t > 0 ? out.back().h : zero;
      const Matrix& c_prev = t > 0 ? out.back().c : zero;
      Matrix z = zx.middleCols(static_cast<Eigen::Index>(t) * B, B);
      if (t > 0) z.noalias() += p.u * h_prev;
      out.push_back(cell_from_preactivation(z, c_prev));
    }
  };

  run_layer(m.params.layers[0], tape.inputs, tape.layers[0]);
  tape.layer2_inputs.resize(H, B * static_cast<Eigen::Index>(steps));
  for (std::size_t t = 0; t < steps; ++t) {
    auto dst = tape.layer2_inputs.middleCols(static_cast<Eigen::Index>(t) * B, B);
    if (tape.masks.empty())
      dst = tape.layers[0][t].h;
    else
      dst = (tape.layers[0][t].h.array() * tape.masks[t].array()).matrix();
  }
  run_layer(m.params.layers[1], tape.layer2_inputs, tape.layers[1]);
  const Matrix* h_prev = &tape.layers[1].back().h;
  Vector pred = (m.params.w_fc * *h_prev).transpose();
  pred.array() += m.params.b_fc;
  return {std::move(pred), std::move(tape)};
}

}  // namespace detail

/// Two-layer forward pass and linear head on the last top-layer hidden
/// state. Train mode applies inverted dropout to layer-1 outputs with masks
/// drawn from `seed`; eval mode applies none.
inline ForwardResult forward(const Tensor3& batch, const LstmModel& m, Mode mode, std::uint64_t seed = 0) {
  std::vector<Matrix> masks;
  if (mode == Mode::Train && m.dropout_p > 0.0)
    masks = make_dropout_masks(batch.samples(), batch.window(), m.hidden(), m.dropout_p, seed);
  return detail::forward_impl(batch, m, std::move(masks));
}

/// Train-mode forward with caller-supplied (frozen) dropout masks.
inline ForwardResult forward_with_masks(const Tensor3& batch, const LstmModel& m, std::vector<Matrix> masks) {
  if (masks.size() != batch.window()) throw Error(Errc::DimMismatch, "one dropout mask per timestep required");
  for (const auto& mk : masks)
    if (static_cast<std::size_t>(mk.rows()) != m.hidden() || static_cast<std::size_t>(mk.cols()) != batch.samples())
      throw Error(Errc::DimMismatch, "dropout mask shape mismatch");
  return detail::forward_impl(batch, m, std::move(masks));
}

namespace detail {

/// BPTT through one layer. `dh_out` (H x T*B) is the loss gradient arriving
/// at the layer's hidden outputs. Accumulates into `grad` and, when asked,
/// returns the gradient with respect to the layer inputs (D x T*B).
inline Matrix layer_backward(const LstmLayer& p, const Matrix& inputs, const std::vector<CellCache>& cache,
                             const Matrix& dh_out, LstmLayer& grad, bool need_input_grads) {
  const std::size_t steps = cache.size();
  const Eigen::Index H = p.u.cols();
  const Eigen::Index B = cache.front().h.cols();
  const auto T = static_cast<Eigen::Index>(steps);
  Matrix dh_next = Matrix::Zero(H, B);
  Matrix dc_next = Matrix::Zero(H, B);
  Matrix dz_all(4 * H, T * B);
  const Matrix zero = Matrix::Zero(H, B);

  for (std::size_t s = steps; s-- > 0;) {
    const CellCache& cc = cache[s];
    const Matrix& c_prev = s > 0 ? cache[s - 1].c : zero;
    auto dz = dz_all.middleCols(static_cast<Eigen::Index>(s) * B, B);

    const Eigen::ArrayXXd dh = dh_next.array() + dh_out.middleCols(static_cast<Eigen::Index>(s) * B, B).array();
    const auto tc = cc.tanh_c.array();
    const Eigen::ArrayXXd dc = dc_next.array() + dh * cc.o.array() * (1.0 - tc.square());

    dz.middleRows(0, H) = (dc * cc.g.array() * cc.i.array() * (1.0 - cc.i.array())).matrix();
    dz.middleRows(H, H) = (dc * c_prev.array() * cc.f.array() * (1.0 - cc.f.array())).matrix();
    dz.middleRows(2 * H, H) = (dh * tc * cc.o.array() * (1.0 - cc.o.array())).matrix();
    dz.middleRows(3 * H, H) = (dc * cc.i.array() * (1.0 - cc.g.array().square())).matrix();

    if (s > 0) dh_next.noalias() = p.u.transpose() * dz;
    dc_next = (dc * cc.f.array()).matrix();
  }

  grad.w.noalias() += dz_all * inputs.transpose();
  grad.b += dz_all.rowwise().sum();
  if (steps > 1) {
    Matrix h_prev(H, (T - 1) * B);
    for (std::size_t s = 0; s + 1 < steps; ++s) h_prev.middleCols(static_cast<Eigen::Index>(s) * B, B) = cache[s].h;
    grad.u.noalias() += dz_all.rightCols((T - 1) * B) * h_prev.transpose();
  }
  if (!need_input_grads) return {};
  Matrix dx = p.w.transpose() * dz_all;
  return dx;
}

}  // namespace detail

/// Exact reverse-mode gradient of sum_b loss_grad[b] * prediction[b] with
/// respect to every parameter, for the computation recorded on `tape`.
inline LstmParams backward(const ForwardTape& tape, const LstmModel& m, const Vector& loss_grad) {
  if (tape.input_dim != m.input_dim() || tape.hidden != m.hidden() || tape.steps == 0 ||
      tape.layers[0].size() != tape.steps || tape.layers[1].size() != tape.steps)
    throw Error(Errc::TapeMismatch, "tape does not match the model");
  if (static_cast<std::size_t>(loss_grad.size()) != tape.batch)
    throw Error(Errc::TapeMismatch, "loss gradient length does not match the tape batch");

  LstmParams g = m.params.zeros_like();
  const Matrix& h_last = tape.layers[1].back().h;
  g.w_fc = (h_last * loss_grad).transpose();
  g.b_fc = loss_grad.sum();

  const auto B = static_cast<Eigen::Index>(tape.batch);
  Matrix dh2 = Matrix::Zero(m.params.w_fc.size(), B * static_cast<Eigen::Index>(tape.steps));
  dh2.rightCols(B) = m.params.w_fc.transpose() * loss_grad.transpose();
  Matrix dx2 = detail::layer_backward(m.params.layers[1], tape.layer2_inputs, tape.layers[1], dh2, g.layers[1], true);
  if (!tape.masks.empty())
    for (std::size_t t = 0; t < tape.steps; ++t)
      dx2.middleCols(static_cast<Eigen::Index>(t) * B, B).array() *= tape.masks[t].array();
  detail::layer_backward(m.params.layers[0], tape.inputs, tape.layers[0], dx2, g.layers[0], false);
  return g;
}

}  // namespace tlstm
