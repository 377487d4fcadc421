#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "crosscast/dataset.hpp"
#include "crosscast/linalg.hpp"
#include "crosscast/random.hpp"

namespace crosscast {

inline constexpr std::size_t kDense1 = 15;
inline constexpr std::size_t kDense2 = 31;
inline constexpr std::size_t kOutputs = kHorizon + 1;

struct TrainConfig {
  std::size_t window_length = 30;  ///< days of context per sample
  std::size_t hidden_size = 7;
  std::size_t epochs = 2000;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
  double gradient_clip = 5.0;  ///< max global L2 norm of the gradient
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  void validate() const {
    if (window_length < 1 || hidden_size < 1 || batch_size < 1)
      throw std::invalid_argument("window_length, hidden_size and batch_size must be >= 1");
    if (learning_rate <= 0.0) throw std::invalid_argument("learning_rate must be > 0");
    if (gradient_clip <= 0.0) throw std::invalid_argument("gradient_clip must be > 0");
  }
};

/// All trainable state: the four gate weight/bias pairs acting on the
/// concatenation [h_{t-1}, x_t], plus the dense stack hidden→15→31→outputs.
struct LstmParams {
  std::size_t input_size = 0;
  std::size_t hidden_size = 0;
  std::size_t output_size = 0;
  std::size_t window_length = 0;           ///< context length the net was built for
  std::vector<std::string> feature_names;  ///< set at training time

  Matrix w_f, w_i, w_c, w_o;  // hidden × (hidden + input)
  Vec b_f, b_i, b_c, b_o;     // hidden

  Matrix w1, w2, w3;  // 15×hidden, 31×15, outputs×31
  Vec b1, b2, b3;

  bool operator==(const LstmParams&) const = default;

  /// Every parameter tensor as a flat span, in a fixed order. Optimizer
  /// state, clipping and gradient checks all walk this view.
  std::vector<std::span<double>> tensors() {
    return {w_f.data(), b_f, w_i.data(), b_i, w_c.data(), b_c, w_o.data(), b_o,
            w1.data(),  b1,  w2.data(),  b2,  w3.data(),  b3};
  }
  std::vector<std::span<const double>> tensors() const {
    return {w_f.data(), b_f, w_i.data(), b_i, w_c.data(), b_c, w_o.data(), b_o,
            w1.data(),  b1,  w2.data(),  b2,  w3.data(),  b3};
  }
};

inline LstmParams zeros_like(const LstmParams& p) {
  LstmParams z = p;
  for (auto span : z.tensors())
    for (double& v : span) v = 0.0;
  return z;
}

/// Deterministic initialization: gate weights uniform ±1/√(hidden+input),
/// forget-gate bias 1 so the conveyor state survives early training, dense
/// weights He-scaled for the ReLU stack.
inline LstmParams init_params(std::uint64_t seed, std::size_t input_size, const TrainConfig& cfg,
                              std::size_t output_size = kOutputs) {
  if (input_size < 1 || output_size < 1) throw std::invalid_argument("sizes must be >= 1");
  cfg.validate();
  const std::size_t hidden = cfg.hidden_size;
  const std::size_t concat = hidden + input_size;

  LstmParams p;
  p.input_size = input_size;
  p.hidden_size = hidden;
  p.output_size = output_size;
  p.window_length = cfg.window_length;

  Rng rng(seed);
  const double gate_bound = 1.0 / std::sqrt(static_cast<double>(concat));
  auto gate_matrix = [&] {
    Matrix m(hidden, concat);
    for (double& v : m.data()) v = rng.uniform(-gate_bound, gate_bound);
    return m;
  };
  p.w_f = gate_matrix();
  p.w_i = gate_matrix();
  p.w_c = gate_matrix();
  p.w_o = gate_matrix();
  p.b_f.assign(hidden, 1.0);
  p.b_i.assign(hidden, 0.0);
  p.b_c.assign(hidden, 0.0);
  p.b_o.assign(hidden, 0.0);

  auto dense = [&](std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    const double he = std::sqrt(2.0 / static_cast<double>(cols));
    for (double& v : m.data()) v = rng.normal() * he;
    return m;
  };
  // Small positive biases keep the ReLU stack alive at the start; the
  // output bias sits inside the (0, 1] scaled-price range, since an output
  // unit that starts negative over the whole data never recovers.
  p.w1 = dense(kDense1, hidden);
  p.b1.assign(kDense1, 0.1);
  p.w2 = dense(kDense2, kDense1);
  p.b2.assign(kDense2, 0.1);
  p.w3 = dense(output_size, kDense2);
  p.b3.assign(output_size, 0.5);
  return p;
}

struct CellState {
  Vec h;  ///< block output h_t, elementwise in [-1, 1]
  Vec c;  ///< conveyor state C_t

  static CellState zero(std::size_t hidden) { return {Vec(hidden, 0.0), Vec(hidden, 0.0)}; }
};

/// Activations cached by one cell step, enough to backpropagate through it.
struct CellTape {
  Vec z;       ///< [h_{t-1}, x_t]
  Vec c_prev;
  Vec f, i, g, o;  ///< gate outputs; g is the tanh candidate
  Vec c, tanh_c;
};

namespace detail {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline Vec affine(const Matrix& w, std::span<const double> x, const Vec& b) {
  Vec y = matvec(w, x);
  for (std::size_t j = 0; j < y.size(); ++j) y[j] += b[j];
  return y;
}

inline void relu_inplace(Vec& v) {
  for (double& x : v) x = x > 0.0 ? x : 0.0;
}

}  // namespace detail

/// One step of the gated recurrence:
///   f = σ(W_f·[h,x]+b_f), i = σ(W_i·[h,x]+b_i), g = tanh(W_c·[h,x]+b_c),
///   C_t = f∘C_{t-1} + i∘g, o = σ(W_o·[h,x]+b_o), h_t = o∘tanh(C_t).
inline std::pair<CellState, CellTape> cell_forward(const LstmParams& p,
                                                   std::span<const double> x_t,
                                                   const CellState& prev) {
  if (x_t.size() != p.input_size || prev.h.size() != p.hidden_size)
    throw std::invalid_argument("cell_forward: dimension mismatch");
  for (double v : x_t)
    if (!std::isfinite(v)) throw std::invalid_argument("cell_forward: non-finite input");

  CellTape tape;
  tape.z.reserve(p.hidden_size + p.input_size);
  tape.z.assign(prev.h.begin(), prev.h.end());
  tape.z.insert(tape.z.end(), x_t.begin(), x_t.end());
  tape.c_prev = prev.c;

  tape.f = detail::affine(p.w_f, tape.z, p.b_f);
  tape.i = detail::affine(p.w_i, tape.z, p.b_i);
  tape.g = detail::affine(p.w_c, tape.z, p.b_c);
  tape.o = detail::affine(p.w_o, tape.z, p.b_o);
  for (std::size_t j = 0; j < p.hidden_size; ++j) {
    tape.f[j] = detail::sigmoid(tape.f[j]);
    tape.i[j] = detail::sigmoid(tape.i[j]);
    tape.g[j] = std::tanh(tape.g[j]);
    tape.o[j] = detail::sigmoid(tape.o[j]);
  }

  CellState next;
  next.c.resize(p.hidden_size);
  next.h.resize(p.hidden_size);
  tape.tanh_c.resize(p.hidden_size);
  for (std::size_t j = 0; j < p.hidden_size; ++j) {
    next.c[j] = tape.f[j] * prev.c[j] + tape.i[j] * tape.g[j];
    tape.tanh_c[j] = std::tanh(next.c[j]);
    next.h[j] = tape.o[j] * tape.tanh_c[j];
  }
  tape.c = next.c;
  return {std::move(next), std::move(tape)};
}

/// Everything the backward pass needs from one sample's forward run.
struct ForwardTape {
  std::vector<CellTape> steps;
  Vec h_last;
  Vec a1, a2, out;  ///< post-ReLU dense activations
};

/// Runs the cell across the window from zero state, then the ReLU dense
/// stack. Output is elementwise >= 0.
inline std::pair<Vec, ForwardTape> forward(const LstmParams& p, const Matrix& window) {
  if (window.rows() < 1) throw std::invalid_argument("forward: empty window");
  if (window.cols() != p.input_size) throw std::invalid_argument("forward: input size mismatch");

  ForwardTape tape;
  tape.steps.reserve(window.rows());
  CellState state = CellState::zero(p.hidden_size);
  for (std::size_t t = 0; t < window.rows(); ++t) {
    auto [next, cell_tape] = cell_forward(p, window.row(t), state);
    tape.steps.push_back(std::move(cell_tape));
    state = std::move(next);
  }
  tape.h_last = state.h;

  tape.a1 = detail::affine(p.w1, tape.h_last, p.b1);
  detail::relu_inplace(tape.a1);
  tape.a2 = detail::affine(p.w2, tape.a1, p.b2);
  detail::relu_inplace(tape.a2);
  tape.out = detail::affine(p.w3, tape.a2, p.b3);
  detail::relu_inplace(tape.out);
  return {tape.out, std::move(tape)};
}

/// One supervised sample: a window of feature rows and its scaled targets.
struct Sample {
  Matrix window;  ///< window_length × input_size
  Vec target;     ///< output_size
};

namespace detail {

// Accumulates one sample's gradients into `grads` given dL/d(out).
inline void backward(const LstmParams& p, const ForwardTape& tape, std::span<const double> dout,
                     LstmParams& grads) {
  const std::size_t hidden = p.hidden_size;

  auto relu_masked = [](std::span<const double> dy, const Vec& post) {
    Vec d(dy.begin(), dy.end());
    for (std::size_t j = 0; j < d.size(); ++j)
      if (post[j] <= 0.0) d[j] = 0.0;
    return d;
  };

  Vec d3 = relu_masked(dout, tape.out);
  add_outer(grads.w3, d3, tape.a2);
  for (std::size_t j = 0; j < d3.size(); ++j) grads.b3[j] += d3[j];
  Vec da2(kDense2, 0.0);
  add_matvec_transposed(p.w3, d3, da2);

  Vec d2 = relu_masked(da2, tape.a2);
  add_outer(grads.w2, d2, tape.a1);
  for (std::size_t j = 0; j < d2.size(); ++j) grads.b2[j] += d2[j];
  Vec da1(kDense1, 0.0);
  add_matvec_transposed(p.w2, d2, da1);

  Vec d1 = relu_masked(da1, tape.a1);
  add_outer(grads.w1, d1, tape.h_last);
  for (std::size_t j = 0; j < d1.size(); ++j) grads.b1[j] += d1[j];
  Vec dh(hidden, 0.0);
  add_matvec_transposed(p.w1, d1, dh);

  // Backpropagation through time over the recurrence.
  Vec dc(hidden, 0.0);
  Vec af(hidden), ai(hidden), ag(hidden), ao(hidden);
  for (std::size_t t = tape.steps.size(); t-- > 0;) {
    const CellTape& s = tape.steps[t];
    for (std::size_t j = 0; j < hidden; ++j) {
      double do_ = dh[j] * s.tanh_c[j];
      dc[j] += dh[j] * s.o[j] * (1.0 - s.tanh_c[j] * s.tanh_c[j]);
      af[j] = dc[j] * s.c_prev[j] * s.f[j] * (1.0 - s.f[j]);
      ai[j] = dc[j] * s.g[j] * s.i[j] * (1.0 - s.i[j]);
      ag[j] = dc[j] * s.i[j] * (1.0 - s.g[j] * s.g[j]);
      ao[j] = do_ * s.o[j] * (1.0 - s.o[j]);
    }
    add_outer(grads.w_f, af, s.z);
    add_outer(grads.w_i, ai, s.z);
    add_outer(grads.w_c, ag, s.z);
    add_outer(grads.w_o, ao, s.z);
    for (std::size_t j = 0; j < hidden; ++j) {
      grads.b_f[j] += af[j];
      grads.b_i[j] += ai[j];
      grads.b_c[j] += ag[j];
      grads.b_o[j] += ao[j];
    }

    Vec dz(s.z.size(), 0.0);
    add_matvec_transposed(p.w_f, af, dz);
    add_matvec_transposed(p.w_i, ai, dz);
    add_matvec_transposed(p.w_c, ag, dz);
    add_matvec_transposed(p.w_o, ao, dz);
    for (std::size_t j = 0; j < hidden; ++j) {
      dh[j] = dz[j];
      dc[j] *= s.f[j];
    }
  }
}

}  // namespace detail

/// Mean squared error over every sample and horizon, with gradients from
/// full backpropagation through time. The gradient record has exactly the
/// shape of LstmParams.
inline std::pair<double, LstmParams> loss_and_gradients(const LstmParams& p,
                                                        std::span<const Sample> batch) {
  if (batch.empty()) throw std::invalid_argument("loss_and_gradients: empty batch");
  LstmParams grads = zeros_like(p);
  double sum_sq = 0.0;
  const double denom = static_cast<double>(batch.size() * p.output_size);
  for (const Sample& sample : batch) {
    if (sample.target.size() != p.output_size)
      throw std::invalid_argument("loss_and_gradients: target size mismatch");
    auto [out, tape] = forward(p, sample.window);
    Vec dout(p.output_size);
    for (std::size_t j = 0; j < p.output_size; ++j) {
      double resid = out[j] - sample.target[j];
      sum_sq += resid * resid;
      dout[j] = 2.0 * resid / denom;
    }
    detail::backward(p, tape, dout, grads);
  }
  double loss = sum_sq / denom;
  if (!std::isfinite(loss)) throw Error("non-finite loss: training diverged");
  return {loss, std::move(grads)};
}

struct TrainResult {
  LstmParams params;
  std::vector<double> history;  ///< mean training loss per epoch
};

namespace detail {

struct Adam {
  LstmParams m, v;
  std::size_t t = 0;

  explicit Adam(const LstmParams& shape) : m(zeros_like(shape)), v(zeros_like(shape)) {}

  void step(LstmParams& params, LstmParams& grads, const TrainConfig& cfg) {
    ++t;
    // Global-norm clipping before the moment update.
    double norm_sq = 0.0;
    for (auto span : grads.tensors())
      for (double g : span) norm_sq += g * g;
    double norm = std::sqrt(norm_sq);
    if (norm > cfg.gradient_clip) {
      double scale = cfg.gradient_clip / norm;
      for (auto span : grads.tensors())
        for (double& g : span) g *= scale;
    }

    const double corr1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(t));
    const double corr2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(t));
    auto ps = params.tensors();
    auto gs = grads.tensors();
    auto ms = m.tensors();
    auto vs = v.tensors();
    for (std::size_t k = 0; k < ps.size(); ++k) {
      for (std::size_t j = 0; j < ps[k].size(); ++j) {
        double g = gs[k][j];
        ms[k][j] = cfg.adam_beta1 * ms[k][j] + (1.0 - cfg.adam_beta1) * g;
        vs[k][j] = cfg.adam_beta2 * vs[k][j] + (1.0 - cfg.adam_beta2) * g * g;
        double mhat = ms[k][j] / corr1;
        double vhat = vs[k][j] / corr2;
        ps[k][j] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_epsilon);
      }
    }
  }
};

}  // namespace detail

/// Builds one sample per dataset row that has a full trailing window.
inline std::vector<Sample> build_samples(const Dataset& ds, std::size_t window_length) {
  if (ds.rows() < window_length)
    throw Error("dataset has " + std::to_string(ds.rows()) + " rows, need at least " +
                std::to_string(window_length) + " for one window");
  std::vector<Sample> samples;
  samples.reserve(ds.rows() - window_length + 1);
  for (std::size_t anchor = window_length - 1; anchor < ds.rows(); ++anchor) {
    Sample s;
    s.window = Matrix(window_length, ds.x.cols());
    for (std::size_t t = 0; t < window_length; ++t)
      for (std::size_t c = 0; c < ds.x.cols(); ++c)
        s.window(t, c) = ds.x(anchor - window_length + 1 + t, c);
    s.target.resize(ds.y.cols());
    for (std::size_t h = 0; h < ds.y.cols(); ++h) s.target[h] = ds.y(anchor, h);
    samples.push_back(std::move(s));
  }
  return samples;
}

/// Adam training over shuffled mini-batches; the shuffle schedule derives
/// from the seed, so identical (seed, data, config) reproduce identical
/// parameters and history.
inline TrainResult train(const Dataset& train_ds, const TrainConfig& cfg) {
  cfg.validate();
  auto samples = build_samples(train_ds, cfg.window_length);

  TrainResult result;
  result.params = init_params(cfg.seed, train_ds.x.cols(), cfg, train_ds.y.cols());
  result.params.feature_names = train_ds.feature_names;
  result.history.reserve(cfg.epochs);

  Rng shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  detail::Adam adam(result.params);
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<Sample> batch;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_sq = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, order.size() - start);
      batch.clear();
      for (std::size_t k = 0; k < count; ++k) batch.push_back(samples[order[start + k]]);
      double batch_loss;
      LstmParams grads;
      try {
        std::tie(batch_loss, grads) = loss_and_gradients(result.params, batch);
      } catch (const Error& e) {
        throw Error("epoch " + std::to_string(epoch) + ": " + e.what());
      }
      epoch_sq += batch_loss * static_cast<double>(count);
      adam.step(result.params, grads, cfg);
    }
    result.history.push_back(epoch_sq / static_cast<double>(samples.size()));
  }
  return result;
}

/// Per-anchor-date predictions in price units.
struct Forecast {
  std::vector<Date> dates;
  Matrix closes;  ///< rows align with dates; columns are horizons 0..N
};

/// Forward pass per window over a scaled dataset, targets unscaled back to
/// prices. Rows earlier than window_length-1 have no full window and are
/// skipped; dates align with the remaining rows.
inline Forecast predict(const LstmParams& p, const Dataset& ds, const Scaler& scaler) {
  if (ds.x.cols() != p.input_size) throw std::invalid_argument("predict: feature count mismatch");
  if (!p.feature_names.empty() && ds.feature_names != p.feature_names)
    throw Error("predict: dataset features differ from the model's training features");
  if (ds.rows() < p.window_length)
    throw Error("predict: dataset shorter than one window");

  Forecast fc;
  const std::size_t w = p.window_length;
  Matrix window(w, p.input_size);
  std::vector<Vec> rows;
  for (std::size_t anchor = w - 1; anchor < ds.rows(); ++anchor) {
    for (std::size_t t = 0; t < w; ++t)
      for (std::size_t c = 0; c < p.input_size; ++c)
        window(t, c) = ds.x(anchor - w + 1 + t, c);
    auto [out, tape] = forward(p, window);
    for (double& v : out) v = scaler.unscale_target(v);
    fc.dates.push_back(ds.dates[anchor]);
    rows.push_back(std::move(out));
  }
  fc.closes = Matrix(rows.size(), p.output_size);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < p.output_size; ++c) fc.closes(r, c) = rows[r][c];
  return fc;
}

namespace detail {

inline nlohmann::json matrix_to_json(const Matrix& m) {
  return {{"rows", m.rows()},
          {"cols", m.cols()},
          {"data", std::vector<double>(m.data().begin(), m.data().end())}};
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
  Matrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
  auto data = j.at("data").get<std::vector<double>>();
  if (data.size() != m.rows() * m.cols()) throw Error("lstm params: tensor shape mismatch");
  std::copy(data.begin(), data.end(), m.data().begin());
  return m;
}

}  // namespace detail

inline nlohmann::json to_json(const LstmParams& p) {
  return {{"schema_version", 1},
          {"kind", "lstm"},
          {"input_size", p.input_size},
          {"hidden_size", p.hidden_size},
          {"output_size", p.output_size},
          {"window_length", p.window_length},
          {"feature_names", p.feature_names},
          {"W_f", detail::matrix_to_json(p.w_f)},
          {"b_f", p.b_f},
          {"W_i", detail::matrix_to_json(p.w_i)},
          {"b_i", p.b_i},
          {"W_c", detail::matrix_to_json(p.w_c)},
          {"b_c", p.b_c},
          {"W_o", detail::matrix_to_json(p.w_o)},
          {"b_o", p.b_o},
          {"dense", nlohmann::json::array({
                        {{"W", detail::matrix_to_json(p.w1)}, {"b", p.b1}},
                        {{"W", detail::matrix_to_json(p.w2)}, {"b", p.b2}},
                        {{"W", detail::matrix_to_json(p.w3)}, {"b", p.b3}},
                    })}};
}

inline LstmParams lstm_params_from_json(const nlohmann::json& j) {
  if (j.value("schema_version", 0) != 1) throw Error("lstm params: schema-version mismatch");
  if (j.value("kind", "") != "lstm") throw Error("lstm params: wrong artifact kind");
  LstmParams p;
  p.input_size = j.at("input_size").get<std::size_t>();
  p.hidden_size = j.at("hidden_size").get<std::size_t>();
  p.output_size = j.at("output_size").get<std::size_t>();
  p.window_length = j.at("window_length").get<std::size_t>();
  p.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  p.w_f = detail::matrix_from_json(j.at("W_f"));
  p.b_f = j.at("b_f").get<Vec>();
  p.w_i = detail::matrix_from_json(j.at("W_i"));
  p.b_i = j.at("b_i").get<Vec>();
  p.w_c = detail::matrix_from_json(j.at("W_c"));
  p.b_c = j.at("b_c").get<Vec>();
  p.w_o = detail::matrix_from_json(j.at("W_o"));
  p.b_o = j.at("b_o").get<Vec>();
  const auto& dense = j.at("dense");
  if (dense.size() != 3) throw Error("lstm params: dense stack must have 3 layers");
  p.w1 = detail::matrix_from_json(dense[0].at("W"));
  p.b1 = dense[0].at("b").get<Vec>();
  p.w2 = detail::matrix_from_json(dense[1].at("W"));
  p.b2 = dense[1].at("b").get<Vec>();
  p.w3 = detail::matrix_from_json(dense[2].at("W"));
  p.b3 = dense[2].at("b").get<Vec>();
  return p;
}

/// Training history as CSV `epoch,loss`.
inline std::string history_csv(std::span<const double> history) {
  std::string out = "epoch,loss\n";
  for (std::size_t e = 0; e < history.size(); ++e) {
    out += std::to_string(e);
    out += ',';
    out += detail::format_double(history[e]);
    out += '\n';
  }
  return out;
}

}  // namespace crosscast
