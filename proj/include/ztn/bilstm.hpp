#pragma once

// Stacked bidirectional LSTM regressor with a two-layer dense head, trained
// by backpropagation through time on squared error.
//
// All parameters live in one flat vector so the optimizer, the gradient
// check and the checkpoint code treat them uniformly. Layout, per recurrent
// layer and per direction (forward, then reversed):
//   Wx [4H x in]  Wh [4H x H]  b [4H]      gate rows ordered i, f, g, o
// followed by the head:
//   W1 [D x 2H]  b1 [D]  W2 [D]  b2 [1]
//
// Each layer runs a forward pass over the window and a second pass over the
// reversed window; the two hidden states are concatenated per timestep. The
// head reads the last timestep of the top layer: ReLU(W1 z + b1) -> W2 . + b2.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ztn/adam.hpp"
#include "ztn/errors.hpp"
#include "ztn/random.hpp"
#include "ztn/windowing.hpp"

namespace ztn {

struct BiLstmArchitecture {
  std::size_t input_size = 1;
  std::size_t hidden = 50;  // units per direction
  std::size_t layers = 3;
  std::size_t dense_hidden = 32;
  std::size_t window = 9;
  double dropout = 0.2;  // between recurrent layers, training only

  void validate() const {
    if (input_size == 0 || hidden == 0 || layers == 0 || dense_hidden == 0 || window == 0)
      throw ConfigError("BiLSTM dimensions must all be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
  }

  std::size_t layer_input(std::size_t layer) const { return layer == 0 ? input_size : 2 * hidden; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < layers; ++l) n += 2 * (4 * hidden * (layer_input(l) + hidden) + 4 * hidden);
    return n + dense_hidden * 2 * hidden + dense_hidden + dense_hidden + 1;
  }

  friend bool operator==(const BiLstmArchitecture&, const BiLstmArchitecture&) = default;
};

class BiLstmModel {
 public:
  /// Offsets of one direction's weights inside the flat parameter vector.
  struct CellOffsets {
    std::size_t wx, wh, b, in;
  };
  struct HeadOffsets {
    std::size_t w1, b1, w2, b2;
  };

  explicit BiLstmModel(BiLstmArchitecture arch) : arch_(arch) {
    arch_.validate();
    std::size_t off = 0;
    for (std::size_t l = 0; l < arch_.layers; ++l) {
      const std::size_t in = arch_.layer_input(l);
      for (int d = 0; d < 2; ++d) {
        CellOffsets c{off, off + 4 * arch_.hidden * in, 0, in};
        c.b = c.wh + 4 * arch_.hidden * arch_.hidden;
        off = c.b + 4 * arch_.hidden;
        cells_.push_back(c);
      }
    }
    head_.w1 = off;
    head_.b1 = head_.w1 + arch_.dense_hidden * 2 * arch_.hidden;
    head_.w2 = head_.b1 + arch_.dense_hidden;
    head_.b2 = head_.w2 + arch_.dense_hidden;
    params_.assign(head_.b2 + 1, 0.0);
  }

  BiLstmModel(BiLstmArchitecture arch, std::uint64_t seed) : BiLstmModel(arch) { initialize(seed); }

  /// Uniform in +-1/sqrt(fan_in), where a gate's fan-in counts both the
  /// layer input and the recurrent state.
  void initialize(std::uint64_t seed) {
    Rng rng(seed);
    const std::size_t H = arch_.hidden;
    for (const auto& c : cells_) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(c.in + H));
      for (std::size_t i = c.wx; i < c.b + 4 * H; ++i) params_[i] = rng.uniform(-bound, bound);
    }
    const double b1 = 1.0 / std::sqrt(static_cast<double>(2 * H));
    for (std::size_t i = head_.w1; i < head_.w2; ++i) params_[i] = rng.uniform(-b1, b1);
    const double b2 = 1.0 / std::sqrt(static_cast<double>(arch_.dense_hidden));
    for (std::size_t i = head_.w2; i <= head_.b2; ++i) params_[i] = rng.uniform(-b2, b2);
  }

  const BiLstmArchitecture& architecture() const noexcept { return arch_; }
  std::span<double> parameters() noexcept { return params_; }
  std::span<const double> parameters() const noexcept { return params_; }
  std::size_t parameter_count() const noexcept { return params_.size(); }
  const CellOffsets& cell(std::size_t layer, int direction) const { return cells_.at(2 * layer + direction); }
  const HeadOffsets& head() const noexcept { return head_; }

  /// Inference: dropout never applies.
  double predict(std::span<const double> window) const {
    Workspace ws(arch_);
    return forward(window, ws, nullptr);
  }

  /// Per-layer outputs, T x 2H row-major, forward direction in columns
  /// [0, H) and reversed direction in [H, 2H).
  std::vector<std::vector<double>> layer_outputs(std::span<const double> window) const {
    Workspace ws(arch_);
    forward(window, ws, nullptr);
    return ws.outputs;
  }

  /// Adds scale * d(err^2)/d(params) to `grad` and returns err^2, where
  /// err = prediction - target. Dropout masks are drawn from `rng` when given
  /// and the rate is positive.
  double accumulate_gradient(std::span<const double> window, double target, std::span<double> grad, double scale,
                             Rng* rng = nullptr) const {
    if (grad.size() != params_.size()) throw DataError("gradient buffer size mismatch");
    Workspace ws(arch_);
    const double out = forward(window, ws, rng);
    const double err = out - target;
    backward(ws, 2.0 * err * scale, grad);
    return err * err;
  }

 private:
  struct Workspace {
    explicit Workspace(const BiLstmArchitecture& a) {
      const std::size_t T = a.window, H = a.hidden;
      inputs.resize(a.layers);
      outputs.resize(a.layers, std::vector<double>(T * 2 * H, 0.0));
      masks.resize(a.layers);
      gates.resize(2 * a.layers, std::vector<double>(T * 4 * H, 0.0));
      cells.resize(2 * a.layers, std::vector<double>(T * H, 0.0));
      for (std::size_t l = 0; l < a.layers; ++l) inputs[l].resize(T * a.layer_input(l), 0.0);
      head_pre.resize(a.dense_hidden, 0.0);
    }
    std::vector<std::vector<double>> inputs;   // per layer, T x in (after dropout)
    std::vector<std::vector<double>> outputs;  // per layer, T x 2H
    std::vector<std::vector<double>> masks;    // per layer >= 1, T x 2H of the layer input; empty = none
    std::vector<std::vector<double>> gates;    // per (layer, dir), T x 4H post-activation, by timestep
    std::vector<std::vector<double>> cells;    // per (layer, dir), T x H cell state, by timestep
    std::vector<double> head_pre;              // dense pre-activation
  };

  static double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

  double forward(std::span<const double> window, Workspace& ws, Rng* rng) const {
    const std::size_t T = arch_.window, H = arch_.hidden;
    if (window.size() != T * arch_.input_size)
      throw DataError("window length " + std::to_string(window.size()) + " does not match model window " +
                      std::to_string(T * arch_.input_size));
    std::copy(window.begin(), window.end(), ws.inputs[0].begin());

    for (std::size_t l = 0; l < arch_.layers; ++l) {
      if (l > 0) {
        auto& in = ws.inputs[l];
        in = ws.outputs[l - 1];
        if (rng != nullptr && arch_.dropout > 0.0) {
          auto& mask = ws.masks[l];
          mask.resize(in.size());
          const double keep = 1.0 - arch_.dropout;
          for (std::size_t k = 0; k < in.size(); ++k) {
            mask[k] = rng->uniform() < keep ? 1.0 / keep : 0.0;
            in[k] *= mask[k];
          }
        }
      }
      for (int d = 0; d < 2; ++d) {
        const CellOffsets& c = cell(l, d);
        auto& gates = ws.gates[2 * l + d];
        auto& cs = ws.cells[2 * l + d];
        const double* h_prev = nullptr;
        const double* c_prev = nullptr;
        for (std::size_t step = 0; step < T; ++step) {
          const std::size_t t = d == 0 ? step : T - 1 - step;
          const double* x = ws.inputs[l].data() + t * c.in;
          double* g = gates.data() + t * 4 * H;
          for (std::size_t r = 0; r < 4 * H; ++r) {
            double acc = params_[c.b + r];
            const double* wx = params_.data() + c.wx + r * c.in;
            for (std::size_t k = 0; k < c.in; ++k) acc += wx[k] * x[k];
            if (h_prev != nullptr) {
              const double* wh = params_.data() + c.wh + r * H;
              for (std::size_t k = 0; k < H; ++k) acc += wh[k] * h_prev[k];
            }
            g[r] = acc;
          }
          double* cell_t = cs.data() + t * H;
          double* h_t = ws.outputs[l].data() + t * 2 * H + static_cast<std::size_t>(d) * H;
          for (std::size_t j = 0; j < H; ++j) {
            const double ig = sigmoid(g[j]);
            const double fg = sigmoid(g[H + j]);
            const double cg = std::tanh(g[2 * H + j]);
            const double og = sigmoid(g[3 * H + j]);
            g[j] = ig;
            g[H + j] = fg;
            g[2 * H + j] = cg;
            g[3 * H + j] = og;
            cell_t[j] = (c_prev != nullptr ? fg * c_prev[j] : 0.0) + ig * cg;
            h_t[j] = og * std::tanh(cell_t[j]);
          }
          h_prev = h_t;
          c_prev = cell_t;
        }
      }
    }

    const double* z = ws.outputs[arch_.layers - 1].data() + (T - 1) * 2 * H;
    double out = params_[head_.b2];
    for (std::size_t r = 0; r < arch_.dense_hidden; ++r) {
      double acc = params_[head_.b1 + r];
      const double* w = params_.data() + head_.w1 + r * 2 * H;
      for (std::size_t k = 0; k < 2 * H; ++k) acc += w[k] * z[k];
      ws.head_pre[r] = acc;
      if (acc > 0.0) out += params_[head_.w2 + r] * acc;
    }
    return out;
  }

  void backward(const Workspace& ws, double dout, std::span<double> grad) const {
    const std::size_t T = arch_.window, H = arch_.hidden, D = arch_.dense_hidden;

    // Dense head.
    std::vector<double> d_top(T * 2 * H, 0.0);
    const double* z = ws.outputs[arch_.layers - 1].data() + (T - 1) * 2 * H;
    double* dz = d_top.data() + (T - 1) * 2 * H;
    grad[head_.b2] += dout;
    for (std::size_t r = 0; r < D; ++r) {
      const double pre = ws.head_pre[r];
      if (pre <= 0.0) continue;
      grad[head_.w2 + r] += dout * pre;
      const double da = dout * params_[head_.w2 + r];
      grad[head_.b1 + r] += da;
      const double* w = params_.data() + head_.w1 + r * 2 * H;
      double* gw = grad.data() + head_.w1 + r * 2 * H;
      for (std::size_t k = 0; k < 2 * H; ++k) {
        gw[k] += da * z[k];
        dz[k] += da * w[k];
      }
    }

    // Recurrent layers, top down. d_out holds dL/d(layer output), T x 2H.
    std::vector<double> d_out = std::move(d_top);
    std::vector<double> dh_next(H), dc_next(H), da(4 * H);
    for (std::size_t l = arch_.layers; l-- > 0;) {
      const std::size_t in = arch_.layer_input(l);
      std::vector<double> d_in(T * in, 0.0);
      for (int d = 0; d < 2; ++d) {
        const CellOffsets& c = cell(l, d);
        const auto& gates = ws.gates[2 * l + d];
        const auto& cs = ws.cells[2 * l + d];
        std::fill(dh_next.begin(), dh_next.end(), 0.0);
        std::fill(dc_next.begin(), dc_next.end(), 0.0);
        for (std::size_t step = T; step-- > 0;) {
          const std::size_t t = d == 0 ? step : T - 1 - step;
          const bool first = step == 0;
          const std::size_t t_prev = d == 0 ? t - 1 : t + 1;  // valid only when !first
          const double* g = gates.data() + t * 4 * H;
          const double* cell_t = cs.data() + t * H;
          const double* c_prev = first ? nullptr : cs.data() + t_prev * H;
          const double* h_prev = first ? nullptr : ws.outputs[l].data() + t_prev * 2 * H + static_cast<std::size_t>(d) * H;
          const double* x = ws.inputs[l].data() + t * in;
          const double* dy = d_out.data() + t * 2 * H + static_cast<std::size_t>(d) * H;

          for (std::size_t j = 0; j < H; ++j) {
            const double ig = g[j], fg = g[H + j], cg = g[2 * H + j], og = g[3 * H + j];
            const double tc = std::tanh(cell_t[j]);
            const double dh = dy[j] + dh_next[j];
            const double dc = dh * og * (1.0 - tc * tc) + dc_next[j];
            da[j] = dc * cg * ig * (1.0 - ig);
            da[H + j] = first ? 0.0 : dc * c_prev[j] * fg * (1.0 - fg);
            da[2 * H + j] = dc * ig * (1.0 - cg * cg);
            da[3 * H + j] = dh * tc * og * (1.0 - og);
            dc_next[j] = dc * fg;
          }
          std::fill(dh_next.begin(), dh_next.end(), 0.0);
          double* dx = d_in.data() + t * in;
          for (std::size_t r = 0; r < 4 * H; ++r) {
            const double a = da[r];
            if (a == 0.0) continue;
            grad[c.b + r] += a;
            const double* wx = params_.data() + c.wx + r * in;
            double* gwx = grad.data() + c.wx + r * in;
            for (std::size_t k = 0; k < in; ++k) {
              gwx[k] += a * x[k];
              dx[k] += a * wx[k];
            }
            if (!first) {
              const double* wh = params_.data() + c.wh + r * H;
              double* gwh = grad.data() + c.wh + r * H;
              for (std::size_t k = 0; k < H; ++k) {
                gwh[k] += a * h_prev[k];
                dh_next[k] += a * wh[k];
              }
            }
          }
        }
      }
      if (l == 0) break;
      if (!ws.masks[l].empty())
        for (std::size_t k = 0; k < d_in.size(); ++k) d_in[k] *= ws.masks[l][k];
      d_out = std::move(d_in);
    }
  }

  BiLstmArchitecture arch_;
  std::vector<CellOffsets> cells_;
  HeadOffsets head_{};
  std::vector<double> params_;
};

// ---------------------------------------------------------------------------
// Training

struct ForecastTrainConfig {
  std::size_t epochs = 40;
  double train_fraction = 0.8;
  double val_fraction = 0.1;
  std::size_t batch_size = 32;
  AdamParams adam{};
  std::uint64_t seed = 1;
};

struct TrainingReport {
  double initial_train_loss = 0.0;
  std::vector<double> train_loss;  // per epoch, mean over training windows (scaled units)
  std::vector<double> val_loss;    // per epoch, after the epoch's updates
  std::size_t train_windows = 0;
  std::size_t val_windows = 0;
};

inline double mean_squared_error(const BiLstmModel& model, const WindowedDataset& data) {
  if (data.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double e = model.predict(data.input(i)) - data.target(i);
    acc += e * e;
  }
  return acc / static_cast<double>(data.size());
}

/// Splits the dataset in order into a training prefix and a validation block
/// following it, then runs mini-batch Adam over shuffled training windows.
inline TrainingReport train(BiLstmModel& model, const WindowedDataset& data, const ForecastTrainConfig& cfg) {
  if (data.empty()) throw DataError("insufficient data: empty training dataset");
  if (data.window_size() != model.architecture().window * model.architecture().input_size)
    throw DataError("dataset window does not match model window");
  if (cfg.epochs == 0) throw ConfigError("epochs must be >= 1");
  if (cfg.batch_size == 0) throw ConfigError("batch size must be >= 1");
  if (!(cfg.train_fraction > 0.0) || !(cfg.val_fraction >= 0.0) || cfg.train_fraction + cfg.val_fraction > 1.0 + 1e-12)
    throw ConfigError("train/val fractions must be non-negative and sum to at most 1");

  const auto n = static_cast<double>(data.size());
  const auto n_train = static_cast<std::size_t>(std::floor(cfg.train_fraction * n));
  const auto n_val = static_cast<std::size_t>(std::floor(cfg.val_fraction * n));
  if (n_train == 0) throw DataError("insufficient data: training split is empty");
  const WindowedDataset train_set = data.slice(0, n_train);
  const WindowedDataset val_set = data.slice(n_train, n_val);

  TrainingReport report;
  report.train_windows = n_train;
  report.val_windows = n_val;
  report.initial_train_loss = mean_squared_error(model, train_set);

  Rng rng(cfg.seed);
  Adam adam(model.parameter_count(), cfg.adam);
  std::vector<double> grad(model.parameter_count());
  std::vector<std::size_t> order(n_train);
  for (std::size_t i = 0; i < n_train; ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n_train; start += cfg.batch_size) {
      const std::size_t stop = std::min(start + cfg.batch_size, n_train);
      const double scale = 1.0 / static_cast<double>(stop - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t k = start; k < stop; ++k) {
        const std::size_t i = order[k];
        epoch_loss += model.accumulate_gradient(train_set.input(i), train_set.target(i), grad, scale, &rng);
      }
      adam.step(model.parameters(), grad);
    }
    epoch_loss /= static_cast<double>(n_train);
    if (!std::isfinite(epoch_loss))
      throw DivergenceError("training diverged: non-finite loss at epoch " + std::to_string(epoch + 1));
    report.train_loss.push_back(epoch_loss);
    report.val_loss.push_back(mean_squared_error(model, val_set));
  }
  return report;
}

/// One-step-ahead predictions in Mbps: scale, window, forward, unscale.
/// Output i predicts series[i + w].
inline std::vector<double> predict_series(const BiLstmModel& model, const MinMaxScaler& scaler,
                                          std::span<const double> series) {
  const std::size_t w = model.architecture().window;
  const auto scaled = scaler.transform(series);
  const auto windows = make_windows(scaled, w);
  std::vector<double> out(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) out[i] = scaler.inverse(model.predict(windows.input(i)));
  return out;
}

}  // namespace ztn
