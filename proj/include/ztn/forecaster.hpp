#pragma once

// Two-stage forecaster: the BiLSTM's one-step prediction plus a boosted
// correction fit on its residuals. Serialises to one JSON checkpoint.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ztn/bilstm.hpp"
#include "ztn/booster.hpp"
#include "ztn/errors.hpp"
#include "ztn/windowing.hpp"

namespace ztn {

inline constexpr int kForecasterSchemaVersion = 1;

struct HybridPrediction {
  double recurrent = 0.0;  // Mbps
  double hybrid = 0.0;     // Mbps
};

/// Features and residual targets for windows [first, end) of a Mbps series.
struct ResidualSet {
  FeatureMatrix features{1, {}};
  std::vector<double> residuals;
};

inline ResidualSet residual_set(const BiLstmModel& model, const MinMaxScaler& scaler, std::span<const double> series,
                                std::size_t first) {
  const std::size_t w = model.architecture().window;
  const auto recurrent = predict_series(model, scaler, series);
  if (first >= recurrent.size()) throw DataError("insufficient data: no windows left for the residual stage");
  std::vector<double> values;
  std::vector<double> targets;
  for (std::size_t i = first; i < recurrent.size(); ++i) {
    const auto f = residual_features(series.subspan(i, w), recurrent[i]);
    values.insert(values.end(), f.begin(), f.end());
    targets.push_back(series[i + w] - recurrent[i]);
  }
  return {FeatureMatrix(w + 1, std::move(values)), std::move(targets)};
}

class HybridForecaster {
 public:
  HybridForecaster(BiLstmModel model, MinMaxScaler scaler, BoostedEnsemble booster)
      : model_(std::move(model)), scaler_(scaler), booster_(std::move(booster)) {
    if (booster_.feature_count() != window() + 1) throw DataError("booster width does not match the window");
  }

  std::size_t window() const noexcept { return model_.architecture().window; }
  const BiLstmModel& model() const noexcept { return model_; }
  const MinMaxScaler& scaler() const noexcept { return scaler_; }
  const BoostedEnsemble& booster() const noexcept { return booster_; }

  /// Predicts the sample following a window of the last w Mbps values.
  HybridPrediction predict(std::span<const double> window_mbps) const {
    if (window_mbps.size() != window())
      throw DataError("forecaster needs " + std::to_string(window()) + " samples, got " +
                      std::to_string(window_mbps.size()));
    const auto scaled = scaler_.transform(window_mbps);
    const double recurrent = scaler_.inverse(model_.predict(scaled));
    return {recurrent, recurrent + booster_.predict(residual_features(window_mbps, recurrent))};
  }

  /// Output i predicts series[i + w].
  std::vector<HybridPrediction> predict_series(std::span<const double> series) const {
    if (series.size() <= window()) throw DataError("insufficient data: series shorter than the window");
    std::vector<HybridPrediction> out;
    out.reserve(series.size() - window());
    for (std::size_t i = 0; i + window() < series.size(); ++i) out.push_back(predict(series.subspan(i, window())));
    return out;
  }

  nlohmann::json to_json() const {
    const auto& a = model_.architecture();
    nlohmann::json doc;
    doc["schema_version"] = kForecasterSchemaVersion;
    doc["architecture"] = {{"input_size", a.input_size}, {"hidden", a.hidden},      {"layers", a.layers},
                           {"dense_hidden", a.dense_hidden}, {"window", a.window}, {"dropout", a.dropout}};
    doc["scaler"] = {{"min", scaler_.min()}, {"max", scaler_.max()}};
    doc["weights"] = nlohmann::json::array();
    for (const auto& block : weight_blocks(model_)) {
      const auto p = model_.parameters().subspan(block.offset, block.rows * block.cols);
      doc["weights"].push_back({{"name", block.name},
                                {"shape", {block.rows, block.cols}},
                                {"values", std::vector<double>(p.begin(), p.end())}});
    }
    doc["booster"] = booster_.to_json();
    return doc;
  }

  static HybridForecaster from_json(const nlohmann::json& doc) {
    try {
      const int version = doc.at("schema_version").get<int>();
      if (version != kForecasterSchemaVersion)
        throw DataError("forecaster checkpoint schema version " + std::to_string(version) + ", expected " +
                        std::to_string(kForecasterSchemaVersion));
      const auto& a = doc.at("architecture");
      BiLstmArchitecture arch;
      arch.input_size = a.at("input_size").get<std::size_t>();
      arch.hidden = a.at("hidden").get<std::size_t>();
      arch.layers = a.at("layers").get<std::size_t>();
      arch.dense_hidden = a.at("dense_hidden").get<std::size_t>();
      arch.window = a.at("window").get<std::size_t>();
      arch.dropout = a.at("dropout").get<double>();
      BiLstmModel model(arch);
      const auto blocks = weight_blocks(model);
      const auto& weights = doc.at("weights");
      if (weights.size() != blocks.size()) throw DataError("forecaster checkpoint has the wrong number of weight arrays");
      auto params = model.parameters();
      for (std::size_t k = 0; k < blocks.size(); ++k) {
        const auto& b = blocks[k];
        const auto& w = weights[k];
        if (w.at("name").get<std::string>() != b.name ||
            w.at("shape") != nlohmann::json::array({b.rows, b.cols}))
          throw DataError("forecaster checkpoint weight array " + std::to_string(k) + " does not match " + b.name);
        const auto values = w.at("values").get<std::vector<double>>();
        if (values.size() != b.rows * b.cols) throw DataError("weight array " + b.name + " has the wrong size");
        std::copy(values.begin(), values.end(), params.begin() + static_cast<std::ptrdiff_t>(b.offset));
      }
      const MinMaxScaler scaler(doc.at("scaler").at("min").get<double>(), doc.at("scaler").at("max").get<double>());
      return HybridForecaster(std::move(model), scaler, BoostedEnsemble::from_json(doc.at("booster")));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("malformed forecaster checkpoint: ") + e.what());
    }
  }

 private:
  struct WeightBlock {
    std::string name;
    std::size_t offset, rows, cols;
  };

  /// Named row-major views covering the flat parameter vector in order.
  static std::vector<WeightBlock> weight_blocks(const BiLstmModel& m) {
    const auto& a = m.architecture();
    const std::size_t H = a.hidden;
    std::vector<WeightBlock> out;
    for (std::size_t l = 0; l < a.layers; ++l) {
      for (int d = 0; d < 2; ++d) {
        const auto& c = m.cell(l, d);
        const std::string p = "lstm." + std::to_string(l) + (d == 0 ? ".forward." : ".backward.");
        out.push_back({p + "input_weights", c.wx, 4 * H, c.in});
        out.push_back({p + "recurrent_weights", c.wh, 4 * H, H});
        out.push_back({p + "bias", c.b, 1, 4 * H});
      }
    }
    const auto& h = m.head();
    out.push_back({"dense.weights", h.w1, a.dense_hidden, 2 * H});
    out.push_back({"dense.bias", h.b1, 1, a.dense_hidden});
    out.push_back({"output.weights", h.w2, 1, a.dense_hidden});
    out.push_back({"output.bias", h.b2, 1, 1});
    return out;
  }

  BiLstmModel model_;
  MinMaxScaler scaler_;
  BoostedEnsemble booster_;
};

}  // namespace ztn
