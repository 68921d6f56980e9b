#pragma once

// Dilated recurrent Q-network with hand-written backpropagation through time.
//
// Layer l runs a recurrent cell whose recurrence skips d(l) steps:
//   c_t = f(W_in x_t + W_rec c_{t-d} + b),  c_{t-d} = 0 for t - d < 0.
// Layers are stacked; the top layer's state at the last step feeds a linear
// head producing one Q-value per action. All parameters live in one flat
// vector so copies, optimiser state, masks and checkpoints share a layout.

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "glucorl/binary_io.hpp"
#include "glucorl/observation.hpp"

namespace glucorl {

enum class CellType { vanilla_rnn, lstm, feedforward };

const char* to_string(CellType c);
CellType parse_cell_type(std::string_view s);

struct LayerSpec {
  int dilation = 1;
  int hidden = 32;
  bool operator==(const LayerSpec&) const = default;
};

struct QNetConfig {
  int input_channels = kChannels;
  int window = kDefaultWindow;
  std::vector<LayerSpec> layers{{1, 32}, {2, 64}, {4, 128}};
  CellType cell = CellType::vanilla_rnn;
  int output_dim = 5;
  // Inputs are divided by these before entering the network:
  // glucose / 400 mg/dL, carbs / 100 g, insulin / 10 U, glucagon / 1 mg.
  std::array<double, kChannels> channel_scale{400.0, 100.0, 10.0, 1.0};

  // Throws ShapeMismatch on inconsistent sizes or dilations that are not
  // strictly increasing powers of two.
  void validate() const;
  bool operator==(const QNetConfig&) const = default;
};

struct ParamBlock {
  Eigen::Index offset = 0;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  Eigen::Index size() const { return rows * cols; }
};

struct LayerParams {
  ParamBlock input;
  ParamBlock recurrent;  // empty for feedforward layers
  ParamBlock bias;
};

struct ParamLayout {
  std::vector<LayerParams> layers;
  ParamBlock head_weight;
  ParamBlock head_bias;
  Eigen::Index size = 0;

  static ParamLayout build(const QNetConfig& config);
};

class QNetWeights {
 public:
  QNetWeights() = default;
  // All-zero parameters.
  explicit QNetWeights(QNetConfig config);
  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialisation.
  static QNetWeights random(const QNetConfig& config, std::uint64_t seed);

  const QNetConfig& config() const { return config_; }
  const ParamLayout& layout() const { return layout_; }
  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }

  Eigen::Map<const Eigen::MatrixXd> block(const ParamBlock& b) const {
    return {params_.data() + b.offset, b.rows, b.cols};
  }
  Eigen::Map<Eigen::MatrixXd> block(const ParamBlock& b) { return {params_.data() + b.offset, b.rows, b.cols}; }

  bool all_finite() const { return params_.allFinite(); }

  void save(BinaryWriter& w) const;
  static QNetWeights load(BinaryReader& r);

  // Bit-exact comparison.
  bool operator==(const QNetWeights& other) const;

 private:
  QNetConfig config_;
  ParamLayout layout_;
  Eigen::VectorXd params_;
};

inline QNetWeights copy_weights(const QNetWeights& src) { return src; }

using ObsBatch = std::span<const Observation* const>;

Eigen::VectorXd forward(const QNetWeights& w, const Observation& obs);
// One column of Q-values per observation.
Eigen::MatrixXd forward_batch(const QNetWeights& w, ObsBatch batch);

struct LossGradient {
  double loss = 0.0;
  Eigen::VectorXd gradient;
  Eigen::VectorXd q_selected;  // Q(o_i, a_i) under the given weights
};

// Gradient of  sum_i w_i (y_i - Q(o_i, a_i))^2 / B + l2 * |theta|^2.
// Throws NonFiniteGradient if any entry is not finite.
LossGradient backward(const QNetWeights& w, ObsBatch obs, std::span<const int> actions,
                      std::span<const double> targets, std::span<const double> is_weights, double l2);

struct AdamState {
  double learning_rate = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  Eigen::VectorXd m;
  Eigen::VectorXd v;

  static AdamState for_weights(const QNetWeights& w, double learning_rate = 1e-5);
  void save(BinaryWriter& w) const;
  static AdamState load(BinaryReader& r);
  bool operator==(const AdamState& o) const;
};

// One entry per parameter; 0 marks a frozen weight.
using ParamMask = std::vector<std::uint8_t>;

// Freezes every parameter of the first `freeze_lower_layers` recurrent layers.
ParamMask freeze_mask(const QNetConfig& config, int freeze_lower_layers);

// Bias-corrected Adam update. Entries with a zero mask are left untouched,
// moments included.
void adam_step(QNetWeights& w, const Eigen::VectorXd& gradient, AdamState& adam, const ParamMask* mask = nullptr);

}  // namespace glucorl
