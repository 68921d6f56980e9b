#include "glucorl/qnet.hpp"

#include <cmath>
#include <cstring>
#include <random>

#include <fmt/format.h>

#include "glucorl/errors.hpp"

namespace glucorl {

using Eigen::MatrixXd;

namespace {

constexpr std::uint32_t kWeightsMagic = 0x514E4554;  // "QNET"
constexpr std::uint32_t kWeightsVersion = 1;

int gate_rows(CellType cell, int hidden) { return cell == CellType::lstm ? 4 * hidden : hidden; }

struct LayerTrace {
  std::vector<MatrixXd> h;      // per step; empty where the cell is never read
  std::vector<MatrixXd> c;      // LSTM cell state
  std::vector<MatrixXd> gates;  // LSTM activated gates, rows [i; f; g; o]
};

struct ForwardTrace {
  std::vector<MatrixXd> x;  // normalised inputs per step, C x B
  MatrixXd flat;            // feedforward input, (T*C) x B
  std::vector<LayerTrace> layers;
  MatrixXd q;
};

// needed[l][t] is set when cell (l, t) can reach the readout at the last step
// through the dilated graph. Everything else is skipped.
std::vector<std::vector<char>> reachable_cells(const QNetConfig& cfg) {
  const auto depth = cfg.layers.size();
  const int steps = cfg.window;
  std::vector<std::vector<char>> needed(depth, std::vector<char>(static_cast<std::size_t>(steps), 0));
  needed[depth - 1][static_cast<std::size_t>(steps - 1)] = 1;
  for (std::size_t l = depth; l-- > 0;) {
    const int d = cfg.layers[l].dilation;
    for (int t = steps - 1; t >= 0; --t) {
      if (!needed[l][static_cast<std::size_t>(t)]) continue;
      if (t - d >= 0) needed[l][static_cast<std::size_t>(t - d)] = 1;
      if (l > 0) needed[l - 1][static_cast<std::size_t>(t)] = 1;
    }
  }
  return needed;
}

MatrixXd sigmoid(const MatrixXd& z) { return (1.0 + (-z.array()).exp()).inverse().matrix(); }

void accumulate(MatrixXd& dst, const MatrixXd& src) {
  if (dst.size() == 0) {
    dst = src;
  } else {
    dst += src;
  }
}

void load_inputs(const QNetConfig& cfg, ObsBatch batch, ForwardTrace& tr) {
  const auto b = static_cast<Eigen::Index>(batch.size());
  const int steps = cfg.window;
  const int chans = cfg.input_channels;
  for (const Observation* o : batch) {
    if (o == nullptr || o->length() != steps) {
      throw ShapeMismatch(fmt::format("observation window must have {} steps", steps));
    }
  }
  if (cfg.cell == CellType::feedforward) {
    tr.flat.resize(static_cast<Eigen::Index>(steps) * chans, b);
    for (Eigen::Index j = 0; j < b; ++j) {
      for (int t = 0; t < steps; ++t) {
        for (int c = 0; c < chans; ++c) {
          tr.flat(t * chans + c, j) = batch[static_cast<std::size_t>(j)]->at(t, c) / cfg.channel_scale[c];
        }
      }
    }
    return;
  }
  tr.x.assign(static_cast<std::size_t>(steps), MatrixXd(chans, b));
  for (int t = 0; t < steps; ++t) {
    auto& xt = tr.x[static_cast<std::size_t>(t)];
    for (Eigen::Index j = 0; j < b; ++j) {
      for (int c = 0; c < chans; ++c) {
        xt(c, j) = batch[static_cast<std::size_t>(j)]->at(t, c) / cfg.channel_scale[c];
      }
    }
  }
}

void run_forward(const QNetWeights& w, ObsBatch batch, ForwardTrace& tr) {
  const auto& cfg = w.config();
  const auto& lay = w.layout();
  if (batch.empty()) throw ShapeMismatch("empty observation batch");
  load_inputs(cfg, batch, tr);
  const auto depth = cfg.layers.size();
  tr.layers.assign(depth, {});

  if (cfg.cell == CellType::feedforward) {
    const MatrixXd* prev = &tr.flat;
    for (std::size_t l = 0; l < depth; ++l) {
      MatrixXd pre = w.block(lay.layers[l].input) * *prev;
      pre.colwise() += w.block(lay.layers[l].bias).col(0);
      tr.layers[l].h.push_back(pre.array().tanh().matrix());
      prev = &tr.layers[l].h.back();
    }
    tr.q = w.block(lay.head_weight) * *prev;
    tr.q.colwise() += w.block(lay.head_bias).col(0);
    return;
  }

  const auto needed = reachable_cells(cfg);
  const int steps = cfg.window;
  for (std::size_t l = 0; l < depth; ++l) {
    const int d = cfg.layers[l].dilation;
    const int hidden = cfg.layers[l].hidden;
    const auto& in = l == 0 ? tr.x : tr.layers[l - 1].h;
    auto& lt = tr.layers[l];
    lt.h.assign(static_cast<std::size_t>(steps), MatrixXd());
    const auto w_in = w.block(lay.layers[l].input);
    const auto w_rec = w.block(lay.layers[l].recurrent);
    const auto bias = w.block(lay.layers[l].bias).col(0);
    if (cfg.cell == CellType::lstm) {
      lt.c.assign(static_cast<std::size_t>(steps), MatrixXd());
      lt.gates.assign(static_cast<std::size_t>(steps), MatrixXd());
    }
    for (int t = 0; t < steps; ++t) {
      const auto ut = static_cast<std::size_t>(t);
      if (!needed[l][ut]) continue;
      MatrixXd z = w_in * in[ut];
      z.colwise() += bias;
      if (t >= d) z.noalias() += w_rec * lt.h[ut - static_cast<std::size_t>(d)];
      if (cfg.cell == CellType::vanilla_rnn) {
        lt.h[ut] = z.array().tanh().matrix();
        continue;
      }
      MatrixXd g(z.rows(), z.cols());
      g.topRows(2 * hidden) = sigmoid(z.topRows(2 * hidden));
      g.middleRows(2 * hidden, hidden) = z.middleRows(2 * hidden, hidden).array().tanh().matrix();
      g.bottomRows(hidden) = sigmoid(z.bottomRows(hidden));
      MatrixXd c = g.topRows(hidden).cwiseProduct(g.middleRows(2 * hidden, hidden));
      if (t >= d) c += g.middleRows(hidden, hidden).cwiseProduct(lt.c[ut - static_cast<std::size_t>(d)]);
      lt.h[ut] = g.bottomRows(hidden).cwiseProduct(c.array().tanh().matrix());
      lt.c[ut] = std::move(c);
      lt.gates[ut] = std::move(g);
    }
  }
  tr.q = w.block(lay.head_weight) * tr.layers.back().h[static_cast<std::size_t>(steps - 1)];
  tr.q.colwise() += w.block(lay.head_bias).col(0);
}

Eigen::Map<MatrixXd> grad_block(Eigen::VectorXd& g, const ParamBlock& b) { return {g.data() + b.offset, b.rows, b.cols}; }

}  // namespace

const char* to_string(CellType c) {
  switch (c) {
    case CellType::vanilla_rnn:
      return "vanilla_rnn";
    case CellType::lstm:
      return "lstm";
    case CellType::feedforward:
      return "feedforward";
  }
  return "?";
}

CellType parse_cell_type(std::string_view s) {
  if (s == "vanilla_rnn") return CellType::vanilla_rnn;
  if (s == "lstm") return CellType::lstm;
  if (s == "feedforward") return CellType::feedforward;
  throw ConfigError(fmt::format("unknown cell type '{}'", s));
}

void QNetConfig::validate() const {
  if (input_channels <= 0 || window <= 0 || output_dim <= 0 || layers.empty()) {
    throw ShapeMismatch("network sizes must be positive");
  }
  int prev = 0;
  for (const auto& l : layers) {
    if (l.hidden <= 0) throw ShapeMismatch("hidden sizes must be positive");
    if (cell == CellType::feedforward) continue;
    const bool pow2 = l.dilation > 0 && (l.dilation & (l.dilation - 1)) == 0;
    if (!pow2 || l.dilation <= prev) {
      throw ShapeMismatch("dilations must be strictly increasing powers of two");
    }
    prev = l.dilation;
  }
  for (double s : channel_scale) {
    if (!(s > 0.0)) throw ShapeMismatch("channel scales must be positive");
  }
}

ParamLayout ParamLayout::build(const QNetConfig& cfg) {
  cfg.validate();
  ParamLayout lay;
  Eigen::Index offset = 0;
  const auto take = [&](Eigen::Index rows, Eigen::Index cols) {
    ParamBlock b{offset, rows, cols};
    offset += rows * cols;
    return b;
  };
  Eigen::Index in_dim = cfg.cell == CellType::feedforward ? static_cast<Eigen::Index>(cfg.window) * cfg.input_channels
                                                          : cfg.input_channels;
  for (const auto& spec : cfg.layers) {
    const Eigen::Index rows = gate_rows(cfg.cell, spec.hidden);
    LayerParams p;
    p.input = take(rows, in_dim);
    if (cfg.cell != CellType::feedforward) p.recurrent = take(rows, spec.hidden);
    p.bias = take(rows, 1);
    lay.layers.push_back(p);
    in_dim = spec.hidden;
  }
  lay.head_weight = take(cfg.output_dim, in_dim);
  lay.head_bias = take(cfg.output_dim, 1);
  lay.size = offset;
  return lay;
}

QNetWeights::QNetWeights(QNetConfig config)
    : config_(std::move(config)), layout_(ParamLayout::build(config_)), params_(Eigen::VectorXd::Zero(layout_.size)) {}

QNetWeights QNetWeights::random(const QNetConfig& config, std::uint64_t seed) {
  QNetWeights w(config);
  std::mt19937_64 rng(seed);
  const auto fill = [&](const ParamBlock& b, Eigen::Index fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index i = 0; i < b.size(); ++i) w.params_[b.offset + i] = u(rng);
  };
  for (const auto& l : w.layout_.layers) {
    fill(l.input, l.input.cols);
    if (l.recurrent.size() > 0) fill(l.recurrent, l.recurrent.cols);
    fill(l.bias, l.input.cols);
  }
  fill(w.layout_.head_weight, w.layout_.head_weight.cols);
  fill(w.layout_.head_bias, w.layout_.head_weight.cols);
  return w;
}

void QNetWeights::save(BinaryWriter& wr) const {
  wr.write(kWeightsMagic);
  wr.write(kWeightsVersion);
  wr.write<std::int32_t>(config_.input_channels);
  wr.write<std::int32_t>(config_.window);
  wr.write<std::int32_t>(static_cast<std::int32_t>(config_.cell));
  wr.write<std::int32_t>(config_.output_dim);
  wr.write<std::uint64_t>(config_.layers.size());
  for (const auto& l : config_.layers) {
    wr.write<std::int32_t>(l.dilation);
    wr.write<std::int32_t>(l.hidden);
  }
  wr.write_doubles(config_.channel_scale.data(), config_.channel_scale.size());
  wr.write_vector(params_);
}

QNetWeights QNetWeights::load(BinaryReader& rd) {
  if (rd.read<std::uint32_t>() != kWeightsMagic) throw FormatError("not a Q-network weight block");
  if (rd.read<std::uint32_t>() != kWeightsVersion) throw FormatError("unsupported weight format version");
  QNetConfig cfg;
  cfg.input_channels = rd.read<std::int32_t>();
  cfg.window = rd.read<std::int32_t>();
  cfg.cell = static_cast<CellType>(rd.read<std::int32_t>());
  cfg.output_dim = rd.read<std::int32_t>();
  cfg.layers.resize(rd.read_size(64));
  for (auto& l : cfg.layers) {
    l.dilation = rd.read<std::int32_t>();
    l.hidden = rd.read<std::int32_t>();
  }
  const auto scales = rd.read_vector();
  if (scales.size() != cfg.channel_scale.size()) throw FormatError("corrupt channel scales");
  std::copy(scales.begin(), scales.end(), cfg.channel_scale.begin());
  QNetWeights w(cfg);
  auto params = rd.read_eigen();
  if (params.size() != w.params_.size()) throw ShapeMismatch("checkpoint weights do not match their config");
  w.params_ = std::move(params);
  return w;
}

bool QNetWeights::operator==(const QNetWeights& other) const {
  if (!(config_ == other.config_) || params_.size() != other.params_.size()) return false;
  return std::memcmp(params_.data(), other.params_.data(), static_cast<std::size_t>(params_.size()) * sizeof(double)) ==
         0;
}

Eigen::MatrixXd forward_batch(const QNetWeights& w, ObsBatch batch) {
  ForwardTrace tr;
  run_forward(w, batch, tr);
  return std::move(tr.q);
}

Eigen::VectorXd forward(const QNetWeights& w, const Observation& obs) {
  const Observation* p = &obs;
  return forward_batch(w, ObsBatch(&p, 1)).col(0);
}

LossGradient backward(const QNetWeights& w, ObsBatch obs, std::span<const int> actions,
                      std::span<const double> targets, std::span<const double> is_weights, double l2) {
  const auto& cfg = w.config();
  const auto& lay = w.layout();
  const std::size_t n = obs.size();
  if (n == 0) throw ShapeMismatch("empty batch");
  if (actions.size() != n || targets.size() != n || is_weights.size() != n) {
    throw ShapeMismatch("batch arrays differ in length");
  }

  ForwardTrace tr;
  run_forward(w, obs, tr);
  const auto b = static_cast<Eigen::Index>(n);
  const double inv_b = 1.0 / static_cast<double>(n);

  LossGradient out;
  out.gradient = Eigen::VectorXd::Zero(lay.size);
  out.q_selected.resize(b);
  auto& grad = out.gradient;

  MatrixXd dq = MatrixXd::Zero(cfg.output_dim, b);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int a = actions[i];
    if (a < 0 || a >= cfg.output_dim) throw ShapeMismatch(fmt::format("action {} outside network output", a));
    if (!(is_weights[i] >= 0.0)) throw ShapeMismatch("importance weights must be non-negative");
    const auto j = static_cast<Eigen::Index>(i);
    const double q = tr.q(a, j);
    const double r = targets[i] - q;
    out.q_selected[j] = q;
    loss += is_weights[i] * r * r;
    dq(a, j) = -2.0 * is_weights[i] * r * inv_b;
  }
  out.loss = loss * inv_b + l2 * w.params().squaredNorm();

  const auto depth = cfg.layers.size();
  const int steps = cfg.window;
  const MatrixXd& top = cfg.cell == CellType::feedforward ? tr.layers.back().h[0]
                                                          : tr.layers.back().h[static_cast<std::size_t>(steps - 1)];
  grad_block(grad, lay.head_weight).noalias() += dq * top.transpose();
  grad_block(grad, lay.head_bias).col(0) += dq.rowwise().sum();
  MatrixXd dtop = w.block(lay.head_weight).transpose() * dq;

  if (cfg.cell == CellType::feedforward) {
    MatrixXd dh = std::move(dtop);
    for (std::size_t l = depth; l-- > 0;) {
      const MatrixXd& in = l == 0 ? tr.flat : tr.layers[l - 1].h[0];
      const MatrixXd& h = tr.layers[l].h[0];
      const MatrixXd dz = dh.cwiseProduct((1.0 - h.array().square()).matrix());
      grad_block(grad, lay.layers[l].input).noalias() += dz * in.transpose();
      grad_block(grad, lay.layers[l].bias).col(0) += dz.rowwise().sum();
      if (l > 0) dh = w.block(lay.layers[l].input).transpose() * dz;
    }
  } else {
    std::vector<MatrixXd> dh(static_cast<std::size_t>(steps));
    dh.back() = std::move(dtop);
    for (std::size_t l = depth; l-- > 0;) {
      const int d = cfg.layers[l].dilation;
      const int hidden = cfg.layers[l].hidden;
      const auto& lt = tr.layers[l];
      const auto& in = l == 0 ? tr.x : tr.layers[l - 1].h;
      const auto w_in = w.block(lay.layers[l].input);
      const auto w_rec = w.block(lay.layers[l].recurrent);
      auto g_in = grad_block(grad, lay.layers[l].input);
      auto g_rec = grad_block(grad, lay.layers[l].recurrent);
      auto g_bias = grad_block(grad, lay.layers[l].bias);
      std::vector<MatrixXd> dh_below(static_cast<std::size_t>(steps));
      std::vector<MatrixXd> dc(static_cast<std::size_t>(steps));

      for (int t = steps - 1; t >= 0; --t) {
        const auto ut = static_cast<std::size_t>(t);
        if (dh[ut].size() == 0 && dc[ut].size() == 0) continue;
        MatrixXd dz;
        if (cfg.cell == CellType::vanilla_rnn) {
          dz = dh[ut].cwiseProduct((1.0 - lt.h[ut].array().square()).matrix());
        } else {
          const auto& gates = lt.gates[ut];
          const auto gi = gates.topRows(hidden);
          const auto gf = gates.middleRows(hidden, hidden);
          const auto gg = gates.middleRows(2 * hidden, hidden);
          const auto go = gates.bottomRows(hidden);
          const MatrixXd tc = lt.c[ut].array().tanh().matrix();
          MatrixXd dhh = dh[ut].size() ? dh[ut] : MatrixXd::Zero(hidden, b);
          MatrixXd dcc = dhh.cwiseProduct(go).cwiseProduct((1.0 - tc.array().square()).matrix());
          if (dc[ut].size()) dcc += dc[ut];
          dz.resize(4 * hidden, b);
          dz.topRows(hidden) = dcc.cwiseProduct(gg).cwiseProduct(gi.cwiseProduct((1.0 - gi.array()).matrix()));
          if (t >= d) {
            const auto& c_prev = lt.c[ut - static_cast<std::size_t>(d)];
            dz.middleRows(hidden, hidden) =
                dcc.cwiseProduct(c_prev).cwiseProduct(gf.cwiseProduct((1.0 - gf.array()).matrix()));
            accumulate(dc[ut - static_cast<std::size_t>(d)], dcc.cwiseProduct(gf));
          } else {
            dz.middleRows(hidden, hidden).setZero();
          }
          dz.middleRows(2 * hidden, hidden) = dcc.cwiseProduct(gi).cwiseProduct((1.0 - gg.array().square()).matrix());
          dz.bottomRows(hidden) = dhh.cwiseProduct(tc).cwiseProduct(go.cwiseProduct((1.0 - go.array()).matrix()));
        }
        g_in.noalias() += dz * in[ut].transpose();
        g_bias.col(0) += dz.rowwise().sum();
        if (t >= d) {
          const auto up = ut - static_cast<std::size_t>(d);
          g_rec.noalias() += dz * lt.h[up].transpose();
          accumulate(dh[up], w_rec.transpose() * dz);
        }
        if (l > 0) accumulate(dh_below[ut], w_in.transpose() * dz);
      }
      dh = std::move(dh_below);
    }
  }

  grad += 2.0 * l2 * w.params();
  if (!grad.allFinite()) throw NonFiniteGradient("non-finite gradient in Q-network backward pass");
  return out;
}

AdamState AdamState::for_weights(const QNetWeights& w, double learning_rate) {
  AdamState s;
  s.learning_rate = learning_rate;
  s.m = Eigen::VectorXd::Zero(w.params().size());
  s.v = Eigen::VectorXd::Zero(w.params().size());
  return s;
}

void AdamState::save(BinaryWriter& w) const {
  w.write(learning_rate);
  w.write(beta1);
  w.write(beta2);
  w.write(epsilon);
  w.write(step);
  w.write_vector(m);
  w.write_vector(v);
}

AdamState AdamState::load(BinaryReader& r) {
  AdamState s;
  s.learning_rate = r.read<double>();
  s.beta1 = r.read<double>();
  s.beta2 = r.read<double>();
  s.epsilon = r.read<double>();
  s.step = r.read<std::int64_t>();
  s.m = r.read_eigen();
  s.v = r.read_eigen();
  return s;
}

bool AdamState::operator==(const AdamState& o) const {
  return learning_rate == o.learning_rate && beta1 == o.beta1 && beta2 == o.beta2 && epsilon == o.epsilon &&
         step == o.step && m.size() == o.m.size() && v.size() == o.v.size() && m == o.m && v == o.v;
}

ParamMask freeze_mask(const QNetConfig& config, int freeze_lower_layers) {
  const auto lay = ParamLayout::build(config);
  if (freeze_lower_layers < 0 || freeze_lower_layers > static_cast<int>(config.layers.size())) {
    throw ConfigError(fmt::format("cannot freeze {} of {} layers", freeze_lower_layers, config.layers.size()));
  }
  ParamMask mask(static_cast<std::size_t>(lay.size), 1);
  for (int l = 0; l < freeze_lower_layers; ++l) {
    const auto& p = lay.layers[static_cast<std::size_t>(l)];
    for (const auto* b : {&p.input, &p.recurrent, &p.bias}) {
      std::fill_n(mask.begin() + b->offset, b->size(), std::uint8_t{0});
    }
  }
  return mask;
}

void adam_step(QNetWeights& w, const Eigen::VectorXd& gradient, AdamState& adam, const ParamMask* mask) {
  auto& p = w.params();
  if (gradient.size() != p.size() || adam.m.size() != p.size() || adam.v.size() != p.size()) {
    throw ShapeMismatch("optimizer state does not match the weights");
  }
  if (mask != nullptr && mask->size() != static_cast<std::size_t>(p.size())) {
    throw ShapeMismatch("parameter mask does not match the weights");
  }
  ++adam.step;
  const double c1 = 1.0 - std::pow(adam.beta1, static_cast<double>(adam.step));
  const double c2 = 1.0 - std::pow(adam.beta2, static_cast<double>(adam.step));
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (mask != nullptr && (*mask)[static_cast<std::size_t>(i)] == 0) continue;
    const double g = gradient[i];
    adam.m[i] = adam.beta1 * adam.m[i] + (1.0 - adam.beta1) * g;
    adam.v[i] = adam.beta2 * adam.v[i] + (1.0 - adam.beta2) * g * g;
    const double m_hat = adam.m[i] / c1;
    const double v_hat = adam.v[i] / c2;
    p[i] -= adam.learning_rate * m_hat / (std::sqrt(v_hat) + adam.epsilon);
  }
}

}  // namespace glucorl
