#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "glucorl/errors.hpp"
#include "glucorl/qnet.hpp"

using namespace glucorl;

namespace {

Observation random_obs(std::mt19937_64& rng, int window = kDefaultWindow) {
  std::uniform_real_distribution<double> g(40.0, 350.0), m(0.0, 80.0), i(0.0, 5.0), c(0.0, 0.3);
  Observation o(window);
  for (int t = 0; t < window; ++t) {
    o.at(t, 0) = g(rng);
    o.at(t, 1) = m(rng);
    o.at(t, 2) = i(rng);
    o.at(t, 3) = c(rng);
  }
  return o;
}

QNetConfig small_config(CellType cell) {
  QNetConfig cfg;
  cfg.cell = cell;
  cfg.layers = {{1, 5}, {2, 4}, {4, 6}};
  return cfg;
}

double loss_at(const QNetWeights& w, ObsBatch obs, std::span<const int> a, std::span<const double> y,
               std::span<const double> iw, double l2) {
  const Eigen::MatrixXd q = forward_batch(w, obs);
  double s = 0.0;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const double r = y[i] - q(a[i], static_cast<Eigen::Index>(i));
    s += iw[i] * r * r;
  }
  return s / static_cast<double>(obs.size()) + l2 * w.params().squaredNorm();
}

// Largest relative error between the analytic gradient and central differences.
double gradient_error(CellType cell, std::uint64_t seed, std::size_t batch, double l2) {
  std::mt19937_64 rng(seed);
  auto w = QNetWeights::random(small_config(cell), seed);
  std::vector<Observation> obs;
  std::vector<const Observation*> ptrs;
  for (std::size_t i = 0; i < batch; ++i) obs.push_back(random_obs(rng));
  for (const auto& o : obs) ptrs.push_back(&o);
  std::uniform_int_distribution<int> act(0, 4);
  std::uniform_real_distribution<double> tgt(-2.0, 2.0), wt(0.2, 1.0);
  std::vector<int> a;
  std::vector<double> y, iw;
  for (std::size_t i = 0; i < batch; ++i) {
    a.push_back(act(rng));
    y.push_back(tgt(rng));
    iw.push_back(wt(rng));
  }
  const auto lg = backward(w, ptrs, a, y, iw, l2);
  const double h = 1e-5;
  double worst = 0.0;
  for (Eigen::Index k = 0; k < w.params().size(); ++k) {
    const double orig = w.params()[k];
    w.params()[k] = orig + h;
    const double up = loss_at(w, ptrs, a, y, iw, l2);
    w.params()[k] = orig - h;
    const double down = loss_at(w, ptrs, a, y, iw, l2);
    w.params()[k] = orig;
    const double fd = (up - down) / (2.0 * h);
    const double an = lg.gradient[k];
    const double scale = std::max({std::abs(fd), std::abs(an), 1e-6});
    worst = std::max(worst, std::abs(fd - an) / scale);
  }
  return worst;
}

}  // namespace

TEST_CASE("zero weights give zero Q-values") {
  std::mt19937_64 rng(1);
  for (auto cell : {CellType::vanilla_rnn, CellType::lstm, CellType::feedforward}) {
    QNetConfig cfg;
    cfg.cell = cell;
    QNetWeights w(cfg);
    const auto q = forward(w, random_obs(rng));
    CHECK(q.size() == 5);
    CHECK(q.isZero(0.0));
  }
}

TEST_CASE("parameter layout matches the configured shapes") {
  QNetConfig cfg;
  const auto lay = ParamLayout::build(cfg);
  const Eigen::Index expected = (32 * 4 + 32 * 32 + 32) + (64 * 32 + 64 * 64 + 64) + (128 * 64 + 128 * 128 + 128) +
                                (5 * 128 + 5);
  CHECK(lay.size == expected);
  cfg.output_dim = 6;
  CHECK(ParamLayout::build(cfg).head_weight.rows == 6);
}

TEST_CASE("config validation rejects bad dilations") {
  QNetConfig cfg;
  cfg.layers = {{1, 8}, {3, 8}};
  CHECK_THROWS_AS(cfg.validate(), ShapeMismatch);
  cfg.layers = {{2, 8}, {2, 8}};
  CHECK_THROWS_AS(cfg.validate(), ShapeMismatch);
  cfg.layers = {{1, 8}, {4, 8}};
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("window mismatch raises ShapeMismatch") {
  std::mt19937_64 rng(2);
  const auto w = QNetWeights::random(QNetConfig{}, 3);
  CHECK_THROWS_AS(forward(w, random_obs(rng, 8)), ShapeMismatch);
}

TEST_CASE("receptive field follows the dilated graph") {
  std::mt19937_64 rng(4);
  SUBCASE("single dilation-4 layer reaches steps 3, 7, 11") {
    QNetConfig cfg;
    cfg.layers = {{4, 6}};
    const auto w = QNetWeights::random(cfg, 5);
    const auto base = random_obs(rng);
    const auto q0 = forward(w, base);
    for (int t = 0; t < cfg.window; ++t) {
      auto o = base;
      o.at(t, 0) += 50.0;
      const bool changed = !(forward(w, o) - q0).isZero(0.0);
      CHECK_MESSAGE(changed == (t % 4 == 3), "step " << t);
    }
  }
  SUBCASE("dilations 2 and 4 reach odd steps only") {
    QNetConfig cfg;
    cfg.layers = {{2, 6}, {4, 6}};
    const auto w = QNetWeights::random(cfg, 6);
    const auto base = random_obs(rng);
    const auto q0 = forward(w, base);
    for (int t = 0; t < cfg.window; ++t) {
      auto o = base;
      o.at(t, 2) += 1.0;
      const bool changed = !(forward(w, o) - q0).isZero(0.0);
      CHECK_MESSAGE(changed == (t % 2 == 1), "step " << t);
    }
  }
  SUBCASE("default stack sees the whole window") {
    const auto w = QNetWeights::random(QNetConfig{}, 7);
    const auto base = random_obs(rng);
    const auto q0 = forward(w, base);
    for (int t = 0; t < kDefaultWindow; ++t) {
      auto o = base;
      o.at(t, 0) += 50.0;
      CHECK(!(forward(w, o) - q0).isZero(0.0));
    }
  }
}

TEST_CASE("forward is bit-reproducible and batch-consistent") {
  std::mt19937_64 rng(8);
  const auto w1 = QNetWeights::random(QNetConfig{}, 9);
  const auto w2 = QNetWeights::random(QNetConfig{}, 9);
  CHECK(w1 == w2);
  std::vector<Observation> obs{random_obs(rng), random_obs(rng), random_obs(rng)};
  std::vector<const Observation*> ptrs{&obs[0], &obs[1], &obs[2]};
  const auto qb = forward_batch(w1, ptrs);
  CHECK(qb == forward_batch(w2, ptrs));
  for (int i = 0; i < 3; ++i) {
    CHECK((forward(w1, obs[static_cast<std::size_t>(i)]) - qb.col(i)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("analytic gradient matches central differences") {
  for (auto cell : {CellType::vanilla_rnn, CellType::lstm, CellType::feedforward}) {
    CAPTURE(to_string(cell));
    CHECK(gradient_error(cell, 11, 1, 0.0) < 1e-4);
    CHECK(gradient_error(cell, 12, 3, 1e-3) < 1e-4);
  }
}

TEST_CASE("gradient check over many random draws") {
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 100; ++s) worst = std::max(worst, gradient_error(CellType::vanilla_rnn, 100 + s, 1, 0.0));
  CHECK(worst < 1e-4);
}

TEST_CASE("zero residual gives zero gradient, or pure L2 gradient") {
  std::mt19937_64 rng(13);
  const auto w = QNetWeights::random(QNetConfig{}, 14);
  std::vector<Observation> obs{random_obs(rng), random_obs(rng)};
  std::vector<const Observation*> ptrs{&obs[0], &obs[1]};
  const auto q = forward_batch(w, ptrs);
  std::vector<int> a{1, 4};
  std::vector<double> y{q(1, 0), q(4, 1)}, iw{1.0, 0.5};
  const auto g0 = backward(w, ptrs, a, y, iw, 0.0);
  CHECK(g0.gradient.isZero(0.0));
  CHECK(g0.loss == 0.0);
  const double l2 = 0.01;
  const auto g1 = backward(w, ptrs, a, y, iw, l2);
  CHECK(g1.gradient == (2.0 * l2 * w.params()));
}

TEST_CASE("backward validates its inputs") {
  std::mt19937_64 rng(15);
  const auto w = QNetWeights::random(QNetConfig{}, 16);
  const auto o = random_obs(rng);
  std::vector<const Observation*> ptrs{&o};
  std::vector<int> a{0};
  std::vector<double> y{0.0}, iw{1.0}, neg{-1.0};
  CHECK_THROWS_AS(backward(w, {}, {}, {}, {}, 0.0), ShapeMismatch);
  CHECK_THROWS_AS(backward(w, ptrs, a, y, neg, 0.0), ShapeMismatch);
  std::vector<double> huge{1e308};
  CHECK_THROWS_AS(backward(w, ptrs, a, huge, iw, 1e308), NonFiniteGradient);
}

TEST_CASE("adam: zero gradient leaves weights unchanged") {
  auto w = QNetWeights::random(QNetConfig{}, 17);
  const auto before = w;
  auto adam = AdamState::for_weights(w);
  adam_step(w, Eigen::VectorXd::Zero(w.params().size()), adam);
  CHECK(w == before);
  CHECK(adam.step == 1);
}

TEST_CASE("adam matches a scalar reference") {
  QNetConfig cfg;
  cfg.layers = {{1, 2}};
  cfg.output_dim = 2;
  auto w = QNetWeights::random(cfg, 18);
  auto adam = AdamState::for_weights(w, 1e-3);
  const Eigen::Index n = w.params().size();
  std::mt19937_64 rng(19);
  std::normal_distribution<double> nd(0.0, 1.0);

  std::vector<double> p(w.params().data(), w.params().data() + n), m(static_cast<std::size_t>(n)),
      v(static_cast<std::size_t>(n));
  for (int step = 1; step <= 50; ++step) {
    Eigen::VectorXd g(n);
    for (Eigen::Index k = 0; k < n; ++k) g[k] = nd(rng);
    adam_step(w, g, adam);
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double gk = g[static_cast<Eigen::Index>(k)];
      m[k] = 0.9 * m[k] + 0.1 * gk;
      v[k] = 0.999 * v[k] + 0.001 * gk * gk;
      const double mh = m[k] / (1.0 - std::pow(0.9, step));
      const double vh = v[k] / (1.0 - std::pow(0.999, step));
      p[k] -= 1e-3 * mh / (std::sqrt(vh) + 1e-8);
    }
  }
  for (std::size_t k = 0; k < p.size(); ++k) CHECK(std::abs(p[k] - w.params()[static_cast<Eigen::Index>(k)]) < 1e-12);
}

TEST_CASE("adam first step and constant-gradient step size") {
  QNetConfig cfg;
  cfg.layers = {{1, 2}};
  auto w = QNetWeights::random(cfg, 20);
  auto adam = AdamState::for_weights(w, 1e-5);
  const Eigen::VectorXd g = Eigen::VectorXd::Constant(w.params().size(), -0.3);
  Eigen::VectorXd prev = w.params();
  adam_step(w, g, adam);
  // One step from zero moments: m_hat = g, v_hat = g^2.
  const double expected = 1e-5 * 0.3 / (0.3 + 1e-8);
  CHECK(((w.params() - prev).array() - expected).abs().maxCoeff() < 1e-12);
  for (int i = 0; i < 2000; ++i) {
    prev = w.params();
    adam_step(w, g, adam);
  }
  CHECK(((w.params() - prev).array() - 1e-5).abs().maxCoeff() < 1e-9);
}

TEST_CASE("freeze mask and copies") {
  QNetConfig cfg;
  const auto none = freeze_mask(cfg, 0);
  CHECK(std::all_of(none.begin(), none.end(), [](auto m) { return m == 1; }));
  const auto mask = freeze_mask(cfg, 2);
  const auto lay = ParamLayout::build(cfg);
  const auto frozen = lay.layers[2].input.offset;
  for (Eigen::Index k = 0; k < lay.size; ++k) CHECK((mask[static_cast<std::size_t>(k)] == 0) == (k < frozen));

  auto w = QNetWeights::random(cfg, 21);
  const auto before = w;
  auto adam = AdamState::for_weights(w, 1e-2);
  adam_step(w, Eigen::VectorXd::Ones(lay.size), adam, &mask);
  CHECK(w.params().head(frozen) == before.params().head(frozen));
  CHECK((w.params().tail(lay.size - frozen) - before.params().tail(lay.size - frozen)).cwiseAbs().minCoeff() > 0.0);
  CHECK(adam.m.head(frozen).isZero(0.0));

  auto copy = copy_weights(w);
  const double first = w.params()[0];
  w.params()[0] += 1.0;
  CHECK(!(copy == w));
  CHECK(copy.params()[0] == first);
  CHECK_THROWS_AS(freeze_mask(cfg, 4), ConfigError);
}

TEST_CASE("weights and optimiser state round-trip bit-exactly") {
  for (auto cell : {CellType::vanilla_rnn, CellType::lstm, CellType::feedforward}) {
    QNetConfig cfg;
    cfg.cell = cell;
    cfg.output_dim = 6;
    const auto w = QNetWeights::random(cfg, 22);
    auto adam = AdamState::for_weights(w);
    auto w2 = w;
    adam_step(w2, Eigen::VectorXd::Constant(w.params().size(), 0.1), adam);
    std::stringstream ss;
    BinaryWriter wr(ss);
    w2.save(wr);
    adam.save(wr);
    BinaryReader rd(ss);
    const auto w3 = QNetWeights::load(rd);
    const auto adam2 = AdamState::load(rd);
    CHECK(w3 == w2);
    CHECK(w3.config() == cfg);
    CHECK(adam2 == adam);
  }
}
