#include "glucorl/training.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "glucorl/errors.hpp"
#include "glucorl/seeding.hpp"

namespace glucorl {

namespace {

constexpr std::uint32_t kCheckpointMagic = 0x504B4347;  // "GCKP"
constexpr std::uint32_t kCheckpointVersion = 1;

std::string layers_to_string(const std::vector<LayerSpec>& layers) {
  std::string s;
  for (const auto& l : layers) {
    if (!s.empty()) s += ',';
    s += fmt::format("{}:{}", l.dilation, l.hidden);
  }
  return s;
}

std::vector<LayerSpec> parse_layers(std::string_view text) {
  std::vector<LayerSpec> out;
  for (const auto& item : split(text, ',')) {
    const auto parts = split(item, ':');
    if (parts.size() != 2) throw ConfigError(fmt::format("layer '{}' is not dilation:hidden", item));
    out.push_back({static_cast<int>(parse_int(parts[0])), static_cast<int>(parse_int(parts[1]))});
  }
  return out;
}

std::string rng_state(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

void restore_rng(std::mt19937_64& rng, const std::string& s) {
  std::istringstream is(s);
  is >> rng;
  if (!is) throw FormatError("corrupt random-generator state");
}

template <typename T>
T number(std::string_view key, std::string_view value) {
  try {
    if constexpr (std::is_floating_point_v<T>) {
      return static_cast<T>(parse_double(value));
    } else if constexpr (std::is_unsigned_v<T>) {
      return static_cast<T>(parse_uint(value));
    } else {
      return static_cast<T>(parse_int(value));
    }
  } catch (const FormatError& e) {
    throw ConfigError(fmt::format("{}: {}", key, e.what()));
  }
}

bool in_range(double cgm) { return cgm >= 70.0 && cgm <= 180.0; }

}  // namespace

void TrainConfig::validate() const {
  const auto require = [](bool ok, std::string_view what) {
    if (!ok) throw ConfigError(fmt::format("invalid training config: {}", what));
  };
  require(gamma > 0.0 && gamma < 1.0, "gamma must lie in (0, 1)");
  require(exploration_steps >= 0, "exploration_steps must be >= 0");
  require(target_period_general > 0 && target_period_personal > 0, "target periods must be positive");
  require(batch_size > 0, "batch_size must be positive");
  require(learning_rate > 0.0, "learning_rate must be positive");
  require(window > 0, "window must be positive");
  require(buffer_size >= static_cast<std::size_t>(batch_size), "buffer_size must hold at least one batch");
  require(alpha >= 0.0 && epsilon_prime > 0.0, "alpha >= 0 and epsilon_prime > 0 required");
  require(beta_start >= 0.0 && beta_end >= 0.0, "beta must be non-negative");
  require(lambda1 >= 0.0 && lambda2 >= 0.0, "lambda1 and lambda2 must be non-negative");
  require(epsilon_start >= 0.0 && epsilon_start <= 1.0 && epsilon_end >= 0.0 && epsilon_end <= 1.0 &&
              epsilon_personal >= 0.0 && epsilon_personal <= 1.0,
          "epsilon values must lie in [0, 1]");
  require(nstep >= 1, "nstep must be at least 1");
  require(generalized_days > 0 && personalized_days > 0 && test_days > 0, "day counts must be positive");
  require(freeze_lower_layers >= 0 && freeze_lower_layers <= static_cast<int>(layers.size()),
          "freeze_lower_layers exceeds the layer count");
  try {
    net_config(HormoneMode::single_hormone).validate();
  } catch (const ShapeMismatch& e) {
    throw ConfigError(fmt::format("invalid network layers: {}", e.what()));
  }
}

bool TrainConfig::set(std::string_view key, std::string_view value) {
  if (key == "gamma") gamma = number<double>(key, value);
  else if (key == "exploration_steps") exploration_steps = number<std::int64_t>(key, value);
  else if (key == "target_period_general") target_period_general = number<std::int64_t>(key, value);
  else if (key == "target_period_personal") target_period_personal = number<std::int64_t>(key, value);
  else if (key == "batch_size") batch_size = number<int>(key, value);
  else if (key == "learning_rate") learning_rate = number<double>(key, value);
  else if (key == "window") window = number<int>(key, value);
  else if (key == "buffer_size") buffer_size = number<std::size_t>(key, value);
  else if (key == "alpha") alpha = number<double>(key, value);
  else if (key == "epsilon_prime") epsilon_prime = number<double>(key, value);
  else if (key == "beta_start") beta_start = number<double>(key, value);
  else if (key == "beta_end") beta_end = number<double>(key, value);
  else if (key == "lambda1") lambda1 = number<double>(key, value);
  else if (key == "lambda2") lambda2 = number<double>(key, value);
  else if (key == "epsilon_start") epsilon_start = number<double>(key, value);
  else if (key == "epsilon_end") epsilon_end = number<double>(key, value);
  else if (key == "epsilon_personal") epsilon_personal = number<double>(key, value);
  else if (key == "nstep") nstep = number<int>(key, value);
  else if (key == "generalized_days") generalized_days = number<int>(key, value);
  else if (key == "personalized_days") personalized_days = number<int>(key, value);
  else if (key == "test_days") test_days = number<int>(key, value);
  else if (key == "freeze_lower_layers") freeze_lower_layers = number<int>(key, value);
  else if (key == "seed") seed = number<std::uint64_t>(key, value);
  else if (key == "reward_scheme") {
    try {
      reward = reward_scheme_from_int(number<int>(key, value));
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  } else if (key == "cell_type") {
    cell = parse_cell_type(trim(value));
  } else if (key == "layers") {
    layers = parse_layers(value);
  } else {
    return false;
  }
  return true;
}

void TrainConfig::to_doc(KeyValueDoc& doc) const {
  doc.set("gamma", gamma);
  doc.set("exploration_steps", exploration_steps);
  doc.set("target_period_general", target_period_general);
  doc.set("target_period_personal", target_period_personal);
  doc.set("batch_size", batch_size);
  doc.set("learning_rate", learning_rate);
  doc.set("window", window);
  doc.set("buffer_size", static_cast<std::uint64_t>(buffer_size));
  doc.set("alpha", alpha);
  doc.set("epsilon_prime", epsilon_prime);
  doc.set("beta_start", beta_start);
  doc.set("beta_end", beta_end);
  doc.set("lambda1", lambda1);
  doc.set("lambda2", lambda2);
  doc.set("epsilon_start", epsilon_start);
  doc.set("epsilon_end", epsilon_end);
  doc.set("epsilon_personal", epsilon_personal);
  doc.set("nstep", nstep);
  doc.set("generalized_days", generalized_days);
  doc.set("personalized_days", personalized_days);
  doc.set("test_days", test_days);
  doc.set("freeze_lower_layers", freeze_lower_layers);
  doc.set("cell_type", std::string(to_string(cell)));
  doc.set("layers", layers_to_string(layers));
  doc.set("reward_scheme", static_cast<int>(reward));
  doc.set("seed", seed);
}

TrainConfig TrainConfig::from_doc(const KeyValueDoc& doc) {
  TrainConfig c;
  for (const auto& [k, v] : doc.entries()) {
    if (!c.set(k, v)) throw ConfigError(fmt::format("unknown training key '{}'", k));
  }
  c.validate();
  return c;
}

QNetConfig TrainConfig::net_config(HormoneMode mode) const {
  QNetConfig q;
  q.window = window;
  q.layers = layers;
  q.cell = cell;
  q.output_dim = mode == HormoneMode::dual_hormone ? 6 : 5;
  return q;
}

const char* to_string(TrainPhase p) { return p == TrainPhase::generalized ? "generalized" : "personalized"; }

std::string progress_csv(const std::vector<ProgressRow>& rows) {
  std::string out = "step,episode,episode_reward,day_reward,running_tir,loss,epsilon,beta\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{},{},{},{}\n", r.step, r.episode, r.episode_reward, r.day_reward, r.running_tir,
                       r.loss, r.epsilon, r.beta);
  }
  return out;
}

// Trainer ---------------------------------------------------------------------

Trainer Trainer::generalized(const TrainConfig& config, HormoneMode mode, Cohort cohort) {
  config.validate();
  Trainer t;
  t.phase_ = TrainPhase::generalized;
  t.mode_ = mode;
  t.cohort_ = cohort;
  t.config_ = config;
  const auto params = average_subject(cohort);
  const int days = config.generalized_days;
  EnvOptions opts;
  opts.space = mode == HormoneMode::dual_hormone ? ActionSpace::dual() : ActionSpace::single();
  opts.reward = config.reward;
  opts.window = config.window;
  t.env_ = std::make_unique<GlucoseEnv>(
      params, generate_scenario(params, days, derive_seed(config.seed, SeedStream::general_scenario)), opts);
  t.theta1_ = QNetWeights::random(config.net_config(mode), derive_seed(config.seed, SeedStream::network_init));
  t.theta2_ = t.theta1_;
  t.adam_ = AdamState::for_weights(t.theta1_, config.learning_rate);
  t.memory_ = ReplayMemory({config.buffer_size, config.alpha, config.epsilon_prime});
  t.accumulator_ = NStepAccumulator(config.nstep, config.gamma);
  t.rng_.seed(derive_seed(config.seed, SeedStream::general_rng));
  t.total_steps_ = static_cast<std::int64_t>(days) * kStepsPerDay;
  return t;
}

Trainer Trainer::personalized(const Trainer& general, const PatientParams& subject, int subject_index) {
  if (general.phase_ != TrainPhase::generalized) {
    throw ConfigError("personalized training must start from a generalized checkpoint");
  }
  if (subject.cohort != general.cohort_) {
    throw ConfigError(fmt::format("subject {} is not in the {} cohort of the checkpoint", subject.subject_id,
                                  to_string(general.cohort_)));
  }
  Trainer t;
  t.phase_ = TrainPhase::personalized;
  t.mode_ = general.mode_;
  t.cohort_ = general.cohort_;
  t.subject_index_ = subject_index;
  t.config_ = general.config_;
  const auto& cfg = t.config_;
  const int days = cfg.personalized_days;
  EnvOptions opts = general.env_->options();
  const auto idx = static_cast<std::uint64_t>(subject_index);
  t.env_ = std::make_unique<GlucoseEnv>(
      subject, generate_scenario(subject, days, derive_seed(cfg.seed, SeedStream::personal_scenario, idx)), opts);
  t.theta1_ = general.theta1_;
  t.theta2_ = general.theta2_;
  t.adam_ = AdamState::for_weights(t.theta1_, cfg.learning_rate);
  if (cfg.freeze_lower_layers > 0) t.mask_ = freeze_mask(t.theta1_.config(), cfg.freeze_lower_layers);

  // The generalized memory, including transitions still waiting for their
  // n-step window, becomes the replaceable pool.
  t.memory_ = general.memory_;
  auto tail = general.accumulator_;
  for (auto& tr : tail.flush()) t.memory_.push(std::move(tr));
  t.memory_.relabel_as_pool();

  t.accumulator_ = NStepAccumulator(cfg.nstep, cfg.gamma);
  t.rng_.seed(derive_seed(cfg.seed, SeedStream::personal_rng, idx));
  t.total_steps_ = static_cast<std::int64_t>(days) * kStepsPerDay;
  return t;
}

double Trainer::epsilon() const {
  if (phase_ == TrainPhase::personalized) return config_.epsilon_personal;
  return LinearSchedule{config_.epsilon_start, config_.epsilon_end, total_steps_ / 2}.at(steps_);
}

double Trainer::beta() const {
  if (phase_ == TrainPhase::generalized) return 0.0;
  return LinearSchedule{config_.beta_start, config_.beta_end, total_steps_}.at(steps_);
}

void Trainer::store(const Transition& t) {
  for (auto& done : accumulator_.add(t)) memory_.push(std::move(done));
}

void Trainer::learn() {
  const auto batch = static_cast<std::size_t>(config_.batch_size);
  if (memory_.size() < batch) return;
  const bool personal = phase_ == TrainPhase::personalized;
  const auto sample = personal ? memory_.sample(batch, beta(), rng_) : memory_.sample_uniform(batch, rng_);
  std::vector<const Transition*> items;
  items.reserve(batch);
  for (auto i : sample.indices) items.push_back(&memory_.at(i));
  LossWeights lw{config_.gamma, 0.0, 0.0};
  if (personal) {
    lw.lambda1 = config_.lambda1;
    lw.lambda2 = config_.lambda2;
  }
  const auto res = combined_loss(items, sample.is_weights, theta1_, theta2_, lw);
  if (personal) memory_.update_priorities(sample.indices, res.td_error);
  adam_step(theta1_, res.gradient, adam_, mask_.empty() ? nullptr : &mask_);
  if (!theta1_.all_finite()) throw NumericalBlowup(fmt::format("non-finite weights after step {}", steps_));
  ++gradient_steps_;
  day_loss_ += res.loss;
  ++day_loss_count_;
}

void Trainer::step() {
  if (finished()) return;
  const double eps = epsilon();
  const bool personal = phase_ == TrainPhase::personalized;
  Transition tr;
  tr.o = env_->observation();
  tr.episode = env_->episode();
  tr.step = env_->episode_step();
  const int action = epsilon_greedy(forward(theta1_, tr.o), eps, rng_);
  const SafetyConstraints gate;
  last_ = env_->step(action, personal ? &gate : nullptr);
  ++steps_;

  tr.a = last_.action;
  tr.r = last_.reward;
  tr.o_next = env_->observation();
  tr.done = last_.done;
  tr.source = personal ? TransitionSource::policy_generated : TransitionSource::generalized_pool;
  store(tr);

  episode_reward_ += last_.reward;
  day_reward_ += last_.reward;
  day_in_range_ += in_range(last_.cgm) ? 1 : 0;

  if (personal || steps_ > config_.exploration_steps) learn();
  const auto period = personal ? config_.target_period_personal : config_.target_period_general;
  if (steps_ % period == 0) theta2_ = theta1_;

  if (steps_ % kStepsPerDay == 0) record_day();
  if (last_.done) {
    env_->restart();
    episode_reward_ = 0.0;
  }
}

void Trainer::record_day() {
  ProgressRow row;
  row.step = steps_;
  row.episode = env_->episode();
  row.episode_reward = episode_reward_;
  row.day_reward = day_reward_;
  row.running_tir = 100.0 * static_cast<double>(day_in_range_) / kStepsPerDay;
  row.loss = day_loss_count_ > 0 ? day_loss_ / static_cast<double>(day_loss_count_) : 0.0;
  row.epsilon = epsilon();
  row.beta = beta();
  progress_.push_back(row);
  day_reward_ = 0.0;
  day_in_range_ = 0;
  day_loss_ = 0.0;
  day_loss_count_ = 0;
}

void Trainer::run(const std::function<void(const ProgressRow&)>& on_day) {
  while (!finished()) {
    const auto rows = progress_.size();
    step();
    if (on_day && progress_.size() > rows) on_day(progress_.back());
  }
}

void Trainer::save(BinaryWriter& w) const {
  w.write(kCheckpointMagic);
  w.write(kCheckpointVersion);
  w.write<std::int32_t>(static_cast<std::int32_t>(phase_));
  w.write<std::int32_t>(static_cast<std::int32_t>(mode_));
  w.write<std::int32_t>(static_cast<std::int32_t>(cohort_));
  w.write<std::int32_t>(subject_index_);
  KeyValueDoc cfg;
  config_.to_doc(cfg);
  w.write_string(cfg.str());
  w.write_string(env_->params().to_doc().str());
  w.write_string(env_->patient().scenario().to_doc().str());
  env_->save(w);
  theta1_.save(w);
  theta2_.save(w);
  adam_.save(w);
  memory_.save(w);
  accumulator_.save(w);
  w.write_string(rng_state(rng_));
  w.write(steps_);
  w.write(total_steps_);
  w.write(gradient_steps_);
  w.write(episode_reward_);
  w.write(day_reward_);
  w.write(day_in_range_);
  w.write(day_loss_);
  w.write(day_loss_count_);
  w.write<std::uint64_t>(progress_.size());
  for (const auto& r : progress_) {
    w.write(r.step);
    w.write(r.episode);
    w.write(r.episode_reward);
    w.write(r.day_reward);
    w.write(r.running_tir);
    w.write(r.loss);
    w.write(r.epsilon);
    w.write(r.beta);
  }
}

Trainer Trainer::load(BinaryReader& r) {
  if (r.read<std::uint32_t>() != kCheckpointMagic) throw FormatError("not a training checkpoint");
  if (r.read<std::uint32_t>() != kCheckpointVersion) throw FormatError("unsupported checkpoint version");
  Trainer t;
  const auto phase = r.read<std::int32_t>();
  const auto mode = r.read<std::int32_t>();
  const auto cohort = r.read<std::int32_t>();
  if (phase < 0 || phase > 1 || mode < 0 || mode > 1 || cohort < 0 || cohort > 1) {
    throw FormatError("corrupt checkpoint header");
  }
  t.phase_ = static_cast<TrainPhase>(phase);
  t.mode_ = static_cast<HormoneMode>(mode);
  t.cohort_ = static_cast<Cohort>(cohort);
  t.subject_index_ = r.read<std::int32_t>();
  t.config_ = TrainConfig::from_doc(KeyValueDoc::parse(r.read_string()));
  auto params = PatientParams::from_doc(KeyValueDoc::parse(r.read_string()));
  auto scenario = Scenario::from_doc(KeyValueDoc::parse(r.read_string()));
  EnvOptions opts;
  opts.space = t.mode_ == HormoneMode::dual_hormone ? ActionSpace::dual() : ActionSpace::single();
  opts.reward = t.config_.reward;
  opts.window = t.config_.window;
  t.env_ = std::make_unique<GlucoseEnv>(std::move(params), std::move(scenario), opts);
  t.env_->load(r);
  t.theta1_ = QNetWeights::load(r);
  t.theta2_ = QNetWeights::load(r);
  if (!(t.theta1_.config() == t.theta2_.config()) || !(t.theta1_.config() == t.config_.net_config(t.mode_))) {
    throw ShapeMismatch("checkpoint networks disagree with their config");
  }
  t.adam_ = AdamState::load(r);
  t.memory_ = ReplayMemory::load(r);
  t.accumulator_.load(r);
  restore_rng(t.rng_, r.read_string());
  t.steps_ = r.read<std::int64_t>();
  t.total_steps_ = r.read<std::int64_t>();
  t.gradient_steps_ = r.read<std::int64_t>();
  t.episode_reward_ = r.read<double>();
  t.day_reward_ = r.read<double>();
  t.day_in_range_ = r.read<std::int64_t>();
  t.day_loss_ = r.read<double>();
  t.day_loss_count_ = r.read<std::int64_t>();
  t.progress_.resize(r.read_size(1u << 24));
  for (auto& row : t.progress_) {
    row.step = r.read<std::int64_t>();
    row.episode = r.read<std::int64_t>();
    row.episode_reward = r.read<double>();
    row.day_reward = r.read<double>();
    row.running_tir = r.read<double>();
    row.loss = r.read<double>();
    row.epsilon = r.read<double>();
    row.beta = r.read<double>();
  }
  if (t.phase_ == TrainPhase::personalized && t.config_.freeze_lower_layers > 0) {
    t.mask_ = freeze_mask(t.theta1_.config(), t.config_.freeze_lower_layers);
  }
  return t;
}

void Trainer::save(const std::filesystem::path& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw MissingInput("cannot write " + path.string());
  BinaryWriter w(f);
  save(w);
  if (!f) throw MissingInput("failed writing " + path.string());
}

Trainer Trainer::load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw MissingInput("cannot open " + path.string());
  BinaryReader r(f);
  return load(r);
}

// Evaluation rollouts ---------------------------------------------------------

Controller lgs_controller() { return {"LGS", ActionSpace::single(), nullptr, {}}; }

Controller drl_controller(const QNetWeights& net, HormoneMode mode) {
  Controller c;
  c.tag = mode == HormoneMode::dual_hormone ? "DRL-DH" : "DRL-SH";
  c.space = mode == HormoneMode::dual_hormone ? ActionSpace::dual() : ActionSpace::single();
  c.net = &net;
  if (net.config().output_dim != c.space.size()) {
    throw ShapeMismatch(fmt::format("network has {} outputs, {} needs {}", net.config().output_dim, c.tag,
                                    c.space.size()));
  }
  return c;
}

Trace rollout(const Controller& controller, const PatientParams& params, const Scenario& scenario, int days,
              RewardScheme reward, SimOptions sim) {
  if (days <= 0 || days > scenario.days) {
    throw ConfigError(fmt::format("rollout of {} days on a {}-day scenario", days, scenario.days));
  }
  EnvOptions opts;
  opts.space = controller.space;
  opts.reward = reward;
  opts.sim = sim;
  if (controller.net != nullptr) opts.window = controller.net->config().window;
  GlucoseEnv env(params, scenario, opts);
  Trace trace;
  trace.subject_id = params.subject_id;
  trace.controller = controller.tag;
  const auto steps = static_cast<std::size_t>(days) * kStepsPerDay;
  trace.records.reserve(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    StepOutcome out;
    if (controller.net == nullptr) {
      out = env.step(lgs_action(env.cgm()));
    } else {
      out = env.step(greedy_action(forward(*controller.net, env.observation())), &controller.gate);
    }
    trace.records.push_back({out.t_min, out.cgm, out.plasma_glucose, out.basal_u_per_h, out.bolus_u,
                             out.glucagon_mg, out.carbs_true, out.reward, out.action});
  }
  return trace;
}

Scenario test_scenario(const TrainConfig& config, const PatientParams& params, int index) {
  return generate_scenario(params, config.test_days,
                           derive_seed(config.seed, SeedStream::test_scenario, static_cast<std::uint64_t>(index)));
}

}  // namespace glucorl
