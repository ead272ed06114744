#include "szc/agents.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "szc/errors.hpp"

namespace szc {

namespace {

constexpr int kQnetArch[] = {2, 24, 48, 24, 20};
constexpr int kActorArch[] = {2, 24, 48, 24, 1};
constexpr int kCriticArch[] = {3, 24, 48, 24, 1};

std::mt19937_64 seeded_stream(std::uint64_t seed, std::uint64_t tag) {
  std::seed_seq seq{seed, tag};
  return std::mt19937_64(seq);
}

double epsilon_at(const TrainingConfig& c, int episode) {
  const double span = std::max(1.0, c.eps_anneal_fraction * c.episodes);
  const double frac = std::min(1.0, episode / span);
  return c.eps_initial + frac * (c.eps_final - c.eps_initial);
}

double noise_sigma_at(const TrainingConfig& c, int episode) {
  if (c.episodes <= 1) return c.noise_sigma_initial;
  const double frac = static_cast<double>(episode) / (c.episodes - 1);
  return c.noise_sigma_initial + frac * (c.noise_sigma_final - c.noise_sigma_initial);
}

PropagateOptions resolved_train_options(const TrainingConfig& c) {
  PropagateOptions o = c.train_propagate;
  if (o.n_micro == 0) o = train_fidelity(c.duration);
  return o;
}

PropagateOptions resolved_report_options(const TrainingConfig& c) {
  PropagateOptions o = c.report_propagate;
  if (o.n_micro == 0) o = report_fidelity(c.duration);
  return o;
}

struct KnotEvaluation {
  double mean_cost = -1.0;
  double mean_reward = 0.0;
  Eigen::VectorXd occ_median;
  bool ok = false;
};

// Mean cost / terminal reward of a knot protocol over the asymmetry set.
KnotEvaluation evaluate_knots(const std::vector<double>& t, const std::vector<double>& a,
                              const TrainingConfig& config, PropagateOptions options) {
  KnotEvaluation ev;
  options.record_trajectory = false;
  const Protocol protocol = Protocol::from_knots(t, a);
  double cost_acc = 0.0, reward_acc = 0.0;
  const std::size_t median = config.asymmetries.size() / 2;
  try {
    for (std::size_t i = 0; i < config.asymmetries.size(); ++i) {
      SpbGeometry g = config.geometry;
      g.offset = config.asymmetries[i];
      const PropagationResult run =
          propagate(ground_state(0.0, options.n_basis), protocol, g, options);
      const Eigen::VectorXd occ = occupations(run.final_state);
      cost_acc += crab_cost(occ);
      reward_acc += terminal_reward(occ, config.sigma);
      if (i == median) ev.occ_median = occ;
    }
  } catch (const ConvergenceError&) {
    return ev;  // not scored
  }
  ev.mean_cost = cost_acc / config.asymmetries.size();
  ev.mean_reward = reward_acc / config.asymmetries.size();
  ev.ok = true;
  return ev;
}

// Knot sequence of a deterministic policy rollout.  The policy sees only
// (alpha, t), so the knots do not depend on the episode asymmetry.
template <typename PolicyFn>
std::pair<std::vector<double>, std::vector<double>> greedy_rollout(const TrainingConfig& config,
                                                                   PolicyFn&& alpha_dot_of) {
  const double dt = config.duration / config.n_steps;
  std::vector<double> t{0.0}, a{0.0};
  double alpha = 0.0;
  for (int k = 0; k < config.n_steps; ++k) {
    const Eigen::Vector2d s(alpha / config.alpha_max, (k * dt) / config.duration);
    alpha = std::clamp(alpha + alpha_dot_of(s) * dt, 0.0, config.alpha_max);
    t.push_back((k + 1) * dt);
    a.push_back(alpha);
  }
  t.back() = config.duration;
  return {std::move(t), std::move(a)};
}

// Shared episode loop.  `act` maps (episode, normalized state) to an action;
// `learn` consumes a replay batch once the buffer is warm.
template <typename ActFn, typename LearnFn, typename GreedyFn>
TrainResult run_training(const TrainingConfig& config, ActFn&& act, LearnFn&& learn,
                         ReplayBuffer& buffer, std::mt19937_64& env_rng,
                         std::mt19937_64& replay_rng, GreedyFn&& greedy_policy) {
  TrainResult result;
  const PropagateOptions train_opts = resolved_train_options(config);
  SpbEnv env(config);
  std::vector<Experience> batch(config.batch_size);

  double best_score = -std::numeric_limits<double>::infinity();
  std::vector<double> best_t, best_a;

  for (int ep = 0; ep < config.episodes; ++ep) {
    int retries = 0;
    while (true) {
      env.reset(env_rng);
      double cumulative = 0.0;
      bool failed = false;
      for (int k = 0; k < config.n_steps; ++k) {
        const Eigen::Vector2d s = env.normalized(env.state());
        const auto [action_index, action_value] = act(ep, s);
        SpbEnv::StepResult st;
        try {
          st = env.step(action_value);
        } catch (const ConvergenceError&) {
          failed = true;  // terminal solve did not converge: discard episode
          break;
        }
        Experience e;
        e.state = s;
        e.action = action_index;
        e.action_value = action_value;
        e.reward = st.reward;
        e.next_state = env.normalized(st.state);
        e.done = st.done;
        buffer.push(std::move(e));
        cumulative += st.reward;
        if (buffer.size() >= static_cast<std::size_t>(config.warmup_experiences) &&
            buffer.size() >= static_cast<std::size_t>(config.batch_size)) {
          for (int b = 0; b < config.batch_size; ++b) batch[b] = buffer.sample(replay_rng);
          learn(std::span<const Experience>(batch));
        }
      }
      if (!failed) {
        result.history.push_back({ep, cumulative, 0.0});  // exploration filled by caller
        break;
      }
      ++result.discarded_episodes;
      if (++retries > config.max_terminal_retries)
        throw ConvergenceError(
            "training: terminal propagation kept failing; raise the train-fidelity budget");
    }

    if ((ep + 1) % config.eval_every == 0 || ep + 1 == config.episodes) {
      auto [kt, ka] = greedy_rollout(config, greedy_policy);
      const KnotEvaluation ev = evaluate_knots(kt, ka, config, train_opts);
      if (ev.ok && ev.mean_cost > best_score) {
        best_score = ev.mean_cost;
        best_t = std::move(kt);
        best_a = std::move(ka);
      }
    }
  }

  if (best_t.empty()) {
    // no evaluation rollout converged; keep the final greedy rollout unscored
    auto [kt, ka] = greedy_rollout(config, greedy_policy);
    best_t = std::move(kt);
    best_a = std::move(ka);
    best_score = -1.0;
  }

  PropagateOptions report_opts = resolved_report_options(config);
  report_opts.norm_tolerance = 0.0;
  const KnotEvaluation rep = evaluate_knots(best_t, best_a, config, report_opts);
  result.protocol = Protocol::from_knots(best_t, best_a);
  result.knot_times = std::move(best_t);
  result.knot_alphas = std::move(best_a);
  result.best_score = best_score;
  result.report_cost = rep.mean_cost;
  result.report_terminal_reward = rep.mean_reward;
  result.report_occupations = rep.occ_median;
  return result;
}

}  // namespace

std::array<double, 20> discrete_actions() {
  std::array<double, 20> v{};
  for (int n = 1; n <= 10; ++n) {
    v[10 - n] = -std::pow(2.0, n);  // -1024 ... -2
    v[9 + n] = std::pow(2.0, n);    // +2 ... +1024
  }
  return v;
}

std::vector<double> TrainingConfig::spaced_asymmetries(double d_min, double d_max, int count) {
  if (count < 1) throw std::domain_error("spaced_asymmetries: count must be >= 1");
  if (d_max < d_min) throw std::domain_error("spaced_asymmetries: d_max < d_min");
  std::vector<double> out(count);
  if (count == 1) {
    out[0] = 0.5 * (d_min + d_max);
    return out;
  }
  for (int i = 0; i < count; ++i)
    out[i] = d_min + (d_max - d_min) * static_cast<double>(i) / (count - 1);
  return out;
}

void TrainingConfig::validate() const {
  geometry.validate();
  if (!(duration > 0)) throw std::domain_error("TrainingConfig: duration must be positive");
  if (n_steps < 1) throw std::domain_error("TrainingConfig: n_steps must be >= 1");
  if (!(alpha_max > 0)) throw std::domain_error("TrainingConfig: alpha_max must be positive");
  if (!(sigma > 0)) throw std::domain_error("TrainingConfig: sigma must be positive");
  if (!(gamma >= 0 && gamma <= 1))
    throw std::domain_error("TrainingConfig: gamma must be in [0,1]");
  if (episodes < 1) throw std::domain_error("TrainingConfig: episodes must be >= 1");
  if (batch_size < 1) throw std::domain_error("TrainingConfig: batch_size must be >= 1");
  if (eps_final > eps_initial)
    throw std::domain_error("TrainingConfig: eps_final must not exceed eps_initial");
  if (asymmetries.empty()) throw std::domain_error("TrainingConfig: empty asymmetry set");
  for (double d : asymmetries) {
    SpbGeometry g = geometry;
    g.offset = d;
    g.validate();
  }
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::domain_error("ReplayBuffer: zero capacity");
  data_.reserve(capacity);
}

void ReplayBuffer::push(Experience e) {
  if (data_.size() < capacity_) {
    data_.push_back(std::move(e));
    return;
  }
  data_[next_] = std::move(e);  // oldest-first eviction
  next_ = (next_ + 1) % capacity_;
}

const Experience& ReplayBuffer::sample(std::mt19937_64& rng) const {
  if (data_.empty()) throw std::domain_error("ReplayBuffer: sampling from an empty buffer");
  std::uniform_int_distribution<std::size_t> pick(0, data_.size() - 1);
  return data_[pick(rng)];
}

double terminal_reward(const Eigen::VectorXd& final_occupations, double sigma) {
  const double d1 = final_occupations[0] - 0.5;
  const double d2 = final_occupations[1] - 0.5;
  return 100.0 * std::exp(-(d1 * d1 + d2 * d2) / sigma);
}

SpbEnv::SpbEnv(const TrainingConfig& config) : config_(config) {
  config_.validate();
  propagate_options_ = resolved_train_options(config_);
  propagate_options_.record_trajectory = false;
  reset_with_asymmetry(config_.asymmetries.front());
}

EnvState SpbEnv::reset(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, config_.asymmetries.size() - 1);
  return reset_with_asymmetry(config_.asymmetries[pick(rng)]);
}

EnvState SpbEnv::reset_with_asymmetry(double d) {
  state_ = EnvState{0.0, 0.0, 0, d};
  knot_t_.assign(1, 0.0);
  knot_alpha_.assign(1, 0.0);
  return state_;
}

Eigen::Vector2d SpbEnv::normalized(const EnvState& s) const {
  return {s.alpha / config_.alpha_max, s.t / config_.duration};
}

SpbEnv::StepResult SpbEnv::step(double alpha_dot) {
  if (state_.step >= config_.n_steps)
    throw std::domain_error("SpbEnv: episode is over, reset first");

  const double unclamped = state_.alpha + alpha_dot * dt();
  const double alpha = std::clamp(unclamped, 0.0, config_.alpha_max);
  const bool clamped = alpha != unclamped;

  state_.alpha = alpha;
  state_.step += 1;
  state_.t = state_.step * dt();
  knot_t_.push_back(state_.step == config_.n_steps ? config_.duration : state_.t);
  knot_alpha_.push_back(alpha);

  StepResult out;
  out.clamped = clamped;
  out.done = state_.step == config_.n_steps;
  if (out.done) {
    SpbGeometry g = config_.geometry;
    g.offset = state_.d;
    const Protocol protocol = Protocol::from_knots(knot_t_, knot_alpha_);
    const PropagationResult run =
        propagate(ground_state(0.0, propagate_options_.n_basis), protocol, g, propagate_options_);
    last_occupations_ = occupations(run.final_state);
    out.reward = terminal_reward(last_occupations_, config_.sigma);
  } else {
    out.reward = clamped ? -10.0 : 0.0;
  }
  out.state = state_;
  return out;
}

int dqn_select_action(const DenseNet& qnet, const Eigen::Vector2d& state, double epsilon,
                      std::mt19937_64& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0))
    throw std::domain_error("dqn_select_action: epsilon outside [0,1]");
  if (epsilon > 0.0) {
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    if (coin(rng) < epsilon) {
      std::uniform_int_distribution<int> pick(0, 19);
      return pick(rng);
    }
  }
  const Eigen::VectorXd q = forward(qnet, state);
  int best = 0;
  for (int i = 1; i < q.size(); ++i)
    if (q[i] > q[best]) best = i;  // ties keep the lowest index
  return best;
}

void dqn_train_step(DenseNet& qnet, const DenseNet& target_net, std::span<const Experience> batch,
                    const TrainingConfig& config, AdamState& adam) {
  if (batch.empty()) throw std::domain_error("dqn_train_step: empty batch");
  Gradients grads = Gradients::zeros_like(qnet);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (const Experience& e : batch) {
    double y = e.reward;
    if (!e.done) {
      const Eigen::VectorXd qn = forward(target_net, e.next_state);
      y += config.gamma * qn.maxCoeff();
    }
    ForwardCache cache;
    const Eigen::VectorXd q = forward(qnet, e.state, &cache);
    Eigen::VectorXd dldy = Eigen::VectorXd::Zero(q.size());
    dldy[e.action] = 2.0 * (q[e.action] - y) * inv_b;  // loss on the taken action only
    backward_accumulate(qnet, cache, dldy, grads);
  }
  adam_step(qnet, grads, adam);  // rejects non-finite gradients
}

TrainResult dqn_train(const TrainingConfig& config) {
  config.validate();
  std::mt19937_64 net_rng = seeded_stream(config.seed, 1);
  std::mt19937_64 env_rng = seeded_stream(config.seed, 2);
  std::mt19937_64 action_rng = seeded_stream(config.seed, 3);
  std::mt19937_64 replay_rng = seeded_stream(config.seed, 4);

  DenseNet qnet = DenseNet::make(kQnetArch, net_rng);
  DenseNet target = qnet;
  AdamState adam = AdamState::like(qnet);
  adam.learning_rate = config.learning_rate;

  const int capacity = config.replay_capacity > 0
                           ? config.replay_capacity
                           : std::max(config.batch_size, config.episodes * config.n_steps / 5);
  ReplayBuffer buffer(static_cast<std::size_t>(capacity));
  const auto actions = discrete_actions();

  auto act = [&](int episode, const Eigen::Vector2d& s) {
    const int idx = dqn_select_action(qnet, s, epsilon_at(config, episode), action_rng);
    return std::pair<int, double>{idx, actions[idx]};
  };
  auto learn = [&](std::span<const Experience> batch) {
    dqn_train_step(qnet, target, batch, config, adam);
    soft_update(target, qnet, config.tau);
  };
  auto greedy = [&](const Eigen::Vector2d& s) {
    return actions[dqn_select_action(qnet, s, 0.0, action_rng)];
  };

  TrainResult result = run_training(config, act, learn, buffer, env_rng, replay_rng, greedy);
  for (auto& stat : result.history) stat.exploration = epsilon_at(config, stat.episode);
  result.policy = std::move(qnet);
  return result;
}

double ddpg_actor_action(const DenseNet& actor, const Eigen::Vector2d& state) {
  return forward(actor, state)[0];
}

double ddpg_explore(double action, double sigma_fraction, double action_bound,
                    std::mt19937_64& rng) {
  if (!(sigma_fraction >= 0.0)) throw std::domain_error("ddpg_explore: negative noise sigma");
  if (sigma_fraction > 0.0) {
    std::normal_distribution<double> noise(0.0, sigma_fraction * action_bound);
    action += noise(rng);
  }
  return std::clamp(action, -action_bound, action_bound);
}

void ddpg_train_step(DenseNet& actor, DenseNet& critic, const DenseNet& actor_target,
                     const DenseNet& critic_target, std::span<const Experience> batch,
                     const TrainingConfig& config, AdamState& actor_adam, AdamState& critic_adam) {
  if (batch.empty()) throw std::domain_error("ddpg_train_step: empty batch");
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const double bound = config.action_bound;

  Gradients critic_grads = Gradients::zeros_like(critic);
  Gradients actor_grads = Gradients::zeros_like(actor);
  Eigen::Vector3d critic_in;
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(1);

  for (const Experience& e : batch) {
    double y = e.reward;
    if (!e.done) {
      const double next_action = forward(actor_target, e.next_state)[0];
      critic_in << e.next_state[0], e.next_state[1], next_action / bound;
      y += config.gamma * forward(critic_target, critic_in)[0];
    }
    ForwardCache critic_cache;
    critic_in << e.state[0], e.state[1], e.action_value / bound;
    const double q = forward(critic, critic_in, &critic_cache)[0];
    backward_accumulate(critic, critic_cache,
                        Eigen::VectorXd::Constant(1, 2.0 * (q - y) * inv_b), critic_grads);

    // actor ascends Q(s, mu(s)); the critic sees actions scaled by the bound
    ForwardCache actor_cache;
    const double mu = forward(actor, e.state, &actor_cache)[0];
    ForwardCache q_cache;
    critic_in << e.state[0], e.state[1], mu / bound;
    forward(critic, critic_in, &q_cache);
    const Gradients dq = backward(critic, q_cache, one);
    const double dq_da = dq.input[2] / bound;
    backward_accumulate(actor, actor_cache, Eigen::VectorXd::Constant(1, -dq_da * inv_b),
                        actor_grads);
  }
  adam_step(critic, critic_grads, critic_adam);
  adam_step(actor, actor_grads, actor_adam);
}

TrainResult ddpg_train(const TrainingConfig& config) {
  config.validate();
  std::mt19937_64 net_rng = seeded_stream(config.seed, 11);
  std::mt19937_64 env_rng = seeded_stream(config.seed, 12);
  std::mt19937_64 noise_rng = seeded_stream(config.seed, 13);
  std::mt19937_64 replay_rng = seeded_stream(config.seed, 14);

  DenseNet actor =
      DenseNet::make(kActorArch, net_rng, OutputActivation::kTanhScaled, config.action_bound);
  DenseNet critic = DenseNet::make(kCriticArch, net_rng);
  DenseNet actor_target = actor;
  DenseNet critic_target = critic;
  AdamState actor_adam = AdamState::like(actor);
  AdamState critic_adam = AdamState::like(critic);
  actor_adam.learning_rate = config.learning_rate;
  critic_adam.learning_rate = config.learning_rate;

  const int capacity = config.replay_capacity > 0
                           ? config.replay_capacity
                           : std::max(config.batch_size, config.episodes * config.n_steps / 5);
  ReplayBuffer buffer(static_cast<std::size_t>(capacity));

  auto act = [&](int episode, const Eigen::Vector2d& s) {
    const double raw = ddpg_actor_action(actor, s);
    const double noisy =
        ddpg_explore(raw, noise_sigma_at(config, episode), config.action_bound, noise_rng);
    return std::pair<int, double>{0, noisy};
  };
  auto learn = [&](std::span<const Experience> batch) {
    ddpg_train_step(actor, critic, actor_target, critic_target, batch, config, actor_adam,
                    critic_adam);
    soft_update(actor_target, actor, config.tau);
    soft_update(critic_target, critic, config.tau);
  };
  auto greedy = [&](const Eigen::Vector2d& s) { return ddpg_actor_action(actor, s); };

  TrainResult result = run_training(config, act, learn, buffer, env_rng, replay_rng, greedy);
  for (auto& stat : result.history) stat.exploration = noise_sigma_at(config, stat.episode);
  result.policy = std::move(actor);
  result.critic = std::move(critic);
  return result;
}

RobustEvaluation evaluate_robust(const Protocol& protocol, const SpbGeometry& geometry_template,
                                 double d_min, double d_max, int n_samples,
                                 const PropagateOptions& options) {
  const std::vector<double> ds = TrainingConfig::spaced_asymmetries(d_min, d_max, n_samples);
  RobustEvaluation out;
  out.rows = sweep_protocol(protocol, geometry_template, ds, options);
  double acc = 0.0;
  int ok = 0;
  for (const SweepRow& row : out.rows) {
    if (!row.ok) {
      ++out.failed_rows;
      continue;
    }
    Eigen::VectorXd occ(2);
    occ << row.occ1, row.occ2;
    acc += crab_cost(occ);
    ++ok;
  }
  out.mean_cost = ok > 0 ? acc / ok : std::numeric_limits<double>::quiet_NaN();
  return out;
}

}  // namespace szc
