#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "szc/dynamics.hpp"
#include "szc/geometry.hpp"
#include "szc/neural.hpp"
#include "szc/protocol.hpp"

namespace szc {

// Discrete barrier-rate actions +-2^n for n = 1..10 (E0*L per second),
// ascending; the ordering indexes the 20 Q-network outputs.
std::array<double, 20> discrete_actions();

struct TrainingConfig {
  double duration = 5.0;   // T, seconds
  int n_steps = 10;        // N_t actions per episode
  double alpha_max = 800.0;  // E0*L
  double sigma = 0.05;     // terminal reward width
  double gamma = 0.99;
  double learning_rate = 1e-3;
  double tau = 1e-3;
  int episodes = 2000;
  double eps_initial = 1.0;
  double eps_final = 0.05;
  double eps_anneal_fraction = 0.8;  // of the episode budget
  int batch_size = 32;
  int replay_capacity = 0;       // 0: 20% of episodes * n_steps
  int warmup_experiences = 500;  // gradient steps start once the buffer holds this many
  int eval_every = 50;           // deterministic evaluation cadence, episodes
  std::vector<double> asymmetries{0.02};
  std::uint64_t seed = 1;
  SpbGeometry geometry{};  // offset replaced by the episode's d
  PropagateOptions train_propagate;   // n_micro == 0: train_fidelity(T)
  PropagateOptions report_propagate;  // n_micro == 0: report_fidelity(T)
  // DDPG
  double action_bound = 1000.0;      // |alpha_dot| clip, E0*L/s
  double noise_sigma_initial = 0.3;  // fraction of action_bound
  double noise_sigma_final = 1e-4;
  int max_terminal_retries = 3;

  static std::vector<double> spaced_asymmetries(double d_min, double d_max, int count);
  void validate() const;
};

struct EnvState {
  double alpha = 0.0;  // E0*L
  double t = 0.0;
  int step = 0;  // k of N_t
  double d = 0.0;
};

struct Experience {
  Eigen::Vector2d state;      // normalized (alpha/alpha_max, t/T)
  int action = 0;             // index into discrete_actions() (DQN)
  double action_value = 0.0;  // continuous alpha_dot (DDPG)
  double reward = 0.0;
  Eigen::Vector2d next_state;
  bool done = false;
};

// Fixed-capacity experience memory; new entries replace the oldest ones.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);
  void push(Experience e);
  const Experience& sample(std::mt19937_64& rng) const;  // uniform, with replacement
  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }

 private:
  std::vector<Experience> data_;
  std::size_t capacity_ = 0;
  std::size_t next_ = 0;  // overwrite cursor once full
};

// Terminal reward 100 exp(-sum_{n=1,2} (|c_n(T)|^2 - 1/2)^2 / sigma).
double terminal_reward(const Eigen::VectorXd& final_occupations, double sigma);

// The single-particle-box episode: each action appends a knot to alpha(t);
// out-of-range moves are clamped and punished with -10; the terminal step
// spline-interpolates the visited knots and scores the propagated state.
class SpbEnv {
 public:
  explicit SpbEnv(const TrainingConfig& config);

  // Draws the episode asymmetry uniformly from the configured set.
  EnvState reset(std::mt19937_64& rng);
  EnvState reset_with_asymmetry(double d);

  struct StepResult {
    EnvState state;
    double reward = 0.0;
    bool done = false;
    bool clamped = false;
  };
  // Throws ConvergenceError if the terminal dynamics solve fails.
  StepResult step(double alpha_dot);

  Eigen::Vector2d normalized(const EnvState& s) const;
  const EnvState& state() const { return state_; }
  double dt() const { return config_.duration / config_.n_steps; }
  const std::vector<double>& knot_times() const { return knot_t_; }
  const std::vector<double>& knot_alphas() const { return knot_alpha_; }
  // Occupations behind the most recent terminal reward.
  const Eigen::VectorXd& last_terminal_occupations() const { return last_occupations_; }

 private:
  TrainingConfig config_;
  PropagateOptions propagate_options_;
  EnvState state_;
  std::vector<double> knot_t_, knot_alpha_;
  Eigen::VectorXd last_occupations_;
};

// Epsilon-greedy action choice; greedy ties break toward the lowest index.
int dqn_select_action(const DenseNet& qnet, const Eigen::Vector2d& state, double epsilon,
                      std::mt19937_64& rng);

// One Q-learning step on a batch: y = r + gamma max_a' Q_target(s', a') (y = r
// at terminal), squared error on the taken action's output only.
void dqn_train_step(DenseNet& qnet, const DenseNet& target_net, std::span<const Experience> batch,
                    const TrainingConfig& config, AdamState& adam);

struct EpisodeStat {
  int episode = 0;
  double cumulative_reward = 0.0;
  double exploration = 0.0;  // epsilon (DQN) or noise sigma (DDPG)
};

struct TrainResult {
  Protocol protocol;  // best deterministic protocol, spline-interpolated
  std::vector<double> knot_times, knot_alphas;
  std::vector<EpisodeStat> history;
  DenseNet policy;                // Q-network (DQN) or actor (DDPG)
  std::optional<DenseNet> critic;  // DDPG
  double best_score = 0.0;   // mean cost over the asymmetry set, train fidelity
  double report_cost = 0.0;  // mean cost over the asymmetry set, report fidelity
  double report_terminal_reward = 0.0;  // mean terminal reward, report fidelity
  Eigen::VectorXd report_occupations;   // at the median asymmetry
  int discarded_episodes = 0;
};

TrainResult dqn_train(const TrainingConfig& config);

// Actor output is tanh-saturated to +-action_bound by construction.
double ddpg_actor_action(const DenseNet& actor, const Eigen::Vector2d& state);

// Gaussian exploration noise with standard deviation sigma_fraction *
// action_bound, re-clipped to the bound.
double ddpg_explore(double action, double sigma_fraction, double action_bound,
                    std::mt19937_64& rng);

// Critic regressed on y = r + gamma Q_target(s', mu_target(s')); actor ascends
// the batch mean of grad_phi mu(s) * dQ/da at a = mu(s).
void ddpg_train_step(DenseNet& actor, DenseNet& critic, const DenseNet& actor_target,
                     const DenseNet& critic_target, std::span<const Experience> batch,
                     const TrainingConfig& config, AdamState& actor_adam, AdamState& critic_adam);

TrainResult ddpg_train(const TrainingConfig& config);

struct RobustEvaluation {
  double mean_cost = 0.0;  // over rows that converged
  int failed_rows = 0;
  std::vector<SweepRow> rows;
};

// Sweeps the protocol over n_samples asymmetries spanning [d_min, d_max] and
// averages the cost: the robustness score of a protocol.
RobustEvaluation evaluate_robust(const Protocol& protocol, const SpbGeometry& geometry_template,
                                 double d_min, double d_max, int n_samples,
                                 const PropagateOptions& options);

}  // namespace szc
