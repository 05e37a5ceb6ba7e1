#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "rex/ic.hpp"
#include "rex/kg.hpp"
#include "rex/matrix.hpp"

namespace rex {

struct EnvState {
  int current = -1;
  int hyp_subject = -1;
  int hyp_object = -1;
  int step = 0;
};

/// What the agent sees: its location, the hypothesis subject, and the
/// query relation. The hypothesis object stays hidden.
struct Observation {
  int current = -1;
  int hyp_subject = -1;
  int hyp_relation = -1;
};

/// Either an outgoing edge (relation, dest) or the stop decision.
struct Action {
  int relation = -1;
  int dest = -1;

  bool is_stop() const { return relation < 0; }
  static Action stop() { return Action{}; }
  static Action edge(int relation, int dest) { return Action{relation, dest}; }

  friend auto operator<=>(const Action&, const Action&) = default;
};

struct Trajectory {
  Hypothesis hypothesis;
  std::vector<Action> actions;       // includes the final STOP when taken
  std::vector<int> visited;          // entity sequence, starts at s_h
  std::vector<Observation> history;  // observation at each decision point
  bool terminal = false;
  bool success = false;  // final entity == hypothesis object

  double reward = 0.0;
  double fidelity = 0.0;
  double relevance = 0.0;

  int final_entity() const { return visited.back(); }
  std::size_t num_edges() const;
  Path to_path() const;
};

/// Training-time behaviour switches and hyperparameters. The ablation
/// variants toggle use_relevance / use_early_stop only.
struct RewardConfig {
  bool use_relevance = true;
  bool use_early_stop = true;
  int max_len = 3;
  int rollouts = 30;
  double baseline_decay = 0.95;
  double entropy_weight = 0.01;
  double learning_rate = 1e-3;
  std::uint64_t seed = 13;

  int epochs = 10;
  int batch_size = 8;
  int entity_dim = 32;
  int relation_dim = 32;
  int hidden_dim = 64;
  int mlp_hidden_dim = 64;
};

/// All learnable weights: embeddings, the recurrent history encoder
/// (single LSTM cell) and the two-layer action scorer. The embedding
/// tables carry dedicated rows for STOP, and the relation table one more
/// for the start-of-history input token.
struct PolicyParameters {
  int num_entities = 0;
  int num_relations = 0;
  int entity_dim = 0;
  int relation_dim = 0;
  int hidden_dim = 0;
  int mlp_hidden_dim = 0;

  Matrix entity_emb;    // (num_entities + 1) x entity_dim, last row = STOP
  Matrix relation_emb;  // (num_relations + 2) x relation_dim: STOP, START
  Matrix lstm_wx;       // 4H x (relation_dim + entity_dim)
  Matrix lstm_wh;       // 4H x H
  Vec lstm_b;           // 4H
  Matrix mlp_w1;        // M x (H + relation_dim)
  Vec mlp_b1;           // M
  Matrix mlp_w2;        // (relation_dim + entity_dim) x M
  Vec mlp_b2;           // relation_dim + entity_dim

  int stop_entity_row() const { return num_entities; }
  int stop_relation_row() const { return num_relations; }
  int start_relation_row() const { return num_relations + 1; }

  std::size_t parameter_count() const;

  /// Flat views used by the finite-difference checker.
  std::vector<double*> tensor_data();
  std::vector<const double*> tensor_data() const;
  std::vector<std::size_t> tensor_sizes() const;
};

/// Fresh parameters with seeded gaussian embeddings and zero-initialized
/// recurrent/scorer weights.
PolicyParameters init_policy(const KnowledgeGraph& kg, const RewardConfig& cfg);

/// Gradient buffers with the same shapes as PolicyParameters.
struct PolicyGradients {
  Matrix entity_emb, relation_emb, lstm_wx, lstm_wh, mlp_w1, mlp_w2;
  Vec lstm_b, mlp_b1, mlp_b2;

  explicit PolicyGradients(const PolicyParameters& p);
  void zero();
  std::vector<double*> tensor_data();
  std::vector<const double*> tensor_data() const;
  std::vector<std::size_t> tensor_sizes() const;
};

/// The sequence a decision at step t conditions on: the initial
/// observation plus every (action, observation) transition so far.
struct History {
  Observation initial;
  std::vector<std::pair<Action, Observation>> steps;
};

struct ActionDistribution {
  std::vector<Action> actions;
  std::vector<double> probs;
};

// --- environment -----------------------------------------------------------

EnvState env_reset(const KnowledgeGraph& kg, const Hypothesis& h);

/// Outgoing edges of the current entity whose destination was not yet
/// visited (simple-path masking), in ascending (relation, entity) order,
/// followed by STOP.
std::vector<Action> available_actions(const KnowledgeGraph& kg,
                                      const EnvState& state,
                                      std::span<const int> visited);

struct StepOutcome {
  EnvState state;
  bool terminal = false;
  bool success = false;
};

/// Deterministic transition. STOP terminates; arriving at the hypothesis
/// object terminates iff early_stop; hitting max_len terminates.
StepOutcome env_step(const EnvState& state, const Action& action, int max_len,
                     bool early_stop);

// --- rewards ---------------------------------------------------------------

/// 1 iff the trajectory ended on the hypothesis object.
double reward_fidelity(const Trajectory& traj);

/// Mean normalized edge IC of the walked path; 0 for an immediate STOP.
double reward_relevance(const ICTable& table, const Trajectory& traj);

/// fidelity x relevance; with use_relevance off the relevance factor is 1.
double reward_final(const Trajectory& traj, const RewardConfig& cfg,
                    const ICTable& table);

// --- policy ----------------------------------------------------------------

/// Scores each candidate action against the encoded history plus query
/// relation; softmax over candidates. Per-action probabilities do not
/// depend on list order.
ActionDistribution policy_forward(const PolicyParameters& params,
                                  const History& history,
                                  std::span<const Action> actions);

/// cfg.rollouts trajectories sampled from the policy for hypothesis h.
/// Deterministic given cfg.seed and the parameter snapshot.
std::vector<Trajectory> sample_rollouts(const KnowledgeGraph& kg,
                                        const PolicyParameters& params,
                                        const Hypothesis& h,
                                        const RewardConfig& cfg,
                                        std::uint64_t rollout_seed);

/// REINFORCE loss over trajectories with fixed advantages; accumulates
/// analytic gradients into grads when non-null. Exposed for the
/// finite-difference checker.
double reinforce_loss(const KnowledgeGraph& kg, const PolicyParameters& params,
                      std::span<const Trajectory> trajectories,
                      std::span<const double> advantages,
                      const RewardConfig& cfg, PolicyGradients* grads);

struct UpdateStats {
  double loss = 0.0;
  double mean_reward = 0.0;
  double baseline_after = 0.0;
};

/// One REINFORCE step: advantage = reward - baseline (moving average,
/// decay cfg.baseline_decay), entropy bonus, explicit backward pass,
/// single gradient step with cfg.learning_rate.
UpdateStats reinforce_update(const KnowledgeGraph& kg, PolicyParameters& params,
                             std::span<const Trajectory> trajectories,
                             const RewardConfig& cfg, double& baseline);

struct TrainLogRow {
  int epoch = 0;
  int batch = 0;
  double mean_reward = 0.0;
  double mean_fidelity = 0.0;
  double mean_relevance = 0.0;
  double loss = 0.0;
};

struct TrainResult {
  PolicyParameters params;
  std::vector<TrainLogRow> log;
  double baseline = 0.0;
  int epochs_done = 0;
};

/// Epochs x batches of REINFORCE over the training hypotheses. Rollouts
/// for the hypotheses of a batch may run in parallel (threads), with
/// gradient accumulation in fixed hypothesis order so results match the
/// single-threaded run.
TrainResult train(const KnowledgeGraph& kg,
                  std::span<const Hypothesis> hypotheses,
                  const RewardConfig& cfg, const ICTable& table,
                  int threads = 1,
                  const PolicyParameters* resume_from = nullptr,
                  int start_epoch = 0, double start_baseline = 0.0);

// --- inference -------------------------------------------------------------

struct RankedTarget {
  int entity = -1;
  Path path;
  double log_prob = 0.0;
};

/// Beam decoding for max_len steps with STOP allowed (the hypothesis
/// object is unknown at inference, so only STOP or the horizon end a
/// beam). Final entities are deduplicated keeping the best log-probability
/// and sorted by log-probability descending.
std::vector<RankedTarget> beam_search_infer(const KnowledgeGraph& kg,
                                            const PolicyParameters& params,
                                            int subject, int relation,
                                            int beam_width, int max_len);

/// All finished beams (not deduplicated), for explanation assembly.
std::vector<RankedTarget> beam_search_paths(const KnowledgeGraph& kg,
                                            const PolicyParameters& params,
                                            int subject, int relation,
                                            int beam_width, int max_len);

/// Max relative error between analytic gradients and central finite
/// differences over a deterministic parameter subsample.
double gradient_check(const KnowledgeGraph& kg, const PolicyParameters& params,
                      std::span<const Trajectory> batch,
                      std::span<const double> advantages,
                      const RewardConfig& cfg, double epsilon,
                      std::size_t max_coords = 4096);

// --- persistence -----------------------------------------------------------

struct Checkpoint {
  PolicyParameters params;
  RewardConfig config;
  double baseline = 0.0;
  int epochs_done = 0;
  std::uint64_t entity_vocab_hash = 0;
  std::uint64_t relation_vocab_hash = 0;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

/// Refuses to load against a graph whose vocabulary hashes differ from
/// the ones recorded at save time.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const KnowledgeGraph& kg);

void save_train_log(std::span<const TrainLogRow> log,
                    const std::filesystem::path& path);

}  // namespace rex
