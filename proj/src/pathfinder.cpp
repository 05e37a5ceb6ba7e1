#include "rex/pathfinder.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "policy_internal.hpp"
#include "rex/errors.hpp"
#include "rex/util.hpp"

namespace rex {

// --- trajectory ---------------------------------------------------------------

std::size_t Trajectory::num_edges() const {
  std::size_t n = 0;
  for (const Action& a : actions)
    if (!a.is_stop()) ++n;
  return n;
}

Path Trajectory::to_path() const {
  Path p;
  p.source = visited.front();
  p.target = visited.back();
  for (std::size_t t = 0; t + 1 < visited.size(); ++t) {
    p.triples.push_back(
        Triple{visited[t], actions[t].relation, visited[t + 1]});
  }
  return p;
}

// --- environment ---------------------------------------------------------------

EnvState env_reset(const KnowledgeGraph& kg, const Hypothesis& h) {
  if (h.subject < 0 || h.subject >= kg.num_entities())
    throw LookupError("hypothesis subject does not resolve");
  return EnvState{h.subject, h.subject, h.object, 0};
}

std::vector<Action> available_actions(const KnowledgeGraph& kg,
                                      const EnvState& state,
                                      std::span<const int> visited) {
  std::vector<Action> actions;
  for (const RelEdge& edge : kg.neighbors(state.current)) {
    if (std::find(visited.begin(), visited.end(), edge.entity) != visited.end())
      continue;
    actions.push_back(Action::edge(edge.relation, edge.entity));
  }
  actions.push_back(Action::stop());
  return actions;
}

StepOutcome env_step(const EnvState& state, const Action& action, int max_len,
                     bool early_stop) {
  StepOutcome out;
  if (action.is_stop()) {
    out.state = state;
    out.terminal = true;
    out.success = state.current == state.hyp_object;
    return out;
  }
  out.state = EnvState{action.dest, state.hyp_subject, state.hyp_object,
                       state.step + 1};
  const bool reached = early_stop && action.dest == state.hyp_object;
  out.terminal = reached || out.state.step >= max_len;
  out.success = out.terminal && action.dest == state.hyp_object;
  return out;
}

// --- rewards --------------------------------------------------------------------

double reward_fidelity(const Trajectory& traj) {
  if (!traj.terminal)
    throw ContractError("fidelity is only defined for terminal trajectories");
  return traj.final_entity() == traj.hypothesis.object ? 1.0 : 0.0;
}

double reward_relevance(const ICTable& table, const Trajectory& traj) {
  if (!traj.terminal)
    throw ContractError("relevance is only defined for terminal trajectories");
  if (traj.num_edges() == 0) return 0.0;
  return path_relevance(table, traj.to_path());
}

double reward_final(const Trajectory& traj, const RewardConfig& cfg,
                    const ICTable& table) {
  const double fidelity = reward_fidelity(traj);
  if (fidelity == 0.0) return 0.0;
  return cfg.use_relevance ? fidelity * reward_relevance(table, traj) : fidelity;
}

// --- rollouts -------------------------------------------------------------------

namespace {

std::size_t sample_index(std::span<const double> probs, double r) {
  double acc = 0.0;
  for (std::size_t j = 0; j < probs.size(); ++j) {
    acc += probs[j];
    if (r < acc) return j;
  }
  return probs.size() - 1;
}

Trajectory sample_one(const KnowledgeGraph& kg, const PolicyParameters& params,
                      const Hypothesis& h, const RewardConfig& cfg, Rng& rng) {
  Trajectory traj;
  traj.hypothesis = h;
  EnvState state = env_reset(kg, h);
  traj.visited.push_back(state.current);
  traj.history.push_back(Observation{state.current, h.subject, h.relation});

  detail::LstmState ls = detail::lstm_initial(params);
  while (true) {
    const int rel_row = traj.actions.empty()
                            ? params.start_relation_row()
                            : traj.actions.back().relation;
    ls = detail::lstm_step(params, ls, rel_row, state.current);

    const auto actions = available_actions(kg, state, traj.visited);
    const auto probs = detail::softmax(
        detail::score_actions(params, ls.h, h.relation, actions));
    const Action action = actions[sample_index(probs, rng.next_double())];
    traj.actions.push_back(action);

    const StepOutcome out =
        env_step(state, action, cfg.max_len, cfg.use_early_stop);
    if (!action.is_stop()) {
      traj.visited.push_back(action.dest);
      traj.history.push_back(
          Observation{action.dest, h.subject, h.relation});
    }
    state = out.state;
    if (out.terminal) {
      traj.terminal = true;
      traj.success = traj.final_entity() == h.object;
      return traj;
    }
  }
}

}  // namespace

std::vector<Trajectory> sample_rollouts(const KnowledgeGraph& kg,
                                        const PolicyParameters& params,
                                        const Hypothesis& h,
                                        const RewardConfig& cfg,
                                        std::uint64_t rollout_seed) {
  if (cfg.rollouts < 1) throw ContractError("rollouts must be >= 1");
  std::vector<Trajectory> rollouts;
  rollouts.reserve(cfg.rollouts);
  Rng rng(rollout_seed);
  for (int k = 0; k < cfg.rollouts; ++k)
    rollouts.push_back(sample_one(kg, params, h, cfg, rng));
  return rollouts;
}

// --- REINFORCE ------------------------------------------------------------------

UpdateStats reinforce_update(const KnowledgeGraph& kg, PolicyParameters& params,
                             std::span<const Trajectory> trajectories,
                             const RewardConfig& cfg, double& baseline) {
  if (trajectories.empty())
    throw ContractError("reinforce_update requires trajectories");

  double mean_reward = 0.0;
  std::vector<double> advantages(trajectories.size());
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    advantages[i] = trajectories[i].reward - baseline;
    mean_reward += trajectories[i].reward;
  }
  mean_reward /= static_cast<double>(trajectories.size());

  PolicyGradients grads(params);
  const double loss =
      reinforce_loss(kg, params, trajectories, advantages, cfg, &grads);

  static const char* tensor_names[] = {"entity_emb", "relation_emb", "lstm_wx",
                                       "lstm_wh",    "lstm_b",       "mlp_w1",
                                       "mlp_b1",     "mlp_w2",       "mlp_b2"};
  const auto gtensors = grads.tensor_data();
  const auto sizes = grads.tensor_sizes();
  for (std::size_t t = 0; t < gtensors.size(); ++t) {
    for (std::size_t i = 0; i < sizes[t]; ++i) {
      if (!std::isfinite(gtensors[t][i]))
        throw TrainingError(std::string("non-finite gradient in ") +
                            tensor_names[t] + " at offset " +
                            std::to_string(i) + " (loss " +
                            std::to_string(loss) + ")");
    }
  }

  auto ptensors = params.tensor_data();
  for (std::size_t t = 0; t < ptensors.size(); ++t) {
    for (std::size_t i = 0; i < sizes[t]; ++i)
      ptensors[t][i] -= cfg.learning_rate * gtensors[t][i];
  }

  baseline = cfg.baseline_decay * baseline +
             (1.0 - cfg.baseline_decay) * mean_reward;
  return UpdateStats{loss, mean_reward, baseline};
}

TrainResult train(const KnowledgeGraph& kg,
                  std::span<const Hypothesis> hypotheses,
                  const RewardConfig& cfg, const ICTable& table, int threads,
                  const PolicyParameters* resume_from, int start_epoch,
                  double start_baseline) {
  if (hypotheses.empty()) throw ContractError("training set is empty");

  TrainResult result;
  result.params = resume_from != nullptr ? *resume_from : init_policy(kg, cfg);
  result.baseline = start_baseline;

  std::vector<std::size_t> order(hypotheses.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  const int batch_size = std::max(1, cfg.batch_size);
  for (int epoch = start_epoch; epoch < start_epoch + cfg.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(cfg.seed, "epoch-" + std::to_string(epoch)));
    shuffle_rng.shuffle(order);

    int batch_index = 0;
    for (std::size_t begin = 0; begin < order.size();
         begin += batch_size, ++batch_index) {
      const std::size_t end =
          std::min(order.size(), begin + static_cast<std::size_t>(batch_size));
      const std::size_t batch_n = end - begin;

      // Rollouts may run in parallel; each hypothesis has its own stream
      // and results land in per-hypothesis slots, so the trajectory list
      // is identical for any thread count.
      std::vector<std::vector<Trajectory>> per_hyp(batch_n);
      parallel_for(batch_n, threads, [&](std::size_t j) {
        const std::size_t hyp_index = order[begin + j];
        const std::uint64_t seed = derive_seed(
            cfg.seed, "rollouts-e" + std::to_string(epoch) + "-h" +
                          std::to_string(hyp_index));
        per_hyp[j] =
            sample_rollouts(kg, result.params, hypotheses[hyp_index], cfg, seed);
      });

      std::vector<Trajectory> batch;
      batch.reserve(batch_n * cfg.rollouts);
      double fidelity_sum = 0.0;
      double relevance_sum = 0.0;
      for (auto& rollouts : per_hyp) {
        for (Trajectory& traj : rollouts) {
          traj.fidelity = reward_fidelity(traj);
          traj.relevance = reward_relevance(table, traj);
          traj.reward = reward_final(traj, cfg, table);
          fidelity_sum += traj.fidelity;
          relevance_sum += traj.relevance;
          batch.push_back(std::move(traj));
        }
      }

      const UpdateStats stats =
          reinforce_update(kg, result.params, batch, cfg, result.baseline);
      result.log.push_back(TrainLogRow{
          epoch, batch_index, stats.mean_reward,
          fidelity_sum / static_cast<double>(batch.size()),
          relevance_sum / static_cast<double>(batch.size()), stats.loss});
    }
    result.epochs_done = epoch + 1;
  }
  return result;
}

// --- beam search ----------------------------------------------------------------

namespace {

struct Beam {
  std::vector<Action> actions;
  std::vector<int> visited;
  double log_prob = 0.0;
  detail::LstmState state;  // after consuming all inputs so far
};

bool beam_order(const Beam& a, const Beam& b) {
  if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
  if (a.visited != b.visited) return a.visited < b.visited;
  return a.actions < b.actions;  // parallel edges differ only here
}

Path beam_to_path(const Beam& b) {
  Path p;
  p.source = b.visited.front();
  p.target = b.visited.back();
  for (std::size_t t = 0; t + 1 < b.visited.size(); ++t)
    p.triples.push_back(Triple{b.visited[t], b.actions[t].relation,
                               b.visited[t + 1]});
  return p;
}

}  // namespace

std::vector<RankedTarget> beam_search_paths(const KnowledgeGraph& kg,
                                            const PolicyParameters& params,
                                            int subject, int relation,
                                            int beam_width, int max_len) {
  if (beam_width < 1) throw ContractError("beam width must be >= 1");
  if (subject < 0 || subject >= kg.num_entities())
    throw LookupError("beam search subject does not resolve");

  std::vector<Beam> live;
  live.push_back(Beam{{}, {subject}, 0.0, detail::lstm_initial(params)});
  std::vector<RankedTarget> finished;

  for (int depth = 0; depth <= max_len && !live.empty(); ++depth) {
    std::vector<Beam> next;
    for (Beam& beam : live) {
      const bool at_horizon = depth == max_len;
      if (at_horizon) {
        // Forced end of the walk; no STOP factor.
        finished.push_back(
            RankedTarget{beam.visited.back(), beam_to_path(beam), beam.log_prob});
        continue;
      }
      const int rel_row = beam.actions.empty() ? params.start_relation_row()
                                               : beam.actions.back().relation;
      const detail::LstmState ls =
          detail::lstm_step(params, beam.state, rel_row, beam.visited.back());
      const EnvState env{beam.visited.back(), subject, -1,
                         static_cast<int>(beam.actions.size())};
      const auto actions = available_actions(kg, env, beam.visited);
      const auto probs =
          detail::softmax(detail::score_actions(params, ls.h, relation, actions));
      for (std::size_t j = 0; j < actions.size(); ++j) {
        const double lp = beam.log_prob + std::log(probs[j]);
        if (actions[j].is_stop()) {
          Beam done = beam;
          done.actions.push_back(actions[j]);
          done.log_prob = lp;
          finished.push_back(RankedTarget{done.visited.back(),
                                          beam_to_path(done), done.log_prob});
        } else {
          Beam child;
          child.actions = beam.actions;
          child.actions.push_back(actions[j]);
          child.visited = beam.visited;
          child.visited.push_back(actions[j].dest);
          child.log_prob = lp;
          child.state = ls;
          next.push_back(std::move(child));
        }
      }
    }
    std::sort(next.begin(), next.end(), beam_order);
    if (static_cast<int>(next.size()) > beam_width) next.resize(beam_width);
    live = std::move(next);
  }

  std::sort(finished.begin(), finished.end(),
            [](const RankedTarget& a, const RankedTarget& b) {
              if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
              if (a.entity != b.entity) return a.entity < b.entity;
              return a.path < b.path;
            });
  return finished;
}

std::vector<RankedTarget> beam_search_infer(const KnowledgeGraph& kg,
                                            const PolicyParameters& params,
                                            int subject, int relation,
                                            int beam_width, int max_len) {
  const auto all =
      beam_search_paths(kg, params, subject, relation, beam_width, max_len);
  std::vector<RankedTarget> ranked;
  std::vector<char> seen(kg.num_entities(), 0);
  for (const RankedTarget& entry : all) {
    if (seen[entry.entity]) continue;  // keep the best-scoring path only
    seen[entry.entity] = 1;
    ranked.push_back(entry);
  }
  return ranked;
}

// --- persistence ------------------------------------------------------------------

namespace {

nlohmann::json config_to_json(const RewardConfig& cfg) {
  return nlohmann::json{{"use_relevance", cfg.use_relevance},
                        {"use_early_stop", cfg.use_early_stop},
                        {"max_len", cfg.max_len},
                        {"rollouts", cfg.rollouts},
                        {"baseline_decay", cfg.baseline_decay},
                        {"entropy_weight", cfg.entropy_weight},
                        {"learning_rate", cfg.learning_rate},
                        {"seed", cfg.seed},
                        {"epochs", cfg.epochs},
                        {"batch_size", cfg.batch_size},
                        {"entity_dim", cfg.entity_dim},
                        {"relation_dim", cfg.relation_dim},
                        {"hidden_dim", cfg.hidden_dim},
                        {"mlp_hidden_dim", cfg.mlp_hidden_dim}};
}

RewardConfig config_from_json(const nlohmann::json& j) {
  RewardConfig cfg;
  cfg.use_relevance = j.at("use_relevance").get<bool>();
  cfg.use_early_stop = j.at("use_early_stop").get<bool>();
  cfg.max_len = j.at("max_len").get<int>();
  cfg.rollouts = j.at("rollouts").get<int>();
  cfg.baseline_decay = j.at("baseline_decay").get<double>();
  cfg.entropy_weight = j.at("entropy_weight").get<double>();
  cfg.learning_rate = j.at("learning_rate").get<double>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.epochs = j.at("epochs").get<int>();
  cfg.batch_size = j.at("batch_size").get<int>();
  cfg.entity_dim = j.at("entity_dim").get<int>();
  cfg.relation_dim = j.at("relation_dim").get<int>();
  cfg.hidden_dim = j.at("hidden_dim").get<int>();
  cfg.mlp_hidden_dim = j.at("mlp_hidden_dim").get<int>();
  return cfg;
}

constexpr char kCheckpointMagic[8] = {'R', 'E', 'X', 'C', 'K', 'P', 'T', '1'};

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IOError("cannot write checkpoint " + path.string());

  nlohmann::json header{
      {"config", config_to_json(ckpt.config)},
      {"baseline", ckpt.baseline},
      {"epochs_done", ckpt.epochs_done},
      {"entity_vocab_hash", ckpt.entity_vocab_hash},
      {"relation_vocab_hash", ckpt.relation_vocab_hash},
      {"num_entities", ckpt.params.num_entities},
      {"num_relations", ckpt.params.num_relations},
      {"entity_dim", ckpt.params.entity_dim},
      {"relation_dim", ckpt.params.relation_dim},
      {"hidden_dim", ckpt.params.hidden_dim},
      {"mlp_hidden_dim", ckpt.params.mlp_hidden_dim},
  };
  const std::string header_text = header.dump();
  const std::uint64_t header_len = header_text.size();
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  out.write(header_text.data(), static_cast<std::streamsize>(header_len));

  const auto tensors = ckpt.params.tensor_data();
  const auto sizes = ckpt.params.tensor_sizes();
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    out.write(reinterpret_cast<const char*>(tensors[t]),
              static_cast<std::streamsize>(sizes[t] * sizeof(double)));
  }
  if (!out) throw IOError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const KnowledgeGraph& kg) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IOError("cannot open checkpoint " + path.string());

  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw DataError("file " + path.string() + " is not a rex checkpoint");
  std::uint64_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  std::string header_text(header_len, '\0');
  in.read(header_text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw DataError("truncated checkpoint header in " + path.string());

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("corrupt checkpoint header: " + std::string(e.what()));
  }

  Checkpoint ckpt;
  ckpt.config = config_from_json(header.at("config"));
  ckpt.baseline = header.at("baseline").get<double>();
  ckpt.epochs_done = header.at("epochs_done").get<int>();
  ckpt.entity_vocab_hash = header.at("entity_vocab_hash").get<std::uint64_t>();
  ckpt.relation_vocab_hash =
      header.at("relation_vocab_hash").get<std::uint64_t>();

  if (ckpt.entity_vocab_hash != kg.entity_vocab_hash() ||
      ckpt.relation_vocab_hash != kg.relation_vocab_hash())
    throw DataError("checkpoint " + path.string() +
                    " was trained on a different vocabulary than this graph");

  PolicyParameters& p = ckpt.params;
  p.num_entities = header.at("num_entities").get<int>();
  p.num_relations = header.at("num_relations").get<int>();
  p.entity_dim = header.at("entity_dim").get<int>();
  p.relation_dim = header.at("relation_dim").get<int>();
  p.hidden_dim = header.at("hidden_dim").get<int>();
  p.mlp_hidden_dim = header.at("mlp_hidden_dim").get<int>();
  if (p.num_entities != kg.num_entities() ||
      p.num_relations != kg.num_relations())
    throw DataError("checkpoint vocabulary sizes do not match the graph");

  const int in_dim = p.relation_dim + p.entity_dim;
  p.entity_emb = Matrix(p.num_entities + 1, p.entity_dim);
  p.relation_emb = Matrix(p.num_relations + 2, p.relation_dim);
  p.lstm_wx = Matrix(4 * p.hidden_dim, in_dim);
  p.lstm_wh = Matrix(4 * p.hidden_dim, p.hidden_dim);
  p.lstm_b.assign(4 * p.hidden_dim, 0.0);
  p.mlp_w1 = Matrix(p.mlp_hidden_dim, p.hidden_dim + p.relation_dim);
  p.mlp_b1.assign(p.mlp_hidden_dim, 0.0);
  p.mlp_w2 = Matrix(in_dim, p.mlp_hidden_dim);
  p.mlp_b2.assign(in_dim, 0.0);

  auto tensors = p.tensor_data();
  const auto sizes = p.tensor_sizes();
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    in.read(reinterpret_cast<char*>(tensors[t]),
            static_cast<std::streamsize>(sizes[t] * sizeof(double)));
  }
  if (!in) throw DataError("truncated checkpoint tensors in " + path.string());
  return ckpt;
}

void save_train_log(std::span<const TrainLogRow> log,
                    const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IOError("cannot write training log " + path.string());
  out << "epoch,batch,mean_reward,mean_fidelity,mean_relevance,loss\n";
  out.precision(12);
  for (const TrainLogRow& row : log) {
    out << row.epoch << ',' << row.batch << ',' << row.mean_reward << ','
        << row.mean_fidelity << ',' << row.mean_relevance << ',' << row.loss
        << '\n';
  }
  if (!out) throw IOError("failed writing training log " + path.string());
}

}  // namespace rex
