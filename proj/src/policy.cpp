// Hand-rolled policy network: LSTM history encoder plus a two-layer
// scorer, with explicit backward passes. Shapes are small enough that
// plain loops beat any BLAS round trip at this scale.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "policy_internal.hpp"
#include "rex/errors.hpp"
#include "rex/util.hpp"

namespace rex {

namespace detail {

LstmState lstm_initial(const PolicyParameters& p) {
  return LstmState{Vec(p.hidden_dim, 0.0), Vec(p.hidden_dim, 0.0)};
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Gate rows in lstm_wx / lstm_wh / lstm_b: [input; forget; candidate; output].
struct Gates {
  Vec i, f, g, o;
};

Gates run_gates(const PolicyParameters& p, const Vec& x, const Vec& h_prev) {
  const int h = p.hidden_dim;
  Vec z(4 * h, 0.0);
  for (int r = 0; r < 4 * h; ++r) z[r] = p.lstm_b[r];
  gemv_add(p.lstm_wx, x.data(), z.data());
  gemv_add(p.lstm_wh, h_prev.data(), z.data());
  Gates gates{Vec(h), Vec(h), Vec(h), Vec(h)};
  for (int j = 0; j < h; ++j) {
    gates.i[j] = sigmoid(z[j]);
    gates.f[j] = sigmoid(z[h + j]);
    gates.g[j] = std::tanh(z[2 * h + j]);
    gates.o[j] = sigmoid(z[3 * h + j]);
  }
  return gates;
}

Vec input_vector(const PolicyParameters& p, int rel_row, int ent_row) {
  Vec x(p.relation_dim + p.entity_dim);
  const double* rel = p.relation_emb.row(rel_row);
  const double* ent = p.entity_emb.row(ent_row);
  std::copy(rel, rel + p.relation_dim, x.begin());
  std::copy(ent, ent + p.entity_dim, x.begin() + p.relation_dim);
  return x;
}

}  // namespace

LstmState lstm_step(const PolicyParameters& p, const LstmState& prev,
                    int rel_row, int ent_row) {
  const Vec x = input_vector(p, rel_row, ent_row);
  const Gates gates = run_gates(p, x, prev.h);
  LstmState next{Vec(p.hidden_dim), Vec(p.hidden_dim)};
  for (int j = 0; j < p.hidden_dim; ++j) {
    next.c[j] = gates.f[j] * prev.c[j] + gates.i[j] * gates.g[j];
    next.h[j] = gates.o[j] * std::tanh(next.c[j]);
  }
  return next;
}

int action_rel_row(const PolicyParameters& p, const Action& a) {
  return a.is_stop() ? p.stop_relation_row() : a.relation;
}

int action_ent_row(const PolicyParameters& p, const Action& a) {
  return a.is_stop() ? p.stop_entity_row() : a.dest;
}

namespace {

/// u = mlp_w2 * tanh(mlp_w1 * [h; q] + b1) + b2
Vec scorer_query(const PolicyParameters& p, const Vec& h, int query_rel) {
  Vec s_in(p.hidden_dim + p.relation_dim);
  std::copy(h.begin(), h.end(), s_in.begin());
  const double* q = p.relation_emb.row(query_rel);
  std::copy(q, q + p.relation_dim, s_in.begin() + p.hidden_dim);

  Vec a1 = p.mlp_b1;
  gemv_add(p.mlp_w1, s_in.data(), a1.data());
  Vec r1(a1.size());
  for (std::size_t j = 0; j < a1.size(); ++j) r1[j] = std::tanh(a1[j]);

  Vec u = p.mlp_b2;
  gemv_add(p.mlp_w2, r1.data(), u.data());
  return u;
}

}  // namespace

std::vector<double> score_actions(const PolicyParameters& p, const Vec& h,
                                  int query_rel,
                                  std::span<const Action> actions) {
  const Vec u = scorer_query(p, h, query_rel);
  std::vector<double> scores(actions.size());
  for (std::size_t j = 0; j < actions.size(); ++j) {
    const double* rel = p.relation_emb.row(action_rel_row(p, actions[j]));
    const double* ent = p.entity_emb.row(action_ent_row(p, actions[j]));
    scores[j] = dot(u.data(), rel, p.relation_dim) +
                dot(u.data() + p.relation_dim, ent, p.entity_dim);
  }
  return scores;
}

std::vector<double> softmax(const std::vector<double>& scores) {
  const double m = *std::max_element(scores.begin(), scores.end());
  std::vector<double> probs(scores.size());
  double sum = 0.0;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    probs[j] = std::exp(scores[j] - m);
    sum += probs[j];
  }
  for (double& v : probs) v /= sum;
  return probs;
}

}  // namespace detail

// --- parameters --------------------------------------------------------------

std::size_t PolicyParameters::parameter_count() const {
  std::size_t n = 0;
  for (const std::size_t s : tensor_sizes()) n += s;
  return n;
}

std::vector<double*> PolicyParameters::tensor_data() {
  return {entity_emb.data.data(), relation_emb.data.data(),
          lstm_wx.data.data(),    lstm_wh.data.data(),
          lstm_b.data(),          mlp_w1.data.data(),
          mlp_b1.data(),          mlp_w2.data.data(),
          mlp_b2.data()};
}

std::vector<const double*> PolicyParameters::tensor_data() const {
  return {entity_emb.data.data(), relation_emb.data.data(),
          lstm_wx.data.data(),    lstm_wh.data.data(),
          lstm_b.data(),          mlp_w1.data.data(),
          mlp_b1.data(),          mlp_w2.data.data(),
          mlp_b2.data()};
}

std::vector<std::size_t> PolicyParameters::tensor_sizes() const {
  return {entity_emb.size(), relation_emb.size(), lstm_wx.size(),
          lstm_wh.size(),    lstm_b.size(),       mlp_w1.size(),
          mlp_b1.size(),     mlp_w2.size(),       mlp_b2.size()};
}

PolicyParameters init_policy(const KnowledgeGraph& kg, const RewardConfig& cfg) {
  PolicyParameters p;
  p.num_entities = kg.num_entities();
  p.num_relations = kg.num_relations();
  p.entity_dim = cfg.entity_dim;
  p.relation_dim = cfg.relation_dim;
  p.hidden_dim = cfg.hidden_dim;
  p.mlp_hidden_dim = cfg.mlp_hidden_dim;

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

  Rng rng(derive_seed(cfg.seed, "policy-init"));
  const auto fill = [&rng](Matrix& m, double scale) {
    for (double& v : m.data) v = scale * rng.next_gaussian();
  };
  fill(p.entity_emb, 1.0 / std::sqrt(std::max(1, p.entity_dim)));
  fill(p.relation_emb, 1.0 / std::sqrt(std::max(1, p.relation_dim)));
  fill(p.lstm_wx, 1.0 / std::sqrt(in_dim));
  fill(p.lstm_wh, 1.0 / std::sqrt(std::max(1, p.hidden_dim)));
  fill(p.mlp_w1, 1.0 / std::sqrt(p.hidden_dim + p.relation_dim));
  fill(p.mlp_w2, 1.0 / std::sqrt(std::max(1, p.mlp_hidden_dim)));
  return p;
}

PolicyGradients::PolicyGradients(const PolicyParameters& p)
    : entity_emb(p.entity_emb.rows, p.entity_emb.cols),
      relation_emb(p.relation_emb.rows, p.relation_emb.cols),
      lstm_wx(p.lstm_wx.rows, p.lstm_wx.cols),
      lstm_wh(p.lstm_wh.rows, p.lstm_wh.cols),
      mlp_w1(p.mlp_w1.rows, p.mlp_w1.cols),
      mlp_w2(p.mlp_w2.rows, p.mlp_w2.cols),
      lstm_b(p.lstm_b.size(), 0.0),
      mlp_b1(p.mlp_b1.size(), 0.0),
      mlp_b2(p.mlp_b2.size(), 0.0) {}

void PolicyGradients::zero() {
  entity_emb.zero();
  relation_emb.zero();
  lstm_wx.zero();
  lstm_wh.zero();
  mlp_w1.zero();
  mlp_w2.zero();
  std::fill(lstm_b.begin(), lstm_b.end(), 0.0);
  std::fill(mlp_b1.begin(), mlp_b1.end(), 0.0);
  std::fill(mlp_b2.begin(), mlp_b2.end(), 0.0);
}

std::vector<double*> PolicyGradients::tensor_data() {
  return {entity_emb.data.data(), relation_emb.data.data(),
          lstm_wx.data.data(),    lstm_wh.data.data(),
          lstm_b.data(),          mlp_w1.data.data(),
          mlp_b1.data(),          mlp_w2.data.data(),
          mlp_b2.data()};
}

std::vector<const double*> PolicyGradients::tensor_data() const {
  return {entity_emb.data.data(), relation_emb.data.data(),
          lstm_wx.data.data(),    lstm_wh.data.data(),
          lstm_b.data(),          mlp_w1.data.data(),
          mlp_b1.data(),          mlp_w2.data.data(),
          mlp_b2.data()};
}

std::vector<std::size_t> PolicyGradients::tensor_sizes() const {
  return {entity_emb.size(), relation_emb.size(), lstm_wx.size(),
          lstm_wh.size(),    lstm_b.size(),       mlp_w1.size(),
          mlp_b1.size(),     mlp_w2.size(),       mlp_b2.size()};
}

// --- forward (public, full-history form) --------------------------------------

ActionDistribution policy_forward(const PolicyParameters& params,
                                  const History& history,
                                  std::span<const Action> actions) {
  if (actions.empty())
    throw ContractError("policy_forward requires a nonempty action set");

  detail::LstmState state = detail::lstm_initial(params);
  // First input: start token + the initial location.
  state = detail::lstm_step(params, state, params.start_relation_row(),
                            history.initial.current);
  for (const auto& [action, obs] : history.steps) {
    if (action.is_stop())
      throw ContractError("a STOP action cannot appear inside a history");
    state = detail::lstm_step(params, state, action.relation, obs.current);
  }

  ActionDistribution dist;
  dist.actions.assign(actions.begin(), actions.end());
  const auto scores = detail::score_actions(
      params, state.h, history.initial.hyp_relation, actions);
  dist.probs = detail::softmax(scores);
  return dist;
}

// --- loss + backward -----------------------------------------------------------

namespace {

using detail::LstmState;

struct StepTape {
  Vec x, h_prev, c_prev;
  Vec gate_i, gate_f, gate_g, gate_o;
  Vec c, tanh_c;
  int rel_row = -1, ent_row = -1;

  Vec s_in, r1, u;
  std::vector<Action> actions;
  std::vector<double> probs;
  int chosen = -1;
};

/// Forward replay of one trajectory, recording everything the backward
/// pass needs.
std::vector<StepTape> replay(const KnowledgeGraph& kg,
                             const PolicyParameters& p, const Trajectory& traj) {
  std::vector<StepTape> tape;
  tape.reserve(traj.actions.size());

  LstmState state = detail::lstm_initial(p);
  EnvState env{traj.visited.front(), traj.hypothesis.subject,
               traj.hypothesis.object, 0};
  const int query_rel = traj.hypothesis.relation;

  for (std::size_t t = 0; t < traj.actions.size(); ++t) {
    StepTape step;
    step.rel_row = t == 0 ? p.start_relation_row()
                          : detail::action_rel_row(p, traj.actions[t - 1]);
    step.ent_row = env.current;

    // LSTM forward with cached intermediates.
    step.x = Vec(p.relation_dim + p.entity_dim);
    {
      const double* rel = p.relation_emb.row(step.rel_row);
      const double* ent = p.entity_emb.row(step.ent_row);
      std::copy(rel, rel + p.relation_dim, step.x.begin());
      std::copy(ent, ent + p.entity_dim, step.x.begin() + p.relation_dim);
    }
    step.h_prev = state.h;
    step.c_prev = state.c;
    const int hd = p.hidden_dim;
    Vec z(4 * hd, 0.0);
    for (int r = 0; r < 4 * hd; ++r) z[r] = p.lstm_b[r];
    gemv_add(p.lstm_wx, step.x.data(), z.data());
    gemv_add(p.lstm_wh, step.h_prev.data(), z.data());
    step.gate_i.resize(hd);
    step.gate_f.resize(hd);
    step.gate_g.resize(hd);
    step.gate_o.resize(hd);
    step.c.resize(hd);
    step.tanh_c.resize(hd);
    Vec h(hd);
    for (int j = 0; j < hd; ++j) {
      step.gate_i[j] = 1.0 / (1.0 + std::exp(-z[j]));
      step.gate_f[j] = 1.0 / (1.0 + std::exp(-z[hd + j]));
      step.gate_g[j] = std::tanh(z[2 * hd + j]);
      step.gate_o[j] = 1.0 / (1.0 + std::exp(-z[3 * hd + j]));
      step.c[j] = step.gate_f[j] * step.c_prev[j] + step.gate_i[j] * step.gate_g[j];
      step.tanh_c[j] = std::tanh(step.c[j]);
      h[j] = step.gate_o[j] * step.tanh_c[j];
    }
    state.h = h;
    state.c = step.c;

    // Scorer forward.
    step.s_in.resize(p.hidden_dim + p.relation_dim);
    std::copy(h.begin(), h.end(), step.s_in.begin());
    {
      const double* q = p.relation_emb.row(query_rel);
      std::copy(q, q + p.relation_dim, step.s_in.begin() + p.hidden_dim);
    }
    Vec a1 = p.mlp_b1;
    gemv_add(p.mlp_w1, step.s_in.data(), a1.data());
    step.r1.resize(a1.size());
    for (std::size_t j = 0; j < a1.size(); ++j) step.r1[j] = std::tanh(a1[j]);
    step.u = p.mlp_b2;
    gemv_add(p.mlp_w2, step.r1.data(), step.u.data());

    step.actions = available_actions(
        kg, env, std::span<const int>(traj.visited.data(), t + 1));
    std::vector<double> scores(step.actions.size());
    for (std::size_t j = 0; j < step.actions.size(); ++j) {
      const double* rel =
          p.relation_emb.row(detail::action_rel_row(p, step.actions[j]));
      const double* ent =
          p.entity_emb.row(detail::action_ent_row(p, step.actions[j]));
      scores[j] = dot(step.u.data(), rel, p.relation_dim) +
                  dot(step.u.data() + p.relation_dim, ent, p.entity_dim);
    }
    step.probs = detail::softmax(scores);

    step.chosen = -1;
    for (std::size_t j = 0; j < step.actions.size(); ++j) {
      if (step.actions[j] == traj.actions[t]) {
        step.chosen = static_cast<int>(j);
        break;
      }
    }
    if (step.chosen < 0)
      throw ContractError("trajectory action is not available at its step");

    tape.push_back(std::move(step));
    if (!traj.actions[t].is_stop()) {
      env.current = traj.actions[t].dest;
      env.step += 1;
    }
  }
  return tape;
}

}  // namespace

double reinforce_loss(const KnowledgeGraph& kg, const PolicyParameters& params,
                      std::span<const Trajectory> trajectories,
                      std::span<const double> advantages,
                      const RewardConfig& cfg, PolicyGradients* grads) {
  if (trajectories.size() != advantages.size())
    throw ContractError("one advantage per trajectory required");
  if (trajectories.empty()) return 0.0;

  const double weight = 1.0 / static_cast<double>(trajectories.size());
  const double beta = cfg.entropy_weight;
  double loss = 0.0;

  for (std::size_t n = 0; n < trajectories.size(); ++n) {
    const Trajectory& traj = trajectories[n];
    const double adv = advantages[n];
    const auto tape = replay(kg, params, traj);

    double log_prob_sum = 0.0;
    double entropy_sum = 0.0;
    for (const StepTape& step : tape) {
      log_prob_sum += std::log(step.probs[step.chosen]);
      for (const double pj : step.probs)
        if (pj > 0.0) entropy_sum -= pj * std::log(pj);
    }
    loss += weight * (-adv * log_prob_sum - beta * entropy_sum);
    if (grads == nullptr) continue;

    // Backward through time.
    const int hd = params.hidden_dim;
    Vec dh_next(hd, 0.0), dc_next(hd, 0.0);
    const int query_rel = traj.hypothesis.relation;
    for (int t = static_cast<int>(tape.size()) - 1; t >= 0; --t) {
      const StepTape& step = tape[t];
      const std::size_t na = step.actions.size();

      // d loss / d score_j
      double entropy = 0.0;
      for (const double pj : step.probs)
        if (pj > 0.0) entropy -= pj * std::log(pj);
      std::vector<double> dscore(na, 0.0);
      for (std::size_t j = 0; j < na; ++j) {
        const double pj = step.probs[j];
        const double d_logp = (j == static_cast<std::size_t>(step.chosen) ? 1.0 : 0.0) - pj;
        double d = -adv * d_logp;
        if (pj > 0.0) d += beta * pj * (std::log(pj) + entropy);
        dscore[j] = weight * d;
      }

      // Through the score dot products.
      Vec du(params.relation_dim + params.entity_dim, 0.0);
      for (std::size_t j = 0; j < na; ++j) {
        if (dscore[j] == 0.0) continue;
        const int rr = detail::action_rel_row(params, step.actions[j]);
        const int er = detail::action_ent_row(params, step.actions[j]);
        const double* rel = params.relation_emb.row(rr);
        const double* ent = params.entity_emb.row(er);
        double* grel = grads->relation_emb.row(rr);
        double* gent = grads->entity_emb.row(er);
        for (int i = 0; i < params.relation_dim; ++i) {
          du[i] += dscore[j] * rel[i];
          grel[i] += dscore[j] * step.u[i];
        }
        for (int i = 0; i < params.entity_dim; ++i) {
          du[params.relation_dim + i] += dscore[j] * ent[i];
          gent[i] += dscore[j] * step.u[params.relation_dim + i];
        }
      }

      // Through the two-layer scorer.
      outer_add(grads->mlp_w2, du.data(), step.r1.data());
      for (std::size_t i = 0; i < du.size(); ++i) grads->mlp_b2[i] += du[i];
      Vec dr1(params.mlp_hidden_dim, 0.0);
      gemv_t_add(params.mlp_w2, du.data(), dr1.data());
      Vec da1(params.mlp_hidden_dim);
      for (int j = 0; j < params.mlp_hidden_dim; ++j)
        da1[j] = dr1[j] * (1.0 - step.r1[j] * step.r1[j]);
      outer_add(grads->mlp_w1, da1.data(), step.s_in.data());
      for (std::size_t i = 0; i < da1.size(); ++i) grads->mlp_b1[i] += da1[i];
      Vec ds_in(params.hidden_dim + params.relation_dim, 0.0);
      gemv_t_add(params.mlp_w1, da1.data(), ds_in.data());

      Vec dh(hd);
      for (int j = 0; j < hd; ++j) dh[j] = ds_in[j] + dh_next[j];
      {
        double* gq = grads->relation_emb.row(query_rel);
        for (int i = 0; i < params.relation_dim; ++i)
          gq[i] += ds_in[params.hidden_dim + i];
      }

      // Through the LSTM cell.
      Vec dz(4 * hd, 0.0);
      Vec dc(hd);
      for (int j = 0; j < hd; ++j) {
        const double d_o = dh[j] * step.tanh_c[j];
        dz[3 * hd + j] = d_o * step.gate_o[j] * (1.0 - step.gate_o[j]);
        dc[j] = dc_next[j] +
                dh[j] * step.gate_o[j] * (1.0 - step.tanh_c[j] * step.tanh_c[j]);
        const double d_i = dc[j] * step.gate_g[j];
        dz[j] = d_i * step.gate_i[j] * (1.0 - step.gate_i[j]);
        const double d_g = dc[j] * step.gate_i[j];
        dz[2 * hd + j] = d_g * (1.0 - step.gate_g[j] * step.gate_g[j]);
        const double d_f = dc[j] * step.c_prev[j];
        dz[hd + j] = d_f * step.gate_f[j] * (1.0 - step.gate_f[j]);
      }
      outer_add(grads->lstm_wx, dz.data(), step.x.data());
      outer_add(grads->lstm_wh, dz.data(), step.h_prev.data());
      for (int j = 0; j < 4 * hd; ++j) grads->lstm_b[j] += dz[j];

      Vec dx(params.relation_dim + params.entity_dim, 0.0);
      gemv_t_add(params.lstm_wx, dz.data(), dx.data());
      {
        double* grel = grads->relation_emb.row(step.rel_row);
        double* gent = grads->entity_emb.row(step.ent_row);
        for (int i = 0; i < params.relation_dim; ++i) grel[i] += dx[i];
        for (int i = 0; i < params.entity_dim; ++i)
          gent[i] += dx[params.relation_dim + i];
      }
      std::fill(dh_next.begin(), dh_next.end(), 0.0);
      gemv_t_add(params.lstm_wh, dz.data(), dh_next.data());
      for (int j = 0; j < hd; ++j) dc_next[j] = dc[j] * step.gate_f[j];
    }
  }
  return loss;
}

double gradient_check(const KnowledgeGraph& kg, const PolicyParameters& params,
                      std::span<const Trajectory> batch,
                      std::span<const double> advantages,
                      const RewardConfig& cfg, double epsilon,
                      std::size_t max_coords) {
  if (epsilon <= 0.0) throw ContractError("epsilon must be positive");

  PolicyGradients analytic(params);
  reinforce_loss(kg, params, batch, advantages, cfg, &analytic);

  PolicyParameters work = params;
  auto tensors = work.tensor_data();
  const auto sizes = work.tensor_sizes();
  const auto analytic_tensors = analytic.tensor_data();

  std::size_t total = 0;
  for (const std::size_t s : sizes) total += s;
  const std::size_t stride = std::max<std::size_t>(1, total / max_coords);

  double max_err = 0.0;
  for (std::size_t idx = 0; idx < total; idx += stride) {
    std::size_t rem = idx;
    std::size_t tensor = 0;
    while (rem >= sizes[tensor]) {
      rem -= sizes[tensor];
      ++tensor;
    }
    double* coord = tensors[tensor] + rem;
    const double original = *coord;
    *coord = original + epsilon;
    const double plus = reinforce_loss(kg, work, batch, advantages, cfg, nullptr);
    *coord = original - epsilon;
    const double minus = reinforce_loss(kg, work, batch, advantages, cfg, nullptr);
    *coord = original;

    const double fd = (plus - minus) / (2.0 * epsilon);
    const double an = analytic_tensors[tensor][rem];
    if (std::abs(an) < 1e-10 && std::abs(fd) < 1e-10) continue;
    const double err = std::abs(an - fd) / std::max(std::abs(an), std::abs(fd));
    max_err = std::max(max_err, err);
  }
  return max_err;
}

}  // namespace rex
