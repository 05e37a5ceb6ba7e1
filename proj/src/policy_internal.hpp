#pragma once

// Internals shared by the policy math and the rollout/beam drivers.

#include <span>
#include <vector>

#include "rex/matrix.hpp"
#include "rex/pathfinder.hpp"

namespace rex::detail {

struct LstmState {
  Vec h, c;
};

LstmState lstm_initial(const PolicyParameters& p);

/// One recurrent step on the input [relation_emb[rel_row]; entity_emb[ent_row]].
LstmState lstm_step(const PolicyParameters& p, const LstmState& prev,
                    int rel_row, int ent_row);

/// Embedding rows of an action (STOP uses the dedicated rows).
int action_rel_row(const PolicyParameters& p, const Action& a);
int action_ent_row(const PolicyParameters& p, const Action& a);

/// Dot of the scorer output u against each candidate's embedding.
std::vector<double> score_actions(const PolicyParameters& p, const Vec& h,
                                  int query_rel, std::span<const Action> actions);

std::vector<double> softmax(const std::vector<double>& scores);

}  // namespace rex::detail
