#pragma once

// Inference-time fusion of the seven classifier heads.
//
// The default cascade trusts the gl head when its top score clears its threshold, then the
// global head, and otherwise sums the above-threshold scores of all seven heads per class.

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "aglrls/fplg.hpp"
#include "aglrls/model.hpp"
#include "aglrls/tensor.hpp"

namespace aglrls {

/// Row i = softmax(G_i logits), shape 7 x c.
using ScoreMatrix = Tensor;
/// Row i = thresholds of view i from a frozen PseudoState, shape 7 x c.
using ThresholdMatrix = Tensor;

enum class Strategy { global, glocal, average, voting, glpc, con_i, con_ii, con_iii, con_iv };

std::string to_string(Strategy s);
/// Names as printed by to_string: Global, GLocal, Average, Voting, GLPC, Con-i .. Con-iv (case-insensitive).
Strategy strategy_from_string(const std::string& s);
const std::vector<Strategy>& all_strategies();

/// Throws ContractError if the state is not frozen.
std::pair<ScoreMatrix, ThresholdMatrix> build_matrices(const ModelBundle& bundle, const PseudoState& frozen_state,
                                                       const RegionSample& sample);

/// Scores for already-computed logits (7 x c).
ScoreMatrix score_matrix(const Tensor& logits);
ThresholdMatrix threshold_matrix(const PseudoState& state);

/// m_ij = 1 iff s_ij > t_ij.
Tensor mask(const ScoreMatrix& s, const ThresholdMatrix& t);

/// Column sums of s .* m.
std::vector<double> aggregate(const ScoreMatrix& s, const Tensor& m);

std::size_t predict_glpc(const ScoreMatrix& s, const ThresholdMatrix& t);

std::size_t predict_strategy(Strategy strategy, const ScoreMatrix& s, const ThresholdMatrix& t);

}  // namespace aglrls
