// Input×Gradient sample scoring and the top-k discard filter.
#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <vector>

#include "dcg/mlp_game.hpp"
#include "dcg/tensor.hpp"

namespace dcg {

struct ScoreBoard {
    // score(x) = x^T ∇_x L over this iteration's coalition participants
    std::map<std::int64_t, double> scores;
};

// Cumulative per-sample counters across a training run (the
// top-k/bottom-k dump uses these).
struct FilterStats {
    std::map<std::int64_t, int> topk_count;
    std::map<std::int64_t, int> bottomk_count;
};

// Differentiates `loss` w.r.t. the model's input matrix and reduces
// each participating row to x·∇x. A clamped loss (L_sm = 0) yields
// all-zero scores.
ScoreBoard score_samples(const Tensor& loss, MlpGameModel& model,
                         const std::vector<int>& participant_ids);

// The k highest-scoring ids; ties broken by ascending sample id. When
// every score is zero (no signal) nothing is discarded. k larger than
// the scored count is clamped with a warning on stderr.
std::set<std::int64_t> select_discard(const ScoreBoard& board, int k);

// Mean cross-entropy over batch \ discard.
Tensor filtered_supervision(const MlpSpec& spec, std::span<const Tensor> params,
                            const std::vector<const Sample*>& batch,
                            const std::set<std::int64_t>& discard);

}  // namespace dcg
