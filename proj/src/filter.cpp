#include "dcg/filter.hpp"

#include <algorithm>
#include <iostream>

namespace dcg {

ScoreBoard score_samples(const Tensor& loss, MlpGameModel& model,
                         const std::vector<int>& participant_ids) {
    const Tensor& x = model.inputs();
    if (!x.requires_grad()) throw ContractError("score_samples: inputs are not grad-tracked");
    auto grads = backward(loss, std::span<const Tensor>{&x, 1});
    const Tensor& gx = grads[0];

    ScoreBoard board;
    const int features = x.cols();
    for (int row : participant_ids) {
        const Sample* s = model.table()[static_cast<size_t>(row)];
        double score = 0.0;
        const size_t base = static_cast<size_t>(row) * features;
        for (int j = 0; j < features; ++j)
            score += x.data()[base + j] * gx.data()[base + j];
        // a sample may appear in several coalition id lists; score once
        board.scores[s->id] = score;
    }
    return board;
}

std::set<std::int64_t> select_discard(const ScoreBoard& board, int k) {
    if (k < 0) throw ContractError("select_discard: k must be non-negative");
    if (k == 0 || board.scores.empty()) return {};
    if (k > static_cast<int>(board.scores.size())) {
        std::cerr << "warning: k=" << k << " exceeds scored count " << board.scores.size()
                  << ", clamping\n";
        k = static_cast<int>(board.scores.size());
    }
    bool any_signal = false;
    for (const auto& [_, s] : board.scores) any_signal = any_signal || s != 0.0;
    if (!any_signal) return {};  // clamped regularizer carries no information

    std::vector<std::pair<std::int64_t, double>> items(board.scores.begin(), board.scores.end());
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::set<std::int64_t> out;
    for (int i = 0; i < k; ++i) out.insert(items[static_cast<size_t>(i)].first);
    return out;
}

Tensor filtered_supervision(const MlpSpec& spec, std::span<const Tensor> params,
                            const std::vector<const Sample*>& batch,
                            const std::set<std::int64_t>& discard) {
    std::vector<const Sample*> kept;
    std::vector<int> labels;
    for (const Sample* s : batch) {
        if (!discard.count(s->id)) {
            kept.push_back(s);
            labels.push_back(s->label);
        }
    }
    if (kept.empty()) throw ContractError("filtered_supervision: every sample filtered");
    Tensor x = stack_features(kept);
    return cross_entropy(mlp_forward(spec, params, x), labels, Reduction::Mean);
}

}  // namespace dcg
