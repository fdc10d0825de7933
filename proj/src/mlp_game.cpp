#include "dcg/mlp_game.hpp"

namespace dcg {

Tensor stack_features(const std::vector<const Sample*>& samples, bool grad_tracked) {
    if (samples.empty()) throw ContractError("stack_features: empty sample list");
    const int features = samples[0]->shape.numel();
    std::vector<double> data;
    data.reserve(samples.size() * static_cast<size_t>(features));
    for (const Sample* s : samples) {
        if (s->shape.numel() != features) throw ContractError("stack_features: shape mismatch");
        data.insert(data.end(), s->features.begin(), s->features.end());
    }
    Shape shape{static_cast<int>(samples.size()), features};
    return grad_tracked ? Tensor::param(shape, std::move(data))
                        : Tensor::constant(shape, std::move(data));
}

MlpGameModel::MlpGameModel(const MlpSpec& spec, std::span<const Tensor> params,
                           const std::vector<const Sample*>& table,
                           const std::vector<const Sample*>& meta_test)
    : spec_(spec), params_(params.begin(), params.end()), table_(table) {
    if (meta_test.empty()) throw ContractError("MlpGameModel: empty meta-test pool");
    inputs_ = stack_features(table_, /*grad_tracked=*/true);
    for (const Sample* s : table_) labels_.push_back(s->label);
    test_inputs_ = stack_features(meta_test);
    for (const Sample* s : meta_test) test_labels_.push_back(s->label);
}

Tensor MlpGameModel::coalition_loss(std::span<const Tensor> params,
                                    std::span<const int> ids) {
    if (ids.empty()) throw ContractError("coalition_loss: empty coalition");
    // Row selection as a constant 0/1 matrix keeps the coalition loss
    // differentiable w.r.t. the shared input matrix.
    const int n = static_cast<int>(table_.size());
    const int m = static_cast<int>(ids.size());
    std::vector<double> sel(static_cast<size_t>(m) * n, 0.0);
    std::vector<int> labels;
    labels.reserve(ids.size());
    for (int r = 0; r < m; ++r) {
        int row = ids[static_cast<size_t>(r)];
        if (row < 0 || row >= n) throw ContractError("coalition_loss: id out of range");
        sel[static_cast<size_t>(r) * n + row] = 1.0;
        labels.push_back(labels_[static_cast<size_t>(row)]);
    }
    Tensor x = matmul(Tensor::constant({m, n}, std::move(sel)), inputs_);
    return cross_entropy(mlp_forward(spec_, params, x), labels, Reduction::Sum);
}

Tensor MlpGameModel::meta_test_loss(std::span<const Tensor> params) {
    return cross_entropy(mlp_forward(spec_, params, test_inputs_), test_labels_,
                         Reduction::Mean);
}

}  // namespace dcg
