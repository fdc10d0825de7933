// GameModel adapter for the MLP classifier over one iteration's sample
// table. Inputs live in a single grad-tracked matrix so per-sample
// input gradients (Input×Gradient scores) fall out of one backward.
#pragma once

#include <vector>

#include "dcg/game.hpp"
#include "dcg/model.hpp"
#include "dcg/sample.hpp"

namespace dcg {

class MlpGameModel final : public GameModel {
  public:
    // `table` are the coalition-eligible samples (meta-train pool);
    // `meta_test` is this iteration's meta-test pool.
    MlpGameModel(const MlpSpec& spec, std::span<const Tensor> params,
                 const std::vector<const Sample*>& table,
                 const std::vector<const Sample*>& meta_test);

    std::span<const Tensor> parameters() const override { return params_; }
    Tensor coalition_loss(std::span<const Tensor> params,
                          std::span<const int> ids) override;
    Tensor meta_test_loss(std::span<const Tensor> params) override;

    // Grad-tracked [n x features] matrix of the coalition pool.
    const Tensor& inputs() const { return inputs_; }
    const std::vector<const Sample*>& table() const { return table_; }
    int table_size() const { return static_cast<int>(table_.size()); }

  private:
    MlpSpec spec_;
    std::vector<Tensor> params_;
    std::vector<const Sample*> table_;
    Tensor inputs_;
    std::vector<int> labels_;
    Tensor test_inputs_;
    std::vector<int> test_labels_;
};

// Stacks samples' features into an [n x features] constant tensor.
Tensor stack_features(const std::vector<const Sample*>& samples, bool grad_tracked = false);

}  // namespace dcg
