// Dense feed-forward classifier, its loss, and the outer SGD optimizer.
#pragma once

#include <span>
#include <string>
#include <vector>

#include "dcg/rng.hpp"
#include "dcg/tensor.hpp"

namespace dcg {

struct MlpSpec {
    int input_dim = 0;
    std::vector<int> hidden;  // widths of hidden relu layers
    int class_count = 0;
};

enum class Reduction { Mean, Sum };

// Ordered named parameters (W0,b0,W1,b1,...) matching an MlpSpec.
struct ModelParams {
    MlpSpec spec;
    std::vector<std::string> names;
    std::vector<Tensor> tensors;  // grad-tracked leaves

    static ModelParams init(const MlpSpec& spec, Rng& rng);

    std::vector<double> flatten() const;
    void unflatten(const std::vector<double>& flat);
    // Fresh grad-tracked leaves with the same values.
    std::vector<Tensor> clone_tensors() const;
};

// Logits [batch x C]; params may be any tensor sequence with the
// layout of ModelParams::tensors (virtual parameters included).
Tensor mlp_forward(const MlpSpec& spec, std::span<const Tensor> params, const Tensor& x);

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                     Reduction reduction = Reduction::Mean);

struct OptimizerState {
    double lr = 0.001;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    double decay_factor = 0.1;
    double decay_at = 0.8;  // fraction of total epochs
    std::vector<std::vector<double>> velocity;

    double lr_at(double epoch_fraction) const {
        return epoch_fraction >= decay_at ? lr * decay_factor : lr;
    }
};

// v <- momentum*v + (grad + wd*p); p <- p - lr(t)*v.
// Replaces the parameter leaves with fresh tensors.
void sgd_step(ModelParams& params, std::span<const Tensor> grads, OptimizerState& state,
              double epoch_fraction);

// Checkpoint: 8-byte little-endian header length, JSON header
// (names, shapes, layer-spec), then raw little-endian f64 blobs.
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

}  // namespace dcg
