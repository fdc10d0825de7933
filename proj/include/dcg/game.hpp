// One training iteration as a convex game between domains: meta split,
// coalition quad {S, T, S∪T, S∩T}, virtual gradient steps, and the
// clamped supermodularity regularizer.
#pragma once

#include <map>
#include <span>
#include <vector>

#include "dcg/rng.hpp"
#include "dcg/sample.hpp"
#include "dcg/tensor.hpp"

namespace dcg {

struct MetaSplit {
    std::vector<int> meta_train_domains;
    std::vector<int> meta_test_domains;
    std::vector<const Sample*> meta_train;      // originals from meta-train domains
    std::vector<const Sample*> meta_test;       // originals from meta-test domains
    std::vector<const Sample*> meta_train_aug;  // augmented, both parents in meta-train
};

// Coalitions as index sets into a caller-defined sample table.
// S = core ∪ wing_s, T = core ∪ wing_t, so S∩T is exactly the core.
struct CoalitionQuad {
    std::vector<int> s;
    std::vector<int> t;
    std::vector<int> union_st;
    std::vector<int> intersection;
};

struct GameConfig {
    double alpha = 0.001;      // virtual step size (tied to the lr)
    int meta_test_domains = 1; // V
    int core_size = 4;         // |S∩T|
    int wing_size = 4;         // |S\T| and |T\S|
    bool second_order = true;  // record the virtual step in the graph
};

// Model hook for the game: losses evaluated at arbitrary parameter
// tensors (the virtual θ'), over samples addressed by table index.
class GameModel {
  public:
    virtual ~GameModel() = default;
    virtual std::span<const Tensor> parameters() const = 0;
    // F(O): SUM of per-sample losses over the coalition.
    virtual Tensor coalition_loss(std::span<const Tensor> params,
                                  std::span<const int> ids) = 0;
    // G(θ'): MEAN loss over the meta-test pool.
    virtual Tensor meta_test_loss(std::span<const Tensor> params) = 0;
};

// Uniformly random V-subset of the original domains becomes meta-test;
// augmented samples are kept only when both parents are meta-train.
// When `by_parent` is false the augmented pool is split randomly
// instead (the Random_meta_split discussion variant; leaks allowed).
MetaSplit meta_split(const std::map<int, std::vector<const Sample*>>& originals_by_domain,
                     const std::vector<const Sample*>& augmented_pool, int meta_test_count,
                     Rng& rng, bool by_parent = true);

// Disjoint draws: core B (|B|=core), wings A, C (|A|=|C|=wing);
// S=A∪B, T=B∪C. Requires pool >= core + 2*wing and core >= 1.
CoalitionQuad sample_coalitions(int pool_size, int core_size, int wing_size, Rng& rng);

Tensor coalition_loss(GameModel& model, std::span<const Tensor> params,
                      std::span<const int> ids);

// θ' = θ - α·∇θ F(O). With second_order the step stays in the graph so
// downstream losses backpropagate through ∇θ F(O); otherwise the
// gradient is detached (first-order mode).
std::vector<Tensor> virtual_update(GameModel& model, std::span<const int> coalition_ids,
                                   double alpha, bool second_order);

struct RegularizerResult {
    Tensor loss;           // L_sm (clamped) or L_maml
    double raw_gap = 0.0;  // unclamped supermodularity gap
    double g_union = 0.0, g_inter = 0.0, g_s = 0.0, g_t = 0.0;
};

// L_sm = max{0, G(θ-α∇F(S∪T)) + G(θ-α∇F(S∩T)) - G(θ-α∇F(S)) - G(θ-α∇F(T))}
// All four virtual updates start from the same θ.
RegularizerResult supermodularity_loss(GameModel& model, const CoalitionQuad& quad,
                                       const GameConfig& config);

// Sum of the four meta-test losses, no differencing, no clamp.
RegularizerResult maml_regularizer(GameModel& model, const CoalitionQuad& quad,
                                   const GameConfig& config);

}  // namespace dcg
