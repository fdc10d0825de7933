#include "dcg/game.hpp"

#include <algorithm>
#include <unordered_set>

namespace dcg {

MetaSplit meta_split(const std::map<int, std::vector<const Sample*>>& originals_by_domain,
                     const std::vector<const Sample*>& augmented_pool, int meta_test_count,
                     Rng& rng, bool by_parent) {
    const int p = static_cast<int>(originals_by_domain.size());
    if (p < 2) throw ContractError("meta_split: need at least 2 source domains");
    if (meta_test_count < 1 || meta_test_count >= p)
        throw ContractError("meta_split: V must satisfy 1 <= V < P");

    std::vector<int> domains;
    for (const auto& [id, _] : originals_by_domain) domains.push_back(id);
    rng.shuffle(domains);

    MetaSplit split;
    split.meta_test_domains.assign(domains.begin(), domains.begin() + meta_test_count);
    split.meta_train_domains.assign(domains.begin() + meta_test_count, domains.end());
    std::sort(split.meta_test_domains.begin(), split.meta_test_domains.end());
    std::sort(split.meta_train_domains.begin(), split.meta_train_domains.end());

    std::unordered_set<int> test_set(split.meta_test_domains.begin(),
                                     split.meta_test_domains.end());
    std::unordered_set<std::int64_t> train_sample_ids;
    for (const auto& [id, samples] : originals_by_domain) {
        auto& dst = test_set.count(id) ? split.meta_test : split.meta_train;
        for (const Sample* s : samples) {
            dst.push_back(s);
            if (!test_set.count(id)) train_sample_ids.insert(s->id);
        }
    }

    for (const Sample* s : augmented_pool) {
        if (s->origin != Origin::Augmented || !s->provenance)
            throw ContractError("meta_split: augmented pool contains non-augmented sample");
        if (by_parent) {
            if (train_sample_ids.count(s->provenance->parent_i) &&
                train_sample_ids.count(s->provenance->parent_j))
                split.meta_train_aug.push_back(s);
        } else {
            // discussion variant: random assignment, parentage ignored
            if (rng.uniform() < 0.5)
                split.meta_train_aug.push_back(s);
            else
                split.meta_test.push_back(s);
        }
    }
    return split;
}

CoalitionQuad sample_coalitions(int pool_size, int core_size, int wing_size, Rng& rng) {
    if (core_size < 1) throw ContractError("sample_coalitions: core must be non-empty");
    if (wing_size < 0) throw ContractError("sample_coalitions: negative wing size");
    if (pool_size < core_size + 2 * wing_size)
        throw ContractError("sample_coalitions: pool too small for requested sizes");

    std::vector<int> ids(static_cast<size_t>(pool_size));
    for (int i = 0; i < pool_size; ++i) ids[static_cast<size_t>(i)] = i;
    rng.shuffle(ids);

    CoalitionQuad quad;
    auto it = ids.begin();
    std::vector<int> wing_s(it, it + wing_size);
    it += wing_size;
    std::vector<int> core(it, it + core_size);
    it += core_size;
    std::vector<int> wing_t(it, it + wing_size);

    quad.intersection = core;
    quad.s = wing_s;
    quad.s.insert(quad.s.end(), core.begin(), core.end());
    quad.t = core;
    quad.t.insert(quad.t.end(), wing_t.begin(), wing_t.end());
    quad.union_st = wing_s;
    quad.union_st.insert(quad.union_st.end(), core.begin(), core.end());
    quad.union_st.insert(quad.union_st.end(), wing_t.begin(), wing_t.end());
    return quad;
}

Tensor coalition_loss(GameModel& model, std::span<const Tensor> params,
                      std::span<const int> ids) {
    if (ids.empty()) throw ContractError("coalition_loss: empty coalition");
    return model.coalition_loss(params, ids);
}

std::vector<Tensor> virtual_update(GameModel& model, std::span<const int> coalition_ids,
                                   double alpha, bool second_order) {
    if (alpha <= 0.0) throw ContractError("virtual_update: alpha must be positive");
    auto params = model.parameters();
    Tensor f = coalition_loss(model, params, coalition_ids);
    auto grads = backward(f, params, /*create_graph=*/second_order);
    std::vector<Tensor> updated;
    updated.reserve(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
        const Tensor& g = second_order ? grads[i] : grads[i].detach();
        updated.push_back(sub(params[i], scale(g, alpha)));
    }
    return updated;
}

namespace {

RegularizerResult evaluate_branches(GameModel& model, const CoalitionQuad& quad,
                                    const GameConfig& config, bool clamp_difference) {
    if (quad.intersection.empty()) throw ContractError("coalition quad: empty intersection");

    auto branch = [&](const std::vector<int>& ids) {
        auto theta_prime = virtual_update(model, ids, config.alpha, config.second_order);
        return model.meta_test_loss(theta_prime);
    };
    Tensor g_union = branch(quad.union_st);
    Tensor g_inter = branch(quad.intersection);
    Tensor g_s = branch(quad.s);
    Tensor g_t = branch(quad.t);

    RegularizerResult res;
    res.g_union = g_union.item();
    res.g_inter = g_inter.item();
    res.g_s = g_s.item();
    res.g_t = g_t.item();
    if (clamp_difference) {
        Tensor gap = sub(add(g_union, g_inter), add(g_s, g_t));
        res.raw_gap = gap.item();
        res.loss = relu(gap);  // max(0, ·); subgradient 0 at the clamp
    } else {
        res.loss = add(add(g_union, g_inter), add(g_s, g_t));
        res.raw_gap = res.g_union + res.g_inter - res.g_s - res.g_t;
    }
    return res;
}

}  // namespace

RegularizerResult supermodularity_loss(GameModel& model, const CoalitionQuad& quad,
                                       const GameConfig& config) {
    return evaluate_branches(model, quad, config, /*clamp_difference=*/true);
}

RegularizerResult maml_regularizer(GameModel& model, const CoalitionQuad& quad,
                                   const GameConfig& config) {
    return evaluate_branches(model, quad, config, /*clamp_difference=*/false);
}

}  // namespace dcg
