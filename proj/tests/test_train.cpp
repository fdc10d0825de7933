#include "dcg/train.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"

using namespace dcg;
namespace fs = std::filesystem;

namespace {

// Small dataset + config so a full training run stays sub-second.
struct TrainFixture {
    Dataset data;
    TrainConfig config;

    explicit TrainFixture(std::uint64_t seed = 5) {
        DatasetManifest manifest;
        manifest.class_count = 4;
        manifest.shape = {1, 8, 8};
        manifest.domains = default_domain_specs(4);
        manifest.samples_per_domain = 24;
        manifest.seed = seed;
        data = generate(manifest);

        config.epochs = 2;
        config.batch_size = 8;
        config.lr = 0.02;
        config.hidden = {16};
        config.omega = 0.2;
        config.k = 2;
        config.seeds = {0};
        config.variant = Variant::FullDcg;
    }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("variant names round-trip and flags are consistent") {
    for (Variant v : all_variants())
        CHECK(variant_from_string(variant_to_string(v)) == v);
    CHECK_THROWS_AS((void)variant_from_string("no-such-variant"), ContractError);

    CHECK_FALSE(variant_flags(Variant::Baseline).augment);
    CHECK_FALSE(variant_flags(Variant::Baseline).uses_regularizer());
    CHECK_FALSE(variant_flags(Variant::Baseline).uses_filter());
    CHECK(variant_flags(Variant::AugOnly).augment);
    CHECK(variant_flags(Variant::AugLsm).reg_sm);
    CHECK_FALSE(variant_flags(Variant::AugLsm).uses_filter());
    CHECK(variant_flags(Variant::AugLmaml).reg_maml);
    CHECK(variant_flags(Variant::AugFsm).filter_sm);
    CHECK_FALSE(variant_flags(Variant::AugFsm).uses_regularizer());
    CHECK(variant_flags(Variant::AugFmaml).filter_maml);
    CHECK(variant_flags(Variant::AugLmamlFmaml).reg_maml);
    CHECK(variant_flags(Variant::AugLmamlFmaml).filter_maml);
    CHECK(variant_flags(Variant::FullDcg).reg_sm);
    CHECK(variant_flags(Variant::FullDcg).filter_sm);
    for (Variant v : all_variants())
        if (v != Variant::Baseline) CHECK(variant_flags(v).augment);
}

TEST_CASE("config validation rejects contradictions") {
    TrainConfig c;  // defaults: full-dcg, valid
    CHECK_NOTHROW(c.validate());

    auto broken = [&](auto&& mutate) {
        TrainConfig bad = c;
        mutate(bad);
        CHECK_THROWS_AS(bad.validate(), ContractError);
    };
    broken([](TrainConfig& b) { b.epochs = 0; });
    broken([](TrainConfig& b) { b.batch_size = 1; });
    broken([](TrainConfig& b) { b.lr = 0.0; });
    broken([](TrainConfig& b) { b.omega = -0.1; });
    broken([](TrainConfig& b) { b.k = -1; });
    broken([](TrainConfig& b) { b.k = b.batch_size; });
    broken([](TrainConfig& b) { b.eta = 1.5; });
    broken([](TrainConfig& b) { b.meta_test_domains = 0; });
    broken([](TrainConfig& b) { b.aug_cap = -2; });
    broken([](TrainConfig& b) { b.seeds.clear(); });
    broken([](TrainConfig& b) { b.core_size = -1; });
    // filterless variants must not request a discard budget
    broken([](TrainConfig& b) { b.variant = Variant::AugLsm; b.k = 3; b.omega = 0.1; });
    broken([](TrainConfig& b) { b.variant = Variant::Baseline; b.k = 1; b.omega = 0.0; });
    // regularizer-less variants must not carry a loss weight
    broken([](TrainConfig& b) { b.variant = Variant::AugFsm; b.k = 3; b.omega = 0.1; });
    broken([](TrainConfig& b) { b.variant = Variant::AugOnly; b.k = 0; b.omega = 0.5; });
}

TEST_CASE("config JSON round trip preserves every field") {
    TrainConfig c;
    c.epochs = 7;
    c.batch_size = 12;
    c.lr = 0.015;
    c.momentum = 0.8;
    c.weight_decay = 1e-3;
    c.lr_decay_factor = 0.5;
    c.lr_decay_at = 0.6;
    c.omega = 0.25;
    c.k = 3;
    c.eta = 0.75;
    c.meta_test_domains = 2;
    c.core_size = 2;
    c.wing_size = 3;
    c.seeds = {4, 9};
    c.variant = Variant::AugLmamlFmaml;
    c.aug_cap = 16;
    c.hidden = {48, 24};
    c.split_mode = SplitMode::Random;
    c.filter_scope = FilterScope::AugmentedOnly;
    c.second_order = false;

    TrainConfig r = config_from_json(config_to_json(c));
    CHECK(r.epochs == c.epochs);
    CHECK(r.batch_size == c.batch_size);
    CHECK(r.lr == c.lr);
    CHECK(r.momentum == c.momentum);
    CHECK(r.weight_decay == c.weight_decay);
    CHECK(r.lr_decay_factor == c.lr_decay_factor);
    CHECK(r.lr_decay_at == c.lr_decay_at);
    CHECK(r.omega == c.omega);
    CHECK(r.k == c.k);
    CHECK(r.eta == c.eta);
    CHECK(r.meta_test_domains == c.meta_test_domains);
    CHECK(r.core_size == c.core_size);
    CHECK(r.wing_size == c.wing_size);
    CHECK(r.seeds == c.seeds);
    CHECK(r.variant == c.variant);
    CHECK(r.aug_cap == c.aug_cap);
    CHECK(r.hidden == c.hidden);
    CHECK(r.split_mode == c.split_mode);
    CHECK(r.filter_scope == c.filter_scope);
    CHECK(r.second_order == c.second_order);

    CHECK_THROWS_AS((void)config_from_json("not json"), ContractError);
    CHECK_THROWS_AS((void)config_from_json("{\"bogus_field\": 1}"), ContractError);
    CHECK_THROWS_AS((void)config_from_json("{\"epochs\": \"many\"}"), ContractError);
    // defaults alone form a valid config
    CHECK(config_from_json("{}").variant == Variant::FullDcg);
}

TEST_CASE("baseline run: plain ERM bookkeeping") {
    TrainFixture fx;
    fx.config.variant = Variant::Baseline;
    fx.config.omega = 0.0;
    fx.config.k = 0;

    RunResult run = train(fx.config, fx.data, 3, /*seed=*/1);
    REQUIRE(run.metrics.epochs.size() == static_cast<size_t>(fx.config.epochs));
    for (const EpochRecord& e : run.metrics.epochs) {
        CHECK(std::isfinite(e.train_loss));
        CHECK(e.reg_mean == 0.0);
        CHECK(e.filtered_count == 0);
        CHECK(e.holdout_accuracy >= 0.0);
        CHECK(e.holdout_accuracy <= 1.0);
    }
    CHECK(run.metrics.filter_stats.topk_count.empty());
    CHECK(run.metrics.aug_cache.empty());

    // final_accuracy is reproducible from the returned parameters
    std::vector<const Sample*> holdout;
    for (const Sample& s : fx.data.by_domain.at(3).samples) holdout.push_back(&s);
    double acc = evaluate_accuracy(run.params.spec, run.params.tensors, holdout);
    CHECK(acc == doctest::Approx(run.metrics.final_accuracy).epsilon(1e-12));
    CHECK(run.metrics.final_accuracy ==
          run.metrics.epochs.back().holdout_accuracy);

    CHECK_THROWS_AS((void)evaluate_accuracy(run.params.spec, run.params.tensors, {}),
                    ContractError);
}

TEST_CASE("inactive game terms leave the trajectory bit-identical") {
    TrainFixture fx;
    TrainConfig off = fx.config;
    off.variant = Variant::FullDcg;
    off.omega = 0.0;
    off.k = 0;
    TrainConfig aug = off;
    aug.variant = Variant::AugOnly;

    RunResult a = train(off, fx.data, 3, 2);
    RunResult b = train(aug, fx.data, 3, 2);
    CHECK(a.params.flatten() == b.params.flatten());
    REQUIRE(a.metrics.epochs.size() == b.metrics.epochs.size());
    for (size_t i = 0; i < a.metrics.epochs.size(); ++i) {
        CHECK(a.metrics.epochs[i].train_loss == b.metrics.epochs[i].train_loss);
        CHECK(a.metrics.epochs[i].holdout_accuracy == b.metrics.epochs[i].holdout_accuracy);
    }
}

TEST_CASE("full pipeline run is reproducible and persists byte-identically") {
    TrainFixture fx;
    RunResult a = train(fx.config, fx.data, 3, 7);
    RunResult b = train(fx.config, fx.data, 3, 7);
    CHECK(a.params.flatten() == b.params.flatten());
    CHECK(a.metrics.final_accuracy == b.metrics.final_accuracy);
    CHECK(a.metrics.filter_stats.topk_count == b.metrics.filter_stats.topk_count);

    // the regularizer and filter actually fired somewhere in the run
    double reg_total = 0.0;
    int filtered_total = 0;
    for (const EpochRecord& e : a.metrics.epochs) {
        reg_total += e.reg_mean;
        filtered_total += e.filtered_count;
        CHECK(e.clamp_active_fraction >= 0.0);
        CHECK(e.clamp_active_fraction <= 1.0);
    }
    CHECK(filtered_total > 0);
    CHECK(reg_total >= 0.0);

    fs::path dir = fs::temp_directory_path() / "dcg_test_train_out";
    fs::remove_all(dir);
    write_run_outputs(fx.config, fx.data, 3, 7, a, (dir / "a").string());
    write_run_outputs(fx.config, fx.data, 3, 7, b, (dir / "b").string());
    CHECK(slurp(dir / "a" / "result.json") == slurp(dir / "b" / "result.json"));
    CHECK(slurp(dir / "a" / "metrics.csv") == slurp(dir / "b" / "metrics.csv"));
    CHECK(slurp(dir / "a" / "checkpoint.bin") == slurp(dir / "b" / "checkpoint.bin"));

    ModelParams restored = load_checkpoint((dir / "a" / "checkpoint.bin").string());
    CHECK(restored.flatten() == a.params.flatten());
    fs::remove_all(dir);
}

TEST_CASE("train rejects impossible leave-one-out setups") {
    TrainFixture fx;
    CHECK_THROWS_AS((void)train(fx.config, fx.data, 99, 0), ContractError);

    // holding out one of three domains leaves two sources; V=2 would
    // leave no meta-train domain
    DatasetManifest manifest;
    manifest.class_count = 4;
    manifest.shape = {1, 8, 8};
    manifest.domains = default_domain_specs(3);
    manifest.samples_per_domain = 24;
    manifest.seed = 9;
    Dataset three = generate(manifest);

    TrainConfig c = fx.config;
    c.meta_test_domains = 2;
    CHECK_THROWS_AS((void)train(c, three, 2, 0), ContractError);
    c.meta_test_domains = 1;
    CHECK_NOTHROW((void)train(c, three, 2, 0));

    TrainConfig big = fx.config;
    big.batch_size = 1000;
    CHECK_THROWS_AS((void)train(big, fx.data, 3, 0), ContractError);
}

TEST_CASE("statistics helpers") {
    std::vector<double> x = {1, 2, 3, 4, 5};
    CHECK(spearman(x, {2, 4, 6, 8, 10}) == doctest::Approx(1.0));
    CHECK(spearman(x, {10, 8, 6, 4, 2}) == doctest::Approx(-1.0));
    // ties get average ranks; a flat series correlates at 0 by convention
    CHECK(spearman(x, {1, 1, 1, 1, 1}) == doctest::Approx(0.0));
    CHECK_THROWS_AS((void)spearman({1.0}, {2.0}), ContractError);
    CHECK_THROWS_AS((void)spearman({1.0, 2.0}, {1.0, 2.0, 3.0}), ContractError);

    CHECK(decreasing_steps({1, 2, 3}) == 0);
    CHECK(decreasing_steps({3, 2, 1}) == 2);
    CHECK(decreasing_steps({1, 3, 2, 2, 5, 4}) == 2);

    CHECK(median({3.0, 1.0, 2.0}) == doctest::Approx(2.0));
    CHECK(median({4.0, 1.0, 2.0, 3.0}) == doctest::Approx(2.5));
    CHECK_THROWS_AS((void)median({}), ContractError);
}
