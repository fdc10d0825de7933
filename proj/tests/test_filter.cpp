#include "dcg/filter.hpp"

#include <cmath>

#include "dcg/game.hpp"
#include "dcg/synth.hpp"
#include "doctest.h"

using namespace dcg;

namespace {

struct FilterFixture {
    DatasetManifest manifest;
    Dataset data;
    MlpSpec spec;
    ModelParams params;
    std::vector<const Sample*> table;
    std::vector<const Sample*> meta_test;

    explicit FilterFixture(std::uint64_t seed = 5) {
        manifest.class_count = 3;
        manifest.shape = {1, 8, 8};
        manifest.domains = default_domain_specs(3);
        manifest.samples_per_domain = 10;
        manifest.seed = seed;
        data = generate(manifest);
        spec = MlpSpec{manifest.shape.numel(), {12}, manifest.class_count};
        Rng rng(seed);
        params = ModelParams::init(spec, rng);
        for (int d = 0; d < 2; ++d)
            for (const Sample& s : data.by_domain.at(d).samples) table.push_back(&s);
        for (const Sample& s : data.by_domain.at(2).samples) meta_test.push_back(&s);
    }
};

}  // namespace

TEST_CASE("score_samples matches the directional derivative along each input") {
    FilterFixture fx;
    MlpGameModel model(fx.spec, fx.params.tensors, fx.table, fx.meta_test);
    std::vector<int> ids = {0, 3, 7, 12};
    Tensor loss = model.coalition_loss(fx.params.tensors, ids);
    auto board = score_samples(loss, model, ids);
    REQUIRE(board.scores.size() == ids.size());

    // score_i = x_i . grad_{x_i} L = d/dt L(x with row i scaled by 1+t) at t=0
    const double eps = 1e-6;
    auto loss_with_row_scaled = [&](int row, double factor) {
        Sample bumped = *fx.table[static_cast<size_t>(row)];
        for (double& v : bumped.features) v *= factor;
        std::vector<const Sample*> bumped_table = fx.table;
        bumped_table[static_cast<size_t>(row)] = &bumped;
        MlpGameModel m(fx.spec, fx.params.tensors, bumped_table, fx.meta_test);
        return m.coalition_loss(fx.params.tensors, ids).item();
    };
    for (int row : ids) {
        double fd = (loss_with_row_scaled(row, 1.0 + eps) -
                     loss_with_row_scaled(row, 1.0 - eps)) /
                    (2.0 * eps);
        double score = board.scores.at(fx.table[static_cast<size_t>(row)]->id);
        CHECK(score == doctest::Approx(fd).epsilon(1e-4));
    }
}

TEST_CASE("score_samples on a clamped loss yields all-zero scores") {
    FilterFixture fx;
    MlpGameModel model(fx.spec, fx.params.tensors, fx.table, fx.meta_test);
    std::vector<int> ids = {1, 4, 6};
    // relu of a guaranteed-negative scalar behaves exactly like a
    // clamped regularizer: constant zero with zero subgradient
    Tensor raw = model.coalition_loss(fx.params.tensors, ids);
    Tensor clamped = relu(scale(add(mul(raw, raw), Tensor::full(raw.shape(), 1.0)), -1.0));
    CHECK(clamped.item() == 0.0);
    auto board = score_samples(clamped, model, ids);
    for (const auto& [_, s] : board.scores) CHECK(s == 0.0);
    CHECK(select_discard(board, 2).empty());
}

TEST_CASE("select_discard: top-k with ascending-id tie break") {
    ScoreBoard board;
    board.scores = {{10, 3.0}, {11, 5.0}, {12, 5.0}, {13, 1.0}, {14, -2.0}};

    CHECK(select_discard(board, 0).empty());
    CHECK(select_discard(board, 1) == std::set<std::int64_t>{11});  // lower id wins the tie
    CHECK(select_discard(board, 2) == std::set<std::int64_t>{11, 12});
    CHECK(select_discard(board, 3) == std::set<std::int64_t>{10, 11, 12});
    CHECK_THROWS_AS(select_discard(board, -1), ContractError);
}

TEST_CASE("select_discard: k above the scored count clamps to everything") {
    ScoreBoard board;
    board.scores = {{1, 0.5}, {2, 0.25}};
    auto out = select_discard(board, 99);
    CHECK(out == std::set<std::int64_t>{1, 2});
}

TEST_CASE("select_discard: empty board and zero-signal board discard nothing") {
    ScoreBoard empty;
    CHECK(select_discard(empty, 5).empty());
    ScoreBoard flat;
    flat.scores = {{1, 0.0}, {2, 0.0}, {3, 0.0}};
    CHECK(select_discard(flat, 2).empty());
}

TEST_CASE("filtered_supervision drops exactly the discard set") {
    FilterFixture fx;
    std::vector<const Sample*> batch(fx.table.begin(), fx.table.begin() + 6);

    Tensor all = filtered_supervision(fx.spec, fx.params.tensors, batch, {});
    std::set<std::int64_t> discard = {batch[1]->id, batch[4]->id};
    Tensor kept = filtered_supervision(fx.spec, fx.params.tensors, batch, discard);

    // reference: mean cross-entropy over the four surviving samples
    std::vector<const Sample*> survivors = {batch[0], batch[2], batch[3], batch[5]};
    Tensor ref = filtered_supervision(fx.spec, fx.params.tensors, survivors, {});
    CHECK(kept.item() == doctest::Approx(ref.item()).epsilon(1e-12));
    CHECK(kept.item() != doctest::Approx(all.item()).epsilon(1e-12));

    std::set<std::int64_t> everything;
    for (const Sample* s : batch) everything.insert(s->id);
    CHECK_THROWS_AS(filtered_supervision(fx.spec, fx.params.tensors, batch, everything),
                    ContractError);
}

TEST_CASE("noisy-label samples attract higher discard scores than clean ones") {
    // With label noise present and a briefly trained model, Input×Gradient
    // scores should flag noisy samples more often than clean ones in
    // aggregate across seeds. (At random initialization there is no signal.)
    int noisy_hits = 0, clean_hits = 0, noisy_total = 0, clean_total = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        DatasetManifest m;
        m.class_count = 3;
        m.shape = {1, 8, 8};
        m.domains = default_domain_specs(3);
        m.samples_per_domain = 16;
        m.label_noise = 0.25;
        m.seed = 40 + seed;
        auto data = generate(m);
        MlpSpec spec{m.shape.numel(), {12}, m.class_count};
        Rng rng(seed);
        ModelParams params = ModelParams::init(spec, rng);

        std::vector<const Sample*> table;
        std::map<std::int64_t, bool> is_noisy;
        for (int d = 0; d < 2; ++d) {
            const auto& dd = data.by_domain.at(d);
            for (size_t i = 0; i < dd.samples.size(); ++i) {
                table.push_back(&dd.samples[i]);
                is_noisy[dd.samples[i].id] = dd.flags.noisy[i];
            }
        }
        std::vector<const Sample*> meta_test;
        for (const Sample& s : data.by_domain.at(2).samples) meta_test.push_back(&s);

        OptimizerState opt;
        opt.lr = 0.05;
        opt.weight_decay = 0.0;
        for (int step = 0; step < 40; ++step) {
            Tensor sup = filtered_supervision(spec, params.tensors, table, {});
            auto grads = backward(sup, params.tensors);
            sgd_step(params, grads, opt, 0.0);
        }

        MlpGameModel model(spec, params.tensors, table, meta_test);
        std::vector<int> ids(table.size());
        for (size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
        Tensor loss = model.coalition_loss(params.tensors, ids);
        auto board = score_samples(loss, model, ids);
        auto discard = select_discard(board, 6);
        for (std::int64_t id : discard) (is_noisy.at(id) ? noisy_hits : clean_hits)++;
        for (const auto& [id, noisy] : is_noisy) (noisy ? noisy_total : clean_total)++;
    }
    double noisy_rate = static_cast<double>(noisy_hits) / noisy_total;
    double clean_rate = static_cast<double>(clean_hits) / clean_total;
    CHECK(noisy_rate > clean_rate);
}
