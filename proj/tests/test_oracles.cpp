#include "dcg/oracles.hpp"

#include <cmath>

#include "json.hpp"
#include "doctest.h"

using namespace dcg;

namespace {

SymMatrix random_spd(Rng& rng, int dim, double eps = 0.1) {
    std::vector<double> a(static_cast<size_t>(dim) * dim);
    for (double& x : a) x = rng.uniform(-1.0, 1.0);
    SymMatrix h = SymMatrix::identity(dim, 0.0);
    for (int r = 0; r < dim; ++r)
        for (int c = 0; c < dim; ++c) {
            double acc = r == c ? eps : 0.0;
            for (int k = 0; k < dim; ++k)
                acc += a[static_cast<size_t>(k) * dim + r] * a[static_cast<size_t>(k) * dim + c];
            h.at(r, c) = acc;
        }
    return h;
}

SymMatrix random_symmetric(Rng& rng, int dim) {
    SymMatrix h = SymMatrix::identity(dim, 0.0);
    for (int r = 0; r < dim; ++r)
        for (int c = r; c < dim; ++c) {
            double x = rng.uniform(-1.0, 1.0);
            h.at(r, c) = x;
            h.at(c, r) = x;
        }
    return h;
}

QuadraticSurrogate random_surrogate(Rng& rng, int dim, int samples) {
    QuadraticSurrogate sur;
    sur.alpha = 0.1;
    sur.hessian = random_symmetric(rng, dim);
    for (int i = 0; i < samples; ++i) {
        std::vector<double> g(static_cast<size_t>(dim));
        for (double& x : g) x = rng.uniform(-1.0, 1.0);
        sur.sample_grads.push_back(std::move(g));
    }
    return sur;
}

}  // namespace

TEST_CASE("closed_form_gap: hand-computed case") {
    // H = [[2,1],[1,2]], wings {g0}, {g2}, core {g1}; the core cancels,
    // so the gap is alpha^2 * g0^T H g2 = 0.01 * 1 = 0.01.
    QuadraticSurrogate sur;
    sur.alpha = 0.1;
    sur.hessian.dim = 2;
    sur.hessian.values = {2.0, 1.0, 1.0, 2.0};
    sur.sample_grads = {{1.0, 0.0}, {9.0, -3.0}, {0.0, 1.0}};
    double gap = closed_form_gap(sur, {0, 1}, {1, 2});
    CHECK(gap == doctest::Approx(0.01).epsilon(1e-14));

    // identical coalitions: no wings, zero gap
    CHECK(closed_form_gap(sur, {0, 1}, {0, 1}) == 0.0);
}

TEST_CASE("closed_form_gap: core contribution cancels exactly") {
    Rng rng(4);
    auto sur = random_surrogate(rng, 4, 10);
    double with_core = closed_form_gap(sur, {0, 1, 2, 3}, {2, 3, 4, 5});
    double without = closed_form_gap(sur, {0, 1}, {4, 5});
    CHECK(with_core == doctest::Approx(without).epsilon(1e-14));
}

TEST_CASE("pipeline raw gap matches the closed form to 1e-9") {
    Rng rng(42);
    for (int dim : {2, 4, 8}) {
        auto sur = random_surrogate(rng, dim, 20);
        double worst = pipeline_vs_oracle(sur, 3, 3, rng, 40);
        CHECK(worst <= 1e-9);
    }
}

TEST_CASE("cholesky_definite: reconstruction and failure modes") {
    Rng rng(8);
    for (int dim : {2, 3, 5, 8}) {
        auto h = random_spd(rng, dim);
        auto l = cholesky_definite(h);
        // L^T L == H, and L is upper-triangular
        for (int r = 0; r < dim; ++r)
            for (int c = 0; c < dim; ++c) {
                double acc = 0.0;
                for (int k = 0; k <= std::min(r, c); ++k) acc += l.at(k, r) * l.at(k, c);
                CHECK(acc == doctest::Approx(h.at(r, c)).epsilon(1e-10));
                if (c < r) CHECK(l.at(r, c) == 0.0);
            }
        for (int r = 0; r < dim; ++r) CHECK(l.at(r, r) > 0.0);
    }

    SymMatrix indef;
    indef.dim = 2;
    indef.values = {1.0, 0.0, 0.0, -1.0};
    CHECK_THROWS_AS(cholesky_definite(indef), NotDefiniteError);

    SymMatrix asym;
    asym.dim = 2;
    asym.values = {1.0, 0.5, 0.2, 1.0};
    CHECK_THROWS_AS(cholesky_definite(asym), ContractError);
}

TEST_CASE("case_sign_check: exact gap formula and definiteness detection") {
    Rng rng(15);
    QuadraticSurrogate sur;
    sur.alpha = 0.1;
    sur.hessian = random_spd(rng, 3);
    std::vector<double> gi = {1.0, -0.5, 0.25}, gj = {0.3, 0.8, -0.2};
    auto rep = case_sign_check(sur, gi, gj);
    CHECK(rep.definiteness == 1);
    double expect = 0.0;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            expect += gi[static_cast<size_t>(r)] * sur.hessian.at(r, c) * gj[static_cast<size_t>(c)];
    CHECK(rep.gap == doctest::Approx(0.01 * expect).epsilon(1e-12));
    // for H > 0 the transformed inner product IS the quadratic form
    CHECK(rep.transformed_inner == doctest::Approx(expect).epsilon(1e-10));
    CHECK(rep.consistent);

    for (double& v : sur.hessian.values) v = -v;  // now H < 0
    auto neg = case_sign_check(sur, gi, gj);
    CHECK(neg.definiteness == -1);
    CHECK(neg.gap == doctest::Approx(-0.01 * expect).epsilon(1e-12));
    CHECK(neg.consistent);
}

TEST_CASE("case_sign_check: 1000 random definite trials all consistent") {
    Rng rng(77);
    int consistent = 0;
    const int trials = 1000;
    for (int t = 0; t < trials; ++t) {
        int dim = std::vector<int>{2, 4, 8}[static_cast<size_t>(rng.uniform_int(3))];
        QuadraticSurrogate sur;
        sur.alpha = rng.uniform(0.01, 0.5);
        sur.hessian = random_spd(rng, dim);
        if (rng.uniform() < 0.5)
            for (double& v : sur.hessian.values) v = -v;
        std::vector<double> gi(static_cast<size_t>(dim)), gj(static_cast<size_t>(dim));
        for (double& x : gi) x = rng.uniform(-1.0, 1.0);
        for (double& x : gj) x = rng.uniform(-1.0, 1.0);
        consistent += case_sign_check(sur, gi, gj).consistent;
    }
    CHECK(consistent == trials);
}

TEST_CASE("svd_split: reconstruction and semidefiniteness of the parts") {
    Rng rng(21);
    for (int dim : {2, 4, 6}) {
        auto h = random_symmetric(rng, dim);
        auto [pos, neg] = svd_split(h);
        for (int r = 0; r < dim; ++r)
            for (int c = 0; c < dim; ++c)
                CHECK(pos.at(r, c) + neg.at(r, c) == doctest::Approx(h.at(r, c)).epsilon(1e-10));

        // x^T H+ x >= 0 and x^T H- x <= 0 for random probes
        for (int t = 0; t < 50; ++t) {
            std::vector<double> x(static_cast<size_t>(dim));
            for (double& v : x) v = rng.uniform(-1.0, 1.0);
            double qp = 0.0, qn = 0.0;
            for (int r = 0; r < dim; ++r)
                for (int c = 0; c < dim; ++c) {
                    qp += x[static_cast<size_t>(r)] * pos.at(r, c) * x[static_cast<size_t>(c)];
                    qn += x[static_cast<size_t>(r)] * neg.at(r, c) * x[static_cast<size_t>(c)];
                }
            CHECK(qp >= -1e-10);
            CHECK(qn <= 1e-10);
        }
    }
}

TEST_CASE("SurrogateGameModel: losses match the surrogate definition") {
    QuadraticSurrogate sur;
    sur.alpha = 0.1;
    sur.hessian.dim = 2;
    sur.hessian.values = {2.0, 0.0, 0.0, 4.0};
    sur.sample_grads = {{1.0, 2.0}, {3.0, -1.0}};
    SurrogateGameModel model(sur, {0.5, -0.5});
    std::vector<int> ids = {0, 1};
    // (g0+g1) . theta = (4,1).(0.5,-0.5) = 1.5
    CHECK(model.coalition_loss(model.parameters(), ids).item() ==
          doctest::Approx(1.5).epsilon(1e-14));
    // 0.5 * (2*0.25 + 4*0.25) = 0.75
    CHECK(model.meta_test_loss(model.parameters()).item() ==
          doctest::Approx(0.75).epsilon(1e-14));
    CHECK_THROWS_AS(SurrogateGameModel(sur, {1.0, 2.0, 3.0}), ContractError);
}

TEST_CASE("verify_oracles: battery passes and emits a parseable report") {
    std::string table, json_text;
    bool ok = verify_oracles(2026, table, json_text);
    CHECK(ok);
    CHECK(table.find("[PASS]") != std::string::npos);
    CHECK(table.find("[FAIL]") == std::string::npos);
    auto j = nlohmann::json::parse(json_text);
    CHECK(j["pass"] == true);
    CHECK(j["checks"].size() == 6);
    for (const auto& c : j["checks"]) CHECK(c["pass"] == true);
}

TEST_CASE("SymMatrix::require_symmetric") {
    SymMatrix ok = SymMatrix::identity(3, 2.5);
    CHECK_NOTHROW(ok.require_symmetric());
    SymMatrix bad = ok;
    bad.at(0, 2) = 1.0;
    CHECK_THROWS_AS(bad.require_symmetric(), ContractError);
    SymMatrix empty;
    CHECK_THROWS_AS(empty.require_symmetric(), ContractError);
}
