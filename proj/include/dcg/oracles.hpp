// Analytical verification of the regularizer's second-order behavior:
// closed-form gaps on a quadratic surrogate, Cholesky-based sign
// analysis, and a pipeline-vs-closed-form comparison.
#pragma once

#include <string>
#include <vector>

#include "dcg/game.hpp"
#include "dcg/rng.hpp"

namespace dcg {

// Symmetric d x d matrix stored row-major.
struct SymMatrix {
    int dim = 0;
    std::vector<double> values;

    double at(int r, int c) const { return values[static_cast<size_t>(r) * dim + c]; }
    double& at(int r, int c) { return values[static_cast<size_t>(r) * dim + c]; }
    static SymMatrix identity(int dim, double scale = 1.0);
    void require_symmetric(double tol = 1e-12) const;
};

struct NotDefiniteError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Per-sample meta-train losses are linear (g_i^T θ) and the meta-test
// loss is quadratic (½ θ^T H θ), so the second-order Taylor expansion
// of the gap is exact.
struct QuadraticSurrogate {
    SymMatrix hessian;
    std::vector<std::vector<double>> sample_grads;  // one g_i per sample
    double alpha = 0.1;
};

// α² (Σ_{i∈S\T} g_i)^T H (Σ_{j∈T\S} g_j); shared-core terms cancel.
double closed_form_gap(const QuadraticSurrogate& surrogate, const std::vector<int>& s,
                       const std::vector<int>& t);

// Upper-triangular L with positive diagonal and L^T L = H.
// Throws NotDefiniteError when H is not positive definite.
SymMatrix cholesky_definite(const SymMatrix& h);

struct CaseSignReport {
    int definiteness = 0;  // +1 for H ≻ 0, -1 for H ≺ 0
    double transformed_inner = 0.0;  // ∇̃_i^T ∇̃_j
    double gap = 0.0;
    bool consistent = false;
};

// Checks the sign relations: for H ≻ 0, gap ≤ 0 ⇔ ∇̃_i^T∇̃_j ≤ 0;
// for H ≺ 0 (factoring -H), gap ≤ 0 ⇔ ∇̃_i^T∇̃_j ≥ 0.
CaseSignReport case_sign_check(const QuadraticSurrogate& surrogate,
                               const std::vector<double>& g_i,
                               const std::vector<double>& g_j);

// Eigendecomposition split H = H+ + H- with H+ ⪰ 0 and H- ⪯ 0.
// Cyclic Jacobi rotations; intended for small d.
std::pair<SymMatrix, SymMatrix> svd_split(const SymMatrix& h);

// Wires the surrogate through the domain-game pipeline and reports the
// worst |pipeline raw gap - closed_form_gap| over random quads.
double pipeline_vs_oracle(const QuadraticSurrogate& surrogate, int core_size, int wing_size,
                          Rng& rng, int trials);

// GameModel over the surrogate: coalition loss Σ g_i^T θ (sum),
// meta-test loss ½ θ^T H θ.
class SurrogateGameModel final : public GameModel {
  public:
    explicit SurrogateGameModel(const QuadraticSurrogate& surrogate,
                                std::vector<double> theta0 = {});
    std::span<const Tensor> parameters() const override { return {&theta_, 1}; }
    Tensor coalition_loss(std::span<const Tensor> params, std::span<const int> ids) override;
    Tensor meta_test_loss(std::span<const Tensor> params) override;

  private:
    const QuadraticSurrogate& surrogate_;
    Tensor theta_;     // [d,1] grad-tracked
    Tensor h_matrix_;  // constant
};

// Runs the oracle battery and renders a pass/fail table; returns true
// when everything passed. `json_out` receives a machine-readable report.
bool verify_oracles(std::uint64_t seed, std::string& table_out, std::string& json_out);

}  // namespace dcg
