#include "dcg/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "json.hpp"

namespace dcg {

SymMatrix SymMatrix::identity(int dim, double scale) {
    SymMatrix m;
    m.dim = dim;
    m.values.assign(static_cast<size_t>(dim) * dim, 0.0);
    for (int i = 0; i < dim; ++i) m.at(i, i) = scale;
    return m;
}

void SymMatrix::require_symmetric(double tol) const {
    if (dim < 1) throw ContractError("SymMatrix: dimension must be >= 1");
    for (int r = 0; r < dim; ++r)
        for (int c = r + 1; c < dim; ++c)
            if (std::fabs(at(r, c) - at(c, r)) > tol)
                throw ContractError("SymMatrix: not symmetric");
}

namespace {

std::vector<double> wing_sum(const QuadraticSurrogate& sur, const std::vector<int>& in,
                             const std::vector<int>& out) {
    std::set<int> exclude(out.begin(), out.end());
    const int d = sur.hessian.dim;
    std::vector<double> acc(static_cast<size_t>(d), 0.0);
    for (int i : in) {
        if (exclude.count(i)) continue;
        const auto& g = sur.sample_grads.at(static_cast<size_t>(i));
        for (int k = 0; k < d; ++k) acc[static_cast<size_t>(k)] += g[static_cast<size_t>(k)];
    }
    return acc;
}

double quad_form(const SymMatrix& h, const std::vector<double>& a,
                 const std::vector<double>& b) {
    double acc = 0.0;
    for (int r = 0; r < h.dim; ++r)
        for (int c = 0; c < h.dim; ++c)
            acc += a[static_cast<size_t>(r)] * h.at(r, c) * b[static_cast<size_t>(c)];
    return acc;
}

std::vector<double> matvec_upper(const SymMatrix& l, const std::vector<double>& v) {
    std::vector<double> out(static_cast<size_t>(l.dim), 0.0);
    for (int r = 0; r < l.dim; ++r)
        for (int c = r; c < l.dim; ++c)
            out[static_cast<size_t>(r)] += l.at(r, c) * v[static_cast<size_t>(c)];
    return out;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

}  // namespace

double closed_form_gap(const QuadraticSurrogate& surrogate, const std::vector<int>& s,
                       const std::vector<int>& t) {
    surrogate.hessian.require_symmetric();
    auto a = wing_sum(surrogate, s, t);  // Σ over S\T
    auto c = wing_sum(surrogate, t, s);  // Σ over T\S
    return surrogate.alpha * surrogate.alpha * quad_form(surrogate.hessian, a, c);
}

SymMatrix cholesky_definite(const SymMatrix& h) {
    h.require_symmetric(1e-10);
    const int d = h.dim;
    SymMatrix l;
    l.dim = d;
    l.values.assign(static_cast<size_t>(d) * d, 0.0);
    // H = L^T L with L upper-triangular: fill row by row.
    for (int r = 0; r < d; ++r) {
        for (int c = r; c < d; ++c) {
            double acc = h.at(r, c);
            for (int k = 0; k < r; ++k) acc -= l.at(k, r) * l.at(k, c);
            if (c == r) {
                if (acc <= 0.0) throw NotDefiniteError("cholesky: non-positive pivot");
                l.at(r, r) = std::sqrt(acc);
            } else {
                l.at(r, c) = acc / l.at(r, r);
            }
        }
    }
    return l;
}

CaseSignReport case_sign_check(const QuadraticSurrogate& surrogate,
                               const std::vector<double>& g_i,
                               const std::vector<double>& g_j) {
    const SymMatrix& h = surrogate.hessian;
    h.require_symmetric();
    CaseSignReport report;
    SymMatrix factor;
    try {
        factor = cholesky_definite(h);
        report.definiteness = +1;
    } catch (const NotDefiniteError&) {
        SymMatrix neg = h;
        for (double& v : neg.values) v = -v;
        factor = cholesky_definite(neg);  // rethrows when indefinite
        report.definiteness = -1;
    }
    auto ti = matvec_upper(factor, g_i);
    auto tj = matvec_upper(factor, g_j);
    report.transformed_inner = dot(ti, tj);
    const double a2 = surrogate.alpha * surrogate.alpha;
    report.gap = a2 * quad_form(h, g_i, g_j);
    const bool gap_nonpos = report.gap <= 1e-15;
    const bool inner_cond = report.definiteness > 0 ? report.transformed_inner <= 1e-15
                                                    : report.transformed_inner >= -1e-15;
    report.consistent = (gap_nonpos == inner_cond);
    return report;
}

std::pair<SymMatrix, SymMatrix> svd_split(const SymMatrix& h) {
    h.require_symmetric(1e-10);
    const int d = h.dim;
    // cyclic Jacobi rotations
    SymMatrix a = h;
    std::vector<std::vector<double>> v(static_cast<size_t>(d),
                                       std::vector<double>(static_cast<size_t>(d), 0.0));
    for (int i = 0; i < d; ++i) v[static_cast<size_t>(i)][static_cast<size_t>(i)] = 1.0;

    auto offdiag = [&]() {
        double s = 0.0;
        for (int r = 0; r < d; ++r)
            for (int c = r + 1; c < d; ++c) s += a.at(r, c) * a.at(r, c);
        return std::sqrt(s);
    };
    for (int sweep = 0; sweep < 100 && offdiag() > 1e-12; ++sweep) {
        for (int p = 0; p < d; ++p) {
            for (int q = p + 1; q < d; ++q) {
                if (std::fabs(a.at(p, q)) < 1e-15) continue;
                double theta = 0.5 * std::atan2(2.0 * a.at(p, q), a.at(q, q) - a.at(p, p));
                double c = std::cos(theta), s = std::sin(theta);
                for (int k = 0; k < d; ++k) {
                    double akp = a.at(k, p), akq = a.at(k, q);
                    a.at(k, p) = c * akp - s * akq;
                    a.at(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < d; ++k) {
                    double apk = a.at(p, k), aqk = a.at(q, k);
                    a.at(p, k) = c * apk - s * aqk;
                    a.at(q, k) = s * apk + c * aqk;
                }
                for (int k = 0; k < d; ++k) {
                    double vkp = v[static_cast<size_t>(k)][static_cast<size_t>(p)];
                    double vkq = v[static_cast<size_t>(k)][static_cast<size_t>(q)];
                    v[static_cast<size_t>(k)][static_cast<size_t>(p)] = c * vkp - s * vkq;
                    v[static_cast<size_t>(k)][static_cast<size_t>(q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    SymMatrix pos = SymMatrix::identity(d, 0.0), neg = SymMatrix::identity(d, 0.0);
    for (int e = 0; e < d; ++e) {
        double lambda = a.at(e, e);
        SymMatrix& dst = lambda >= 0.0 ? pos : neg;
        for (int r = 0; r < d; ++r)
            for (int c = 0; c < d; ++c)
                dst.at(r, c) += lambda * v[static_cast<size_t>(r)][static_cast<size_t>(e)] *
                                v[static_cast<size_t>(c)][static_cast<size_t>(e)];
    }
    return {pos, neg};
}

SurrogateGameModel::SurrogateGameModel(const QuadraticSurrogate& surrogate,
                                       std::vector<double> theta0)
    : surrogate_(surrogate) {
    const int d = surrogate.hessian.dim;
    if (theta0.empty()) theta0.assign(static_cast<size_t>(d), 0.0);
    if (static_cast<int>(theta0.size()) != d)
        throw ContractError("SurrogateGameModel: theta0 dimension mismatch");
    theta_ = Tensor::param({d, 1}, std::move(theta0));
    h_matrix_ = Tensor::constant({d, d}, surrogate.hessian.values);
}

Tensor SurrogateGameModel::coalition_loss(std::span<const Tensor> params,
                                          std::span<const int> ids) {
    if (ids.empty()) throw ContractError("coalition_loss: empty coalition");
    const int d = surrogate_.hessian.dim;
    std::vector<double> gsum(static_cast<size_t>(d), 0.0);
    for (int i : ids) {
        const auto& g = surrogate_.sample_grads.at(static_cast<size_t>(i));
        for (int k = 0; k < d; ++k) gsum[static_cast<size_t>(k)] += g[static_cast<size_t>(k)];
    }
    return matmul(Tensor::constant({1, d}, std::move(gsum)), params[0]);
}

Tensor SurrogateGameModel::meta_test_loss(std::span<const Tensor> params) {
    return scale(matmul(transpose(params[0]), matmul(h_matrix_, params[0])), 0.5);
}

double pipeline_vs_oracle(const QuadraticSurrogate& surrogate, int core_size, int wing_size,
                          Rng& rng, int trials) {
    const int pool = static_cast<int>(surrogate.sample_grads.size());
    GameConfig cfg;
    cfg.alpha = surrogate.alpha;
    cfg.core_size = core_size;
    cfg.wing_size = wing_size;
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
        auto quad = sample_coalitions(pool, core_size, wing_size, rng);
        std::vector<double> theta0(static_cast<size_t>(surrogate.hessian.dim));
        for (double& x : theta0) x = rng.uniform(-1.0, 1.0);
        SurrogateGameModel model(surrogate, theta0);
        auto res = supermodularity_loss(model, quad, cfg);
        double oracle = closed_form_gap(surrogate, quad.s, quad.t);
        worst = std::max(worst, std::fabs(res.raw_gap - oracle));
    }
    return worst;
}

namespace {

QuadraticSurrogate random_surrogate(Rng& rng, int dim, int samples, bool definite,
                                    int sign = +1) {
    QuadraticSurrogate sur;
    sur.alpha = 0.1;
    sur.hessian = SymMatrix::identity(dim, 0.0);
    if (definite) {
        // A^T A + eps I, optionally negated
        std::vector<double> a(static_cast<size_t>(dim) * dim);
        for (double& x : a) x = rng.uniform(-1.0, 1.0);
        for (int r = 0; r < dim; ++r)
            for (int c = 0; c < dim; ++c) {
                double acc = r == c ? 0.1 : 0.0;
                for (int k = 0; k < dim; ++k)
                    acc += a[static_cast<size_t>(k) * dim + r] * a[static_cast<size_t>(k) * dim + c];
                sur.hessian.at(r, c) = sign * acc;
            }
    } else {
        for (int r = 0; r < dim; ++r)
            for (int c = r; c < dim; ++c) {
                double x = rng.uniform(-1.0, 1.0);
                sur.hessian.at(r, c) = x;
                sur.hessian.at(c, r) = x;
            }
    }
    for (int i = 0; i < samples; ++i) {
        std::vector<double> g(static_cast<size_t>(dim));
        for (double& x : g) x = rng.uniform(-1.0, 1.0);
        sur.sample_grads.push_back(std::move(g));
    }
    return sur;
}

}  // namespace

bool verify_oracles(std::uint64_t seed, std::string& table_out, std::string& json_out) {
    Rng rng(seed);
    nlohmann::json report;
    std::ostringstream table;
    bool all_ok = true;

    auto record = [&](const std::string& name, bool ok, double value, const char* unit) {
        table << (ok ? "[PASS] " : "[FAIL] ") << name << " (" << unit << " = " << value << ")\n";
        report["checks"].push_back({{"name", name}, {"pass", ok}, {"value", value}});
        all_ok = all_ok && ok;
    };

    {  // pipeline vs closed form, 100 random quads
        auto sur = random_surrogate(rng, 4, 24, /*definite=*/false);
        double worst = pipeline_vs_oracle(sur, 3, 3, rng, 100);
        record("pipeline_vs_oracle", worst <= 1e-9, worst, "max_abs_diff");
    }
    {  // homogeneity in alpha
        auto sur = random_surrogate(rng, 3, 12, false);
        auto quad = sample_coalitions(12, 2, 2, rng);
        double base = closed_form_gap(sur, quad.s, quad.t);
        bool ok = true;
        for (double c : {0.5, 2.0}) {
            QuadraticSurrogate scaled = sur;
            scaled.alpha *= c;
            double got = closed_form_gap(scaled, quad.s, quad.t);
            ok = ok && std::fabs(got - c * c * base) <= 1e-12 * std::max(1.0, std::fabs(base));
        }
        record("alpha_homogeneity", ok, 0.0, "max_abs_diff");
    }
    {  // symmetry of the closed form
        auto sur = random_surrogate(rng, 4, 16, false);
        double worst = 0.0;
        for (int t = 0; t < 50; ++t) {
            auto quad = sample_coalitions(16, 2, 3, rng);
            worst = std::max(worst, std::fabs(closed_form_gap(sur, quad.s, quad.t) -
                                              closed_form_gap(sur, quad.t, quad.s)));
        }
        record("gap_symmetry", worst <= 1e-12, worst, "max_abs_diff");
    }
    {  // case-sign consistency over definite Hessians
        int consistent = 0;
        const int trials = 1000;
        for (int t = 0; t < trials; ++t) {
            int dim = std::vector<int>{2, 4, 8}[static_cast<size_t>(rng.uniform_int(3))];
            int sign = rng.uniform() < 0.5 ? +1 : -1;
            auto sur = random_surrogate(rng, dim, 2, /*definite=*/true, sign);
            std::vector<double> gi(static_cast<size_t>(dim)), gj(static_cast<size_t>(dim));
            for (double& x : gi) x = rng.uniform(-1.0, 1.0);
            for (double& x : gj) x = rng.uniform(-1.0, 1.0);
            if (case_sign_check(sur, gi, gj).consistent) ++consistent;
        }
        record("case_sign_consistency", consistent == trials, consistent, "consistent_trials");
    }
    {  // eigen split reconstruction
        double worst = 0.0;
        for (int t = 0; t < 20; ++t) {
            auto sur = random_surrogate(rng, 4, 1, false);
            auto [pos, neg] = svd_split(sur.hessian);
            for (int r = 0; r < 4; ++r)
                for (int c = 0; c < 4; ++c)
                    worst = std::max(worst, std::fabs(pos.at(r, c) + neg.at(r, c) -
                                                      sur.hessian.at(r, c)));
        }
        record("eigen_split_reconstruction", worst <= 1e-10, worst, "max_abs_diff");
    }
    {  // Cholesky reconstruction
        auto sur = random_surrogate(rng, 5, 1, true);
        auto l = cholesky_definite(sur.hessian);
        double worst = 0.0;
        for (int r = 0; r < 5; ++r)
            for (int c = 0; c < 5; ++c) {
                double acc = 0.0;
                for (int k = 0; k <= std::min(r, c); ++k) acc += l.at(k, r) * l.at(k, c);
                worst = std::max(worst, std::fabs(acc - sur.hessian.at(r, c)));
            }
        record("cholesky_reconstruction", worst <= 1e-10, worst, "max_abs_diff");
    }

    report["pass"] = all_ok;
    report["seed"] = seed;
    table_out = table.str();
    json_out = report.dump(2);
    return all_ok;
}

}  // namespace dcg
