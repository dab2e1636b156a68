#include "tlnet/pde.hpp"

#include <cmath>
#include <vector>

namespace tlnet {

// Discretization on nodes x_0 = 0, ..., x_{N-1} = 1:
//  - transport of g is upwinded by the sign of v;
//  - v rho_x uses the opposite one-sided difference, so the pair is
//    summation-by-parts adjoint and the diffusion limit is the compact
//    three-point Laplacian (<v^2> D- D+ rho);
//  - at x_0 (x_{N-1}) every difference is the inward one-sided one;
//  - inflow rows impose rho + eps g = phi, and the boundary rho rows
//    impose <g> = 0 there.

namespace {

struct Stencil {
    Index lo;  // node multiplied by -1/h
    Index hi;  // node multiplied by +1/h
};

/// Upwind difference used for g at node i for velocity v.
Stencil transport_stencil(Index i, Index n, double v) {
    if (i == 0) return {0, 1};
    if (i == n - 1) return {n - 2, n - 1};
    return v > 0.0 ? Stencil{i - 1, i} : Stencil{i, i + 1};
}

/// Difference used for rho in the g equation (downwind of the transport).
Stencil density_stencil(Index i, Index n, double v) {
    if (i == 0) return {0, 1};
    if (i == n - 1) return {n - 2, n - 1};
    return v > 0.0 ? Stencil{i, i + 1} : Stencil{i - 1, i};
}

bool is_inflow(Index i, Index n, double v) {
    return (i == 0 && v > 0.0) || (i == n - 1 && v < 0.0);
}

} // namespace

Mat RteState::distribution(double eps) const {
    Mat f = eps * g;
    f.colwise() += rho;
    return f;
}

RteState RteState::from_distribution(const Grid& grid, double eps, const Mat& f) {
    require_shape(f.rows() == grid.n_x && f.cols() == grid.n_v,
                  "RteState::from_distribution: shape");
    RteState s;
    s.rho = 0.5 * f * grid.v_weights;
    s.g = (f.colwise() - s.rho) / eps;
    return s;
}

RteStepper::RteStepper(Equation eq, double dt) : eq_(std::move(eq)), dt_(dt) {
    eq_.validate();
    if (eq_.kind != EquationKind::RadiativeTransfer)
        throw std::invalid_argument("RteStepper: equation is not RTE");
    if (!(dt_ > 0.0)) throw std::invalid_argument("RteStepper: dt must be positive");

    const Grid& grid = eq_.grid;
    const Index n = grid.n_x, nv = grid.n_v;
    const double h = grid.h, eps = eq_.eps;
    const Vec omega = 0.5 * grid.v_weights;
    const Index size = n + n * nv;

    std::vector<Eigen::Triplet<double>> t;
    t.reserve(std::size_t(size) * std::size_t(2 * nv + 6));

    // Adds coeff * <v D g>_i to row `row`.
    auto add_flux_average = [&](Index row, Index i, double coeff) {
        for (Index m = 0; m < nv; ++m) {
            const auto st = transport_stencil(i, n, grid.v[m]);
            const double c = coeff * omega[m] * grid.v[m] / h;
            t.emplace_back(row, g_index(st.hi, m), c);
            t.emplace_back(row, g_index(st.lo, m), -c);
        }
    };

    for (Index i = 0; i < n; ++i) {
        const Index row = rho_index(i);
        if (i == 0 || i == n - 1) {
            for (Index m = 0; m < nv; ++m) t.emplace_back(row, g_index(i, m), omega[m]);
        } else {
            t.emplace_back(row, row, 1.0 / dt_);
            add_flux_average(row, i, 1.0);
        }
    }

    for (Index i = 0; i < n; ++i) {
        for (Index m = 0; m < nv; ++m) {
            const Index row = g_index(i, m);
            const double v = grid.v[m];
            if (is_inflow(i, n, v)) {
                t.emplace_back(row, rho_index(i), 1.0);
                t.emplace_back(row, row, eps);
                continue;
            }
            t.emplace_back(row, row, eps * eps / dt_ + 1.0);
            const auto tg = transport_stencil(i, n, v);
            t.emplace_back(row, g_index(tg.hi, m), eps * v / h);
            t.emplace_back(row, g_index(tg.lo, m), -eps * v / h);
            add_flux_average(row, i, -eps);
            const auto tr = density_stencil(i, n, v);
            t.emplace_back(row, rho_index(tr.hi), v / h);
            t.emplace_back(row, rho_index(tr.lo), -v / h);
        }
    }

    Eigen::SparseMatrix<double> a(size, size);
    a.setFromTriplets(t.begin(), t.end());
    a.makeCompressed();
    auto solver = std::make_shared<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
    solver->compute(a);
    if (solver->info() != Eigen::Success)
        throw SolverError("RteStepper: factorization of the micro-macro system failed");
    solver_ = std::move(solver);
}

RteState RteStepper::step(const RteState& s) const {
    const Grid& grid = eq_.grid;
    const Index n = grid.n_x, nv = grid.n_v;
    const double eps = eq_.eps;
    require_shape(s.rho.size() == n && s.g.rows() == n && s.g.cols() == nv,
                  "rte_be_step: state shape");
    const Vec avg = 0.5 * s.g * grid.v_weights;
    const double scale = std::max(1.0, s.g.lpNorm<Eigen::Infinity>());
    if (avg.lpNorm<Eigen::Infinity>() > 1e-12 * scale)
        throw std::invalid_argument("rte_be_step: g must have zero velocity average");

    Vec rhs = Vec::Zero(n + n * nv);
    for (Index i = 1; i + 1 < n; ++i) rhs[rho_index(i)] = s.rho[i] / dt_;
    for (Index i = 0; i < n; ++i)
        for (Index m = 0; m < nv; ++m) {
            const double v = grid.v[m];
            if (is_inflow(i, n, v))
                rhs[g_index(i, m)] = i == 0 ? eq_.inflow_left : eq_.inflow_right;
            else
                rhs[g_index(i, m)] = eps * eps / dt_ * s.g(i, m);
        }

    Vec sol = solver_->solve(rhs);
    if (solver_->info() != Eigen::Success || !sol.allFinite())
        throw SolverError("rte_be_step: linear solve failed");

    RteState out;
    out.rho = sol.head(n);
    out.g.resize(n, nv);
    for (Index i = 0; i < n; ++i)
        for (Index m = 0; m < nv; ++m) out.g(i, m) = sol[g_index(i, m)];
    // Re-project onto zero velocity average; f = rho + eps g is unchanged.
    const Vec drift = 0.5 * out.g * grid.v_weights;
    out.rho += eps * drift;
    out.g.colwise() -= drift;
    return out;
}

RteState rte_be_step(const Equation& eq, double dt, const RteState& s) {
    return RteStepper(eq, dt).step(s);
}

Vec apply_spatial_rte(const Equation& eq, const RteState& s) {
    if (eq.kind != EquationKind::RadiativeTransfer)
        throw std::invalid_argument("apply_spatial_rte: equation is not RTE");
    const Grid& grid = eq.grid;
    const Index n = grid.n_x, nv = grid.n_v;
    const double h = grid.h, eps = eq.eps;
    const Vec omega = 0.5 * grid.v_weights;

    auto transport = [&](Index i, Index m) {
        const auto st = transport_stencil(i, n, grid.v[m]);
        return grid.v[m] * (s.g(st.hi, m) - s.g(st.lo, m)) / h;
    };
    Vec flux_avg(n);
    for (Index i = 0; i < n; ++i) {
        double acc = 0.0;
        for (Index m = 0; m < nv; ++m) acc += omega[m] * transport(i, m);
        flux_avg[i] = acc;
    }

    Vec out = Vec::Zero(n + n * nv);
    for (Index i = 1; i + 1 < n; ++i) out[i] = -flux_avg[i];
    for (Index i = 0; i < n; ++i)
        for (Index m = 0; m < nv; ++m) {
            const double v = grid.v[m];
            if (is_inflow(i, n, v)) continue;
            const auto tr = density_stencil(i, n, v);
            const double rho_x = (s.rho[tr.hi] - s.rho[tr.lo]) / h;
            out[n + i * nv + m] =
                (-s.g(i, m) - eps * (transport(i, m) - flux_avg[i]) - v * rho_x) / (eps * eps);
        }
    return out;
}

double anisotropy(const Grid& grid, const Mat& f) {
    require_shape(f.rows() == grid.n_x && f.cols() == grid.n_v, "anisotropy: shape");
    const Vec rho = 0.5 * f * grid.v_weights;
    const Mat dev = f.colwise() - rho;
    const double num = (dev.array().square().matrix() * (0.5 * grid.v_weights)).sum();
    const double den = rho.squaredNorm();
    if (den == 0.0) throw UndefinedError("anisotropy: zero density");
    return std::sqrt(num / den);
}

} // namespace tlnet
