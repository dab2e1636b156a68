#include "tlnet/pde.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>

namespace tlnet {

std::string to_string(BoundaryTag tag) {
    switch (tag) {
    case BoundaryTag::Dirichlet: return "dirichlet";
    case BoundaryTag::Periodic: return "periodic";
    case BoundaryTag::Inflow: return "inflow";
    }
    return "unknown";
}

BoundaryTag boundary_from_string(const std::string& s) {
    if (s == "dirichlet") return BoundaryTag::Dirichlet;
    if (s == "periodic") return BoundaryTag::Periodic;
    if (s == "inflow") return BoundaryTag::Inflow;
    throw std::invalid_argument("unknown boundary tag: " + s);
}

std::string to_string(EquationKind kind) {
    switch (kind) {
    case EquationKind::ReactionDiffusion: return "rd";
    case EquationKind::AllenCahn: return "ac";
    case EquationKind::CahnHilliard: return "ch";
    case EquationKind::RadiativeTransfer: return "rte";
    }
    return "unknown";
}

EquationKind equation_from_string(const std::string& s) {
    if (s == "rd") return EquationKind::ReactionDiffusion;
    if (s == "ac") return EquationKind::AllenCahn;
    if (s == "ch") return EquationKind::CahnHilliard;
    if (s == "rte") return EquationKind::RadiativeTransfer;
    throw std::invalid_argument("unknown equation kind: " + s);
}

std::string to_string(Scheme s) {
    return s == Scheme::BackwardEuler ? "backward_euler" : "crank_nicolson";
}

Scheme scheme_from_string(const std::string& s) {
    if (s == "backward_euler" || s == "be") return Scheme::BackwardEuler;
    if (s == "crank_nicolson" || s == "cn") return Scheme::CrankNicolson;
    throw std::invalid_argument("unknown scheme: " + s);
}

std::pair<Vec, Vec> gauss_legendre(Index n) {
    require_shape(n >= 1, "gauss_legendre: need at least one node");
    // Golub-Welsch: eigen-decomposition of the symmetric Jacobi matrix.
    Mat jacobi = Mat::Zero(n, n);
    for (Index k = 1; k < n; ++k) {
        const double beta = double(k) / std::sqrt(4.0 * double(k) * double(k) - 1.0);
        jacobi(k, k - 1) = beta;
        jacobi(k - 1, k) = beta;
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(jacobi);
    Vec nodes = es.eigenvalues();
    Vec weights = 2.0 * es.eigenvectors().row(0).transpose().array().square();
    return {nodes, weights};
}

Grid Grid::dirichlet(Index n_x) {
    require_shape(n_x >= 3, "Grid::dirichlet: need at least 3 points");
    Grid g;
    g.n_x = n_x;
    g.h = 1.0 / double(n_x - 1);
    g.boundary = BoundaryTag::Dirichlet;
    g.x = Vec::LinSpaced(n_x, 0.0, 1.0);
    return g;
}

Grid Grid::periodic(Index n_x) {
    require_shape(n_x >= 3, "Grid::periodic: need at least 3 points");
    Grid g;
    g.n_x = n_x;
    g.h = 1.0 / double(n_x);
    g.boundary = BoundaryTag::Periodic;
    g.x.resize(n_x);
    for (Index i = 0; i < n_x; ++i) g.x[i] = double(i) / double(n_x);
    return g;
}

Grid Grid::phase_space(Index n_x, Index n_v) {
    require_shape(n_x >= 3, "Grid::phase_space: need at least 3 spatial points");
    require_shape(n_v >= 2 && n_v % 2 == 0, "Grid::phase_space: velocity count must be even");
    Grid g = dirichlet(n_x);
    g.boundary = BoundaryTag::Inflow;
    g.n_v = n_v;
    std::tie(g.v, g.v_weights) = gauss_legendre(n_v);
    return g;
}

Equation Equation::reaction_diffusion(double d, double k, Grid grid) {
    Equation e;
    e.kind = EquationKind::ReactionDiffusion;
    e.d = d;
    e.k = k;
    e.grid = std::move(grid);
    e.validate();
    return e;
}

Equation Equation::allen_cahn(double d1, double d2, Grid grid) {
    Equation e;
    e.kind = EquationKind::AllenCahn;
    e.d1 = d1;
    e.d2 = d2;
    e.grid = std::move(grid);
    e.validate();
    return e;
}

Equation Equation::cahn_hilliard(double d1, double d2, Grid grid) {
    Equation e;
    e.kind = EquationKind::CahnHilliard;
    e.d1 = d1;
    e.d2 = d2;
    e.grid = std::move(grid);
    e.validate();
    return e;
}

Equation Equation::radiative_transfer(double eps, Grid grid) {
    Equation e;
    e.kind = EquationKind::RadiativeTransfer;
    e.eps = eps;
    e.grid = std::move(grid);
    e.validate();
    return e;
}

void Equation::validate() const {
    auto finite = [](double v) { return std::isfinite(v); };
    if (!finite(d) || !finite(k) || !finite(d1) || !finite(d2) || !finite(eps))
        throw std::invalid_argument("Equation: non-finite parameter");
    require_shape(grid.n_x >= 3 && grid.x.size() == grid.n_x, "Equation: grid not initialized");
    switch (kind) {
    case EquationKind::ReactionDiffusion:
        if (!(d > 0.0)) throw std::invalid_argument("Equation: diffusion d must be positive");
        if (grid.boundary == BoundaryTag::Inflow)
            throw std::invalid_argument("Equation: RD needs a dirichlet or periodic grid");
        break;
    case EquationKind::AllenCahn:
    case EquationKind::CahnHilliard:
        if (!(d1 > 0.0)) throw std::invalid_argument("Equation: d1 must be positive");
        if (grid.boundary == BoundaryTag::Inflow)
            throw std::invalid_argument("Equation: AC/CH need a dirichlet or periodic grid");
        break;
    case EquationKind::RadiativeTransfer:
        if (!(eps > 0.0)) throw std::invalid_argument("Equation: eps must be positive");
        if (grid.boundary != BoundaryTag::Inflow || grid.n_v == 0)
            throw std::invalid_argument("Equation: RTE needs a phase-space grid");
        break;
    }
}

bool Equation::is_linear() const {
    switch (kind) {
    case EquationKind::ReactionDiffusion: return k == 0.0;
    case EquationKind::AllenCahn:
    case EquationKind::CahnHilliard: return d2 == 0.0;
    case EquationKind::RadiativeTransfer: return true;
    }
    return false;
}

bool Equation::is_dissipative() const {
    return kind != EquationKind::RadiativeTransfer && is_linear();
}

namespace {

void require_1d(const Equation& eq) {
    if (eq.kind == EquationKind::RadiativeTransfer)
        throw std::invalid_argument("operator not defined for the phase-space equation");
}

/// Zeroes the endpoint rows on Dirichlet grids.
void clamp_boundary_rows(const Grid& grid, Mat& m) {
    if (grid.boundary != BoundaryTag::Periodic) {
        m.row(0).setZero();
        m.row(m.rows() - 1).setZero();
    }
}

Index wrap(Index i, Index n) { return ((i % n) + n) % n; }

/// Value of column block u at row j as seen by the stencil: wrapped on
/// periodic grids, zero at and beyond the Dirichlet endpoints.
auto stencil_row(const Grid& grid, const Mat& u, Index j) -> Eigen::RowVectorXd {
    const Index n = grid.n_x;
    if (grid.boundary == BoundaryTag::Periodic) return u.row(wrap(j, n));
    if (j <= 0 || j >= n - 1) return Eigen::RowVectorXd::Zero(u.cols());
    return u.row(j);
}

Eigen::RowVectorXd laplacian_at(const Grid& grid, const Mat& u, Index i) {
    const Index n = grid.n_x;
    if (grid.boundary != BoundaryTag::Periodic && (i <= 0 || i >= n - 1))
        return Eigen::RowVectorXd::Zero(u.cols());
    return (stencil_row(grid, u, i - 1) - 2.0 * stencil_row(grid, u, i) +
            stencil_row(grid, u, i + 1)) /
           (grid.h * grid.h);
}

bool is_boundary_row(const Grid& grid, Index i) {
    return grid.boundary != BoundaryTag::Periodic && (i == 0 || i == grid.n_x - 1);
}

} // namespace

Mat laplacian(const Grid& grid, const Mat& u) {
    const Index n = grid.n_x;
    require_shape(u.rows() == n, "laplacian: state length does not match grid");
    const double inv_h2 = 1.0 / (grid.h * grid.h);
    Mat out(n, u.cols());
    if (grid.boundary == BoundaryTag::Periodic) {
        out.middleRows(1, n - 2) =
            (u.topRows(n - 2) - 2.0 * u.middleRows(1, n - 2) + u.bottomRows(n - 2)) * inv_h2;
        out.row(0) = (u.row(n - 1) - 2.0 * u.row(0) + u.row(1)) * inv_h2;
        out.row(n - 1) = (u.row(n - 2) - 2.0 * u.row(n - 1) + u.row(0)) * inv_h2;
        return out;
    }
    Mat z = u;
    z.row(0).setZero();
    z.row(n - 1).setZero();
    out.middleRows(1, n - 2) =
        (z.topRows(n - 2) - 2.0 * z.middleRows(1, n - 2) + z.bottomRows(n - 2)) * inv_h2;
    out.row(0).setZero();
    out.row(n - 1).setZero();
    return out;
}

Eigen::SparseMatrix<double> laplacian_matrix(const Grid& grid) {
    const Index n = grid.n_x;
    const double inv_h2 = 1.0 / (grid.h * grid.h);
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(3 * n);
    const bool periodic = grid.boundary == BoundaryTag::Periodic;
    for (Index i = 0; i < n; ++i) {
        if (!periodic && (i == 0 || i == n - 1)) continue;
        t.emplace_back(i, i, -2.0 * inv_h2);
        for (Index j : {i - 1, i + 1}) {
            if (periodic)
                t.emplace_back(i, wrap(j, n), inv_h2);
            else if (j > 0 && j < n - 1)
                t.emplace_back(i, j, inv_h2);
        }
    }
    Eigen::SparseMatrix<double> m(n, n);
    m.setFromTriplets(t.begin(), t.end());
    return m;
}

Mat apply_spatial(const Equation& eq, const Mat& u) {
    require_1d(eq);
    Mat out;
    switch (eq.kind) {
    case EquationKind::ReactionDiffusion:
        out = eq.d * laplacian(eq.grid, u) + eq.k * u.cwiseAbs2();
        break;
    case EquationKind::AllenCahn:
        out = eq.d1 * laplacian(eq.grid, u) +
              eq.d2 * (u.array() * (1.0 - u.array().square())).matrix();
        break;
    case EquationKind::CahnHilliard: {
        Mat mu = -eq.d1 * laplacian(eq.grid, u) +
                 eq.d2 * (u.array().cube() - u.array()).matrix();
        out = laplacian(eq.grid, mu);
        break;
    }
    case EquationKind::RadiativeTransfer: break;
    }
    clamp_boundary_rows(eq.grid, out);
    return out;
}

Vec apply_spatial(const Equation& eq, const Vec& u) {
    return apply_spatial(eq, Mat(u)).col(0);
}

Mat apply_jacobian(const Equation& eq, const Mat& g, const Mat& v) {
    require_1d(eq);
    require_shape(g.rows() == v.rows() && g.cols() == v.cols(), "apply_jacobian: shape");
    Mat out;
    switch (eq.kind) {
    case EquationKind::ReactionDiffusion:
        out = eq.d * laplacian(eq.grid, v) + (2.0 * eq.k * g.array() * v.array()).matrix();
        break;
    case EquationKind::AllenCahn:
        out = eq.d1 * laplacian(eq.grid, v) +
              (eq.d2 * (1.0 - 3.0 * g.array().square()) * v.array()).matrix();
        break;
    case EquationKind::CahnHilliard: {
        Mat nu = -eq.d1 * laplacian(eq.grid, v) +
                 (eq.d2 * (3.0 * g.array().square() - 1.0) * v.array()).matrix();
        out = laplacian(eq.grid, nu);
        break;
    }
    case EquationKind::RadiativeTransfer: break;
    }
    clamp_boundary_rows(eq.grid, out);
    return out;
}

Mat apply_jacobian_transpose(const Equation& eq, const Mat& g, const Mat& v) {
    require_1d(eq);
    require_shape(g.rows() == v.rows() && g.cols() == v.cols(), "apply_jacobian_transpose: shape");
    Mat w = v;
    clamp_boundary_rows(eq.grid, w);
    switch (eq.kind) {
    case EquationKind::ReactionDiffusion:
    case EquationKind::AllenCahn:
        // Laplacian and the diagonal reaction term are both symmetric.
        return apply_jacobian(eq, g, w);
    case EquationKind::CahnHilliard: {
        Mat lw = laplacian(eq.grid, w);
        return -eq.d1 * laplacian(eq.grid, lw) +
               (eq.d2 * (3.0 * g.array().square() - 1.0) * lw.array()).matrix();
    }
    case EquationKind::RadiativeTransfer: break;
    }
    return w;
}

Eigen::SparseMatrix<double> jacobian_matrix(const Equation& eq, const Vec& g) {
    require_1d(eq);
    const Index n = eq.grid.n_x;
    const auto lap = laplacian_matrix(eq.grid);
    Vec diag(n);
    Eigen::SparseMatrix<double> j;
    switch (eq.kind) {
    case EquationKind::ReactionDiffusion:
        diag = 2.0 * eq.k * g;
        break;
    case EquationKind::AllenCahn:
        diag = eq.d2 * (1.0 - 3.0 * g.array().square());
        break;
    case EquationKind::CahnHilliard:
        diag = eq.d2 * (3.0 * g.array().square() - 1.0);
        break;
    case EquationKind::RadiativeTransfer: break;
    }
    if (eq.grid.boundary != BoundaryTag::Periodic) {
        diag[0] = 0.0;
        diag[n - 1] = 0.0;
    }
    Eigen::SparseMatrix<double> d_mat(n, n);
    d_mat.reserve(Eigen::VectorXi::Constant(n, 1));
    for (Index i = 0; i < n; ++i) d_mat.insert(i, i) = diag[i];
    if (eq.kind == EquationKind::CahnHilliard) {
        Eigen::SparseMatrix<double> inner = -eq.d1 * lap + d_mat;
        j = lap * inner;
    } else {
        const double diffusion = eq.kind == EquationKind::ReactionDiffusion ? eq.d : eq.d1;
        j = diffusion * lap + d_mat;
    }
    j.makeCompressed();
    return j;
}

Mat apply_spatial_rows(const Equation& eq, const Mat& u, std::span<const Index> rows) {
    require_1d(eq);
    const Grid& grid = eq.grid;
    Mat out(Index(rows.size()), u.cols());
    for (Index r = 0; r < Index(rows.size()); ++r) {
        const Index i = rows[r];
        if (is_boundary_row(grid, i)) {
            out.row(r).setZero();
            continue;
        }
        switch (eq.kind) {
        case EquationKind::ReactionDiffusion:
            out.row(r) = eq.d * laplacian_at(grid, u, i) + eq.k * u.row(i).cwiseAbs2();
            break;
        case EquationKind::AllenCahn:
            out.row(r) = eq.d1 * laplacian_at(grid, u, i) +
                         eq.d2 * (u.row(i).array() * (1.0 - u.row(i).array().square())).matrix();
            break;
        case EquationKind::CahnHilliard: {
            auto mu = [&](Index j) -> Eigen::RowVectorXd {
                if (grid.boundary != BoundaryTag::Periodic && (j <= 0 || j >= grid.n_x - 1))
                    return Eigen::RowVectorXd::Zero(u.cols());
                const Index jj = wrap(j, grid.n_x);
                return -eq.d1 * laplacian_at(grid, u, jj) +
                       eq.d2 * (u.row(jj).array().cube() - u.row(jj).array()).matrix();
            };
            out.row(r) = (mu(i - 1) - 2.0 * mu(i) + mu(i + 1)) / (grid.h * grid.h);
            break;
        }
        case EquationKind::RadiativeTransfer: break;
        }
    }
    return out;
}

Mat apply_jacobian_rows(const Equation& eq, const Vec& g, const Mat& v, std::span<const Index> rows) {
    require_1d(eq);
    const Grid& grid = eq.grid;
    Mat out(Index(rows.size()), v.cols());
    for (Index r = 0; r < Index(rows.size()); ++r) {
        const Index i = rows[r];
        if (is_boundary_row(grid, i)) {
            out.row(r).setZero();
            continue;
        }
        switch (eq.kind) {
        case EquationKind::ReactionDiffusion:
            out.row(r) = eq.d * laplacian_at(grid, v, i) + 2.0 * eq.k * g[i] * v.row(i);
            break;
        case EquationKind::AllenCahn:
            out.row(r) = eq.d1 * laplacian_at(grid, v, i) +
                         eq.d2 * (1.0 - 3.0 * g[i] * g[i]) * v.row(i);
            break;
        case EquationKind::CahnHilliard: {
            auto nu = [&](Index j) -> Eigen::RowVectorXd {
                if (grid.boundary != BoundaryTag::Periodic && (j <= 0 || j >= grid.n_x - 1))
                    return Eigen::RowVectorXd::Zero(v.cols());
                const Index jj = wrap(j, grid.n_x);
                return -eq.d1 * laplacian_at(grid, v, jj) +
                       eq.d2 * (3.0 * g[jj] * g[jj] - 1.0) * v.row(jj);
            };
            out.row(r) = (nu(i - 1) - 2.0 * nu(i) + nu(i + 1)) / (grid.h * grid.h);
            break;
        }
        case EquationKind::RadiativeTransfer: break;
        }
    }
    return out;
}

Mat step_rhs(const Equation& eq, const PropagatorConfig& cfg, const Mat& f) {
    if (cfg.scheme == Scheme::BackwardEuler) return f;
    return f + 0.5 * cfg.dt * apply_spatial(eq, f);
}

Mat residual(const Equation& eq, const PropagatorConfig& cfg, const Mat& g, const Mat& f) {
    require_shape(g.rows() == f.rows() && g.cols() == f.cols(), "residual: shape mismatch");
    return g - cfg.implicit_weight() * cfg.dt * apply_spatial(eq, g) - step_rhs(eq, cfg, f);
}

Vec residual(const Equation& eq, const PropagatorConfig& cfg, const Vec& g, const Vec& f) {
    return residual(eq, cfg, Mat(g), Mat(f)).col(0);
}

namespace {

Eigen::SparseMatrix<double> step_matrix(const Equation& eq, const PropagatorConfig& cfg,
                                        const Vec& g) {
    const Index n = eq.grid.n_x;
    Eigen::SparseMatrix<double> id(n, n);
    id.setIdentity();
    Eigen::SparseMatrix<double> a = id - cfg.implicit_weight() * cfg.dt * jacobian_matrix(eq, g);
    a.makeCompressed();
    return a;
}

} // namespace

Propagator::Propagator(Equation eq, PropagatorConfig cfg) : eq_(std::move(eq)), cfg_(cfg) {
    eq_.validate();
    require_1d(eq_);
    if (!(cfg_.dt > 0.0)) throw std::invalid_argument("Propagator: dt must be positive");
    if (eq_.is_linear()) {
        auto solver = std::make_shared<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
        solver->compute(step_matrix(eq_, cfg_, Vec::Zero(eq_.grid.n_x)));
        if (solver->info() != Eigen::Success)
            throw SolverError("Propagator: factorization of the step matrix failed");
        linear_solver_ = std::move(solver);
    }
}

Vec Propagator::newton(const Vec& rhs, const Vec& guess) const {
    Vec g = guess;
    const double w_dt = cfg_.implicit_weight() * cfg_.dt;
    double res_norm = 0.0;
    for (int it = 0; it <= cfg_.newton_max; ++it) {
        Vec r = g - w_dt * apply_spatial(eq_, g) - rhs;
        res_norm = r.lpNorm<Eigen::Infinity>();
        if (!std::isfinite(res_norm)) break;
        if (res_norm <= cfg_.newton_tol) return g;
        if (it == cfg_.newton_max) break;
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(step_matrix(eq_, cfg_, g));
        if (lu.info() != Eigen::Success)
            throw SolverError("Newton: singular Jacobian", res_norm);
        g -= lu.solve(r);
    }
    throw SolverError("Newton did not converge, final residual " + std::to_string(res_norm),
                      res_norm);
}

Vec Propagator::step(const Vec& f) const {
    require_shape(f.size() == eq_.grid.n_x, "Propagator::step: state length");
    Vec rhs = step_rhs(eq_, cfg_, Mat(f)).col(0);
    if (linear_solver_) {
        Vec g = linear_solver_->solve(rhs);
        if (!g.allFinite()) throw SolverError("linear step produced non-finite values");
        return g;
    }
    return newton(rhs, f);
}

Mat Propagator::trajectory(const Vec& f0, Index steps) const {
    Mat out(f0.size(), steps + 1);
    out.col(0) = f0;
    for (Index n = 0; n < steps; ++n) out.col(n + 1) = step(out.col(n));
    return out;
}

Vec be_step(const Equation& eq, const PropagatorConfig& cfg, const Vec& f) {
    if (cfg.scheme != Scheme::BackwardEuler)
        throw std::invalid_argument("be_step: config scheme is not backward Euler");
    return Propagator(eq, cfg).step(f);
}

Vec cn_step(const Equation& eq, const PropagatorConfig& cfg, const Vec& f) {
    if (cfg.scheme != Scheme::CrankNicolson)
        throw std::invalid_argument("cn_step: config scheme is not Crank-Nicolson");
    return Propagator(eq, cfg).step(f);
}

double l2_norm(const Grid& grid, const Vec& u) { return std::sqrt(grid.h * u.squaredNorm()); }

DissipativityReport dissipativity_check(const Equation& eq, const Mat& trajectory,
                                        double rel_tol) {
    if (!eq.is_dissipative())
        throw std::invalid_argument(
            "dissipativity_check: only pure-diffusion configurations are dissipative");
    DissipativityReport rep;
    for (Index n = 0; n < trajectory.cols(); ++n) {
        rep.norms.push_back(l2_norm(eq.grid, trajectory.col(n)));
        if (n > 0 && rep.norms[n] > rep.norms[n - 1] * (1.0 + rel_tol) && rep.non_increasing) {
            rep.non_increasing = false;
            rep.first_violation = n;
        }
    }
    return rep;
}

} // namespace tlnet
