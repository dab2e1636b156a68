#ifndef TLNET_PDE_HPP
#define TLNET_PDE_HPP

// Discrete spatial operators and implicit reference propagators for the
// 1D dissipative evolution problems
//
//   reaction-diffusion  u_t = d u_xx + k u^2           (zero Dirichlet)
//   Allen-Cahn          u_t = d1 u_xx + d2 u (1 - u^2) (periodic)
//   Cahn-Hilliard       u_t = (-d1 u_xx + d2 (u^3 - u))_xx (periodic)
//
// Operators act column-wise on [N x S] blocks so the training losses can
// push a whole minibatch through one call.

#include "tlnet/common.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace tlnet {

enum class BoundaryTag : std::uint32_t { Dirichlet = 0, Periodic = 1, Inflow = 2 };

std::string to_string(BoundaryTag tag);
BoundaryTag boundary_from_string(const std::string& s);

/// Uniform spatial grid on [0, 1]. Dirichlet and inflow grids include both
/// endpoints (h = 1/(N-1)); periodic grids exclude x = 1 (h = 1/N).
/// Phase-space grids add Gauss-Legendre velocity nodes on [-1, 1] with
/// weights summing to 2.
struct Grid {
    Index n_x = 0;
    double h = 0.0;
    BoundaryTag boundary = BoundaryTag::Periodic;
    Vec x;
    Index n_v = 0;
    Vec v;
    Vec v_weights;

    static Grid dirichlet(Index n_x);
    static Grid periodic(Index n_x);
    static Grid phase_space(Index n_x, Index n_v);

    Index size() const { return n_v > 0 ? n_x * n_v : n_x; }
    /// Normalized velocity average <phi> = (1/2) sum_m w_m phi_m.
    double velocity_average(const Eigen::Ref<const Vec>& phi) const {
        return 0.5 * v_weights.dot(phi);
    }
};

/// Gauss-Legendre nodes (ascending) and weights on [-1, 1].
std::pair<Vec, Vec> gauss_legendre(Index n);

enum class EquationKind : std::uint32_t {
    ReactionDiffusion = 0,
    AllenCahn = 1,
    CahnHilliard = 2,
    RadiativeTransfer = 3,
};

std::string to_string(EquationKind kind);
EquationKind equation_from_string(const std::string& s);

struct Equation {
    EquationKind kind = EquationKind::ReactionDiffusion;
    double d = 0.0;  // diffusion (RD)
    double k = 0.0;  // reaction (RD)
    double d1 = 0.0; // interface diffusion (AC, CH)
    double d2 = 0.0; // bulk reaction (AC, CH)
    double eps = 1.0;
    double inflow_left = 1.0;  // f(0, v > 0) for RTE
    double inflow_right = 0.5; // f(1, v < 0) for RTE
    Grid grid;

    static Equation reaction_diffusion(double d, double k, Grid grid);
    static Equation allen_cahn(double d1, double d2, Grid grid);
    static Equation cahn_hilliard(double d1, double d2, Grid grid);
    static Equation radiative_transfer(double eps, Grid grid);

    void validate() const;
    /// Residual of the implicit step is affine in the unknown state.
    bool is_linear() const;
    /// Pure diffusion: discrete <u, L u> <= 0 for every u.
    bool is_dissipative() const;
    /// Neighbor radius of the spatial stencil (1 for second order, 2 for CH).
    Index stencil_radius() const { return kind == EquationKind::CahnHilliard ? 2 : 1; }
};

enum class Scheme : std::uint32_t { BackwardEuler = 0, CrankNicolson = 1 };

std::string to_string(Scheme s);
Scheme scheme_from_string(const std::string& s);

struct PropagatorConfig {
    double dt = 0.05;
    Scheme scheme = Scheme::BackwardEuler;
    double newton_tol = 1e-12;
    int newton_max = 50;

    /// Implicit weight of the unknown state: 1 for BE, 1/2 for CN.
    double implicit_weight() const { return scheme == Scheme::BackwardEuler ? 1.0 : 0.5; }
};

/// Second-order central Laplacian, column-wise. Dirichlet rows at the
/// endpoints are zero and the stencil treats boundary values as zero.
Mat laplacian(const Grid& grid, const Mat& u);
Eigen::SparseMatrix<double> laplacian_matrix(const Grid& grid);

/// L(u) for RD/AC/CH, column-wise on [N x S].
Mat apply_spatial(const Equation& eq, const Mat& u);
Vec apply_spatial(const Equation& eq, const Vec& u);

/// Directional derivative L'(g) v and its adjoint L'(g)^T v, column-wise.
Mat apply_jacobian(const Equation& eq, const Mat& g, const Mat& v);
Mat apply_jacobian_transpose(const Equation& eq, const Mat& g, const Mat& v);
Eigen::SparseMatrix<double> jacobian_matrix(const Equation& eq, const Vec& g);

/// (L u)_i and (L'(g) V)_i for the listed rows only. Reads neighbors within
/// the stencil radius, so cost is proportional to rows.size().
Mat apply_spatial_rows(const Equation& eq, const Mat& u, std::span<const Index> rows);
Mat apply_jacobian_rows(const Equation& eq, const Vec& g, const Mat& v, std::span<const Index> rows);

/// Right side of the implicit step: f for BE, f + (dt/2) L f for CN.
Mat step_rhs(const Equation& eq, const PropagatorConfig& cfg, const Mat& f);

/// g - w dt L(g) - rhs(f) with w the implicit weight; zero iff g is the step of f.
Mat residual(const Equation& eq, const PropagatorConfig& cfg, const Mat& g, const Mat& f);
Vec residual(const Equation& eq, const PropagatorConfig& cfg, const Vec& g, const Vec& f);

/// Implicit one-step propagator with cached factorization for linear kinds.
class Propagator {
public:
    Propagator(Equation eq, PropagatorConfig cfg);

    Vec step(const Vec& f) const;
    /// Repeated stepping; column n holds the state after n steps.
    Mat trajectory(const Vec& f0, Index steps) const;

    const Equation& equation() const { return eq_; }
    const PropagatorConfig& config() const { return cfg_; }

private:
    Vec newton(const Vec& rhs, const Vec& guess) const;

    Equation eq_;
    PropagatorConfig cfg_;
    std::shared_ptr<const Eigen::SparseLU<Eigen::SparseMatrix<double>>> linear_solver_;
};

/// One backward-Euler step: solves g - dt L(g) = f.
Vec be_step(const Equation& eq, const PropagatorConfig& cfg, const Vec& f);
/// One Crank-Nicolson step: solves g - dt/2 L(g) = f + dt/2 L(f).
Vec cn_step(const Equation& eq, const PropagatorConfig& cfg, const Vec& f);

/// Discrete L2 norm sqrt(h * sum u^2).
double l2_norm(const Grid& grid, const Vec& u);

struct DissipativityReport {
    bool non_increasing = true;
    std::vector<double> norms;
    Index first_violation = -1;
};

/// Checks that discrete L2 norms are non-increasing along a trajectory
/// (columns are states). Rejects kinds that are not pure diffusion.
DissipativityReport dissipativity_check(const Equation& eq, const Mat& trajectory,
                                        double rel_tol = 1e-12);

// ---------------------------------------------------------------------------
// Radiative transfer, micro-macro form on the phase-space grid:
//
//   rho_t + <v g_x> = 0
//   eps^2 g_t + eps (v g_x - <v g_x>) + v rho_x = -g
//
// with inflow data f = rho + eps g on x = 0 (v > 0) and x = 1 (v < 0).

struct RteState {
    Vec rho; // [n_x]
    Mat g;   // [n_x x n_v], zero velocity average per row

    /// f = rho + eps g as [n_x x n_v].
    Mat distribution(double eps) const;
    static RteState from_distribution(const Grid& grid, double eps, const Mat& f);
};

/// Backward-Euler stepper for the micro-macro system. The sparse system is
/// factorized once per (equation, dt).
class RteStepper {
public:
    RteStepper(Equation eq, double dt);
    RteState step(const RteState& s) const;
    const Equation& equation() const { return eq_; }

private:
    Index rho_index(Index i) const { return i; }
    Index g_index(Index i, Index m) const { return eq_.grid.n_x + i * eq_.grid.n_v + m; }

    Equation eq_;
    double dt_;
    std::shared_ptr<const Eigen::SparseLU<Eigen::SparseMatrix<double>>> solver_;
};

RteState rte_be_step(const Equation& eq, double dt, const RteState& s);

/// Right sides (rho_t, g_t) of the micro-macro system with the same
/// discrete operators the stepper uses, packed as [rho; g row-major].
Vec apply_spatial_rte(const Equation& eq, const RteState& s);

/// ||f - <f>|| / ||<f>|| with velocity quadrature weights.
double anisotropy(const Grid& grid, const Mat& f);

} // namespace tlnet

#endif // TLNET_PDE_HPP
