#ifndef TLNET_GRF_HPP
#define TLNET_GRF_HPP

// Gaussian-random-field initial conditions and training-set assembly.

#include "tlnet/common.hpp"
#include "tlnet/pde.hpp"

#include <Eigen/Cholesky>

#include <optional>
#include <string>
#include <vector>

namespace tlnet {

enum class KernelKind : std::uint32_t { SqExp1D = 0, Periodic1D = 1, PhaseSpace1D = 2 };

std::string to_string(KernelKind kind);
KernelKind kernel_from_string(const std::string& s);

struct KernelSpec {
    KernelKind kind = KernelKind::SqExp1D;
    double length_scale = 0.2;

    void validate() const {
        if (!(length_scale > 0.0) || !std::isfinite(length_scale))
            throw std::invalid_argument("KernelSpec: length scale must be positive");
    }
};

/// A point in physical space (v unused) or phase space (x, v).
struct Point {
    double x = 0.0;
    double v = 0.0;
};

/// Squared-exponential, periodic (sin^2) or phase-space product kernel.
/// Symmetric with k(z, z) = 1.
double kernel_eval(const KernelSpec& spec, Point z1, Point z2);

/// Sensor locations in x-major order. Phase-space grids enumerate (x_i, v_m)
/// with index i * n_v + m.
struct SensorGrid {
    std::vector<Point> points;
    double spacing = 0.0;
    BoundaryTag boundary = BoundaryTag::Periodic;

    Index size() const { return Index(points.size()); }
    /// Throws unless coordinates are strictly increasing (lexicographic in
    /// (x, v)) and there are at least two points.
    void validate() const;
    static SensorGrid from_grid(const Grid& grid);
};

/// Raw kernel Gram matrix, no jitter.
Mat cov_matrix(const KernelSpec& spec, const SensorGrid& grid);

/// Cholesky factor of K + jitter I. Jitter starts at 1e-10 and grows by 10x
/// up to 1e-6 before giving up with DegenerateKernelError.
struct CovarianceFactor {
    Mat lower;
    double jitter = 0.0;
};
CovarianceFactor factorize_covariance(const Mat& cov);

/// Rows are samples L * zeta, zeta iid standard normal. Row r uses the
/// sub-seed derive_seed(seed, r), so rows are independent of `count`.
Mat sample_gp(const KernelSpec& spec, const SensorGrid& grid, Index count, std::uint64_t seed);
Mat sample_gp(const CovarianceFactor& factor, Index count, std::uint64_t seed);

/// f0(x) = a(x) x (1 - x).
Vec make_ic_dirichlet(const SensorGrid& grid, const Vec& a);

/// Fixed masks of the inflow parameterization f = N1 A + C + eps N2 B on a
/// phase-space grid: A(x) = x(1-x), B(x,v) = R(v) x + R(-v)(1-x),
/// C(x) = 1 - x/2 with R the positive part.
struct PhaseSpaceMasks {
    Vec a; // [n_x]
    Mat b; // [n_x x n_v]
    Vec c; // [n_x]

    static PhaseSpaceMasks from_grid(const Grid& grid);
};

/// f0 = a B + C on the phase-space grid (x-major flattening), or nullopt if
/// a has a non-positive entry.
std::optional<Vec> make_ic_rte(const Grid& grid, const Vec& a);

/// Draws `count` boundary-compatible initial conditions for `eq`: Dirichlet
/// mask for zero-Dirichlet grids, raw samples for periodic grids, and
/// rejection-filtered phase-space samples (at most 100 x count draws) for RTE.
Mat sample_initial_conditions(const Equation& eq, const KernelSpec& kernel, Index count,
                              std::uint64_t seed);

/// N_s = n_t * N_b functions: N_b base draws and their images under up to
/// n_t - 1 reference steps. Row s*n_t + j is base draw s after j steps.
struct SampleSet {
    Mat functions;
    Index n_base = 0;
    Index n_passes = 0;
    std::uint64_t seed = 0;
};

/// The M collocation pairs drawn from a SampleSet, grouped by function so
/// each selected function keeps its whole sensor vector as branch input.
struct TrainingSet {
    SampleSet pool;
    std::vector<Index> function_ids;
    std::vector<std::vector<Index>> points;

    Index pair_count() const;
    /// Selected functions as columns [N_p x n_selected].
    Mat inputs() const;
};

struct TrainingSetOptions {
    Index n_base = 100;
    Index n_passes = 20;
    Index pairs = 1000;
    Index points_per_function = 20;
    std::uint64_t seed = 0;
};

TrainingSet build_training_set(const Equation& eq, const PropagatorConfig& cfg,
                               const KernelSpec& kernel, const TrainingSetOptions& opts);

/// Selects the M pairs: ceil(M / ppf) functions without replacement, then
/// ppf points per function without replacement; the last function is trimmed
/// so exactly M pairs remain. When M >= N_s * ppf every function is used.
void select_collocation(TrainingSet& set, Index n_points, Index pairs, Index points_per_function,
                        std::uint64_t seed);

} // namespace tlnet

#endif // TLNET_GRF_HPP
