#include "tlnet/grf.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

namespace tlnet {

std::string to_string(KernelKind kind) {
    switch (kind) {
    case KernelKind::SqExp1D: return "SqExp1D";
    case KernelKind::Periodic1D: return "Periodic1D";
    case KernelKind::PhaseSpace1D: return "PhaseSpace1D";
    }
    return "unknown";
}

KernelKind kernel_from_string(const std::string& s) {
    if (s == "SqExp1D") return KernelKind::SqExp1D;
    if (s == "Periodic1D") return KernelKind::Periodic1D;
    if (s == "PhaseSpace1D") return KernelKind::PhaseSpace1D;
    throw std::invalid_argument("unknown kernel kind: " + s);
}

double kernel_eval(const KernelSpec& spec, Point z1, Point z2) {
    const double two_l2 = 2.0 * spec.length_scale * spec.length_scale;
    const double dx = z1.x - z2.x;
    switch (spec.kind) {
    case KernelKind::SqExp1D: return std::exp(-dx * dx / two_l2);
    case KernelKind::Periodic1D: {
        const double s = std::sin(std::numbers::pi * dx);
        return std::exp(-s * s / two_l2);
    }
    case KernelKind::PhaseSpace1D: {
        const double dv = z1.v - z2.v;
        return std::exp(-(dx * dx + dv * dv) / two_l2);
    }
    }
    return 0.0;
}

void SensorGrid::validate() const {
    require_shape(points.size() >= 2, "SensorGrid: need at least two points");
    for (std::size_t i = 1; i < points.size(); ++i) {
        const auto& a = points[i - 1];
        const auto& b = points[i];
        const bool increasing = a.x < b.x || (a.x == b.x && a.v < b.v);
        require_shape(increasing, "SensorGrid: coordinates must be strictly increasing");
    }
}

SensorGrid SensorGrid::from_grid(const Grid& grid) {
    SensorGrid s;
    s.spacing = grid.h;
    s.boundary = grid.boundary;
    if (grid.n_v > 0) {
        for (Index i = 0; i < grid.n_x; ++i)
            for (Index m = 0; m < grid.n_v; ++m) s.points.push_back({grid.x[i], grid.v[m]});
    } else {
        for (Index i = 0; i < grid.n_x; ++i) s.points.push_back({grid.x[i], 0.0});
    }
    return s;
}

Mat cov_matrix(const KernelSpec& spec, const SensorGrid& grid) {
    spec.validate();
    require_shape(grid.size() >= 1, "cov_matrix: empty grid");
    const Index n = grid.size();
    Mat k(n, n);
    for (Index j = 0; j < n; ++j)
        for (Index i = j; i < n; ++i) {
            const double v = kernel_eval(spec, grid.points[i], grid.points[j]);
            k(i, j) = v;
            k(j, i) = v;
        }
    return k;
}

CovarianceFactor factorize_covariance(const Mat& cov) {
    require_shape(cov.rows() == cov.cols() && cov.rows() > 0, "factorize_covariance: not square");
    const Index n = cov.rows();
    for (double jitter = 1e-10; jitter <= 1e-6 * (1.0 + 1e-9); jitter *= 10.0) {
        Mat a = cov;
        a.diagonal().array() += jitter;
        Eigen::LLT<Mat> llt(a);
        if (llt.info() == Eigen::Success) return {Mat(llt.matrixL()), jitter};
    }
    throw DegenerateKernelError("covariance is not factorizable with jitter up to 1e-6 (n=" +
                                std::to_string(n) + ")");
}

Mat sample_gp(const CovarianceFactor& factor, Index count, std::uint64_t seed) {
    require_shape(count >= 1, "sample_gp: count must be at least 1");
    const Index n = factor.lower.rows();
    Mat out(count, n);
    Vec zeta(n);
    for (Index r = 0; r < count; ++r) {
        std::mt19937_64 rng(derive_seed(seed, std::uint64_t(r)));
        std::normal_distribution<double> normal(0.0, 1.0);
        for (Index i = 0; i < n; ++i) zeta[i] = normal(rng);
        out.row(r) = (factor.lower.triangularView<Eigen::Lower>() * zeta).transpose();
    }
    return out;
}

Mat sample_gp(const KernelSpec& spec, const SensorGrid& grid, Index count, std::uint64_t seed) {
    return sample_gp(factorize_covariance(cov_matrix(spec, grid)), count, seed);
}

Vec make_ic_dirichlet(const SensorGrid& grid, const Vec& a) {
    require_shape(a.size() == grid.size(), "make_ic_dirichlet: length mismatch");
    Vec out(a.size());
    for (Index i = 0; i < a.size(); ++i) {
        const double x = grid.points[std::size_t(i)].x;
        out[i] = a[i] * x * (1.0 - x);
    }
    return out;
}

PhaseSpaceMasks PhaseSpaceMasks::from_grid(const Grid& grid) {
    require_shape(grid.n_v > 0, "PhaseSpaceMasks: not a phase-space grid");
    PhaseSpaceMasks m;
    m.a = grid.x.array() * (1.0 - grid.x.array());
    m.c = 1.0 - 0.5 * grid.x.array();
    m.b.resize(grid.n_x, grid.n_v);
    for (Index i = 0; i < grid.n_x; ++i)
        for (Index j = 0; j < grid.n_v; ++j) {
            const double x = grid.x[i], v = grid.v[j];
            m.b(i, j) = std::max(v, 0.0) * x + std::max(-v, 0.0) * (1.0 - x);
        }
    return m;
}

std::optional<Vec> make_ic_rte(const Grid& grid, const Vec& a) {
    require_shape(a.size() == grid.size() && grid.n_v > 0, "make_ic_rte: length mismatch");
    if (a.minCoeff() <= 0.0) return std::nullopt;
    const auto masks = PhaseSpaceMasks::from_grid(grid);
    Vec f(a.size());
    for (Index i = 0; i < grid.n_x; ++i)
        for (Index j = 0; j < grid.n_v; ++j) {
            const Index idx = i * grid.n_v + j;
            f[idx] = a[idx] * masks.b(i, j) + masks.c[i];
        }
    return f;
}

Mat sample_initial_conditions(const Equation& eq, const KernelSpec& kernel, Index count,
                              std::uint64_t seed) {
    const auto sensors = SensorGrid::from_grid(eq.grid);
    const auto factor = factorize_covariance(cov_matrix(kernel, sensors));
    const Index n = sensors.size();
    Mat out(count, n);
    if (eq.grid.boundary == BoundaryTag::Inflow) {
        const Index limit = 100 * count;
        Index accepted = 0;
        for (Index draw = 0; draw < limit && accepted < count; ++draw) {
            Vec a = sample_gp(factor, 1, derive_seed(seed, std::uint64_t(draw))).row(0).transpose();
            if (auto f = make_ic_rte(eq.grid, a)) out.row(accepted++) = f->transpose();
        }
        if (accepted < count)
            throw std::runtime_error("sample_initial_conditions: only " + std::to_string(accepted) +
                                     " positive draws after " + std::to_string(limit) + " attempts");
        return out;
    }
    Mat raw = sample_gp(factor, count, seed);
    if (eq.grid.boundary == BoundaryTag::Dirichlet)
        for (Index r = 0; r < count; ++r)
            out.row(r) = make_ic_dirichlet(sensors, raw.row(r).transpose()).transpose();
    else
        out = raw;
    return out;
}

Index TrainingSet::pair_count() const {
    Index n = 0;
    for (const auto& p : points) n += Index(p.size());
    return n;
}

Mat TrainingSet::inputs() const {
    Mat out(pool.functions.cols(), Index(function_ids.size()));
    for (std::size_t s = 0; s < function_ids.size(); ++s)
        out.col(Index(s)) = pool.functions.row(function_ids[s]).transpose();
    return out;
}

namespace {

/// First k entries of a seeded Fisher-Yates shuffle of 0..n-1.
std::vector<Index> choose_without_replacement(Index n, Index k, std::mt19937_64& rng) {
    std::vector<Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Index(0));
    for (Index i = 0; i < k; ++i) {
        std::uniform_int_distribution<Index> pick(i, n - 1);
        std::swap(idx[std::size_t(i)], idx[std::size_t(pick(rng))]);
    }
    idx.resize(std::size_t(k));
    return idx;
}

} // namespace

void select_collocation(TrainingSet& set, Index n_points, Index pairs, Index points_per_function,
                        std::uint64_t seed) {
    const Index n_s = set.pool.functions.rows();
    if (pairs < 1 || pairs > n_s * n_points)
        throw std::invalid_argument("build_training_set: M must lie in [1, N_s * N_p]");
    Index ppf = std::clamp<Index>(points_per_function, 1, n_points);
    if (pairs > n_s * ppf) ppf = (pairs + n_s - 1) / n_s;
    const Index n_functions = (pairs + ppf - 1) / ppf;

    std::mt19937_64 rng(derive_seed(seed, 0xC011));
    set.function_ids = choose_without_replacement(n_s, n_functions, rng);
    std::sort(set.function_ids.begin(), set.function_ids.end());
    set.points.clear();
    Index remaining = pairs;
    for (Index f = 0; f < n_functions; ++f) {
        const Index take = std::min(ppf, remaining);
        auto pts = choose_without_replacement(n_points, take, rng);
        std::sort(pts.begin(), pts.end());
        set.points.push_back(std::move(pts));
        remaining -= take;
    }
}

TrainingSet build_training_set(const Equation& eq, const PropagatorConfig& cfg,
                               const KernelSpec& kernel, const TrainingSetOptions& opts) {
    if (opts.n_base < 1 || opts.n_passes < 1)
        throw std::invalid_argument("build_training_set: N_b and n_t must be positive");
    const Mat base = sample_initial_conditions(eq, kernel, opts.n_base, derive_seed(opts.seed, 1));
    const Index n_p = base.cols();

    TrainingSet set;
    set.pool.n_base = opts.n_base;
    set.pool.n_passes = opts.n_passes;
    set.pool.seed = opts.seed;
    set.pool.functions.resize(opts.n_base * opts.n_passes, n_p);

    if (eq.kind == EquationKind::RadiativeTransfer) {
        const RteStepper stepper(eq, cfg.dt);
        const Grid& g = eq.grid;
        for (Index s = 0; s < opts.n_base; ++s) {
            Mat f = base.row(s).reshaped<Eigen::RowMajor>(g.n_x, g.n_v);
            RteState state = RteState::from_distribution(g, eq.eps, f);
            for (Index j = 0; j < opts.n_passes; ++j) {
                if (j > 0) state = stepper.step(state);
                set.pool.functions.row(s * opts.n_passes + j) =
                    state.distribution(eq.eps).reshaped<Eigen::RowMajor>().transpose();
            }
        }
    } else {
        const Propagator prop(eq, cfg);
        for (Index s = 0; s < opts.n_base; ++s) {
            Vec f = base.row(s).transpose();
            for (Index j = 0; j < opts.n_passes; ++j) {
                if (j > 0) f = prop.step(f);
                set.pool.functions.row(s * opts.n_passes + j) = f.transpose();
            }
        }
    }
    if (!set.pool.functions.allFinite())
        throw NumericError("build_training_set: non-finite sample");
    select_collocation(set, n_p, opts.pairs, opts.points_per_function, opts.seed);
    return set;
}

} // namespace tlnet
