#include "tlnet/studies.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tlnet {

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 3)
        throw std::invalid_argument("loglog_slope: need at least three (x, y) pairs");
    const double n = double(x.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0))
            throw std::invalid_argument("loglog_slope: values must be positive");
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double denom = n * sxx - sx * sx;
    if (denom <= 0.0) throw std::invalid_argument("loglog_slope: x values must differ");
    return (n * sxy - sx * sy) / denom;
}

namespace {

Index steps_for(double horizon, double dt) {
    const double ratio = horizon / dt;
    const Index n = Index(std::llround(ratio));
    if (n < 1 || std::abs(ratio - double(n)) > 1e-9 * ratio)
        throw std::invalid_argument("order_study: dt must divide the horizon");
    return n;
}

Vec advance(const Equation& eq, Scheme scheme, double dt, Index steps, const Vec& f0) {
    PropagatorConfig cfg;
    cfg.dt = dt;
    cfg.scheme = scheme;
    const Propagator prop(eq, cfg);
    Vec f = f0;
    for (Index n = 0; n < steps; ++n) f = prop.step(f);
    return f;
}

} // namespace

OrderStudy order_study(const Equation& eq, Scheme scheme, const std::vector<double>& dts,
                       const Vec& f0, double horizon) {
    if (dts.size() < 3) throw std::invalid_argument("order_study: need at least three step sizes");
    if (!(horizon > 0.0)) throw std::invalid_argument("order_study: horizon must be positive");
    const double dt_ref = *std::min_element(dts.begin(), dts.end()) / 64.0;
    const Vec ref = advance(eq, scheme, dt_ref, steps_for(horizon, dt_ref), f0);

    OrderStudy out;
    out.dts = dts;
    for (double dt : dts) {
        const Vec f = advance(eq, scheme, dt, steps_for(horizon, dt), f0);
        out.errors.push_back(l2_norm(eq.grid, f - ref));
    }
    out.slope = loglog_slope(out.dts, out.errors);
    return out;
}

OrderStudy cn_order_study(const Equation& eq, const std::vector<double>& dts, const Vec& f0,
                          double horizon) {
    return order_study(eq, Scheme::CrankNicolson, dts, f0, horizon);
}

DissipativityStudy dissipativity_study(const Equation& eq, const KernelSpec& kernel,
                                       Index count, Index steps, double dt, std::uint64_t seed,
                                       double rel_tol) {
    if (!eq.is_dissipative())
        throw std::invalid_argument("dissipativity_study: equation is not pure diffusion");
    PropagatorConfig cfg;
    cfg.dt = dt;
    const Propagator prop(eq, cfg);
    const Mat ics = sample_initial_conditions(eq, kernel, count, seed);

    DissipativityStudy out;
    out.worst_increase = -std::numeric_limits<double>::infinity();
    for (Index s = 0; s < count; ++s) {
        const Mat traj = prop.trajectory(ics.row(s).transpose(), steps);
        const auto rep = dissipativity_check(eq, traj, rel_tol);
        for (std::size_t n = 1; n < rep.norms.size(); ++n)
            if (rep.norms[n - 1] > 0.0)
                out.worst_increase =
                    std::max(out.worst_increase, (rep.norms[n] - rep.norms[n - 1]) / rep.norms[n - 1]);
        if (!rep.non_increasing) ++out.violating;
        ++out.trajectories;
    }
    return out;
}

} // namespace tlnet
