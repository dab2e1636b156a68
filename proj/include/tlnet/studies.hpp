#ifndef TLNET_STUDIES_HPP
#define TLNET_STUDIES_HPP

// Numerical checks that do not involve training: the long-time stability
// bound for perturbed linear propagators, temporal convergence order of
// the reference steppers, and L2 dissipativity of pure diffusion.

#include "tlnet/common.hpp"
#include "tlnet/grf.hpp"
#include "tlnet/pde.hpp"

#include <vector>

namespace tlnet {

struct BoundHarnessConfig {
    Index n = 20;      // state dimension
    double eta = 0.9;  // ||P||
    double delta = 0.04;
    Index steps = 50;  // K
    Index trials = 1000;
    Index probes = 200; // random unit vectors per trial
    std::uint64_t seed = 0;

    void validate() const;
    /// The contracting bound applies when eta < 1 and delta <= (1 - eta) / 2.
    bool contracting() const { return eta < 1.0 && delta <= 0.5 * (1.0 - eta); }
};

struct BoundReport {
    Index trials = 0;
    Index violations_general = 0;     // ||P^K - P_NN^K|| > delta K (1+delta)^K
    Index violations_contracting = 0; // ... > delta K ((1+eta)/2)^(K-1), when applicable
    double max_ratio_general = 0.0;
    double max_ratio_contracting = 0.0;
    double max_observed = 0.0;
    bool contracting_checked = false;

    Index violations() const { return violations_general + violations_contracting; }
};

/// Each trial draws P with spectral norm eta and E with spectral norm delta,
/// sets P_NN = P (I + E), estimates sup_{|f|=1} |(P^K - P_NN^K) f| from random
/// unit probes plus the top right singular vector, and compares with the bounds.
BoundReport bound_check(const BoundHarnessConfig& cfg);

struct OrderStudy {
    std::vector<double> dts;
    std::vector<double> errors; // discrete L2 error at the final time
    double slope = 0.0;
};

/// Refinement study: steps f0 to time `horizon` with each dt in the list and
/// compares with the same scheme at min(dt) / 64. Needs at least three dts,
/// each dividing the horizon.
OrderStudy order_study(const Equation& eq, Scheme scheme, const std::vector<double>& dts,
                       const Vec& f0, double horizon = 4.0);
/// Crank-Nicolson special case.
OrderStudy cn_order_study(const Equation& eq, const std::vector<double>& dts, const Vec& f0,
                          double horizon = 4.0);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

struct DissipativityStudy {
    Index trajectories = 0;
    Index violating = 0;
    double worst_increase = 0.0; // max relative norm increase observed (<= 0 when none)
};

/// Backward-Euler trajectories from seeded GRF initial conditions, each
/// checked for non-increasing discrete L2 norm.
DissipativityStudy dissipativity_study(const Equation& eq, const KernelSpec& kernel,
                                       Index count, Index steps, double dt, std::uint64_t seed,
                                       double rel_tol = 1e-12);

} // namespace tlnet

#endif // TLNET_STUDIES_HPP
