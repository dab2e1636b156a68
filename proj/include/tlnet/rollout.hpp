#ifndef TLNET_ROLLOUT_HPP
#define TLNET_ROLLOUT_HPP

// Autoregressive rollouts and the two relative-error measures.
//
// Trajectories are [N x (K+1)] matrices whose column n is the state after n
// steps (column 0 is the initial condition).

#include "tlnet/common.hpp"
#include "tlnet/operator_net.hpp"
#include "tlnet/pde.hpp"
#include "tlnet/transfer.hpp"

#include <functional>
#include <iosfwd>
#include <vector>

namespace tlnet {

struct RolloutConfig {
    Index steps = 1000; // K
    double dt = 0.05;
    Scheme scheme = Scheme::BackwardEuler;
    bool tl = false;
    Index tl_every = 1;

    void validate() const;
    PropagatorConfig propagator() const;
};

/// A state became non-finite during a rollout.
struct BlowupError : NumericError {
    BlowupError(const std::string& what, Index at_step) : NumericError(what), step(at_step) {}
    Index step;
};

using StepFunction = std::function<Vec(const Vec&)>;

/// K applications of `step`, checking every state for finiteness.
Mat rollout(const StepFunction& step, const Vec& f0, Index steps);

Mat rollout_vanilla(const DeepONetModel& model, const Vec& f0, const RolloutConfig& cfg);
Mat rollout_reference(const Equation& eq, const Vec& f0, const RolloutConfig& cfg);

struct TLRollout {
    Mat trajectory;
    std::vector<Vec> weights;         // one entry per attempted refit
    std::vector<Index> update_steps;  // step index n at which each refit ran
    std::vector<Index> failed_steps;  // refits that fell back to the current w
};

/// Before advancing from step n to n+1, refits w against the current state
/// whenever (n + 1) is a multiple of tl_every; a failed refit keeps the
/// current w and is flagged.
TLRollout rollout_tl(const DeepONetModel& model, const Equation& eq, const Vec& f0,
                     const RolloutConfig& cfg, const TLConfig& tl);
TLRollout rollout_tl(const TransferLearner& learner, const Vec& f0, const RolloutConfig& cfg);

/// Ensemble mean over trajectories of ||pred_k - ref_k|| / ||ref_k||.
double rel_err_step(const std::vector<Mat>& pred, const std::vector<Mat>& ref, Index k);
/// sqrt(sum ||pred_n - ref_n||^2 / sum ||ref_n||^2) over n = 1..K and all
/// trajectories.
double rel_err_agg(const std::vector<Mat>& pred, const std::vector<Mat>& ref, Index steps);

struct ErrorReport {
    std::vector<double> per_step; // entry n-1 is step n
    double aggregate = 0.0;
    Index ensemble = 0;
    double horizon = 0.0;
    double dt = 0.0;
};

ErrorReport make_error_report(const std::vector<Mat>& pred, const std::vector<Mat>& ref,
                              double dt);

/// CSV with header step,t,rel_err.
void write_error_csv(std::ostream& os, const ErrorReport& report);

/// Shortest round-trip decimal form, used for every number written to CSV.
std::string format_double(double v);

} // namespace tlnet

#endif // TLNET_ROLLOUT_HPP
