#ifndef TLNET_LOSSES_HPP
#define TLNET_LOSSES_HPP

// Physics-informed losses. Nothing here needs reference solutions: the
// single-step loss penalizes the implicit time-step residual of the network
// output, and the continuous-time loss penalizes u_t - L(u) with central
// differences in t plus an initial-condition fit.
//
// Each loss comes in two layers: a field-level form that takes the network
// output directly (so tests can inject any evaluator) and a model-level form
// that also back-propagates into the parameters.

#include "tlnet/common.hpp"
#include "tlnet/grf.hpp"
#include "tlnet/operator_net.hpp"
#include "tlnet/pde.hpp"

#include <vector>

namespace tlnet {

enum class LossMode : std::uint32_t { SingleStepBE = 0, SingleStepCN = 1, Cont = 2 };

std::string to_string(LossMode mode);
LossMode loss_mode_from_string(const std::string& s);

struct LossSpec {
    LossMode mode = LossMode::SingleStepBE;
    double dt = 0.05;
    bool boundary_penalty = false;
    /// Continuous-time variant: uniform time nodes on [0, t0], including both ends.
    Index time_nodes = 21;

    PropagatorConfig propagator() const;
};

/// Input functions (columns) with the collocation rows selected for each.
struct LossBatch {
    Mat inputs;
    std::vector<std::vector<Index>> points;

    Index size() const { return inputs.cols(); }
    void validate() const;
};

LossBatch full_batch(const TrainingSet& set);

struct FieldLoss {
    double value = 0.0;
    Mat grad; // d value / d fields, empty unless requested
};

/// (1/2S) sum_s mean_{i in C_s} r_s(i)^2 with r = g - w dt L(g) - rhs(f),
/// g and f as [N x S]. The boundary penalty adds (1/2S) sum_s mean of g^2
/// over the two endpoints and is only defined on Dirichlet grids.
FieldLoss step_loss_fields(const Equation& eq, const PropagatorConfig& cfg, const Mat& g,
                           const Mat& f, const std::vector<std::vector<Index>>& points,
                           bool boundary_penalty = false, bool want_grad = false);

/// Uniform time grid with `nodes` points on [0, t0].
Vec cont_time_grid(double t0, Index nodes);

/// Second-order time derivative on a uniform grid, rows = space, columns = time.
Mat time_derivative(const Mat& u, double tau);
/// Adjoint of time_derivative.
Mat time_derivative_transpose(const Mat& du, double tau);

/// u holds every sample's space-time field, stacked time-major:
/// u(k * N + i, s) = u_s(t_k, x_i). Loss per sample is the mean of
/// (D_t u - L(u))^2 over all time nodes and the rows in C_s, plus the mean
/// of (u(0) - f)^2 over all sensors; the total is (1/2S) sum_s.
FieldLoss cont_loss_fields(const Equation& eq, double t0, Index time_nodes, const Mat& u,
                           const Mat& f, const std::vector<std::vector<Index>>& points,
                           bool want_grad = false);

struct LossGrad {
    double value = 0.0;
    Vec grad; // flattened [branch, w, trunk]
};

double pi_loss(const DeepONetModel& model, const Equation& eq, const PropagatorConfig& cfg,
               const LossBatch& batch, bool boundary_penalty = false);
LossGrad pi_loss_and_grad(const DeepONetModel& model, const Equation& eq,
                          const PropagatorConfig& cfg, const LossBatch& batch,
                          bool boundary_penalty = false);

double cont_loss(const ContModel& model, const Equation& eq, const LossBatch& batch,
                 Index time_nodes);
LossGrad cont_loss_and_grad(const ContModel& model, const Equation& eq, const LossBatch& batch,
                            Index time_nodes);

} // namespace tlnet

#endif // TLNET_LOSSES_HPP
