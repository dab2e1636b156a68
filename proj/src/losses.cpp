#include "tlnet/losses.hpp"

#include <cmath>

namespace tlnet {

std::string to_string(LossMode mode) {
    switch (mode) {
    case LossMode::SingleStepBE: return "single_step_be";
    case LossMode::SingleStepCN: return "single_step_cn";
    case LossMode::Cont: return "cont";
    }
    return "unknown";
}

LossMode loss_mode_from_string(const std::string& s) {
    if (s == "single_step_be") return LossMode::SingleStepBE;
    if (s == "single_step_cn") return LossMode::SingleStepCN;
    if (s == "cont") return LossMode::Cont;
    throw std::invalid_argument("unknown loss mode: " + s);
}

PropagatorConfig LossSpec::propagator() const {
    PropagatorConfig cfg;
    cfg.dt = dt;
    cfg.scheme = mode == LossMode::SingleStepCN ? Scheme::CrankNicolson : Scheme::BackwardEuler;
    return cfg;
}

void LossBatch::validate() const {
    require_shape(Index(points.size()) == inputs.cols(), "LossBatch: one point list per input");
    for (const auto& pts : points) {
        require_shape(!pts.empty(), "LossBatch: empty collocation list");
        for (Index i : pts)
            require_shape(i >= 0 && i < inputs.rows(), "LossBatch: collocation index out of range");
    }
}

LossBatch full_batch(const TrainingSet& set) {
    return {set.inputs(), set.points};
}

namespace {

void check_residual(const Mat& r, const char* what) {
    for (Index s = 0; s < r.cols(); ++s)
        if (!r.col(s).allFinite())
            throw NumericError(std::string(what) + ": non-finite residual for sample " +
                               std::to_string(s));
}

} // namespace

FieldLoss step_loss_fields(const Equation& eq, const PropagatorConfig& cfg, const Mat& g,
                           const Mat& f, const std::vector<std::vector<Index>>& points,
                           bool boundary_penalty, bool want_grad) {
    require_shape(g.rows() == f.rows() && g.cols() == f.cols(), "step loss: field shapes differ");
    require_shape(Index(points.size()) == g.cols(), "step loss: one point list per sample");
    if (boundary_penalty && eq.grid.boundary != BoundaryTag::Dirichlet)
        throw std::invalid_argument("step loss: boundary penalty needs a Dirichlet grid");
    const Index n = g.rows(), n_s = g.cols();
    const Mat r = residual(eq, cfg, g, f);
    check_residual(r, "pi_loss");

    FieldLoss out;
    Mat dr;
    if (want_grad) dr = Mat::Zero(n, n_s);
    for (Index s = 0; s < n_s; ++s) {
        const auto& pts = points[std::size_t(s)];
        const double scale = 1.0 / (2.0 * double(n_s) * double(pts.size()));
        for (Index i : pts) {
            out.value += scale * r(i, s) * r(i, s);
            if (want_grad) dr(i, s) += 2.0 * scale * r(i, s);
        }
    }
    if (want_grad)
        out.grad = dr - cfg.implicit_weight() * cfg.dt * apply_jacobian_transpose(eq, g, dr);

    if (boundary_penalty) {
        const double scale = 1.0 / (2.0 * double(n_s) * 2.0);
        for (Index s = 0; s < n_s; ++s)
            for (Index i : {Index(0), n - 1}) {
                out.value += scale * g(i, s) * g(i, s);
                if (want_grad) out.grad(i, s) += 2.0 * scale * g(i, s);
            }
    }
    return out;
}

Vec cont_time_grid(double t0, Index nodes) {
    if (!(t0 > 0.0) || nodes < 3)
        throw std::invalid_argument("cont time grid needs t0 > 0 and at least 3 nodes");
    return Vec::LinSpaced(nodes, 0.0, t0);
}

Mat time_derivative(const Mat& u, double tau) {
    const Index n = u.cols();
    require_shape(n >= 3, "time_derivative: need at least 3 time nodes");
    Mat d(u.rows(), n);
    const double c = 1.0 / (2.0 * tau);
    d.col(0) = c * (-3.0 * u.col(0) + 4.0 * u.col(1) - u.col(2));
    for (Index k = 1; k + 1 < n; ++k) d.col(k) = c * (u.col(k + 1) - u.col(k - 1));
    d.col(n - 1) = c * (3.0 * u.col(n - 1) - 4.0 * u.col(n - 2) + u.col(n - 3));
    return d;
}

Mat time_derivative_transpose(const Mat& du, double tau) {
    const Index n = du.cols();
    require_shape(n >= 3, "time_derivative_transpose: need at least 3 time nodes");
    Mat u = Mat::Zero(du.rows(), n);
    const double c = 1.0 / (2.0 * tau);
    u.col(0) += -3.0 * c * du.col(0);
    u.col(1) += 4.0 * c * du.col(0);
    u.col(2) += -c * du.col(0);
    for (Index k = 1; k + 1 < n; ++k) {
        u.col(k + 1) += c * du.col(k);
        u.col(k - 1) -= c * du.col(k);
    }
    u.col(n - 1) += 3.0 * c * du.col(n - 1);
    u.col(n - 2) += -4.0 * c * du.col(n - 1);
    u.col(n - 3) += c * du.col(n - 1);
    return u;
}

FieldLoss cont_loss_fields(const Equation& eq, double t0, Index time_nodes, const Mat& u,
                           const Mat& f, const std::vector<std::vector<Index>>& points,
                           bool want_grad) {
    const Index n = f.rows(), n_s = f.cols();
    const Vec times = cont_time_grid(t0, time_nodes);
    require_shape(u.rows() == n * time_nodes && u.cols() == n_s, "cont loss: field shape");
    require_shape(Index(points.size()) == n_s, "cont loss: one point list per sample");
    const double tau = t0 / double(time_nodes - 1);

    FieldLoss out;
    if (want_grad) out.grad = Mat::Zero(u.rows(), n_s);
    for (Index s = 0; s < n_s; ++s) {
        const Mat us = u.col(s).reshaped(n, time_nodes);
        const Mat r = time_derivative(us, tau) - apply_spatial(eq, us);
        if (!r.allFinite())
            throw NumericError("cont_loss: non-finite residual for sample " + std::to_string(s));
        const auto& pts = points[std::size_t(s)];
        const double pde_scale = 1.0 / (2.0 * double(n_s) * double(pts.size() * time_nodes));
        const double ic_scale = 1.0 / (2.0 * double(n_s) * double(n));
        const Vec ic = us.col(0) - f.col(s);

        Mat dr;
        if (want_grad) dr = Mat::Zero(n, time_nodes);
        for (Index k = 0; k < time_nodes; ++k)
            for (Index i : pts) {
                out.value += pde_scale * r(i, k) * r(i, k);
                if (want_grad) dr(i, k) = 2.0 * pde_scale * r(i, k);
            }
        out.value += ic_scale * ic.squaredNorm();
        if (want_grad) {
            Mat du = time_derivative_transpose(dr, tau) - apply_jacobian_transpose(eq, us, dr);
            du.col(0) += 2.0 * ic_scale * ic;
            out.grad.col(s) = du.reshaped();
        }
    }
    return out;
}

namespace {

void require_compatible(const DeepONetModel& model, const Equation& eq) {
    const auto expected = boundary_mode_for(eq.grid.boundary);
    if (model.boundary != expected && model.boundary != BoundaryMode::None)
        throw std::invalid_argument("loss: model boundary mode " + to_string(model.boundary) +
                                    " does not match the equation's " +
                                    to_string(eq.grid.boundary) + " grid");
    require_shape(model.sensor_count() == eq.grid.size(), "loss: sensor count != grid size");
}

} // namespace

double pi_loss(const DeepONetModel& model, const Equation& eq, const PropagatorConfig& cfg,
               const LossBatch& batch, bool boundary_penalty) {
    require_compatible(model, eq);
    batch.validate();
    const Mat g = eval_points(model, batch.inputs, sensor_trunk_points(model));
    return step_loss_fields(eq, cfg, g, batch.inputs, batch.points, boundary_penalty).value;
}

LossGrad pi_loss_and_grad(const DeepONetModel& model, const Equation& eq,
                          const PropagatorConfig& cfg, const LossBatch& batch,
                          bool boundary_penalty) {
    require_compatible(model, eq);
    batch.validate();
    const auto tape = deeponet_forward(model, batch.inputs, sensor_trunk_points(model));
    const auto fl = step_loss_fields(eq, cfg, tape.output, batch.inputs, batch.points,
                                     boundary_penalty, true);
    DeepONetModel grad = model.zeros_like();
    deeponet_backward(model, tape, fl.grad, grad);
    return {fl.value, flatten(grad)};
}

double cont_loss(const ContModel& model, const Equation& eq, const LossBatch& batch,
                 Index time_nodes) {
    require_compatible(model.net, eq);
    batch.validate();
    // Trunk points are time-major, which is the stacking cont_loss_fields expects.
    const auto pts = sensor_trunk_points(model.net, cont_time_grid(model.t0, time_nodes));
    const Mat u = eval_points(model.net, batch.inputs, pts);
    return cont_loss_fields(eq, model.t0, time_nodes, u, batch.inputs, batch.points).value;
}

LossGrad cont_loss_and_grad(const ContModel& model, const Equation& eq, const LossBatch& batch,
                            Index time_nodes) {
    require_compatible(model.net, eq);
    batch.validate();
    const auto pts = sensor_trunk_points(model.net, cont_time_grid(model.t0, time_nodes));
    const auto tape = deeponet_forward(model.net, batch.inputs, pts);
    const auto fl =
        cont_loss_fields(eq, model.t0, time_nodes, tape.output, batch.inputs, batch.points, true);
    DeepONetModel grad = model.net.zeros_like();
    deeponet_backward(model.net, tape, fl.grad, grad);
    return {fl.value, flatten(grad)};
}

} // namespace tlnet
