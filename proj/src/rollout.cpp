#include "tlnet/rollout.hpp"

#include <charconv>
#include <cmath>
#include <ostream>

namespace tlnet {

void RolloutConfig::validate() const {
    if (steps < 1) throw std::invalid_argument("RolloutConfig: K must be at least 1");
    if (!(dt > 0.0)) throw std::invalid_argument("RolloutConfig: dt must be positive");
    if (tl_every < 1) throw std::invalid_argument("RolloutConfig: tl_every must be at least 1");
}

PropagatorConfig RolloutConfig::propagator() const {
    PropagatorConfig p;
    p.dt = dt;
    p.scheme = scheme;
    return p;
}

namespace {

void check_state(const Vec& f, Index step) {
    if (!f.allFinite())
        throw BlowupError("rollout: non-finite state at step " + std::to_string(step), step);
}

} // namespace

Mat rollout(const StepFunction& step, const Vec& f0, Index steps) {
    if (steps < 1) throw std::invalid_argument("rollout: K must be at least 1");
    check_state(f0, 0);
    Mat traj(f0.size(), steps + 1);
    traj.col(0) = f0;
    for (Index n = 0; n < steps; ++n) {
        Vec next = step(traj.col(n));
        require_shape(next.size() == f0.size(), "rollout: step changed the state length");
        check_state(next, n + 1);
        traj.col(n + 1) = next;
    }
    return traj;
}

Mat rollout_vanilla(const DeepONetModel& model, const Vec& f0, const RolloutConfig& cfg) {
    cfg.validate();
    model.validate();
    const auto pts = sensor_trunk_points(model);
    const Mat trunk = trunk_features(model, pts) * pts.mask.asDiagonal();
    return rollout(
        [&](const Vec& f) -> Vec {
            const Mat h = coefficient_matrix(model, branch_features(model, f).col(0));
            return trunk.transpose() * (h * model.w);
        },
        f0, cfg.steps);
}

Mat rollout_reference(const Equation& eq, const Vec& f0, const RolloutConfig& cfg) {
    cfg.validate();
    const Propagator prop(eq, cfg.propagator());
    return rollout([&](const Vec& f) { return prop.step(f); }, f0, cfg.steps);
}

TLRollout rollout_tl(const TransferLearner& learner, const Vec& f0, const RolloutConfig& cfg) {
    cfg.validate();
    TLRollout out;
    Vec w = learner.model().w;
    Index n = 0;
    out.trajectory = rollout(
        [&](const Vec& f) -> Vec {
            if ((n + 1) % cfg.tl_every == 0) {
                out.update_steps.push_back(n);
                try {
                    Vec refit = learner.update(f, w).w;
                    if (!refit.allFinite()) throw NumericError("non-finite refit");
                    w = std::move(refit);
                } catch (const std::runtime_error&) {
                    out.failed_steps.push_back(n);
                }
                out.weights.push_back(w);
            }
            ++n;
            return learner.predict(f, w);
        },
        f0, cfg.steps);
    return out;
}

TLRollout rollout_tl(const DeepONetModel& model, const Equation& eq, const Vec& f0,
                     const RolloutConfig& cfg, const TLConfig& tl) {
    return rollout_tl(TransferLearner(model, eq, cfg.propagator(), tl), f0, cfg);
}

namespace {

void check_ensemble(const std::vector<Mat>& pred, const std::vector<Mat>& ref) {
    require_shape(!ref.empty() && pred.size() == ref.size(), "error metric: ensemble sizes differ");
    for (std::size_t e = 0; e < ref.size(); ++e)
        require_shape(pred[e].rows() == ref[e].rows() && pred[e].cols() == ref[e].cols(),
                      "error metric: trajectory shapes differ for member " + std::to_string(e));
}

} // namespace

double rel_err_step(const std::vector<Mat>& pred, const std::vector<Mat>& ref, Index k) {
    check_ensemble(pred, ref);
    require_shape(k >= 0 && k < ref.front().cols(), "rel_err_step: step out of range");
    double acc = 0.0;
    for (std::size_t e = 0; e < ref.size(); ++e) {
        const double den = ref[e].col(k).norm();
        if (den == 0.0)
            throw UndefinedError("rel_err_step: zero reference at step " + std::to_string(k) +
                                 " for member " + std::to_string(e));
        acc += (pred[e].col(k) - ref[e].col(k)).norm() / den;
    }
    return acc / double(ref.size());
}

double rel_err_agg(const std::vector<Mat>& pred, const std::vector<Mat>& ref, Index steps) {
    check_ensemble(pred, ref);
    require_shape(steps >= 1 && steps < ref.front().cols(), "rel_err_agg: K out of range");
    double num = 0.0, den = 0.0;
    for (std::size_t e = 0; e < ref.size(); ++e) {
        num += (pred[e].middleCols(1, steps) - ref[e].middleCols(1, steps)).squaredNorm();
        den += ref[e].middleCols(1, steps).squaredNorm();
    }
    if (den == 0.0) throw UndefinedError("rel_err_agg: zero reference");
    return std::sqrt(num / den);
}

ErrorReport make_error_report(const std::vector<Mat>& pred, const std::vector<Mat>& ref,
                              double dt) {
    check_ensemble(pred, ref);
    ErrorReport r;
    const Index steps = ref.front().cols() - 1;
    for (Index k = 1; k <= steps; ++k) r.per_step.push_back(rel_err_step(pred, ref, k));
    r.aggregate = rel_err_agg(pred, ref, steps);
    r.ensemble = Index(ref.size());
    r.dt = dt;
    r.horizon = dt * double(steps);
    return r;
}

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void write_error_csv(std::ostream& os, const ErrorReport& report) {
    os << "step,t,rel_err\n";
    for (std::size_t n = 0; n < report.per_step.size(); ++n)
        os << n + 1 << ',' << format_double(report.dt * double(n + 1)) << ','
           << format_double(report.per_step[n]) << '\n';
}

} // namespace tlnet
