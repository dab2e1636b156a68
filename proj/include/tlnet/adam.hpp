#ifndef TLNET_ADAM_HPP
#define TLNET_ADAM_HPP

#include "tlnet/common.hpp"

#include <cmath>
#include <cstdint>

namespace tlnet {

/// Learning-rate schedule and stopping rule for network training.
struct TrainSchedule {
    double lr0 = 1e-3;
    double decay = 0.95;
    std::int64_t decay_every = 5000;
    Index batch = 100;
    std::int64_t max_iters = 100000;
    double loss_tol = 1e-6;

    void validate() const {
        if (!(lr0 > 0.0) || !(decay > 0.0 && decay <= 1.0) || !(loss_tol > 0.0) ||
            decay_every <= 0 || batch <= 0 || max_iters < 0)
            throw std::invalid_argument("TrainSchedule: invalid hyperparameters");
    }

    /// Staircase decay: lr0 * decay^floor(step / decay_every).
    double learning_rate(std::int64_t step) const {
        return lr0 * std::pow(decay, double(step / decay_every));
    }
};

struct AdamState {
    static constexpr double beta1 = 0.9;
    static constexpr double beta2 = 0.999;
    static constexpr double eps = 1e-8;

    Vec m;
    Vec v;
    std::int64_t step = 0;

    static AdamState fresh(Index n) { return {Vec::Zero(n), Vec::Zero(n), 0}; }
};

/// In-place Adam update with bias correction. The learning rate is taken
/// from the schedule at the current step count, before it is incremented.
inline void adam_update(Vec& params, const Vec& grads, AdamState& state,
                        const TrainSchedule& schedule) {
    require_shape(params.size() == grads.size() && state.m.size() == params.size() &&
                      state.v.size() == params.size(),
                  "adam_step: length mismatch");
    const double lr = schedule.learning_rate(state.step);
    const std::int64_t t = state.step + 1;
    const double c1 = 1.0 - std::pow(AdamState::beta1, double(t));
    const double c2 = 1.0 - std::pow(AdamState::beta2, double(t));
    state.m = AdamState::beta1 * state.m + (1.0 - AdamState::beta1) * grads;
    state.v = AdamState::beta2 * state.v + (1.0 - AdamState::beta2) * grads.cwiseAbs2();
    params.array() -=
        lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + AdamState::eps);
    state.step = t;
}

/// Value-returning form of adam_update.
inline std::pair<Vec, AdamState> adam_step(Vec params, const Vec& grads, AdamState state,
                                           const TrainSchedule& schedule) {
    adam_update(params, grads, state, schedule);
    return {std::move(params), std::move(state)};
}

} // namespace tlnet

#endif // TLNET_ADAM_HPP
