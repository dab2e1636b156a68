#include "tlnet/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>

namespace tlnet {

MinibatchSampler::MinibatchSampler(const TrainingSet& data, Index batch, std::uint64_t seed)
    : inputs_(data.inputs()), batch_(batch), rng_(derive_seed(seed, 0xBA7C)) {
    require_shape(batch >= 1, "MinibatchSampler: batch must be positive");
    for (std::size_t s = 0; s < data.points.size(); ++s)
        for (Index i : data.points[s]) pairs_.push_back({Index(s), i});
    require_shape(!pairs_.empty(), "MinibatchSampler: no collocation pairs");
    std::shuffle(pairs_.begin(), pairs_.end(), rng_);
}

LossBatch MinibatchSampler::next() {
    std::map<Index, std::vector<Index>> grouped;
    const std::size_t take = std::min<std::size_t>(std::size_t(batch_), pairs_.size());
    for (std::size_t k = 0; k < take; ++k) {
        if (cursor_ == pairs_.size()) {
            std::shuffle(pairs_.begin(), pairs_.end(), rng_);
            cursor_ = 0;
        }
        const auto& pr = pairs_[cursor_++];
        grouped[pr.function].push_back(pr.point);
    }
    LossBatch out;
    out.inputs.resize(inputs_.rows(), Index(grouped.size()));
    Index col = 0;
    for (auto& [fn, pts] : grouped) {
        out.inputs.col(col++) = inputs_.col(fn);
        std::sort(pts.begin(), pts.end());
        out.points.push_back(std::move(pts));
    }
    return out;
}

namespace {

DeepONetModel& net_of(DeepONetModel& m) { return m; }
DeepONetModel& net_of(ContModel& m) { return m.net; }

template <typename Model, typename LossGradFn, typename LossFn>
TrainResult<Model> run_adam(Model model, const TrainingSet& data, const TrainOptions& opts,
                            std::uint64_t seed, LossGradFn loss_grad, LossFn full_loss) {
    const auto& sched = opts.schedule;
    sched.validate();
    require_shape(opts.record_every >= 1, "train: record_every must be positive");

    TrainResult<Model> result;
    const LossBatch full = full_batch(data);
    auto record = [&](std::int64_t iter, double lr, double loss) {
        result.history.push_back({iter, lr, loss});
        if (opts.on_record) opts.on_record(result.history.back());
        if (!std::isfinite(loss) || loss > opts.divergence_limit)
            throw TrainingError("training diverged at iteration " + std::to_string(iter) +
                                    " (loss " + std::to_string(loss) + ")",
                                result.history);
    };

    double loss = full_loss(model, full);
    record(0, sched.learning_rate(0), loss);
    result.converged = loss < sched.loss_tol;

    Vec params = flatten(net_of(model));
    AdamState adam = AdamState::fresh(params.size());
    MinibatchSampler sampler(data, sched.batch, seed);
    std::int64_t iter = 0;
    while (!result.converged && iter < sched.max_iters) {
        const LossBatch batch = sampler.next();
        LossGrad lg;
        try {
            lg = loss_grad(model, batch);
        } catch (const NumericError& e) {
            throw TrainingError(std::string("training diverged: ") + e.what(), result.history);
        }
        const double lr = sched.learning_rate(adam.step);
        adam_update(params, lg.grad, adam, sched);
        unflatten_into(params, net_of(model));
        ++iter;
        if (iter % opts.record_every == 0 || iter == sched.max_iters) {
            loss = full_loss(model, full);
            record(iter, lr, loss);
            result.converged = loss < sched.loss_tol;
        }
    }
    result.iterations = iter;
    result.model = std::move(model);
    return result;
}

} // namespace

TrainResult<DeepONetModel> train(DeepONetModel model, const Equation& eq, const LossSpec& spec,
                                 const TrainingSet& data, const TrainOptions& opts,
                                 std::uint64_t seed) {
    if (spec.mode == LossMode::Cont)
        throw std::invalid_argument("train: continuous-time loss needs a ContModel");
    model.validate();
    const auto cfg = spec.propagator();
    return run_adam(
        std::move(model), data, opts, seed,
        [&](const DeepONetModel& m, const LossBatch& b) {
            return pi_loss_and_grad(m, eq, cfg, b, spec.boundary_penalty);
        },
        [&](const DeepONetModel& m, const LossBatch& b) {
            return pi_loss(m, eq, cfg, b, spec.boundary_penalty);
        });
}

TrainResult<ContModel> train(ContModel model, const Equation& eq, const LossSpec& spec,
                             const TrainingSet& data, const TrainOptions& opts,
                             std::uint64_t seed) {
    if (spec.mode != LossMode::Cont)
        throw std::invalid_argument("train: ContModel needs the continuous-time loss");
    model.validate();
    return run_adam(
        std::move(model), data, opts, seed,
        [&](const ContModel& m, const LossBatch& b) {
            return cont_loss_and_grad(m, eq, b, spec.time_nodes);
        },
        [&](const ContModel& m, const LossBatch& b) {
            return cont_loss(m, eq, b, spec.time_nodes);
        });
}

void write_train_log(std::ostream& os, const std::vector<TrainLogEntry>& history) {
    os << "iter,lr,loss\n";
    char buf[96];
    for (const auto& e : history) {
        std::snprintf(buf, sizeof buf, "%lld,%.17g,%.17g\n", static_cast<long long>(e.iter), e.lr,
                      e.loss);
        os << buf;
    }
}

} // namespace tlnet
