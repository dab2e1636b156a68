#ifndef TLNET_TRAIN_HPP
#define TLNET_TRAIN_HPP

// Adam training of every network parameter on the physics-informed loss.

#include "tlnet/adam.hpp"
#include "tlnet/losses.hpp"

#include <functional>
#include <iosfwd>
#include <vector>

namespace tlnet {

struct TrainLogEntry {
    std::int64_t iter = 0;
    double lr = 0.0;
    double loss = 0.0; // full-set loss
};

/// Training diverged (loss above 1e6 or non-finite). Carries the history
/// recorded so far.
struct TrainingError : std::runtime_error {
    TrainingError(const std::string& what, std::vector<TrainLogEntry> h)
        : std::runtime_error(what), history(std::move(h)) {}
    std::vector<TrainLogEntry> history;
};

struct TrainOptions {
    TrainSchedule schedule;
    /// Full-set loss is evaluated (and the stopping rule checked) this often.
    std::int64_t record_every = 100;
    double divergence_limit = 1e6;
    /// Optional progress hook, called with every recorded entry.
    std::function<void(const TrainLogEntry&)> on_record;
};

template <typename Model>
struct TrainResult {
    Model model;
    std::vector<TrainLogEntry> history;
    std::int64_t iterations = 0;
    bool converged = false; // full-set loss fell below loss_tol
};

/// Single-step loss (backward Euler or Crank-Nicolson per spec.mode).
TrainResult<DeepONetModel> train(DeepONetModel model, const Equation& eq, const LossSpec& spec,
                                 const TrainingSet& data, const TrainOptions& opts,
                                 std::uint64_t seed);

/// Continuous-time loss over [0, t0].
TrainResult<ContModel> train(ContModel model, const Equation& eq, const LossSpec& spec,
                             const TrainingSet& data, const TrainOptions& opts,
                             std::uint64_t seed);

/// Splits the M collocation pairs into seeded minibatches: each epoch
/// shuffles all pairs and cuts consecutive runs of `batch` pairs, which are
/// then regrouped by function.
class MinibatchSampler {
public:
    MinibatchSampler(const TrainingSet& data, Index batch, std::uint64_t seed);
    LossBatch next();

private:
    struct Pair {
        Index function;
        Index point;
    };
    Mat inputs_;
    std::vector<Pair> pairs_;
    Index batch_;
    std::size_t cursor_ = 0;
    std::mt19937_64 rng_;
};

/// CSV with header iter,lr,loss.
void write_train_log(std::ostream& os, const std::vector<TrainLogEntry>& history);

} // namespace tlnet

#endif // TLNET_TRAIN_HPP
