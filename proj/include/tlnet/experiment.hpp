#ifndef TLNET_EXPERIMENT_HPP
#define TLNET_EXPERIMENT_HPP

// End-to-end experiment: data generation, training, reference / vanilla /
// transfer-learning rollouts and their error reports. Shared by the CLI and
// the acceptance suite.

#include "tlnet/grf.hpp"
#include "tlnet/operator_net.hpp"
#include "tlnet/pde.hpp"
#include "tlnet/rollout.hpp"
#include "tlnet/train.hpp"
#include "tlnet/transfer.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace tlnet {

/// Flat experiment description; JSON keys equal the member names.
struct ExperimentConfig {
    // equation and grid
    std::string eq = "rd";
    double d = 1e-3;
    double k = 1e-3;
    double d1 = 1e-3;
    double d2 = 0.1;
    double eps = 1.0;
    Index N_x = 64;
    Index N_v = 16;
    double dt = 0.05;
    Scheme scheme = Scheme::BackwardEuler;
    // data
    KernelSpec kernel{KernelKind::SqExp1D, 0.2};
    Index N_b = 100;
    Index n_t = 20;
    Index M = 1000;
    Index points_per_function = 20;
    // model
    Index p = 40;
    Index q = 15;
    Index width = 50;
    Index depth = 4;
    Activation activation = Activation::Tanh;
    bool modified = true;
    // training
    TrainSchedule schedule{1e-3, 0.95, 5000, 100, 30000, 1e-6};
    std::string loss = "step"; // "step" or "cont"
    bool boundary_penalty = false;
    Index time_nodes = 21;
    double t0 = 1.0;
    // transfer learning and rollout
    TLConfig tl;
    std::string tl_method = "auto"; // "auto", "linear_lstsq", "nonlinear_lm"
    Index K = 1000;
    Index tl_every = 1;
    Index N_e = 30;
    std::uint64_t seed = 0;

    Equation equation() const;
    LossSpec loss_spec() const;
    RolloutConfig rollout_config() const;
    /// TL settings with the method resolved ("auto" picks the closed form
    /// exactly when the step residual is affine in w).
    TLConfig tl_config() const;
    DeepONetOptions model_options() const;
    TrainingSetOptions data_options() const;
    void validate() const;
};

/// Defaults for an equation kind: "rd" (Dirichlet, SqExp l = 0.2),
/// "ac" / "ch" (periodic, Periodic1D l = 0.5), "rte" (phase space).
ExperimentConfig default_config(const std::string& eq);

/// Overlays the keys present in `j` onto `base`; unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig base);
/// Reads a JSON file; its "eq" key (if any) selects the defaults first.
ExperimentConfig load_config(const std::string& path);
nlohmann::json to_json(const ExperimentConfig& cfg);

// Dataset file: container "TLNETDAT" whose header records the config echo,
// the pool layout and the selected (function, point) pairs; payload is the
// N_s x N_p function pool, row-major.
void save_dataset(const std::string& path, const TrainingSet& set, const ExperimentConfig& cfg);
TrainingSet load_dataset(const std::string& path);

// Trajectory file: container "TLNETTRJ"; header has eq kind and parameters,
// grid, dt, scheme, member count, steps and state length; payload is each
// member's states in step order.
void save_trajectories(const std::string& path, const std::vector<Mat>& trajectories,
                       const ExperimentConfig& cfg);
std::vector<Mat> load_trajectories(const std::string& path, nlohmann::json* header = nullptr);

TrainingSet generate_data(const ExperimentConfig& cfg);
DeepONetModel initial_model(const ExperimentConfig& cfg);
ContModel initial_cont_model(const ExperimentConfig& cfg);
/// N_e held-out initial conditions as columns, drawn with a seed disjoint
/// from the training data.
Mat test_initial_conditions(const ExperimentConfig& cfg);

std::vector<Mat> reference_rollouts(const ExperimentConfig& cfg, const Mat& ics);
std::vector<Mat> vanilla_rollouts(const ExperimentConfig& cfg, const DeepONetModel& model,
                                  const Mat& ics);
/// Continuous-time model stepped by evaluating at t = dt.
std::vector<Mat> cont_rollouts(const ExperimentConfig& cfg, const ContModel& model, const Mat& ics);

struct TLRollouts {
    std::vector<Mat> trajectories;
    Index updates = 0;
    Index failures = 0;
};
TLRollouts tl_rollouts(const ExperimentConfig& cfg, const DeepONetModel& model, const Mat& ics);

struct PipelineResult {
    TrainResult<DeepONetModel> training;
    ErrorReport vanilla;
    std::optional<ErrorReport> transfer; // absent for the continuous-time loss
    Index tl_updates = 0;
    Index tl_failures = 0;
    double train_seconds = 0.0;
    double rollout_seconds = 0.0;
};

/// Runs everything; when out_dir is non-empty writes train_log.csv,
/// errors_vanilla.csv, errors_tl.csv, model.bin and summary.json there.
PipelineResult run_pipeline(const ExperimentConfig& cfg, const std::string& out_dir = "",
                            const std::function<void(const TrainLogEntry&)>& progress = {});

/// JSON summary of an error report plus runtime and the config echo.
nlohmann::json summary_json(const ErrorReport& report, double runtime_seconds,
                            const ExperimentConfig& cfg);

} // namespace tlnet

#endif // TLNET_EXPERIMENT_HPP
