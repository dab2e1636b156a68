#ifndef TLNET_OPERATOR_NET_HPP
#define TLNET_OPERATOR_NET_HPP

// Branch/trunk operator network with explicit last-layer weights:
//
//   G(f)(x) = mask(x) * sum_j w_j sum_k h_{k,j}(f) t_k(x)
//
// The branch maps the sensor vector to p*q outputs, read as the p x q
// matrix h in column-major order (h_{k,j} = out[j*p + k]). The trunk maps a
// lifted coordinate to p features. phi_j(x; f) = mask(x) sum_k h_{k,j} t_k(x)
// are the input-dependent basis functions updated by transfer learning.

#include "tlnet/common.hpp"
#include "tlnet/grf.hpp"
#include "tlnet/mlp.hpp"

#include <iosfwd>
#include <optional>
#include <string>

namespace tlnet {

enum class BoundaryMode : std::uint32_t { DirichletMask = 0, PeriodicLift = 1, None = 2 };

std::string to_string(BoundaryMode mode);
BoundaryMode boundary_mode_from_string(const std::string& s);
/// The mode that enforces a grid's boundary condition architecturally.
BoundaryMode boundary_mode_for(BoundaryTag tag);

struct DeepONetModel {
    MlpParamsd branch; // [N_p] -> [p*q]
    Vec w;             // [q]
    MlpParamsd trunk;  // lifted coordinate (optionally preceded by t) -> [p]
    Index p = 0;
    Index q = 0;
    BoundaryMode boundary = BoundaryMode::None;
    SensorGrid sensors;
    bool time_input = false;     // trunk input starts with t (continuous-time variant)
    bool velocity_input = false; // trunk input ends with v (phase-space coordinate)

    Index sensor_count() const { return sensors.size(); }
    /// Number of rows of the trunk input: t (if any), then x or (cos, sin),
    /// then v on phase-space sensors.
    Index trunk_input_dim() const;
    Index parameter_count() const {
        return branch.parameter_count() + w.size() + trunk.parameter_count();
    }
    void validate() const;
    /// Same shapes, every parameter zero.
    DeepONetModel zeros_like() const;
};

struct DeepONetOptions {
    Index p = 40;
    Index q = 15;
    Index width = 50;
    Index depth = 4;
    Activation activation = Activation::Tanh;
    bool modified = true;
    BoundaryMode boundary = BoundaryMode::None;
    bool time_input = false;
    bool velocity_input = false;
    /// Trunk depth; 0 mirrors the branch depth.
    Index trunk_depth = 0;
};

DeepONetModel make_deeponet(const DeepONetOptions& opts, const SensorGrid& sensors,
                            std::uint64_t seed);

/// Trunk inputs and output mask for a set of evaluation points.
struct TrunkPoints {
    Mat inputs; // [trunk_input_dim x N]
    Vec mask;   // [N]
};

TrunkPoints trunk_points(const DeepONetModel& model, const std::vector<Point>& points,
                         std::optional<double> t = std::nullopt);
/// Trunk points at every sensor; for time_input models, the sensors are
/// repeated for each time in `times` (time-major).
TrunkPoints sensor_trunk_points(const DeepONetModel& model);
TrunkPoints sensor_trunk_points(const DeepONetModel& model, const Vec& times);

/// Branch outputs [p*q x S] for sensor columns F [N_p x S].
Mat branch_features(const DeepONetModel& model, const Mat& f);
/// Trunk features [p x N].
Mat trunk_features(const DeepONetModel& model, const TrunkPoints& pts);
/// h for one sample as a p x q matrix.
Mat coefficient_matrix(const DeepONetModel& model, const Eigen::Ref<const Vec>& branch_out);

double eval(const DeepONetModel& model, const Vec& f, Point z);
double eval(const DeepONetModel& model, const Vec& f, double x);

/// phi_j(z; f) for 0 <= j < q.
double basis(const DeepONetModel& model, const Vec& f, Point z, Index j);
double basis(const DeepONetModel& model, const Vec& f, double x, Index j);
/// All basis functions at all sensors, [N_p x q].
Mat basis_grid(const DeepONetModel& model, const Vec& f);

/// Evaluation at every sensor; usable as the next input.
Vec eval_grid(const DeepONetModel& model, const Vec& f);
/// Batched: columns of F are sensor vectors, result is [N x S] at `pts`.
Mat eval_points(const DeepONetModel& model, const Mat& f, const TrunkPoints& pts);

/// Forward values kept for the reverse pass.
struct DeepONetTape {
    MlpTaped branch;
    MlpTaped trunk;
    Mat combined; // B = h w per sample, [p x S]
    Vec mask;
    Mat output;   // [N x S]
};

DeepONetTape deeponet_forward(const DeepONetModel& model, const Mat& f, const TrunkPoints& pts);
/// Accumulates dL/dparams into `grad` (a zeros_like of the model) given dL/dOutput.
void deeponet_backward(const DeepONetModel& model, const DeepONetTape& tape, const Mat& grad_output,
                       DeepONetModel& grad);

/// Parameter vector ordered [branch, w, trunk].
Vec flatten(const DeepONetModel& model);
void unflatten_into(const Eigen::Ref<const Vec>& flat, DeepONetModel& model);

// Continuous-time variant: the trunk also receives t in [0, t0].
struct ContModel {
    DeepONetModel net;
    double t0 = 1.0;

    void validate() const;
};

ContModel make_cont_model(const DeepONetOptions& opts, const SensorGrid& sensors, double t0,
                          std::uint64_t seed);
double cont_eval(const ContModel& model, const Vec& f, double t, Point z);
double cont_eval(const ContModel& model, const Vec& f, double t, double x);
Vec cont_eval_grid(const ContModel& model, const Vec& f, double t);

// Kinetic composite: f = N1(x) A(x) + C(x) + eps N2(x, v) B(x, v), where the
// two networks read the same phase-space sensor vector.
struct RteOperatorModel {
    DeepONetModel net1; // trunk on x
    DeepONetModel net2; // trunk on (x, v)
    PhaseSpaceMasks masks;
    Grid grid;
    double eps = 1.0;
};

RteOperatorModel make_rte_model(const DeepONetOptions& opts, const Grid& grid, double eps,
                                std::uint64_t seed);

struct RteValue {
    double f = 0.0;
    double rho = 0.0;
    double g = 0.0;
};

/// Value at (x, v); the velocity average uses the model grid's quadrature.
RteValue rte_eval(const RteOperatorModel& model, const Vec& f, Point z);

struct RteField {
    Mat f;   // [n_x x n_v]
    Vec rho; // [n_x]
    Mat g;   // [n_x x n_v]
};

RteField rte_eval_grid(const RteOperatorModel& model, const Vec& f);

// Checkpoints: magic "TLNETDON", u32 version, u32 p, u32 q, u32 boundary
// mode, u32 time flag, u32 velocity flag, f64 t0, sensor grid (u32 boundary
// tag, f64 spacing, u64 count, count x (f64 x, f64 v)), q x f64 w, branch
// MLP, trunk MLP.
inline constexpr std::string_view kModelMagic = "TLNETDON";

void write_model(std::ostream& os, const DeepONetModel& model, double t0 = 0.0);
DeepONetModel read_model(std::istream& is, double* t0 = nullptr);
void save_model(const std::string& path, const DeepONetModel& model, double t0 = 0.0);
DeepONetModel load_model(const std::string& path, double* t0 = nullptr);

} // namespace tlnet

#endif // TLNET_OPERATOR_NET_HPP
