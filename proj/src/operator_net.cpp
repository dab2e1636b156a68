#include "tlnet/operator_net.hpp"
#include "tlnet/binary_io.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

namespace tlnet {

std::string to_string(BoundaryMode mode) {
    switch (mode) {
    case BoundaryMode::DirichletMask: return "dirichlet_mask";
    case BoundaryMode::PeriodicLift: return "periodic_lift";
    case BoundaryMode::None: return "none";
    }
    return "unknown";
}

BoundaryMode boundary_mode_from_string(const std::string& s) {
    if (s == "dirichlet_mask") return BoundaryMode::DirichletMask;
    if (s == "periodic_lift") return BoundaryMode::PeriodicLift;
    if (s == "none") return BoundaryMode::None;
    throw std::invalid_argument("unknown boundary mode: " + s);
}

BoundaryMode boundary_mode_for(BoundaryTag tag) {
    switch (tag) {
    case BoundaryTag::Dirichlet: return BoundaryMode::DirichletMask;
    case BoundaryTag::Periodic: return BoundaryMode::PeriodicLift;
    case BoundaryTag::Inflow: return BoundaryMode::None;
    }
    return BoundaryMode::None;
}

Index DeepONetModel::trunk_input_dim() const {
    return (time_input ? 1 : 0) + (boundary == BoundaryMode::PeriodicLift ? 2 : 1) +
           (velocity_input ? 1 : 0);
}

void DeepONetModel::validate() const {
    require_shape(p >= 1 && q >= 1, "DeepONet: p and q must be positive");
    require_shape(w.size() == q, "DeepONet: w has length " + std::to_string(w.size()) +
                                     ", expected q = " + std::to_string(q));
    branch.validate();
    trunk.validate();
    require_shape(branch.input_dim() == sensor_count(), "DeepONet: branch input != sensor count");
    require_shape(branch.output_dim() == p * q, "DeepONet: branch output != p*q");
    require_shape(trunk.input_dim() == trunk_input_dim(), "DeepONet: trunk input width");
    require_shape(trunk.output_dim() == p, "DeepONet: trunk output != p");
    if (!w.allFinite()) throw ShapeError("DeepONet: non-finite w");
}

DeepONetModel DeepONetModel::zeros_like() const {
    DeepONetModel z = *this;
    z.branch = branch.zeros_like();
    z.trunk = trunk.zeros_like();
    z.w.setZero();
    return z;
}

DeepONetModel make_deeponet(const DeepONetOptions& opts, const SensorGrid& sensors,
                            std::uint64_t seed) {
    require_shape(opts.p >= 1 && opts.q >= 1, "make_deeponet: p and q must be positive");
    require_shape(sensors.size() >= 1, "make_deeponet: no sensors");
    DeepONetModel m;
    m.p = opts.p;
    m.q = opts.q;
    m.boundary = opts.boundary;
    m.sensors = sensors;
    m.time_input = opts.time_input;
    m.velocity_input = opts.velocity_input;

    std::mt19937_64 rng(derive_seed(seed, 0xB4A));
    m.branch = make_mlp<double>(sensors.size(), opts.width, opts.depth, opts.p * opts.q,
                                opts.activation, opts.modified, rng);
    const Index trunk_depth = opts.trunk_depth > 0 ? opts.trunk_depth : opts.depth;
    m.trunk = make_mlp<double>(m.trunk_input_dim(), opts.width, trunk_depth, opts.p,
                               opts.activation, opts.modified, rng);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    const double limit = std::sqrt(6.0 / double(opts.q + 1));
    m.w.resize(opts.q);
    for (Index j = 0; j < opts.q; ++j) m.w[j] = limit * dist(rng);
    return m;
}

TrunkPoints trunk_points(const DeepONetModel& model, const std::vector<Point>& points,
                         std::optional<double> t) {
    require_shape(model.time_input == t.has_value(),
                  "trunk_points: time coordinate required exactly for time-input models");
    const Index n = Index(points.size());
    TrunkPoints out;
    out.inputs.resize(model.trunk_input_dim(), n);
    out.mask.resize(n);
    const double two_pi = 2.0 * std::numbers::pi;
    for (Index i = 0; i < n; ++i) {
        const Point z = points[std::size_t(i)];
        Index r = 0;
        if (t) out.inputs(r++, i) = *t;
        if (model.boundary == BoundaryMode::PeriodicLift) {
            const double xr = z.x - std::floor(z.x); // exact 1-periodicity for shifted inputs
            out.inputs(r++, i) = std::cos(two_pi * xr);
            out.inputs(r++, i) = std::sin(two_pi * xr);
        } else {
            out.inputs(r++, i) = z.x;
        }
        if (model.velocity_input) out.inputs(r++, i) = z.v;
        out.mask[i] = model.boundary == BoundaryMode::DirichletMask ? z.x * (1.0 - z.x) : 1.0;
    }
    return out;
}

TrunkPoints sensor_trunk_points(const DeepONetModel& model) {
    return trunk_points(model, model.sensors.points);
}

TrunkPoints sensor_trunk_points(const DeepONetModel& model, const Vec& times) {
    const Index n = model.sensor_count();
    TrunkPoints out;
    out.inputs.resize(model.trunk_input_dim(), n * times.size());
    out.mask.resize(n * times.size());
    for (Index k = 0; k < times.size(); ++k) {
        auto block = trunk_points(model, model.sensors.points, times[k]);
        out.inputs.middleCols(k * n, n) = block.inputs;
        out.mask.segment(k * n, n) = block.mask;
    }
    return out;
}

Mat branch_features(const DeepONetModel& model, const Mat& f) {
    require_shape(f.rows() == model.sensor_count(),
                  "DeepONet: sensor vector has length " + std::to_string(f.rows()) +
                      ", expected " + std::to_string(model.sensor_count()));
    return mlp_forward(model.branch, f);
}

Mat trunk_features(const DeepONetModel& model, const TrunkPoints& pts) {
    return mlp_forward(model.trunk, pts.inputs);
}

Mat coefficient_matrix(const DeepONetModel& model, const Eigen::Ref<const Vec>& branch_out) {
    require_shape(branch_out.size() == model.p * model.q, "coefficient_matrix: length");
    return branch_out.reshaped(model.p, model.q);
}

namespace {

/// B[:, s] = h_s w for every sample column of the branch output.
Mat combine(const DeepONetModel& model, const Mat& branch_out) {
    Mat b = Mat::Zero(model.p, branch_out.cols());
    for (Index j = 0; j < model.q; ++j)
        b.noalias() += model.w[j] * branch_out.middleRows(j * model.p, model.p);
    return b;
}

Vec single_column(const Vec& f) { return f; }

} // namespace

Mat eval_points(const DeepONetModel& model, const Mat& f, const TrunkPoints& pts) {
    const Mat b = combine(model, branch_features(model, f));
    const Mat t = trunk_features(model, pts);
    return pts.mask.asDiagonal() * (t.transpose() * b);
}

double eval(const DeepONetModel& model, const Vec& f, Point z) {
    return eval_points(model, single_column(f), trunk_points(model, {z}))(0, 0);
}

double eval(const DeepONetModel& model, const Vec& f, double x) {
    return eval(model, f, Point{x, 0.0});
}

double basis(const DeepONetModel& model, const Vec& f, Point z, Index j) {
    if (j < 0 || j >= model.q)
        throw std::out_of_range("basis: index " + std::to_string(j) + " outside [0, q)");
    const Mat o = branch_features(model, f);
    const auto pts = trunk_points(model, {z});
    const Vec t = trunk_features(model, pts).col(0);
    return pts.mask[0] * t.dot(o.col(0).segment(j * model.p, model.p));
}

double basis(const DeepONetModel& model, const Vec& f, double x, Index j) {
    return basis(model, f, Point{x, 0.0}, j);
}

Mat basis_grid(const DeepONetModel& model, const Vec& f) {
    const Mat o = branch_features(model, f);
    const auto pts = sensor_trunk_points(model);
    const Mat t = trunk_features(model, pts);
    return pts.mask.asDiagonal() * (t.transpose() * coefficient_matrix(model, o.col(0)));
}

Vec eval_grid(const DeepONetModel& model, const Vec& f) {
    return eval_points(model, single_column(f), sensor_trunk_points(model)).col(0);
}

DeepONetTape deeponet_forward(const DeepONetModel& model, const Mat& f, const TrunkPoints& pts) {
    require_shape(f.rows() == model.sensor_count(), "deeponet_forward: sensor count");
    DeepONetTape tape;
    tape.branch = mlp_forward_tape(model.branch, f);
    tape.trunk = mlp_forward_tape(model.trunk, pts.inputs);
    tape.combined = combine(model, tape.branch.output);
    tape.mask = pts.mask;
    tape.output = pts.mask.asDiagonal() * (tape.trunk.output.transpose() * tape.combined);
    return tape;
}

void deeponet_backward(const DeepONetModel& model, const DeepONetTape& tape, const Mat& grad_output,
                       DeepONetModel& grad) {
    require_shape(grad_output.rows() == tape.output.rows() &&
                      grad_output.cols() == tape.output.cols(),
                  "deeponet_backward: output gradient shape");
    const Mat d_masked = tape.mask.asDiagonal() * grad_output;          // [N x S]
    const Mat d_combined = tape.trunk.output * d_masked;                // [p x S]
    const Mat d_trunk = tape.combined * d_masked.transpose();           // [p x N]
    Mat d_branch(model.p * model.q, d_combined.cols());
    for (Index j = 0; j < model.q; ++j) {
        const auto o_j = tape.branch.output.middleRows(j * model.p, model.p);
        grad.w[j] += (o_j.array() * d_combined.array()).sum();
        d_branch.middleRows(j * model.p, model.p) = model.w[j] * d_combined;
    }
    mlp_backward(model.branch, tape.branch, d_branch, grad.branch);
    mlp_backward(model.trunk, tape.trunk, d_trunk, grad.trunk);
}

Vec flatten(const DeepONetModel& model) {
    const Index nb = model.branch.parameter_count();
    const Index nt = model.trunk.parameter_count();
    Vec out(nb + model.q + nt);
    flatten_into<double>(model.branch, out.head(nb));
    out.segment(nb, model.q) = model.w;
    flatten_into<double>(model.trunk, out.tail(nt));
    return out;
}

void unflatten_into(const Eigen::Ref<const Vec>& flat, DeepONetModel& model) {
    const Index nb = model.branch.parameter_count();
    const Index nt = model.trunk.parameter_count();
    require_shape(flat.size() == nb + model.q + nt, "unflatten: length mismatch");
    unflatten_into<double>(flat.head(nb), model.branch);
    model.w = flat.segment(nb, model.q);
    unflatten_into<double>(flat.tail(nt), model.trunk);
}

void ContModel::validate() const {
    net.validate();
    require_shape(net.time_input, "ContModel: trunk must take a time input");
    if (!(t0 > 0.0)) throw std::invalid_argument("ContModel: t0 must be positive");
}

ContModel make_cont_model(const DeepONetOptions& opts, const SensorGrid& sensors, double t0,
                          std::uint64_t seed) {
    if (!(t0 > 0.0)) throw std::invalid_argument("make_cont_model: t0 must be positive");
    auto o = opts;
    o.time_input = true;
    return {make_deeponet(o, sensors, seed), t0};
}

double cont_eval(const ContModel& model, const Vec& f, double t, Point z) {
    if (t < 0.0 || t > model.t0)
        throw std::invalid_argument("cont_eval: t outside [0, t0]");
    return eval_points(model.net, single_column(f), trunk_points(model.net, {z}, t))(0, 0);
}

double cont_eval(const ContModel& model, const Vec& f, double t, double x) {
    return cont_eval(model, f, t, Point{x, 0.0});
}

Vec cont_eval_grid(const ContModel& model, const Vec& f, double t) {
    if (t < 0.0 || t > model.t0)
        throw std::invalid_argument("cont_eval_grid: t outside [0, t0]");
    return eval_points(model.net, single_column(f), trunk_points(model.net, model.net.sensors.points, t))
        .col(0);
}

RteOperatorModel make_rte_model(const DeepONetOptions& opts, const Grid& grid, double eps,
                                std::uint64_t seed) {
    require_shape(grid.n_v > 0, "make_rte_model: phase-space grid required");
    const auto sensors = SensorGrid::from_grid(grid);
    auto o = opts;
    o.boundary = BoundaryMode::None;
    o.time_input = false;
    RteOperatorModel m;
    o.velocity_input = false;
    m.net1 = make_deeponet(o, sensors, derive_seed(seed, 1));
    o.velocity_input = true;
    m.net2 = make_deeponet(o, sensors, derive_seed(seed, 2));
    m.masks = PhaseSpaceMasks::from_grid(grid);
    m.grid = grid;
    m.eps = eps;
    return m;
}

namespace {

double inflow_mask(double x, double v) { return std::max(v, 0.0) * x + std::max(-v, 0.0) * (1.0 - x); }

} // namespace

RteValue rte_eval(const RteOperatorModel& model, const Vec& f, Point z) {
    const Grid& grid = model.grid;
    const double n1 = eval(model.net1, f, z);
    std::vector<Point> pts;
    for (Index m = 0; m < grid.n_v; ++m) pts.push_back({z.x, grid.v[m]});
    pts.push_back(z);
    const Vec n2 = eval_points(model.net2, single_column(f), trunk_points(model.net2, pts)).col(0);
    double avg = 0.0;
    for (Index m = 0; m < grid.n_v; ++m) avg += 0.5 * grid.v_weights[m] * n2[m] * inflow_mask(z.x, grid.v[m]);
    const double a = z.x * (1.0 - z.x);
    const double c = 1.0 - 0.5 * z.x;
    const double n2b = n2[grid.n_v] * inflow_mask(z.x, z.v);
    RteValue out;
    out.f = n1 * a + c + model.eps * n2b;
    out.rho = n1 * a + c + model.eps * avg;
    out.g = n2b - avg;
    return out;
}

RteField rte_eval_grid(const RteOperatorModel& model, const Vec& f) {
    const Grid& grid = model.grid;
    std::vector<Point> xs;
    for (Index i = 0; i < grid.n_x; ++i) xs.push_back({grid.x[i], 0.0});
    const Vec n1 = eval_points(model.net1, single_column(f), trunk_points(model.net1, xs)).col(0);
    const Vec n2 = eval_grid(model.net2, f);
    const Mat n2b = n2.reshaped<Eigen::RowMajor>(grid.n_x, grid.n_v).array() * model.masks.b.array();
    const Vec avg = 0.5 * n2b * grid.v_weights;

    RteField out;
    out.rho = n1.cwiseProduct(model.masks.a) + model.masks.c + model.eps * avg;
    out.g = n2b.colwise() - avg;
    out.f = (model.eps * n2b).colwise() + (n1.cwiseProduct(model.masks.a) + model.masks.c);
    return out;
}

void write_model(std::ostream& os, const DeepONetModel& model, double t0) {
    model.validate();
    BinaryWriter out(os);
    out.magic(kModelMagic);
    out.u32(kFormatVersion);
    out.u32(std::uint32_t(model.p));
    out.u32(std::uint32_t(model.q));
    out.u32(static_cast<std::uint32_t>(model.boundary));
    out.u32(model.time_input ? 1 : 0);
    out.u32(model.velocity_input ? 1 : 0);
    out.f64(t0);
    out.u32(static_cast<std::uint32_t>(model.sensors.boundary));
    out.f64(model.sensors.spacing);
    out.u64(std::uint64_t(model.sensors.size()));
    for (const auto& z : model.sensors.points) {
        out.f64(z.x);
        out.f64(z.v);
    }
    out.vector(model.w);
    write_mlp(out, model.branch);
    write_mlp(out, model.trunk);
    if (!os) throw FormatError("write_model: stream error");
}

DeepONetModel read_model(std::istream& is, double* t0) {
    BinaryReader in(is);
    in.expect_magic(kModelMagic);
    if (in.u32() != kFormatVersion) throw FormatError("model checkpoint: unsupported version");
    DeepONetModel m;
    m.p = in.u32();
    m.q = in.u32();
    const auto mode = in.u32();
    const auto time_flag = in.u32();
    const auto vel_flag = in.u32();
    if (mode > 2 || time_flag > 1 || vel_flag > 1 || m.p == 0 || m.q == 0)
        throw FormatError("model checkpoint: corrupt header");
    m.boundary = static_cast<BoundaryMode>(mode);
    m.time_input = time_flag == 1;
    m.velocity_input = vel_flag == 1;
    const double t0_value = in.f64();
    if (t0) *t0 = t0_value;
    const auto tag = in.u32();
    if (tag > 2) throw FormatError("model checkpoint: unknown boundary tag");
    m.sensors.boundary = static_cast<BoundaryTag>(tag);
    m.sensors.spacing = in.f64();
    const auto n = in.u64();
    if (n > (1ULL << 28)) throw FormatError("model checkpoint: implausible sensor count");
    m.sensors.points.resize(n);
    for (auto& z : m.sensors.points) {
        z.x = in.f64();
        z.v = in.f64();
    }
    m.w = in.vector(m.q);
    m.branch = read_mlp(in);
    m.trunk = read_mlp(in);
    try {
        m.validate();
    } catch (const ShapeError& e) {
        throw FormatError(std::string("model checkpoint: ") + e.what());
    }
    return m;
}

void save_model(const std::string& path, const DeepONetModel& model, double t0) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open " + path + " for writing");
    write_model(os, model, t0);
}

DeepONetModel load_model(const std::string& path, double* t0) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open " + path);
    return read_model(is, t0);
}

} // namespace tlnet
