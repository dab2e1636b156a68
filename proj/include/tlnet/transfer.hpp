#ifndef TLNET_TRANSFER_HPP
#define TLNET_TRANSFER_HPP

// Last-layer refits. With theta and xi frozen the network output is
// g = Phi(f) w, so one implicit step reduces to a small least-squares
// problem in w at N_c subsampled sensors:
//
//   r(w)_i = (g - a dt L(g) - rhs(f))(x_i),  g = sum_j w_j phi_j
//
// Affine in w for linear L (closed form), otherwise solved by
// Levenberg-Marquardt from the current w.

#include "tlnet/common.hpp"
#include "tlnet/operator_net.hpp"
#include "tlnet/pde.hpp"

#include <vector>

namespace tlnet {

enum class TLMethod : std::uint32_t { LinearLstsq = 0, NonlinearLM = 1 };
enum class SubsampleMode : std::uint32_t { Stride = 0, Random = 1 };

std::string to_string(TLMethod m);
TLMethod tl_method_from_string(const std::string& s);

struct TLConfig {
    Index n_c = 32;
    TLMethod method = TLMethod::LinearLstsq;
    double rcond = 1e-6;
    double ftol = 1e-5;
    double xtol = 1e-5;
    int lm_max_iters = 200;
    SubsampleMode subsample = SubsampleMode::Stride;
    std::uint64_t seed = 0;

    void validate() const;
};

/// N_c of N_p sensor indices, ascending. Stride mode takes floor(i N_p / N_c)
/// (every second index for 64 -> 32); random mode draws without replacement.
std::vector<Index> subsample_sensors(Index n_p, Index n_c, SubsampleMode mode = SubsampleMode::Stride,
                                     std::uint64_t seed = 0);

struct LstsqResult {
    Vec x;
    Index rank = 0;
};

/// Minimum-norm least squares through the SVD, dropping singular values
/// below rcond * sigma_max. Throws DegenerateBasisError when none survive.
LstsqResult lstsq(const Mat& a, const Vec& b, double rcond);

struct TLResult {
    Vec w;
    double cost = 0.0; // 0.5 ||r(w)||^2 at the returned w
    int iterations = 0;
    Index rank = 0;
};

/// Per-model cache of trunk features at the subsampled rows and their
/// stencil neighbors, so every refit costs O(N_c p q) plus one branch pass.
class TransferLearner {
public:
    TransferLearner(DeepONetModel model, Equation eq, PropagatorConfig cfg, TLConfig tl);

    /// Least-squares system A w = b of the affine case at the subsampled rows.
    std::pair<Mat, Vec> assemble_linear(const Vec& f) const;
    /// Same, from a precomputed coefficient matrix h (p x q).
    std::pair<Mat, Vec> assemble_linear(const Mat& h, const Vec& f) const;

    /// Residual r(w) and Jacobian dr/dw at the subsampled rows.
    std::pair<Vec, Mat> residual_and_jacobian(const Mat& h, const Vec& f, const Vec& w) const;

    TLResult update_linear(const Vec& f) const;
    TLResult update_nonlinear(const Vec& f, const Vec& w_start) const;
    /// Dispatches on the configured method; nonlinear starts from the model's w.
    TLResult update(const Vec& f) const;
    TLResult update(const Vec& f, const Vec& w_start) const;

    /// Model output at every sensor with last-layer weights w.
    Vec predict(const Vec& f, const Vec& w) const;

    const std::vector<Index>& rows() const { return rows_; }
    const DeepONetModel& model() const { return model_; }
    const Equation& equation() const { return eq_; }
    const TLConfig& config() const { return tl_; }

private:
    /// phi_j at the needed rows, scattered into an [N x q] matrix.
    Mat basis_rows(const Mat& h) const;
    Vec rhs_rows(const Vec& f) const;

    DeepONetModel model_;
    Equation eq_;
    PropagatorConfig cfg_;
    TLConfig tl_;
    std::vector<Index> rows_;   // subsampled sensors
    std::vector<Index> needed_; // rows plus stencil neighbors
    Mat trunk_needed_;          // masked trunk features [p x needed]
    Mat trunk_all_;             // masked trunk features [p x N]
};

Vec tl_update_linear(const DeepONetModel& model, const Equation& eq, const PropagatorConfig& cfg,
                     const Vec& f, const TLConfig& tl);
Vec tl_update_nonlinear(const DeepONetModel& model, const Equation& eq,
                        const PropagatorConfig& cfg, const Vec& f, const TLConfig& tl);

} // namespace tlnet

#endif // TLNET_TRANSFER_HPP
