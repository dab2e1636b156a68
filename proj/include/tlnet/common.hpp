#ifndef TLNET_COMMON_HPP
#define TLNET_COMMON_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace tlnet {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Dimension mismatch between two operands.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// A non-finite value appeared during a computation.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Implicit stepper did not converge or a linear solve failed.
struct SolverError : std::runtime_error {
    SolverError(const std::string& what, double final_residual = 0.0)
        : std::runtime_error(what), residual(final_residual) {}
    double residual;
};

/// Covariance matrix could not be factorized even after jitter escalation.
struct DegenerateKernelError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Least-squares basis has no singular value above the cutoff.
struct DegenerateBasisError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Levenberg-Marquardt could not reduce the cost any further.
struct StagnationError : std::runtime_error {
    StagnationError(const std::string& what, double final_cost)
        : std::runtime_error(what), cost(final_cost) {}
    double cost;
};

/// Relative error with a zero reference.
struct UndefinedError : std::domain_error {
    using std::domain_error::domain_error;
};

/// Malformed binary or JSON file.
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void require_shape(bool ok, const std::string& what) {
    if (!ok) throw ShapeError(what);
}

/// splitmix64 finalizer; used to derive independent sub-seeds.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace tlnet

#endif // TLNET_COMMON_HPP
