#ifndef TLNET_MLP_HPP
#define TLNET_MLP_HPP

// Dense multilayer perceptron with the two-encoder "modified" architecture:
//
//   U = s(Wu x + bu),  V = s(Wv x + bv),  H1 = s(W1 x + b1)
//   Z_k = s(W_k H_k + b_k),  H_{k+1} = (1 - Z_k) .* U + Z_k .* V
//   y = W_L H_L + b_L
//
// Inputs are batched column-wise: X is [in x batch]. Without encoders the
// network degrades to a plain MLP (H_{k+1} = s(W_k H_k + b_k)).

#include "tlnet/common.hpp"

#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace tlnet {

enum class Activation : std::uint32_t { Tanh = 0, Sine = 1 };

template <typename Scalar>
struct DenseLayer {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    Matrix weight; // [out x in]
    Vector bias;   // [out]

    Index in_dim() const { return weight.cols(); }
    Index out_dim() const { return weight.rows(); }
    Index size() const { return weight.size() + bias.size(); }
    bool empty() const { return weight.size() == 0; }
};

template <typename Scalar>
struct MlpParams {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    std::vector<DenseLayer<Scalar>> layers;
    DenseLayer<Scalar> encoder_u;
    DenseLayer<Scalar> encoder_v;
    Activation activation = Activation::Tanh;

    bool modified() const { return !encoder_u.empty(); }
    Index input_dim() const { return layers.front().in_dim(); }
    Index output_dim() const { return layers.back().out_dim(); }

    Index parameter_count() const {
        Index n = encoder_u.size() + encoder_v.size();
        for (const auto& l : layers) n += l.size();
        return n;
    }

    /// Throws ShapeError when layer dimensions do not compose or an entry
    /// is non-finite.
    void validate() const {
        require_shape(!layers.empty(), "mlp: no layers");
        for (std::size_t k = 0; k < layers.size(); ++k) {
            const auto& l = layers[k];
            require_shape(l.bias.size() == l.out_dim(),
                          "mlp: bias length mismatch in layer " + std::to_string(k));
            if (k > 0)
                require_shape(l.in_dim() == layers[k - 1].out_dim(),
                              "mlp: layer " + std::to_string(k) + " does not compose");
            if (!l.weight.allFinite() || !l.bias.allFinite())
                throw ShapeError("mlp: non-finite entry in layer " + std::to_string(k));
        }
        if (!modified()) {
            require_shape(encoder_v.empty(), "mlp: encoder_v without encoder_u");
            return;
        }
        require_shape(layers.size() >= 2, "mlp: modified architecture needs a hidden layer");
        const Index width = layers.front().out_dim();
        for (const auto* e : {&encoder_u, &encoder_v}) {
            require_shape(e->in_dim() == input_dim(), "mlp: encoder input width");
            require_shape(e->out_dim() == width, "mlp: encoder output width != hidden width");
            require_shape(e->bias.size() == width, "mlp: encoder bias length");
            if (!e->weight.allFinite() || !e->bias.allFinite())
                throw ShapeError("mlp: non-finite encoder entry");
        }
        for (std::size_t k = 1; k + 1 < layers.size(); ++k)
            require_shape(layers[k].out_dim() == width, "mlp: hidden widths differ");
    }

    /// Zero-valued parameters with identical shapes.
    MlpParams zeros_like() const {
        MlpParams z = *this;
        auto clear = [](DenseLayer<Scalar>& l) {
            l.weight.setZero();
            l.bias.setZero();
        };
        for (auto& l : z.layers) clear(l);
        clear(z.encoder_u);
        clear(z.encoder_v);
        return z;
    }
};

namespace detail {

template <typename Derived>
auto activate(const Eigen::MatrixBase<Derived>& a, Activation act) {
    using Scalar = typename Derived::Scalar;
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    Matrix out = act == Activation::Tanh ? Matrix(a.array().tanh().matrix())
                                         : Matrix(a.array().sin().matrix());
    return out;
}

/// Derivative of the activation given pre-activation a and value s = act(a).
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>
activation_slope(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& a,
                 const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& s, Activation act) {
    if (act == Activation::Tanh) return (Scalar(1) - s.array().square()).matrix();
    return a.array().cos().matrix();
}

template <typename Matrix>
void check_finite(const Matrix& m, std::size_t layer) {
    if (!m.allFinite())
        throw NumericError("mlp: non-finite activation at layer " + std::to_string(layer));
}

} // namespace detail

/// Intermediate values of a batched forward pass, kept for the backward pass.
template <typename Scalar>
struct MlpTape {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    Matrix input;
    Matrix pre_u, u, pre_v, v;
    std::vector<Matrix> pre;    // pre-activations of hidden layers
    std::vector<Matrix> gate;   // s(pre) for each hidden layer
    std::vector<Matrix> hidden; // H_k fed into layer k (hidden[0] = input)
    Matrix output;
};

/// Batched forward pass recording a tape. X is [in x batch].
template <typename Scalar>
MlpTape<Scalar> mlp_forward_tape(const MlpParams<Scalar>& params,
                                 const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& x) {
    using Matrix = typename MlpParams<Scalar>::Matrix;
    require_shape(x.rows() == params.input_dim(),
                  "mlp_forward: input has " + std::to_string(x.rows()) + " rows, expected " +
                      std::to_string(params.input_dim()));
    const auto act = params.activation;
    const std::size_t n_layers = params.layers.size();

    MlpTape<Scalar> tape;
    tape.input = x;
    if (params.modified()) {
        tape.pre_u = (params.encoder_u.weight * x).colwise() + params.encoder_u.bias;
        tape.u = detail::activate(tape.pre_u, act);
        tape.pre_v = (params.encoder_v.weight * x).colwise() + params.encoder_v.bias;
        tape.v = detail::activate(tape.pre_v, act);
        detail::check_finite(tape.u, 0);
        detail::check_finite(tape.v, 0);
    }

    tape.hidden.push_back(x);
    for (std::size_t k = 0; k + 1 < n_layers; ++k) {
        const auto& layer = params.layers[k];
        Matrix a = (layer.weight * tape.hidden.back()).colwise() + layer.bias;
        Matrix s = detail::activate(a, act);
        detail::check_finite(s, k);
        Matrix h;
        if (params.modified() && k > 0)
            h = (tape.u.array() + s.array() * (tape.v - tape.u).array()).matrix();
        else
            h = s;
        tape.pre.push_back(std::move(a));
        tape.gate.push_back(std::move(s));
        tape.hidden.push_back(std::move(h));
    }
    const auto& last = params.layers.back();
    tape.output = (last.weight * tape.hidden.back()).colwise() + last.bias;
    detail::check_finite(tape.output, n_layers - 1);
    return tape;
}

/// Batched forward pass. X is [in x batch]; returns [out x batch].
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>
mlp_forward(const MlpParams<Scalar>& params,
            const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& x) {
    return mlp_forward_tape(params, x).output;
}

/// Single input vector.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1>
mlp_forward(const MlpParams<Scalar>& params, const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& x) {
    using Matrix = typename MlpParams<Scalar>::Matrix;
    return mlp_forward_tape(params, Matrix(x)).output.col(0);
}

/// Reverse-mode pass. Given dL/dY for the taped batch, accumulates the
/// parameter gradient into `grad` (same shapes as params). When `grad_input`
/// is non-null it receives dL/dX.
template <typename Scalar>
void mlp_backward(const MlpParams<Scalar>& params, const MlpTape<Scalar>& tape,
                  const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& grad_output,
                  MlpParams<Scalar>& grad,
                  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>* grad_input = nullptr) {
    using Matrix = typename MlpParams<Scalar>::Matrix;
    const auto act = params.activation;
    const std::size_t n_layers = params.layers.size();
    require_shape(grad_output.rows() == params.output_dim() &&
                      grad_output.cols() == tape.output.cols(),
                  "mlp_backward: output gradient shape");

    auto& last_grad = grad.layers.back();
    last_grad.weight.noalias() += grad_output * tape.hidden.back().transpose();
    last_grad.bias += grad_output.rowwise().sum();
    Matrix d_hidden = params.layers.back().weight.transpose() * grad_output;

    Matrix d_u, d_v;
    if (params.modified()) {
        d_u = Matrix::Zero(tape.u.rows(), tape.u.cols());
        d_v = Matrix::Zero(tape.v.rows(), tape.v.cols());
    }
    Matrix d_input = Matrix::Zero(tape.input.rows(), tape.input.cols());

    for (std::size_t k = n_layers - 1; k-- > 0;) {
        const Matrix& s = tape.gate[k];
        Matrix d_s;
        if (params.modified() && k > 0) {
            d_s = (d_hidden.array() * (tape.v - tape.u).array()).matrix();
            d_u.array() += d_hidden.array() * (Scalar(1) - s.array());
            d_v.array() += d_hidden.array() * s.array();
        } else {
            d_s = d_hidden;
        }
        Matrix d_pre = (d_s.array() * detail::activation_slope(tape.pre[k], s, act).array()).matrix();
        grad.layers[k].weight.noalias() += d_pre * tape.hidden[k].transpose();
        grad.layers[k].bias += d_pre.rowwise().sum();
        if (k > 0)
            d_hidden = params.layers[k].weight.transpose() * d_pre;
        else if (grad_input)
            d_input.noalias() += params.layers[0].weight.transpose() * d_pre;
    }

    if (params.modified()) {
        Matrix d_pre_u =
            (d_u.array() * detail::activation_slope(tape.pre_u, tape.u, act).array()).matrix();
        Matrix d_pre_v =
            (d_v.array() * detail::activation_slope(tape.pre_v, tape.v, act).array()).matrix();
        grad.encoder_u.weight.noalias() += d_pre_u * tape.input.transpose();
        grad.encoder_u.bias += d_pre_u.rowwise().sum();
        grad.encoder_v.weight.noalias() += d_pre_v * tape.input.transpose();
        grad.encoder_v.bias += d_pre_v.rowwise().sum();
        if (grad_input) {
            d_input.noalias() += params.encoder_u.weight.transpose() * d_pre_u;
            d_input.noalias() += params.encoder_v.weight.transpose() * d_pre_v;
        }
    }
    if (grad_input) *grad_input = std::move(d_input);
}

/// Glorot-uniform weights, zero biases. `depth` counts affine layers
/// (depth 1 is a single affine map with no hidden activations).
template <typename Scalar = double>
MlpParams<Scalar> make_mlp(Index in_dim, Index width, Index depth, Index out_dim, Activation act,
                           bool modified, std::mt19937_64& rng) {
    require_shape(in_dim > 0 && out_dim > 0 && depth >= 1, "make_mlp: bad dimensions");
    require_shape(depth == 1 || width > 0, "make_mlp: hidden width must be positive");
    auto glorot = [&rng](Index out, Index in) {
        DenseLayer<Scalar> l;
        const double limit = std::sqrt(6.0 / double(in + out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        l.weight.resize(out, in);
        for (Index j = 0; j < in; ++j)
            for (Index i = 0; i < out; ++i) l.weight(i, j) = Scalar(dist(rng));
        l.bias = DenseLayer<Scalar>::Vector::Zero(out);
        return l;
    };
    MlpParams<Scalar> p;
    p.activation = act;
    if (depth == 1) {
        p.layers.push_back(glorot(out_dim, in_dim));
        return p;
    }
    p.layers.push_back(glorot(width, in_dim));
    for (Index k = 1; k + 1 < depth; ++k) p.layers.push_back(glorot(width, width));
    p.layers.push_back(glorot(out_dim, width));
    if (modified) {
        p.encoder_u = glorot(width, in_dim);
        p.encoder_v = glorot(width, in_dim);
    }
    return p;
}

/// Visits every parameter block in declaration order: layers (weight, bias),
/// then encoder_u, then encoder_v.
template <typename Params, typename F>
void for_each_block(Params& params, F&& f) {
    for (auto& l : params.layers) {
        f(l.weight);
        f(l.bias);
    }
    f(params.encoder_u.weight);
    f(params.encoder_u.bias);
    f(params.encoder_v.weight);
    f(params.encoder_v.bias);
}

template <typename Scalar>
void flatten_into(const MlpParams<Scalar>& params, Eigen::Ref<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> out) {
    require_shape(out.size() == params.parameter_count(), "flatten: length mismatch");
    Index offset = 0;
    for_each_block(params, [&](const auto& block) {
        out.segment(offset, block.size()) =
            Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>(block.data(), block.size());
        offset += block.size();
    });
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> flatten(const MlpParams<Scalar>& params) {
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(params.parameter_count());
    flatten_into<Scalar>(params, out);
    return out;
}

template <typename Scalar>
void unflatten_into(const Eigen::Ref<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>& flat,
                    MlpParams<Scalar>& params) {
    require_shape(flat.size() == params.parameter_count(), "unflatten: length mismatch");
    Index offset = 0;
    for_each_block(params, [&](auto& block) {
        Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>(block.data(), block.size()) =
            flat.segment(offset, block.size());
        offset += block.size();
    });
}

using MlpParamsd = MlpParams<double>;
using MlpTaped = MlpTape<double>;

} // namespace tlnet

#endif // TLNET_MLP_HPP
