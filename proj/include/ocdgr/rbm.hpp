#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ocdgr/errors.hpp"
#include "ocdgr/random.hpp"

namespace ocdgr
{

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Binary RBM parameters: weights (n_hidden x n_visible), visible bias a,
/// hidden bias b. Energy E(v, h) = -a'v - b'h - h'Wv, in nats.
template <typename Scalar = double>
struct RbmParameters
{
    Matrix<Scalar> weights;
    Vector<Scalar> visible_bias;
    Vector<Scalar> hidden_bias;

    RbmParameters() = default;

    RbmParameters(std::size_t n_visible, std::size_t n_hidden)
        : weights(Matrix<Scalar>::Zero(Eigen::Index(n_hidden), Eigen::Index(n_visible))),
          visible_bias(Vector<Scalar>::Zero(Eigen::Index(n_visible))),
          hidden_bias(Vector<Scalar>::Zero(Eigen::Index(n_hidden)))
    {}

    RbmParameters(Matrix<Scalar> w, Vector<Scalar> a, Vector<Scalar> b)
        : weights(std::move(w)), visible_bias(std::move(a)), hidden_bias(std::move(b))
    {
        validate();
    }

    std::size_t n_visible() const noexcept { return std::size_t(weights.cols()); }
    std::size_t n_hidden() const noexcept { return std::size_t(weights.rows()); }

    /// Number of real parameters (weights + both biases).
    std::size_t scalar_count() const noexcept
    {
        return std::size_t(weights.size() + visible_bias.size() + hidden_bias.size());
    }

    void validate() const
    {
        if (visible_bias.size() != weights.cols() || hidden_bias.size() != weights.rows())
            throw DimensionError("bias lengths do not match the weight matrix");
        if (!weights.allFinite() || !visible_bias.allFinite() || !hidden_bias.allFinite())
            throw DomainError("RBM parameters must be finite");
    }

    friend bool operator==(const RbmParameters& x, const RbmParameters& y)
    {
        return x.weights.rows() == y.weights.rows() && x.weights.cols() == y.weights.cols() &&
               x.weights == y.weights && x.visible_bias == y.visible_bias &&
               x.hidden_bias == y.hidden_bias;
    }

    template <typename Other>
    RbmParameters<Other> cast() const
    {
        return {weights.template cast<Other>(), visible_bias.template cast<Other>(),
                hidden_bias.template cast<Other>()};
    }
};

// --- scalar nonlinearities ---------------------------------------------------

/// log(1 + exp(x)) without overflow: max(x, 0) + log1p(exp(-|x|)).
template <typename Scalar>
Scalar softplus(Scalar x)
{
    using std::abs, std::exp, std::log1p;
    return std::max(x, Scalar(0)) + log1p(exp(-abs(x)));
}

/// Logistic sigmoid, clamped into the open interval (0, 1).
template <typename Scalar>
Scalar sigmoid(Scalar x)
{
    using std::exp;
    Scalar s;
    if (x >= Scalar(0))
        s = Scalar(1) / (Scalar(1) + exp(-x));
    else
    {
        const Scalar e = exp(x);
        s = e / (Scalar(1) + e);
    }
    constexpr Scalar lo = std::numeric_limits<Scalar>::min();
    constexpr Scalar hi = Scalar(1) - std::numeric_limits<Scalar>::epsilon() / Scalar(2);
    return std::clamp(s, lo, hi);
}

namespace detail
{

inline void require(bool ok, const char* what)
{
    if (!ok)
        throw DimensionError(what);
}

template <typename Derived>
void require_probabilities(const Eigen::DenseBase<Derived>& p)
{
    for (Eigen::Index i = 0; i < p.rows(); ++i)
        for (Eigen::Index j = 0; j < p.cols(); ++j)
        {
            const auto x = p(i, j);
            if (!(x >= 0 && x <= 1))
                throw DomainError("probability outside [0, 1]");
        }
}

}  // namespace detail

// --- parameters ----------------------------------------------------------------

/// Every entry of W, a, b drawn i.i.d. from N(0, stddev^2). Draw order: W in
/// row-major order, then a, then b.
template <typename Scalar = double>
RbmParameters<Scalar> init_params(std::size_t n_visible, std::size_t n_hidden, double stddev, Rng& rng)
{
    if (n_visible == 0 || n_hidden == 0)
        throw DimensionError("n_visible and n_hidden must be positive");
    if (!(stddev >= 0.0))
        throw DomainError("initialization stddev must be nonnegative");

    RbmParameters<Scalar> params(n_visible, n_hidden);
    auto draw = [&] { return Scalar(rng.normal(0.0, stddev)); };
    for (Eigen::Index j = 0; j < params.weights.rows(); ++j)
        for (Eigen::Index i = 0; i < params.weights.cols(); ++i)
            params.weights(j, i) = draw();
    for (Eigen::Index i = 0; i < params.visible_bias.size(); ++i)
        params.visible_bias(i) = draw();
    for (Eigen::Index j = 0; j < params.hidden_bias.size(); ++j)
        params.hidden_bias(j) = draw();
    return params;
}

// --- energies ------------------------------------------------------------------

template <typename Scalar, typename DV, typename DH>
Scalar energy(const RbmParameters<Scalar>& params, const Eigen::MatrixBase<DV>& v,
              const Eigen::MatrixBase<DH>& h)
{
    detail::require(std::size_t(v.size()) == params.n_visible(), "visible vector length mismatch");
    detail::require(std::size_t(h.size()) == params.n_hidden(), "hidden vector length mismatch");
    const Vector<Scalar> vv = v.template cast<Scalar>();
    const Vector<Scalar> hh = h.template cast<Scalar>();
    return -params.visible_bias.dot(vv) - params.hidden_bias.dot(hh) - hh.dot(params.weights * vv);
}

/// F(v) = -a'v - sum_j softplus(b_j + W_j: v).
template <typename Scalar, typename DV>
Scalar free_energy(const RbmParameters<Scalar>& params, const Eigen::MatrixBase<DV>& v)
{
    detail::require(std::size_t(v.size()) == params.n_visible(), "visible vector length mismatch");
    const Vector<Scalar> vv = v.template cast<Scalar>();
    const Vector<Scalar> act = params.weights * vv + params.hidden_bias;
    return -params.visible_bias.dot(vv) - act.unaryExpr([](Scalar x) { return softplus(x); }).sum();
}

/// Free energy of every row of `visible` (rows are visible vectors).
template <typename Scalar, typename DV>
Vector<Scalar> free_energy_rows(const RbmParameters<Scalar>& params, const Eigen::MatrixBase<DV>& visible)
{
    detail::require(std::size_t(visible.cols()) == params.n_visible(), "visible matrix width mismatch");
    const Matrix<Scalar> v = visible.template cast<Scalar>();
    Matrix<Scalar> act = v * params.weights.transpose();
    act.rowwise() += params.hidden_bias.transpose();
    return -(v * params.visible_bias) -
           act.unaryExpr([](Scalar x) { return softplus(x); }).rowwise().sum();
}

/// Free energy of hidden vectors with the visible layer summed out:
/// F_h(h) = -b'h - sum_i softplus(a_i + (W'h)_i). Rows are hidden vectors.
template <typename Scalar, typename DH>
Vector<Scalar> hidden_free_energy_rows(const RbmParameters<Scalar>& params,
                                       const Eigen::MatrixBase<DH>& hidden)
{
    detail::require(std::size_t(hidden.cols()) == params.n_hidden(), "hidden matrix width mismatch");
    const Matrix<Scalar> h = hidden.template cast<Scalar>();
    Matrix<Scalar> act = h * params.weights;
    act.rowwise() += params.visible_bias.transpose();
    return -(h * params.hidden_bias) -
           act.unaryExpr([](Scalar x) { return softplus(x); }).rowwise().sum();
}

// --- conditionals --------------------------------------------------------------

/// P(h = 1 | v) = sigmoid(b + W v). `v` may be real-valued in [0, 1].
template <typename Scalar, typename DV>
Vector<Scalar> hidden_probs(const RbmParameters<Scalar>& params, const Eigen::MatrixBase<DV>& v)
{
    detail::require(std::size_t(v.size()) == params.n_visible(), "visible vector length mismatch");
    const Vector<Scalar> act = params.weights * v.template cast<Scalar>() + params.hidden_bias;
    return act.unaryExpr([](Scalar x) { return sigmoid(x); });
}

/// P(v = 1 | h) = sigmoid(a + W' h). `h` may be real-valued in [0, 1].
template <typename Scalar, typename DH>
Vector<Scalar> visible_probs(const RbmParameters<Scalar>& params, const Eigen::MatrixBase<DH>& h)
{
    detail::require(std::size_t(h.size()) == params.n_hidden(), "hidden vector length mismatch");
    const Vector<Scalar> act =
        params.weights.transpose() * h.template cast<Scalar>() + params.visible_bias;
    return act.unaryExpr([](Scalar x) { return sigmoid(x); });
}

/// Row-wise hidden_probs: rows of `visible` are visible vectors.
template <typename Scalar, typename DV>
Matrix<Scalar> hidden_probs_rows(const RbmParameters<Scalar>& params, const Eigen::MatrixBase<DV>& visible)
{
    detail::require(std::size_t(visible.cols()) == params.n_visible(), "visible matrix width mismatch");
    Matrix<Scalar> act = visible.template cast<Scalar>() * params.weights.transpose();
    act.rowwise() += params.hidden_bias.transpose();
    return act.unaryExpr([](Scalar x) { return sigmoid(x); });
}

/// Row-wise visible_probs: rows of `hidden` are hidden vectors.
template <typename Scalar, typename DH>
Matrix<Scalar> visible_probs_rows(const RbmParameters<Scalar>& params, const Eigen::MatrixBase<DH>& hidden)
{
    detail::require(std::size_t(hidden.cols()) == params.n_hidden(), "hidden matrix width mismatch");
    Matrix<Scalar> act = hidden.template cast<Scalar>() * params.weights;
    act.rowwise() += params.visible_bias.transpose();
    return act.unaryExpr([](Scalar x) { return sigmoid(x); });
}

// --- sampling ------------------------------------------------------------------

/// Independent Bernoulli draws, one uniform per entry in storage order of a
/// column vector (or row-major order for matrices).
template <typename Derived>
Matrix<typename Derived::Scalar> sample_bernoulli(const Eigen::MatrixBase<Derived>& probs, Rng& rng)
{
    using Scalar = typename Derived::Scalar;
    detail::require_probabilities(probs);
    Matrix<Scalar> out(probs.rows(), probs.cols());
    for (Eigen::Index i = 0; i < probs.rows(); ++i)
        for (Eigen::Index j = 0; j < probs.cols(); ++j)
            out(i, j) = rng.uniform() < double(probs(i, j)) ? Scalar(1) : Scalar(0);
    return out;
}

/// Row-wise Bernoulli draws where row i consumes uniforms from streams[i] only.
template <typename Derived>
Matrix<typename Derived::Scalar> sample_bernoulli_rows(const Eigen::MatrixBase<Derived>& probs,
                                                       std::vector<Rng>& streams)
{
    using Scalar = typename Derived::Scalar;
    detail::require(std::size_t(probs.rows()) == streams.size(), "one stream per row required");
    detail::require_probabilities(probs);
    Matrix<Scalar> out(probs.rows(), probs.cols());
    for (Eigen::Index i = 0; i < probs.rows(); ++i)
    {
        Rng& rng = streams[std::size_t(i)];
        for (Eigen::Index j = 0; j < probs.cols(); ++j)
            out(i, j) = rng.uniform() < double(probs(i, j)) ? Scalar(1) : Scalar(0);
    }
    return out;
}

template <typename Scalar>
struct GibbsSample
{
    Vector<Scalar> visible;
    Vector<Scalar> hidden;
};

/// Gibbs chain started from a (possibly real-valued) hidden state:
///   v ~ P(v | h), h ~ P(h | v), repeated n_steps times.
/// Only the first visible update sees the continuous `h_init`; every later
/// state is a binary sample. Returns the final binary (v, h).
template <typename Scalar, typename DH>
GibbsSample<Scalar> gibbs_from_hidden(const RbmParameters<Scalar>& params,
                                      const Eigen::MatrixBase<DH>& h_init, std::size_t n_steps, Rng& rng)
{
    detail::require(std::size_t(h_init.size()) == params.n_hidden(), "hidden vector length mismatch");
    if (n_steps == 0)
        throw DomainError("gibbs_from_hidden needs at least one step");
    detail::require_probabilities(h_init);

    GibbsSample<Scalar> state;
    state.hidden = h_init.template cast<Scalar>();
    for (std::size_t step = 0; step < n_steps; ++step)
    {
        state.visible = sample_bernoulli(visible_probs(params, state.hidden), rng);
        state.hidden = sample_bernoulli(hidden_probs(params, state.visible), rng);
    }
    return state;
}

}  // namespace ocdgr
