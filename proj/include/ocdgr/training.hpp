#pragma once

#include <cstddef>
#include <numeric>
#include <utility>
#include <vector>

#include "ocdgr/binary_batch.hpp"
#include "ocdgr/hyperparameters.hpp"
#include "ocdgr/rbm.hpp"

namespace ocdgr
{

/// Summed (not averaged) sufficient statistics of a batch:
/// sum_n h_n v_n', sum_n v_n, sum_n h_n.
template <typename Scalar = double>
struct GradientStatistics
{
    Matrix<Scalar> weight_stat;
    Vector<Scalar> visible_stat;
    Vector<Scalar> hidden_stat;

    GradientStatistics operator-(const GradientStatistics& rhs) const
    {
        return {weight_stat - rhs.weight_stat, visible_stat - rhs.visible_stat,
                hidden_stat - rhs.hidden_stat};
    }
};

/// Momentum buffer carried between updates (and between update procedures).
template <typename Scalar = double>
struct UpdateState
{
    RbmParameters<Scalar> delta;
    std::size_t epoch_index = 0;

    UpdateState() = default;
    UpdateState(std::size_t n_visible, std::size_t n_hidden) : delta(n_visible, n_hidden) {}

    friend bool operator==(const UpdateState& x, const UpdateState& y)
    {
        return x.delta == y.delta && x.epoch_index == y.epoch_index;
    }
};

template <typename Scalar, typename DV, typename DH>
GradientStatistics<Scalar> batch_statistics(const Eigen::MatrixBase<DV>& visible,
                                            const Eigen::MatrixBase<DH>& hidden)
{
    return {hidden.transpose() * visible, visible.colwise().sum().transpose(),
            hidden.colwise().sum().transpose()};
}

template <typename Scalar>
struct PositivePhase
{
    GradientStatistics<Scalar> stats;
    Matrix<Scalar> hidden_probs;
};

/// Data-side statistics. Hidden activations enter as probabilities.
template <typename Scalar, typename DV>
PositivePhase<Scalar> positive_statistics(const RbmParameters<Scalar>& params,
                                          const Eigen::MatrixBase<DV>& visible)
{
    if (visible.rows() == 0)
        throw EmptyBatchError("positive phase on an empty batch");
    const Matrix<Scalar> v = visible.template cast<Scalar>();
    Matrix<Scalar> h = hidden_probs_rows(params, v);
    auto stats = batch_statistics<Scalar>(v, h);
    return {std::move(stats), std::move(h)};
}

template <typename Scalar>
PositivePhase<Scalar> positive_statistics(const RbmParameters<Scalar>& params, const BinaryBatch& batch)
{
    return positive_statistics(params, batch.as_matrix<Scalar>());
}

template <typename Scalar>
struct NegativePhase
{
    GradientStatistics<Scalar> stats;
    Matrix<Scalar> visible;  ///< v^k, binary
};

/// k-step CD chain from the data: h^0 is sampled from `hidden_probs0`, then k
/// alternations v^i ~ P(v | h^{i-1}), P(h | v^i). Statistics use the binary
/// v^k and the probabilities P(h | v^k). Draw order: all of h^0 (row-major),
/// then v^1, h^1, ..., v^k; the final hidden layer is not sampled.
template <typename Scalar, typename DV, typename DH>
NegativePhase<Scalar> cd_negative_phase(const RbmParameters<Scalar>& params,
                                        const Eigen::MatrixBase<DV>& visible0,
                                        const Eigen::MatrixBase<DH>& hidden_probs0, std::size_t n_cd,
                                        Rng& rng)
{
    if (n_cd == 0)
        throw DomainError("n_cd must be >= 1");
    detail::require(visible0.rows() == hidden_probs0.rows(), "visible/hidden row count mismatch");
    detail::require(std::size_t(visible0.cols()) == params.n_visible(), "visible matrix width mismatch");
    detail::require(std::size_t(hidden_probs0.cols()) == params.n_hidden(), "hidden matrix width mismatch");

    Matrix<Scalar> h = sample_bernoulli(hidden_probs0.template cast<Scalar>(), rng);
    Matrix<Scalar> v;
    Matrix<Scalar> hp;
    for (std::size_t k = 1; k <= n_cd; ++k)
    {
        v = sample_bernoulli(visible_probs_rows(params, h), rng);
        hp = hidden_probs_rows(params, v);
        if (k < n_cd)
            h = sample_bernoulli(hp, rng);
    }
    auto stats = batch_statistics<Scalar>(v, hp);
    return {std::move(stats), std::move(v)};
}

/// delta <- rho * delta + alpha * ((plus - minus) / denom - xi * theta)
/// theta <- theta + delta
template <typename Scalar>
std::pair<RbmParameters<Scalar>, UpdateState<Scalar>>
apply_update(const RbmParameters<Scalar>& params, const UpdateState<Scalar>& state,
             const GradientStatistics<Scalar>& plus, const GradientStatistics<Scalar>& minus,
             std::size_t denom, double alpha, double rho, double xi, bool decay_biases = true)
{
    if (denom == 0)
        throw EmptyBatchError("update normalizer must be positive");
    detail::require(plus.weight_stat.rows() == params.weights.rows() &&
                        plus.weight_stat.cols() == params.weights.cols() &&
                        minus.weight_stat.rows() == params.weights.rows() &&
                        minus.weight_stat.cols() == params.weights.cols(),
                    "statistics do not match the parameter shape");

    const Scalar a = Scalar(alpha);
    const Scalar r = Scalar(rho);
    const Scalar decay = Scalar(xi);
    const Scalar bias_decay = decay_biases ? decay : Scalar(0);
    const Scalar inv_n = Scalar(1) / Scalar(denom);

    UpdateState<Scalar> next;
    next.epoch_index = state.epoch_index + 1;
    auto& d = next.delta;
    d.weights = r * state.delta.weights +
                a * ((plus.weight_stat - minus.weight_stat) * inv_n - decay * params.weights);
    d.visible_bias = r * state.delta.visible_bias +
                     a * ((plus.visible_stat - minus.visible_stat) * inv_n - bias_decay * params.visible_bias);
    d.hidden_bias = r * state.delta.hidden_bias +
                    a * ((plus.hidden_stat - minus.hidden_stat) * inv_n - bias_decay * params.hidden_bias);

    RbmParameters<Scalar> updated(params.weights + d.weights, params.visible_bias + d.visible_bias,
                                  params.hidden_bias + d.hidden_bias);
    return {std::move(updated), std::move(next)};
}

/// Momentum for a 1-based epoch counter: the warmup value during the first
/// `momentum_warmup_epochs` epochs, the regular value afterwards.
inline double effective_momentum(std::size_t epoch_index, const Hyperparameters& hyper)
{
    return epoch_index <= hyper.momentum_warmup_epochs ? hyper.momentum_warmup : hyper.momentum;
}

/// One CD-k update on `visible` (rows are training vectors). The same code
/// path serves offline training, generative replay and experience replay.
template <typename Scalar, typename DV>
void cd_step(RbmParameters<Scalar>& params, UpdateState<Scalar>& state, const Eigen::MatrixBase<DV>& visible,
             const Hyperparameters& hyper, double rho, Rng& rng)
{
    auto pos = positive_statistics(params, visible);
    auto neg = cd_negative_phase(params, visible, pos.hidden_probs, hyper.n_cd, rng);
    auto [next_params, next_state] =
        apply_update(params, state, pos.stats, neg.stats, std::size_t(visible.rows()), hyper.learning_rate,
                     rho, hyper.weight_decay, hyper.decay_biases);
    params = std::move(next_params);
    state = std::move(next_state);
}

/// Fisher-Yates permutation of 0..n-1.
inline std::vector<std::size_t> random_permutation(std::size_t n, Rng& rng)
{
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i)
        std::swap(idx[i - 1], idx[rng.uniform_index(i)]);
    return idx;
}

/// Standard offline CD: each epoch shuffles the dataset and sweeps over
/// minibatches of `batch_size` rows (the last one may be partial).
template <typename Scalar = double>
RbmParameters<Scalar> train_offline(RbmParameters<Scalar> params, const BinaryBatch& dataset,
                                    const Hyperparameters& hyper, Rng& rng)
{
    if (dataset.empty())
        throw EmptyBatchError("offline training on an empty dataset");
    detail::require(dataset.n_visible() == params.n_visible(), "dataset width does not match the model");

    const Matrix<Scalar> data = dataset.as_matrix<Scalar>();
    const std::size_t n = dataset.size();
    UpdateState<Scalar> state(params.n_visible(), params.n_hidden());
    Matrix<Scalar> minibatch;
    for (std::size_t epoch = 1; epoch <= hyper.n_epochs; ++epoch)
    {
        const double rho = effective_momentum(epoch, hyper);
        const auto order = random_permutation(n, rng);
        for (std::size_t start = 0; start < n; start += hyper.batch_size)
        {
            const std::size_t rows = std::min(hyper.batch_size, n - start);
            minibatch.resize(Eigen::Index(rows), data.cols());
            for (std::size_t r = 0; r < rows; ++r)
                minibatch.row(Eigen::Index(r)) = data.row(Eigen::Index(order[start + r]));
            cd_step(params, state, minibatch, hyper, rho, rng);
        }
    }
    return params;
}

}  // namespace ocdgr
