#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <numeric>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "ocdgr/binary_batch.hpp"
#include "ocdgr/hyperparameters.hpp"
#include "ocdgr/rbm.hpp"
#include "ocdgr/training.hpp"

namespace ocdgr
{

enum class TrainerKind
{
    generative_replay,  ///< OCD with generative replay ("ocdgr")
    replay_limited,     ///< experience replay, memory-limited ("er_ml")
    replay_unlimited,   ///< experience replay, unbounded memory ("er_im")
};

inline std::string_view to_string(TrainerKind kind)
{
    switch (kind)
    {
    case TrainerKind::generative_replay: return "ocdgr";
    case TrainerKind::replay_limited: return "er_ml";
    case TrainerKind::replay_unlimited: return "er_im";
    }
    return "unknown";
}

inline TrainerKind parse_trainer_kind(std::string_view name)
{
    if (name == "ocdgr")
        return TrainerKind::generative_replay;
    if (name == "er_ml")
        return TrainerKind::replay_limited;
    if (name == "er_im")
        return TrainerKind::replay_unlimited;
    throw ConfigError("unknown trainer '" + std::string(name) + "' (expected ocdgr, er_ml or er_im)");
}

/// Memory rows for the limited replay baseline such that the stored points
/// hold as many scalars as the RBM parameters:
///   floor((n_v * n_h + n_v + n_h) / n_v).
/// With `bit_packed`, each stored point costs n_v bits instead of n_v scalars
/// (64-bit), giving 64x the capacity.
inline std::size_t er_ml_capacity(std::size_t n_visible, std::size_t n_hidden, bool bit_packed = false)
{
    if (n_visible == 0 || n_hidden == 0)
        throw DimensionError("n_visible and n_hidden must be positive");
    const std::size_t params = n_visible * n_hidden + n_visible + n_hidden;
    const std::size_t per_point = bit_packed ? (n_visible + 63) / 64 : n_visible;
    return params / per_point;
}

/// FIFO store of past observations. Unbounded when no capacity is given.
class ReplayMemory
{
public:
    ReplayMemory() = default;
    explicit ReplayMemory(std::optional<std::size_t> capacity) : capacity_(capacity)
    {
        if (capacity_ && *capacity_ == 0)
            throw ConfigError("replay memory capacity must be positive");
    }

    void insert(std::span<const std::uint8_t> row)
    {
        if (!buffer_.empty() && row.size() != buffer_.front().size())
            throw DimensionError("replay row width mismatch");
        buffer_.emplace_back(row.begin(), row.end());
        if (capacity_ && buffer_.size() > *capacity_)
            buffer_.pop_front();
    }

    void insert(const BinaryMatrix& rows, std::size_t count)
    {
        for (std::size_t r = 0; r < count; ++r)
            insert(std::span<const std::uint8_t>(rows.row(Eigen::Index(r)).data(), std::size_t(rows.cols())));
    }

    /// min(n, size()) distinct rows chosen uniformly at random (partial
    /// Fisher-Yates over the row indices).
    std::vector<std::size_t> sample_indices(std::size_t n, Rng& rng) const
    {
        const std::size_t m = buffer_.size();
        const std::size_t take = std::min(n, m);
        std::vector<std::size_t> idx(m);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        for (std::size_t i = 0; i < take; ++i)
            std::swap(idx[i], idx[i + rng.uniform_index(m - i)]);
        idx.resize(take);
        return idx;
    }

    std::size_t size() const noexcept { return buffer_.size(); }
    std::optional<std::size_t> capacity() const noexcept { return capacity_; }
    const std::vector<std::uint8_t>& operator[](std::size_t i) const { return buffer_[i]; }

private:
    std::optional<std::size_t> capacity_;
    std::deque<std::vector<std::uint8_t>> buffer_;
};

/// `n_points` samples from the model, each from its own Gibbs chain seeded
/// with h ~ U(0,1)^n_h and run for `n_gibbs` steps. Chain i draws from a
/// child stream split off `rng` in order, so the result equals calling
/// gibbs_from_hidden on each chain separately with that stream.
template <typename Scalar>
Matrix<Scalar> generate_replay_matrix(const RbmParameters<Scalar>& params, std::size_t n_points,
                                      std::size_t n_gibbs, Rng& rng)
{
    if (n_gibbs == 0)
        throw DomainError("n_gibbs must be >= 1");
    const auto n = Eigen::Index(n_points);
    std::vector<Rng> streams;
    streams.reserve(n_points);
    for (std::size_t i = 0; i < n_points; ++i)
        streams.push_back(rng.split());

    Matrix<Scalar> h(n, Eigen::Index(params.n_hidden()));
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < h.cols(); ++j)
            h(i, j) = Scalar(streams[std::size_t(i)].uniform());

    Matrix<Scalar> v;
    for (std::size_t step = 0; step < n_gibbs; ++step)
    {
        v = sample_bernoulli_rows(visible_probs_rows(params, h), streams);
        h = sample_bernoulli_rows(hidden_probs_rows(params, v), streams);
    }
    return v;
}

template <typename Scalar>
BinaryBatch generate_replay(const RbmParameters<Scalar>& params, std::size_t n_points, std::size_t n_gibbs,
                            Rng& rng)
{
    return to_binary_batch(generate_replay_matrix(params, n_points, n_gibbs, rng));
}

/// Live state of an online trainer between observations.
template <typename Scalar = double>
struct OnlineTrainerState
{
    RbmParameters<Scalar> params;
    UpdateState<Scalar> update_state;
    BinaryMatrix pending;            ///< preallocated batch_size x n_v buffer for B_t
    std::size_t pending_count = 0;
    std::size_t t = 1;               ///< index of the next update procedure
    std::size_t observed_count = 0;

    OnlineTrainerState() = default;
    OnlineTrainerState(RbmParameters<Scalar> initial, std::size_t batch_size)
        : params(std::move(initial)),
          update_state(params.n_visible(), params.n_hidden()),
          pending(BinaryMatrix::Zero(Eigen::Index(batch_size), Eigen::Index(params.n_visible())))
    {}

    /// Copies a point into B_t. Returns true when B_t is full.
    bool observe(std::span<const std::uint8_t> row)
    {
        if (row.size() != params.n_visible())
            throw DimensionError("observation width does not match the model");
        if (pending_count >= std::size_t(pending.rows()))
            throw Error("pending batch is full; run an update procedure first");
        for (std::size_t i = 0; i < row.size(); ++i)
        {
            if (row[i] > 1)
                throw DomainError("observations must be binary");
            pending(Eigen::Index(pending_count), Eigen::Index(i)) = row[i];
        }
        ++pending_count;
        ++observed_count;
        return pending_count == std::size_t(pending.rows());
    }

    bool pending_full() const noexcept { return pending_count == std::size_t(pending.rows()); }
};

namespace detail
{

/// n_E epochs of CD on V = B_t u B_hat_t, momentum carried over from the
/// previous procedure; clears B_t and advances t.
template <typename Scalar>
void run_update_procedure(OnlineTrainerState<Scalar>& state, const Matrix<Scalar>& replay,
                          const Hyperparameters& hyper, Rng& rng)
{
    const auto n_obs = Eigen::Index(state.pending_count);
    Matrix<Scalar> v(n_obs + replay.rows(), Eigen::Index(state.params.n_visible()));
    v.topRows(n_obs) = state.pending.topRows(n_obs).template cast<Scalar>();
    if (replay.rows() > 0)
        v.bottomRows(replay.rows()) = replay;

    for (std::size_t epoch = 1; epoch <= hyper.n_epochs; ++epoch)
        cd_step(state.params, state.update_state, v, hyper, effective_momentum(epoch, hyper), rng);

    state.pending_count = 0;
    ++state.t;
}

}  // namespace detail

/// One generative-replay update procedure on the pending batch B_t. From the
/// second procedure on, `replay_size` points are generated from the current
/// model and trained on together with B_t. No-op when B_t is empty.
template <typename Scalar>
void ocdgr_update_procedure(OnlineTrainerState<Scalar>& state, const Hyperparameters& hyper, Rng& rng)
{
    if (state.pending_count == 0)
        return;
    Matrix<Scalar> replay(0, Eigen::Index(state.params.n_visible()));
    if (state.t > 1 && hyper.replay_size > 0)
        replay = generate_replay_matrix(state.params, hyper.replay_size, hyper.n_gibbs_generate, rng);
    detail::run_update_procedure(state, replay, hyper, rng);
}

/// Experience-replay update procedure: replay points are drawn uniformly
/// without replacement from `memory`; afterwards B_t is stored in `memory`.
template <typename Scalar>
void er_update_procedure(OnlineTrainerState<Scalar>& state, ReplayMemory& memory, const Hyperparameters& hyper,
                         Rng& rng)
{
    if (state.pending_count == 0)
        return;
    const auto idx = memory.sample_indices(hyper.replay_size, rng);
    Matrix<Scalar> replay(Eigen::Index(idx.size()), Eigen::Index(state.params.n_visible()));
    for (std::size_t r = 0; r < idx.size(); ++r)
    {
        const auto& row = memory[idx[r]];
        for (std::size_t i = 0; i < row.size(); ++i)
            replay(Eigen::Index(r), Eigen::Index(i)) = Scalar(row[i]);
    }
    const BinaryMatrix observed = state.pending.topRows(Eigen::Index(state.pending_count));
    detail::run_update_procedure(state, replay, hyper, rng);
    memory.insert(observed, std::size_t(observed.rows()));
}

/// Snapshot taken every `checkpoint_every` observations.
template <typename Scalar = double>
struct Checkpoint
{
    std::size_t observed_count = 0;
    std::size_t update_procedures = 0;
    RbmParameters<Scalar> params;
    std::size_t memory_rows = 0;
    std::size_t live_scalars = 0;
};

/// Streaming trainer: feeds observations one at a time and runs an update
/// procedure whenever `batch_size` points have accumulated.
template <typename Scalar = double>
class OnlineTrainer
{
public:
    OnlineTrainer(TrainerKind kind, RbmParameters<Scalar> initial, Hyperparameters hyper,
                  std::optional<std::size_t> memory_capacity = std::nullopt)
        : kind_(kind), hyper_(hyper), state_(std::move(initial), hyper.batch_size)
    {
        hyper_.validate();
        if (state_.params.n_visible() != hyper_.n_visible || state_.params.n_hidden() != hyper_.n_hidden)
            throw DimensionError("initial parameters do not match the hyperparameters");
        if (kind_ == TrainerKind::replay_limited)
            memory_ = ReplayMemory(memory_capacity.value_or(er_ml_capacity(hyper_.n_visible, hyper_.n_hidden)));
        else if (kind_ == TrainerKind::replay_unlimited)
            memory_ = ReplayMemory(memory_capacity);
    }

    /// Returns true if this observation triggered an update procedure.
    bool observe(std::span<const std::uint8_t> row, Rng& rng)
    {
        if (!state_.observe(row))
            return false;
        update(rng);
        return true;
    }

    /// Runs an update procedure on a partial B_t (stream end).
    bool flush(Rng& rng)
    {
        if (state_.pending_count == 0)
            return false;
        update(rng);
        return true;
    }

    /// Scalars held between observations: parameters, momentum buffer,
    /// the B_t buffer and any replay memory.
    std::size_t live_scalars() const
    {
        return state_.params.scalar_count() + state_.update_state.delta.scalar_count() +
               std::size_t(state_.pending.size()) + memory_rows() * hyper_.n_visible;
    }

    std::size_t memory_rows() const { return memory_ ? memory_->size() : 0; }

    Checkpoint<Scalar> checkpoint() const
    {
        return {state_.observed_count, state_.t - 1, state_.params, memory_rows(), live_scalars()};
    }

    TrainerKind kind() const noexcept { return kind_; }
    const Hyperparameters& hyperparameters() const noexcept { return hyper_; }
    const OnlineTrainerState<Scalar>& state() const noexcept { return state_; }
    OnlineTrainerState<Scalar>& state() noexcept { return state_; }
    const std::optional<ReplayMemory>& memory() const noexcept { return memory_; }

private:
    void update(Rng& rng)
    {
        if (kind_ == TrainerKind::generative_replay)
            ocdgr_update_procedure(state_, hyper_, rng);
        else
            er_update_procedure(state_, *memory_, hyper_, rng);
    }

    TrainerKind kind_;
    Hyperparameters hyper_;
    OnlineTrainerState<Scalar> state_;
    std::optional<ReplayMemory> memory_;
};

template <typename Scalar = double>
struct StreamResult
{
    RbmParameters<Scalar> params;
    std::vector<Checkpoint<Scalar>> checkpoints;
    std::size_t update_procedures = 0;
    std::size_t observed_count = 0;
    std::size_t peak_live_scalars = 0;
    std::size_t final_live_scalars = 0;
    std::size_t memory_rows = 0;  ///< replay memory size at the end of the stream
};

/// Trains on `stream` (each row seen once, in order) from `initial`. A
/// checkpoint is recorded after every `checkpoint_every` observations (after
/// any update that observation triggered); `on_checkpoint`, if given, is
/// called with each one. A trailing partial batch is flushed at the end.
template <typename Scalar, typename OnCheckpoint>
StreamResult<Scalar> stream_train(TrainerKind kind, RbmParameters<Scalar> initial, const BinaryBatch& stream,
                                  const Hyperparameters& hyper, std::size_t checkpoint_every, Rng& rng,
                                  OnCheckpoint&& on_checkpoint,
                                  std::optional<std::size_t> memory_capacity = std::nullopt)
{
    if (checkpoint_every == 0)
        throw ConfigError("checkpoint_every must be positive");
    if (stream.n_visible() != hyper.n_visible)
        throw DimensionError("stream width does not match n_visible");

    OnlineTrainer<Scalar> trainer(kind, std::move(initial), hyper, memory_capacity);
    StreamResult<Scalar> result;
    result.peak_live_scalars = trainer.live_scalars();
    const auto width = std::size_t(stream.rows.cols());
    for (std::size_t r = 0; r < stream.size(); ++r)
    {
        trainer.observe(std::span<const std::uint8_t>(stream.rows.row(Eigen::Index(r)).data(), width), rng);
        result.peak_live_scalars = std::max(result.peak_live_scalars, trainer.live_scalars());
        if (trainer.state().observed_count % checkpoint_every == 0)
        {
            result.checkpoints.push_back(trainer.checkpoint());
            on_checkpoint(result.checkpoints.back());
        }
    }
    trainer.flush(rng);
    result.peak_live_scalars = std::max(result.peak_live_scalars, trainer.live_scalars());
    result.params = trainer.state().params;
    result.update_procedures = trainer.state().t - 1;
    result.observed_count = trainer.state().observed_count;
    result.final_live_scalars = trainer.live_scalars();
    result.memory_rows = trainer.memory_rows();
    return result;
}

/// stream_train with parameters initialized from `rng` (N(0, init_stddev)).
template <typename Scalar = double>
StreamResult<Scalar> stream_train(TrainerKind kind, const BinaryBatch& stream, const Hyperparameters& hyper,
                                  std::size_t checkpoint_every, Rng& rng)
{
    auto initial = init_params<Scalar>(hyper.n_visible, hyper.n_hidden, hyper.init_stddev, rng);
    return stream_train(kind, std::move(initial), stream, hyper, checkpoint_every, rng,
                        [](const Checkpoint<Scalar>&) {});
}

}  // namespace ocdgr
