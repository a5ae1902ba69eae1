#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <vector>

#include "ocdgr/binary_batch.hpp"
#include "ocdgr/rbm.hpp"

namespace ocdgr
{

/// Largest layer width that exact enumeration accepts.
inline constexpr std::size_t max_enumerated_units = 25;

/// Numerically stable log(sum(exp(x))). -inf for an empty range.
template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::DenseBase<Derived>& x)
{
    using Scalar = typename Derived::Scalar;
    if (x.size() == 0)
        return -std::numeric_limits<Scalar>::infinity();
    const Scalar m = x.maxCoeff();
    if (!std::isfinite(m))
        return m;
    return m + std::log((x.derived().array() - m).exp().sum());
}

/// Running log-sum-exp accumulator.
template <typename Scalar>
class LogSumExp
{
public:
    void add(Scalar x)
    {
        if (x == -std::numeric_limits<Scalar>::infinity())
            return;
        if (x <= max_)
            sum_ += std::exp(x - max_);
        else
        {
            sum_ = sum_ * std::exp(max_ - x) + Scalar(1);
            max_ = x;
        }
    }

    Scalar value() const
    {
        return sum_ == Scalar(0) ? -std::numeric_limits<Scalar>::infinity() : max_ + std::log(sum_);
    }

private:
    Scalar max_ = -std::numeric_limits<Scalar>::infinity();
    Scalar sum_ = Scalar(0);
};

/// Rows [first, first + count) of the enumeration of {0,1}^width; bit i of
/// the configuration index is unit i.
template <typename Scalar>
Matrix<Scalar> enumerate_states(std::size_t width, std::uint64_t first, std::size_t count)
{
    Matrix<Scalar> states(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(width));
    for (std::size_t r = 0; r < count; ++r)
        for (std::size_t i = 0; i < width; ++i)
            states(Eigen::Index(r), Eigen::Index(i)) = Scalar(((first + r) >> i) & 1U);
    return states;
}

enum class EnumeratedLayer
{
    smaller,
    visible,
    hidden,
};

/// log Z by summing out one layer analytically and enumerating the other:
/// over visible states with -F(v), or over hidden states with -F_h(h).
template <typename Scalar>
Scalar exact_log_z(const RbmParameters<Scalar>& params, EnumeratedLayer layer = EnumeratedLayer::smaller)
{
    if (layer == EnumeratedLayer::smaller)
        layer = params.n_visible() <= params.n_hidden() ? EnumeratedLayer::visible : EnumeratedLayer::hidden;
    const std::size_t width = layer == EnumeratedLayer::visible ? params.n_visible() : params.n_hidden();
    if (width > max_enumerated_units)
        throw InfeasibleSizeError("exact partition function needs min(n_visible, n_hidden) <= 25, got " +
                                  std::to_string(std::min(params.n_visible(), params.n_hidden())) +
                                  "; use the AIS estimator instead");

    constexpr std::uint64_t chunk = 4096;
    const std::uint64_t total = std::uint64_t{1} << width;
    LogSumExp<Scalar> acc;
    for (std::uint64_t first = 0; first < total; first += chunk)
    {
        const auto count = std::size_t(std::min(chunk, total - first));
        const Matrix<Scalar> states = enumerate_states<Scalar>(width, first, count);
        const Vector<Scalar> neg_f = layer == EnumeratedLayer::visible ? Vector<Scalar>(-free_energy_rows(params, states))
                                                                       : Vector<Scalar>(-hidden_free_energy_rows(params, states));
        for (Eigen::Index i = 0; i < neg_f.size(); ++i)
            acc.add(neg_f(i));
    }
    return acc.value();
}

// --- annealed importance sampling ---------------------------------------------------

/// Inverse temperatures beta_0 = 0 <= ... <= beta_K = 1 and the number of
/// independent annealing runs.
struct AisSchedule
{
    std::vector<double> betas;
    std::size_t n_chains = 100;
    std::size_t gibbs_per_temperature = 1;

    void validate() const
    {
        if (betas.size() < 2)
            throw ScheduleError("AIS schedule needs at least two temperatures");
        if (betas.front() != 0.0 || betas.back() != 1.0)
            throw ScheduleError("AIS schedule must start at beta = 0 and end at beta = 1");
        for (std::size_t k = 1; k < betas.size(); ++k)
            if (!(betas[k] >= betas[k - 1]))
                throw ScheduleError("AIS betas must be nondecreasing");
        if (n_chains == 0)
            throw ScheduleError("AIS needs at least one chain");
        if (gibbs_per_temperature == 0)
            throw ScheduleError("AIS needs at least one Gibbs transition per temperature");
    }

    /// `n_betas` temperatures evenly spaced on [0, 1].
    static AisSchedule uniform(std::size_t n_betas, std::size_t n_chains)
    {
        if (n_betas < 2)
            throw ScheduleError("AIS schedule needs at least two temperatures");
        AisSchedule s;
        s.n_chains = n_chains;
        s.betas.resize(n_betas);
        for (std::size_t k = 0; k < n_betas; ++k)
            s.betas[k] = double(k) / double(n_betas - 1);
        s.betas.back() = 1.0;
        return s;
    }

    /// 500 steps on [0, 0.5), 4,000 on [0.5, 0.9), 10,000 on [0.9, 1.0], 100 chains.
    static AisSchedule reference_ladder()
    {
        AisSchedule s;
        s.n_chains = 100;
        auto segment = [&](double lo, double hi, std::size_t n) {
            for (std::size_t k = 0; k < n; ++k)
                s.betas.push_back(lo + (hi - lo) * double(k) / double(n));
        };
        segment(0.0, 0.5, 500);
        segment(0.5, 0.9, 4000);
        segment(0.9, 1.0, 10000);
        s.betas.push_back(1.0);
        return s;
    }
};

struct AisEstimate
{
    double log_z = 0.0;
    double log_z_std = 0.0;
    std::vector<double> log_weights;
};

/// AIS estimate of log Z. The base model keeps the target's visible biases and
/// has zero weights and hidden biases, so log Z_0 = sum_i softplus(a_i) +
/// n_h log 2. Intermediate distributions scale the weight and hidden-bias terms
/// by beta:  log p*_beta(v) = a'v + sum_j softplus(beta (b_j + W_j: v)).
/// The reported std is the delta-method standard error of the log-mean-weight:
///   std(w) / (sqrt(N) mean(w)).
template <typename Scalar>
AisEstimate ais_log_z(const RbmParameters<Scalar>& params, const AisSchedule& schedule, Rng& rng)
{
    schedule.validate();
    const auto n = Eigen::Index(schedule.n_chains);
    const auto& a = params.visible_bias;

    double log_z0 = double(params.n_hidden()) * std::log(2.0);
    for (Eigen::Index i = 0; i < a.size(); ++i)
        log_z0 += double(softplus(a(i)));

    auto unnormalized = [&](const Matrix<Scalar>& act, double beta) {
        const Scalar b = Scalar(beta);
        return Vector<Scalar>((b * act).unaryExpr([](Scalar x) { return softplus(x); }).rowwise().sum());
    };

    // v ~ base model: independent Bernoulli(sigmoid(a)).
    Matrix<Scalar> base_probs = a.transpose().unaryExpr([](Scalar x) { return sigmoid(x); }).replicate(n, 1);
    Matrix<Scalar> v = sample_bernoulli(base_probs, rng);

    Vector<double> log_w = Vector<double>::Zero(n);
    const std::size_t k_last = schedule.betas.size() - 1;
    for (std::size_t k = 1; k <= k_last; ++k)
    {
        Matrix<Scalar> act = v * params.weights.transpose();
        act.rowwise() += params.hidden_bias.transpose();
        log_w += (unnormalized(act, schedule.betas[k]) - unnormalized(act, schedule.betas[k - 1])).template cast<double>();
        if (k == k_last)
            break;

        // Gibbs transitions leaving p_beta_k invariant.
        const Scalar beta = Scalar(schedule.betas[k]);
        for (std::size_t g = 0; g < schedule.gibbs_per_temperature; ++g)
        {
            if (g > 0)
            {
                act = v * params.weights.transpose();
                act.rowwise() += params.hidden_bias.transpose();
            }
            const Matrix<Scalar> h =
                sample_bernoulli(Matrix<Scalar>((beta * act).unaryExpr([](Scalar x) { return sigmoid(x); })), rng);
            Matrix<Scalar> vis = beta * (h * params.weights);
            vis.rowwise() += a.transpose();
            v = sample_bernoulli(Matrix<Scalar>(vis.unaryExpr([](Scalar x) { return sigmoid(x); })), rng);
        }
    }

    AisEstimate est;
    est.log_weights.assign(log_w.data(), log_w.data() + log_w.size());
    const double m = log_w.maxCoeff();
    const Vector<double> w = (log_w.array() - m).exp().matrix();
    const double mean_w = w.mean();
    est.log_z = log_z0 + m + std::log(mean_w);
    if (n > 1)
    {
        const double var = (w.array() - mean_w).square().sum() / double(n - 1);
        est.log_z_std = std::sqrt(var / double(n)) / mean_w;
    }
    return est;
}

// --- test-set reports ----------------------------------------------------------------

struct EvaluationReport
{
    double log_z = 0.0;
    double log_z_std = 0.0;
    double mean_log_prob = 0.0;
    std::map<int, double> per_class_mean;
    double cross_class_std = 0.0;
    std::size_t n_test = 0;
};

/// log p(v) = -F(v) - log Z for every test row, averaged overall and per class.
/// cross_class_std is the population std of the per-class means (0 when the
/// test set has no labels).
template <typename Scalar>
EvaluationReport test_log_prob_report(const RbmParameters<Scalar>& params, const BinaryBatch& test, double log_z,
                                      double log_z_std = 0.0)
{
    if (test.empty())
        throw EmptyBatchError("empty test set");
    if (test.n_visible() != params.n_visible())
        throw DimensionError("test set width does not match the model");

    const Vector<Scalar> f = free_energy_rows(params, test.as_matrix<Scalar>());
    EvaluationReport report;
    report.log_z = log_z;
    report.log_z_std = log_z_std;
    report.n_test = test.size();

    double total = 0.0;
    std::map<int, std::pair<double, std::size_t>> by_class;
    for (std::size_t r = 0; r < test.size(); ++r)
    {
        const double lp = -double(f(Eigen::Index(r))) - log_z;
        total += lp;
        if (test.has_labels())
        {
            auto& [sum, count] = by_class[test.labels[r]];
            sum += lp;
            ++count;
        }
    }
    report.mean_log_prob = total / double(test.size());
    if (!by_class.empty())
    {
        double mean = 0.0;
        for (const auto& [label, acc] : by_class)
        {
            report.per_class_mean[label] = acc.first / double(acc.second);
            mean += report.per_class_mean[label];
        }
        mean /= double(by_class.size());
        double var = 0.0;
        for (const auto& [label, m] : report.per_class_mean)
            var += (m - mean) * (m - mean);
        report.cross_class_std = std::sqrt(var / double(by_class.size()));
    }
    return report;
}

// --- nearest neighbours ----------------------------------------------------------------

/// Hamming distances, queries x prototypes.
inline Eigen::MatrixXi hamming_distances(const BinaryMatrix& queries, const BinaryMatrix& prototypes)
{
    if (queries.cols() != prototypes.cols())
        throw DimensionError("query and prototype widths differ");
    const Eigen::MatrixXi q = queries.cast<int>();
    const Eigen::MatrixXi p = prototypes.cast<int>();
    Eigen::MatrixXi d = -2 * (q * p.transpose());
    d.colwise() += q.rowwise().sum();
    d.rowwise() += p.rowwise().sum().transpose();
    return d;
}

/// Hamming k-NN with majority vote. Every prototype at distance <= the k-th
/// smallest distance votes, so the result does not depend on prototype order.
/// Vote ties go to the class with the smaller mean neighbour distance, then
/// to the lower class id.
inline std::vector<int> knn_classify(const BinaryBatch& prototypes, const BinaryBatch& queries, std::size_t k)
{
    if (prototypes.empty())
        throw EmptyBatchError("k-NN needs at least one prototype");
    if (!prototypes.has_labels())
        throw ConfigError("k-NN prototypes must be labeled");
    if (k == 0 || k > prototypes.size())
        throw ConfigError("k must lie in [1, number of prototypes]");

    const Eigen::MatrixXi dist = hamming_distances(queries.rows, prototypes.rows);
    std::vector<int> out;
    out.reserve(queries.size());
    std::vector<int> sorted(prototypes.size());
    for (Eigen::Index q = 0; q < dist.rows(); ++q)
    {
        for (std::size_t p = 0; p < prototypes.size(); ++p)
            sorted[p] = dist(q, Eigen::Index(p));
        std::nth_element(sorted.begin(), sorted.begin() + std::ptrdiff_t(k - 1), sorted.end());
        const int radius = sorted[k - 1];

        std::map<int, std::pair<std::size_t, long>> votes;  // label -> (count, distance sum)
        for (std::size_t p = 0; p < prototypes.size(); ++p)
        {
            const int d = dist(q, Eigen::Index(p));
            if (d <= radius)
            {
                auto& [count, sum] = votes[prototypes.labels[p]];
                ++count;
                sum += d;
            }
        }
        int best = 0;
        std::size_t best_count = 0;
        double best_mean = 0.0;
        for (const auto& [label, acc] : votes)  // ascending label order
        {
            const double mean = double(acc.second) / double(acc.first);
            if (acc.first > best_count || (acc.first == best_count && mean < best_mean))
            {
                best = label;
                best_count = acc.first;
                best_mean = mean;
            }
        }
        out.push_back(best);
    }
    return out;
}

inline std::map<int, std::size_t> class_histogram(const BinaryBatch& generated, const BinaryBatch& prototypes,
                                                  std::size_t k)
{
    if (generated.empty())
        throw EmptyBatchError("no generated samples to classify");
    std::map<int, std::size_t> hist;
    for (int label : knn_classify(prototypes, generated, k))
        ++hist[label];
    return hist;
}

}  // namespace ocdgr
