#include <doctest.h>

#include <cmath>

#include "ocdgr/evaluation.hpp"
#include "ocdgr/training.hpp"
#include "../oracles.hpp"

using namespace ocdgr;

namespace
{

RbmParameters<double> random_model(std::size_t n_v, std::size_t n_h, double sigma, std::uint64_t seed)
{
    Rng rng(seed);
    return init_params<double>(n_v, n_h, sigma, rng);
}

std::vector<oracle::Vec> rows_of(const Eigen::MatrixXd& m)
{
    std::vector<oracle::Vec> out(std::size_t(m.rows()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            out[std::size_t(r)].push_back(m(r, c));
    return out;
}

Eigen::MatrixXd small_dataset()
{
    Eigen::MatrixXd d(4, 6);
    d << 1, 1, 1, 0, 0, 0,
         1, 1, 0, 0, 0, 0,
         0, 0, 0, 1, 1, 1,
         0, 0, 0, 0, 1, 1;
    return d;
}

GradientStatistics<double> filled(std::size_t n_v, std::size_t n_h, double x)
{
    return {Eigen::MatrixXd::Constant(Eigen::Index(n_h), Eigen::Index(n_v), x), Eigen::VectorXd::Constant(Eigen::Index(n_v), x),
            Eigen::VectorXd::Constant(Eigen::Index(n_h), x)};
}

Hyperparameters tiny_hyper(std::size_t n_v, std::size_t n_h)
{
    Hyperparameters h;
    h.n_visible = n_v;
    h.n_hidden = n_h;
    return h;
}

}  // namespace

TEST_SUITE("training")
{

TEST_CASE("positive_statistics: zero model on one all-ones row")
{
    const RbmParameters<double> zero(2, 2);
    const auto pos = positive_statistics(zero, Eigen::MatrixXd::Ones(1, 2));
    CHECK(pos.stats.weight_stat.isApproxToConstant(0.5));
    CHECK(pos.stats.visible_stat.isApproxToConstant(1.0));
    CHECK(pos.stats.hidden_stat.isApproxToConstant(0.5));
    CHECK(pos.hidden_probs.isApproxToConstant(0.5));
}

TEST_CASE("positive_statistics: duplicated rows double the statistics")
{
    const auto p = random_model(5, 3, 1.0, 2);
    Eigen::MatrixXd one(1, 5);
    one << 1, 0, 1, 1, 0;
    const Eigen::MatrixXd two = one.replicate(2, 1);
    const auto s1 = positive_statistics(p, one).stats;
    const auto s2 = positive_statistics(p, two).stats;
    CHECK((s2.weight_stat - 2.0 * s1.weight_stat).cwiseAbs().maxCoeff() == 0.0);
    CHECK((s2.visible_stat - 2.0 * s1.visible_stat).cwiseAbs().maxCoeff() == 0.0);
    CHECK((s2.hidden_stat - 2.0 * s1.hidden_stat).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("positive_statistics: matches the scalar-loop oracle")
{
    const auto p = random_model(7, 4, 1.0, 3);
    Rng rng(4);
    const Eigen::MatrixXd batch = sample_bernoulli(Eigen::MatrixXd::Constant(5, 7, 0.5), rng);
    const auto got = positive_statistics(p, batch).stats;
    const auto m = oracle::from(p);
    const auto want = oracle::data_sums(m, rows_of(batch));
    for (std::size_t j = 0; j < 4; ++j)
    {
        CHECK(got.hidden_stat(Eigen::Index(j)) == doctest::Approx(want.h[j]).epsilon(1e-12));
        for (std::size_t i = 0; i < 7; ++i)
            CHECK(got.weight_stat(Eigen::Index(j), Eigen::Index(i)) == doctest::Approx(want.vh[j][i]).epsilon(1e-12));
    }
    for (std::size_t i = 0; i < 7; ++i)
        CHECK(got.visible_stat(Eigen::Index(i)) == want.v[i]);
}

TEST_CASE("positive_statistics: empty batch")
{
    const RbmParameters<double> p(3, 2);
    CHECK_THROWS_AS(positive_statistics(p, Eigen::MatrixXd(0, 3)), EmptyBatchError);
}

TEST_CASE("cd_negative_phase: zero model gives hidden statistics of exactly half the batch")
{
    const RbmParameters<double> zero(6, 3);
    Rng rng(5);
    const Eigen::MatrixXd v = sample_bernoulli(Eigen::MatrixXd::Constant(8, 6, 0.5), rng);
    const auto pos = positive_statistics(zero, v);
    const auto neg = cd_negative_phase(zero, v, pos.hidden_probs, 1, rng);
    CHECK(neg.stats.hidden_stat.isApproxToConstant(4.0, 0.0));
}

TEST_CASE("cd_negative_phase: a longer chain extends the shorter one")
{
    const auto p = random_model(6, 4, 1.0, 6);
    Rng seed_rng(7);
    const Eigen::MatrixXd v0 = sample_bernoulli(Eigen::MatrixXd::Constant(5, 6, 0.5), seed_rng);
    const auto pos = positive_statistics(p, v0);

    Rng rng1(8);
    Rng rng3 = rng1;
    const auto short_chain = cd_negative_phase(p, v0, pos.hidden_probs, 1, rng1);
    const auto long_chain = cd_negative_phase(p, v0, pos.hidden_probs, 3, rng3);

    // Continue the 1-step chain by hand with the same stream.
    Eigen::MatrixXd v = short_chain.visible;
    Eigen::MatrixXd hp;
    for (int k = 0; k < 2; ++k)
    {
        const Eigen::MatrixXd h = sample_bernoulli(hidden_probs_rows(p, v), rng1);
        v = sample_bernoulli(visible_probs_rows(p, h), rng1);
    }
    hp = hidden_probs_rows(p, v);
    CHECK(v == long_chain.visible);
    CHECK(long_chain.stats.weight_stat.isApprox(hp.transpose() * v, 1e-15));
    CHECK(rng1 == rng3);
}

TEST_CASE("cd_negative_phase: long chains match the exact model expectation")
{
    const auto p = random_model(4, 3, 1.0, 12);
    const auto exact = oracle::model_moments(oracle::from(p));

    constexpr int chains = 1000;
    Rng rng(13);
    const Eigen::MatrixXd v0 = sample_bernoulli(Eigen::MatrixXd::Constant(chains, 4, 0.5), rng);
    const auto pos = positive_statistics(p, v0);
    const auto neg = cd_negative_phase(p, v0, pos.hidden_probs, 10000, rng);

    // Per-chain values v_i * P(h_j | v) give a standard error for the mean.
    const Eigen::MatrixXd hp = hidden_probs_rows(p, neg.visible);
    for (Eigen::Index j = 0; j < 3; ++j)
        for (Eigen::Index i = 0; i < 4; ++i)
        {
            const Eigen::ArrayXd x = neg.visible.col(i).array() * hp.col(j).array();
            const double mean = neg.stats.weight_stat(j, i) / chains;
            const double se = std::sqrt((x - x.mean()).square().sum() / (chains - 1) / chains);
            CHECK(std::abs(mean - exact.vh[std::size_t(j)][std::size_t(i)]) <= 3.0 * se + 1e-12);
        }
}

TEST_CASE("apply_update: balanced statistics leave parameters unchanged")
{
    const auto p = random_model(4, 3, 1.0, 1);
    const UpdateState<double> state(4, 3);
    const auto s = filled(4, 3, 0.7);
    const auto [q, next] = apply_update(p, state, s, s, 10, 0.1, 0.0, 0.0);
    CHECK(q == p);
    CHECK(next.delta == RbmParameters<double>(4, 3));
    CHECK(next.epoch_index == 1);
}

TEST_CASE("apply_update: pure weight decay scales parameters by (1 - alpha xi)")
{
    const auto p = random_model(4, 3, 1.0, 2);
    const UpdateState<double> state(4, 3);
    const auto s = filled(4, 3, 0.2);
    const double alpha = 0.1, xi = 0.01;
    const auto [q, next] = apply_update(p, state, s, s, 5, alpha, 0.0, xi);
    CHECK(q.weights.isApprox(p.weights * (1.0 - alpha * xi), 1e-15));
    CHECK(q.visible_bias.isApprox(p.visible_bias * (1.0 - alpha * xi), 1e-15));
    CHECK(q.hidden_bias.isApprox(p.hidden_bias * (1.0 - alpha * xi), 1e-15));

    const auto [w_only, unused] = apply_update(p, state, s, s, 5, alpha, 0.0, xi, false);
    CHECK(w_only.visible_bias == p.visible_bias);
    CHECK(w_only.hidden_bias == p.hidden_bias);
    CHECK(w_only.weights.isApprox(p.weights * (1.0 - alpha * xi), 1e-15));
}

TEST_CASE("apply_update: momentum recurrence")
{
    const RbmParameters<double> p(3, 2);
    const UpdateState<double> state(3, 2);
    const auto plus = filled(3, 2, 3.0);
    const auto minus = filled(3, 2, 1.0);
    const double alpha = 0.05, rho = 0.9;
    const std::size_t denom = 4;
    const double g = (3.0 - 1.0) / double(denom);

    const auto [p1, s1] = apply_update(p, state, plus, minus, denom, alpha, rho, 0.0);
    const auto [p2, s2] = apply_update(p1, s1, plus, minus, denom, alpha, rho, 0.0);
    CHECK(s1.delta.weights.isApproxToConstant(alpha * g, 1e-12));
    CHECK((s2.delta.weights.array() - (0.9 * s1.delta.weights.array() + alpha * g)).abs().maxCoeff() <= 1e-12);
    CHECK((p2.weights.array() - (s1.delta.weights + s2.delta.weights).array()).abs().maxCoeff() <= 1e-12);
}

TEST_CASE("apply_update: zero normalizer and shape mismatch")
{
    const RbmParameters<double> p(3, 2);
    const UpdateState<double> state(3, 2);
    const auto s = filled(3, 2, 0.0);
    CHECK_THROWS_AS(apply_update(p, state, s, s, 0, 0.1, 0.0, 0.0), EmptyBatchError);
    const auto wrong = filled(2, 2, 0.0);
    CHECK_THROWS_AS(apply_update(p, state, wrong, s, 1, 0.1, 0.0, 0.0), DimensionError);
}

TEST_CASE("property: apply_update is linear in the statistics difference")
{
    Rng rng(31);
    for (int trial = 0; trial < 20; ++trial)
    {
        const auto p = init_params<double>(5, 4, 1.0, rng);
        UpdateState<double> state(5, 4);
        state.delta = init_params<double>(5, 4, 0.1, rng);
        auto random_stats = [&] {
            const auto r = init_params<double>(5, 4, 2.0, rng);
            return GradientStatistics<double>{r.weights, r.visible_bias, r.hidden_bias};
        };
        const auto d1 = random_stats();
        const auto d2 = random_stats();
        const auto zero = filled(5, 4, 0.0);
        GradientStatistics<double> sum{d1.weight_stat + d2.weight_stat, d1.visible_stat + d2.visible_stat,
                                       d1.hidden_stat + d2.hidden_stat};
        auto delta_of = [&](const GradientStatistics<double>& d) {
            return apply_update(p, state, d, zero, 7, 0.05, 0.5, 0.001).second.delta;
        };
        const auto base = delta_of(zero);
        const auto x = delta_of(d1), y = delta_of(d2), xy = delta_of(sum);
        CHECK((xy.weights - base.weights).isApprox((x.weights - base.weights) + (y.weights - base.weights), 1e-10));
        CHECK((xy.hidden_bias - base.hidden_bias)
                  .isApprox((x.hidden_bias - base.hidden_bias) + (y.hidden_bias - base.hidden_bias), 1e-10));
    }
}

TEST_CASE("property: zero learning rate freezes the parameters")
{
    const auto p = random_model(6, 4, 1.0, 3);
    auto h = tiny_hyper(6, 4);
    h.learning_rate = 0.0;
    h.n_epochs = 3;
    h.batch_size = 2;
    Rng rng(4);
    const BinaryBatch data = to_binary_batch(small_dataset());
    CHECK(train_offline(p, data, h, rng) == p);
}

TEST_CASE("effective_momentum: warmup schedule")
{
    Hyperparameters h;
    CHECK(effective_momentum(1, h) == 0.5);
    CHECK(effective_momentum(5, h) == 0.5);
    CHECK(effective_momentum(6, h) == 0.9);
    h.momentum_warmup_epochs = 0;
    CHECK(effective_momentum(1, h) == 0.9);
}

TEST_CASE("train_offline: one epoch and one minibatch equals one manual CD update")
{
    const auto p = random_model(6, 4, 0.1, 5);
    auto h = tiny_hyper(6, 4);
    h.n_epochs = 1;
    h.batch_size = 4;
    h.momentum_warmup = 0.0;
    h.weight_decay = 0.0;
    const BinaryBatch data = to_binary_batch(small_dataset());

    Rng rng(6);
    Rng manual_rng = rng;
    const auto trained = train_offline(p, data, h, rng);

    const auto order = random_permutation(4, manual_rng);
    Eigen::MatrixXd v(4, 6);
    for (int r = 0; r < 4; ++r)
        v.row(r) = small_dataset().row(Eigen::Index(order[std::size_t(r)]));
    const auto pos = positive_statistics(p, v);
    const auto neg = cd_negative_phase(p, v, pos.hidden_probs, 1, manual_rng);
    const auto manual = apply_update(p, UpdateState<double>(6, 4), pos.stats, neg.stats, 4, h.learning_rate, 0.0, 0.0).first;
    CHECK(trained == manual);
}

TEST_CASE("train_offline: long training raises the exact log-likelihood")
{
    const auto p0 = random_model(6, 4, 0.01, 9);
    auto h = tiny_hyper(6, 4);
    h.n_epochs = 2000;
    h.batch_size = 4;
    const BinaryBatch data = to_binary_batch(small_dataset());
    Rng rng(10);
    const auto p1 = train_offline(p0, data, h, rng);

    const auto rows = rows_of(small_dataset());
    const double before = oracle::mean_log_likelihood(oracle::from(p0), rows);
    const double after = oracle::mean_log_likelihood(oracle::from(p1), rows);
    CHECK(after > before);

    Rng again(10);
    CHECK(train_offline(p0, data, h, again) == p1);
}

TEST_CASE("exact gradient: positive statistics equal the analytic data expectation")
{
    const auto p = random_model(10, 8, 0.5, 14);
    Rng rng(15);
    const Eigen::MatrixXd v = sample_bernoulli(Eigen::MatrixXd::Constant(12, 10, 0.4), rng);
    const auto pos = positive_statistics(p, v);
    const auto want = oracle::data_sums(oracle::from(p), rows_of(v));
    for (std::size_t j = 0; j < 8; ++j)
        for (std::size_t i = 0; i < 10; ++i)
            CHECK(std::abs(pos.stats.weight_stat(Eigen::Index(j), Eigen::Index(i)) / 12.0 - want.vh[j][i] / 12.0) <= 1e-12);
}

TEST_CASE("exact gradient: averaged CD-1 direction agrees in sign with the true gradient")
{
    const auto p = random_model(6, 4, 0.5, 16);
    const Eigen::MatrixXd data = small_dataset();
    const auto m = oracle::from(p);
    const auto model = oracle::model_moments(m);
    const auto sums = oracle::data_sums(m, rows_of(data));

    constexpr int seeds = 1000;
    Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(4, 6);
    Eigen::MatrixXd sq = Eigen::MatrixXd::Zero(4, 6);
    const auto pos = positive_statistics(p, data);
    for (int s = 0; s < seeds; ++s)
    {
        Rng rng(std::uint64_t(1000 + s));
        const auto neg = cd_negative_phase(p, data, pos.hidden_probs, 1, rng);
        const Eigen::MatrixXd g = (pos.stats.weight_stat - neg.stats.weight_stat) / 4.0;
        mean += g;
        sq += g.cwiseProduct(g);
    }
    mean /= seeds;
    const Eigen::MatrixXd se = ((sq / seeds - mean.cwiseProduct(mean)) / (seeds - 1)).cwiseSqrt();

    int considered = 0, agree = 0;
    for (std::size_t j = 0; j < 4; ++j)
        for (std::size_t i = 0; i < 6; ++i)
        {
            const double exact = sums.vh[j][i] / 4.0 - model.vh[j][i];
            if (std::abs(exact) <= 3.0 * se(Eigen::Index(j), Eigen::Index(i)))
                continue;
            ++considered;
            agree += (exact > 0) == (mean(Eigen::Index(j), Eigen::Index(i)) > 0);
        }
    REQUIRE(considered > 0);
    CHECK(double(agree) >= 0.9 * considered);
}

TEST_CASE("property: the update depends only on parameters, momentum, batch and stream state")
{
    const auto p = random_model(6, 4, 0.5, 17);
    auto h = tiny_hyper(6, 4);
    UpdateState<double> state(6, 4);
    state.delta = random_model(6, 4, 0.01, 18);
    const Eigen::MatrixXd v = small_dataset();

    auto run = [&](std::uint64_t unrelated_work) {
        // unrelated draws on another stream must not matter
        Rng other(unrelated_work);
        for (std::uint64_t i = 0; i < unrelated_work; ++i)
            other.uniform();
        auto params = p;
        auto st = state;
        Rng rng(19);
        cd_step(params, st, v, h, 0.9, rng);
        return params;
    };
    CHECK(run(0) == run(1000));
}

}
