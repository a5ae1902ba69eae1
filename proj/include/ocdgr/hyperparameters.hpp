#pragma once

#include <cstddef>

#include "ocdgr/errors.hpp"

namespace ocdgr
{

/// Training meta-parameters. Defaults are the standard online settings:
/// 100 observed points per update, 300 replayed points, one Gibbs step for
/// generation, 10 epochs of CD-1 per update with learning rate 0.05,
/// momentum 0.9 (0.5 during the first 5 epochs) and weight decay 2e-4.
struct Hyperparameters
{
    std::size_t n_visible = 0;
    std::size_t n_hidden = 0;

    std::size_t n_gibbs_generate = 1;  ///< Gibbs steps per generated replay point
    std::size_t n_cd = 1;
    std::size_t n_epochs = 10;         ///< epochs per update procedure
    std::size_t batch_size = 100;      ///< observed points per update procedure
    std::size_t replay_size = 300;     ///< replayed/generated points per update procedure

    double learning_rate = 0.05;
    double momentum = 0.9;
    double weight_decay = 0.0002;
    double init_stddev = 0.01;

    std::size_t momentum_warmup_epochs = 5;
    double momentum_warmup = 0.5;

    /// Apply weight decay to the biases as well as to the weights.
    bool decay_biases = true;

    void validate() const
    {
        if (n_visible == 0 || n_hidden == 0)
            throw ConfigError("n_visible and n_hidden must be positive");
        if (n_gibbs_generate == 0 || n_cd == 0 || n_epochs == 0 || batch_size == 0)
            throw ConfigError("n_gibbs_generate, n_cd, n_epochs and batch_size must be >= 1");
        if (!(learning_rate > 0.0))
            throw ConfigError("learning_rate must be > 0");
        if (!(momentum >= 0.0 && momentum < 1.0) || !(momentum_warmup >= 0.0 && momentum_warmup < 1.0))
            throw ConfigError("momentum values must lie in [0, 1)");
        if (!(weight_decay >= 0.0))
            throw ConfigError("weight_decay must be >= 0");
        if (!(init_stddev >= 0.0))
            throw ConfigError("init_stddev must be >= 0");
    }
};

}  // namespace ocdgr
