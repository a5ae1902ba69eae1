#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "ocdgr/data_io.hpp"
#include "ocdgr/evaluation.hpp"
#include "ocdgr/hyperparameters.hpp"
#include "ocdgr/online.hpp"

namespace ocdgr::cli
{

using nlohmann::json;

/// Where training and test rows come from.
///   idx:   gzip or raw IDX image/label files, binarized on load
///   text:  whitespace 0/1 rows, unlabeled
///   cache: dataset cache files written by save_dataset_cache
///   toy:   synthetic class blocks, train and test drawn from derived seeds
struct DatasetSpec
{
    std::string kind = "toy";
    std::string name;  ///< used to look up published reference values, e.g. "MNIST"
    std::string train_images, train_labels, test_images, test_labels;
    std::string train, test;
    Binarization binarization = Binarization::threshold;
    std::size_t toy_per_class = 1000;
    std::size_t toy_test_per_class = 100;
    std::size_t toy_classes = 10;
    std::size_t toy_block = 10;
    double toy_p = 0.3;
};

struct EvaluationSpec
{
    std::string estimator = "auto";  ///< exact | ais | auto
    std::string schedule = "uniform";  ///< uniform | reference
    std::size_t n_betas = 1000;
    std::size_t n_chains = 100;
    bool at_checkpoints = true;

    AisSchedule ais_schedule() const;
};

/// Fully resolved experiment. Equal configs over equal input files produce
/// identical outputs when timing is disabled.
struct ExperimentConfig
{
    DatasetSpec dataset;
    TrainerKind trainer = TrainerKind::generative_replay;
    Hyperparameters hyper;  ///< n_visible 0 means "take it from the data"
    StreamOrder::Mode order = StreamOrder::Mode::random;
    std::size_t checkpoint_every = 1000;
    EvaluationSpec evaluation;
    std::optional<std::size_t> memory_capacity;
    std::string output_dir = "out";
    std::uint64_t seed = 1;
    bool record_timing = true;
    std::size_t toy_samples = 1000;
    std::size_t knn_k = 1;
};

json default_config_json();
json to_json(const ExperimentConfig& config);

/// Strict conversion: unknown keys and wrong types raise ConfigError.
ExperimentConfig config_from_json(const json& j);

/// Reads a JSON config file. Relative dataset paths are resolved against the
/// file's directory.
json read_config_file(const std::filesystem::path& path);

/// Applies "a.b.c=value". The value is parsed as JSON when possible and taken
/// as a string otherwise.
void apply_override(json& config, const std::string& assignment);
void set_path(json& config, const std::string& dotted, json value);

/// Seeds derived from the master seed and a component name.
std::uint64_t component_seed(const ExperimentConfig& config, const std::string& component);

struct DataSplits
{
    BinaryBatch train;
    BinaryBatch test;
};

/// Loads the requested splits; an unrequested split is left empty.
DataSplits load_data(const ExperimentConfig& config, bool want_train = true, bool want_test = true);

}  // namespace ocdgr::cli
