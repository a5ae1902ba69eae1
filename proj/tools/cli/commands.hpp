#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cli/config.hpp"

namespace ocdgr::cli
{

/// Exit statuses.
enum ExitCode : int
{
    exit_ok = 0,
    exit_failure = 1,
    exit_usage = 2,       ///< bad flags, bad config, unreadable input path
    exit_format = 3,      ///< malformed data or model file
    exit_infeasible = 4,  ///< requested computation is numerically infeasible
};

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct LogZ
{
    double value = 0.0;
    double std = 0.0;
    std::string estimator;  ///< "exact" or "ais"
};

/// "auto" enumerates when the smaller layer has at most `auto_exact_units`
/// units and runs AIS otherwise.
inline constexpr std::size_t auto_exact_units = 20;

LogZ estimate_log_z(const RbmParameters<double>& params, const EvaluationSpec& spec, Rng& rng);

json report_to_json(const EvaluationReport& report, const std::string& estimator);

struct CheckpointRow
{
    std::size_t observed_count = 0;
    std::size_t update_procedures = 0;
    double log_z = std::numeric_limits<double>::quiet_NaN();
    double log_z_std = std::numeric_limits<double>::quiet_NaN();
    double mean_log_prob = std::numeric_limits<double>::quiet_NaN();
    double cross_class_std = std::numeric_limits<double>::quiet_NaN();
    std::size_t memory_rows = 0;
    std::size_t live_scalars = 0;
    double wall_ms = 0.0;
};

struct TrainRun
{
    TrainerKind trainer = TrainerKind::generative_replay;
    RbmParameters<double> params;
    Hyperparameters hyper;  ///< with n_visible resolved from the data
    std::vector<CheckpointRow> checkpoints;
    EvaluationReport final_report;
    std::string estimator;
    std::size_t observed_count = 0;
    std::size_t update_procedures = 0;
    std::size_t peak_live_scalars = 0;
    std::size_t peak_memory_rows = 0;
    std::size_t final_live_scalars = 0;
    double wall_ms = 0.0;
};

/// Trains one trainer on the configured stream and evaluates on the test
/// split. Seeds: "order", "init", "train", "evaluate/<observed_count>" and
/// "evaluate/final", all derived from the master seed.
TrainRun train_experiment(const ExperimentConfig& config, const DataSplits& data);

std::string checkpoint_csv(const std::vector<TrainRun>& runs, const ExperimentConfig& config);
std::string compare_csv(const std::vector<TrainRun>& runs, const ExperimentConfig& config);

/// Published mean test log-probabilities (nats) for RBMs with 500 hidden
/// units trained with CD-1 on randomly ordered streams.
struct PublishedResult
{
    const char* dataset;
    double ocdgr;
    double er_im;
    double er_ml;
    double offline;
};

const std::vector<PublishedResult>& published_results();
std::optional<PublishedResult> published_result(const std::string& dataset);
inline constexpr const char* published_conditions = "n_h=500, CD-1, random order, full dataset";

struct ToyStage
{
    int last_class = 0;
    std::size_t observed_count = 0;
    std::map<int, std::size_t> histogram;
};

/// Class-by-class toy stream; after each class, `toy_samples` generated
/// points are k-NN classified against the class prototypes.
std::vector<ToyStage> toy_demo(const ExperimentConfig& config);

}  // namespace ocdgr::cli
