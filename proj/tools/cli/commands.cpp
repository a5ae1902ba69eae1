#include "cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "cli/csv.hpp"
#include "ocdgr/model_io.hpp"

namespace ocdgr::cli
{

namespace
{

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start)
{
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

void write_file(const std::filesystem::path& path, const std::string& content)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open " + path.string() + " for writing");
    out << content;
    if (!out)
        throw IoError("write failed for " + path.string());
}

Hyperparameters resolve_hyper(const ExperimentConfig& c, std::size_t width)
{
    Hyperparameters h = c.hyper;
    if (h.n_visible == 0)
        h.n_visible = width;
    else if (h.n_visible != width)
        throw DimensionError("hyper.n_visible = " + std::to_string(h.n_visible) + " but the data has " +
                             std::to_string(width) + " columns");
    if (h.n_hidden == 0)
        throw ConfigError("hyper.n_hidden must be set");
    h.validate();
    return h;
}

std::string config_text(const ExperimentConfig& c, TrainerKind trainer)
{
    auto copy = c;
    copy.trainer = trainer;
    return to_json(copy).dump();
}

}  // namespace

LogZ estimate_log_z(const RbmParameters<double>& params, const EvaluationSpec& spec, Rng& rng)
{
    const std::size_t smaller = std::min(params.n_visible(), params.n_hidden());
    const bool exact = spec.estimator == "exact" || (spec.estimator == "auto" && smaller <= auto_exact_units);
    if (exact)
        return {exact_log_z(params), 0.0, "exact"};
    const auto est = ais_log_z(params, spec.ais_schedule(), rng);
    return {est.log_z, est.log_z_std, "ais"};
}

json report_to_json(const EvaluationReport& r, const std::string& estimator)
{
    json per_class = json::object();
    for (const auto& [label, mean] : r.per_class_mean)
        per_class[std::to_string(label)] = mean;
    return {
        {"log_z", r.log_z},
        {"log_z_std", r.log_z_std},
        {"mean_log_prob", r.mean_log_prob},
        {"per_class_mean", per_class},
        {"cross_class_std", r.cross_class_std},
        {"n_test", r.n_test},
        {"estimator", estimator},
    };
}

TrainRun train_experiment(const ExperimentConfig& c, const DataSplits& data)
{
    if (data.train.empty())
        throw EmptyBatchError("the training split is empty");
    TrainRun run;
    run.trainer = c.trainer;
    run.hyper = resolve_hyper(c, data.train.n_visible());
    const auto& hyper = run.hyper;

    const BinaryBatch stream = select_rows(data.train, order_stream(data.train, {c.order, component_seed(c, "order")}));
    Rng init_rng(component_seed(c, "init"));
    auto initial = init_params<double>(hyper.n_visible, hyper.n_hidden, hyper.init_stddev, init_rng);
    Rng rng(component_seed(c, "train"));

    const bool can_evaluate = !data.test.empty();
    double eval_ms = 0.0;
    const auto start = Clock::now();
    auto on_checkpoint = [&](const Checkpoint<double>& cp) {
        CheckpointRow row;
        row.observed_count = cp.observed_count;
        row.update_procedures = cp.update_procedures;
        row.memory_rows = cp.memory_rows;
        row.live_scalars = cp.live_scalars;
        row.wall_ms = c.record_timing ? ms_since(start) - eval_ms : 0.0;
        if (can_evaluate && c.evaluation.at_checkpoints)
        {
            const auto t0 = Clock::now();
            Rng eval_rng(component_seed(c, "evaluate/" + std::to_string(cp.observed_count)));
            const auto log_z = estimate_log_z(cp.params, c.evaluation, eval_rng);
            const auto report = test_log_prob_report(cp.params, data.test, log_z.value, log_z.std);
            row.log_z = report.log_z;
            row.log_z_std = report.log_z_std;
            row.mean_log_prob = report.mean_log_prob;
            row.cross_class_std = report.cross_class_std;
            eval_ms += ms_since(t0);
        }
        run.checkpoints.push_back(row);
    };
    auto result = stream_train(c.trainer, std::move(initial), stream, hyper, c.checkpoint_every, rng, on_checkpoint,
                               c.memory_capacity);
    run.wall_ms = c.record_timing ? ms_since(start) - eval_ms : 0.0;

    run.params = std::move(result.params);
    run.observed_count = result.observed_count;
    run.update_procedures = result.update_procedures;
    run.peak_live_scalars = result.peak_live_scalars;
    run.final_live_scalars = result.final_live_scalars;
    run.peak_memory_rows = result.memory_rows;  // replay memory never shrinks
    if (can_evaluate)
    {
        Rng eval_rng(component_seed(c, "evaluate/final"));
        const auto log_z = estimate_log_z(run.params, c.evaluation, eval_rng);
        run.final_report = test_log_prob_report(run.params, data.test, log_z.value, log_z.std);
        run.estimator = log_z.estimator;
    }
    return run;
}

std::string checkpoint_csv(const std::vector<TrainRun>& runs, const ExperimentConfig& c)
{
    CsvWriter csv({"observed_count", "trainer", "log_z_estimate", "log_z_std", "mean_log_prob", "cross_class_std",
                   "wall_ms", "update_procedures", "memory_rows", "live_scalars", "config"});
    for (const auto& run : runs)
    {
        const std::string config = config_text(c, run.trainer);
        for (const auto& row : run.checkpoints)
            csv.row({std::to_string(row.observed_count), std::string(to_string(run.trainer)),
                     format_number(row.log_z), format_number(row.log_z_std), format_number(row.mean_log_prob),
                     format_number(row.cross_class_std), format_number(row.wall_ms),
                     std::to_string(row.update_procedures), std::to_string(row.memory_rows),
                     std::to_string(row.live_scalars), config});
    }
    return csv.str();
}

const std::vector<PublishedResult>& published_results()
{
    static const std::vector<PublishedResult> table = {
        {"MNIST", -114.52, -151.67, -167.11, -125.53},
        {"ADULT", -19.64, -18.08, -17.28, -16.26},
        {"Connect4", -16.28, -16.03, -17.64, -22.66},
        {"DNA", -103.14, -111.81, -114.84, -96.74},
        {"Mushrooms", -16.64, -20.38, -17.58, -15.15},
        {"NIPS-0-12", -290.06, -365.03, -339.82, -277.37},
        {"OCR-letters", -47.61, -51.35, -53.85, -43.05},
        {"RCV1", -53.28, -56.34, -79.06, -48.88},
        {"Web", -33.47, -32.58, -35.07, -29.38},
    };
    return table;
}

std::optional<PublishedResult> published_result(const std::string& dataset)
{
    for (const auto& r : published_results())
        if (dataset == r.dataset)
            return r;
    return std::nullopt;
}

std::string compare_csv(const std::vector<TrainRun>& runs, const ExperimentConfig& c)
{
    CsvWriter csv({"trainer", "dataset", "order", "n_visible", "n_hidden", "observed_count", "update_procedures",
                   "estimator", "log_z", "log_z_std", "mean_log_prob", "cross_class_std", "param_scalars",
                   "peak_memory_rows", "peak_replay_scalars", "peak_memory_scalars", "peak_live_scalars",
                   "final_live_scalars", "wall_ms", "reference_mean_log_prob", "reference_offline_mean_log_prob",
                   "reference_note", "config"});
    const auto published = published_result(c.dataset.name);
    for (const auto& run : runs)
    {
        std::string reference, offline, note;
        if (published)
        {
            const double value = run.trainer == TrainerKind::generative_replay ? published->ocdgr
                                 : run.trainer == TrainerKind::replay_unlimited ? published->er_im
                                                                                : published->er_ml;
            reference = format_number(value);
            offline = format_number(published->offline);
            note = "published " + std::string(published->dataset) + " result (" + published_conditions +
                   "); annotation only, not asserted";
        }
        const std::size_t params = run.params.scalar_count();
        const std::size_t replay = run.peak_memory_rows * run.hyper.n_visible;
        const auto& r = run.final_report;
        csv.row({std::string(to_string(run.trainer)), c.dataset.name.empty() ? c.dataset.kind : c.dataset.name,
                 to_string(c.order), std::to_string(run.hyper.n_visible), std::to_string(run.hyper.n_hidden),
                 std::to_string(run.observed_count), std::to_string(run.update_procedures), run.estimator,
                 format_number(r.log_z), format_number(r.log_z_std), format_number(r.mean_log_prob),
                 format_number(r.cross_class_std), std::to_string(params), std::to_string(run.peak_memory_rows),
                 std::to_string(replay), std::to_string(params + replay), std::to_string(run.peak_live_scalars),
                 std::to_string(run.final_live_scalars), format_number(run.wall_ms), reference, offline, note,
                 config_text(c, run.trainer)});
    }
    return csv.str();
}

std::vector<ToyStage> toy_demo(const ExperimentConfig& c)
{
    if (c.dataset.kind != "toy")
        throw ConfigError("toy-demo needs dataset.kind = toy, got '" + c.dataset.kind + "'");
    const auto data = load_data(c, true, false);
    const auto hyper = resolve_hyper(c, data.train.n_visible());
    const BinaryBatch stream = select_rows(data.train, order_stream(data.train, {c.order, component_seed(c, "order")}));
    const BinaryBatch prototypes = toy_prototypes(c.dataset.toy_classes, c.dataset.toy_block);

    Rng init_rng(component_seed(c, "init"));
    OnlineTrainer<double> trainer(c.trainer,
                                  init_params<double>(hyper.n_visible, hyper.n_hidden, hyper.init_stddev, init_rng),
                                  hyper, c.memory_capacity);
    Rng rng(component_seed(c, "train"));

    std::vector<ToyStage> stages;
    const auto width = std::size_t(stream.rows.cols());
    for (std::size_t r = 0; r < stream.size(); ++r)
    {
        trainer.observe(std::span<const std::uint8_t>(stream.rows.row(Eigen::Index(r)).data(), width), rng);
        const bool last = r + 1 == stream.size();
        if (!last && stream.labels[r + 1] == stream.labels[r])
            continue;
        if (last)
            trainer.flush(rng);
        Rng sample_rng(component_seed(c, "toy/stage-" + std::to_string(stages.size())));
        const auto samples = generate_replay(trainer.state().params, c.toy_samples, hyper.n_gibbs_generate, sample_rng);
        stages.push_back({stream.labels[r], trainer.state().observed_count,
                          class_histogram(samples, prototypes, c.knn_k)});
    }
    return stages;
}

// --- command line ---------------------------------------------------------------------

namespace
{

struct Flag
{
    const char* name;
    const char* key;
    const char* help;
    bool is_string;
};

const Flag experiment_flags[] = {
    {"--trainer", "trainer", "ocdgr, er_ml or er_im", true},
    {"--seed", "seed", "master seed", false},
    {"--output-dir", "output_dir", "directory for output files", true},
    {"--dataset", "dataset.kind", "toy, idx, text or cache", true},
    {"--dataset-name", "dataset.name", "name used for published reference values", true},
    {"--train-images", "dataset.train_images", "IDX training images", true},
    {"--train-labels", "dataset.train_labels", "IDX training labels", true},
    {"--test-images", "dataset.test_images", "IDX test images", true},
    {"--test-labels", "dataset.test_labels", "IDX test labels", true},
    {"--train", "dataset.train", "training rows (text or cache)", true},
    {"--test", "dataset.test", "test rows (text or cache)", true},
    {"--binarization", "dataset.binarization", "threshold or stochastic", true},
    {"--n-hidden", "hyper.n_hidden", "hidden units", false},
    {"--epochs", "hyper.n_epochs", "epochs per update procedure", false},
    {"--batch-size", "hyper.batch_size", "observed points per update", false},
    {"--replay-size", "hyper.replay_size", "replayed points per update", false},
    {"--gibbs", "hyper.n_gibbs_generate", "Gibbs steps per generated point", false},
    {"--cd", "hyper.n_cd", "contrastive divergence steps", false},
    {"--learning-rate", "hyper.learning_rate", "learning rate", false},
    {"--order", "order", "sorted_by_class or random", true},
    {"--checkpoint-every", "checkpoint_every", "observations between checkpoints", false},
    {"--memory-capacity", "memory_capacity", "replay rows kept by er_ml", false},
    {"--estimator", "evaluation.estimator", "exact, ais or auto", true},
    {"--ais-schedule", "evaluation.schedule", "uniform or reference", true},
    {"--betas", "evaluation.n_betas", "AIS temperatures (uniform schedule)", false},
    {"--chains", "evaluation.n_chains", "AIS chains (uniform schedule)", false},
    {"--toy-samples", "toy_samples", "generated samples per toy stage", false},
    {"--knn-k", "knn_k", "neighbours for toy classification", false},
};

struct ExperimentOptions
{
    std::string config_file;
    std::vector<std::string> sets;
    std::map<std::string, std::string> flags;
    bool no_timing = false;
    bool skip_checkpoint_eval = false;

    void attach(CLI::App* cmd)
    {
        cmd->add_option("-c,--config", config_file, "JSON config file")->check(CLI::ExistingFile);
        cmd->add_option("--set", sets, "override a config key, e.g. --set hyper.n_hidden=25");
        for (const auto& f : experiment_flags)
            cmd->add_option_function<std::string>(
                f.name, [this, &f](const std::string& v) { flags[f.name] = v; }, f.help);
        cmd->add_flag("--no-timing", no_timing, "write wall_ms = 0 so outputs are byte-reproducible");
        cmd->add_flag("--final-eval-only", skip_checkpoint_eval, "skip evaluation at checkpoints");
    }

    ExperimentConfig resolve(json base) const
    {
        if (!config_file.empty())
            base.merge_patch(read_config_file(config_file));
        for (const auto& s : sets)
            apply_override(base, s);
        for (const auto& f : experiment_flags)
            if (auto it = flags.find(f.name); it != flags.end())
            {
                if (f.is_string)
                    set_path(base, f.key, it->second);
                else
                    apply_override(base, std::string(f.key) + "=" + it->second);
            }
        if (no_timing)
            base["record_timing"] = false;
        if (skip_checkpoint_eval)
            set_path(base, "evaluation.at_checkpoints", false);
        return config_from_json(base);
    }
};

int cmd_train(const ExperimentConfig& c, std::ostream& out)
{
    const auto data = load_data(c);
    const auto run = train_experiment(c, data);
    const std::filesystem::path dir = c.output_dir;
    std::filesystem::create_directories(dir);

    ModelFile model{run.params, run.hyper, run.observed_count, config_text(c, c.trainer)};
    save_model(model, dir / "model.rbm");
    write_file(dir / "checkpoints.csv", checkpoint_csv({run}, c));
    if (!data.test.empty())
    {
        json report = report_to_json(run.final_report, run.estimator);
        report["config"] = to_json(c);
        write_file(dir / "report.json", report.dump(2) + "\n");
        out << "trainer " << to_string(c.trainer) << ": " << run.observed_count << " points, "
            << run.update_procedures << " updates, mean test log-prob " << run.final_report.mean_log_prob
            << " nats (" << run.estimator << " log Z)\n";
    }
    out << "wrote " << (dir / "model.rbm").string() << " and " << (dir / "checkpoints.csv").string() << "\n";
    return exit_ok;
}

int cmd_compare(const ExperimentConfig& c, const std::vector<std::string>& trainers, std::ostream& out)
{
    const auto data = load_data(c);
    std::filesystem::create_directories(c.output_dir);
    std::vector<TrainRun> runs;
    for (const auto& name : trainers)
    {
        auto cfg = c;
        cfg.trainer = parse_trainer_kind(name);
        runs.push_back(train_experiment(cfg, data));
        save_model({runs.back().params, runs.back().hyper, runs.back().observed_count, config_text(c, cfg.trainer)},
                   std::filesystem::path(c.output_dir) / ("model_" + name + ".rbm"));
        out << name << ": mean test log-prob " << runs.back().final_report.mean_log_prob << " nats, peak memory rows "
            << runs.back().peak_memory_rows << "\n";
    }
    const std::filesystem::path dir = c.output_dir;
    write_file(dir / "compare.csv", compare_csv(runs, c));
    write_file(dir / "compare_checkpoints.csv", checkpoint_csv(runs, c));
    out << "wrote " << (dir / "compare.csv").string() << "\n";
    return exit_ok;
}

int cmd_toy_demo(const ExperimentConfig& c, std::ostream& out)
{
    const auto stages = toy_demo(c);
    CsvWriter csv({"stage", "last_class", "observed_count", "class", "count", "fraction", "trainer", "config"});
    const std::string config = config_text(c, c.trainer);
    for (std::size_t s = 0; s < stages.size(); ++s)
    {
        out << "after class " << stages[s].last_class << ":";
        for (std::size_t k = 0; k < c.dataset.toy_classes; ++k)
        {
            const auto it = stages[s].histogram.find(int(k));
            const std::size_t n = it == stages[s].histogram.end() ? 0 : it->second;
            out << ' ' << n;
            csv.row({std::to_string(s), std::to_string(stages[s].last_class), std::to_string(stages[s].observed_count),
                     std::to_string(k), std::to_string(n), format_number(double(n) / double(c.toy_samples)),
                     std::string(to_string(c.trainer)), config});
        }
        out << '\n';
    }
    const auto path = std::filesystem::path(c.output_dir) / "toy_histogram.csv";
    write_file(path, csv.str());
    out << "wrote " << path.string() << "\n";
    return exit_ok;
}

json model_config(const ModelFile& model)
{
    json base = default_config_json();
    const json embedded = json::parse(model.metadata, nullptr, false);
    if (embedded.is_object())
        base.merge_patch(embedded);
    return base;
}

int cmd_evaluate(const std::string& model_path, const ExperimentOptions& opts, const std::string& output,
                 std::ostream& out)
{
    const auto model = load_model(model_path);
    const auto c = opts.resolve(model_config(model));
    const auto data = load_data(c, false, true);
    if (data.test.empty())
        throw ConfigError("no test split configured; set --test or --test-images");

    Rng rng(component_seed(c, "evaluate/final"));
    const auto log_z = estimate_log_z(model.params, c.evaluation, rng);
    const auto report = test_log_prob_report(model.params, data.test, log_z.value, log_z.std);
    json j = report_to_json(report, log_z.estimator);
    j["model"] = model_path;
    j["config"] = to_json(c);
    const std::string text = j.dump(2) + "\n";
    out << text;
    write_file(output.empty() ? std::filesystem::path(c.output_dir) / "evaluation.json" : std::filesystem::path(output),
               text);
    return exit_ok;
}

int cmd_generate(const std::string& model_path, std::size_t n, std::optional<std::size_t> gibbs, std::uint64_t seed,
                 const std::string& output, std::ostream& out)
{
    if (n == 0)
        throw ConfigError("--n must be >= 1");
    const auto model = load_model(model_path);
    const std::size_t steps = gibbs.value_or(model.hyper.n_gibbs_generate);
    Rng rng(derive_seed(seed, "generate"));
    const auto samples = generate_replay(model.params, n, steps, rng);

    json header = {{"model", model_path}, {"n", n}, {"n_gibbs", steps}, {"seed", seed}};
    const json embedded = json::parse(model.metadata, nullptr, false);
    if (embedded.is_object())
        header["config"] = embedded;
    const std::string comment = "generated samples\n" + header.dump();
    if (output.empty() || output == "-")
    {
        out << "# generated samples\n# " << header.dump() << "\n";
        for (Eigen::Index r = 0; r < samples.rows.rows(); ++r)
        {
            for (Eigen::Index i = 0; i < samples.rows.cols(); ++i)
                out << (i ? " " : "") << int(samples.rows(r, i));
            out << '\n';
        }
    }
    else
    {
        write_binary_text(samples, output, comment);
    }
    return exit_ok;
}

int exit_code_for(const std::exception& e)
{
    if (dynamic_cast<const InfeasibleSizeError*>(&e))
        return exit_infeasible;
    if (dynamic_cast<const FormatError*>(&e) || dynamic_cast<const EmptyBatchError*>(&e))
        return exit_format;
    if (dynamic_cast<const Error*>(&e))
        return exit_usage;
    return exit_failure;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Online RBM training with generative or experience replay"};
    app.name("ocdgr");
    app.require_subcommand(1);

    ExperimentOptions train_opts, compare_opts, toy_opts, eval_opts;
    auto* train = app.add_subcommand("train", "train one model on a stream and record checkpoint metrics");
    train_opts.attach(train);

    auto* compare = app.add_subcommand("compare", "train ocdgr, er_ml and er_im on the same stream");
    compare_opts.attach(compare);
    std::vector<std::string> trainers{"ocdgr", "er_ml", "er_im"};
    compare->add_option("--trainers", trainers, "subset of trainers to run")->delimiter(',');

    auto* toy = app.add_subcommand("toy-demo", "class-by-class toy stream with k-NN histograms of generated samples");
    toy_opts.attach(toy);

    auto* evaluate = app.add_subcommand("evaluate", "test-set log-probabilities of a saved model");
    std::string model_path, eval_output;
    evaluate->add_option("-m,--model", model_path, "model file")->required();
    evaluate->add_option("-o,--output", eval_output, "report path (default <output_dir>/evaluation.json)");
    eval_opts.attach(evaluate);

    auto* generate = app.add_subcommand("generate", "draw samples from a saved model");
    std::string gen_model, gen_output;
    std::size_t gen_n = 1000;
    std::optional<std::size_t> gen_gibbs;
    std::uint64_t gen_seed = 1;
    generate->add_option("-m,--model", gen_model, "model file")->required();
    generate->add_option("-n,--n", gen_n, "number of samples");
    generate->add_option("--gibbs", gen_gibbs, "Gibbs steps (default from the model file)");
    generate->add_option("--seed", gen_seed, "seed");
    generate->add_option("-o,--output", gen_output, "output file, '-' for stdout");

    try
    {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    }
    catch (const CLI::ParseError& e)
    {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_ok : exit_usage;
    }

    try
    {
        if (train->parsed())
            return cmd_train(train_opts.resolve(default_config_json()), out);
        if (compare->parsed())
            return cmd_compare(compare_opts.resolve(default_config_json()), trainers, out);
        if (toy->parsed())
        {
            json base = default_config_json();
            base["order"] = "sorted_by_class";
            base["hyper"]["n_hidden"] = 50;
            return cmd_toy_demo(toy_opts.resolve(base), out);
        }
        if (evaluate->parsed())
            return cmd_evaluate(model_path, eval_opts, eval_output, out);
        if (generate->parsed())
            return cmd_generate(gen_model, gen_n, gen_gibbs, gen_seed, gen_output, out);
    }
    catch (const std::exception& e)
    {
        err << "ocdgr: error: " << e.what() << "\n";
        if (dynamic_cast<const InfeasibleSizeError*>(&e))
            err << "ocdgr: hint: use --estimator ais\n";
        return exit_code_for(e);
    }
    return exit_usage;
}

}  // namespace ocdgr::cli
