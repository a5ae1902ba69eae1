#include "cli/config.hpp"

#include <fstream>
#include <set>

#include "ocdgr/errors.hpp"
#include "ocdgr/random.hpp"

namespace ocdgr::cli
{

namespace
{

/// Reads fields out of one JSON object and rejects keys nobody asked for.
class ObjectReader
{
public:
    ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where))
    {
        if (!j_.is_object())
            throw ConfigError(where_ + ": expected a JSON object");
    }

    template <typename T>
    void get(const char* key, T& out)
    {
        seen_.insert(key);
        const auto it = j_.find(key);
        if (it == j_.end() || it->is_null())
            return;
        try
        {
            out = it->get<T>();
        }
        catch (const json::exception&)
        {
            throw ConfigError(where_ + "." + key + ": wrong type (" + it->dump() + ")");
        }
    }

    template <typename T>
    void get(const char* key, std::optional<T>& out)
    {
        seen_.insert(key);
        const auto it = j_.find(key);
        if (it == j_.end() || it->is_null())
        {
            out.reset();
            return;
        }
        T value{};
        get(key, value);
        out = value;
    }

    const json& child(const char* key)
    {
        seen_.insert(key);
        static const json empty = json::object();
        const auto it = j_.find(key);
        return it == j_.end() ? empty : *it;
    }

    void finish() const
    {
        for (const auto& [key, value] : j_.items())
            if (!seen_.count(key))
                throw ConfigError(where_ + ": unknown key '" + key + "'");
    }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

const char* dataset_path_keys[] = {"train_images", "train_labels", "test_images", "test_labels", "train", "test"};

}  // namespace

AisSchedule EvaluationSpec::ais_schedule() const
{
    if (schedule == "reference")
        return AisSchedule::reference_ladder();
    if (schedule == "uniform")
        return AisSchedule::uniform(n_betas, n_chains);
    throw ConfigError("evaluation.schedule must be 'uniform' or 'reference', got '" + schedule + "'");
}

json default_config_json() { return to_json(ExperimentConfig{}); }

json to_json(const ExperimentConfig& c)
{
    const auto& d = c.dataset;
    const auto& h = c.hyper;
    const auto& e = c.evaluation;
    json j;
    j["dataset"] = {
        {"kind", d.kind},
        {"name", d.name},
        {"train_images", d.train_images},
        {"train_labels", d.train_labels},
        {"test_images", d.test_images},
        {"test_labels", d.test_labels},
        {"train", d.train},
        {"test", d.test},
        {"binarization", to_string(d.binarization)},
        {"toy_per_class", d.toy_per_class},
        {"toy_test_per_class", d.toy_test_per_class},
        {"toy_classes", d.toy_classes},
        {"toy_block", d.toy_block},
        {"toy_p", d.toy_p},
    };
    j["trainer"] = std::string(to_string(c.trainer));
    j["hyper"] = {
        {"n_visible", h.n_visible},
        {"n_hidden", h.n_hidden},
        {"n_gibbs_generate", h.n_gibbs_generate},
        {"n_cd", h.n_cd},
        {"n_epochs", h.n_epochs},
        {"batch_size", h.batch_size},
        {"replay_size", h.replay_size},
        {"learning_rate", h.learning_rate},
        {"momentum", h.momentum},
        {"momentum_warmup", h.momentum_warmup},
        {"momentum_warmup_epochs", h.momentum_warmup_epochs},
        {"weight_decay", h.weight_decay},
        {"init_stddev", h.init_stddev},
        {"decay_biases", h.decay_biases},
    };
    j["order"] = to_string(c.order);
    j["checkpoint_every"] = c.checkpoint_every;
    j["evaluation"] = {
        {"estimator", e.estimator},
        {"schedule", e.schedule},
        {"n_betas", e.n_betas},
        {"n_chains", e.n_chains},
        {"at_checkpoints", e.at_checkpoints},
    };
    j["memory_capacity"] = c.memory_capacity ? json(*c.memory_capacity) : json(nullptr);
    j["output_dir"] = c.output_dir;
    j["seed"] = c.seed;
    j["record_timing"] = c.record_timing;
    j["toy_samples"] = c.toy_samples;
    j["knn_k"] = c.knn_k;
    return j;
}

ExperimentConfig config_from_json(const json& j)
{
    ExperimentConfig c;
    ObjectReader top(j, "config");

    {
        auto& d = c.dataset;
        ObjectReader r(top.child("dataset"), "dataset");
        r.get("kind", d.kind);
        r.get("name", d.name);
        r.get("train_images", d.train_images);
        r.get("train_labels", d.train_labels);
        r.get("test_images", d.test_images);
        r.get("test_labels", d.test_labels);
        r.get("train", d.train);
        r.get("test", d.test);
        std::string bin = to_string(d.binarization);
        r.get("binarization", bin);
        d.binarization = parse_binarization(bin);
        r.get("toy_per_class", d.toy_per_class);
        r.get("toy_test_per_class", d.toy_test_per_class);
        r.get("toy_classes", d.toy_classes);
        r.get("toy_block", d.toy_block);
        r.get("toy_p", d.toy_p);
        r.finish();
        if (d.kind != "toy" && d.kind != "idx" && d.kind != "text" && d.kind != "cache")
            throw ConfigError("dataset.kind must be one of toy, idx, text, cache; got '" + d.kind + "'");
    }

    std::string trainer(to_string(c.trainer));
    top.get("trainer", trainer);
    try
    {
        c.trainer = parse_trainer_kind(trainer);
    }
    catch (const Error& e)
    {
        throw ConfigError(e.what());
    }

    {
        auto& h = c.hyper;
        ObjectReader r(top.child("hyper"), "hyper");
        r.get("n_visible", h.n_visible);
        r.get("n_hidden", h.n_hidden);
        r.get("n_gibbs_generate", h.n_gibbs_generate);
        r.get("n_cd", h.n_cd);
        r.get("n_epochs", h.n_epochs);
        r.get("batch_size", h.batch_size);
        r.get("replay_size", h.replay_size);
        r.get("learning_rate", h.learning_rate);
        r.get("momentum", h.momentum);
        r.get("momentum_warmup", h.momentum_warmup);
        r.get("momentum_warmup_epochs", h.momentum_warmup_epochs);
        r.get("weight_decay", h.weight_decay);
        r.get("init_stddev", h.init_stddev);
        r.get("decay_biases", h.decay_biases);
        r.finish();
    }

    std::string order = to_string(c.order);
    top.get("order", order);
    c.order = parse_stream_mode(order);
    top.get("checkpoint_every", c.checkpoint_every);
    if (c.checkpoint_every == 0)
        throw ConfigError("checkpoint_every must be >= 1");

    {
        auto& e = c.evaluation;
        ObjectReader r(top.child("evaluation"), "evaluation");
        r.get("estimator", e.estimator);
        r.get("schedule", e.schedule);
        r.get("n_betas", e.n_betas);
        r.get("n_chains", e.n_chains);
        r.get("at_checkpoints", e.at_checkpoints);
        r.finish();
        if (e.estimator != "exact" && e.estimator != "ais" && e.estimator != "auto")
            throw ConfigError("evaluation.estimator must be exact, ais or auto; got '" + e.estimator + "'");
        e.ais_schedule().validate();
    }

    top.get("memory_capacity", c.memory_capacity);
    if (c.memory_capacity && *c.memory_capacity == 0)
        throw ConfigError("memory_capacity must be >= 1 or null");
    top.get("output_dir", c.output_dir);
    top.get("seed", c.seed);
    top.get("record_timing", c.record_timing);
    top.get("toy_samples", c.toy_samples);
    top.get("knn_k", c.knn_k);
    top.finish();
    return c;
}

json read_config_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open config file " + path.string());
    json j;
    try
    {
        j = json::parse(in);
    }
    catch (const json::parse_error& e)
    {
        throw ConfigError(path.string() + ": invalid JSON at byte " + std::to_string(e.byte) + ": " + e.what());
    }
    if (!j.is_object())
        throw ConfigError(path.string() + ": expected a JSON object");

    const auto base = path.parent_path();
    if (auto it = j.find("dataset"); it != j.end() && it->is_object())
        for (const char* key : dataset_path_keys)
            if (auto p = it->find(key); p != it->end() && p->is_string() && !p->get<std::string>().empty())
            {
                const std::filesystem::path value = p->get<std::string>();
                if (value.is_relative())
                    *p = (base / value).lexically_normal().string();
            }
    return j;
}

void set_path(json& config, const std::string& dotted, json value)
{
    json* node = &config;
    std::size_t start = 0;
    while (true)
    {
        const auto dot = dotted.find('.', start);
        const std::string key = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty())
            throw ConfigError("malformed config key '" + dotted + "'");
        if (!node->is_object())
            throw ConfigError("config key '" + dotted + "' descends into a non-object");
        if (dot == std::string::npos)
        {
            (*node)[key] = std::move(value);
            return;
        }
        node = &(*node)[key];
        if (node->is_null())
            *node = json::object();
        start = dot + 1;
    }
}

void apply_override(json& config, const std::string& assignment)
{
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("override '" + assignment + "' is not of the form key=value");
    const std::string text = assignment.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded())
        value = text;
    set_path(config, assignment.substr(0, eq), std::move(value));
}

std::uint64_t component_seed(const ExperimentConfig& config, const std::string& component)
{
    return derive_seed(config.seed, component);
}

namespace
{

BinaryBatch load_split(const ExperimentConfig& c, bool train)
{
    const auto& d = c.dataset;
    const std::string split = train ? "train" : "test";
    if (!train && d.kind != "toy" && (d.kind == "idx" ? d.test_images : d.test).empty())
        return {};
    if (d.kind == "toy")
    {
        Rng rng(component_seed(c, "data/toy-" + split));
        return toy_generate(train ? d.toy_per_class : d.toy_test_per_class, rng, d.toy_classes, d.toy_block, d.toy_p);
    }

    auto require = [&](const std::string& value, const std::string& key) {
        if (value.empty())
            throw ConfigError("dataset." + key + " is required for dataset kind '" + d.kind + "'");
        return std::filesystem::path(value);
    };
    if (d.kind == "idx")
    {
        const auto images = require(train ? d.train_images : d.test_images, split + "_images");
        const std::string labels = train ? d.train_labels : d.test_labels;
        const auto raw = load_idx(images, labels);
        Rng rng(component_seed(c, "data/binarize-" + split));
        return binarize(raw, d.binarization, &rng);
    }
    const auto path = require(train ? d.train : d.test, split);
    return d.kind == "text" ? load_binary_text(path) : load_dataset_cache(path);
}

}  // namespace

DataSplits load_data(const ExperimentConfig& config, bool want_train, bool want_test)
{
    DataSplits s;
    if (want_train)
        s.train = load_split(config, true);
    if (want_test)
        s.test = load_split(config, false);
    if (want_train && want_test && s.train.n_visible() != s.test.n_visible())
        throw DimensionError("train and test rows differ in width (" + std::to_string(s.train.n_visible()) + " vs " +
                             std::to_string(s.test.n_visible()) + ")");
    return s;
}

}  // namespace ocdgr::cli
