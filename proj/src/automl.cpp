#include "evoflow/automl.hpp"

#include "evoflow/csv.hpp"
#include "evoflow/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <regex>
#include <set>

namespace evoflow::automl {

namespace {

const std::vector<std::string> kClassificationMetrics{"accuracy", "mcc", "f1", "precision", "recall", "auroc"};
const std::vector<std::string> kRegressionMetrics{"spearman", "mse"};
const std::set<std::string> kKnownMetrics{"accuracy", "mcc", "f1", "precision", "recall", "auroc", "spearman", "mse",
                                          "loss"};
const std::set<std::string> kClassificationKinds{"single_label_classification", "multi_label_classification",
                                                 "residue_single_label_classification"};
const std::set<std::string> kRegressionKinds{"regression", "residue_regression"};
const std::set<std::string> kTrainingMethods{"full", "freeze", "lora", "dora", "adalora", "qlora", "ia3",
                                             "ses-adapter"};
const std::set<std::string> kPoolingMethods{"mean", "light_attention", "attention1d"};

const std::vector<std::pair<std::string, int>>& backbones()
{
    static const std::vector<std::pair<std::string, int>> table{
        {"ESM2-8M", 320},        {"ESM2-35M", 480},          {"ESM2-150M", 640},     {"ESM2-650M", 1280},
        {"ESM2-3B", 2560},       {"ESM-1b", 1280},           {"ESM-1v", 1280},       {"ProtBert", 1024},
        {"ProtBert-BFD", 1024},  {"ProtT5-xl-uniref50", 1024}, {"ProtT5-xl-bfd", 1024}, {"Ankh-base", 768},
        {"Ankh-large", 1536},    {"SaProt-35M", 480},        {"SaProt-650M", 1280},  {"ProSST-2048", 768},
        {"IgBert", 1024},        {"Prime-690M", 1280},
    };
    return table;
}

std::string lower(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

bool token_char(char c)
{
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
}

// Case-insensitive whole-token search.
bool mentions(std::string_view haystack_lower, std::string_view needle)
{
    const std::string n = lower(needle);
    for (auto pos = haystack_lower.find(n); pos != std::string_view::npos; pos = haystack_lower.find(n, pos + 1)) {
        const bool left = pos == 0 || !token_char(haystack_lower[pos - 1]);
        const std::size_t end = pos + n.size();
        const bool right = end >= haystack_lower.size() || !token_char(haystack_lower[end]);
        if (left && right) return true;
    }
    return false;
}

std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',' || c == ' ') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

double stable_softmax_into(const Eigen::VectorXd& logits, Eigen::VectorXd& out)
{
    const double m = logits.maxCoeff();
    out = (logits.array() - m).exp();
    const double z = out.sum();
    out /= z;
    return z;
}

} // namespace

bool is_lora_family(std::string_view method)
{
    const auto m = normalize_training_method(method);
    return m == "lora" || m == "dora" || m == "adalora" || m == "qlora";
}

bool is_classification(std::string_view problem_type)
{
    return kClassificationKinds.count(std::string(problem_type)) > 0;
}

bool is_regression(std::string_view problem_type)
{
    return kRegressionKinds.count(std::string(problem_type)) > 0;
}

bool metric_maximized(std::string_view metric)
{
    return metric != "loss" && metric != "mse";
}

std::string normalize_training_method(std::string_view method)
{
    std::string m = lower(method);
    if (m.rfind("plm-", 0) == 0) m = m.substr(4);
    return m;
}

void set_training_method(TrainingConfig& config, std::string_view method)
{
    config.training_method = normalize_training_method(method);
    if (is_lora_family(config.training_method)) {
        if (!config.lora_r) config.lora_r = 8;
        if (!config.lora_alpha) config.lora_alpha = 32;
        if (!config.lora_dropout) config.lora_dropout = 0.1;
        if (!config.lora_target_modules) config.lora_target_modules = std::vector<std::string>{"query", "key", "value"};
    } else {
        config.lora_r.reset();
        config.lora_alpha.reset();
        config.lora_dropout.reset();
        config.lora_target_modules.reset();
    }
    if (config.training_method == "ia3") {
        if (!config.feedforward_modules) config.feedforward_modules = "w0";
    } else {
        config.feedforward_modules.reset();
    }
}

Json to_json(const TrainingConfig& c)
{
    Json j = c.extras.is_object() ? c.extras : Json::object();
    auto opt = [&](const char* key, const auto& value) {
        if (value) j[key] = *value;
    };
    opt("dataset", c.dataset);
    opt("dataset_config", c.dataset_config);
    j["problem_type"] = c.problem_type;
    opt("num_labels", c.num_labels);
    j["metrics"] = c.metrics;
    j["sequence_column_name"] = c.sequence_column_name;
    j["label_column_name"] = c.label_column_name;
    opt("pdb_type", c.pdb_type);
    opt("pdb_dir", c.pdb_dir);
    opt("train_file", c.train_file);
    opt("valid_file", c.valid_file);
    opt("test_file", c.test_file);
    j["quick_test"] = c.quick_test;
    opt("max_train_samples", c.max_train_samples);
    opt("max_valid_samples", c.max_valid_samples);
    opt("max_test_samples", c.max_test_samples);

    j["plm_model"] = c.plm_model;
    opt("hidden_size", c.hidden_size);
    j["num_attention_head"] = c.num_attention_head;
    j["pooling_method"] = c.pooling_method;
    j["attention_probs_dropout"] = c.attention_probs_dropout;
    j["pooling_dropout"] = c.pooling_dropout;
    opt("gnn_config", c.gnn_config);
    opt("model_path", c.model_path);
    j["c_alpha_max_neighbors"] = c.c_alpha_max_neighbors;

    j["training_method"] = is_lora_family(c.training_method) ? "plm-" + c.training_method : c.training_method;
    j["learning_rate"] = c.learning_rate;
    j["num_epochs"] = c.num_epochs;
    opt("batch_size", c.batch_size);
    opt("batch_token", c.batch_token);
    j["gradient_accumulation_steps"] = c.gradient_accumulation_steps;
    j["max_seq_len"] = c.max_seq_len;
    j["max_grad_norm"] = c.max_grad_norm;
    j["monitor"] = c.monitor;
    j["monitor_strategy"] = c.monitor_strategy;
    j["patience"] = c.patience;
    opt("scheduler", c.scheduler);
    j["warmup_steps"] = c.warmup_steps;
    j["seed"] = c.seed;
    j["num_workers"] = c.num_workers;
    j["structure_seq"] = c.structure_seq;

    opt("lora_r", c.lora_r);
    opt("lora_alpha", c.lora_alpha);
    opt("lora_dropout", c.lora_dropout);
    opt("lora_target_modules", c.lora_target_modules);
    opt("feedforward_modules", c.feedforward_modules);

    opt("initial_model_path", c.initial_model_path);
    j["output_root"] = c.output_root;
    j["output_dir"] = c.output_dir;
    opt("output_model_name", c.output_model_name);
    j["wandb"] = c.wandb;
    opt("wandb_project", c.wandb_project);
    opt("wandb_entity", c.wandb_entity);
    opt("run_name", c.run_name);
    return j;
}

TrainingConfig config_from_json(const Json& input)
{
    if (!input.is_object()) throw Error(Errc::malformed_schema, "training config must be a JSON object");
    static const std::map<std::string, std::string> aliases{{"monitored_metrics", "monitor"},
                                                            {"monitored_strategy", "monitor_strategy"},
                                                            {"wandb_enabled", "wandb"},
                                                            {"dataset_custom", "dataset"},
                                                            {"project", "wandb_project"}};
    Json j = Json::object();
    for (const auto& [k, v] : input.items()) {
        auto a = aliases.find(k);
        const std::string key = a == aliases.end() ? k : a->second;
        if (a == aliases.end() || !j.contains(key)) j[key] = v;
    }

    TrainingConfig c;
    std::set<std::string> consumed;
    auto wrong = [](const std::string& key, const char* want) {
        return Error(Errc::malformed_schema, "config field '" + key + "' must be " + want);
    };
    auto str = [&](const char* key, auto& field) {
        consumed.insert(key);
        if (!j.contains(key) || j[key].is_null()) return;
        if (!j[key].is_string()) throw wrong(key, "a string");
        field = j[key].get<std::string>();
    };
    auto integer = [&](const char* key, auto& field) {
        consumed.insert(key);
        if (!j.contains(key) || j[key].is_null()) return;
        const Json& v = j[key];
        if (v.is_number_integer())
            field = v.get<int>();
        else if (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>())
            field = static_cast<int>(v.get<double>());
        else
            throw wrong(key, "an integer");
    };
    auto real = [&](const char* key, auto& field) {
        consumed.insert(key);
        if (!j.contains(key) || j[key].is_null()) return;
        if (!j[key].is_number()) throw wrong(key, "a number");
        field = j[key].get<double>();
    };
    auto boolean = [&](const char* key, bool& field) {
        consumed.insert(key);
        if (!j.contains(key) || j[key].is_null()) return;
        if (!j[key].is_boolean()) throw wrong(key, "a boolean");
        field = j[key].get<bool>();
    };
    auto string_list = [&](const char* key) -> std::optional<std::vector<std::string>> {
        consumed.insert(key);
        if (!j.contains(key) || j[key].is_null()) return std::nullopt;
        const Json& v = j[key];
        if (v.is_string()) return split_list(v.get<std::string>());
        if (v.is_array() && std::all_of(v.begin(), v.end(), [](const Json& e) { return e.is_string(); }))
            return v.get<std::vector<std::string>>();
        throw wrong(key, "a string list");
    };

    str("dataset", c.dataset);
    str("dataset_config", c.dataset_config);
    str("problem_type", c.problem_type);
    integer("num_labels", c.num_labels);
    if (auto m = string_list("metrics")) c.metrics = *m;
    str("sequence_column_name", c.sequence_column_name);
    str("label_column_name", c.label_column_name);
    str("pdb_type", c.pdb_type);
    str("pdb_dir", c.pdb_dir);
    str("train_file", c.train_file);
    str("valid_file", c.valid_file);
    str("test_file", c.test_file);
    boolean("quick_test", c.quick_test);
    integer("max_train_samples", c.max_train_samples);
    integer("max_valid_samples", c.max_valid_samples);
    integer("max_test_samples", c.max_test_samples);

    str("plm_model", c.plm_model);
    integer("hidden_size", c.hidden_size);
    integer("num_attention_head", c.num_attention_head);
    str("pooling_method", c.pooling_method);
    real("attention_probs_dropout", c.attention_probs_dropout);
    real("pooling_dropout", c.pooling_dropout);
    str("gnn_config", c.gnn_config);
    str("model_path", c.model_path);
    integer("c_alpha_max_neighbors", c.c_alpha_max_neighbors);

    std::string method = c.training_method;
    str("training_method", method);
    c.training_method = normalize_training_method(method);
    real("learning_rate", c.learning_rate);
    integer("num_epochs", c.num_epochs);
    integer("batch_size", c.batch_size);
    integer("batch_token", c.batch_token);
    integer("gradient_accumulation_steps", c.gradient_accumulation_steps);
    integer("max_seq_len", c.max_seq_len);
    real("max_grad_norm", c.max_grad_norm);
    str("monitor", c.monitor);
    str("monitor_strategy", c.monitor_strategy);
    integer("patience", c.patience);
    str("scheduler", c.scheduler);
    integer("warmup_steps", c.warmup_steps);
    integer("seed", c.seed);
    integer("num_workers", c.num_workers);
    str("structure_seq", c.structure_seq);

    integer("lora_r", c.lora_r);
    real("lora_alpha", c.lora_alpha);
    real("lora_dropout", c.lora_dropout);
    c.lora_target_modules = string_list("lora_target_modules");
    str("feedforward_modules", c.feedforward_modules);

    str("initial_model_path", c.initial_model_path);
    str("output_root", c.output_root);
    str("output_dir", c.output_dir);
    str("output_model_name", c.output_model_name);
    boolean("wandb", c.wandb);
    str("wandb_project", c.wandb_project);
    str("wandb_entity", c.wandb_entity);
    str("run_name", c.run_name);

    for (const auto& [k, v] : j.items())
        if (!consumed.count(k)) c.extras[k] = v;
    return c;
}

std::vector<ConfigDiagnostic> validate_config(const TrainingConfig& c)
{
    std::vector<ConfigDiagnostic> out;
    auto diag = [&](std::string field, std::string message) { out.push_back({std::move(field), std::move(message)}); };

    const bool cls = is_classification(c.problem_type);
    const bool reg = is_regression(c.problem_type);
    if (!cls && !reg) diag("problem_type", "unknown problem type '" + c.problem_type + "'");
    if (cls && (!c.num_labels || *c.num_labels < 2)) diag("num_labels", "classification needs num_labels >= 2");
    if (reg && (!c.num_labels || *c.num_labels != 1)) diag("num_labels", "regression needs num_labels = 1");

    if (c.metrics.empty()) diag("metrics", "metrics list is empty");
    for (const auto& m : c.metrics)
        if (!kKnownMetrics.count(m)) diag("metrics", "unknown metric '" + m + "'");
    if (c.monitor != "loss" && std::find(c.metrics.begin(), c.metrics.end(), c.monitor) == c.metrics.end())
        diag("monitor", "monitored metric '" + c.monitor + "' is not in metrics");
    if (c.monitor_strategy != "min" && c.monitor_strategy != "max")
        diag("monitor_strategy", "must be min or max");
    else if ((c.monitor_strategy == "max") != metric_maximized(c.monitor))
        diag("monitor_strategy", "'" + c.monitor_strategy + "' contradicts the direction of '" + c.monitor + "'");

    if (c.sequence_column_name.empty()) diag("sequence_column_name", "must not be empty");
    if (c.label_column_name.empty()) diag("label_column_name", "must not be empty");
    if (c.plm_model.empty()) diag("plm_model", "must not be empty");
    if (c.hidden_size && *c.hidden_size < 1) diag("hidden_size", "must be positive");
    if (c.num_attention_head < 1) diag("num_attention_head", "must be positive");
    if (!kPoolingMethods.count(c.pooling_method)) diag("pooling_method", "unknown method '" + c.pooling_method + "'");
    for (auto [name, v] : {std::pair<const char*, double>{"attention_probs_dropout", c.attention_probs_dropout},
                           {"pooling_dropout", c.pooling_dropout}})
        if (!(v >= 0.0 && v < 1.0)) diag(name, "dropout must lie in [0, 1)");
    if (c.c_alpha_max_neighbors < 1) diag("c_alpha_max_neighbors", "must be positive");

    if (!kTrainingMethods.count(c.training_method))
        diag("training_method", "unknown method '" + c.training_method + "'");
    if (!(c.learning_rate > 0.0) || !std::isfinite(c.learning_rate)) diag("learning_rate", "must be > 0");
    if (c.num_epochs < 1) diag("num_epochs", "must be at least 1");
    if (c.batch_size && *c.batch_size < 1) diag("batch_size", "must be positive");
    if (c.batch_token && *c.batch_token < 1) diag("batch_token", "must be positive");
    if (c.gradient_accumulation_steps < 1) diag("gradient_accumulation_steps", "must be at least 1");
    if (c.max_seq_len != -1 && c.max_seq_len < 1) diag("max_seq_len", "must be -1 or positive");
    if (c.max_grad_norm != -1.0 && !(c.max_grad_norm > 0.0)) diag("max_grad_norm", "must be -1 or positive");
    if (c.patience < 0) diag("patience", "must be >= 0");
    if (c.warmup_steps < 0) diag("warmup_steps", "must be >= 0");
    if (c.num_workers < 0) diag("num_workers", "must be >= 0");
    if (c.training_method == "ses-adapter" && c.structure_seq.empty())
        diag("structure_seq", "ses-adapter needs structural modalities");

    const bool lora = is_lora_family(c.training_method);
    const bool any_lora = c.lora_r || c.lora_alpha || c.lora_dropout || c.lora_target_modules;
    const bool all_lora = c.lora_r && c.lora_alpha && c.lora_dropout && c.lora_target_modules;
    if (lora && !all_lora) diag("lora_r", "lora-family training needs lora_r, lora_alpha, lora_dropout, lora_target_modules");
    if (!lora && any_lora) diag("lora_r", "lora fields are set but training_method is '" + c.training_method + "'");
    if (c.lora_r && *c.lora_r < 1) diag("lora_r", "must be positive");
    if (c.lora_alpha && !(*c.lora_alpha > 0.0)) diag("lora_alpha", "must be positive");
    if (c.lora_dropout && !(*c.lora_dropout >= 0.0 && *c.lora_dropout < 1.0)) diag("lora_dropout", "must lie in [0, 1)");
    if (c.lora_target_modules && c.lora_target_modules->empty()) diag("lora_target_modules", "must not be empty");
    if (c.feedforward_modules && c.training_method != "ia3")
        diag("feedforward_modules", "only used by ia3 training");

    if (c.output_dir.empty()) diag("output_dir", "must not be empty");
    return out;
}

std::optional<int> backbone_dimension(std::string_view plm_model)
{
    const std::string key = lower(plm_model);
    for (const auto& [name, d] : backbones())
        if (lower(name) == key) return d;
    return std::nullopt;
}

TrainingConfig generate_config(const DataManifest& manifest, std::optional<std::string> task_kind,
                               std::string_view user_requirements)
{
    CsvTable table;
    if (std::filesystem::exists(manifest.csv_file)) table = parse_csv(read_text_file(manifest.csv_file));
    std::vector<std::string> columns = manifest.columns.empty() ? table.header : manifest.columns;

    auto pick = [&](std::initializer_list<const char*> names) -> std::optional<std::string> {
        for (const char* n : names)
            for (const auto& c : columns)
                if (lower(c) == n) return c;
        return std::nullopt;
    };
    auto seq_col = pick({"aa_seq", "seq", "sequence"});
    auto label_col = pick({"label", "labels", "target", "score"});
    if (!seq_col) throw Error(Errc::missing_column, "no sequence column (aa_seq, seq, sequence)");
    if (!label_col) throw Error(Errc::missing_column, "no label column (label, labels, target, score)");

    // Label inspection: integer-valued labels imply classes, fractional values a regression target.
    std::set<std::string> distinct;
    bool all_numeric = true;
    bool any_fractional = false;
    const int lc = table.column(*label_col);
    if (lc >= 0) {
        for (const auto& row : table.rows) {
            if (static_cast<int>(row.size()) <= lc) continue;
            const std::string& v = row[static_cast<std::size_t>(lc)];
            distinct.insert(v);
            char* end = nullptr;
            const double d = std::strtod(v.c_str(), &end);
            if (v.empty() || end != v.c_str() + v.size())
                all_numeric = false;
            else if (std::floor(d) != d)
                any_fractional = true;
        }
    }
    const bool looks_regression = all_numeric && any_fractional;
    const bool looks_binary = !any_fractional && distinct.size() == 2;

    const std::string req = lower(user_requirements);
    std::optional<std::string> wanted = task_kind;
    auto want = [&](const std::string& kind) {
        if (wanted && *wanted != kind)
            throw Error(Errc::contradictory_requirements, "requested both '" + *wanted + "' and '" + kind + "'");
        wanted = kind;
    };
    if (mentions(req, "regression")) want("regression");
    if (mentions(req, "multi-label") || mentions(req, "multilabel")) want("multi_label_classification");
    else if (mentions(req, "classification") || mentions(req, "classifier")) {
        if (!wanted || !is_classification(*wanted)) want("single_label_classification");
    }
    if (wanted && !is_classification(*wanted) && !is_regression(*wanted))
        throw Error(Errc::contradictory_requirements, "unknown task kind '" + *wanted + "'");
    if (wanted && is_regression(*wanted) && looks_binary)
        throw Error(Errc::contradictory_requirements, "regression requested on a two-class label column");
    if (wanted && is_classification(*wanted) && looks_regression)
        throw Error(Errc::contradictory_requirements, "classification requested on a continuous label column");

    TrainingConfig c;
    c.problem_type = wanted.value_or(looks_regression ? "regression" : "single_label_classification");
    if (is_regression(c.problem_type)) {
        c.num_labels = 1;
        c.metrics = kRegressionMetrics;
        c.monitor = "spearman";
    } else {
        c.num_labels = std::max<int>(2, static_cast<int>(distinct.size()));
        c.metrics = kClassificationMetrics;
        c.monitor = "accuracy";
    }
    c.monitor_strategy = metric_maximized(c.monitor) ? "max" : "min";
    c.sequence_column_name = *seq_col;
    c.label_column_name = *label_col;

    const std::filesystem::path train(manifest.csv_file);
    c.dataset = train.parent_path().generic_string();
    c.train_file = manifest.csv_file;
    if (manifest.valid_csv_file) c.valid_file = *manifest.valid_csv_file;
    if (manifest.test_csv_file) c.test_file = *manifest.test_csv_file;
    const std::string stem = train.stem().string().empty() ? "model" : train.stem().string();
    c.output_dir = c.output_root + "/" + stem;
    c.output_model_name = "model_" + stem + ".pt";

    std::optional<std::string> backbone;
    for (const auto& [name, d] : backbones()) {
        (void)d;
        if (!mentions(req, name)) continue;
        if (backbone && lower(*backbone) != lower(name))
            throw Error(Errc::contradictory_requirements, "several backbones requested: " + *backbone + ", " + name);
        backbone = name;
    }
    if (backbone) c.plm_model = *backbone;

    std::optional<std::string> method;
    auto want_method = [&](const std::string& m) {
        if (method && *method != m)
            throw Error(Errc::contradictory_requirements, "several training methods requested: " + *method + ", " + m);
        method = m;
    };
    for (const char* m : {"lora", "dora", "adalora", "qlora", "ia3", "ses-adapter", "freeze"})
        if (mentions(req, m) || mentions(req, std::string("plm-") + m)) want_method(m);
    if (mentions(req, "full fine-tuning") || mentions(req, "full finetuning")) want_method("full");
    set_training_method(c, method.value_or(c.training_method));

    if (mentions(req, "light attention") || mentions(req, "light_attention"))
        c.pooling_method = "light_attention";
    else if (mentions(req, "attention1d") || mentions(req, "1d attention"))
        c.pooling_method = "attention1d";

    std::smatch match;
    const std::regex lr_re(R"((learning[ _]rate|lr)\s*(of|=|:)?\s*([0-9]*\.?[0-9]+(e[-+]?[0-9]+)?))");
    if (std::regex_search(req, match, lr_re)) c.learning_rate = std::stod(match[3].str());
    const std::regex epochs_re(R"(([0-9]+)\s*epochs?\b)");
    if (std::regex_search(req, match, epochs_re)) c.num_epochs = std::stoi(match[1].str());
    const std::regex batch_re(R"(batch[ _]size\s*(of|=|:)?\s*([0-9]+))");
    if (std::regex_search(req, match, batch_re)) c.batch_size = std::stoi(match[2].str());
    return c;
}

PoolingMethod parse_pooling_method(std::string_view name)
{
    if (name == "mean") return PoolingMethod::mean;
    if (name == "light_attention") return PoolingMethod::light_attention;
    if (name == "attention1d") return PoolingMethod::attention1d;
    throw Error(Errc::unknown_method, "pooling method '" + std::string(name) + "'");
}

Eigen::VectorXd attention_logits(const Eigen::MatrixXd& H, PoolingMethod method, const PoolingParams& params)
{
    const Eigen::Index L = H.rows();
    const Eigen::Index d = H.cols();
    Eigen::VectorXd logits = Eigen::VectorXd::Constant(L, params.bias);
    if (method == PoolingMethod::light_attention && params.scorer.size() > 0) {
        if (params.scorer.size() != d) throw Error(Errc::shape_mismatch, "scorer length must equal d");
        logits.array() += (H * params.scorer).array();
    } else if (method == PoolingMethod::attention1d && params.kernel.size() > 0) {
        if (params.kernel.rows() != d || params.kernel.cols() != 5)
            throw Error(Errc::shape_mismatch, "attention1d kernel must be d x 5");
        for (Eigen::Index i = 0; i < L; ++i)
            for (Eigen::Index o = -2; o <= 2; ++o) {
                const Eigen::Index r = i + o;
                if (r < 0 || r >= L) continue;
                logits(i) += H.row(r).dot(params.kernel.col(o + 2));
            }
    }
    return logits;
}

Eigen::VectorXd pool_protein(const Eigen::MatrixXd& H, PoolingMethod method, const PoolingParams& params)
{
    if (H.rows() < 1 || H.cols() < 1) throw Error(Errc::empty_matrix, "embedding matrix is empty");
    if (!H.allFinite()) throw Error(Errc::invalid_argument, "embedding matrix has non-finite entries");
    if (method == PoolingMethod::mean) return H.colwise().mean().transpose();
    Eigen::VectorXd weights;
    stable_softmax_into(attention_logits(H, method, params), weights);
    return H.transpose() * weights;
}

Eigen::MatrixXd project_residues(const Eigen::MatrixXd& H, const Eigen::MatrixXd& W, const Eigen::VectorXd& bias)
{
    if (H.rows() < 1 || H.cols() < 1) throw Error(Errc::empty_matrix, "embedding matrix is empty");
    if (W.rows() != H.cols()) throw Error(Errc::shape_mismatch, "W must have d rows");
    if (W.cols() < 1 || bias.size() != W.cols()) throw Error(Errc::shape_mismatch, "bias length must equal K");
    Eigen::MatrixXd logits = H * W;
    logits.rowwise() += bias.transpose();
    Eigen::MatrixXd out(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        Eigen::VectorXd row;
        stable_softmax_into(logits.row(i).transpose(), row);
        out.row(i) = row.transpose();
    }
    return out;
}

Eigen::VectorXd apply_task_head(const Eigen::VectorXd& pooled, const TaskHead& head)
{
    Eigen::VectorXd x = pooled;
    if (head.w_hidden.size() > 0) {
        if (head.w_hidden.rows() != x.size() || head.b_hidden.size() != head.w_hidden.cols())
            throw Error(Errc::shape_mismatch, "hidden layer shape");
        x = head.w_hidden.transpose() * x + head.b_hidden;
        x = x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0))); });
    }
    if (head.w_out.rows() != x.size() || head.b_out.size() != head.w_out.cols())
        throw Error(Errc::shape_mismatch, "output layer shape");
    return head.w_out.transpose() * x + head.b_out;
}

std::optional<TrainingConfig> propose_next_config(const std::vector<TrialRecord>& history, const SearchSpace& space,
                                                  std::size_t budget)
{
    if (space.training_methods.empty() && space.plm_models.empty() && space.learning_rates.empty() &&
        space.pooling_methods.empty())
        throw Error(Errc::empty_search_space, "no dimension has candidate values");
    if (history.size() >= budget) return std::nullopt;

    std::set<std::string> tried;
    for (const auto& t : history) tried.insert(canonical(to_json(t.config)));

    const auto methods = space.training_methods.empty() ? std::vector<std::string>{space.base.training_method}
                                                        : space.training_methods;
    const auto models = space.plm_models.empty() ? std::vector<std::string>{space.base.plm_model} : space.plm_models;
    const auto rates = space.learning_rates.empty() ? std::vector<double>{space.base.learning_rate}
                                                    : space.learning_rates;
    const auto pools = space.pooling_methods.empty() ? std::vector<std::string>{space.base.pooling_method}
                                                     : space.pooling_methods;

    // Seed grid: one point per backbone at the first value of every other dimension.
    for (const auto& model : models) {
        TrainingConfig c = space.base;
        set_training_method(c, methods.front());
        c.plm_model = model;
        c.learning_rate = rates.front();
        c.pooling_method = pools.front();
        if (!tried.count(canonical(to_json(c)))) return c;
    }
    if (history.empty()) return std::nullopt;

    std::size_t best = 0;
    for (std::size_t i = 1; i < history.size(); ++i) {
        const bool maximize = metric_maximized(history[i].metric_name);
        const double a = history[i].metric_value;
        const double b = history[best].metric_value;
        if (maximize ? a > b : a < b) best = i;
    }
    const TrainingConfig& incumbent = history[best].config;

    for (const auto& m : methods) {
        if (normalize_training_method(m) == incumbent.training_method) continue;
        TrainingConfig c = incumbent;
        set_training_method(c, m);
        if (!tried.count(canonical(to_json(c)))) return c;
    }
    for (const auto& model : models) {
        if (model == incumbent.plm_model) continue;
        TrainingConfig c = incumbent;
        c.plm_model = model;
        if (!tried.count(canonical(to_json(c)))) return c;
    }
    for (double lr : rates) {
        if (lr == incumbent.learning_rate) continue;
        TrainingConfig c = incumbent;
        c.learning_rate = lr;
        if (!tried.count(canonical(to_json(c)))) return c;
    }
    for (const auto& p : pools) {
        if (p == incumbent.pooling_method) continue;
        TrainingConfig c = incumbent;
        c.pooling_method = p;
        if (!tried.count(canonical(to_json(c)))) return c;
    }
    return std::nullopt;
}

SynthesizedToolManifest package_manifest(const TrainingConfig& config, const PackageRequest& request)
{
    for (const auto& [k, v] : request.metrics) {
        (void)v;
        if (!manifest_metric_keys().count(k)) throw Error(Errc::invalid_metric_key, "metric '" + k + "'");
    }
    SynthesizedToolManifest m;
    m.tool.name = request.tool_name;
    m.tool.category = ToolCategory::automl;
    m.tool.executor = "protein_model_predict";
    m.tool.description = request.description.empty()
                             ? "Predicts " + config.label_column_name + " with a fine-tuned " + config.plm_model +
                                   " (" + config.training_method + ", " + config.pooling_method + " pooling) model."
                             : request.description;
    m.tool.params = {ParamSpec{"sequence", ParamKind::string, false, std::nullopt, std::nullopt},
                     ParamSpec{"csv_file", ParamKind::file_path, false, std::nullopt, std::nullopt}};
    m.inference_inputs = m.tool.params;
    if (is_regression(config.problem_type)) {
        m.output_description = "predicted_value per sequence";
    } else {
        const int k = config.num_labels.value_or(2);
        m.output_description = "predicted_class in [0, " + std::to_string(k - 1) + "] and class_<i>_prob per sequence";
    }
    m.checkpoint_ref = request.checkpoint_ref;
    m.metrics = request.metrics;
    m.created_at = request.created_at;
    m.provenance = request.provenance;
    return m;
}

} // namespace evoflow::automl
