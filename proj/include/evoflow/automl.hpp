#pragma once

#include "evoflow/json.hpp"
#include "evoflow/tool_registry.hpp"

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace evoflow::automl {

// Training configuration. Field names and defaults follow the fine-tuning
// argument schema; nullable keys are optionals.
struct TrainingConfig {
    // dataset & task
    std::optional<std::string> dataset;
    std::optional<std::string> dataset_config;
    std::string problem_type = "single_label_classification";
    std::optional<int> num_labels;
    std::vector<std::string> metrics{"loss"};
    std::string sequence_column_name = "aa_seq";
    std::string label_column_name = "label";
    std::optional<std::string> pdb_type;
    std::optional<std::string> pdb_dir;
    std::optional<std::string> train_file;
    std::optional<std::string> valid_file;
    std::optional<std::string> test_file;
    bool quick_test = false;
    std::optional<int> max_train_samples;
    std::optional<int> max_valid_samples;
    std::optional<int> max_test_samples;

    // architecture
    std::string plm_model = "ESM2-650M";
    std::optional<int> hidden_size;
    int num_attention_head = 8;
    std::string pooling_method = "mean";
    double attention_probs_dropout = 0.1;
    double pooling_dropout = 0.1;
    std::optional<std::string> gnn_config;
    std::optional<std::string> model_path;
    int c_alpha_max_neighbors = 10;

    // optimization
    std::string training_method = "freeze";  // stored without the "plm-" prefix
    double learning_rate = 1e-3;
    int num_epochs = 100;
    std::optional<int> batch_size;
    std::optional<int> batch_token;
    int gradient_accumulation_steps = 1;
    int max_seq_len = -1;
    double max_grad_norm = -1.0;
    std::string monitor = "loss";
    std::string monitor_strategy = "min";
    int patience = 10;
    std::optional<std::string> scheduler;
    int warmup_steps = 0;
    int seed = 3407;
    int num_workers = 4;
    std::string structure_seq;

    // PEFT; lora fields are set exactly for the lora family
    std::optional<int> lora_r;
    std::optional<double> lora_alpha;
    std::optional<double> lora_dropout;
    std::optional<std::vector<std::string>> lora_target_modules;
    std::optional<std::string> feedforward_modules;

    // transfer & logging
    std::optional<std::string> initial_model_path;
    std::string output_root = "ckpt";
    std::string output_dir = "ckpt";
    std::optional<std::string> output_model_name;
    bool wandb = false;
    std::optional<std::string> wandb_project;
    std::optional<std::string> wandb_entity;
    std::optional<std::string> run_name;

    Json extras = Json::object();  // unrecognized keys, kept for round-trip

    bool operator==(const TrainingConfig&) const = default;
};

bool is_lora_family(std::string_view method);
bool is_classification(std::string_view problem_type);
bool is_regression(std::string_view problem_type);
// True when larger values of the metric are better (loss and mse are minimized).
bool metric_maximized(std::string_view metric);
// Strips an optional "plm-" prefix and lowercases.
std::string normalize_training_method(std::string_view method);

// Switches the adaptation strategy and sets or clears the PEFT fields to match.
void set_training_method(TrainingConfig& config, std::string_view method);

Json to_json(const TrainingConfig& config);
// Accepts canonical keys plus the aliases monitored_metrics, monitored_strategy,
// wandb_enabled and dataset_custom. Throws malformed-schema on wrongly typed values.
TrainingConfig config_from_json(const Json& j);

struct ConfigDiagnostic {
    std::string field;
    std::string message;
};

std::vector<ConfigDiagnostic> validate_config(const TrainingConfig& config);

struct DataManifest {
    std::string csv_file;  // training split
    std::optional<std::string> valid_csv_file;
    std::optional<std::string> test_csv_file;
    std::vector<std::string> columns;  // read from csv_file when empty
};

// Builds a config from table defaults, the data, and free-text requirements.
// task_kind, when given, is a problem_type. Throws missing-column,
// contradictory-requirements.
TrainingConfig generate_config(const DataManifest& manifest, std::optional<std::string> task_kind = std::nullopt,
                               std::string_view user_requirements = {});

// Hidden dimension of a known backbone, or nullopt.
std::optional<int> backbone_dimension(std::string_view plm_model);

enum class PoolingMethod { mean, light_attention, attention1d };
PoolingMethod parse_pooling_method(std::string_view name);

// Scoring parameters for attention pooling. light_attention uses `scorer`
// (length d); attention1d uses `kernel` (d × 5, centred window, zero padded).
// Empty parameters mean all logits equal `bias`.
struct PoolingParams {
    Eigen::VectorXd scorer;
    Eigen::MatrixXd kernel;
    double bias = 0.0;
};

Eigen::VectorXd attention_logits(const Eigen::MatrixXd& H, PoolingMethod method, const PoolingParams& params);
// Throws empty-matrix, shape-mismatch.
Eigen::VectorXd pool_protein(const Eigen::MatrixXd& H, PoolingMethod method, const PoolingParams& params = {});

// Row-wise softmax(HW + b). Throws empty-matrix, shape-mismatch.
Eigen::MatrixXd project_residues(const Eigen::MatrixXd& H, const Eigen::MatrixXd& W, const Eigen::VectorXd& bias);

// Affine head, or one GELU hidden layer when w_hidden is set.
struct TaskHead {
    Eigen::MatrixXd w_hidden;  // d × hidden (optional)
    Eigen::VectorXd b_hidden;
    Eigen::MatrixXd w_out;     // (hidden or d) × K
    Eigen::VectorXd b_out;
};

Eigen::VectorXd apply_task_head(const Eigen::VectorXd& pooled, const TaskHead& head);

struct TrialRecord {
    TrainingConfig config;
    std::string metric_name;
    double metric_value = 0.0;
    double wall_time_s = 0.0;
};

struct SearchSpace {
    TrainingConfig base;
    std::vector<std::string> training_methods;
    std::vector<std::string> plm_models;
    std::vector<double> learning_rates;
    std::vector<std::string> pooling_methods;
};

// Seed grid (one config per backbone), then one-field hill climbing from the best
// trial. Returns nullopt to stop. Throws empty-search-space.
std::optional<TrainingConfig> propose_next_config(const std::vector<TrialRecord>& history, const SearchSpace& space,
                                                  std::size_t budget);

struct PackageRequest {
    std::string tool_name;
    std::string description;
    std::string checkpoint_ref;
    std::map<std::string, double> metrics;
    std::string created_at;
    std::string provenance;
};

// Throws invalid-metric-key.
SynthesizedToolManifest package_manifest(const TrainingConfig& config, const PackageRequest& request);

} // namespace evoflow::automl
