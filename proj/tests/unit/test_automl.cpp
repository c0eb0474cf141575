#include "evoflow/automl.hpp"
#include "evoflow/builtin_tools.hpp"
#include "evoflow/error.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <set>

using namespace evoflow;
using namespace evoflow::automl;
using evoflow::testing::fixture;
using evoflow::testing::TempDir;

namespace {

template <class F>
Errc code_of(F&& f)
{
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an evoflow::Error";
    return Errc::io;
}

DataManifest allergen_manifest()
{
    DataManifest m;
    m.csv_file = fixture("cs1/data/train_split.csv").string();
    m.test_csv_file = fixture("cs1/data/test_split.csv").string();
    return m;
}

bool has_field(const std::vector<ConfigDiagnostic>& diags, const std::string& field)
{
    for (const auto& d : diags)
        if (d.field == field) return true;
    return false;
}

Eigen::MatrixXd random_matrix(std::mt19937& rng, int rows, int cols)
{
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = n(rng);
    return m;
}

SearchSpace small_space()
{
    SearchSpace s;
    s.base = generate_config(allergen_manifest());
    s.training_methods = {"freeze", "lora"};
    s.plm_models = {"ESM2-8M", "ESM2-35M"};
    s.learning_rates = {1e-3, 5e-5};
    s.pooling_methods = {"mean", "attention1d"};
    return s;
}

} // namespace

TEST(Automl, SchemaDefaults)
{
    const TrainingConfig c;
    EXPECT_EQ(c.seed, 3407);
    EXPECT_EQ(c.patience, 10);
    EXPECT_EQ(c.num_attention_head, 8);
    EXPECT_DOUBLE_EQ(c.learning_rate, 1e-3);
    EXPECT_DOUBLE_EQ(c.attention_probs_dropout, 0.1);
    EXPECT_DOUBLE_EQ(c.pooling_dropout, 0.1);
    TrainingConfig lora = c;
    set_training_method(lora, "lora");
    EXPECT_EQ(lora.lora_r, 8);
    EXPECT_EQ(lora.lora_alpha, 32.0);
    EXPECT_EQ(lora.lora_dropout, 0.1);
    set_training_method(lora, "freeze");
    EXPECT_FALSE(lora.lora_r);
}

TEST(Automl, AllergenConfigFromRequirements)
{
    const TrainingConfig c = generate_config(allergen_manifest(), std::nullopt, "Use ESM2-8M with LoRA");
    EXPECT_EQ(c.plm_model, "ESM2-8M");
    EXPECT_EQ(c.training_method, "lora");
    EXPECT_EQ(to_json(c).at("training_method"), "plm-lora");
    EXPECT_EQ(c.lora_r, 8);
    EXPECT_EQ(c.lora_alpha, 32.0);
    EXPECT_EQ(c.lora_dropout, 0.1);
    EXPECT_EQ(c.num_labels, 2);
    EXPECT_EQ(c.sequence_column_name, "seq");
    EXPECT_EQ(c.label_column_name, "label");
    EXPECT_TRUE(validate_config(c).empty());
    const std::set<std::string> metrics(c.metrics.begin(), c.metrics.end());
    EXPECT_TRUE(metrics.count("accuracy"));
    EXPECT_TRUE(metrics.count("auroc"));
}

TEST(Automl, RegressionConfig)
{
    TempDir dir("automl");
    std::ofstream(dir / "reg.csv") << "aa_seq,label\nMKV,0.5\nMKL,1.25\nMKI,2.0\n";
    DataManifest m;
    m.csv_file = (dir / "reg.csv").string();
    const TrainingConfig c = generate_config(m, "regression");
    EXPECT_EQ(c.num_labels, 1);
    EXPECT_TRUE(is_regression(c.problem_type));
    EXPECT_EQ(c.monitor_strategy, metric_maximized(c.monitor) ? "max" : "min");
    EXPECT_TRUE(validate_config(c).empty());
}

TEST(Automl, ContradictoryRequirements)
{
    EXPECT_EQ(code_of([] { generate_config(allergen_manifest(), std::nullopt, "treat it as regression"); }),
              Errc::contradictory_requirements);
    EXPECT_EQ(code_of([] { generate_config(allergen_manifest(), std::nullopt, "use lora but freeze the backbone"); }),
              Errc::contradictory_requirements);
}

TEST(Automl, MissingColumns)
{
    DataManifest m;
    m.csv_file = "unused.csv";
    m.columns = {"id", "value"};
    EXPECT_EQ(code_of([&] { generate_config(m); }), Errc::missing_column);
}

TEST(Automl, ValidateDiagnostics)
{
    TrainingConfig c = generate_config(allergen_manifest());
    ASSERT_TRUE(validate_config(c).empty());

    TrainingConfig bad_monitor = c;
    bad_monitor.metrics = {"f1"};
    bad_monitor.monitor = "accuracy";
    EXPECT_TRUE(has_field(validate_config(bad_monitor), "monitor"));

    TrainingConfig lora_on_freeze = c;
    set_training_method(lora_on_freeze, "freeze");
    lora_on_freeze.lora_r = 8;
    EXPECT_TRUE(has_field(validate_config(lora_on_freeze), "lora_r"));

    TrainingConfig bad_labels = c;
    bad_labels.num_labels = 1;
    EXPECT_TRUE(has_field(validate_config(bad_labels), "num_labels"));

    TrainingConfig bad_lr = c;
    bad_lr.learning_rate = 0;
    EXPECT_TRUE(has_field(validate_config(bad_lr), "learning_rate"));
}

TEST(Automl, ConfigJsonRoundTrip)
{
    TrainingConfig c = generate_config(allergen_manifest(), std::nullopt, "ESM2-8M with LoRA");
    c.extras["custom_key"] = {1, 2};
    EXPECT_EQ(config_from_json(to_json(c)), c);
    const Json aliased{{"monitored_metrics", "accuracy"}, {"monitored_strategy", "max"}, {"metrics", {"accuracy"}}};
    const TrainingConfig a = config_from_json(aliased);
    EXPECT_EQ(a.monitor, "accuracy");
    EXPECT_EQ(a.monitor_strategy, "max");
    EXPECT_EQ(code_of([] { config_from_json(Json{{"seed", "x"}}); }), Errc::malformed_schema);
}

TEST(Automl, MeanPooling)
{
    Eigen::MatrixXd H(2, 2);
    H << 1, 3, 3, 1;
    const Eigen::VectorXd v = pool_protein(H, PoolingMethod::mean);
    EXPECT_DOUBLE_EQ(v(0), 2.0);
    EXPECT_DOUBLE_EQ(v(1), 2.0);
    EXPECT_EQ(code_of([] { pool_protein(Eigen::MatrixXd(0, 3), PoolingMethod::mean); }), Errc::empty_matrix);
    EXPECT_EQ(code_of([] { parse_pooling_method("max"); }), Errc::unknown_method);
}

TEST(Automl, ConstantRowsPoolToThatRow)
{
    std::mt19937 rng(2);
    const Eigen::MatrixXd row = random_matrix(rng, 1, 6);
    const Eigen::MatrixXd H = row.replicate(9, 1);
    PoolingParams la;
    la.scorer = random_matrix(rng, 6, 1).col(0);
    PoolingParams conv;
    conv.kernel = random_matrix(rng, 6, 5);
    for (auto [method, params] : {std::pair{PoolingMethod::mean, PoolingParams{}},
                                  std::pair{PoolingMethod::light_attention, la},
                                  std::pair{PoolingMethod::attention1d, conv}}) {
        const Eigen::VectorXd v = pool_protein(H, method, params);
        for (int j = 0; j < 6; ++j) EXPECT_NEAR(v(j), row(0, j), 1e-12);
    }
}

TEST(Automl, UniformLogitsEqualMean)
{
    std::mt19937 rng(4);
    const Eigen::MatrixXd H = random_matrix(rng, 17, 8);
    const Eigen::VectorXd mean = pool_protein(H, PoolingMethod::mean);
    PoolingParams uniform;
    uniform.bias = 0.7;
    for (PoolingMethod m : {PoolingMethod::light_attention, PoolingMethod::attention1d}) {
        const Eigen::VectorXd v = pool_protein(H, m, uniform);
        for (int j = 0; j < 8; ++j) EXPECT_NEAR(v(j), mean(j), 1e-12);
    }
}

TEST(Automl, AttentionWeightsSumToOne)
{
    std::mt19937 rng(8);
    const Eigen::MatrixXd H = random_matrix(rng, 12, 4);
    PoolingParams p;
    p.scorer = random_matrix(rng, 4, 1).col(0);
    const Eigen::VectorXd logits = attention_logits(H, PoolingMethod::light_attention, p);
    ASSERT_EQ(logits.size(), 12);
    const Eigen::VectorXd w = (logits.array() - logits.maxCoeff()).exp();
    const Eigen::VectorXd expected = H.transpose() * (w / w.sum());
    const Eigen::VectorXd v = pool_protein(H, PoolingMethod::light_attention, p);
    for (int j = 0; j < 4; ++j) EXPECT_NEAR(v(j), expected(j), 1e-12);

    PoolingParams bad;
    bad.scorer = Eigen::VectorXd::Ones(3);
    EXPECT_EQ(code_of([&] { pool_protein(H, PoolingMethod::light_attention, bad); }), Errc::shape_mismatch);
}

TEST(Automl, ProjectZeroWeightsIsUniform)
{
    std::mt19937 rng(6);
    const Eigen::MatrixXd H = random_matrix(rng, 5, 4);
    const Eigen::MatrixXd P = project_residues(H, Eigen::MatrixXd::Zero(4, 3), Eigen::VectorXd::Zero(3));
    for (int i = 0; i < 5; ++i)
        for (int k = 0; k < 3; ++k) EXPECT_NEAR(P(i, k), 1.0 / 3.0, 1e-15);
}

TEST(Automl, ProjectBiasShiftInvariance)
{
    std::mt19937 rng(9);
    const Eigen::MatrixXd H = random_matrix(rng, 7, 5);
    const Eigen::MatrixXd W = random_matrix(rng, 5, 4);
    const Eigen::VectorXd b = random_matrix(rng, 4, 1).col(0);
    const Eigen::MatrixXd P = project_residues(H, W, b);
    const Eigen::MatrixXd Q = project_residues(H, W, (b.array() + 3.5).matrix());
    EXPECT_LT((P - Q).cwiseAbs().maxCoeff(), 1e-12);
    for (int i = 0; i < 7; ++i) EXPECT_NEAR(P.row(i).sum(), 1.0, 1e-9);
    EXPECT_EQ(code_of([&] { project_residues(H, W, Eigen::VectorXd::Zero(2)); }), Errc::shape_mismatch);
    EXPECT_EQ(code_of([&] { project_residues(H, Eigen::MatrixXd::Zero(3, 4), b); }), Errc::shape_mismatch);
}

TEST(Automl, TaskHead)
{
    Eigen::VectorXd x(2);
    x << 1.0, -2.0;
    TaskHead affine;
    affine.w_out = Eigen::MatrixXd::Identity(2, 2);
    affine.b_out = Eigen::VectorXd::Constant(2, 0.5);
    const Eigen::VectorXd y = apply_task_head(x, affine);
    EXPECT_DOUBLE_EQ(y(0), 1.5);
    EXPECT_DOUBLE_EQ(y(1), -1.5);

    TaskHead mlp = affine;
    mlp.w_hidden = Eigen::MatrixXd::Identity(2, 2);
    mlp.b_hidden = Eigen::VectorXd::Zero(2);
    const Eigen::VectorXd z = apply_task_head(x, mlp);
    EXPECT_NEAR(z(0), 0.5 + 0.8413447460685429, 1e-12);  // GELU(1)
}

TEST(Automl, SearchStartsWithSeedGrid)
{
    const SearchSpace s = small_space();
    const auto first = propose_next_config({}, s, 10);
    ASSERT_TRUE(first);
    EXPECT_EQ(first->plm_model, "ESM2-8M");
    const std::vector<TrialRecord> one{{*first, "accuracy", 0.8, 1.0}};
    const auto second = propose_next_config(one, s, 10);
    ASSERT_TRUE(second);
    EXPECT_EQ(second->plm_model, "ESM2-35M");
}

TEST(Automl, SearchHillClimbsOneFieldFromBest)
{
    const SearchSpace s = small_space();
    std::vector<TrialRecord> history;
    for (int i = 0; i < 3; ++i) {
        auto next = propose_next_config(history, s, 20);
        ASSERT_TRUE(next);
        history.push_back({*next, "accuracy", i == 2 ? 0.95 : 0.5 + 0.1 * i, 1.0});
    }
    const auto next = propose_next_config(history, s, 20);
    ASSERT_TRUE(next);
    const TrainingConfig& best = history[2].config;
    int diffs = (next->training_method != best.training_method) + (next->plm_model != best.plm_model) +
                (next->learning_rate != best.learning_rate) + (next->pooling_method != best.pooling_method);
    EXPECT_EQ(diffs, 1);
}

TEST(Automl, SearchNeverRepeatsAndStops)
{
    const SearchSpace s = small_space();
    std::vector<TrialRecord> history;
    std::set<std::string> seen;
    for (int i = 0; i < 100; ++i) {
        const auto next = propose_next_config(history, s, 100);
        if (!next) break;
        EXPECT_TRUE(seen.insert(canonical(to_json(*next))).second);
        history.push_back({*next, "accuracy", 0.5 + 0.001 * ((i * 37) % 11), 1.0});
    }
    EXPECT_LT(history.size(), 100u);
    EXPECT_FALSE(propose_next_config(history, s, 100));
    EXPECT_FALSE(propose_next_config(history, s, history.size()));
}

TEST(Automl, EmptySearchSpace)
{
    SearchSpace s;
    EXPECT_EQ(code_of([&] { propose_next_config({}, s, 5); }), Errc::empty_search_space);
}

TEST(Automl, PackageManifest)
{
    const TrainingConfig c = generate_config(allergen_manifest(), std::nullopt, "ESM2-8M with LoRA");
    PackageRequest req;
    req.tool_name = "predict_allergenicity";
    req.description = "Allergenicity classifier";
    req.checkpoint_ref = "/ckpt/model.pt";
    req.metrics = {{"accuracy", 0.92}, {"auroc", 0.96}};
    const SynthesizedToolManifest m = package_manifest(c, req);
    EXPECT_EQ(m.tool.name, "predict_allergenicity");
    EXPECT_EQ(m.tool.category, ToolCategory::automl);
    EXPECT_TRUE(m.tool.param("sequence") || m.tool.param("csv_file"));
    EXPECT_EQ(manifest_from_json(to_json(m)), m);

    req.metrics["foo"] = 1.0;
    EXPECT_EQ(code_of([&] { package_manifest(c, req); }), Errc::invalid_metric_key);
}

TEST(Automl, PackagedManifestRegisters)
{
    TempDir dir("automl");
    std::ofstream(dir / "model.pt") << "w";
    ExecutorTable table;
    bind_builtin_executors(table, std::make_shared<ToolFixtures>());
    ToolRegistry registry(table);
    register_builtins(registry);
    PackageRequest req;
    req.tool_name = "predict_allergenicity";
    req.description = "Allergenicity classifier";
    req.checkpoint_ref = (dir / "model.pt").string();
    req.metrics = {{"accuracy", 0.92}};
    registry.register_synthesized(package_manifest(generate_config(allergen_manifest()), req));
    EXPECT_NO_THROW(registry.validate_invocation("predict_allergenicity", {{"sequence", "MKV"}}));
}

TEST(Automl, GeneratedConfigsAlwaysValidate)
{
    for (const char* req : {"", "ESM2-8M with LoRA", "use Ankh-large, freeze", "full fine-tuning with ESM2-35M",
                            "qlora, learning rate 5e-5", "attention1d pooling"}) {
        const TrainingConfig c = generate_config(allergen_manifest(), std::nullopt, req);
        EXPECT_TRUE(validate_config(c).empty()) << req;
    }
}
