#pragma once

#include "evoflow/agent.hpp"
#include "evoflow/json.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace evoflow::eval {

enum class Tier { question, task, project };

std::string_view to_string(Tier tier);
Tier parse_tier(std::string_view text);

// One benchmark tuple: query, prompt context and checkable constraints.
struct TaskInstance {
    std::string id;
    Tier tier = Tier::question;
    std::string query;
    Json context = Json::object();
    Json constraints = Json::array();
};

Json to_json(const TaskInstance& instance);
TaskInstance instance_from_json(const Json& j);

struct BenchmarkSummary {
    std::size_t total = 0;
    std::map<Tier, std::size_t> counts{{Tier::question, 0}, {Tier::task, 0}, {Tier::project, 0}};
    std::vector<std::string> warnings;
};

struct Benchmark {
    std::vector<TaskInstance> instances;
    BenchmarkSummary summary;
};

// Expected stratification of the curated corpus.
std::map<Tier, std::size_t> expected_tier_counts();

// NDJSON, one instance per line; blank lines are skipped. A deviation from
// `expected` is a warning, a bad record is malformed-record naming its line.
Benchmark parse_benchmark(std::string_view ndjson,
                          const std::optional<std::map<Tier, std::size_t>>& expected = expected_tier_counts());
Benchmark load_benchmark(const std::filesystem::path& path,
                         const std::optional<std::map<Tier, std::size_t>>& expected = expected_tier_counts());

struct PairwiseJudgment {
    std::string instance_id;
    std::string model_a;
    std::string model_b;
    Json critique_a;
    Json critique_b;
    std::string winner;  // "a" or "b"
    std::string rationale;

    const std::string& winning_model() const { return winner == "a" ? model_a : model_b; }
};

Json to_json(const PairwiseJudgment& j);
PairwiseJudgment judgment_from_json(const Json& j);

// The analyst critiques each response alone; the judge sees only the two
// critiques, the query and the constraints.
PairwiseJudgment judge_pair(const TaskInstance& instance, const std::string& model_a, const std::string& response_a,
                            const std::string& model_b, const std::string& response_b, ChatBackend& analyst,
                            ChatBackend& judge);

struct TournamentResult {
    std::string instance_id;
    std::size_t n_models = 0;
    std::map<std::string, int> wins;
    std::map<std::string, int> ranks;
    std::map<std::string, double> scores;
};

Json to_json(const TournamentResult& r);

// Competition ranking on wins: r = 1 + number of models with strictly more wins.
// S = W (N - r + 1) / N.
TournamentResult score_tournament(const std::map<std::string, int>& wins, const std::string& instance_id = "");

// Judgments keyed by instance, ordered model pair and response hashes.
class JudgmentCache {
public:
    JudgmentCache() = default;
    explicit JudgmentCache(std::filesystem::path file);

    static std::string key(const std::string& instance_id, const std::string& model_a, const std::string& response_a,
                           const std::string& model_b, const std::string& response_b);
    std::optional<PairwiseJudgment> find(const std::string& key) const;
    void store(const std::string& key, const PairwiseJudgment& judgment);
    std::size_t size() const;

private:
    mutable std::mutex mutex_;
    std::optional<std::filesystem::path> file_;
    std::map<std::string, PairwiseJudgment> entries_;
};

struct TournamentOptions {
    std::uint64_t seed = 0;
    // Above 1, pairs are judged concurrently; scripted backends then hand out
    // turns in completion order, so keep 1 for reproducible replays.
    int parallelism = 1;
};

struct TournamentRun {
    TournamentResult result;
    std::vector<PairwiseJudgment> judgments;
    std::size_t cache_hits = 0;
};

// Every unordered pair is judged once. Which model is shown as "a" is a coin
// flip drawn from the seed and the instance id.
TournamentRun run_tournament(const TaskInstance& instance, const std::map<std::string, std::string>& responses,
                             ChatBackend& analyst, ChatBackend& judge, const TournamentOptions& options = {},
                             JudgmentCache* cache = nullptr);

struct TierAggregate {
    std::string tier;  // "question" | "task" | "project" | "overall"
    std::size_t n_instances = 0;
    std::map<std::string, double> mean_score;
    // mean_score / (N - 1) * 100, the largest score one model can reach per instance.
    std::map<std::string, double> normalized;
};

struct CorpusReport {
    std::vector<std::string> models;
    std::vector<TierAggregate> tiers;  // tiers with instances, then overall
};

CorpusReport aggregate_corpus(const std::vector<TournamentResult>& results,
                              const std::map<std::string, Tier>& tier_of);
Json to_json(const CorpusReport& report);
std::string to_csv(const CorpusReport& report);

struct CurationScore {
    std::string question_id;
    std::map<std::string, double> committee;
    double total = 0.0;
};

CurationScore score_curation(const std::string& question_id, const std::map<std::string, double>& committee);
// Highest totals first, ties by question id.
std::vector<CurationScore> select_top(std::vector<CurationScore> scores, std::size_t k);

enum class ConstraintStatus { pass, fail, unchecked };
std::string_view to_string(ConstraintStatus status);

struct ConstraintResult {
    std::size_t index = 0;
    std::string kind;
    ConstraintStatus status = ConstraintStatus::unchecked;
    std::string message;
};

// Supported kinds: contains-string {value}, numeric-field-within {field, value, tol},
// file-produced {path}, cites-at-least {n}. The artifact's "text" is the report
// body and "files" lists produced paths.
std::vector<ConstraintResult> check_constraints(const TaskInstance& instance, const Json& artifact);

// instance id -> model -> response, from NDJSON lines {instance_id, model, response}.
using ResponseTable = std::map<std::string, std::map<std::string, std::string>>;
ResponseTable parse_responses(std::string_view ndjson);

struct EvaluationReport {
    std::vector<TournamentRun> runs;
    CorpusReport corpus;
    std::vector<std::string> warnings;
};

EvaluationReport run_evaluation(const std::vector<TaskInstance>& instances, const ResponseTable& responses,
                                ChatBackend& analyst, ChatBackend& judge, const TournamentOptions& options = {},
                                JudgmentCache* cache = nullptr);
Json to_json(const EvaluationReport& report);
// One row per instance and model: instance_id, tier, model, wins, rank, score.
std::string results_csv(const EvaluationReport& report, const std::vector<TaskInstance>& instances);

} // namespace evoflow::eval
