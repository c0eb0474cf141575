#include "evoflow/eval.hpp"

#include "evoflow/csv.hpp"
#include "evoflow/error.hpp"
#include "evoflow/run_record.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <random>
#include <set>
#include <sstream>

namespace evoflow::eval {

namespace {

std::string number(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string constraints_text(const TaskInstance& instance)
{
    if (instance.constraints.empty()) return "(none)";
    std::string out;
    for (const auto& c : instance.constraints) out += "- " + canonical(c) + "\n";
    return out;
}

const Json* find_path(const Json& root, const std::string& dotted)
{
    const Json* cur = &root;
    std::stringstream ss(dotted);
    std::string seg;
    while (std::getline(ss, seg, '.')) {
        if (cur->is_object() && cur->contains(seg)) {
            cur = &(*cur)[seg];
        } else if (cur->is_array() && !seg.empty() &&
                   std::all_of(seg.begin(), seg.end(), [](unsigned char c) { return std::isdigit(c); }) &&
                   std::stoul(seg) < cur->size()) {
            cur = &(*cur)[std::stoul(seg)];
        } else {
            return nullptr;
        }
    }
    return cur;
}

// First occurrence of `key` anywhere below `root`, depth first in document order.
const Json* find_key(const Json& root, const std::string& key)
{
    if (root.is_object()) {
        if (root.contains(key)) return &root[key];
        for (const auto& [k, v] : root.items())
            if (const Json* hit = find_key(v, key)) return hit;
    } else if (root.is_array()) {
        for (const auto& v : root)
            if (const Json* hit = find_key(v, key)) return hit;
    }
    return nullptr;
}

} // namespace

std::string_view to_string(Tier tier)
{
    switch (tier) {
    case Tier::question: return "question";
    case Tier::task: return "task";
    case Tier::project: return "project";
    }
    return "?";
}

Tier parse_tier(std::string_view text)
{
    std::string t(text);
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
    if (t == "question") return Tier::question;
    if (t == "task") return Tier::task;
    if (t == "project") return Tier::project;
    throw Error(Errc::invalid_argument, "unknown tier '" + std::string(text) + "'");
}

Json to_json(const TaskInstance& instance)
{
    return Json{{"id", instance.id},
                {"tier", to_string(instance.tier)},
                {"query", instance.query},
                {"context", instance.context},
                {"constraints", instance.constraints}};
}

TaskInstance instance_from_json(const Json& j)
{
    if (!j.is_object()) throw Error(Errc::malformed_record, "instance must be a JSON object");
    TaskInstance t;
    if (!j.contains("id") || !(j["id"].is_string() || j["id"].is_number_integer()))
        throw Error(Errc::malformed_record, "missing id");
    t.id = j["id"].is_string() ? j["id"].get<std::string>() : std::to_string(j["id"].get<long long>());
    if (!j.contains("tier") || !j["tier"].is_string()) throw Error(Errc::malformed_record, "missing tier");
    try {
        t.tier = parse_tier(j["tier"].get<std::string>());
    } catch (const Error& e) {
        throw Error(Errc::malformed_record, e.detail());
    }
    if (!j.contains("query") || !j["query"].is_string() || j["query"].get<std::string>().empty())
        throw Error(Errc::malformed_record, "missing query");
    t.query = j["query"].get<std::string>();
    if (j.contains("context")) t.context = j["context"];
    if (j.contains("constraints")) {
        if (!j["constraints"].is_array()) throw Error(Errc::malformed_record, "constraints must be a list");
        t.constraints = j["constraints"];
    }
    return t;
}

std::map<Tier, std::size_t> expected_tier_counts()
{
    return {{Tier::question, 58}, {Tier::task, 60}, {Tier::project, 30}};
}

Benchmark parse_benchmark(std::string_view ndjson, const std::optional<std::map<Tier, std::size_t>>& expected)
{
    Benchmark b;
    std::set<std::string> ids;
    std::istringstream in{std::string(ndjson)};
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const Json j = Json::parse(line, nullptr, false);
        if (j.is_discarded()) throw Error(Errc::malformed_record, "line " + std::to_string(lineno) + ": not JSON");
        TaskInstance t;
        try {
            t = instance_from_json(j);
        } catch (const Error& e) {
            throw Error(Errc::malformed_record, "line " + std::to_string(lineno) + ": " + e.detail());
        }
        if (!ids.insert(t.id).second)
            throw Error(Errc::malformed_record, "line " + std::to_string(lineno) + ": duplicate id " + t.id);
        ++b.summary.counts[t.tier];
        b.instances.push_back(std::move(t));
    }
    b.summary.total = b.instances.size();
    if (expected && b.summary.total > 0) {
        for (const auto& [tier, n] : *expected)
            if (b.summary.counts[tier] != n)
                b.summary.warnings.push_back(std::string(to_string(tier)) + " tier has " +
                                             std::to_string(b.summary.counts[tier]) + " instances, expected " +
                                             std::to_string(n));
    }
    return b;
}

Benchmark load_benchmark(const std::filesystem::path& path, const std::optional<std::map<Tier, std::size_t>>& expected)
{
    return parse_benchmark(read_text_file(path), expected);
}

Json to_json(const PairwiseJudgment& j)
{
    return Json{{"instance_id", j.instance_id}, {"model_a", j.model_a},       {"model_b", j.model_b},
                {"critique_a", j.critique_a},   {"critique_b", j.critique_b}, {"winner", j.winner},
                {"rationale", j.rationale}};
}

PairwiseJudgment judgment_from_json(const Json& j)
{
    PairwiseJudgment p;
    p.instance_id = j.at("instance_id").get<std::string>();
    p.model_a = j.at("model_a").get<std::string>();
    p.model_b = j.at("model_b").get<std::string>();
    p.critique_a = j.at("critique_a");
    p.critique_b = j.at("critique_b");
    p.winner = j.at("winner").get<std::string>();
    p.rationale = j.value("rationale", "");
    return p;
}

PairwiseJudgment judge_pair(const TaskInstance& instance, const std::string& model_a, const std::string& response_a,
                            const std::string& model_b, const std::string& response_b, ChatBackend& analyst,
                            ChatBackend& judge)
{
    if (response_a.empty() || response_b.empty())
        throw Error(Errc::precondition, "both responses must be non-empty for " + instance.id);
    const std::string constraints = constraints_text(instance);
    auto critique = [&](const std::string& response, int turn) {
        const ChatExchange x =
            invoke_role(analyst, Role::Analyst, {{"query", instance.query}, {"constraints", constraints},
                                                 {"response", response}},
                        {ChatMessage{ChatMessage::Speaker::user, "Critique this answer."}});
        return extract_structured(Role::Analyst, x.response, turn).judgment;
    };
    PairwiseJudgment out;
    out.instance_id = instance.id;
    out.model_a = model_a;
    out.model_b = model_b;
    out.critique_a = critique(response_a, 1);
    out.critique_b = critique(response_b, 2);
    const ChatExchange x = invoke_role(
        judge, Role::Judge,
        {{"query", instance.query}, {"constraints", constraints}, {"critique_a", out.critique_a.dump(2)},
         {"critique_b", out.critique_b.dump(2)}},
        {ChatMessage{ChatMessage::Speaker::user, "Which answer is better?"}});
    const Json verdict = extract_structured(Role::Judge, x.response, 1).judgment;
    out.winner = verdict.at("winner").get<std::string>();
    out.rationale = verdict.contains("rationale") && verdict["rationale"].is_string()
                        ? verdict["rationale"].get<std::string>()
                        : std::string();
    return out;
}

Json to_json(const TournamentResult& r)
{
    return Json{{"instance_id", r.instance_id}, {"n_models", r.n_models}, {"wins", r.wins},
                {"ranks", r.ranks},             {"scores", r.scores}};
}

TournamentResult score_tournament(const std::map<std::string, int>& wins, const std::string& instance_id)
{
    if (wins.size() < 2)
        throw Error(Errc::fewer_than_two_models, std::to_string(wins.size()) + " model(s) in " +
                                                     (instance_id.empty() ? std::string("tournament") : instance_id));
    TournamentResult r;
    r.instance_id = instance_id;
    r.n_models = wins.size();
    r.wins = wins;
    const double n = static_cast<double>(wins.size());
    for (const auto& [model, w] : wins) {
        if (w < 0) throw Error(Errc::invalid_argument, "negative wins for " + model);
        int rank = 1;
        for (const auto& [other, wo] : wins)
            if (wo > w) ++rank;
        r.ranks[model] = rank;
        r.scores[model] = static_cast<double>(w) * (n - rank + 1) / n;
    }
    return r;
}

JudgmentCache::JudgmentCache(std::filesystem::path file) : file_(std::move(file))
{
    if (!std::filesystem::exists(*file_)) return;
    std::istringstream in(read_text_file(*file_));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const Json j = Json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.contains("key") || !j.contains("judgment")) continue;  // torn tail line
        entries_[j["key"].get<std::string>()] = judgment_from_json(j["judgment"]);
    }
}

std::string JudgmentCache::key(const std::string& instance_id, const std::string& model_a,
                               const std::string& response_a, const std::string& model_b,
                               const std::string& response_b)
{
    return instance_id + "|" + model_a + "|" + model_b + "|" + hex64(fnv1a(response_a)) + "|" +
           hex64(fnv1a(response_b));
}

std::optional<PairwiseJudgment> JudgmentCache::find(const std::string& key) const
{
    std::scoped_lock lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void JudgmentCache::store(const std::string& key, const PairwiseJudgment& judgment)
{
    std::scoped_lock lock(mutex_);
    entries_[key] = judgment;
    if (!file_) return;
    if (file_->has_parent_path()) std::filesystem::create_directories(file_->parent_path());
    std::ofstream out(*file_, std::ios::app);
    out << canonical(Json{{"key", key}, {"judgment", to_json(judgment)}}) << "\n";
}

std::size_t JudgmentCache::size() const
{
    std::scoped_lock lock(mutex_);
    return entries_.size();
}

TournamentRun run_tournament(const TaskInstance& instance, const std::map<std::string, std::string>& responses,
                             ChatBackend& analyst, ChatBackend& judge, const TournamentOptions& options,
                             JudgmentCache* cache)
{
    std::vector<std::string> models;
    for (const auto& [m, _] : responses) models.push_back(m);
    if (models.size() < 2)
        throw Error(Errc::fewer_than_two_models, std::to_string(models.size()) + " model(s) in " + instance.id);

    std::mt19937_64 rng(fnv1a(instance.id, options.seed ^ 0x9e3779b97f4a7c15ULL));
    std::vector<std::pair<std::string, std::string>> pairs;
    for (std::size_t i = 0; i < models.size(); ++i)
        for (std::size_t j = i + 1; j < models.size(); ++j) {
            if (rng() & 1ULL)
                pairs.emplace_back(models[j], models[i]);
            else
                pairs.emplace_back(models[i], models[j]);
        }

    TournamentRun run;
    run.judgments.resize(pairs.size());
    std::vector<bool> hit(pairs.size(), false);
    auto judge_one = [&](std::size_t k) {
        const auto& [a, b] = pairs[k];
        const std::string key = JudgmentCache::key(instance.id, a, responses.at(a), b, responses.at(b));
        if (cache) {
            if (auto cached = cache->find(key)) {
                run.judgments[k] = *cached;
                hit[k] = true;
                return;
            }
        }
        run.judgments[k] = judge_pair(instance, a, responses.at(a), b, responses.at(b), analyst, judge);
        if (cache) cache->store(key, run.judgments[k]);
    };

    if (options.parallelism <= 1) {
        for (std::size_t k = 0; k < pairs.size(); ++k) judge_one(k);
    } else {
        const std::size_t width = static_cast<std::size_t>(options.parallelism);
        for (std::size_t start = 0; start < pairs.size(); start += width) {
            std::vector<std::future<void>> batch;
            for (std::size_t k = start; k < std::min(pairs.size(), start + width); ++k)
                batch.push_back(std::async(std::launch::async, judge_one, k));
            for (auto& f : batch) f.get();
        }
    }

    std::map<std::string, int> wins;
    for (const auto& m : models) wins[m] = 0;
    for (const auto& j : run.judgments) ++wins[j.winning_model()];
    run.cache_hits = static_cast<std::size_t>(std::count(hit.begin(), hit.end(), true));
    run.result = score_tournament(wins, instance.id);
    return run;
}

CorpusReport aggregate_corpus(const std::vector<TournamentResult>& results, const std::map<std::string, Tier>& tier_of)
{
    CorpusReport report;
    if (results.empty()) return report;
    std::set<std::string> models;
    for (const auto& [m, _] : results.front().scores) models.insert(m);
    for (const auto& r : results) {
        std::set<std::string> these;
        for (const auto& [m, _] : r.scores) these.insert(m);
        if (these != models)
            throw Error(Errc::inconsistent_model_sets, r.instance_id + " covers a different model set");
    }
    report.models.assign(models.begin(), models.end());
    const double max_score = static_cast<double>(models.size() - 1);

    auto aggregate = [&](const std::string& name, const std::vector<const TournamentResult*>& group) {
        TierAggregate t;
        t.tier = name;
        t.n_instances = group.size();
        for (const auto& m : report.models) {
            double sum = 0.0;
            for (const auto* r : group) sum += r->scores.at(m);
            t.mean_score[m] = sum / static_cast<double>(group.size());
            t.normalized[m] = t.mean_score[m] / max_score * 100.0;
        }
        return t;
    };

    std::vector<const TournamentResult*> all;
    for (Tier tier : {Tier::question, Tier::task, Tier::project}) {
        std::vector<const TournamentResult*> group;
        for (const auto& r : results) {
            auto it = tier_of.find(r.instance_id);
            if (it != tier_of.end() && it->second == tier) group.push_back(&r);
        }
        if (!group.empty()) report.tiers.push_back(aggregate(std::string(to_string(tier)), group));
    }
    for (const auto& r : results) all.push_back(&r);
    report.tiers.push_back(aggregate("overall", all));
    return report;
}

Json to_json(const CorpusReport& report)
{
    Json tiers = Json::array();
    for (const auto& t : report.tiers)
        tiers.push_back({{"tier", t.tier},
                         {"n_instances", t.n_instances},
                         {"mean_score", t.mean_score},
                         {"normalized_0_100", t.normalized}});
    return Json{{"models", report.models},
                {"tiers", tiers},
                {"normalization", "mean score divided by the per-instance maximum N-1, times 100 (repo convention)"}};
}

std::string to_csv(const CorpusReport& report)
{
    CsvTable table;
    table.header = {"tier", "n_instances", "model", "mean_score", "normalized_0_100"};
    for (const auto& t : report.tiers)
        for (const auto& m : report.models)
            table.rows.push_back({t.tier, std::to_string(t.n_instances), m, number(t.mean_score.at(m)),
                                  number(t.normalized.at(m))});
    return evoflow::to_csv(table);
}

CurationScore score_curation(const std::string& question_id, const std::map<std::string, double>& committee)
{
    CurationScore s;
    s.question_id = question_id;
    s.committee = committee;
    for (const auto& [agent, v] : committee) {
        if (!std::isfinite(v) || v < 0.0 || v > 5.0)
            throw Error(Errc::score_out_of_range, agent + " scored " + number(v) + " outside [0, 5]");
        s.total += v;
    }
    return s;
}

std::vector<CurationScore> select_top(std::vector<CurationScore> scores, std::size_t k)
{
    std::sort(scores.begin(), scores.end(), [](const CurationScore& a, const CurationScore& b) {
        if (a.total != b.total) return a.total > b.total;
        return a.question_id < b.question_id;
    });
    if (scores.size() > k) scores.resize(k);
    return scores;
}

std::string_view to_string(ConstraintStatus status)
{
    switch (status) {
    case ConstraintStatus::pass: return "pass";
    case ConstraintStatus::fail: return "fail";
    case ConstraintStatus::unchecked: return "unchecked";
    }
    return "?";
}

std::vector<ConstraintResult> check_constraints(const TaskInstance& instance, const Json& artifact)
{
    const std::string text = artifact.is_object() && artifact.contains("text") && artifact["text"].is_string()
                                  ? artifact["text"].get<std::string>()
                                  : artifact.dump();
    std::vector<ConstraintResult> out;
    for (std::size_t i = 0; i < instance.constraints.size(); ++i) {
        const Json& c = instance.constraints[i];
        ConstraintResult r;
        r.index = i;
        r.kind = c.is_object() ? c.value("kind", "") : "";
        auto verdict = [&](bool ok, std::string msg) {
            r.status = ok ? ConstraintStatus::pass : ConstraintStatus::fail;
            r.message = std::move(msg);
        };
        if (r.kind == "contains-string" && c.contains("value") && c["value"].is_string()) {
            const std::string needle = c["value"].get<std::string>();
            verdict(text.find(needle) != std::string::npos, "looked for \"" + needle + "\"");
        } else if (r.kind == "numeric-field-within" && c.contains("field") && c.contains("value") &&
                   c["value"].is_number()) {
            const std::string field = c["field"].get<std::string>();
            const double target = c["value"].get<double>();
            const double tol = c.value("tol", 0.0);
            const Json* v = find_path(artifact, field);
            if (!v && field.find('.') == std::string::npos) v = find_key(artifact, field);
            if (!v || !v->is_number())
                verdict(false, "field " + field + " not found");
            else
                verdict(std::fabs(v->get<double>() - target) <= tol,
                        field + " = " + number(v->get<double>()) + ", expected " + number(target) + " +/- " +
                            number(tol));
        } else if (r.kind == "file-produced" && c.contains("path") && c["path"].is_string()) {
            const std::string path = c["path"].get<std::string>();
            bool listed = false;
            if (artifact.is_object() && artifact.contains("files") && artifact["files"].is_array())
                for (const auto& f : artifact["files"])
                    if (f.is_string() && (f == path || std::filesystem::path(f.get<std::string>()).filename() == path))
                        listed = true;
            verdict(listed || std::filesystem::exists(path), "file " + path);
        } else if (r.kind == "cites-at-least" && c.contains("n") && c["n"].is_number_integer()) {
            const auto cited = cited_indices(text);
            const std::set<int> distinct(cited.begin(), cited.end());
            const int n = c["n"].get<int>();
            verdict(static_cast<int>(distinct.size()) >= n,
                    std::to_string(distinct.size()) + " distinct citations, need " + std::to_string(n));
        } else {
            r.status = ConstraintStatus::unchecked;
            r.message = "unsupported constraint kind '" + r.kind + "'";
        }
        out.push_back(std::move(r));
    }
    return out;
}

ResponseTable parse_responses(std::string_view ndjson)
{
    ResponseTable table;
    std::istringstream in{std::string(ndjson)};
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const Json j = Json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("instance_id") || !j.contains("model") ||
            !j.contains("response") || !j["response"].is_string())
            throw Error(Errc::malformed_record, "responses line " + std::to_string(lineno));
        const std::string id =
            j["instance_id"].is_string() ? j["instance_id"].get<std::string>() : j["instance_id"].dump();
        table[id][j["model"].get<std::string>()] = j["response"].get<std::string>();
    }
    return table;
}

EvaluationReport run_evaluation(const std::vector<TaskInstance>& instances, const ResponseTable& responses,
                                ChatBackend& analyst, ChatBackend& judge, const TournamentOptions& options,
                                JudgmentCache* cache)
{
    EvaluationReport report;
    std::vector<TournamentResult> results;
    std::map<std::string, Tier> tier_of;
    for (const auto& instance : instances) {
        auto it = responses.find(instance.id);
        if (it == responses.end()) {
            report.warnings.push_back("no responses for " + instance.id);
            continue;
        }
        report.runs.push_back(run_tournament(instance, it->second, analyst, judge, options, cache));
        results.push_back(report.runs.back().result);
        tier_of[instance.id] = instance.tier;
    }
    report.corpus = aggregate_corpus(results, tier_of);
    return report;
}

Json to_json(const EvaluationReport& report)
{
    Json runs = Json::array();
    for (const auto& r : report.runs) {
        Json judgments = Json::array();
        for (const auto& j : r.judgments) judgments.push_back(to_json(j));
        runs.push_back({{"result", to_json(r.result)}, {"judgments", judgments}, {"cache_hits", r.cache_hits}});
    }
    return Json{{"runs", runs}, {"corpus", to_json(report.corpus)}, {"warnings", report.warnings}};
}

std::string results_csv(const EvaluationReport& report, const std::vector<TaskInstance>& instances)
{
    std::map<std::string, std::string> tier;
    for (const auto& i : instances) tier[i.id] = std::string(to_string(i.tier));
    CsvTable table;
    table.header = {"instance_id", "tier", "model", "wins", "rank", "score"};
    for (const auto& run : report.runs)
        for (const auto& [m, w] : run.result.wins)
            table.rows.push_back({run.result.instance_id, tier[run.result.instance_id], m, std::to_string(w),
                                  std::to_string(run.result.ranks.at(m)), number(run.result.scores.at(m))});
    return evoflow::to_csv(table);
}

} // namespace evoflow::eval
