#include "evoflow/cli.hpp"

#include "evoflow/automl.hpp"
#include "evoflow/builtin_tools.hpp"
#include "evoflow/csv.hpp"
#include "evoflow/error.hpp"
#include "evoflow/eval.hpp"
#include "evoflow/evolution.hpp"
#include "evoflow/gateway.hpp"
#include "evoflow/orchestrator.hpp"
#include "evoflow/run_record.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <cstdio>
#include <ostream>

namespace evoflow {

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Globals {
    std::string config;
    std::string data_dir;
    std::string backend = "scripted";
    std::string fixtures;
    std::uint64_t seed = 0;
    bool json = false;
    std::string endpoint;
    std::string model;
};

std::string num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

void print_table(std::ostream& out, const std::vector<std::string>& header,
                 const std::vector<std::vector<std::string>>& rows)
{
    std::vector<std::size_t> width(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
    for (const auto& r : rows)
        for (std::size_t c = 0; c < r.size() && c < width.size(); ++c) width[c] = std::max(width[c], r[c].size());
    auto line = [&](const std::vector<std::string>& cells) {
        std::string s;
        for (std::size_t c = 0; c < cells.size(); ++c) {
            s += cells[c];
            if (c + 1 < cells.size()) s += std::string(width[c] - cells[c].size() + 2, ' ');
        }
        out << s << "\n";
    };
    line(header);
    for (const auto& r : rows) line(r);
}

Json load_json_arg(const std::string& value)
{
    if (std::filesystem::exists(value)) return read_json_file(value);
    Json j = Json::parse(value, nullptr, false);
    if (j.is_discarded()) throw Error(Errc::malformed_json, "not a file or JSON text: " + value);
    return j;
}

// Config-file values fill in global flags that were not given on the command line.
void apply_config_file(CLI::App& app, Globals& g)
{
    if (g.config.empty()) return;
    const Json c = read_json_file(g.config);
    if (!c.is_object()) throw UsageError("--config must hold a JSON object");
    auto unset = [&](const char* flag) { return app.get_option(flag)->count() == 0; };
    if (c.contains("data_dir") && unset("--data-dir")) g.data_dir = c["data_dir"].get<std::string>();
    if (c.contains("backend") && unset("--backend")) g.backend = c["backend"].get<std::string>();
    if (c.contains("fixtures") && unset("--fixtures")) g.fixtures = c["fixtures"].get<std::string>();
    if (c.contains("seed") && unset("--seed")) g.seed = c["seed"].get<std::uint64_t>();
    if (c.contains("json") && unset("--json")) g.json = c["json"].get<bool>();
    g.endpoint = c.value("endpoint", g.endpoint);
    g.model = c.value("model", g.model);
}

BackendBinding backend_binding(const Globals& g)
{
    BackendBinding b;
    if (g.backend == "scripted") {
        if (g.fixtures.empty()) throw UsageError("--backend scripted requires --fixtures");
        b.kind = BackendBinding::Kind::scripted;
        b.fixtures = g.fixtures;
    } else {
        if (g.endpoint.empty()) throw UsageError("--backend http requires an endpoint (--endpoint or config file)");
        b.kind = BackendBinding::Kind::http;
        b.http.endpoint = g.endpoint;
        b.http.model = g.model;
    }
    return b;
}

struct Toolbox {
    ExecutorTable executors;
    std::shared_ptr<ToolFixtures> fixtures = std::make_shared<ToolFixtures>();
    std::unique_ptr<ToolRegistry> registry;
};

std::unique_ptr<Toolbox> make_toolbox(const Globals& g)
{
    auto tb = std::make_unique<Toolbox>();
    if (!g.fixtures.empty()) {
        const std::filesystem::path f = g.fixtures;
        const auto dir = std::filesystem::is_directory(f) ? f : f.parent_path();
        if (std::filesystem::exists(dir / "tools.json"))
            tb->fixtures = std::make_shared<ToolFixtures>(ToolFixtures::load(dir / "tools.json"));
    }
    bind_builtin_executors(tb->executors, tb->fixtures);
    std::optional<std::filesystem::path> manifests;
    if (!g.data_dir.empty()) manifests = std::filesystem::path(g.data_dir) / "manifests";
    tb->registry = std::make_unique<ToolRegistry>(tb->executors, manifests);
    register_builtins(*tb->registry);
    tb->registry->load_manifests();
    return tb;
}

std::string report_markdown(const FinalReport& report)
{
    std::string md = report.text;
    if (!md.empty() && md.back() != '\n') md += "\n";
    if (!report.references.empty()) {
        md += "\n## References\n\n";
        for (std::size_t i = 0; i < report.references.size(); ++i)
            md += "[" + std::to_string(i + 1) + "] " + report.references[i].value("title", "") + ". " +
                  report.references[i].value("url", "") + "\n";
    }
    return md;
}

std::atomic<bool> g_interrupted{false};

extern "C" void on_signal(int)
{
    g_interrupted = true;
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Multi-agent protein research workflow engine", "evoflow"};
    app.fallthrough();
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config, "JSON file with default flag values");
    app.add_option("--data-dir", g.data_dir, "Directory for persisted manifests and gateway state");
    app.add_option("--backend", g.backend, "Chat backend")->check(CLI::IsMember({"scripted", "http"}));
    app.add_option("--fixtures", g.fixtures, "Scripted fixture directory (chat.json, tools.json)");
    app.add_option("--seed", g.seed, "Seed for session ids and evaluation order");
    app.add_flag("--json", g.json, "Machine-readable output");
    app.add_option("--endpoint", g.endpoint, "Chat-completions URL for --backend http");
    app.add_option("--model", g.model, "Model name for --backend http");

    std::function<int()> action;

    // run
    auto* run = app.add_subcommand("run", "Run one research session headless");
    std::string objective, output_dir = "evoflow_outputs", record_file;
    std::vector<std::string> answers;
    bool strict = false;
    run->add_option("objective", objective, "Research objective")->required();
    run->add_option("--output-dir", output_dir, "Directory for tool outputs and the report");
    run->add_option("--record", record_file, "Run record path (default <output-dir>/run_record.ndjson)");
    run->add_option("--answer", answers, "Answers to clarification questions, in order");
    run->add_flag("--strict", strict, "Fail the session when the report cites unknown references");
    run->callback([&] {
        action = [&]() -> int {
            const BackendBinding binding = backend_binding(g);
            auto tb = make_toolbox(g);
            SessionConfig sc;
            sc.output_dir = output_dir;
            sc.seed = g.seed;
            sc.verification.strict = strict;
            sc.record_file = record_file.empty() ? std::filesystem::path(output_dir) / "run_record.ndjson"
                                                 : std::filesystem::path(record_file);
            Session session(*tb->registry, tb->executors, make_backend(binding), sc, objective);
            Phase phase = session.run();
            std::size_t next_answer = 0;
            while (phase == Phase::AwaitingClarification && next_answer < answers.size()) {
                session.answer_clarification(answers[next_answer++]);
                phase = session.run();
            }
            Json result{{"session_id", session.session_id()},
                        {"phase", to_string(phase)},
                        {"record_path", sc.record_file->generic_string()},
                        {"events", session.record().size()}};
            std::filesystem::path report_path;
            if (phase == Phase::Done) {
                report_path = std::filesystem::path(output_dir) / "report.md";
                write_text_file(report_path, report_markdown(*session.report()));
                result["report_path"] = report_path.generic_string();
                result["report"] = to_json(*session.report());
            } else if (phase == Phase::AwaitingClarification) {
                result["clarification"] = to_json(*session.pending_clarification());
            } else {
                result["failure_reason"] = session.failure_reason();
            }
            if (g.json) {
                out << result.dump(2) << "\n";
            } else {
                out << "session: " << session.session_id() << "\n";
                out << "phase: " << to_string(phase) << "\n";
                out << "record: " << sc.record_file->generic_string() << "\n";
                if (phase == Phase::Done) {
                    out << "report: " << report_path.generic_string() << "\n";
                    for (const auto& w : session.report()->warnings) out << "warning: " << w << "\n";
                } else if (phase == Phase::AwaitingClarification) {
                    out << "clarification needed: " << session.pending_clarification()->question << "\n";
                }
            }
            if (phase == Phase::Failed) {
                err << "error: " << session.failure_reason() << "\n";
                return 1;
            }
            return 0;
        };
    });

    // tools
    auto* tools = app.add_subcommand("tools", "Inspect and call registered tools");
    tools->require_subcommand(1);
    auto* tools_list = tools->add_subcommand("list", "List tools");
    std::string category;
    tools_list->add_option("--category", category, "Only this category");
    tools_list->callback([&] {
        action = [&]() -> int {
            auto tb = make_toolbox(g);
            const auto list = category.empty() ? tb->registry->list()
                                               : tb->registry->list(parse_tool_category(category));
            if (g.json) {
                Json arr = Json::array();
                for (const auto& t : list) arr.push_back(to_json(t));
                out << arr.dump(2) << "\n";
            } else {
                std::vector<std::vector<std::string>> rows;
                for (const auto& t : list)
                    rows.push_back({t.name, std::string(to_string(t.category)), t.executor});
                print_table(out, {"name", "category", "executor"}, rows);
            }
            return 0;
        };
    });
    auto* tools_show = tools->add_subcommand("show", "Show one tool");
    std::string tool_name;
    tools_show->add_option("name", tool_name, "Tool name")->required();
    tools_show->callback([&] {
        action = [&]() -> int {
            auto tb = make_toolbox(g);
            const ToolDescriptor t = tb->registry->get(tool_name);
            if (g.json) {
                Json j{{"tool", to_json(t)}};
                if (auto m = tb->registry->manifest(tool_name)) j["manifest"] = to_json(*m);
                out << j.dump(2) << "\n";
                return 0;
            }
            out << t.name << " [" << to_string(t.category) << "]\n" << t.description << "\n\n";
            std::vector<std::vector<std::string>> rows;
            for (const auto& p : t.params) {
                std::string allowed;
                if (p.allowed)
                    for (const auto& a : *p.allowed) allowed += (allowed.empty() ? "" : "|") + (a.is_string() ? a.get<std::string>() : a.dump());
                rows.push_back({p.name, std::string(to_string(p.kind)), p.required ? "yes" : "no",
                                p.default_value ? p.default_value->dump() : "", allowed});
            }
            print_table(out, {"param", "kind", "required", "default", "allowed"}, rows);
            return 0;
        };
    });
    auto* tools_call = tools->add_subcommand("call", "Invoke a tool directly");
    std::string call_args = "{}", call_output = "evoflow_outputs";
    tools_call->add_option("name", tool_name, "Tool name")->required();
    tools_call->add_option("--args", call_args, "Arguments as JSON text or a JSON file");
    tools_call->add_option("--output-dir", call_output, "Directory for files the tool writes");
    tools_call->callback([&] {
        action = [&]() -> int {
            auto tb = make_toolbox(g);
            const Json args = tb->registry->validate_invocation(tool_name, load_json_arg(call_args));
            const ToolDescriptor t = tb->registry->get(tool_name);
            LogicalClock clock;
            ExecContext ctx{tool_name, "cli", call_output, tb->registry.get(), &clock};
            const Json result = tb->executors.run(t.executor, args, ctx);
            out << result.dump(2) << "\n";
            return result.is_object() && result.value("success", true) == false ? 1 : 0;
        };
    });

    // evolve
    auto* evolve = app.add_subcommand("evolve", "Ridge fitting and combination ranking");
    evolve->require_subcommand(1);
    auto* fit = evolve->add_subcommand("fit", "Fit a one-hot ridge model on single-mutant scores");
    std::string fit_csv, fit_out, variant_col = "variant", score_col = "score";
    double lambda = 1.0;
    fit->add_option("csv", fit_csv, "variant,score table")->required()->check(CLI::ExistingFile);
    fit->add_option("--lambda", lambda, "Ridge penalty");
    fit->add_option("--out", fit_out, "Write the model JSON here");
    fit->add_option("--variant-column", variant_col, "Variant column name");
    fit->add_option("--score-column", score_col, "Score column name");
    fit->callback([&] {
        action = [&]() -> int {
            std::size_t skipped = 0;
            const auto obs =
                evolution::observations_from_csv(parse_csv(read_text_file(fit_csv)), &skipped, variant_col, score_col);
            const auto model = evolution::fit_ridge(obs, lambda);
            if (!fit_out.empty()) write_text_file(fit_out, to_json(model).dump(2) + "\n");
            if (g.json) {
                Json j = to_json(model);
                j["skipped_rows"] = skipped;
                out << j.dump(2) << "\n";
            } else {
                out << "observations: " << model.n_observations << " (skipped " << skipped << ")\n";
                out << "features: " << model.features.size() << "\n";
                out << "intercept: " << num(model.intercept) << "\n";
                out << "train r2: " << num(model.train_r2) << "  rmse: " << num(model.train_rmse) << "\n";
                std::vector<std::vector<std::string>> rows;
                for (std::size_t i = 0; i < model.features.size(); ++i)
                    rows.push_back({model.features[i], num(model.weights[i])});
                print_table(out, {"mutation", "weight"}, rows);
            }
            return 0;
        };
    });
    auto* combos = evolve->add_subcommand("combos", "Rank multi-mutation combinations from a fitted model");
    std::string model_file;
    std::vector<int> orders;
    std::size_t top = 5;
    combos->add_option("model", model_file, "Model JSON from evolve fit")->required()->check(CLI::ExistingFile);
    combos->add_option("--order", orders, "Combination order (repeatable)")->default_val(std::vector<int>{2});
    combos->add_option("--top", top, "Combinations per order");
    combos->callback([&] {
        action = [&]() -> int {
            const auto model = evolution::ridge_model_from_json(read_json_file(model_file));
            const auto ranked =
                evolution::enumerate_top_combinations(model, std::set<int>(orders.begin(), orders.end()), top);
            if (g.json) {
                Json j = Json::object();
                for (const auto& [order, list] : ranked) {
                    Json arr = Json::array();
                    for (const auto& s : list) arr.push_back({{"variant", s.variant}, {"predicted_score", s.score}});
                    j[std::to_string(order)] = arr;
                }
                out << j.dump(2) << "\n";
            } else {
                std::vector<std::vector<std::string>> rows;
                for (const auto& [order, list] : ranked)
                    for (std::size_t i = 0; i < list.size(); ++i)
                        rows.push_back({std::to_string(order), std::to_string(i + 1), list[i].variant,
                                        num(list[i].score)});
                print_table(out, {"order", "rank", "variant", "predicted_score"}, rows);
            }
            return 0;
        };
    });

    // screen
    auto* screen = app.add_subcommand("screen", "Rank screening tables");
    screen->require_subcommand(1);
    auto* rank = screen->add_subcommand("rank", "Sort each table, keep the top rows, merge by candidate");
    std::vector<std::string> screen_files;
    std::string sort_column = "3", screen_out;
    std::size_t screen_top = 3;
    rank->add_option("files", screen_files, "CSV tables")->required()->check(CLI::ExistingFile);
    rank->add_option("--column", sort_column, "Sort column, 1-based index or header name");
    rank->add_option("--top", screen_top, "Rows kept per table");
    rank->add_option("--out", screen_out, "Directory for sorted tables and summary.csv");
    rank->callback([&] {
        action = [&]() -> int {
            std::vector<evolution::ScreeningTable> tables;
            for (const auto& f : screen_files)
                tables.push_back({std::filesystem::path(f).stem().string(), parse_csv(read_text_file(f))});
            const auto summary = evolution::rank_screening_tables(tables, sort_column, screen_top);
            if (!screen_out.empty()) {
                for (const auto& r : summary.ranked)
                    write_text_file(std::filesystem::path(screen_out) / (r.name + "_sorted.csv"), to_csv(r.sorted));
                write_text_file(std::filesystem::path(screen_out) / "summary.csv", to_csv(summary.merged));
            }
            if (g.json) {
                Json top_ids = Json::object();
                for (const auto& r : summary.ranked) top_ids[r.name] = r.top_ids;
                out << Json{{"top_candidates", top_ids}, {"summary_csv", to_csv(summary.merged)},
                            {"warnings", summary.warnings}}
                           .dump(2)
                    << "\n";
            } else {
                print_table(out, summary.merged.header, summary.merged.rows);
            }
            return 0;
        };
    });

    // automl
    auto* automl = app.add_subcommand("automl", "Training configuration tools");
    automl->require_subcommand(1);
    auto* gen = automl->add_subcommand("gen-config", "Generate a training config from a dataset");
    std::string gen_csv, gen_valid, gen_test, requirements, task, gen_out;
    gen->add_option("csv", gen_csv, "Training split CSV")->required()->check(CLI::ExistingFile);
    gen->add_option("--valid", gen_valid, "Validation split CSV");
    gen->add_option("--test", gen_test, "Test split CSV");
    gen->add_option("--requirements", requirements, "Free-text requirements");
    gen->add_option("--task", task, "Problem type");
    gen->add_option("--out", gen_out, "Write the config JSON here");
    gen->callback([&] {
        action = [&]() -> int {
            automl::DataManifest m;
            m.csv_file = gen_csv;
            if (!gen_valid.empty()) m.valid_csv_file = gen_valid;
            if (!gen_test.empty()) m.test_csv_file = gen_test;
            const auto config = automl::generate_config(m, task.empty() ? std::nullopt : std::optional(task), requirements);
            const std::string text = automl::to_json(config).dump(2) + "\n";
            if (!gen_out.empty()) write_text_file(gen_out, text);
            out << text;
            return 0;
        };
    });
    auto* validate = automl->add_subcommand("validate", "Check a training config");
    std::string config_file;
    validate->add_option("config", config_file, "Config JSON")->required()->check(CLI::ExistingFile);
    validate->callback([&] {
        action = [&]() -> int {
            const auto diags = automl::validate_config(automl::config_from_json(read_json_file(config_file)));
            if (g.json) {
                Json arr = Json::array();
                for (const auto& d : diags) arr.push_back({{"field", d.field}, {"message", d.message}});
                out << Json{{"valid", diags.empty()}, {"diagnostics", arr}}.dump(2) << "\n";
            } else if (diags.empty()) {
                out << "valid\n";
            } else {
                for (const auto& d : diags) out << d.field << ": " << d.message << "\n";
            }
            return diags.empty() ? 0 : 1;
        };
    });
    auto* search = automl->add_subcommand("search", "Propose the next config of a budgeted search");
    std::string space_file, history_file;
    std::size_t budget = 8;
    search->add_option("--space", space_file, "Search space JSON")->required()->check(CLI::ExistingFile);
    search->add_option("--history", history_file, "Trial history JSON")->check(CLI::ExistingFile);
    search->add_option("--budget", budget, "Total trials allowed");
    search->callback([&] {
        action = [&]() -> int {
            const Json s = read_json_file(space_file);
            automl::SearchSpace space;
            space.base = automl::config_from_json(s.value("base", Json::object()));
            space.training_methods = s.value("training_methods", std::vector<std::string>{});
            space.plm_models = s.value("plm_models", std::vector<std::string>{});
            space.learning_rates = s.value("learning_rates", std::vector<double>{});
            space.pooling_methods = s.value("pooling_methods", std::vector<std::string>{});
            std::vector<automl::TrialRecord> history;
            if (!history_file.empty())
                for (const auto& h : read_json_file(history_file))
                    history.push_back({automl::config_from_json(h.at("config")), h.value("metric_name", ""),
                                       h.at("metric_value").get<double>(), h.value("wall_time_s", 0.0)});
            const auto next = automl::propose_next_config(history, space, budget);
            out << (next ? Json{{"done", false}, {"config", automl::to_json(*next)}} : Json{{"done", true}}).dump(2)
                << "\n";
            return 0;
        };
    });

    // eval
    auto* ev = app.add_subcommand("eval", "Benchmark evaluation");
    ev->require_subcommand(1);
    auto* ev_run = ev->add_subcommand("run", "Judge model responses over a benchmark");
    std::string benchmark_file, responses_file, eval_out;
    int parallelism = 1;
    ev_run->add_option("--benchmark", benchmark_file, "Benchmark NDJSON")->required()->check(CLI::ExistingFile);
    ev_run->add_option("--responses", responses_file, "Responses NDJSON")->required()->check(CLI::ExistingFile);
    ev_run->add_option("--out", eval_out, "Directory for results.csv, corpus.csv and report.json");
    ev_run->add_option("--parallelism", parallelism, "Concurrent pair judgments");
    ev_run->callback([&] {
        action = [&]() -> int {
            const auto bench = eval::load_benchmark(benchmark_file);
            for (const auto& w : bench.summary.warnings) err << "warning: " << w << "\n";
            const auto responses = eval::parse_responses(read_text_file(responses_file));
            auto backend = make_backend(backend_binding(g));
            std::optional<eval::JudgmentCache> cache;
            if (!eval_out.empty()) cache.emplace(std::filesystem::path(eval_out) / "judgments.ndjson");
            eval::TournamentOptions options;
            options.seed = g.seed;
            options.parallelism = parallelism;
            const auto report = eval::run_evaluation(bench.instances, responses, *backend, *backend, options,
                                                     cache ? &*cache : nullptr);
            if (!eval_out.empty()) {
                const std::filesystem::path dir = eval_out;
                write_text_file(dir / "results.csv", eval::results_csv(report, bench.instances));
                write_text_file(dir / "corpus.csv", eval::to_csv(report.corpus));
                write_text_file(dir / "report.json", eval::to_json(report).dump(2) + "\n");
            }
            if (g.json) {
                out << eval::to_json(report).dump(2) << "\n";
            } else {
                std::vector<std::vector<std::string>> rows;
                for (const auto& t : report.corpus.tiers)
                    for (const auto& m : report.corpus.models)
                        rows.push_back({t.tier, std::to_string(t.n_instances), m, num(t.mean_score.at(m)),
                                        num(t.normalized.at(m))});
                print_table(out, {"tier", "instances", "model", "mean_score", "normalized_0_100"}, rows);
            }
            return 0;
        };
    });
    auto* ev_score = ev->add_subcommand("score", "Rank-weighted scores from a win table");
    std::string wins_arg;
    ev_score->add_option("wins", wins_arg, "JSON object model -> wins, inline or as a file")->required();
    ev_score->callback([&] {
        action = [&]() -> int {
            const auto wins = load_json_arg(wins_arg).get<std::map<std::string, int>>();
            const auto r = eval::score_tournament(wins);
            if (g.json) {
                out << eval::to_json(r).dump(2) << "\n";
            } else {
                std::vector<std::vector<std::string>> rows;
                for (const auto& [m, w] : r.wins)
                    rows.push_back({m, std::to_string(w), std::to_string(r.ranks.at(m)), num(r.scores.at(m))});
                print_table(out, {"model", "wins", "rank", "score"}, rows);
            }
            return 0;
        };
    });
    auto* curate = ev->add_subcommand("curate", "Committee totals and top-k selection");
    std::string curation_file;
    std::size_t curate_top = 0;
    curate->add_option("scores", curation_file, "JSON list of {question_id, committee}")->required()->check(
        CLI::ExistingFile);
    curate->add_option("--top", curate_top, "Keep this many questions (0 keeps all)");
    curate->callback([&] {
        action = [&]() -> int {
            std::vector<eval::CurationScore> scores;
            for (const auto& q : read_json_file(curation_file))
                scores.push_back(eval::score_curation(q.at("question_id").get<std::string>(),
                                                      q.at("committee").get<std::map<std::string, double>>()));
            const auto selected = eval::select_top(scores, curate_top == 0 ? scores.size() : curate_top);
            if (g.json) {
                Json arr = Json::array();
                for (const auto& s : selected)
                    arr.push_back({{"question_id", s.question_id}, {"committee", s.committee}, {"total", s.total}});
                out << arr.dump(2) << "\n";
            } else {
                std::vector<std::vector<std::string>> rows;
                for (const auto& s : selected) rows.push_back({s.question_id, num(s.total)});
                print_table(out, {"question_id", "total"}, rows);
            }
            return 0;
        };
    });

    // serve
    auto* serve = app.add_subcommand("serve", "Serve the HTTP gateway");
    std::string host = "127.0.0.1", token;
    int port = 8080;
    serve->add_option("--host", host, "Bind address");
    serve->add_option("--port", port, "Port (0 picks a free one)");
    serve->add_option("--token", token, "Require this bearer token (default $EVOFLOW_GATEWAY_TOKEN)");
    serve->callback([&] {
        action = [&]() -> int {
            GatewayConfig gc;
            gc.host = host;
            gc.port = port;
            gc.data_dir = g.data_dir.empty() ? "evoflow_data" : g.data_dir;
            gc.backend = backend_binding(g);
            gc.session_defaults.seed = g.seed;
            if (token.empty())
                if (const char* env = std::getenv("EVOFLOW_GATEWAY_TOKEN")) token = env;
            if (!token.empty()) gc.bearer_token = token;
            Gateway gateway(gc);
            const int bound = gateway.start();
            out << "listening on http://" << host << ":" << bound << "\n" << std::flush;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            gateway.serve([] { return g_interrupted.load(); });
            return 0;
        };
    });

    try {
        app.parse(argc, argv);
        apply_config_file(app, g);
        if (!action) throw UsageError("no command given");
        return action();
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            app.exit(e, out, err);
            return 0;
        }
        err << "usage error: " << e.what() << "\n" << app.help();
        return 2;
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        if (g.json)
            out << Json{{"error", {{"code", to_string(e.code())}, {"message", e.detail()}}}}.dump(2) << "\n";
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        if (g.json) out << Json{{"error", {{"code", "internal"}, {"message", e.what()}}}}.dump(2) << "\n";
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace evoflow
