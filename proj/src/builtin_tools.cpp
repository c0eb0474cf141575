#include "evoflow/builtin_tools.hpp"

#include "evoflow/automl.hpp"
#include "evoflow/csv.hpp"
#include "evoflow/error.hpp"
#include "evoflow/evolution.hpp"
#include "evoflow/run_record.hpp"

#include <cmath>
#include <regex>

namespace evoflow {

namespace {

ParamSpec req(std::string name, ParamKind kind = ParamKind::string)
{
    return ParamSpec{std::move(name), kind, true, std::nullopt, std::nullopt};
}

ParamSpec opt(std::string name, ParamKind kind = ParamKind::string, std::optional<Json> def = std::nullopt)
{
    return ParamSpec{std::move(name), kind, false, std::move(def), std::nullopt};
}

ParamSpec choice(std::string name, std::vector<Json> allowed, std::optional<Json> def = std::nullopt)
{
    const bool required = !def.has_value();
    return ParamSpec{std::move(name), ParamKind::enum_choice, required, std::move(def), std::move(allowed)};
}

ToolDescriptor tool(std::string name, ToolCategory category, std::string description, std::vector<ParamSpec> params,
                    std::string executor = "fixture")
{
    return ToolDescriptor{std::move(name), std::move(description), category, std::move(params), std::move(executor)};
}

std::vector<ParamSpec> search_params()
{
    return {req("query"), opt("max_results", ParamKind::integer, 5)};
}

const std::vector<Json>& function_tasks()
{
    static const std::vector<Json> tasks{"Solubility",
                                         "Subcellular Localization",
                                         "Membrane Protein",
                                         "Metal Ion Binding",
                                         "Stability",
                                         "Sortingsignal",
                                         "Optimal Temperature",
                                         "Kcat",
                                         "Optimal PH",
                                         "Immunogenicity Prediction - Virus",
                                         "Immunogenicity Prediction - Bacteria",
                                         "Immunogenicity Prediction - Tumor"};
    return tasks;
}

std::string string_arg(const Json& args, const char* key)
{
    if (!args.contains(key) || !args[key].is_string()) return {};
    return args[key].get<std::string>();
}

std::filesystem::path output_dir_of(const ExecContext& ctx)
{
    return ctx.output_dir.empty() ? std::filesystem::path("evoflow_outputs") : ctx.output_dir;
}

Json failure(const std::string& message)
{
    return Json{{"success", false}, {"error", message}};
}

Json run_generate_config(const Json& args, const ExecContext& ctx)
{
    automl::DataManifest manifest;
    std::string csv = string_arg(args, "csv_file");
    const std::string dataset = string_arg(args, "dataset_path");
    if (csv.empty() && !dataset.empty()) {
        const std::filesystem::path dir(dataset);
        csv = (dir / "train.csv").generic_string();
        if (!args.contains("valid_csv_file") && std::filesystem::exists(dir / "valid.csv"))
            manifest.valid_csv_file = (dir / "valid.csv").generic_string();
        if (!args.contains("test_csv_file") && std::filesystem::exists(dir / "test.csv"))
            manifest.test_csv_file = (dir / "test.csv").generic_string();
    }
    if (csv.empty()) return failure("generate_training_config needs csv_file or dataset_path");
    if (!std::filesystem::exists(csv)) return failure("File not found: " + csv);
    manifest.csv_file = csv;
    if (auto v = string_arg(args, "valid_csv_file"); !v.empty()) manifest.valid_csv_file = v;
    if (auto t = string_arg(args, "test_csv_file"); !t.empty()) manifest.test_csv_file = t;

    const automl::TrainingConfig config =
        automl::generate_config(manifest, std::nullopt, string_arg(args, "user_requirements"));
    const auto diagnostics = automl::validate_config(config);
    if (!diagnostics.empty()) return failure("generated config is invalid: " + diagnostics.front().message);

    std::string name = string_arg(args, "output_name");
    if (name.empty()) name = "training_config";
    const auto path = output_dir_of(ctx) / "configs" / (name + ".json");
    const Json body = automl::to_json(config);
    write_text_file(path, body.dump(2) + "\n");
    return Json{{"success", true}, {"config_path", path.generic_string()}, {"config", body}};
}

Json run_train(const Json& args, const ExecContext& ctx, ToolFixtures& fixtures, ExecutorTable& table)
{
    const std::string config_path = string_arg(args, "config_path");
    if (!std::filesystem::exists(config_path)) return failure("File not found: " + config_path);
    const automl::TrainingConfig config = automl::config_from_json(read_json_file(config_path));
    const auto diagnostics = automl::validate_config(config);
    if (!diagnostics.empty())
        return failure("invalid config field '" + diagnostics.front().field + "': " + diagnostics.front().message);

    Json run = fixtures.next(ctx.tool_name);
    if (!run.value("success", true)) return run;
    std::map<std::string, double> metrics;
    if (run.contains("metrics") && run["metrics"].is_object()) {
        for (const auto& [k, v] : run["metrics"].items())
            if (v.is_number()) metrics[k] = v.get<double>();
    } else {
        metrics = parse_training_metrics(run.value("logs", ""));
    }

    const std::string model_name = config.output_model_name.value_or("model.pt");
    const std::string model_ref = config.output_dir + "/" + model_name;
    const auto stub = output_dir_of(ctx) / model_ref;
    write_text_file(stub, canonical(Json{{"checkpoint", model_ref}, {"config", automl::to_json(config)}}) + "\n");
    table.add_checkpoint(model_ref);

    Json out = run;
    out["success"] = true;
    out["model_path"] = model_ref;
    out["output_dir"] = config.output_dir;
    out["config_path"] = config_path;
    out["metrics"] = metrics;
    return out;
}

Json run_package(const Json& args, const ExecContext& ctx)
{
    if (!ctx.registry) throw Error(Errc::invalid_argument, "package_model_tool needs a registry");
    const std::string config_path = string_arg(args, "config_path");
    if (!std::filesystem::exists(config_path)) return failure("File not found: " + config_path);
    const automl::TrainingConfig config = automl::config_from_json(read_json_file(config_path));

    automl::PackageRequest request;
    request.tool_name = string_arg(args, "tool_name");
    request.description = string_arg(args, "description");
    request.checkpoint_ref = string_arg(args, "model_path");
    if (args.contains("metrics") && args["metrics"].is_object())
        for (const auto& [k, v] : args["metrics"].items())
            if (v.is_number() && manifest_metric_keys().count(k)) request.metrics[k] = v.get<double>();
    request.created_at = ctx.clock ? ctx.clock->now() : WallClock().now();
    request.provenance = ctx.session_id;

    const SynthesizedToolManifest manifest = automl::package_manifest(config, request);
    const RegistrationReceipt receipt = ctx.registry->register_synthesized(manifest);
    Json out{{"success", true},
             {"tool_name", receipt.name},
             {"registry_version", receipt.version},
             {"manifest", to_json(manifest)}};
    if (receipt.manifest_path) out["manifest_path"] = receipt.manifest_path->generic_string();
    return out;
}

Json run_model_predict(const Json& args, const ExecContext& ctx, ToolFixtures& fixtures)
{
    const bool has_seq = !string_arg(args, "sequence").empty();
    const bool has_csv = !string_arg(args, "csv_file").empty();
    if (has_seq == has_csv) return failure("provide exactly one of sequence or csv_file");
    if (has_csv && !std::filesystem::exists(string_arg(args, "csv_file")))
        return failure("File not found: " + string_arg(args, "csv_file"));
    return fixtures.next(ctx.tool_name);
}

Json run_ridge(const Json& args, const ExecContext& ctx)
{
    const std::string csv_file = string_arg(args, "csv_file");
    if (!std::filesystem::exists(csv_file)) return failure("File not found: " + csv_file);
    const CsvTable table = parse_csv(read_text_file(csv_file));
    std::size_t skipped = 0;
    const auto observations = evolution::observations_from_csv(table, &skipped);

    const std::string reference = string_arg(args, "reference_sequence");
    if (!reference.empty())
        for (const auto& o : observations)
            for (const auto& m : o.variant) evolution::parse_mutation(m.to_string(), reference);

    const double lambda = args.value("lambda", 1.0);
    const evolution::RidgeModel model = evolution::fit_ridge(observations, lambda);
    const int max_order = std::min<int>(args.value("max_order", 4), static_cast<int>(model.features.size()));
    const auto top_k = static_cast<std::size_t>(std::max(1, args.value("top_k", 5)));
    std::set<int> orders;
    for (int r = 2; r <= max_order; ++r) orders.insert(r);
    const auto combos = orders.empty() ? std::map<int, std::vector<evolution::ScoredCombination>>{}
                                       : evolution::enumerate_top_combinations(model, orders, top_k);

    const auto dir = output_dir_of(ctx) / "ridge";
    const auto model_path = dir / "ridge_model.json";
    write_text_file(model_path, evolution::to_json(model).dump(2) + "\n");
    CsvTable ranked{{"order", "rank", "variant", "predicted_score"}, {}};
    Json top = Json::object();
    for (const auto& [order, list] : combos) {
        Json entries = Json::array();
        for (std::size_t i = 0; i < list.size(); ++i) {
            entries.push_back({{"variant", list[i].variant}, {"predicted_score", list[i].score}});
            Json score = list[i].score;
            ranked.rows.push_back({std::to_string(order), std::to_string(i + 1), list[i].variant, score.dump()});
        }
        top[std::to_string(order) + "_point_mutations"] = entries;
    }
    const auto combos_path = dir / "top_combinations.csv";
    write_text_file(combos_path, to_csv(ranked));

    return Json{{"success", true},
                {"output_files", Json::array({model_path.generic_string(), combos_path.generic_string()})},
                {"summary", "Fitted one-hot ridge regression on " + std::to_string(model.n_observations) +
                                " observations over " + std::to_string(model.features.size()) +
                                " single mutations and ranked combinations of order 2 to " +
                                std::to_string(max_order) + "."},
                {"model_info",
                 {{"name", "one_hot_ridge"},
                  {"path", model_path.generic_string()},
                  {"lambda", lambda},
                  {"metrics", {{"r2_score_train", model.train_r2}, {"rmse_train", model.train_rmse}}}}},
                {"details",
                 {{"top_predicted_combinations", top},
                  {"n_observations", model.n_observations},
                  {"skipped_rows", skipped}}}};
}

Json run_check_mutation(const Json& args, const ExecContext&)
{
    std::string sequence = string_arg(args, "sequence");
    if (sequence.empty()) {
        const std::string fasta = string_arg(args, "fasta_file");
        if (fasta.empty()) return failure("provide sequence or fasta_file");
        if (!std::filesystem::exists(fasta)) return failure("File not found: " + fasta);
        sequence = evolution::parse_fasta(read_text_file(fasta)).front().sequence;
    }
    const int position = args.value("position", 0);
    const std::string wild = string_arg(args, "wild_residue");
    const std::string mutant = string_arg(args, "mutant_residue");
    if (wild.size() != 1) return failure("wild_residue must be one letter");
    if (position < 1 || static_cast<std::size_t>(position) > sequence.size())
        return failure("position-out-of-range: " + std::to_string(position) + " outside 1.." +
                       std::to_string(sequence.size()));

    const char found = sequence[static_cast<std::size_t>(position - 1)];
    if (found != wild[0]) {
        const Error err(Errc::wild_mismatch, "expected " + std::string(1, found) + ", found " + wild + " at position " +
                                                 std::to_string(position));
        const std::string found_name(evolution::residue_name(found));
        const std::string claimed_name(evolution::residue_name(wild[0]));
        return Json{{"success", false},
                    {"error", err.what()},
                    {"premise_error",
                     {{"kind", "wild-mismatch"},
                      {"position", position},
                      {"expected", std::string(1, found)},
                      {"found", wild},
                      {"expected_name", found_name},
                      {"found_name", claimed_name}}},
                    {"message", "Premise error (wild-mismatch): the residue at position " + std::to_string(position) +
                                    " is " + found_name + " (" + std::string(1, found) + "), not " + claimed_name +
                                    " (" + wild + "). The requested change was not applied."}};
    }
    Json out{{"success", true},
             {"position", position},
             {"wild_residue", wild},
             {"wild_name", std::string(evolution::residue_name(found))}};
    if (!mutant.empty()) {
        const auto m = evolution::parse_mutation(wild + std::to_string(position) + mutant, sequence);
        std::string mutated = sequence;
        mutated[static_cast<std::size_t>(position - 1)] = m.mutant;
        out["mutation"] = m.to_string();
        out["mutated_sequence"] = mutated;
    }
    return out;
}

Json run_read_fasta(const Json& args, const ExecContext&)
{
    const std::string path = string_arg(args, "fasta_file");
    if (!std::filesystem::exists(path)) return failure("File not found: " + path);
    Json records = Json::array();
    for (const auto& r : evolution::parse_fasta(read_text_file(path)))
        records.push_back({{"id", r.id}, {"description", r.description}, {"sequence", r.sequence},
                           {"length", r.sequence.size()}});
    return Json{{"success", true}, {"fasta_file", path}, {"records", records}};
}

Json run_read_skill(const Json& args, const ExecContext& ctx)
{
    if (!ctx.registry) throw Error(Errc::invalid_argument, "read_skill needs a registry");
    try {
        const SkillDoc doc = ctx.registry->lookup_skill(string_arg(args, "skill_id"));
        return Json{{"success", true}, {"skill_id", doc.skill_id}, {"title", doc.title}, {"content", doc.body}};
    } catch (const Error& e) {
        return failure(e.what());
    }
}

Json run_rank_tables(const Json& args, const ExecContext& ctx)
{
    std::vector<evolution::ScreeningTable> tables;
    for (const auto& f : args.at("input_files")) {
        const std::filesystem::path path(f.get<std::string>());
        if (!std::filesystem::exists(path)) return failure("File not found: " + path.generic_string());
        tables.push_back({path.stem().string(), parse_csv(read_text_file(path))});
    }
    const auto summary = evolution::rank_screening_tables(tables, args.value("sort_column", std::string("3")),
                                                          static_cast<std::size_t>(args.value("top_k", 3)));
    const auto dir = output_dir_of(ctx) / "screening";
    Json files = Json::array();
    Json top = Json::object();
    for (const auto& r : summary.ranked) {
        const auto path = dir / (r.name + "_sorted.csv");
        write_text_file(path, to_csv(r.sorted));
        files.push_back(path.generic_string());
        top[r.name] = r.top_ids;
    }
    const auto merged_path = dir / "summary.csv";
    write_text_file(merged_path, to_csv(summary.merged));
    files.push_back(merged_path.generic_string());

    Json rows = Json::array();
    for (const auto& row : summary.merged.rows) {
        Json obj = Json::object();
        for (std::size_t i = 0; i < summary.merged.header.size() && i < row.size(); ++i)
            obj[summary.merged.header[i]] = row[i];
        rows.push_back(obj);
    }
    return Json{{"success", true},
                {"output_files", files},
                {"summary", "Ranked " + std::to_string(tables.size()) + " screening tables and merged " +
                                std::to_string(summary.merged.rows.size()) + " selected candidates."},
                {"details", {{"top_candidates", top}, {"final_summary_table", rows}, {"warnings", summary.warnings}}}};
}

} // namespace

std::vector<ToolDescriptor> builtin_catalog()
{
    using C = ToolCategory;
    using K = ParamKind;
    std::vector<ToolDescriptor> tools;

    tools.push_back(tool("literature_search", C::research_search, "Search scientific literature and return references.",
                         {req("query"), opt("max_results", K::integer, 5),
                          choice("source", {"arxiv", "pubmed", "biorxiv", "semantic_scholar"}, "arxiv")}));
    tools.push_back(tool("deep_search", C::research_search, "Multi-source web search for datasets and resources.",
                         search_params()));
    tools.push_back(tool("web_search", C::research_search, "General web search.", search_params()));
    for (const char* name : {"query_arxiv", "query_github", "query_hugging_face", "query_pubmed", "query_tavily"})
        tools.push_back(tool(name, C::research_search, std::string("Search source ") + (name + 6) + ".",
                             search_params()));

    tools.push_back(tool("download_uniprot_seq_by_id", C::database, "Download a UniProt sequence as FASTA.",
                         {req("uniprot_id"), opt("out_path", K::file_path)}));
    tools.push_back(tool("UniProt_query", C::database, "Query a UniProt entry for sequence and annotations.",
                         {req("uniprot_id")}));
    tools.push_back(tool("download_alphafold_structure_by_uniprot_id", C::database,
                         "Download a predicted structure from the AlphaFold database.",
                         {req("uniprot_id"), opt("out_dir", K::file_path), choice("format", {"pdb", "cif"}, "pdb")}));
    tools.push_back(tool("download_ncbi_sequence", C::database, "Download an NCBI sequence.",
                         {req("ncbi_id"), opt("out_path", K::file_path), choice("db", {"protein", "nuccore"}, "protein")}));
    tools.push_back(tool("download_rcsb_structure_by_pdb_id", C::database, "Download an RCSB PDB structure.",
                         {req("pdb_id"), opt("out_dir", K::file_path),
                          choice("file_type", {"pdb", "cif", "xml"}, "pdb")}));
    tools.push_back(tool("download_interpro_metadata_by_id", C::database, "Download InterPro entry metadata.",
                         {req("interpro_id"), opt("out_dir", K::file_path)}));
    tools.push_back(tool("download_interpro_annotations_by_uniprot_id", C::database,
                         "Download InterPro annotations for a UniProt entry.",
                         {req("uniprot_id"), opt("out_dir", K::file_path)}));

    tools.push_back(tool("enzyme_mine_VenusMine", C::discovery, "Structure-driven enzyme mining from a seed structure.",
                         {req("pdb_file", K::file_path), opt("protect_start", K::integer, 1),
                          opt("protect_end", K::integer, -1)}));
    tools.push_back(tool("foldseek_search", C::discovery, "Structural homology search.",
                         {req("pdb_file_path", K::file_path), opt("protect_start", K::integer, 1),
                          opt("protect_end", K::integer, -1)}));
    tools.push_back(tool("predict_structure_esmfold", C::discovery, "Predict a structure with ESMFold.",
                         {req("sequence"), opt("output_dir", K::file_path), opt("output_file"),
                          opt("verbose", K::boolean, false)}));
    tools.push_back(tool("protein_structure_prediction_AlphaFold2", C::discovery, "Predict a structure with AlphaFold2.",
                         {req("sequence"), opt("save_path", K::file_path)}));
    tools.push_back(tool("predict_protein_function", C::discovery, "Protein-level function prediction.",
                         {req("fasta_file", K::file_path), choice("task", function_tasks()),
                          choice("model_name", {"ESM2-650M", "Ankh-large", "ProtT5-xl-uniref50"}, "ESM2-650M")}));
    tools.push_back(tool("predict_residue_function", C::discovery, "Residue-level function prediction.",
                         {req("fasta_file", K::file_path),
                          choice("task", {"Activity Site", "Binding Site", "Conserved Site", "Motif"}),
                          choice("model_name", {"ESM2-650M", "Ankh-large", "ProtT5-xl-uniref50"}, "ESM2-650M")}));

    tools.push_back(tool("zero_shot_mutation_sequence_prediction", C::directed_evolution,
                         "Score all single substitutions of a sequence with a protein language model.",
                         {opt("sequence"), opt("fasta_file", K::file_path), opt("model_name", K::string, "ESM2-650M")}));
    tools.push_back(tool("zero_shot_mutation_structure_prediction", C::directed_evolution,
                         "Score all single substitutions with a structure-aware model.",
                         {req("structure_file", K::file_path), opt("model_name", K::string, "ProSST-2048")}));
    tools.push_back(tool("zero_shot_structure_prediction", C::directed_evolution,
                         "Homology-informed zero-shot mutation scoring from a structure.",
                         {req("structure_file", K::file_path), opt("model_name", K::string, "VenusREM (foldseek-based)")}));
    tools.push_back(tool("ridge_combination_prediction", C::directed_evolution,
                         "Fit one-hot ridge regression on single-mutant fitness and rank multi-mutant combinations.",
                         {req("csv_file", K::file_path), opt("max_order", K::integer, 4), opt("top_k", K::integer, 5),
                          opt("lambda", K::real, 1.0), opt("reference_sequence")},
                         "ridge_combination_prediction"));
    tools.push_back(tool("check_mutation", C::directed_evolution,
                         "Check a claimed wild-type residue against a sequence before mutating it.",
                         {req("position", K::integer), req("wild_residue"), opt("sequence"),
                          opt("fasta_file", K::file_path), opt("mutant_residue")},
                         "check_mutation"));

    tools.push_back(tool("generate_training_config", C::automl, "Generate a fine-tuning configuration from a dataset.",
                         {opt("csv_file", K::file_path), opt("dataset_path", K::file_path),
                          opt("valid_csv_file", K::file_path), opt("test_csv_file", K::file_path), opt("output_name"),
                          opt("user_requirements")},
                         "generate_training_config"));
    tools.push_back(tool("train_protein_model", C::automl, "Fine-tune a protein language model from a config file.",
                         {req("config_path", K::file_path)}, "train_protein_model"));
    tools.push_back(tool("protein_model_predict", C::automl, "Predict with a fine-tuned model.",
                         {req("config_path", K::file_path), opt("sequence"), opt("csv_file", K::file_path)},
                         "protein_model_predict"));
    tools.push_back(tool("package_model_tool", C::automl,
                         "Package a trained checkpoint as a persistent prediction tool and register it.",
                         {req("tool_name"), req("model_path", K::file_path), req("config_path", K::file_path),
                          opt("description"), opt("metrics", K::map)},
                         "package_model_tool"));

    tools.push_back(tool("ai_code_execution", C::code_execution, "Generate and run a script for a described task.",
                         {req("task_description"), opt("input_files", K::list_of_strings)}));
    tools.push_back(tool("agent_generated_code", C::code_execution, "Generate and run a longer file-oriented script.",
                         {req("task_description"), opt("input_files", K::list_of_strings)}));
    tools.push_back(tool("python_repl", C::code_execution, "Run a short Python snippet.", {req("code")}));

    tools.push_back(tool("read_fasta", C::plumbing, "Read records from a FASTA file.", {req("fasta_file", K::file_path)},
                         "read_fasta"));
    tools.push_back(tool("read_skill", C::plumbing, "Return the document of a skill.", {req("skill_id")}, "read_skill"));
    tools.push_back(tool("rank_screening_tables", C::plumbing,
                         "Sort screening CSVs by a column, keep the top rows, and merge them by candidate.",
                         {req("input_files", K::list_of_strings), opt("sort_column", K::string, "3"),
                          opt("top_k", K::integer, 3)},
                         "rank_screening_tables"));
    return tools;
}

std::vector<SkillDoc> builtin_skills()
{
    return {
        SkillDoc{"rdkit-skill", "Small-molecule handling with RDKit",
                 "# RDKit\n\nParse SMILES with `Chem.MolFromSmiles`, reject `None` results, and compute descriptors "
                 "with `rdkit.Chem.Descriptors`. Write tables as CSV next to the inputs and report their paths.\n"},
        SkillDoc{"brenda-database-skill", "Enzyme kinetics lookup in BRENDA",
                 "# BRENDA\n\nQuery by EC number. Keep organism, substrate, and the reported value with its unit. "
                 "Values without a literature reference are dropped.\n"},
        SkillDoc{"plotting-skill", "Figures with matplotlib",
                 "# Plotting\n\nUse the Agg backend, one figure per file, PNG at 150 dpi. Return the saved paths.\n"},
    };
}

std::map<std::string, double> parse_training_metrics(std::string_view logs)
{
    static const std::regex line(R"(Test\s+([A-Za-z0-9_]+)\s*:\s*([-+0-9.eE]+))");
    std::map<std::string, double> out;
    const std::string text(logs);
    for (auto it = std::sregex_iterator(text.begin(), text.end(), line); it != std::sregex_iterator(); ++it) {
        std::string name = (*it)[1].str();
        std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
        if (!manifest_metric_keys().count(name)) continue;
        try {
            const double v = std::stod((*it)[2].str());
            if (std::isfinite(v)) out[name] = v;
        } catch (const std::exception&) {
        }
    }
    return out;
}

void bind_builtin_executors(ExecutorTable& table, FixtureSource fixtures)
{
    table.bind("fixture", [fixtures](const Json&, const ExecContext& ctx) { return fixtures(ctx).next(ctx.tool_name); });
    table.bind("generate_training_config", run_generate_config);
    table.bind("train_protein_model", [fixtures, &table](const Json& args, const ExecContext& ctx) {
        return run_train(args, ctx, fixtures(ctx), table);
    });
    table.bind("package_model_tool", run_package);
    table.bind("protein_model_predict", [fixtures](const Json& args, const ExecContext& ctx) {
        return run_model_predict(args, ctx, fixtures(ctx));
    });
    table.bind("ridge_combination_prediction", run_ridge);
    table.bind("check_mutation", run_check_mutation);
    table.bind("read_fasta", run_read_fasta);
    table.bind("read_skill", run_read_skill);
    table.bind("rank_screening_tables", run_rank_tables);
}

void bind_builtin_executors(ExecutorTable& table, std::shared_ptr<ToolFixtures> fixtures)
{
    if (!fixtures) fixtures = std::make_shared<ToolFixtures>();
    bind_builtin_executors(table, [fixtures](const ExecContext&) -> ToolFixtures& { return *fixtures; });
}

void register_builtins(ToolRegistry& registry)
{
    for (const auto& t : builtin_catalog()) registry.register_tool(t);
    for (const auto& s : builtin_skills()) registry.register_skill(s);
}

} // namespace evoflow
