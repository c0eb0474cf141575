#include "evoflow/automl.hpp"
#include "evoflow/builtin_tools.hpp"
#include "evoflow/error.hpp"
#include "evoflow/eval.hpp"
#include "evoflow/evolution.hpp"
#include "evoflow/orchestrator.hpp"
#include "evoflow/plan.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace evoflow;

// JSON crosses the boundary as text; the Python package decodes it.
namespace {

std::string score_tournament(const std::map<std::string, int>& wins)
{
    return eval::to_json(eval::score_tournament(wins)).dump();
}

double score_curation(const std::map<std::string, double>& committee)
{
    return eval::score_curation("q", committee).total;
}

std::string fit_ridge(const std::vector<std::pair<std::string, double>>& rows, double lambda)
{
    std::vector<evolution::FitnessObservation> obs;
    for (const auto& [variant, score] : rows)
        obs.push_back({evolution::MutationCombination::parse(variant).mutations(), score});
    return to_json(evolution::fit_ridge(obs, lambda)).dump();
}

std::string top_combinations(const std::string& model_json, const std::set<int>& orders, std::size_t k)
{
    const auto model = evolution::ridge_model_from_json(Json::parse(model_json));
    Json out = Json::object();
    for (const auto& [order, list] : evolution::enumerate_top_combinations(model, orders, k)) {
        Json arr = Json::array();
        for (const auto& s : list) arr.push_back({{"variant", s.variant}, {"predicted_score", s.score}});
        out[std::to_string(order)] = arr;
    }
    return out.dump();
}

std::string parse_plan_text(const std::string& text)
{
    const ParsedPlan p = parse_plan(text);
    switch (p.kind) {
    case ParsedPlan::Kind::plan: return Json{{"kind", "plan"}, {"steps", serialize_plan(p.plan)}}.dump();
    case ParsedPlan::Kind::clarification:
        return Json{{"kind", "clarification"}, {"clarification", to_json(p.clarification)}}.dump();
    case ParsedPlan::Kind::empty: break;
    }
    return Json{{"kind", "empty"}}.dump();
}

std::string check_mutation(const std::string& token, const std::string& reference)
{
    const auto m = evolution::parse_mutation(token, reference);
    return Json{{"wild", std::string(1, m.wild)}, {"position", m.position}, {"mutant", std::string(1, m.mutant)}}.dump();
}

std::string generate_config(const std::string& csv_file, const std::string& requirements)
{
    automl::DataManifest m;
    m.csv_file = csv_file;
    return automl::to_json(automl::generate_config(m, std::nullopt, requirements)).dump();
}

std::vector<std::string> validate_config(const std::string& config_json)
{
    std::vector<std::string> out;
    for (const auto& d : automl::validate_config(automl::config_from_json(Json::parse(config_json))))
        out.push_back(d.field + ": " + d.message);
    return out;
}

Eigen::VectorXd pool(const Eigen::MatrixXd& H, const std::string& method, const Eigen::VectorXd& scorer, double bias)
{
    automl::PoolingParams p;
    p.scorer = scorer;
    p.bias = bias;
    return automl::pool_protein(H, automl::parse_pooling_method(method), p);
}

std::string run_session(const std::string& fixtures, const std::string& objective, const std::string& output_dir,
                        std::uint64_t seed)
{
    py::gil_scoped_release release;
    ExecutorTable executors;
    const std::filesystem::path dir = fixtures;
    auto tools = std::filesystem::exists(dir / "tools.json")
                     ? std::make_shared<ToolFixtures>(ToolFixtures::load(dir / "tools.json"))
                     : std::make_shared<ToolFixtures>();
    bind_builtin_executors(executors, tools);
    ToolRegistry registry(executors);
    register_builtins(registry);
    SessionConfig config;
    config.output_dir = output_dir;
    config.seed = seed;
    BackendBinding binding;
    binding.fixtures = dir;
    Session session(registry, executors, make_backend(binding), config, objective);
    const Phase phase = session.run();
    Json out{{"session_id", session.session_id()}, {"phase", to_string(phase)}, {"record", session.record().ndjson()}};
    if (session.report()) out["report"] = to_json(*session.report());
    if (phase == Phase::Failed) out["failure_reason"] = session.failure_reason();
    Json tools_after = Json::array();
    for (const auto& t : registry.list()) tools_after.push_back(t.name);
    out["tools"] = tools_after;
    return out.dump();
}

} // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Native core of the evoflow workflow engine";
    py::register_exception<Error>(m, "EvoflowError", PyExc_RuntimeError);
    m.def("score_tournament", &score_tournament, py::arg("wins"));
    m.def("score_curation", &score_curation, py::arg("committee"));
    m.def("fit_ridge", &fit_ridge, py::arg("rows"), py::arg("lam") = 1.0);
    m.def("top_combinations", &top_combinations, py::arg("model_json"), py::arg("orders"), py::arg("k"));
    m.def("parse_plan", &parse_plan_text, py::arg("text"));
    m.def("check_mutation", &check_mutation, py::arg("token"), py::arg("reference"));
    m.def("generate_config", &generate_config, py::arg("csv_file"), py::arg("requirements") = "");
    m.def("validate_config", &validate_config, py::arg("config_json"));
    m.def("pool_protein", &pool, py::arg("H"), py::arg("method") = "mean",
          py::arg("scorer") = Eigen::VectorXd(), py::arg("bias") = 0.0);
    m.def("project_residues", &automl::project_residues, py::arg("H"), py::arg("W"), py::arg("bias"));
    m.def("run_session", &run_session, py::arg("fixtures"), py::arg("objective"), py::arg("output_dir"),
          py::arg("seed") = 0);
    m.def("builtin_tools", [] {
        std::vector<std::string> names;
        for (const auto& t : builtin_catalog()) names.push_back(t.name);
        return names;
    });
}
