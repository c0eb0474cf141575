#include "evoflow/evolution.hpp"

#include "evoflow/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <numeric>

namespace evoflow::evolution {

namespace {

constexpr std::string_view kCanonical = "ACDEFGHIKLMNPQRSTVWY";
constexpr std::string_view kExtra = "BZXUOJ*";

std::string trim(std::string_view s)
{
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_tokens(std::string_view text)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find_first_of(",;", start);
        auto tok = trim(text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
        if (!tok.empty()) out.push_back(std::move(tok));
        if (end == std::string_view::npos) break;
        start = end + 1;
    }
    return out;
}

bool is_wild_type_marker(std::string_view s)
{
    std::string t = trim(s);
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
    return t == "wt" || t == "wild-type" || t == "wildtype" || t == "wild_type";
}

struct Ranked {
    double score;
    std::string variant;
};

bool better(const Ranked& a, const Ranked& b)
{
    if (a.score != b.score) return a.score > b.score;
    return a.variant < b.variant;
}

std::optional<double> parse_number(std::string_view text)
{
    std::string t = trim(text);
    if (t.empty()) return std::nullopt;
    char* end = nullptr;
    double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

} // namespace

bool is_canonical_residue(char c)
{
    return kCanonical.find(c) != std::string_view::npos;
}

bool is_extended_residue(char c)
{
    return is_canonical_residue(c) || kExtra.find(c) != std::string_view::npos;
}

std::string_view residue_name(char c)
{
    switch (c) {
    case 'A': return "Alanine";
    case 'C': return "Cysteine";
    case 'D': return "Aspartate";
    case 'E': return "Glutamate";
    case 'F': return "Phenylalanine";
    case 'G': return "Glycine";
    case 'H': return "Histidine";
    case 'I': return "Isoleucine";
    case 'K': return "Lysine";
    case 'L': return "Leucine";
    case 'M': return "Methionine";
    case 'N': return "Asparagine";
    case 'P': return "Proline";
    case 'Q': return "Glutamine";
    case 'R': return "Arginine";
    case 'S': return "Serine";
    case 'T': return "Threonine";
    case 'V': return "Valine";
    case 'W': return "Tryptophan";
    case 'Y': return "Tyrosine";
    default: return {};
    }
}

std::string PointMutation::to_string() const
{
    return std::string(1, wild) + std::to_string(position) + std::string(1, mutant);
}

PointMutation parse_mutation(std::string_view token, std::optional<std::string_view> reference)
{
    const std::string t = trim(token);
    auto bad = [&](const std::string& why) {
        return Error(Errc::malformed_token, "'" + t + "': " + why);
    };
    if (t.size() < 3) throw bad("expected <AA><position><AA>");
    const char wild = static_cast<char>(std::toupper(static_cast<unsigned char>(t.front())));
    const char mutant = static_cast<char>(std::toupper(static_cast<unsigned char>(t.back())));
    if (!is_canonical_residue(wild) || !is_canonical_residue(mutant)) throw bad("residues must be canonical amino acids");
    std::string_view digits(t.data() + 1, t.size() - 2);
    if (digits.empty() || digits.find_first_not_of("0123456789") != std::string_view::npos)
        throw bad("position must be digits");
    int position = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), position);
    if (ec != std::errc() || ptr != digits.data() + digits.size()) throw bad("position out of integer range");
    if (position < 1) throw bad("position must be at least 1");
    if (wild == mutant) throw bad("wild-type and mutant residues are identical");
    PointMutation m{wild, position, mutant};
    if (reference) {
        if (static_cast<std::size_t>(position) > reference->size())
            throw Error(Errc::position_out_of_range, "'" + t + "': position " + std::to_string(position) +
                                                         " exceeds sequence length " +
                                                         std::to_string(reference->size()));
        const char expected =
            static_cast<char>(std::toupper(static_cast<unsigned char>((*reference)[static_cast<std::size_t>(position - 1)])));
        if (expected != wild)
            throw Error(Errc::wild_mismatch, "expected " + std::string(1, expected) + ", found " + std::string(1, wild) +
                                                 " at position " + std::to_string(position));
    }
    return m;
}

MutationCombination::MutationCombination(std::vector<PointMutation> mutations) : mutations_(std::move(mutations))
{
    if (mutations_.empty()) throw Error(Errc::invalid_argument, "a mutation combination cannot be empty");
    std::sort(mutations_.begin(), mutations_.end(),
              [](const PointMutation& a, const PointMutation& b) { return a.to_string() < b.to_string(); });
    std::set<int> positions;
    for (const auto& m : mutations_) {
        if (!positions.insert(m.position).second)
            throw Error(Errc::invalid_argument, "two mutations at position " + std::to_string(m.position));
        if (!canonical_.empty()) canonical_ += ",";
        canonical_ += m.to_string();
    }
}

MutationCombination MutationCombination::parse(std::string_view text)
{
    std::vector<PointMutation> muts;
    for (const auto& tok : split_tokens(text)) muts.push_back(parse_mutation(tok));
    return MutationCombination(std::move(muts));
}

std::vector<FitnessObservation> observations_from_csv(const CsvTable& table, std::size_t* skipped,
                                                      std::string_view variant_column, std::string_view score_column)
{
    const int vc = table.column(variant_column);
    const int sc = table.column(score_column);
    if (vc < 0) throw Error(Errc::missing_column, "'" + std::string(variant_column) + "'");
    if (sc < 0) throw Error(Errc::missing_column, "'" + std::string(score_column) + "'");
    std::vector<FitnessObservation> out;
    std::size_t bad = 0;
    for (const auto& row : table.rows) {
        if (static_cast<int>(row.size()) <= std::max(vc, sc)) {
            ++bad;
            continue;
        }
        const std::string variant = trim(row[static_cast<std::size_t>(vc)]);
        auto score = parse_number(row[static_cast<std::size_t>(sc)]);
        if (variant.empty() || !score) {
            ++bad;
            continue;
        }
        FitnessObservation obs;
        obs.score = *score;
        if (!is_wild_type_marker(variant)) obs.variant = MutationCombination::parse(variant).mutations();
        out.push_back(std::move(obs));
    }
    if (skipped) *skipped = bad;
    return out;
}

int RidgeModel::column(std::string_view token) const
{
    auto it = std::lower_bound(features.begin(), features.end(), token);
    if (it == features.end() || *it != token) return -1;
    return static_cast<int>(it - features.begin());
}

Json to_json(const RidgeModel& m)
{
    Json weights = Json::object();
    for (std::size_t i = 0; i < m.features.size(); ++i) weights[m.features[i]] = m.weights[i];
    return Json{{"kind", "one_hot_ridge"},
                {"intercept", m.intercept},
                {"lambda", m.lambda},
                {"weights", std::move(weights)},
                {"n_observations", m.n_observations},
                {"metrics", {{"r2_score_train", m.train_r2}, {"rmse_train", m.train_rmse}}}};
}

RidgeModel ridge_model_from_json(const Json& j)
{
    RidgeModel m;
    try {
        m.intercept = j.at("intercept").get<double>();
        m.lambda = j.value("lambda", 1.0);
        m.n_observations = j.value("n_observations", std::size_t{0});
        for (const auto& [k, v] : j.at("weights").items()) {
            parse_mutation(k);
            m.features.push_back(k);
            m.weights.push_back(v.get<double>());
        }
        if (j.contains("metrics")) {
            m.train_r2 = j["metrics"].value("r2_score_train", 0.0);
            m.train_rmse = j["metrics"].value("rmse_train", 0.0);
        }
    } catch (const Json::exception& e) {
        throw Error(Errc::malformed_json, std::string("ridge model: ") + e.what());
    }
    return m;
}

RidgeModel fit_ridge(const std::vector<FitnessObservation>& observations, double lambda)
{
    if (observations.empty()) throw Error(Errc::empty_observations, "no fitness observations");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw Error(Errc::invalid_argument, "lambda must be finite and >= 0");
    std::set<std::string> tokens;
    for (const auto& obs : observations) {
        if (!std::isfinite(obs.score)) throw Error(Errc::non_finite_score, "observation score is not finite");
        for (const auto& m : obs.variant) tokens.insert(m.to_string());
    }

    RidgeModel model;
    model.features.assign(tokens.begin(), tokens.end());
    model.lambda = lambda;
    model.n_observations = observations.size();
    const auto n = static_cast<Eigen::Index>(observations.size());
    const auto p = static_cast<Eigen::Index>(model.features.size());

    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(n, p);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& obs = observations[static_cast<std::size_t>(i)];
        y(i) = obs.score;
        for (const auto& m : obs.variant) X(i, model.column(m.to_string())) += 1.0;
    }
    model.intercept = y.mean();
    const Eigen::VectorXd yc = y.array() - model.intercept;

    Eigen::VectorXd w = Eigen::VectorXd::Zero(p);
    if (p > 0) {
        Eigen::MatrixXd A = X.transpose() * X;
        A.diagonal().array() += lambda;
        const Eigen::VectorXd rhs = X.transpose() * yc;

        Eigen::LLT<Eigen::MatrixXd> llt(A);
        bool solved = false;
        if (llt.info() == Eigen::Success) {
            w = llt.solve(rhs);
            // One refinement pass keeps the normal-equation residual near rounding level.
            w += llt.solve(rhs - A * w);
            solved = w.allFinite();
        }
        if (!solved) {
            Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
            if (lu.isInvertible()) {
                w = lu.solve(rhs);
                w += lu.solve(rhs - A * w);
                solved = w.allFinite();
            }
        }
        if (!solved) {
            // Singular λ = 0 system: minimum-norm least-squares solution.
            Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(A);
            w = cod.solve(rhs);
        }
    }
    model.weights.assign(w.data(), w.data() + w.size());

    const Eigen::VectorXd fitted = (X * w).array() + model.intercept;
    const double ss_res = (y - fitted).squaredNorm();
    const double ss_tot = yc.squaredNorm();
    model.train_rmse = std::sqrt(ss_res / static_cast<double>(n));
    if (ss_tot > 0.0)
        model.train_r2 = 1.0 - ss_res / ss_tot;
    else
        model.train_r2 = ss_res <= 1e-24 ? 1.0 : 0.0;
    return model;
}

double predict_combination(const RidgeModel& model, const MutationCombination& combo)
{
    double s = model.intercept;
    for (const auto& m : combo.mutations()) {
        const int c = model.column(m.to_string());
        if (c < 0) throw Error(Errc::unknown_mutation, "'" + m.to_string() + "' is not a model feature");
        s += model.weights[static_cast<std::size_t>(c)];
    }
    return s;
}

std::map<int, std::vector<ScoredCombination>> enumerate_top_combinations(const RidgeModel& model,
                                                                         const std::set<int>& orders,
                                                                         std::size_t k)
{
    if (k == 0) throw Error(Errc::invalid_argument, "k must be at least 1");
    const std::size_t m = model.features.size();
    std::vector<PointMutation> muts;
    muts.reserve(m);
    for (const auto& f : model.features) muts.push_back(parse_mutation(f));

    // Weight-descending visit order; prefix sums give the optimistic bound.
    std::vector<std::size_t> order_idx(m);
    std::iota(order_idx.begin(), order_idx.end(), std::size_t{0});
    std::stable_sort(order_idx.begin(), order_idx.end(),
                     [&](std::size_t a, std::size_t b) { return model.weights[a] > model.weights[b]; });
    std::vector<double> prefix(m + 1, 0.0);
    double magnitude = std::abs(model.intercept);
    for (std::size_t i = 0; i < m; ++i) {
        prefix[i + 1] = prefix[i] + model.weights[order_idx[i]];
        magnitude += std::abs(model.weights[i]);
    }
    const double slack = 1e-9 * (1.0 + magnitude);

    std::map<int, std::vector<ScoredCombination>> out;
    for (int r : orders) {
        if (r < 1) throw Error(Errc::invalid_argument, "combination order must be at least 1");
        if (static_cast<std::size_t>(r) > m)
            throw Error(Errc::order_exceeds_mutation_count,
                        "order " + std::to_string(r) + " exceeds " + std::to_string(m) + " mutations");
        std::vector<Ranked> best;
        std::vector<std::size_t> chosen;
        std::set<int> used;

        auto score_leaf = [&]() {
            std::vector<std::size_t> cols = chosen;
            std::sort(cols.begin(), cols.end());  // feature columns are already in token order
            double s = model.intercept;
            std::string variant;
            for (std::size_t c : cols) {
                s += model.weights[c];
                if (!variant.empty()) variant += ",";
                variant += model.features[c];
            }
            Ranked cand{s, std::move(variant)};
            if (best.size() == k && !better(cand, best.back())) return;
            auto pos = std::lower_bound(best.begin(), best.end(), cand, better);
            best.insert(pos, std::move(cand));
            if (best.size() > k) best.pop_back();
        };

        auto dfs = [&](auto&& self, std::size_t start, double partial) -> void {
            const std::size_t depth = chosen.size();
            if (depth == static_cast<std::size_t>(r)) {
                score_leaf();
                return;
            }
            const std::size_t need = static_cast<std::size_t>(r) - depth;
            for (std::size_t i = start; i + need <= m; ++i) {
                const double bound = model.intercept + partial + (prefix[i + need] - prefix[i]);
                if (best.size() == k && bound + slack < best.back().score) break;
                const std::size_t col = order_idx[i];
                if (used.count(muts[col].position)) continue;
                used.insert(muts[col].position);
                chosen.push_back(col);
                self(self, i + 1, partial + model.weights[col]);
                chosen.pop_back();
                used.erase(muts[col].position);
            }
        };
        dfs(dfs, 0, 0.0);

        auto& list = out[r];
        for (auto& b : best) list.push_back({std::move(b.variant), b.score});
    }
    return out;
}

std::string candidate_id(std::string_view label)
{
    return trim(label.substr(0, label.find('|')));
}

ScreeningSummary rank_screening_tables(const std::vector<ScreeningTable>& tables, std::string_view sort_column,
                                       std::size_t top_k)
{
    ScreeningSummary summary;
    summary.merged.header = {"candidate_id", "selected_by"};
    std::vector<std::string> order;            // candidate ids in selection order
    std::map<std::string, std::vector<std::string>> selected_by;
    std::map<std::string, std::map<std::string, std::string>> props;  // id -> column -> value

    for (const auto& t : tables) {
        RankedTable ranked;
        ranked.name = t.name;
        ranked.sorted.header = t.table.header;
        if (t.table.header.empty() && t.table.rows.empty()) {
            summary.ranked.push_back(std::move(ranked));
            continue;
        }
        int col = -1;
        const std::string key(sort_column);
        if (!key.empty() && key.find_first_not_of("0123456789") == std::string::npos) {
            const int idx = std::stoi(key) - 1;
            if (idx >= 0 && idx < static_cast<int>(t.table.header.size())) col = idx;
        } else {
            col = t.table.column(key);
        }
        if (col < 0) throw Error(Errc::missing_column, t.name + ": sort column '" + key + "'");

        std::vector<std::pair<double, const std::vector<std::string>*>> rows;
        for (const auto& row : t.table.rows) {
            std::optional<double> v;
            if (static_cast<int>(row.size()) > col && !row.empty()) v = parse_number(row[static_cast<std::size_t>(col)]);
            if (!v) {
                ++summary.warnings;
                continue;
            }
            rows.emplace_back(*v, &row);
        }
        std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
        for (const auto& [v, row] : rows) ranked.sorted.rows.push_back(*row);

        for (std::size_t c = 1; c < t.table.header.size(); ++c)
            summary.merged.header.push_back(t.name + ":" + t.table.header[c]);
        for (const auto& row : ranked.sorted.rows) {
            const std::string id = candidate_id(row.front());
            for (std::size_t c = 1; c < t.table.header.size() && c < row.size(); ++c)
                props[id].emplace(t.name + ":" + t.table.header[c], row[c]);
        }
        for (std::size_t i = 0; i < ranked.sorted.rows.size() && i < top_k; ++i) {
            const std::string id = candidate_id(ranked.sorted.rows[i].front());
            ranked.top_ids.push_back(id);
            if (selected_by.find(id) == selected_by.end()) order.push_back(id);
            selected_by[id].push_back(t.name);
        }
        summary.ranked.push_back(std::move(ranked));
    }

    for (const auto& id : order) {
        std::vector<std::string> row{id};
        std::string by;
        for (const auto& n : selected_by[id]) by += (by.empty() ? "" : ";") + n;
        row.push_back(by);
        for (std::size_t c = 2; c < summary.merged.header.size(); ++c) {
            auto it = props[id].find(summary.merged.header[c]);
            row.push_back(it == props[id].end() ? "-" : it->second);
        }
        summary.merged.rows.push_back(std::move(row));
    }
    return summary;
}

std::vector<FastaRecord> parse_fasta(std::string_view text)
{
    std::vector<FastaRecord> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() : nl + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!line.empty() && line.front() == '>') {
            std::string header = trim(line.substr(1));
            FastaRecord rec;
            auto sp = header.find_first_of(" \t");
            rec.id = header.substr(0, sp);
            if (sp != std::string::npos) rec.description = trim(std::string_view(header).substr(sp + 1));
            out.push_back(std::move(rec));
            continue;
        }
        for (char raw : line) {
            if (std::isspace(static_cast<unsigned char>(raw))) continue;
            const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(raw)));
            if (out.empty())
                throw Error(Errc::invalid_residue, "sequence data before the first '>' header");
            auto& seq = out.back().sequence;
            if (!is_extended_residue(c))
                throw Error(Errc::invalid_residue, "'" + std::string(1, raw) + "' at position " +
                                                       std::to_string(seq.size() + 1) + " of " + out.back().id);
            seq.push_back(c);
        }
    }
    if (out.empty()) throw Error(Errc::empty_input, "no FASTA records");
    return out;
}

std::string serialize_fasta(const std::vector<FastaRecord>& records, std::size_t width)
{
    if (width == 0) width = 60;
    std::string out;
    for (const auto& r : records) {
        out += ">" + r.id;
        if (!r.description.empty()) out += " " + r.description;
        out += "\n";
        for (std::size_t i = 0; i < r.sequence.size(); i += width) out += r.sequence.substr(i, width) + "\n";
    }
    return out;
}

} // namespace evoflow::evolution
