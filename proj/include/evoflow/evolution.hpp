#pragma once

#include "evoflow/csv.hpp"
#include "evoflow/json.hpp"

#include <compare>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace evoflow::evolution {

// The 20 canonical amino acids.
bool is_canonical_residue(char c);
// Canonical plus ambiguity/rare codes (B, Z, X, U, O, J) and the stop symbol '*'.
bool is_extended_residue(char c);
// "Cysteine" for 'C'; empty for unknown letters.
std::string_view residue_name(char c);

struct PointMutation {
    char wild = 'A';
    int position = 1;
    char mutant = 'G';

    std::string to_string() const;
    auto operator<=>(const PointMutation&) const = default;
};

// Parses "<AA><digits><AA>". With a reference sequence the wild letter must
// match the residue at the 1-based position.
// Throws malformed-token, position-out-of-range, wild-mismatch.
PointMutation parse_mutation(std::string_view token, std::optional<std::string_view> reference = std::nullopt);

// A non-empty set of mutations at pairwise distinct positions, held sorted by
// the lexicographic order of their token strings.
class MutationCombination {
public:
    explicit MutationCombination(std::vector<PointMutation> mutations);
    // Parses "A13G,A5G". Throws malformed-token or invalid-argument on repeated positions.
    static MutationCombination parse(std::string_view text);

    const std::vector<PointMutation>& mutations() const { return mutations_; }
    std::size_t size() const { return mutations_.size(); }
    const std::string& canonical() const { return canonical_; }
    bool operator==(const MutationCombination& other) const { return canonical_ == other.canonical_; }

private:
    std::vector<PointMutation> mutations_;
    std::string canonical_;
};

struct FitnessObservation {
    std::vector<PointMutation> variant;  // empty = wild type
    double score = 0.0;
};

// Reads a variant,score table. Variant cells may hold "A5G", "A13G,A5G", or "WT".
// Rows with a missing variant or unparseable score are skipped and counted.
std::vector<FitnessObservation> observations_from_csv(const CsvTable& table, std::size_t* skipped = nullptr,
                                                      std::string_view variant_column = "variant",
                                                      std::string_view score_column = "score");

struct RidgeModel {
    std::vector<std::string> features;  // sorted mutation tokens; column order of X
    std::vector<double> weights;
    double intercept = 0.0;
    double lambda = 1.0;
    double train_r2 = 0.0;
    double train_rmse = 0.0;
    std::size_t n_observations = 0;

    // Column of a mutation token, or -1.
    int column(std::string_view token) const;
};

Json to_json(const RidgeModel& model);
RidgeModel ridge_model_from_json(const Json& j);

// One-hot ridge fit with an unpenalized intercept b = mean(y). Weights solve
// (XᵀX + λI) w = Xᵀ(y − ȳ). Throws empty-observations, non-finite-score,
// invalid-argument (λ < 0).
RidgeModel fit_ridge(const std::vector<FitnessObservation>& observations, double lambda = 1.0);

// b + Σ w_m, summed in canonical order. Throws unknown-mutation.
double predict_combination(const RidgeModel& model, const MutationCombination& combo);

struct ScoredCombination {
    std::string variant;
    double score = 0.0;

    bool operator==(const ScoredCombination&) const = default;
};

// Exact top-k per order among position-compatible combinations. Ties are broken
// by variant string ascending. Throws order-exceeds-mutation-count, invalid-argument.
std::map<int, std::vector<ScoredCombination>> enumerate_top_combinations(const RidgeModel& model,
                                                                         const std::set<int>& orders,
                                                                         std::size_t k);

struct ScreeningTable {
    std::string name;
    CsvTable table;
};

struct RankedTable {
    std::string name;
    CsvTable sorted;
    std::vector<std::string> top_ids;
};

struct ScreeningSummary {
    std::vector<RankedTable> ranked;
    CsvTable merged;  // candidate_id, selected_by, then <table>:<column> per property
    std::size_t warnings = 0;
};

// Candidate id of a screening row label ("A0ACB8U1W3|type:discovered" -> "A0ACB8U1W3").
std::string candidate_id(std::string_view label);

// Sorts each table descending on the sort column (1-based index or header name),
// keeps the top_k rows, and merges them by candidate id. Absent properties are "-".
// Throws missing-column.
ScreeningSummary rank_screening_tables(const std::vector<ScreeningTable>& tables, std::string_view sort_column,
                                       std::size_t top_k);

struct FastaRecord {
    std::string id;
    std::string description;
    std::string sequence;

    bool operator==(const FastaRecord&) const = default;
};

// Throws empty-input, invalid-residue.
std::vector<FastaRecord> parse_fasta(std::string_view text);
std::string serialize_fasta(const std::vector<FastaRecord>& records, std::size_t width = 60);

} // namespace evoflow::evolution
