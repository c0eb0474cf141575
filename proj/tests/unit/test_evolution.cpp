#include "evoflow/error.hpp"
#include "evoflow/evolution.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace evoflow;
using namespace evoflow::evolution;
using evoflow::testing::fixture;

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

const std::string kVhh = "MQVQLVESGGGLAQAGGSLRLSCAVSGMPEFARAMGWFRQAPGKERELLAAIEGIGATTYYADSVKGRFTISRDDAANTVLLQMNSLKPD"
                         "DTAVYYCAAAFSVTIPTRARHWVDWGPGTLVTVSSDDDDKSGGGGSHHHHHH";

FitnessObservation obs(const std::string& variant, double score)
{
    FitnessObservation o;
    if (variant != "WT") o.variant = MutationCombination::parse(variant).mutations();
    o.score = score;
    return o;
}

RidgeModel weights_model(const std::map<std::string, double>& w, double b = 0.0)
{
    RidgeModel m;
    for (const auto& [k, v] : w) {
        m.features.push_back(k);
        m.weights.push_back(v);
    }
    m.intercept = b;
    return m;
}

double norm2(const std::vector<double>& v)
{
    double s = 0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

} // namespace

TEST(Evolution, ParseMutationAgainstReference)
{
    const PointMutation m = parse_mutation("E7V", kVhh);
    EXPECT_EQ(m.wild, 'E');
    EXPECT_EQ(m.position, 7);
    EXPECT_EQ(m.mutant, 'V');
    EXPECT_EQ(m.to_string(), "E7V");
}

TEST(Evolution, ParseMutationErrors)
{
    EXPECT_EQ(code_of([] { parse_mutation("E7E"); }), Errc::malformed_token);
    EXPECT_EQ(code_of([] { parse_mutation("7V"); }), Errc::malformed_token);
    EXPECT_EQ(code_of([] { parse_mutation("E0V"); }), Errc::malformed_token);
    EXPECT_EQ(parse_mutation("e7v").to_string(), "E7V");
    EXPECT_EQ(code_of([] { parse_mutation("E999V", kVhh); }), Errc::position_out_of_range);
    EXPECT_EQ(code_of([] { parse_mutation("A7V", kVhh); }), Errc::wild_mismatch);
}

TEST(Evolution, PremiseErrorOnHemoglobinBeta)
{
    const auto records = parse_fasta(read_text_file(fixture("benchmark/P68871.fasta")));
    ASSERT_EQ(records.size(), 1u);
    const std::string& hbb = records[0].sequence;
    ASSERT_GE(hbb.size(), 113u);
    EXPECT_EQ(hbb[112], 'C');
    try {
        parse_mutation("A113G", hbb);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::wild_mismatch);
        EXPECT_NE(e.detail().find("expected C"), std::string::npos) << e.detail();
        EXPECT_NE(e.detail().find("found A"), std::string::npos) << e.detail();
    }
    EXPECT_EQ(residue_name('C'), "Cysteine");
}

TEST(Evolution, MutationRoundTrip)
{
    std::mt19937 rng(11);
    const std::string aa = "ACDEFGHIKLMNPQRSTVWY";
    for (int i = 0; i < 500; ++i) {
        PointMutation m;
        m.wild = aa[rng() % 20];
        do m.mutant = aa[rng() % 20];
        while (m.mutant == m.wild);
        m.position = 1 + static_cast<int>(rng() % 2000);
        EXPECT_EQ(parse_mutation(m.to_string()), m);
    }
}

TEST(Evolution, CombinationCanonicalOrder)
{
    const auto c = MutationCombination::parse("A5G,A13G");
    EXPECT_EQ(c.canonical(), "A13G,A5G");
    EXPECT_EQ(c, MutationCombination::parse("A13G,A5G"));
    EXPECT_EQ(code_of([] { MutationCombination::parse("A5G,A5C"); }), Errc::invalid_argument);
}

TEST(Evolution, ToyRidgeExact)
{
    const RidgeModel m = fit_ridge({obs("A1G", 1.0), obs("C2G", 3.0)}, 0.0);
    ASSERT_EQ(m.features, (std::vector<std::string>{"A1G", "C2G"}));
    EXPECT_NEAR(m.intercept, 2.0, 1e-12);
    EXPECT_NEAR(m.weights[0], -1.0, 1e-12);
    EXPECT_NEAR(m.weights[1], 1.0, 1e-12);
    EXPECT_NEAR(m.train_r2, 1.0, 1e-12);
    EXPECT_NEAR(predict_combination(m, MutationCombination::parse("A1G,C2G")), 2.0, 1e-12);
}

TEST(Evolution, HugeLambdaShrinksWeights)
{
    const RidgeModel m = fit_ridge({obs("A1G", 1.0), obs("C2G", 3.0), obs("D3G", -2.0)}, 1e6);
    EXPECT_LT(norm2(m.weights), 1e-4);
}

TEST(Evolution, WeightNormDecreasesWithLambda)
{
    std::mt19937 rng(3);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<FitnessObservation> data;
    for (int p = 1; p <= 8; ++p)
        for (int r = 0; r < 3; ++r) data.push_back(obs("A" + std::to_string(p) + "G", noise(rng)));
    for (int i = 0; i < 10; ++i) {
        const int a = 1 + static_cast<int>(rng() % 8);
        int b = 1 + static_cast<int>(rng() % 8);
        if (a == b) b = a % 8 + 1;
        data.push_back(obs("A" + std::to_string(a) + "G,A" + std::to_string(b) + "G", noise(rng)));
    }
    double prev = INFINITY;
    for (double lambda : {0.0, 0.01, 0.1, 1.0, 10.0, 100.0}) {
        const double n = norm2(fit_ridge(data, lambda).weights);
        EXPECT_LE(n, prev + 1e-12) << lambda;
        prev = n;
    }
}

TEST(Evolution, PredictionIsAdditive)
{
    const RidgeModel m = fit_ridge({obs("A1G", 0.4), obs("C2G", 1.1), obs("D3G", -0.3), obs("WT", 0.0)}, 0.5);
    const double ab = predict_combination(m, MutationCombination::parse("A1G,C2G"));
    const double a = predict_combination(m, MutationCombination::parse("A1G"));
    const double b = predict_combination(m, MutationCombination::parse("C2G"));
    EXPECT_NEAR(ab, a + b - m.intercept, 1e-12);
    EXPECT_EQ(code_of([&] { predict_combination(m, MutationCombination::parse("D4G")); }), Errc::unknown_mutation);
}

TEST(Evolution, FitErrors)
{
    EXPECT_EQ(code_of([] { fit_ridge({}, 1.0); }), Errc::empty_observations);
    EXPECT_EQ(code_of([] { fit_ridge({obs("A1G", NAN)}, 1.0); }), Errc::non_finite_score);
    EXPECT_EQ(code_of([] { fit_ridge({obs("A1G", 1.0)}, -1.0); }), Errc::invalid_argument);
}

TEST(Evolution, ModelJsonRoundTrip)
{
    const RidgeModel m = fit_ridge({obs("A1G", 1.0), obs("C2G", 3.0), obs("WT", 0.5)}, 1.0);
    const RidgeModel back = ridge_model_from_json(to_json(m));
    EXPECT_EQ(back.features, m.features);
    EXPECT_EQ(back.weights, m.weights);
    EXPECT_EQ(back.intercept, m.intercept);
}

TEST(Evolution, TopPairsFromPostedWeights)
{
    const RidgeModel m = weights_model({{"A1G", 3.0}, {"C2G", 2.0}, {"D3G", 1.0}});
    const auto top = enumerate_top_combinations(m, {2}, 2);
    ASSERT_EQ(top.at(2).size(), 2u);
    EXPECT_EQ(top.at(2)[0], (ScoredCombination{"A1G,C2G", 5.0}));
    EXPECT_EQ(top.at(2)[1], (ScoredCombination{"A1G,D3G", 4.0}));
    EXPECT_EQ(code_of([&] { enumerate_top_combinations(m, {4}, 1); }), Errc::order_exceeds_mutation_count);
    EXPECT_EQ(code_of([&] { enumerate_top_combinations(m, {2}, 0); }), Errc::invalid_argument);
}

TEST(Evolution, SamePositionMutationsNeverCombine)
{
    const RidgeModel m = weights_model({{"A1G", 3.0}, {"A1C", 2.5}, {"C2G", 1.0}});
    const auto top = enumerate_top_combinations(m, {2}, 5);
    for (const auto& c : top.at(2)) EXPECT_NE(c.variant, "A1C,A1G");
    EXPECT_EQ(top.at(2).size(), 2u);
}

TEST(Evolution, TiesBreakOnVariantString)
{
    const RidgeModel m = weights_model({{"A1G", 1.0}, {"C2G", 1.0}, {"D3G", 1.0}});
    const auto top = enumerate_top_combinations(m, {2}, 3);
    ASSERT_EQ(top.at(2).size(), 3u);
    EXPECT_EQ(top.at(2)[0].variant, "A1G,C2G");
    EXPECT_EQ(top.at(2)[1].variant, "A1G,D3G");
    EXPECT_EQ(top.at(2)[2].variant, "C2G,D3G");
}

TEST(Evolution, TopOneIsLargestWeights)
{
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(-1, 1);
    std::map<std::string, double> w;
    for (int p = 1; p <= 10; ++p) w["A" + std::to_string(p) + "G"] = u(rng);
    const RidgeModel m = weights_model(w);
    std::vector<double> sorted;
    for (const auto& [_, v] : w) sorted.push_back(v);
    std::sort(sorted.rbegin(), sorted.rend());
    const auto top = enumerate_top_combinations(m, {2, 3, 4}, 1);
    for (int order : {2, 3, 4}) {
        double expected = 0;
        for (int i = 0; i < order; ++i) expected += sorted[static_cast<std::size_t>(i)];
        EXPECT_NEAR(top.at(order)[0].score, expected, 1e-12);
    }
}

TEST(Evolution, ObservationsFromCsv)
{
    const CsvTable t = parse_csv("variant,score\nA5G,1.0\n,2.0\nA13G,abc\nA13G;A5G,1\nA13G,A5G,3\n\"A13G,A5G\",2.5\nWT,0\n");
    std::size_t skipped = 0;
    const auto o = observations_from_csv(t, &skipped);
    // ';' also separates mutations; a bare comma splits the row into three cells.
    ASSERT_EQ(o.size(), 4u);
    EXPECT_EQ(skipped, 3u);
    EXPECT_EQ(o[1].variant.size(), 2u);
    EXPECT_EQ(o[2].variant.size(), 2u);
    EXPECT_TRUE(o[3].variant.empty());
    EXPECT_EQ(code_of([] { observations_from_csv(parse_csv("v,s\nA5G,1\n")); }), Errc::missing_column);
}

TEST(Evolution, CaseStudySingleMutantTable)
{
    const CsvTable t = parse_csv(read_text_file(fixture("cs2/data/single_mutants.csv")));
    const RidgeModel m = fit_ridge(observations_from_csv(t), 1.0);
    const auto top = enumerate_top_combinations(m, {2, 3, 4}, 3);
    EXPECT_EQ(top.at(2)[0].variant, "A13G,A5G");
    EXPECT_NE(top.at(3)[0].variant.find("A13G"), std::string::npos);
    EXPECT_GT(m.train_r2, 0.8);
}

TEST(Evolution, ScreeningThermostabilityTop3)
{
    const ScreeningTable thermo{"thermostability", parse_csv(read_text_file(fixture("cs3/data/thermostability.csv")))};
    const auto summary = rank_screening_tables({thermo}, "3", 3);
    ASSERT_EQ(summary.ranked.size(), 1u);
    EXPECT_EQ(summary.ranked[0].top_ids,
              (std::vector<std::string>{"A0ACB8U1W3", "A0A9P7FY65", "A0A0C9TA35"}));
    EXPECT_EQ(summary.ranked[0].sorted.rows[0][2], "61.47");
    EXPECT_EQ(summary.ranked[0].sorted.rows[1][2], "61.02");
}

TEST(Evolution, ScreeningMergeMarksMissingProperties)
{
    const ScreeningTable thermo{"thermostability", parse_csv(read_text_file(fixture("cs3/data/thermostability.csv")))};
    const ScreeningTable sol{"solubility", parse_csv(read_text_file(fixture("cs3/data/solubility.csv")))};
    const auto summary = rank_screening_tables({thermo, sol}, "3", 3);
    EXPECT_EQ(summary.ranked[1].top_ids[0], "G8B8H1");
    EXPECT_EQ(summary.ranked[1].sorted.rows[0][2], "0.6562981009483337");
    EXPECT_EQ(summary.merged.header[0], "candidate_id");
    for (const auto& row : summary.merged.rows)
        for (const auto& cell : row) EXPECT_NE(cell, "-");

    // A candidate screened for one property only gets "-" for the others.
    const ScreeningTable extra{"extra", parse_csv("Protein Name,Dataset,Score\nZZ9999|type:discovered,Extra,99\n")};
    const auto merged = rank_screening_tables({thermo, sol, extra}, "3", 3).merged;
    ASSERT_FALSE(merged.rows.empty());
    const auto& last = merged.rows.back();
    EXPECT_EQ(last[0], "ZZ9999");
    EXPECT_EQ(std::count(last.begin(), last.end(), "-"), 4);
    EXPECT_EQ(code_of([&] { rank_screening_tables({thermo}, "Nope", 3); }), Errc::missing_column);
}

TEST(Evolution, ScreeningEmptyTable)
{
    const ScreeningTable empty{"empty", parse_csv("Protein Name,Score\n")};
    const auto summary = rank_screening_tables({empty}, "2", 3);
    EXPECT_TRUE(summary.merged.rows.empty());
    EXPECT_EQ(summary.warnings, 0u);
}

TEST(Evolution, ScreeningSkipsUnparseableRows)
{
    const ScreeningTable t{"t", parse_csv("Protein Name,Score\nA,1.0\nB,n/a\nC,2.0\n")};
    const auto summary = rank_screening_tables({t}, "Score", 5);
    EXPECT_EQ(summary.warnings, 1u);
    EXPECT_EQ(summary.ranked[0].top_ids, (std::vector<std::string>{"C", "A"}));
}

TEST(Evolution, CandidateId)
{
    EXPECT_EQ(candidate_id("A0ACB8U1W3|type:discovered|cluster:1"), "A0ACB8U1W3");
    EXPECT_EQ(candidate_id("plain"), "plain");
}

TEST(Evolution, Fasta)
{
    const auto r = parse_fasta(">x\nMKV\nLIL");
    ASSERT_EQ(r.size(), 1u);
    EXPECT_EQ(r[0].id, "x");
    EXPECT_EQ(r[0].sequence, "MKVLIL");
    EXPECT_EQ(code_of([] { parse_fasta(">x\nMK1V\n"); }), Errc::invalid_residue);
    EXPECT_EQ(code_of([] { parse_fasta(""); }), Errc::empty_input);
    EXPECT_EQ(parse_fasta(">y\nmk v\n")[0].sequence, "MKV");

    const std::vector<FastaRecord> two{{"a", "first one", std::string(130, 'A')}, {"b", "", "MKV"}};
    EXPECT_EQ(parse_fasta(serialize_fasta(two)), two);
}

TEST(Evolution, ResidueAlphabet)
{
    for (char c : std::string("ACDEFGHIKLMNPQRSTVWY")) EXPECT_TRUE(is_canonical_residue(c));
    EXPECT_FALSE(is_canonical_residue('X'));
    EXPECT_TRUE(is_extended_residue('X'));
    EXPECT_TRUE(is_extended_residue('*'));
    EXPECT_FALSE(is_extended_residue('1'));
}
