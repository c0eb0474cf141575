#include "evoflow/csv.hpp"
#include "evoflow/error.hpp"
#include "evoflow/run_record.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <thread>

using namespace evoflow;
using evoflow::testing::TempDir;

namespace {

Event ev(std::uint64_t seq, const std::string& kind, Json payload)
{
    Event e;
    e.seq = seq;
    e.at = "2026-01-01T00:00:00Z";
    e.kind = kind;
    e.session_id = "s";
    e.phase = "Implementation";
    e.payload = std::move(payload);
    return e;
}

bool has_check(const std::vector<AuditFinding>& f, const std::string& check)
{
    for (const auto& x : f)
        if (x.check == check) return true;
    return false;
}

} // namespace

TEST(RunRecord, SequenceIsGaplessAndFileMirrorsMemory)
{
    TempDir dir("rr");
    LogicalClock clock;
    RunRecord rec("s-1", clock, dir / "r.ndjson");
    std::vector<std::uint64_t> seen;
    rec.subscribe([&](const Event& e) { seen.push_back(e.seq); });
    for (int i = 0; i < 5; ++i) rec.append("prompt", "Research", {{"i", i}});
    EXPECT_EQ(seen, (std::vector<std::uint64_t>{0, 1, 2, 3, 4}));
    EXPECT_EQ(read_text_file(dir / "r.ndjson"), rec.ndjson());
    const auto back = parse_ndjson_events(rec.ndjson());
    EXPECT_EQ(back, rec.events());
    EXPECT_EQ(rec.events_after(2).size(), 2u);
    EXPECT_EQ(rec.events_after(2).front().seq, 3u);
    EXPECT_TRUE(rec.events_after(4).empty());
}

TEST(RunRecord, ConcurrentAppendsStayOrdered)
{
    LogicalClock clock;
    RunRecord rec("s", clock);
    std::vector<std::thread> threads;
    for (int t = 0; t < 4; ++t)
        threads.emplace_back([&] {
            for (int i = 0; i < 100; ++i) rec.append("prompt", "Research", Json::object());
        });
    for (auto& t : threads) t.join();
    const auto events = rec.events();
    ASSERT_EQ(events.size(), 400u);
    for (std::size_t i = 0; i < events.size(); ++i) EXPECT_EQ(events[i].seq, i);
}

TEST(RunRecord, LogicalClockAndIds)
{
    LogicalClock clock(0);
    EXPECT_EQ(clock.now(), "1970-01-01T00:00:00Z");
    EXPECT_EQ(clock.now(), "1970-01-01T00:00:01Z");
    EXPECT_EQ(deterministic_session_id(1, "x"), deterministic_session_id(1, "x"));
    EXPECT_NE(deterministic_session_id(1, "x"), deterministic_session_id(2, "x"));
    EXPECT_EQ(deterministic_session_id(1, "x").size(), 18u);
}

TEST(RunRecord, MalformedLines)
{
    EXPECT_THROW(parse_ndjson_events("{\"seq\": 0}\n"), Error);
    EXPECT_THROW(parse_ndjson_events("nope\n"), Error);
    EXPECT_TRUE(parse_ndjson_events("\n\n").empty());
}

TEST(RunRecord, CitedIndices)
{
    EXPECT_EQ(cited_indices("a [1] b [2, 3] c [4-6] d [7]\xE2\x80\x93[8]"), (std::vector<int>{1, 2, 3, 4, 5, 6, 7, 8}));
    EXPECT_TRUE(cited_indices("array[i] and [x]").empty());
}

TEST(RunRecord, AuditCatchesUninstructedTool)
{
    const std::vector<Event> events{ev(0, event_kind::phase_change, {{"to", "Implementation"}}),
                                    ev(1, event_kind::tool_invocation, {{"step", 1}})};
    EXPECT_TRUE(has_check(audit_run_record(events), "cb-gate"));
}

TEST(RunRecord, AuditCatchesToolBeforeImplementation)
{
    const std::vector<Event> events{ev(0, event_kind::cb_instruction, {{"step", 1}}),
                                    ev(1, event_kind::tool_invocation, {{"step", 1}})};
    EXPECT_TRUE(has_check(audit_run_record(events), "phase-order"));
}

TEST(RunRecord, AuditCatchesRetryOverrun)
{
    std::vector<Event> events{ev(0, event_kind::phase_change, {{"to", "Implementation"}}),
                              ev(1, event_kind::cb_instruction, {{"step", 1}})};
    for (int i = 0; i < 6; ++i) events.push_back(ev(events.size(), event_kind::tool_invocation, {{"step", 1}}));
    EXPECT_TRUE(has_check(audit_run_record(events), "retry-bound"));
    RetryPolicy generous;
    generous.max_self_debug_retries = 10;
    EXPECT_FALSE(has_check(audit_run_record(events, generous), "retry-bound"));
}

TEST(RunRecord, AuditCatchesHistoryRewrite)
{
    const std::vector<Event> events{
        ev(0, event_kind::tool_result, {{"final", true}, {"history", {"a"}}}),
        ev(1, event_kind::tool_result, {{"final", true}, {"history", {"b", "c"}}})};
    EXPECT_TRUE(has_check(audit_run_record(events), "history-monotone"));
}

TEST(RunRecord, AuditCatchesBadCitationsAndSeq)
{
    const std::vector<Event> events{ev(0, event_kind::report, {{"references", {1, 2}}}),
                                    ev(1, event_kind::audit, {{"final_text", "x [1] y [5]"}}),
                                    ev(3, event_kind::prompt, Json::object())};
    const auto f = audit_run_record(events);
    EXPECT_TRUE(has_check(f, "citations"));
    EXPECT_TRUE(has_check(f, "seq"));
}

TEST(Csv, QuotedFieldsRoundTrip)
{
    const CsvTable t = parse_csv("a,b\n\"x,1\",\"he said \"\"hi\"\"\"\nplain,\"multi\nline\"\n");
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_EQ(t.rows[0][0], "x,1");
    EXPECT_EQ(t.rows[0][1], "he said \"hi\"");
    EXPECT_EQ(t.rows[1][1], "multi\nline");
    EXPECT_EQ(t.column("b"), 1);
    EXPECT_EQ(t.column("z"), -1);
    const CsvTable back = parse_csv(to_csv(t));
    EXPECT_EQ(back.header, t.header);
    EXPECT_EQ(back.rows, t.rows);
}

TEST(Csv, CrLfAndMissingTrailingNewline)
{
    const CsvTable t = parse_csv("a,b\r\n1,2\r\n3,4");
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_EQ(t.rows[1][1], "4");
    EXPECT_EQ(t.rows[0][1], "2");
}
