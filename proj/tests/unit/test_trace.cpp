#include "doctest.h"
#include "support/traces.hpp"

#include "sidequest/error.hpp"
#include "sidequest/trace.hpp"

#include <sstream>

using namespace sidequest;

TEST_CASE("cited cursors") {
    CHECK(cited_cursors("see [Cursor 3] and [Cursor 1], again [Cursor 3]") == std::vector<CursorId>{1, 3});
    CHECK(cited_cursors("[Cursor x] [cursor 1] [Cursor -1]").empty());
}

TEST_CASE("trace jsonl round trip") {
    std::mt19937_64 rng(8);
    std::vector<Trace> traces;
    for (int i = 0; i < 50; ++i) {
        auto t = sqtest::random_trace(rng, "t" + std::to_string(i));
        if (i % 3 == 0) t.discarded.push_back({0, "garbled \"output\"\nline"});
        if (i % 4 == 0) t.correct.reset();
        traces.push_back(std::move(t));
    }
    // mark an eviction on one trace
    auto l = ContextLedger::from_messages(traces[1].messages);
    if (!l.cursors().empty()) {
        const std::vector<CursorId> ids{0};
        l.clear_kv(ids, 1);
        traces[1].messages.assign(l.messages().begin(), l.messages().end());
    }
    std::stringstream ss;
    for (const auto& t : traces) write_trace(ss, t);
    const auto back = read_traces(ss);
    REQUIRE(back.size() == traces.size());
    for (std::size_t i = 0; i < traces.size(); ++i) CHECK(back[i] == traces[i]);
    std::stringstream again;
    for (const auto& t : back) write_trace(again, t);
    std::stringstream first;
    for (const auto& t : traces) write_trace(first, t);
    CHECK(again.str() == first.str());
}

TEST_CASE("trace reading errors") {
    std::istringstream empty("");
    CHECK(read_traces(empty).empty());
    std::istringstream bad("{not json}\n");
    CHECK_THROWS_AS(read_traces(bad), FormatError);
    std::istringstream orphan(R"({"id":0,"role":"user","text":"x","turn":0,"span_start":0,"span_len":1})" "\n");
    const auto bare = read_traces(orphan);
    REQUIRE(bare.size() == 1);
    CHECK(bare[0].trace_id == "trace-0");
    CHECK(bare[0].messages.size() == 1);
    std::istringstream role(R"({"trace_id":"a","task":"q"})" "\n"
                            R"({"id":0,"role":"robot","text":"x","turn":0,"span_start":0,"span_len":1})" "\n");
    CHECK_THROWS_AS(read_traces(role), FormatError);
    CHECK_THROWS(read_traces_file("/nonexistent/trace.jsonl"));
}

TEST_CASE("verdict formats") {
    std::istringstream obj(R"({"a": true, "b": false})");
    CHECK(read_verdicts(obj) == std::map<std::string, bool>{{"a", true}, {"b", false}});
    std::istringstream lines("{\"trace_id\": \"a\", \"correct\": true}\n\n{\"trace_id\": \"b\", \"correct\": false}\n");
    CHECK(read_verdicts(lines) == std::map<std::string, bool>{{"a", true}, {"b", false}});
    std::istringstream bad("[1, 2]");
    CHECK_THROWS(read_verdicts(bad));
}
