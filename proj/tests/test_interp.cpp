#include <doctest.h>

#include "powergear/interp.hpp"
#include "testutil.hpp"

using namespace powergear;

TEST_SUITE_BEGIN("interp");

namespace {

// in0, in1 -> add -> ret
Dfg adder_graph(int width) {
    std::string w = std::to_string(width);
    return parse_dfg("dfg v1 latency=1\n"
                     "node 0 load memory-op width=" + w + "\n"
                     "node 1 load memory-op width=" + w + "\n"
                     "node 2 add binary-op width=" + w + "\n"
                     "node 3 ret control-op width=" + w + "\n"
                     "edge 0 2 var=a width=" + w + "\n"
                     "edge 1 2 var=b width=" + w + "\n"
                     "edge 2 3 var=sum width=" + w + "\n");
}

Stimuli stim_for(const Dfg& g, std::map<int, std::vector<std::uint64_t>> vals) {
    Stimuli s;
    for (auto& [id, seq] : vals) {
        std::vector<BitVec> bv;
        for (auto v : seq) bv.emplace_back(g.node_at(id).bitwidth, v);
        s.inputs[id] = std::move(bv);
    }
    return s;
}

} // namespace

TEST_CASE("add node produces 3 then 7; snk lags src by one cycle") {
    Dfg g = adder_graph(16);
    Stimuli s = stim_for(g, {{0, {1, 3}}, {1, {2, 4}}});
    TraceSet ts = interpret_dfg(g, s, 2);
    CHECK(ts.latency == 2 * pipeline_depth(g));

    const ValueTrace* out = ts.find(2, 3, "sum");
    REQUIRE(out != nullptr);
    REQUIRE(out->stream(Dir::Src).size() == 2);
    CHECK(out->stream(Dir::Src)[0].value.low64() == 3);
    CHECK(out->stream(Dir::Src)[1].value.low64() == 7);
    REQUIRE(out->stream(Dir::Snk).size() == 2);
    CHECK(out->stream(Dir::Snk)[0].value.low64() == 3);
    CHECK(out->stream(Dir::Snk)[0].cycle == out->stream(Dir::Src)[0].cycle + 1);
    CHECK(out->stream(Dir::Snk)[1].cycle == out->stream(Dir::Src)[1].cycle + 1);
}

TEST_CASE("constant stimuli leave at most one event per stream") {
    Dfg g = adder_graph(8);
    Stimuli s = stim_for(g, {{0, {5}}, {1, {9}}});
    TraceSet ts = interpret_dfg(g, s, 10);
    for (const auto& [key, t] : ts.traces) {
        CHECK(t.stream(Dir::Src).size() <= 1);
        CHECK(t.stream(Dir::Snk).size() <= 1);
        CHECK(switching_activity(t, Dir::Src, ts.latency) == 0.0);
        CHECK(switching_activity(t, Dir::Snk, ts.latency) == 0.0);
    }
}

TEST_CASE("width-8 wrap: 255 + 1 = 0") {
    Dfg g = adder_graph(8);
    Stimuli s = stim_for(g, {{0, {255}}, {1, {1}}});
    TraceSet ts = interpret_dfg(g, s, 1);
    CHECK(ts.find(2, 3, "sum")->stream(Dir::Src)[0].value.low64() == 0);
}

TEST_CASE("divide by zero yields all-ones") {
    Dfg g = parse_dfg("dfg v1 latency=1\n"
                      "node 0 load memory-op width=8\n"
                      "node 1 load memory-op width=8\n"
                      "node 2 div binary-op width=8\n"
                      "node 3 ret control-op width=8\n"
                      "edge 0 2 var=a width=8\n"
                      "edge 1 2 var=b width=8\n"
                      "edge 2 3 var=q width=8\n");
    Stimuli s = stim_for(g, {{0, {42}}, {1, {0}}});
    TraceSet ts = interpret_dfg(g, s, 1);
    CHECK(ts.find(2, 3, "q")->stream(Dir::Src)[0].value.low64() == 0xff);
}

TEST_CASE("sext sign-extends across widths") {
    Dfg g = parse_dfg("dfg v1 latency=1\n"
                      "node 0 load memory-op width=4\n"
                      "node 1 sext cast-op width=8\n"
                      "node 2 ret control-op width=8\n"
                      "edge 0 1 var=x width=4\n"
                      "edge 1 2 var=y width=8\n");
    Stimuli s = stim_for(g, {{0, {0b1000}}}); // negative in 4 bits
    TraceSet ts = interpret_dfg(g, s, 1);
    CHECK(ts.find(1, 2, "y")->stream(Dir::Src)[0].value.low64() == 0xf8);
}

TEST_CASE("missing stimulus is an error naming the entry") {
    Dfg g = adder_graph(8);
    Stimuli s = stim_for(g, {{0, {1}}});
    CHECK_THROWS_WITH_AS(interpret_dfg(g, s, 1), doctest::Contains("stimulus"), ValidationError);
}

TEST_CASE("interpreter is deterministic") {
    Rng rng(21);
    for (int trial = 0; trial < 10; ++trial) {
        Dfg g = testutil::random_dfg(rng, 12);
        Stimuli s;
        Rng vals(trial);
        for (int id : g.entry_ids()) {
            std::vector<BitVec> seq;
            for (int t = 0; t < 6; ++t)
                seq.emplace_back(g.node_at(id).bitwidth, vals());
            s.inputs[id] = std::move(seq);
        }
        TraceSet a = interpret_dfg(g, s, 6);
        TraceSet b = interpret_dfg(g, s, 6);
        CHECK(serialize_traces(a) == serialize_traces(b));
    }
}

TEST_CASE("stimuli repeat cyclically when shorter than the run") {
    Dfg g = adder_graph(8);
    Stimuli s = stim_for(g, {{0, {1, 2}}, {1, {0}}});
    TraceSet ts = interpret_dfg(g, s, 4);
    const auto& ev = ts.find(2, 3, "sum")->stream(Dir::Src);
    // values alternate 1, 2, 1, 2 -> change events at every iteration
    REQUIRE(ev.size() == 4);
    CHECK(ev[0].value.low64() == 1);
    CHECK(ev[1].value.low64() == 2);
    CHECK(ev[2].value.low64() == 1);
}

TEST_CASE("stimuli file round-trips") {
    Dfg g = adder_graph(16);
    Stimuli s = stim_for(g, {{0, {1, 0xffff, 3}}, {1, {7}}});
    std::string text = serialize_stimuli(s);
    Stimuli back = parse_stimuli(text, g);
    CHECK(serialize_stimuli(back) == text);
    REQUIRE(back.inputs.at(0).size() == 3);
    CHECK(back.inputs.at(0)[1].low64() == 0xffff);
}

TEST_CASE("widths above 64 are rejected by the interpreter") {
    Dfg g = parse_dfg("dfg v1 latency=1\n"
                      "node 0 load memory-op width=128\n"
                      "node 1 ret control-op width=1\n"
                      "edge 0 1 var=x width=128\n");
    Stimuli s;
    s.inputs[0] = {BitVec(128, 1)};
    CHECK_THROWS_AS(interpret_dfg(g, s, 1), ValidationError);
}

TEST_SUITE_END();
