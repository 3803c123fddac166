#ifndef POWERGEAR_TRACE_HPP
#define POWERGEAR_TRACE_HPP

#include <cstdint>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "powergear/bitvec.hpp"
#include "powergear/dfg.hpp"

namespace powergear {

enum class Dir : int { Src, Snk };

struct TraceEvent {
    long long cycle = 0;
    BitVec value;
};

/// Per-edge change-event streams, one per direction. An event is recorded
/// only when the value differs from the previous one in its stream.
struct ValueTrace {
    int src = 0;
    int snk = 0;
    std::string var;
    int bitwidth = 1;
    std::vector<TraceEvent> events[2]; // indexed by Dir

    const std::vector<TraceEvent>& stream(Dir d) const {
        return events[static_cast<int>(d)];
    }
    std::vector<TraceEvent>& stream(Dir d) { return events[static_cast<int>(d)]; }

    /// Cycles strictly increasing, widths uniform, consecutive values differ.
    void validate() const;
};

using EdgeKey = std::tuple<int, int, std::string>;

struct TraceSet {
    long long latency = 1;
    std::map<EdgeKey, ValueTrace> traces;

    const ValueTrace* find(int src, int snk, const std::string& var) const;
};

/// Eq.-style switching activity: sum of Hamming distances between
/// consecutive change events, divided by design latency L. The first event
/// is the reference value and contributes no term.
double switching_activity(const ValueTrace& t, Dir dir, long long latency);

/// Change-event count over design latency.
double activation_rate(const ValueTrace& t, Dir dir, long long latency);

/// Trace format v1:
///   trace v1 latency=<L>
///   ev <src> <snk> <var> <src|snk> <cycle> 0x<hex>
/// Streams with no events produce no lines; loading against a graph
/// initializes every edge with an empty trace first.
std::string serialize_traces(const TraceSet& ts);
TraceSet parse_traces(const std::string& text, const Dfg* graph = nullptr);

TraceSet load_trace_file(const std::string& path, const Dfg* graph = nullptr);
void save_trace_file(const TraceSet& ts, const std::string& path);

/// An all-empty trace set covering every edge of g.
TraceSet empty_traces(const Dfg& g, long long latency);

} // namespace powergear

#endif
