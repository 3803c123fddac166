#include "powergear/trace.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "powergear/errors.hpp"

namespace powergear {

void ValueTrace::validate() const {
    for (int d = 0; d < 2; ++d) {
        const auto& ev = events[d];
        for (std::size_t i = 0; i < ev.size(); ++i) {
            if (ev[i].value.width() != bitwidth)
                throw ValidationError("trace (" + std::to_string(src) + "," + std::to_string(snk) +
                                      "," + var + "): event width " +
                                      std::to_string(ev[i].value.width()) + " != edge width " +
                                      std::to_string(bitwidth));
            if (i > 0) {
                if (ev[i].cycle <= ev[i - 1].cycle)
                    throw ValidationError("trace (" + std::to_string(src) + "," +
                                          std::to_string(snk) + "," + var +
                                          "): cycles not strictly increasing");
                if (ev[i].value == ev[i - 1].value)
                    throw ValidationError("trace (" + std::to_string(src) + "," +
                                          std::to_string(snk) + "," + var +
                                          "): consecutive events carry equal values");
            }
        }
    }
}

const ValueTrace* TraceSet::find(int src, int snk, const std::string& var) const {
    auto it = traces.find({src, snk, var});
    return it == traces.end() ? nullptr : &it->second;
}

double switching_activity(const ValueTrace& t, Dir dir, long long latency) {
    if (latency < 1) throw ValidationError("switching_activity: latency must be >= 1");
    const auto& ev = t.stream(dir);
    long long total = 0;
    for (std::size_t i = 1; i < ev.size(); ++i)
        total += hamming(ev[i].value, ev[i - 1].value);
    return static_cast<double>(total) / static_cast<double>(latency);
}

double activation_rate(const ValueTrace& t, Dir dir, long long latency) {
    if (latency < 1) throw ValidationError("activation_rate: latency must be >= 1");
    const auto& ev = t.stream(dir);
    // N counts the change events, which excludes the initial reference value.
    long long n = ev.empty() ? 0 : static_cast<long long>(ev.size()) - 1;
    return static_cast<double>(n) / static_cast<double>(latency);
}

std::string serialize_traces(const TraceSet& ts) {
    std::ostringstream out;
    out << "trace v1 latency=" << ts.latency << "\n";
    for (const auto& [key, t] : ts.traces) {
        t.validate();
        for (int d = 0; d < 2; ++d) {
            for (const auto& ev : t.events[d]) {
                out << "ev " << t.src << ' ' << t.snk << ' ' << t.var << ' '
                    << (d == 0 ? "src" : "snk") << ' ' << ev.cycle << " 0x" << ev.value.to_hex()
                    << "\n";
            }
        }
    }
    return out.str();
}

TraceSet parse_traces(const std::string& text, const Dfg* graph) {
    TraceSet ts;
    if (graph) ts = empty_traces(*graph, 1);
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (!saw_header) {
            std::string ver, lat;
            ls >> ver >> lat;
            if (tok != "trace" || ver != "v1" || lat.rfind("latency=", 0) != 0)
                throw ValidationError("line " + std::to_string(lineno) +
                                      ": expected header 'trace v1 latency=<L>'");
            try {
                ts.latency = std::stoll(lat.substr(8));
            } catch (const std::exception&) {
                throw ValidationError("line " + std::to_string(lineno) + ": bad latency value");
            }
            if (ts.latency <= 0)
                throw ValidationError("line " + std::to_string(lineno) + ": latency must be >= 1");
            saw_header = true;
            continue;
        }
        if (tok != "ev")
            throw ValidationError("line " + std::to_string(lineno) + ": unknown record '" + tok +
                                  "'");
        int src, snk;
        std::string var, dir_s, hex;
        long long cycle;
        if (!(ls >> src >> snk >> var >> dir_s >> cycle >> hex))
            throw ValidationError("line " + std::to_string(lineno) + ": malformed ev line");
        Dir dir;
        if (dir_s == "src")
            dir = Dir::Src;
        else if (dir_s == "snk")
            dir = Dir::Snk;
        else
            throw ValidationError("line " + std::to_string(lineno) + ": dir must be src|snk");
        if (hex.rfind("0x", 0) != 0)
            throw ValidationError("line " + std::to_string(lineno) + ": value must be 0x<hex>");

        EdgeKey key{src, snk, var};
        auto it = ts.traces.find(key);
        if (it == ts.traces.end()) {
            if (graph)
                throw ValidationError("line " + std::to_string(lineno) + ": trace references edge (" +
                                      std::to_string(src) + "," + std::to_string(snk) + "," + var +
                                      ") not in graph");
            ValueTrace t;
            t.src = src;
            t.snk = snk;
            t.var = var;
            t.bitwidth = static_cast<int>(hex.size() - 2) * 4; // inferred from first literal
            it = ts.traces.emplace(key, std::move(t)).first;
        }
        TraceEvent ev;
        ev.cycle = cycle;
        ev.value = BitVec::from_hex(it->second.bitwidth, hex.substr(2));
        it->second.stream(dir).push_back(std::move(ev));
    }
    if (!saw_header) throw ValidationError("empty document: missing 'trace v1' header");
    for (auto& [k, t] : ts.traces) t.validate();
    return ts;
}

TraceSet load_trace_file(const std::string& path, const Dfg* graph) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open trace file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_traces(ss.str(), graph);
}

void save_trace_file(const TraceSet& ts, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write trace file: " + path);
    out << serialize_traces(ts);
}

TraceSet empty_traces(const Dfg& g, long long latency) {
    TraceSet ts;
    ts.latency = latency;
    for (const auto& e : g.edges) {
        ValueTrace t;
        t.src = e.src;
        t.snk = e.snk;
        t.var = e.var;
        t.bitwidth = e.bitwidth;
        ts.traces.emplace(EdgeKey{e.src, e.snk, e.var}, std::move(t));
    }
    return ts;
}

} // namespace powergear
