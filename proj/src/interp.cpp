#include "powergear/interp.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "powergear/errors.hpp"

namespace powergear {

namespace {

constexpr int kMaxInterpWidth = 64;

std::uint64_t mask_w(std::uint64_t v, int width) {
    return width >= 64 ? v : (v & ((1ULL << width) - 1));
}

// Plain resize zero-extends or truncates; sign_extend widens from the
// value's top bit instead.
BitVec resize(const BitVec& v, int new_width, bool sign_extend) {
    std::uint64_t raw = v.low64();
    if (sign_extend && new_width > v.width() && v.width() > 0 && v.bit(v.width() - 1)) {
        raw |= ~mask_w(~0ULL, v.width());
    }
    return BitVec(new_width, mask_w(raw, new_width));
}

struct InEdgeRef {
    const DfgEdge* edge;
    int src_index; // into node array
};

std::uint64_t eval_opcode(Opcode op, int width, const std::vector<std::uint64_t>& args,
                          const std::vector<int>& arg_widths) {
    auto arg = [&](std::size_t i) { return i < args.size() ? args[i] : 0ULL; };
    switch (op) {
    case Opcode::Add: case Opcode::FAdd:
        return mask_w(arg(0) + arg(args.size() > 1 ? 1 : 0), width);
    case Opcode::Sub: case Opcode::FSub:
        return mask_w(arg(0) - arg(args.size() > 1 ? 1 : 0), width);
    case Opcode::Mul: case Opcode::FMul:
        return mask_w(arg(0) * arg(args.size() > 1 ? 1 : 0), width);
    case Opcode::Div: case Opcode::FDiv: {
        std::uint64_t b = arg(args.size() > 1 ? 1 : 0);
        if (b == 0) return mask_w(~0ULL, width); // divide-by-zero yields all-ones
        return mask_w(arg(0) / b, width);
    }
    case Opcode::ICmp: case Opcode::FCmp:
        return arg(0) < arg(args.size() > 1 ? 1 : 0) ? 1ULL : 0ULL;
    case Opcode::SExt: {
        std::uint64_t v = arg(0);
        int w0 = arg_widths.empty() ? width : arg_widths[0];
        if (w0 > 0 && w0 < 64 && (v >> (w0 - 1)) & 1ULL) v |= ~mask_w(~0ULL, w0);
        return mask_w(v, width);
    }
    case Opcode::Trunc: case Opcode::ZExt: case Opcode::BitCast:
        return mask_w(arg(0), width);
    case Opcode::Phi: case Opcode::Select: {
        // Operand 0 selects among the remaining operands.
        if (args.size() <= 1) return mask_w(arg(0), width);
        std::uint64_t c = args[0] % (args.size() - 1);
        return mask_w(args[1 + c], width);
    }
    case Opcode::Alloca: case Opcode::GetElementPtr: case Opcode::Load: case Opcode::Store:
    case Opcode::Buffer: case Opcode::Br: case Opcode::Ret:
        return mask_w(arg(0), width); // forwarding
    }
    throw ValidationError("opcode without interpreter semantics");
}

} // namespace

long long pipeline_depth(const Dfg& g) {
    auto order = g.topo_order();
    std::unordered_map<int, long long> level;
    for (int id : order) level[id] = 0;
    for (int id : order) {
        for (const auto& e : g.edges) {
            if (e.back_edge || e.src != id) continue;
            level[e.snk] = std::max(level[e.snk], level[id] + 1);
        }
    }
    long long depth = 0;
    for (auto& [id, l] : level) depth = std::max(depth, l + 1);
    return std::max<long long>(depth, 1);
}

TraceSet interpret_dfg(const Dfg& g, const Stimuli& stimuli, long long iterations) {
    if (iterations <= 0) throw ValidationError("iterations must be positive");
    for (const auto& n : g.nodes)
        if (n.bitwidth > kMaxInterpWidth)
            throw ValidationError("node " + std::to_string(n.id) + ": interpreter supports widths <= 64");
    for (const auto& e : g.edges)
        if (e.bitwidth > kMaxInterpWidth)
            throw ValidationError("edge " + std::to_string(e.src) + "->" + std::to_string(e.snk) +
                                  ": interpreter supports widths <= 64");

    const auto order = g.topo_order();
    std::unordered_map<int, long long> level;
    for (int id : order) level[id] = 0;
    std::unordered_map<int, std::vector<const DfgEdge*>> in_edges;
    for (const auto& e : g.edges) {
        if (e.back_edge) continue;
        in_edges[e.snk].push_back(&e);
    }
    for (int id : order)
        for (const auto* e : in_edges[id]) level[id] = std::max(level[id], level[e->src] + 1);
    long long depth = 1;
    for (auto& [id, l] : level) depth = std::max(depth, l + 1);

    // Operand order: by (source id, var id).
    for (auto& [id, ins] : in_edges)
        std::sort(ins.begin(), ins.end(), [](const DfgEdge* a, const DfgEdge* b) {
            return std::tie(a->src, a->var) < std::tie(b->src, b->var);
        });

    for (int id : order) {
        if (in_edges[id].empty() && !stimuli.inputs.count(id))
            throw ValidationError("missing stimulus for entry node " + std::to_string(id));
    }

    const long long total_latency = iterations * depth;
    TraceSet ts = empty_traces(g, total_latency);

    auto record = [](std::vector<TraceEvent>& stream, long long cycle, const BitVec& v) {
        if (!stream.empty() && stream.back().value == v) return;
        stream.push_back(TraceEvent{cycle, v});
    };

    std::unordered_map<int, BitVec> value;
    for (long long t = 0; t < iterations; ++t) {
        for (int id : order) {
            const DfgNode& n = g.node_at(id);
            const auto& ins = in_edges[id];
            BitVec out;
            if (ins.empty()) {
                const auto& seq = stimuli.inputs.at(id);
                if (seq.empty())
                    throw ValidationError("empty stimulus sequence for node " + std::to_string(id));
                out = resize(seq[static_cast<std::size_t>(t % static_cast<long long>(seq.size()))],
                             n.bitwidth, false);
            } else {
                std::vector<std::uint64_t> args;
                std::vector<int> widths;
                args.reserve(ins.size());
                for (const auto* e : ins) {
                    BitVec ev = resize(value.at(e->src), e->bitwidth, false);
                    args.push_back(ev.low64());
                    widths.push_back(e->bitwidth);
                }
                out = BitVec(n.bitwidth, eval_opcode(n.opcode, n.bitwidth, args, widths));
            }
            value.insert_or_assign(id, std::move(out));
        }
        for (const auto& e : g.edges) {
            if (e.back_edge) continue;
            BitVec ev = resize(value.at(e.src), e.bitwidth, false);
            auto& tr = ts.traces.at(EdgeKey{e.src, e.snk, e.var});
            record(tr.stream(Dir::Src), t * depth + level[e.src], ev);
            record(tr.stream(Dir::Snk), t * depth + level[e.snk], ev);
        }
    }
    return ts;
}

// ---------------------------------------------------------------------------
// Stimuli format

Stimuli parse_stimuli(const std::string& text, const Dfg& g) {
    Stimuli s;
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
            std::string ver;
            ls >> ver;
            if (tok != "stim" || ver != "v1")
                throw ValidationError("line " + std::to_string(lineno) +
                                      ": expected header 'stim v1'");
            saw_header = true;
            continue;
        }
        if (tok != "in")
            throw ValidationError("line " + std::to_string(lineno) + ": unknown record '" + tok +
                                  "'");
        int id;
        if (!(ls >> id))
            throw ValidationError("line " + std::to_string(lineno) + ": malformed in line");
        const DfgNode* n = g.find_node(id);
        if (!n)
            throw ValidationError("line " + std::to_string(lineno) + ": stimulus for unknown node " +
                                  std::to_string(id));
        std::vector<BitVec> seq;
        std::string v;
        while (ls >> v) {
            if (v.rfind("0x", 0) != 0)
                throw ValidationError("line " + std::to_string(lineno) +
                                      ": stimulus values must be 0x<hex>");
            seq.push_back(BitVec::from_hex(n->bitwidth, v.substr(2)));
        }
        if (seq.empty())
            throw ValidationError("line " + std::to_string(lineno) + ": empty stimulus sequence");
        s.inputs[id] = std::move(seq);
    }
    if (!saw_header) throw ValidationError("empty document: missing 'stim v1' header");
    return s;
}

std::string serialize_stimuli(const Stimuli& s) {
    std::ostringstream out;
    out << "stim v1\n";
    for (const auto& [id, seq] : s.inputs) {
        out << "in " << id;
        for (const auto& v : seq) out << " 0x" << v.to_hex();
        out << "\n";
    }
    return out.str();
}

Stimuli load_stimuli_file(const std::string& path, const Dfg& g) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open stimuli file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_stimuli(ss.str(), g);
}

void save_stimuli_file(const Stimuli& s, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write stimuli file: " + path);
    out << serialize_stimuli(s);
}

} // namespace powergear
