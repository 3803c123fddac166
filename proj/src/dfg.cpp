#include "powergear/dfg.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace powergear {

namespace {

constexpr std::array<const char*, kNumOpcodes> kOpcodeNames = {
    "add",  "sub",  "mul",  "div",  "fadd", "fsub",   "fmul", "fdiv",
    "icmp", "fcmp", "alloca", "getelementptr", "load", "store",
    "trunc", "sext", "zext", "bitcast", "phi", "select", "br", "ret", "buffer"};

constexpr std::array<const char*, kNumOpTypes> kOpTypeNames = {
    "binary-op", "memory-op", "cast-op", "control-op", "buffer-op"};

} // namespace

const char* opcode_name(Opcode op) { return kOpcodeNames[static_cast<std::size_t>(op)]; }

std::optional<Opcode> opcode_from_name(const std::string& name) {
    for (int i = 0; i < kNumOpcodes; ++i)
        if (name == kOpcodeNames[static_cast<std::size_t>(i)]) return static_cast<Opcode>(i);
    return std::nullopt;
}

const char* op_type_name(OpType t) { return kOpTypeNames[static_cast<std::size_t>(t)]; }

std::optional<OpType> op_type_from_name(const std::string& name) {
    for (int i = 0; i < kNumOpTypes; ++i)
        if (name == kOpTypeNames[static_cast<std::size_t>(i)]) return static_cast<OpType>(i);
    return std::nullopt;
}

OpType op_type_of(Opcode op) {
    switch (op) {
    case Opcode::Add: case Opcode::Sub: case Opcode::Mul: case Opcode::Div:
    case Opcode::FAdd: case Opcode::FSub: case Opcode::FMul: case Opcode::FDiv:
    case Opcode::ICmp: case Opcode::FCmp:
        return OpType::BinaryOp;
    case Opcode::Alloca: case Opcode::GetElementPtr: case Opcode::Load: case Opcode::Store:
        return OpType::MemoryOp;
    case Opcode::Trunc: case Opcode::SExt: case Opcode::ZExt: case Opcode::BitCast:
        return OpType::CastOp;
    case Opcode::Phi: case Opcode::Select: case Opcode::Br: case Opcode::Ret:
        return OpType::ControlOp;
    case Opcode::Buffer:
        return OpType::BufferOp;
    }
    throw ValidationError("bad opcode value");
}

bool is_arith(Opcode op) { return op_type_of(op) == OpType::BinaryOp; }
bool is_cast(Opcode op) { return op_type_of(op) == OpType::CastOp; }
bool is_control(Opcode op) { return op_type_of(op) == OpType::ControlOp; }

NodeClass classify_node(const DfgNode& n) {
    return is_arith(n.opcode) ? NodeClass::Arithmetic : NodeClass::NonArithmetic;
}

const DfgNode* Dfg::find_node(int id) const {
    auto it = std::lower_bound(nodes.begin(), nodes.end(), id,
                               [](const DfgNode& n, int v) { return n.id < v; });
    if (it != nodes.end() && it->id == id) return &*it;
    // Fall back to linear scan for graphs not yet canonicalized.
    for (const auto& n : nodes)
        if (n.id == id) return &n;
    return nullptr;
}

const DfgNode& Dfg::node_at(int id) const {
    const DfgNode* n = find_node(id);
    if (!n) throw ValidationError("node id " + std::to_string(id) + " not in graph");
    return *n;
}

int Dfg::max_node_id() const {
    int m = -1;
    for (const auto& n : nodes) m = std::max(m, n.id);
    return m;
}

std::vector<int> Dfg::entry_ids() const {
    std::set<int> has_in;
    for (const auto& e : edges)
        if (!e.back_edge) has_in.insert(e.snk);
    std::vector<int> out;
    for (const auto& n : nodes)
        if (!has_in.count(n.id)) out.push_back(n.id);
    return out;
}

std::vector<int> Dfg::exit_ids() const {
    std::set<int> has_out;
    for (const auto& e : edges)
        if (!e.back_edge) has_out.insert(e.src);
    std::vector<int> out;
    for (const auto& n : nodes)
        if (!has_out.count(n.id)) out.push_back(n.id);
    return out;
}

std::vector<int> Dfg::topo_order() const {
    std::unordered_map<int, int> indeg;
    std::unordered_map<int, std::vector<int>> succ;
    for (const auto& n : nodes) indeg[n.id] = 0;
    for (const auto& e : edges) {
        if (e.back_edge) continue;
        ++indeg[e.snk];
        succ[e.src].push_back(e.snk);
    }
    // Min-id-first Kahn keeps the order deterministic.
    std::set<int> ready;
    for (const auto& n : nodes)
        if (indeg[n.id] == 0) ready.insert(n.id);
    std::vector<int> order;
    order.reserve(nodes.size());
    while (!ready.empty()) {
        int v = *ready.begin();
        ready.erase(ready.begin());
        order.push_back(v);
        auto it = succ.find(v);
        if (it == succ.end()) continue;
        for (int s : it->second)
            if (--indeg[s] == 0) ready.insert(s);
    }
    if (order.size() != nodes.size()) throw ValidationError("datapath contains a cycle");
    return order;
}

void Dfg::validate() {
    if (latency <= 0) throw ValidationError("latency must be positive");

    std::sort(nodes.begin(), nodes.end(),
              [](const DfgNode& a, const DfgNode& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < nodes.size(); ++i)
        if (nodes[i].id == nodes[i - 1].id)
            throw ValidationError("duplicate node id " + std::to_string(nodes[i].id));

    for (const auto& n : nodes) {
        if (n.bitwidth <= 0)
            throw ValidationError("node " + std::to_string(n.id) + ": width must be positive");
        if (n.op_type != op_type_of(n.opcode))
            throw ValidationError("node " + std::to_string(n.id) + ": op_type '" +
                                  op_type_name(n.op_type) + "' does not match opcode '" +
                                  opcode_name(n.opcode) + "'");
        if (n.opcode == Opcode::Buffer) {
            if (!n.mem_words)
                throw ValidationError("node " + std::to_string(n.id) + ": buffer requires mem=");
        } else if (n.mem_words && n.opcode != Opcode::Alloca) {
            throw ValidationError("node " + std::to_string(n.id) +
                                  ": mem= only valid on buffer and alloca nodes");
        }
        if (n.mem_words && *n.mem_words < 0)
            throw ValidationError("node " + std::to_string(n.id) + ": mem= must be >= 0");
    }

    std::sort(edges.begin(), edges.end(), [](const DfgEdge& a, const DfgEdge& b) {
        return std::tie(a.src, a.snk, a.var) < std::tie(b.src, b.snk, b.var);
    });
    for (std::size_t i = 0; i < edges.size(); ++i) {
        auto& e = edges[i];
        if (e.src == e.snk)
            throw ValidationError("edge " + std::to_string(e.src) + "->" + std::to_string(e.snk) +
                                  ": self loop");
        if (!has_node(e.src))
            throw ValidationError("edge references nonexistent node id " + std::to_string(e.src));
        if (!has_node(e.snk))
            throw ValidationError("edge references nonexistent node id " + std::to_string(e.snk));
        if (e.bitwidth <= 0)
            throw ValidationError("edge " + std::to_string(e.src) + "->" + std::to_string(e.snk) +
                                  ": width must be positive");
        if (e.var.empty() || e.var.find_first_of(" \t\r\n") != std::string::npos)
            throw ValidationError("edge " + std::to_string(e.src) + "->" + std::to_string(e.snk) +
                                  ": var id must be a nonempty token");
        if (i > 0 && edges[i - 1].src == e.src && edges[i - 1].snk == e.snk &&
            edges[i - 1].var == e.var)
            throw ValidationError("duplicate edge (" + std::to_string(e.src) + ", " +
                                  std::to_string(e.snk) + ", " + e.var + ")");
        e.back_edge = false;
    }

    // Tag control back edges via DFS from the lowest ids. A retreating edge
    // whose endpoints are both non-control ops is a genuine cyclic datapath.
    std::unordered_map<int, std::vector<std::size_t>> out_edges;
    for (std::size_t i = 0; i < edges.size(); ++i) out_edges[edges[i].src].push_back(i);
    enum : char { White, Grey, Black };
    std::unordered_map<int, char> color;
    for (const auto& n : nodes) color[n.id] = White;
    for (const auto& root : nodes) {
        if (color[root.id] != White) continue;
        std::vector<std::pair<int, std::size_t>> stack; // (node, next out-edge slot)
        stack.push_back({root.id, 0});
        color[root.id] = Grey;
        while (!stack.empty()) {
            auto& [v, slot] = stack.back();
            auto& outs = out_edges[v];
            if (slot == outs.size()) {
                color[v] = Black;
                stack.pop_back();
                continue;
            }
            DfgEdge& e = edges[outs[slot++]];
            if (e.back_edge) continue;
            char c = color[e.snk];
            if (c == Grey) {
                if (is_control(node_at(e.src).opcode) || is_control(node_at(e.snk).opcode)) {
                    e.back_edge = true;
                } else {
                    throw ValidationError("cyclic datapath through edge " + std::to_string(e.src) +
                                          "->" + std::to_string(e.snk));
                }
            } else if (c == White) {
                color[e.snk] = Grey;
                stack.push_back({e.snk, 0});
            }
        }
    }

    topo_order(); // double-checks acyclicity after back-edge removal

    // Reachability from entries over datapath edges.
    std::vector<int> entries = entry_ids();
    std::set<int> seen(entries.begin(), entries.end());
    std::vector<int> work(entries.begin(), entries.end());
    std::unordered_map<int, std::vector<int>> succ;
    for (const auto& e : edges)
        if (!e.back_edge) succ[e.src].push_back(e.snk);
    while (!work.empty()) {
        int v = work.back();
        work.pop_back();
        for (int s : succ[v])
            if (seen.insert(s).second) work.push_back(s);
    }
    for (const auto& n : nodes)
        if (!seen.count(n.id))
            throw ValidationError("node " + std::to_string(n.id) + " unreachable from any entry");
}

// ---------------------------------------------------------------------------
// Interchange format

namespace {

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> toks;
    std::istringstream is(line);
    std::string t;
    while (is >> t) toks.push_back(t);
    return toks;
}

long long parse_int(const std::string& s, const std::string& what, int lineno) {
    long long v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw ValidationError("line " + std::to_string(lineno) + ": bad " + what + " '" + s + "'");
    return v;
}

// key=value token; returns value or nullopt when the key differs.
std::optional<std::string> kv(const std::string& tok, const std::string& key) {
    if (tok.size() > key.size() + 1 && tok.compare(0, key.size(), key) == 0 &&
        tok[key.size()] == '=')
        return tok.substr(key.size() + 1);
    return std::nullopt;
}

} // namespace

Dfg parse_dfg(const std::string& text) {
    Dfg g;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto toks = split_ws(line);
        if (!saw_header) {
            if (toks.size() != 3 || toks[0] != "dfg" || toks[1] != "v1" || !kv(toks[2], "latency"))
                throw ValidationError("line " + std::to_string(lineno) +
                                      ": expected header 'dfg v1 latency=<L>'");
            g.latency = parse_int(*kv(toks[2], "latency"), "latency", lineno);
            saw_header = true;
            continue;
        }
        if (toks[0] == "node") {
            if (toks.size() < 5)
                throw ValidationError("line " + std::to_string(lineno) + ": malformed node line");
            DfgNode n;
            n.id = static_cast<int>(parse_int(toks[1], "node id", lineno));
            auto op = opcode_from_name(toks[2]);
            if (!op)
                throw ValidationError("line " + std::to_string(lineno) + ": unknown opcode '" +
                                      toks[2] + "'");
            n.opcode = *op;
            auto t = op_type_from_name(toks[3]);
            if (!t)
                throw ValidationError("line " + std::to_string(lineno) + ": unknown op_type '" +
                                      toks[3] + "'");
            n.op_type = *t;
            bool saw_width = false;
            for (std::size_t i = 4; i < toks.size(); ++i) {
                if (auto v = kv(toks[i], "width")) {
                    n.bitwidth = static_cast<int>(parse_int(*v, "width", lineno));
                    saw_width = true;
                } else if (auto m = kv(toks[i], "mem")) {
                    n.mem_words = parse_int(*m, "mem", lineno);
                } else if (auto s = kv(toks[i], "share")) {
                    n.share_key = *s;
                } else {
                    throw ValidationError("line " + std::to_string(lineno) +
                                          ": unknown node attribute '" + toks[i] + "'");
                }
            }
            if (!saw_width)
                throw ValidationError("line " + std::to_string(lineno) + ": node missing width=");
            g.nodes.push_back(std::move(n));
        } else if (toks[0] == "edge") {
            if (toks.size() != 5)
                throw ValidationError("line " + std::to_string(lineno) + ": malformed edge line");
            DfgEdge e;
            e.src = static_cast<int>(parse_int(toks[1], "edge src", lineno));
            e.snk = static_cast<int>(parse_int(toks[2], "edge snk", lineno));
            auto v = kv(toks[3], "var");
            auto w = kv(toks[4], "width");
            if (!v || !w)
                throw ValidationError("line " + std::to_string(lineno) +
                                      ": edge needs var=<name> width=<w>");
            e.var = *v;
            e.bitwidth = static_cast<int>(parse_int(*w, "width", lineno));
            g.edges.push_back(std::move(e));
        } else {
            throw ValidationError("line " + std::to_string(lineno) + ": unknown record '" +
                                  toks[0] + "'");
        }
    }
    if (!saw_header) throw ValidationError("empty document: missing 'dfg v1' header");
    g.validate();
    return g;
}

std::string serialize_dfg(const Dfg& g) {
    Dfg canon = g;
    canon.validate();
    std::ostringstream out;
    out << "dfg v1 latency=" << canon.latency << "\n";
    for (const auto& n : canon.nodes) {
        out << "node " << n.id << ' ' << opcode_name(n.opcode) << ' ' << op_type_name(n.op_type)
            << " width=" << n.bitwidth;
        if (n.mem_words) out << " mem=" << *n.mem_words;
        if (n.share_key) out << " share=" << *n.share_key;
        out << "\n";
    }
    for (const auto& e : canon.edges)
        out << "edge " << e.src << ' ' << e.snk << " var=" << e.var << " width=" << e.bitwidth
            << "\n";
    return out.str();
}

Dfg load_dfg_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open dfg file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_dfg(ss.str());
}

void save_dfg_file(const Dfg& g, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write dfg file: " + path);
    out << serialize_dfg(g);
}

} // namespace powergear
