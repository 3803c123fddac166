#ifndef POWERGEAR_DFG_HPP
#define POWERGEAR_DFG_HPP

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "powergear/errors.hpp"

namespace powergear {

/// IR opcode vocabulary. Closed set: one-hot node features need a fixed
/// dimensionality, so unknown names are rejected at parse time.
enum class Opcode : int {
    Add, Sub, Mul, Div, FAdd, FSub, FMul, FDiv, ICmp, FCmp, // arithmetic
    Alloca, GetElementPtr, Load, Store,                     // memory
    Trunc, SExt, ZExt, BitCast,                             // cast
    Phi, Select, Br, Ret,                                   // control
    Buffer,                                                 // inserted by construction
};
inline constexpr int kNumOpcodes = 23;

enum class OpType : int { BinaryOp, MemoryOp, CastOp, ControlOp, BufferOp };
inline constexpr int kNumOpTypes = 5;

/// Arithmetic (A) / non-arithmetic (N) node classes.
enum class NodeClass : int { Arithmetic, NonArithmetic };

const char* opcode_name(Opcode op);
std::optional<Opcode> opcode_from_name(const std::string& name);
const char* op_type_name(OpType t);
std::optional<OpType> op_type_from_name(const std::string& name);

/// Canonical five-way grouping of an opcode.
OpType op_type_of(Opcode op);
bool is_arith(Opcode op);
bool is_cast(Opcode op);
bool is_control(Opcode op);

struct DfgNode {
    int id = 0;
    Opcode opcode = Opcode::Add;
    OpType op_type = OpType::BinaryOp;
    int bitwidth = 1;
    // Memory words. Required on buffer nodes; optional on alloca nodes,
    // where it declares the size consumed by buffer insertion.
    std::optional<long long> mem_words;
    // Resource-sharing key driving the merge pass; carried from input.
    std::optional<std::string> share_key;

    bool operator==(const DfgNode&) const = default;
};

struct DfgEdge {
    int src = 0;
    int snk = 0;
    std::string var;
    int bitwidth = 1;
    // Set during validation for cycle-closing edges that touch a control
    // op. Back edges are excluded from all datapath analyses.
    bool back_edge = false;

    bool operator==(const DfgEdge&) const = default;
};

/// Directed dataflow graph. Immutable by convention after validate();
/// passes return new graphs.
struct Dfg {
    long long latency = 1;
    std::vector<DfgNode> nodes; // sorted by id after validate()
    std::vector<DfgEdge> edges; // sorted by (src, snk, var) after validate()

    bool operator==(const Dfg&) const = default;

    const DfgNode* find_node(int id) const;
    const DfgNode& node_at(int id) const; // throws if absent
    bool has_node(int id) const { return find_node(id) != nullptr; }
    int max_node_id() const;

    /// Nodes with no incoming / outgoing datapath (non-back) edge.
    std::vector<int> entry_ids() const;
    std::vector<int> exit_ids() const;

    /// Node ids in a topological order of the datapath edges.
    std::vector<int> topo_order() const;

    /// Canonicalizes order, tags control back edges, checks every invariant.
    /// Throws ValidationError on the first violation.
    void validate();
};

NodeClass classify_node(const DfgNode& n);

/// Interchange format v1 (line-oriented text, LF, UTF-8):
///   dfg v1 latency=<L>
///   node <id> <opcode> <op_type> width=<w> [mem=<words>] [share=<key>]
///   edge <src> <snk> var=<name> width=<w>
Dfg parse_dfg(const std::string& text);
std::string serialize_dfg(const Dfg& g);

Dfg load_dfg_file(const std::string& path);
void save_dfg_file(const Dfg& g, const std::string& path);

} // namespace powergear

#endif
