#include "powergear/passes.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <tuple>

namespace powergear {

namespace {

using EdgeTriple = std::tuple<int, int, std::string>;

std::set<EdgeTriple> edge_triples(const Dfg& g) {
    std::set<EdgeTriple> s;
    for (const auto& e : g.edges) s.insert({e.src, e.snk, e.var});
    return s;
}

std::map<int, std::vector<const DfgEdge*>> datapath_preds(const Dfg& g) {
    std::map<int, std::vector<const DfgEdge*>> m;
    for (const auto& e : g.edges)
        if (!e.back_edge) m[e.snk].push_back(&e);
    return m;
}

std::map<int, std::vector<const DfgEdge*>> datapath_succs(const Dfg& g) {
    std::map<int, std::vector<const DfgEdge*>> m;
    for (const auto& e : g.edges)
        if (!e.back_edge) m[e.src].push_back(&e);
    return m;
}

} // namespace

// ---------------------------------------------------------------------------
// Buffer insertion

Dfg insert_buffers(const Dfg& g, Diagnostics* diags) {
    for (const auto& n : g.nodes)
        if (n.opcode == Opcode::Buffer)
            throw ValidationError("insert_buffers: graph already contains buffer nodes");

    Dfg out = g;
    auto preds = datapath_preds(g);
    auto succs = datapath_succs(g);

    // Allocation roots per access. Climb address chains through
    // alloca/getelementptr predecessors; an access with no address chain is
    // its own root (I/O buffer).
    struct RootInfo {
        long long words = 0;
        bool io = false;
        std::vector<int> loads;
        std::vector<int> stores;
    };
    std::map<int, RootInfo> roots; // keyed by root node id

    for (const auto& n : g.nodes) {
        if (n.opcode != Opcode::Load && n.opcode != Opcode::Store) continue;
        std::set<int> found_allocas;
        std::set<int> top_geps;
        std::set<int> visited;
        std::vector<int> work;
        for (const auto* e : preds[n.id]) {
            Opcode p = g.node_at(e->src).opcode;
            if (p == Opcode::Alloca || p == Opcode::GetElementPtr) work.push_back(e->src);
        }
        while (!work.empty()) {
            int v = work.back();
            work.pop_back();
            if (!visited.insert(v).second) continue;
            const DfgNode& vn = g.node_at(v);
            if (vn.opcode == Opcode::Alloca) {
                found_allocas.insert(v);
                continue;
            }
            // getelementptr: climb further
            bool climbed = false;
            for (const auto* e : preds[v]) {
                Opcode p = g.node_at(e->src).opcode;
                if (p == Opcode::Alloca || p == Opcode::GetElementPtr) {
                    work.push_back(e->src);
                    climbed = true;
                }
            }
            if (!climbed) top_geps.insert(v);
        }

        std::vector<int> access_roots(found_allocas.begin(), found_allocas.end());
        if (access_roots.empty()) {
            for (int gep : top_geps) access_roots.push_back(gep);
            if (access_roots.empty()) access_roots.push_back(n.id); // pure I/O access
            if (diags)
                diags->note(std::string(opcode_name(n.opcode)) + " " + std::to_string(n.id) +
                            ": no reachable allocation source; assuming I/O buffer of size 0");
        }
        for (int r : access_roots) {
            auto& info = roots[r];
            const DfgNode& rn = g.node_at(r);
            if (rn.opcode == Opcode::Alloca)
                info.words = rn.mem_words.value_or(0);
            else
                info.io = true;
            if (n.opcode == Opcode::Load)
                info.loads.push_back(n.id);
            else
                info.stores.push_back(n.id);
        }
    }

    auto triples = edge_triples(g);
    auto add_edge = [&](int src, int snk, const std::string& var, int width) {
        if (src == snk) return;
        if (!triples.insert({src, snk, var}).second) return;
        out.edges.push_back(DfgEdge{src, snk, var, width, false});
    };

    int next_id = out.max_node_id() + 1;
    for (auto& [root, info] : roots) {
        std::sort(info.loads.begin(), info.loads.end());
        std::sort(info.stores.begin(), info.stores.end());
        int width = 1;
        for (int a : info.loads) width = std::max(width, g.node_at(a).bitwidth);
        for (int a : info.stores) width = std::max(width, g.node_at(a).bitwidth);

        DfgNode buf;
        buf.id = next_id++;
        buf.opcode = Opcode::Buffer;
        buf.op_type = OpType::BufferOp;
        buf.bitwidth = width;
        buf.mem_words = info.words;
        out.nodes.push_back(buf);

        const std::string var = "buf" + std::to_string(root);
        for (int ld : info.loads) {
            if (ld == root) {
                add_edge(ld, buf.id, var, width); // pure I/O: the access itself feeds the buffer
            } else {
                // Address side feeds the buffer.
                for (const auto* e : preds[ld]) {
                    Opcode p = g.node_at(e->src).opcode;
                    if (p == Opcode::Alloca || p == Opcode::GetElementPtr)
                        add_edge(e->src, buf.id, var, width);
                }
            }
            for (const auto* e : succs[ld]) add_edge(buf.id, e->snk, var, width);
        }
        // A store downstream of this buffer's own consumers (read-modify-write)
        // would close a datapath cycle; the write-back edge is dropped.
        auto reaches = [&](int from, int to) {
            std::set<int> seen{from};
            std::vector<int> work{from};
            while (!work.empty()) {
                int v = work.back();
                work.pop_back();
                if (v == to) return true;
                for (const auto& e : out.edges)
                    if (e.src == v && !e.back_edge && seen.insert(e.snk).second)
                        work.push_back(e.snk);
            }
            return false;
        };
        for (int st : info.stores) {
            if (reaches(buf.id, st)) {
                if (diags)
                    diags->note("store " + std::to_string(st) + ": write-back edge to buffer " +
                                std::to_string(buf.id) + " dropped to keep the datapath acyclic");
                continue;
            }
            add_edge(st, buf.id, var, width);
        }
    }

    out.validate();
    return out;
}

// ---------------------------------------------------------------------------
// Datapath merging

namespace {

struct Chain {
    int src = 0;
    int snk = 0;
    std::vector<int> interior; // node ids, in path order
};

using ChainKey = std::vector<std::tuple<int, int, int>>; // (opcode, op_type, width) per node

// Maximal chains whose interior nodes have datapath in-degree and
// out-degree exactly 1. Nodes touching back edges never qualify.
std::vector<Chain> enumerate_chains(const Dfg& g) {
    std::map<int, int> indeg, outdeg;
    std::map<int, int> the_pred, the_succ;
    std::set<int> touches_back;
    for (const auto& n : g.nodes) indeg[n.id] = outdeg[n.id] = 0;
    for (const auto& e : g.edges) {
        if (e.back_edge) {
            touches_back.insert(e.src);
            touches_back.insert(e.snk);
            continue;
        }
        ++outdeg[e.src];
        ++indeg[e.snk];
        the_succ[e.src] = e.snk;
        the_pred[e.snk] = e.src;
    }
    auto interior = [&](int id) {
        return indeg[id] == 1 && outdeg[id] == 1 && !touches_back.count(id);
    };

    std::vector<Chain> chains;
    for (const auto& n : g.nodes) {
        if (!interior(n.id)) continue;
        if (interior(the_pred[n.id])) continue; // not the head of a run
        Chain c;
        c.src = the_pred[n.id];
        int cur = n.id;
        while (true) {
            c.interior.push_back(cur);
            int nxt = the_succ[cur];
            if (!interior(nxt)) {
                c.snk = nxt;
                break;
            }
            cur = nxt;
        }
        chains.push_back(std::move(c));
    }
    return chains;
}

ChainKey chain_key(const Dfg& g, const Chain& c) {
    ChainKey k;
    for (int id : c.interior) {
        const DfgNode& n = g.node_at(id);
        k.push_back({static_cast<int>(n.opcode), static_cast<int>(n.op_type), n.bitwidth});
    }
    return k;
}

// Removes duplicate chains; returns true if anything changed.
bool dedup_chains(Dfg& g) {
    auto chains = enumerate_chains(g);
    std::map<std::tuple<int, int, ChainKey>, std::vector<const Chain*>> groups;
    for (const auto& c : chains) groups[{c.src, c.snk, chain_key(g, c)}].push_back(&c);

    std::set<int> drop_nodes;
    for (auto& [key, group] : groups) {
        if (group.size() < 2) continue;
        std::sort(group.begin(), group.end(), [](const Chain* a, const Chain* b) {
            return a->interior.front() < b->interior.front();
        });
        for (std::size_t i = 1; i < group.size(); ++i)
            drop_nodes.insert(group[i]->interior.begin(), group[i]->interior.end());
    }
    if (drop_nodes.empty()) return false;

    std::erase_if(g.nodes, [&](const DfgNode& n) { return drop_nodes.count(n.id) > 0; });
    std::erase_if(g.edges, [&](const DfgEdge& e) {
        return drop_nodes.count(e.src) > 0 || drop_nodes.count(e.snk) > 0;
    });
    return true;
}

// Folds nodes sharing a resource key into the lowest-id member; returns
// true if anything changed.
bool merge_shared(Dfg& g, Diagnostics* diags, std::set<std::pair<int, int>>& reported) {
    std::map<std::string, std::vector<int>> groups;
    for (const auto& n : g.nodes)
        if (n.share_key) groups[*n.share_key].push_back(n.id);

    bool changed = false;
    for (auto& [key, members] : groups) {
        if (members.size() < 2) continue;
        std::sort(members.begin(), members.end());
        int rep = members[0];
        for (std::size_t i = 1; i < members.size(); ++i) {
            int m = members[i];
            // A datapath between the two nodes means the fold would close a
            // cycle (a direct edge would become a self-loop).
            auto connected = [&](int from, int to) {
                std::set<int> seen{from};
                std::vector<int> work{from};
                while (!work.empty()) {
                    int v = work.back();
                    work.pop_back();
                    if (v == to) return true;
                    for (const auto& e : g.edges)
                        if (e.src == v && !e.back_edge && seen.insert(e.snk).second)
                            work.push_back(e.snk);
                }
                return false;
            };
            if (connected(rep, m) || connected(m, rep)) {
                if (diags && reported.insert({rep, m}).second)
                    diags->note("resource-sharing merge of node " + std::to_string(m) +
                                " into " + std::to_string(rep) +
                                " skipped: nodes lie on a common datapath");
                continue;
            }
            for (auto& e : g.edges) {
                if (e.src == m) e.src = rep;
                if (e.snk == m) e.snk = rep;
            }
            // Union of edges: drop duplicate triples created by re-pointing.
            std::set<EdgeTriple> seen;
            std::erase_if(g.edges, [&](const DfgEdge& e) {
                return !seen.insert({e.src, e.snk, e.var}).second;
            });
            std::erase_if(g.nodes, [&](const DfgNode& n) { return n.id == m; });
            changed = true;
        }
    }
    return changed;
}

} // namespace

Dfg merge_datapaths(const Dfg& g, Diagnostics* diags) {
    Dfg out = g;
    std::set<std::pair<int, int>> reported;
    // Chain dedup can expose longer duplicate chains and shared-resource
    // folds can create new duplicates, so iterate to a fixpoint.
    bool changed = true;
    while (changed) {
        changed = false;
        if (dedup_chains(out)) changed = true;
        if (merge_shared(out, diags, reported)) changed = true;
    }
    out.validate();
    return out;
}

// ---------------------------------------------------------------------------
// Graph trimming

Dfg trim_graph(const Dfg& g, Diagnostics* diags) {
    Dfg out = g;
    std::set<int> reported;
    bool changed = true;
    while (changed) {
        changed = false;
        for (const auto& n : out.nodes) {
            if (!is_cast(n.opcode)) continue;
            std::vector<DfgEdge> ins, outs;
            bool touches_back = false;
            for (const auto& e : out.edges) {
                if (e.src == n.id || e.snk == n.id) {
                    if (e.back_edge) touches_back = true;
                    if (e.snk == n.id)
                        ins.push_back(e);
                    else
                        outs.push_back(e);
                }
            }
            if (ins.empty() || outs.empty() || touches_back) {
                if (diags && reported.insert(n.id).second)
                    diags->note("cast node " + std::to_string(n.id) + " (" +
                                opcode_name(n.opcode) + ") kept: at graph boundary");
                continue;
            }
            std::set<EdgeTriple> triples = edge_triples(out);
            int id = n.id;
            std::erase_if(out.edges,
                          [&](const DfgEdge& e) { return e.src == id || e.snk == id; });
            for (const auto& in : ins) {
                for (const auto& oe : outs) {
                    if (in.src == oe.snk) continue;
                    if (!triples.insert({in.src, oe.snk, in.var}).second) continue;
                    // pred-side var, succ-side width
                    out.edges.push_back(DfgEdge{in.src, oe.snk, in.var, oe.bitwidth, false});
                }
            }
            std::erase_if(out.nodes, [&](const DfgNode& m) { return m.id == id; });
            changed = true;
            break; // node list mutated; restart scan
        }
    }
    out.validate();
    return out;
}

Dfg construct_graph(const Dfg& g, Diagnostics* diags) {
    return trim_graph(merge_datapaths(insert_buffers(g, diags), diags), diags);
}

} // namespace powergear
