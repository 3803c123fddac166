#ifndef POWERGEAR_TESTUTIL_HPP
#define POWERGEAR_TESTUTIL_HPP

#include <string>
#include <vector>

#include "powergear/dfg.hpp"
#include "powergear/seeding.hpp"

namespace powergear::testutil {

/// Random layered DAG over the full opcode vocabulary (minus buffer),
/// always valid. Used by round-trip and pass property tests.
inline Dfg random_dfg(Rng& rng, int max_nodes = 20) {
    Dfg g;
    g.latency = 1 + static_cast<long long>(rand_index(rng, 100));
    int n = 2 + static_cast<int>(rand_index(rng, static_cast<std::uint64_t>(max_nodes - 1)));

    const Opcode pool[] = {Opcode::Add,  Opcode::Sub,   Opcode::Mul,    Opcode::Div,
                           Opcode::FAdd, Opcode::FSub,  Opcode::FMul,   Opcode::FDiv,
                           Opcode::ICmp, Opcode::FCmp,  Opcode::Alloca, Opcode::GetElementPtr,
                           Opcode::Load, Opcode::Store, Opcode::Trunc,  Opcode::SExt,
                           Opcode::ZExt, Opcode::BitCast, Opcode::Phi,  Opcode::Select,
                           Opcode::Br,   Opcode::Ret};
    const int widths[] = {1, 8, 16, 32, 64};

    for (int i = 0; i < n; ++i) {
        DfgNode node;
        node.id = i;
        node.opcode = i == 0 ? Opcode::Alloca : pool[rand_index(rng, std::size(pool))];
        node.op_type = op_type_of(node.opcode);
        node.bitwidth = widths[rand_index(rng, std::size(widths))];
        if (node.opcode == Opcode::Alloca && rand_unit(rng) < 0.7)
            node.mem_words = static_cast<long long>(rand_index(rng, 256));
        if (rand_unit(rng) < 0.1) node.share_key = "rs" + std::to_string(rand_index(rng, 3));
        g.nodes.push_back(std::move(node));
    }
    // forward edges only: ids double as topological positions
    for (int i = 1; i < n; ++i) {
        int fan = 1 + static_cast<int>(rand_index(rng, 2));
        for (int f = 0; f < fan; ++f) {
            int src = static_cast<int>(rand_index(rng, static_cast<std::uint64_t>(i)));
            DfgEdge e;
            e.src = src;
            e.snk = i;
            e.var = "v" + std::to_string(src) + "_" + std::to_string(i) + "_" + std::to_string(f);
            e.bitwidth = widths[rand_index(rng, std::size(widths))];
            g.edges.push_back(std::move(e));
        }
    }
    g.validate();
    return g;
}

inline std::string tmp_dir(const std::string& tag) {
    std::string path = "/tmp/powergear_test_" + tag;
    return path;
}

} // namespace powergear::testutil

#endif
