#ifndef POWERGEAR_INTERP_HPP
#define POWERGEAR_INTERP_HPP

#include <map>
#include <string>
#include <vector>

#include "powergear/bitvec.hpp"
#include "powergear/dfg.hpp"
#include "powergear/trace.hpp"

namespace powergear {

/// Per-entry-node input value sequences. Sequences shorter than the
/// iteration count repeat cyclically.
struct Stimuli {
    std::map<int, std::vector<BitVec>> inputs;
};

/// Stimuli format v1:
///   stim v1
///   in <node-id> 0x<v> 0x<v> ...
/// Values are parsed at the entry node's bitwidth.
Stimuli parse_stimuli(const std::string& text, const Dfg& g);
std::string serialize_stimuli(const Stimuli& s);
Stimuli load_stimuli_file(const std::string& path, const Dfg& g);
void save_stimuli_file(const Stimuli& s, const std::string& path);

/// Executes the datapath with unit latency per node, one firing per node
/// per iteration. Node n fires at cycle t*depth + level(n); an edge's src
/// event is stamped at the producer's fire cycle and its snk event at the
/// consumer's. Returns change-event streams for every edge (back edges get
/// empty streams) with total latency L = iterations * pipeline depth.
TraceSet interpret_dfg(const Dfg& g, const Stimuli& stimuli, long long iterations);

/// Pipeline depth used by interpret_dfg (max topological level + 1).
long long pipeline_depth(const Dfg& g);

} // namespace powergear

#endif
