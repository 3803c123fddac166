#ifndef POWERGEAR_PASSES_HPP
#define POWERGEAR_PASSES_HPP

#include "powergear/dfg.hpp"
#include "powergear/errors.hpp"

namespace powergear {

/// Instruments memory buffers: for every {alloca|getelementptr} ->
/// {load|store} pattern, one buffer node per allocation root is inserted,
/// fed by the pattern nodes and connected to the downstream consumers of
/// matched loads. Accesses with no reachable allocation source get a
/// size-0 I/O buffer (diagnostic). Never removes nodes.
Dfg insert_buffers(const Dfg& g, Diagnostics* diags = nullptr);

/// Fuses duplicate datapaths: maximal chains between the same (source,
/// sink) pair whose interior sequences are identical under the key
/// (opcode, op_type, bitwidth) collapse to one representative; nodes
/// sharing a resource-sharing key merge into one node with the union of
/// edges. Runs to a fixpoint, so the pass is idempotent.
Dfg merge_datapaths(const Dfg& g, Diagnostics* diags = nullptr);

/// Bypasses cast nodes (trunc/sext/zext/bitcast): each pred -> cast ->
/// succ pair becomes pred -> succ carrying the pred-side var and the
/// succ-side width. Cast nodes at the graph boundary are kept with a
/// diagnostic. Never adds nodes.
Dfg trim_graph(const Dfg& g, Diagnostics* diags = nullptr);

/// insert -> merge -> trim.
Dfg construct_graph(const Dfg& g, Diagnostics* diags = nullptr);

} // namespace powergear

#endif
