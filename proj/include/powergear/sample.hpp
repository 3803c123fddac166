#ifndef POWERGEAR_SAMPLE_HPP
#define POWERGEAR_SAMPLE_HPP

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "powergear/dfg.hpp"
#include "powergear/trace.hpp"

namespace powergear {

/// Source-to-sink relation by arithmetic class of the endpoints.
enum class RelationType : int { AA, AN, NA, NN };
inline constexpr int kNumRelations = 4;

RelationType relation_of(NodeClass src, NodeClass snk);
const char* relation_name(RelationType r);
std::optional<RelationType> relation_from_name(const std::string& name);

enum class LabelKind : int { Total, Dynamic };
const char* label_kind_name(LabelKind k);

/// [SA_src, SA_snk, AR_src, AR_snk]
using EdgeFeatures = std::array<double, 4>;

inline constexpr int kMetadataDim = 10; // LUT DSP BRAM latency clock + 5 scaling factors

/// One learning sample: per-node feature rows, typed directed edges with
/// 4-dim features, optional metadata vector and power label.
struct GraphSample {
    struct Edge {
        int src = 0; // row indices into node features
        int snk = 0;
        RelationType rel = RelationType::NN;
        EdgeFeatures feat{};

        bool operator==(const Edge&) const = default;
    };

    int node_feat_dim = 0;
    std::vector<double> node_feats; // row-major, num_nodes x node_feat_dim
    std::vector<Edge> edges;
    std::vector<double> metadata; // empty or kMetadataDim values
    std::optional<double> label;  // watts
    LabelKind label_kind = LabelKind::Total;

    int uid = -1; // dataset-local identity for leakage audits; not serialized

    int num_nodes() const {
        return node_feat_dim == 0 ? 0 : static_cast<int>(node_feats.size()) / node_feat_dim;
    }
    double node_feat(int node, int j) const {
        return node_feats[static_cast<std::size_t>(node) * node_feat_dim + j];
    }
    bool operator==(const GraphSample& o) const {
        return node_feat_dim == o.node_feat_dim && node_feats == o.node_feats &&
               edges == o.edges && metadata == o.metadata && label == o.label &&
               label_kind == o.label_kind;
    }

    void validate() const;
};

/// Node feature layout: one-hot op_type (5) | one-hot opcode (23) |
/// [overall AR, input SA, output SA, overall SA].
inline constexpr int kNodeFeatDim = kNumOpTypes + kNumOpcodes + 4;

/// Computes edge and node features from value traces (Eq.-style switching
/// activity and activation rate over the trace latency) and assembles the
/// sample. Node rows follow ascending node id; edges follow the graph's
/// canonical (src, snk, var) order.
GraphSample annotate_features(const Dfg& g, const TraceSet& traces);

/// Sample format v1:
///   sample v1 nodes=<n> edges=<m> dnode=<d> [label_kind=<k>]
///   meta <10 reals>            (optional)
///   label <watts>              (optional)
///   nodefeat <row> <d reals>
///   edge <i> <src> <snk> <rel>
///   edgefeat <i> <4 reals>
/// Reals are printed losslessly (%.17g).
std::string serialize_sample(const GraphSample& s);
GraphSample parse_sample(const std::string& text);
GraphSample load_sample_file(const std::string& path);
void save_sample_file(const GraphSample& s, const std::string& path);

/// Sidecar metadata format v1:
///   meta v1
///   metadata <10 reals>
///   label total <watts>
///   label dynamic <watts>
struct MetaFile {
    std::array<double, kMetadataDim> metadata{};
    std::optional<double> label_total;
    std::optional<double> label_dynamic;
};
std::string serialize_meta(const MetaFile& m);
MetaFile parse_meta(const std::string& text);
MetaFile load_meta_file(const std::string& path);
void save_meta_file(const MetaFile& m, const std::string& path);

/// Lossless decimal for doubles (round-trips IEEE-754 binary64).
std::string format_double(double v);

} // namespace powergear

#endif
