#include "powergear/sample.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "powergear/errors.hpp"

namespace powergear {

RelationType relation_of(NodeClass src, NodeClass snk) {
    bool sa = src == NodeClass::Arithmetic;
    bool ka = snk == NodeClass::Arithmetic;
    if (sa && ka) return RelationType::AA;
    if (sa && !ka) return RelationType::AN;
    if (!sa && ka) return RelationType::NA;
    return RelationType::NN;
}

const char* relation_name(RelationType r) {
    switch (r) {
    case RelationType::AA: return "AA";
    case RelationType::AN: return "AN";
    case RelationType::NA: return "NA";
    case RelationType::NN: return "NN";
    }
    return "?";
}

std::optional<RelationType> relation_from_name(const std::string& name) {
    if (name == "AA") return RelationType::AA;
    if (name == "AN") return RelationType::AN;
    if (name == "NA") return RelationType::NA;
    if (name == "NN") return RelationType::NN;
    return std::nullopt;
}

const char* label_kind_name(LabelKind k) {
    return k == LabelKind::Total ? "total" : "dynamic";
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void GraphSample::validate() const {
    if (node_feat_dim <= 0) throw ValidationError("sample: node feature dim must be positive");
    if (node_feats.size() % static_cast<std::size_t>(node_feat_dim) != 0)
        throw ValidationError("sample: node feature matrix shape mismatch");
    int n = num_nodes();
    for (const auto& e : edges) {
        if (e.src < 0 || e.src >= n || e.snk < 0 || e.snk >= n)
            throw ValidationError("sample: edge endpoint out of range");
        for (double f : e.feat)
            if (f < 0 || !std::isfinite(f))
                throw ValidationError("sample: edge features must be finite and >= 0");
    }
    if (!metadata.empty() && metadata.size() != kMetadataDim)
        throw ValidationError("sample: metadata must have " + std::to_string(kMetadataDim) +
                              " entries");
    if (label && *label <= 0) throw ValidationError("sample: label must be > 0 when present");
}

GraphSample annotate_features(const Dfg& g, const TraceSet& traces) {
    // Both directions: every graph edge needs a trace, every trace an edge.
    for (const auto& [key, t] : traces.traces) {
        bool found = false;
        for (const auto& e : g.edges)
            if (e.src == t.src && e.snk == t.snk && e.var == t.var) {
                found = true;
                break;
            }
        if (!found)
            throw ValidationError("trace references unknown edge (" + std::to_string(t.src) + "," +
                                  std::to_string(t.snk) + "," + t.var + ")");
    }

    Dfg canon = g;
    canon.validate();
    const long long latency = traces.latency;

    std::map<int, int> row_of; // node id -> feature row
    for (const auto& n : canon.nodes) {
        int r = static_cast<int>(row_of.size());
        row_of[n.id] = r;
    }

    GraphSample s;
    s.node_feat_dim = kNodeFeatDim;
    s.node_feats.assign(canon.nodes.size() * static_cast<std::size_t>(kNodeFeatDim), 0.0);

    struct NodeAcc {
        double sa_in = 0, sa_out = 0;
        double ar_sum = 0;
        int ar_count = 0;
    };
    std::map<int, NodeAcc> acc;

    for (const auto& e : canon.edges) {
        const ValueTrace* t = traces.find(e.src, e.snk, e.var);
        if (!t)
            throw ValidationError("missing trace for edge (" + std::to_string(e.src) + "," +
                                  std::to_string(e.snk) + "," + e.var + ")");
        EdgeFeatures f;
        f[0] = switching_activity(*t, Dir::Src, latency);
        f[1] = switching_activity(*t, Dir::Snk, latency);
        f[2] = activation_rate(*t, Dir::Src, latency);
        f[3] = activation_rate(*t, Dir::Snk, latency);
        if (f[2] > 1.0 || f[3] > 1.0)
            throw ValidationError("edge (" + std::to_string(e.src) + "," + std::to_string(e.snk) +
                                  "," + e.var + "): more change events than latency cycles");

        GraphSample::Edge se;
        se.src = row_of.at(e.src);
        se.snk = row_of.at(e.snk);
        se.rel = relation_of(classify_node(canon.node_at(e.src)), classify_node(canon.node_at(e.snk)));
        se.feat = f;
        s.edges.push_back(se);

        auto& as = acc[e.src];
        as.sa_out += f[0]; // SA_src on outgoing edges
        as.ar_sum += f[2];
        ++as.ar_count;
        auto& ak = acc[e.snk];
        ak.sa_in += f[1]; // SA_snk on incoming edges
        ak.ar_sum += f[3];
        ++ak.ar_count;
    }

    for (const auto& n : canon.nodes) {
        double* row = &s.node_feats[static_cast<std::size_t>(row_of.at(n.id)) * kNodeFeatDim];
        row[static_cast<int>(n.op_type)] = 1.0;
        row[kNumOpTypes + static_cast<int>(n.opcode)] = 1.0;
        const NodeAcc a = acc.count(n.id) ? acc.at(n.id) : NodeAcc{};
        double ar_overall = a.ar_count ? a.ar_sum / a.ar_count : 0.0;
        row[kNumOpTypes + kNumOpcodes + 0] = ar_overall;
        row[kNumOpTypes + kNumOpcodes + 1] = a.sa_in;
        row[kNumOpTypes + kNumOpcodes + 2] = a.sa_out;
        row[kNumOpTypes + kNumOpcodes + 3] = a.sa_in + a.sa_out;
    }

    s.validate();
    return s;
}

// ---------------------------------------------------------------------------
// Sample format

std::string serialize_sample(const GraphSample& s) {
    s.validate();
    std::ostringstream out;
    out << "sample v1 nodes=" << s.num_nodes() << " edges=" << s.edges.size()
        << " dnode=" << s.node_feat_dim;
    if (s.label) out << " label_kind=" << label_kind_name(s.label_kind);
    out << "\n";
    if (!s.metadata.empty()) {
        out << "meta";
        for (double v : s.metadata) out << ' ' << format_double(v);
        out << "\n";
    }
    if (s.label) out << "label " << format_double(*s.label) << "\n";
    for (int i = 0; i < s.num_nodes(); ++i) {
        out << "nodefeat " << i;
        for (int j = 0; j < s.node_feat_dim; ++j) out << ' ' << format_double(s.node_feat(i, j));
        out << "\n";
    }
    for (std::size_t i = 0; i < s.edges.size(); ++i) {
        const auto& e = s.edges[i];
        out << "edge " << i << ' ' << e.src << ' ' << e.snk << ' ' << relation_name(e.rel) << "\n";
        out << "edgefeat " << i;
        for (double f : e.feat) out << ' ' << format_double(f);
        out << "\n";
    }
    return out.str();
}

GraphSample parse_sample(const std::string& text) {
    GraphSample s;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    bool saw_header = false;
    long long n_nodes = 0, n_edges = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        auto bad = [&](const std::string& why) {
            return ValidationError("line " + std::to_string(lineno) + ": " + why);
        };
        if (!saw_header) {
            if (tok != "sample") throw bad("expected 'sample v1' header");
            std::string ver;
            ls >> ver;
            if (ver != "v1") throw bad("unsupported sample version '" + ver + "'");
            std::string attr;
            int dnode = 0;
            while (ls >> attr) {
                if (attr.rfind("nodes=", 0) == 0)
                    n_nodes = std::stoll(attr.substr(6));
                else if (attr.rfind("edges=", 0) == 0)
                    n_edges = std::stoll(attr.substr(6));
                else if (attr.rfind("dnode=", 0) == 0)
                    dnode = std::stoi(attr.substr(6));
                else if (attr.rfind("label_kind=", 0) == 0) {
                    std::string k = attr.substr(11);
                    if (k == "total")
                        s.label_kind = LabelKind::Total;
                    else if (k == "dynamic")
                        s.label_kind = LabelKind::Dynamic;
                    else
                        throw bad("unknown label kind '" + k + "'");
                } else
                    throw bad("unknown header attribute '" + attr + "'");
            }
            if (dnode <= 0) throw bad("header missing dnode=");
            s.node_feat_dim = dnode;
            s.node_feats.assign(static_cast<std::size_t>(n_nodes) * dnode, 0.0);
            s.edges.assign(static_cast<std::size_t>(n_edges), {});
            saw_header = true;
            continue;
        }
        if (tok == "meta") {
            double v;
            while (ls >> v) s.metadata.push_back(v);
            if (s.metadata.size() != kMetadataDim) throw bad("metadata must have 10 entries");
        } else if (tok == "label") {
            double v;
            if (!(ls >> v)) throw bad("malformed label line");
            s.label = v;
        } else if (tok == "nodefeat") {
            long long row;
            if (!(ls >> row) || row < 0 || row >= n_nodes) throw bad("nodefeat row out of range");
            for (int j = 0; j < s.node_feat_dim; ++j) {
                double v;
                if (!(ls >> v)) throw bad("nodefeat row too short");
                s.node_feats[static_cast<std::size_t>(row) * s.node_feat_dim + j] = v;
            }
            double extra;
            if (ls >> extra) throw bad("nodefeat row too long");
        } else if (tok == "edge") {
            long long i;
            int src, snk;
            std::string rel;
            if (!(ls >> i >> src >> snk >> rel) || i < 0 || i >= n_edges)
                throw bad("malformed edge line");
            auto r = relation_from_name(rel);
            if (!r) throw bad("unknown relation '" + rel + "'");
            s.edges[static_cast<std::size_t>(i)].src = src;
            s.edges[static_cast<std::size_t>(i)].snk = snk;
            s.edges[static_cast<std::size_t>(i)].rel = *r;
        } else if (tok == "edgefeat") {
            long long i;
            if (!(ls >> i) || i < 0 || i >= n_edges) throw bad("edgefeat index out of range");
            for (int j = 0; j < 4; ++j)
                if (!(ls >> s.edges[static_cast<std::size_t>(i)].feat[j]))
                    throw bad("edgefeat row too short");
        } else {
            throw bad("unknown record '" + tok + "'");
        }
    }
    if (!saw_header) throw ValidationError("empty document: missing 'sample v1' header");
    s.validate();
    return s;
}

GraphSample load_sample_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open sample file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_sample(ss.str());
}

void save_sample_file(const GraphSample& s, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write sample file: " + path);
    out << serialize_sample(s);
}

// ---------------------------------------------------------------------------
// Metadata sidecar

std::string serialize_meta(const MetaFile& m) {
    std::ostringstream out;
    out << "meta v1\n";
    out << "metadata";
    for (double v : m.metadata) out << ' ' << format_double(v);
    out << "\n";
    if (m.label_total) out << "label total " << format_double(*m.label_total) << "\n";
    if (m.label_dynamic) out << "label dynamic " << format_double(*m.label_dynamic) << "\n";
    return out.str();
}

MetaFile parse_meta(const std::string& text) {
    MetaFile m;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    bool saw_header = false, saw_meta = false;
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
            if (tok != "meta" || ver != "v1")
                throw ValidationError("line " + std::to_string(lineno) +
                                      ": expected header 'meta v1'");
            saw_header = true;
            continue;
        }
        if (tok == "metadata") {
            for (int i = 0; i < kMetadataDim; ++i)
                if (!(ls >> m.metadata[static_cast<std::size_t>(i)]))
                    throw ValidationError("line " + std::to_string(lineno) +
                                          ": metadata needs 10 values");
            saw_meta = true;
        } else if (tok == "label") {
            std::string kind;
            double v;
            if (!(ls >> kind >> v))
                throw ValidationError("line " + std::to_string(lineno) + ": malformed label");
            if (v <= 0)
                throw ValidationError("line " + std::to_string(lineno) + ": label must be > 0");
            if (kind == "total")
                m.label_total = v;
            else if (kind == "dynamic")
                m.label_dynamic = v;
            else
                throw ValidationError("line " + std::to_string(lineno) + ": unknown label kind '" +
                                      kind + "'");
        } else {
            throw ValidationError("line " + std::to_string(lineno) + ": unknown record '" + tok +
                                  "'");
        }
    }
    if (!saw_header) throw ValidationError("empty document: missing 'meta v1' header");
    if (!saw_meta) throw ValidationError("meta file missing metadata line");
    for (double v : m.metadata)
        if (v < 0) throw ValidationError("metadata entries must be >= 0");
    for (int i = 5; i < kMetadataDim; ++i)
        if (m.metadata[static_cast<std::size_t>(i)] <= 0)
            throw ValidationError("scaling factors must be > 0");
    return m;
}

MetaFile load_meta_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open meta file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_meta(ss.str());
}

void save_meta_file(const MetaFile& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write meta file: " + path);
    out << serialize_meta(m);
}

} // namespace powergear
