#include "powergear/hecgnn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "powergear/errors.hpp"

namespace powergear {

void HecGnnConfig::validate() const {
    if (num_layers < 1) throw ValidationError("config: num_layers must be >= 1");
    if (hidden_dim < 1 || metadata_embed_dim < 1 || head_hidden_dim < 1)
        throw ValidationError("config: dims must be >= 1");
    if (dropout < 0 || dropout >= 1) throw ValidationError("config: dropout must be in [0, 1)");
    if (batch_size < 1) throw ValidationError("config: batch_size must be >= 1");
    if (learning_rate <= 0) throw ValidationError("config: learning_rate must be > 0");
    if (epochs_total < 1 || epochs_dynamic < 1) throw ValidationError("config: epochs must be >= 1");
}

namespace {

// Flatten order: conv layers (w_node, w_edge, w_rel..., bias), metadata
// MLP, head. Shared with init, gradients and checkpoints.
template <typename MatFn, typename VecFn>
void for_each_block(const ModelParams& p, MatFn mat, VecFn vec) {
    for (std::size_t k = 0; k < p.layers.size(); ++k) {
        const auto& l = p.layers[k];
        std::string prefix = "conv" + std::to_string(k) + ".";
        mat(prefix + "w_node", l.w_node);
        mat(prefix + "w_edge", l.w_edge);
        for (std::size_t r = 0; r < l.w_rel.size(); ++r) {
            std::string name = prefix + "w_rel." +
                               (p.config.heterogeneous
                                    ? relation_name(static_cast<RelationType>(r))
                                    : std::string("shared"));
            mat(name, l.w_rel[r]);
        }
        if (p.config.use_bias) vec(prefix + "bias", l.bias);
    }
    if (p.config.use_metadata) {
        mat("meta.w", p.w_meta);
        if (p.config.use_bias) vec("meta.b", p.b_meta);
    }
    mat("head.w1", p.w_head1);
    if (p.config.use_bias) vec("head.b1", p.b_head1);
    mat("head.w2", p.w_head2);
    if (p.config.use_bias) vec("head.b2", p.b_head2);
}

} // namespace

std::size_t ModelParams::num_weights() const {
    std::size_t n = 0;
    for_each_block(*this, [&](const std::string&, const Mat& m) { n += m.a.size(); },
                   [&](const std::string&, const std::vector<double>& v) { n += v.size(); });
    return n;
}

std::vector<double> ModelParams::flatten() const {
    std::vector<double> flat;
    flat.reserve(num_weights());
    for_each_block(*this,
                   [&](const std::string&, const Mat& m) {
                       flat.insert(flat.end(), m.a.begin(), m.a.end());
                   },
                   [&](const std::string&, const std::vector<double>& v) {
                       flat.insert(flat.end(), v.begin(), v.end());
                   });
    return flat;
}

void ModelParams::unflatten(std::span<const double> flat) {
    if (flat.size() != num_weights()) throw ValidationError("unflatten: size mismatch");
    std::size_t pos = 0;
    auto take_mat = [&](const std::string&, const Mat& m) {
        auto& dst = const_cast<Mat&>(m).a;
        std::copy(flat.begin() + pos, flat.begin() + pos + dst.size(), dst.begin());
        pos += dst.size();
    };
    auto take_vec = [&](const std::string&, const std::vector<double>& v) {
        auto& dst = const_cast<std::vector<double>&>(v);
        std::copy(flat.begin() + pos, flat.begin() + pos + dst.size(), dst.begin());
        pos += dst.size();
    };
    for_each_block(*this, take_mat, take_vec);
}

ModelParams init_params(const HecGnnConfig& config, int node_feat_dim, std::uint64_t seed) {
    config.validate();
    if (node_feat_dim < 1) throw ValidationError("init_params: node_feat_dim must be >= 1");
    ModelParams p;
    p.config = config;
    p.node_feat_dim = node_feat_dim;
    const int d = config.hidden_dim;
    p.layers.resize(static_cast<std::size_t>(config.num_layers));
    for (int k = 0; k < config.num_layers; ++k) {
        auto& l = p.layers[static_cast<std::size_t>(k)];
        l.w_node = Mat(k == 0 ? node_feat_dim : d, d);
        l.w_edge = Mat(4, d);
        l.w_rel.assign(static_cast<std::size_t>(config.num_relation_params()), Mat(d, d));
        l.bias.assign(static_cast<std::size_t>(d), 0.0);
    }
    if (config.use_metadata) {
        p.w_meta = Mat(kMetadataDim, config.metadata_embed_dim);
        p.b_meta.assign(static_cast<std::size_t>(config.metadata_embed_dim), 0.0);
    }
    int head_in = d + (config.use_metadata ? config.metadata_embed_dim : 0);
    p.w_head1 = Mat(head_in, config.head_hidden_dim);
    p.b_head1.assign(static_cast<std::size_t>(config.head_hidden_dim), 0.0);
    p.w_head2 = Mat(config.head_hidden_dim, 1);
    p.b_head2.assign(1, 0.0);

    Rng rng(derive_seed(seed, "hecgnn-init"));
    for_each_block(p,
                   [&](const std::string&, const Mat& m) {
                       auto& mm = const_cast<Mat&>(m);
                       double bound = 1.0 / std::sqrt(static_cast<double>(mm.rows));
                       for (auto& w : mm.a) w = rand_uniform(rng, -bound, bound);
                   },
                   [&](const std::string&, const std::vector<double>&) {});
    return p;
}

// ---------------------------------------------------------------------------
// Batching

Batch make_batch(std::span<const GraphSample* const> samples, const HecGnnConfig& config,
                 const std::array<double, 5>& meta_norm) {
    if (samples.empty()) throw ValidationError("make_batch: empty sample list");
    Batch b;
    b.num_graphs = static_cast<int>(samples.size());
    b.node_feat_dim = samples[0]->node_feat_dim;
    bool all_labeled = true;
    int offset = 0;
    for (int gi = 0; gi < b.num_graphs; ++gi) {
        const GraphSample& s = *samples[static_cast<std::size_t>(gi)];
        if (s.node_feat_dim != b.node_feat_dim)
            throw ValidationError("make_batch: inconsistent node feature dims");
        b.node_feats.insert(b.node_feats.end(), s.node_feats.begin(), s.node_feats.end());
        for (int v = 0; v < s.num_nodes(); ++v) b.node_graph.push_back(gi);

        auto push_edge = [&](int src, int snk, RelationType rel, const EdgeFeatures& f) {
            auto r = static_cast<std::size_t>(rel);
            if (config.use_edge_features)
                b.edge_feats[r].insert(b.edge_feats[r].end(), f.begin(), f.end());
            else
                b.edge_feats[r].insert(b.edge_feats[r].end(), {1.0, 1.0, 1.0, 1.0});
            b.edge_snk[r].push_back(offset + snk);
            (void)src;
        };
        for (const auto& e : s.edges) {
            push_edge(e.src, e.snk, e.rel, e.feat);
            if (!config.directed) {
                // duplicated in reverse: same relation and features
                auto r = static_cast<std::size_t>(e.rel);
                if (config.use_edge_features)
                    b.edge_feats[r].insert(b.edge_feats[r].end(), e.feat.begin(), e.feat.end());
                else
                    b.edge_feats[r].insert(b.edge_feats[r].end(), {1.0, 1.0, 1.0, 1.0});
                b.edge_snk[r].push_back(offset + e.src);
            }
        }

        if (config.use_metadata) {
            if (s.metadata.size() != kMetadataDim)
                throw ValidationError("sample missing metadata (use_metadata=true)");
            for (int j = 0; j < kMetadataDim; ++j) {
                double v = s.metadata[static_cast<std::size_t>(j)];
                if (j < 5 && meta_norm[static_cast<std::size_t>(j)] != 0)
                    v /= meta_norm[static_cast<std::size_t>(j)];
                b.metadata.push_back(v);
            }
        }
        if (s.label)
            b.labels.push_back(*s.label);
        else
            all_labeled = false;
        offset += s.num_nodes();
    }
    if (!all_labeled) b.labels.clear();
    b.total_nodes = offset;
    return b;
}

// ---------------------------------------------------------------------------
// Forward

ForwardResult model_forward(Tape& tape, const Batch& batch, const ModelParams& params,
                            bool training, Rng* dropout_rng) {
    const auto& cfg = params.config;
    if (batch.node_feat_dim != params.node_feat_dim)
        throw ValidationError("model_forward: node feature dim mismatch");
    if (training && cfg.dropout > 0 && !dropout_rng)
        throw ValidationError("model_forward: training mode needs a dropout rng");

    ForwardResult fr;
    auto param_mat = [&](const Mat& m) {
        Tensor t = tape.leaf(m.rows, m.cols, m.a, true);
        fr.param_leaves.push_back(t);
        return t;
    };
    auto param_vec = [&](const std::vector<double>& v) {
        Tensor t = tape.leaf(1, static_cast<int>(v.size()), v, true);
        fr.param_leaves.push_back(t);
        return t;
    };

    Tensor h = tape.constant(batch.total_nodes, batch.node_feat_dim, batch.node_feats);
    Tensor pooled;
    for (int k = 0; k < cfg.num_layers; ++k) {
        const auto& layer = params.layers[static_cast<std::size_t>(k)];
        Tensor w_node = param_mat(layer.w_node);
        Tensor w_edge = param_mat(layer.w_edge);
        std::vector<Tensor> w_rel;
        for (const auto& m : layer.w_rel) w_rel.push_back(param_mat(m));
        Tensor bias;
        if (cfg.use_bias) bias = param_vec(layer.bias);

        Tensor z = tape.matmul(h, w_node);
        for (int r = 0; r < kNumRelations; ++r) {
            const auto& feats = batch.edge_feats[static_cast<std::size_t>(r)];
            if (feats.empty()) continue;
            int n_edges = static_cast<int>(feats.size() / 4);
            Tensor e = tape.constant(n_edges, 4, feats);
            Tensor w_r = w_rel[cfg.heterogeneous ? static_cast<std::size_t>(r) : 0];
            // W_r * W_E composed once per layer, applied to all edges
            Tensor t_r = tape.matmul(w_edge, w_r);
            Tensor msgs = tape.matmul(e, t_r);
            Tensor agg = tape.scatter_sum(msgs, batch.edge_snk[static_cast<std::size_t>(r)],
                                          batch.total_nodes);
            z = tape.add(z, agg);
        }
        if (cfg.use_bias) z = tape.add_bias(z, bias);
        h = tape.relu(z);
        if (training && cfg.dropout > 0) h = tape.dropout(h, cfg.dropout, *dropout_rng);
        Tensor g_k = tape.scatter_sum(h, batch.node_graph, batch.num_graphs);
        pooled = (k == 0) ? g_k : tape.add(pooled, g_k);
    }

    Tensor head_in = pooled;
    if (cfg.use_metadata) {
        Tensor w_meta = param_mat(params.w_meta);
        Tensor md = tape.constant(batch.num_graphs, kMetadataDim, batch.metadata);
        Tensor hm = tape.matmul(md, w_meta);
        if (cfg.use_bias) hm = tape.add_bias(hm, param_vec(params.b_meta));
        hm = tape.relu(hm);
        head_in = tape.concat_cols(pooled, hm);
    }
    Tensor w1 = param_mat(params.w_head1);
    Tensor hh = tape.matmul(head_in, w1);
    if (cfg.use_bias) hh = tape.add_bias(hh, param_vec(params.b_head1));
    hh = tape.relu(hh);
    if (training && cfg.dropout > 0) hh = tape.dropout(hh, cfg.dropout, *dropout_rng);
    Tensor w2 = param_mat(params.w_head2);
    Tensor out = tape.matmul(hh, w2);
    if (cfg.use_bias) out = tape.add_bias(out, param_vec(params.b_head2));
    fr.prediction = out;
    return fr;
}

void collect_gradients(const ForwardResult& fr, std::vector<double>& out) {
    for (const Tensor& t : fr.param_leaves)
        out.insert(out.end(), t.grad().begin(), t.grad().end());
}

std::vector<double> conv_layer(const std::vector<double>& h_prev, int d_in,
                               const GraphSample& sample, const ModelParams::ConvLayer& layer,
                               const HecGnnConfig& config) {
    int n = sample.num_nodes();
    if (static_cast<int>(h_prev.size()) != n * d_in)
        throw ValidationError("conv_layer: h_prev shape mismatch");
    Tape tape;
    Tensor h = tape.constant(n, d_in, h_prev);
    Tensor w_node = tape.constant(layer.w_node.rows, layer.w_node.cols, layer.w_node.a);
    Tensor z = tape.matmul(h, w_node);
    for (int r = 0; r < kNumRelations; ++r) {
        std::vector<double> feats;
        std::vector<int> snk;
        for (const auto& e : sample.edges) {
            if (static_cast<int>(e.rel) != r) continue;
            if (config.use_edge_features)
                feats.insert(feats.end(), e.feat.begin(), e.feat.end());
            else
                feats.insert(feats.end(), {1.0, 1.0, 1.0, 1.0});
            snk.push_back(e.snk);
        }
        if (feats.empty()) continue;
        const Mat& wr = layer.w_rel[config.heterogeneous
                                        ? static_cast<std::size_t>(r)
                                        : 0];
        Tensor e = tape.constant(static_cast<int>(snk.size()), 4, feats);
        Tensor t_r = tape.matmul(tape.constant(layer.w_edge.rows, layer.w_edge.cols, layer.w_edge.a),
                                 tape.constant(wr.rows, wr.cols, wr.a));
        Tensor agg = tape.scatter_sum(tape.matmul(e, t_r), snk, n);
        z = tape.add(z, agg);
    }
    if (config.use_bias)
        z = tape.add_bias(z, tape.constant(1, static_cast<int>(layer.bias.size()), layer.bias));
    return tape.relu(z).value();
}

std::vector<double> pool(std::span<const std::vector<double>> layer_embeddings, int dim) {
    if (layer_embeddings.empty()) throw ValidationError("pool: need at least one layer");
    std::vector<double> out(static_cast<std::size_t>(dim), 0.0);
    for (const auto& layer : layer_embeddings) {
        if (layer.size() % static_cast<std::size_t>(dim) != 0)
            throw ValidationError("pool: embedding size not a multiple of dim");
        for (std::size_t i = 0; i < layer.size(); ++i) out[i % static_cast<std::size_t>(dim)] += layer[i];
    }
    return out;
}

double predict(const GraphSample& sample, const ModelParams& params, Mode mode, Rng* dropout_rng) {
    const GraphSample* ptr = &sample;
    Batch b = make_batch(std::span<const GraphSample* const>(&ptr, 1), params.config,
                         params.meta_norm);
    Tape tape;
    ForwardResult fr = model_forward(tape, b, params, mode == Mode::Train, dropout_rng);
    return fr.prediction.scalar();
}

double ensemble_predict(const GraphSample& sample, std::span<const ModelParams> members) {
    if (members.empty()) throw ValidationError("ensemble_predict: empty ensemble");
    double sum = 0;
    for (const auto& m : members) sum += predict(sample, m, Mode::Eval);
    return sum / static_cast<double>(members.size());
}

// ---------------------------------------------------------------------------
// Checkpoints

std::string serialize_checkpoint(const ModelParams& p) {
    std::ostringstream out;
    const auto& c = p.config;
    out << "hecgnn-ckpt v1\n";
    out << "config num_layers=" << c.num_layers << " hidden_dim=" << c.hidden_dim
        << " dropout=" << format_double(c.dropout)
        << " use_edge_features=" << (c.use_edge_features ? 1 : 0)
        << " directed=" << (c.directed ? 1 : 0) << " heterogeneous=" << (c.heterogeneous ? 1 : 0)
        << " use_metadata=" << (c.use_metadata ? 1 : 0) << " use_bias=" << (c.use_bias ? 1 : 0)
        << " metadata_embed_dim=" << c.metadata_embed_dim
        << " head_hidden_dim=" << c.head_hidden_dim << " epochs_total=" << c.epochs_total
        << " epochs_dynamic=" << c.epochs_dynamic << " batch_size=" << c.batch_size
        << " learning_rate=" << format_double(c.learning_rate)
        << " node_feat_dim=" << p.node_feat_dim
        << " label_kind=" << label_kind_name(p.label_kind) << "\n";
    out << "provenance fold=" << p.fold << " seed=" << p.seed
        << " val_mape=" << format_double(p.val_mape) << "\n";
    out << "normalizer";
    for (double v : p.meta_norm) out << ' ' << format_double(v);
    out << "\n";
    auto emit_mat = [&](const std::string& name, const Mat& m) {
        out << "tensor " << name << ' ' << m.rows << ' ' << m.cols << "\n";
        for (int i = 0; i < m.rows; ++i) {
            for (int j = 0; j < m.cols; ++j) {
                if (j) out << ' ';
                out << format_double(m.a[static_cast<std::size_t>(i) * m.cols + j]);
            }
            out << "\n";
        }
    };
    auto emit_vec = [&](const std::string& name, const std::vector<double>& v) {
        out << "tensor " << name << " 1 " << v.size() << "\n";
        for (std::size_t j = 0; j < v.size(); ++j) {
            if (j) out << ' ';
            out << format_double(v[j]);
        }
        out << "\n";
    };
    for_each_block(p, emit_mat, emit_vec);
    out << "end\n";
    return out.str();
}

ModelParams parse_checkpoint(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || (line != "hecgnn-ckpt v1" && line != "hecgnn-ckpt v1\r"))
        throw ValidationError("checkpoint: bad header");

    HecGnnConfig c;
    int node_feat_dim = kNodeFeatDim;
    LabelKind kind = LabelKind::Total;
    if (!std::getline(in, line)) throw ValidationError("checkpoint: missing config line");
    {
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok != "config") throw ValidationError("checkpoint: missing config line");
        std::string attr;
        while (ls >> attr) {
            auto eq = attr.find('=');
            if (eq == std::string::npos)
                throw ValidationError("checkpoint: bad config attribute '" + attr + "'");
            std::string key = attr.substr(0, eq), val = attr.substr(eq + 1);
            try {
                if (key == "num_layers") c.num_layers = std::stoi(val);
                else if (key == "hidden_dim") c.hidden_dim = std::stoi(val);
                else if (key == "dropout") c.dropout = std::stod(val);
                else if (key == "use_edge_features") c.use_edge_features = std::stoi(val) != 0;
                else if (key == "directed") c.directed = std::stoi(val) != 0;
                else if (key == "heterogeneous") c.heterogeneous = std::stoi(val) != 0;
                else if (key == "use_metadata") c.use_metadata = std::stoi(val) != 0;
                else if (key == "use_bias") c.use_bias = std::stoi(val) != 0;
                else if (key == "metadata_embed_dim") c.metadata_embed_dim = std::stoi(val);
                else if (key == "head_hidden_dim") c.head_hidden_dim = std::stoi(val);
                else if (key == "epochs_total") c.epochs_total = std::stoi(val);
                else if (key == "epochs_dynamic") c.epochs_dynamic = std::stoi(val);
                else if (key == "batch_size") c.batch_size = std::stoi(val);
                else if (key == "learning_rate") c.learning_rate = std::stod(val);
                else if (key == "node_feat_dim") node_feat_dim = std::stoi(val);
                else if (key == "label_kind") {
                    if (val == "total") kind = LabelKind::Total;
                    else if (val == "dynamic") kind = LabelKind::Dynamic;
                    else throw ValidationError("checkpoint: unknown label kind '" + val + "'");
                } else
                    throw ValidationError("checkpoint: unknown config key '" + key + "'");
            } catch (const std::invalid_argument&) {
                throw ValidationError("checkpoint: bad value for '" + key + "'");
            }
        }
    }

    // Shape template in canonical order, then fill from tensor records.
    ModelParams p = init_params(c, node_feat_dim, 0);
    p.label_kind = kind;

    if (!std::getline(in, line)) throw ValidationError("checkpoint: missing provenance line");
    {
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok != "provenance") throw ValidationError("checkpoint: missing provenance line");
        std::string attr;
        while (ls >> attr) {
            auto eq = attr.find('=');
            std::string key = attr.substr(0, eq), val = attr.substr(eq + 1);
            if (key == "fold") p.fold = std::stoi(val);
            else if (key == "seed") p.seed = std::stoll(val);
            else if (key == "val_mape") p.val_mape = std::stod(val);
            else throw ValidationError("checkpoint: unknown provenance key '" + key + "'");
        }
    }
    if (!std::getline(in, line)) throw ValidationError("checkpoint: missing normalizer line");
    {
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok != "normalizer") throw ValidationError("checkpoint: missing normalizer line");
        for (auto& v : p.meta_norm)
            if (!(ls >> v)) throw ValidationError("checkpoint: normalizer needs 5 values");
    }

    std::vector<std::pair<std::string, std::pair<int, int>>> expected;
    for_each_block(p,
                   [&](const std::string& name, const Mat& m) {
                       expected.push_back({name, {m.rows, m.cols}});
                   },
                   [&](const std::string& name, const std::vector<double>& v) {
                       expected.push_back({name, {1, static_cast<int>(v.size())}});
                   });

    std::vector<double> flat;
    flat.reserve(p.num_weights());
    for (const auto& [name, shape] : expected) {
        if (!std::getline(in, line))
            throw ValidationError("checkpoint: missing tensor '" + name + "'");
        std::istringstream hs(line);
        std::string tok, got_name;
        int rows, cols;
        if (!(hs >> tok >> got_name >> rows >> cols) || tok != "tensor")
            throw ValidationError("checkpoint: expected tensor record for '" + name + "'");
        if (got_name != name || rows != shape.first || cols != shape.second)
            throw ValidationError("checkpoint: tensor '" + got_name +
                                  "' does not match expected '" + name + "' shape");
        for (int i = 0; i < rows; ++i) {
            if (!std::getline(in, line))
                throw ValidationError("checkpoint: truncated tensor '" + name + "'");
            std::istringstream vs(line);
            for (int j = 0; j < cols; ++j) {
                double v;
                if (!(vs >> v))
                    throw ValidationError("checkpoint: tensor '" + name + "' row too short");
                flat.push_back(v);
            }
        }
    }
    if (!std::getline(in, line) || line.rfind("end", 0) != 0)
        throw ValidationError("checkpoint: missing end marker");
    p.unflatten(flat);
    return p;
}

ModelParams load_checkpoint_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_checkpoint(ss.str());
}

void save_checkpoint_file(const ModelParams& p, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint: " + path);
    out << serialize_checkpoint(p);
}

} // namespace powergear
