#ifndef POWERGEAR_HECGNN_HPP
#define POWERGEAR_HECGNN_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "powergear/sample.hpp"
#include "powergear/tensor.hpp"

namespace powergear {

struct HecGnnConfig {
    int num_layers = 3;
    int hidden_dim = 128;
    double dropout = 0.2;
    bool use_edge_features = true;
    bool directed = true;
    bool heterogeneous = true;
    bool use_metadata = true;
    bool use_bias = true; // Eq.-exact mode turns the affine biases off
    int metadata_embed_dim = 64;
    int head_hidden_dim = 64;
    int epochs_total = 1200;
    int epochs_dynamic = 2400;
    int batch_size = 128;
    double learning_rate = 5e-4;

    int epochs_for(LabelKind k) const {
        return k == LabelKind::Total ? epochs_total : epochs_dynamic;
    }
    int num_relation_params() const { return heterogeneous ? kNumRelations : 1; }
    void validate() const;

    bool operator==(const HecGnnConfig&) const = default;
};

struct Mat {
    int rows = 0, cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}
    bool operator==(const Mat&) const = default;
};

/// All learnable weights. Matrices are stored input-major ([in x out]), so
/// a forward step is a plain row-matrix product.
struct ModelParams {
    HecGnnConfig config;
    int node_feat_dim = kNodeFeatDim;
    LabelKind label_kind = LabelKind::Total;

    struct ConvLayer {
        Mat w_node;              // [d_in x d]
        Mat w_edge;              // [4 x d]
        std::vector<Mat> w_rel;  // per relation [d x d]; single shared when not heterogeneous
        std::vector<double> bias;

        bool operator==(const ConvLayer&) const = default;
    };
    std::vector<ConvLayer> layers;
    Mat w_meta;                  // [10 x md]
    std::vector<double> b_meta;
    Mat w_head1;                 // [(d [+ md]) x hh]
    std::vector<double> b_head1;
    Mat w_head2;                 // [hh x 1]
    std::vector<double> b_head2;

    // Training-set maxima dividing the 5 absolute metadata metrics.
    std::array<double, 5> meta_norm{1, 1, 1, 1, 1};

    // Ensemble provenance.
    int fold = -1;
    long long seed = 0;
    double val_mape = -1;

    std::size_t num_weights() const;
    std::vector<double> flatten() const;
    void unflatten(std::span<const double> flat);

    bool operator==(const ModelParams&) const = default;
};

/// Uniform [-1/sqrt(fan_in), +1/sqrt(fan_in)] weights, zero biases,
/// deterministic per seed.
ModelParams init_params(const HecGnnConfig& config, int node_feat_dim, std::uint64_t seed);

/// Disjoint-union batch of graph samples ready for the tape.
struct Batch {
    int num_graphs = 0;
    int total_nodes = 0;
    int node_feat_dim = 0;
    std::vector<double> node_feats;                      // [sumV x d_in]
    std::array<std::vector<double>, kNumRelations> edge_feats; // per relation [E_r x 4]
    std::array<std::vector<int>, kNumRelations> edge_snk;      // batch node row per edge
    std::vector<int> node_graph;                         // batch node row -> graph index
    std::vector<double> metadata;                        // [B x 10], normalized
    std::vector<double> labels;                          // [B] when all samples carry labels
};

Batch make_batch(std::span<const GraphSample* const> samples, const HecGnnConfig& config,
                 const std::array<double, 5>& meta_norm);

struct ForwardResult {
    Tensor prediction;                // [B x 1]
    std::vector<Tensor> param_leaves; // flatten() order
};

/// K conv layers (Eq.-style edge-centric aggregation), cross-layer sum
/// pooling, metadata MLP, prediction head. Dropout only when training.
ForwardResult model_forward(Tape& tape, const Batch& batch, const ModelParams& params,
                            bool training, Rng* dropout_rng);

/// Appends d(loss)/d(param) for every leaf, in flatten() order.
void collect_gradients(const ForwardResult& fr, std::vector<double>& out);

enum class Mode { Train, Eval };

/// One eval-mode convolution layer on a single sample: ReLU(W_V h_prev +
/// sum_r sum_edges W_r W_E e). Returns the [V x d] embedding matrix.
std::vector<double> conv_layer(const std::vector<double>& h_prev, int d_in,
                               const GraphSample& sample, const ModelParams::ConvLayer& layer,
                               const HecGnnConfig& config);

/// Cross-layer sum pooling: sums every node embedding of every layer.
std::vector<double> pool(std::span<const std::vector<double>> layer_embeddings, int dim);

double predict(const GraphSample& sample, const ModelParams& params, Mode mode = Mode::Eval,
               Rng* dropout_rng = nullptr);

double ensemble_predict(const GraphSample& sample, std::span<const ModelParams> members);

/// Checkpoint v1: header, config echo, provenance, normalizer, then named
/// tensors with shapes and lossless-decimal row-major values.
std::string serialize_checkpoint(const ModelParams& p);
ModelParams parse_checkpoint(const std::string& text);
ModelParams load_checkpoint_file(const std::string& path);
void save_checkpoint_file(const ModelParams& p, const std::string& path);

} // namespace powergear

#endif
