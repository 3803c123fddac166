#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "powergear/hecgnn.hpp"
#include "testutil.hpp"

using namespace powergear;
using powergear::testutil::max_grad_rel_err;

TEST_SUITE_BEGIN("hecgnn");

namespace {

GraphSample random_sample(Rng& rng, int n_nodes, int n_edges, bool with_meta = true) {
    GraphSample s;
    s.node_feat_dim = kNodeFeatDim;
    s.node_feats.assign(static_cast<std::size_t>(n_nodes) * kNodeFeatDim, 0.0);
    for (int v = 0; v < n_nodes; ++v) {
        int t = static_cast<int>(rand_index(rng, kNumOpTypes));
        int o = static_cast<int>(rand_index(rng, kNumOpcodes));
        s.node_feats[static_cast<std::size_t>(v) * kNodeFeatDim + t] = 1;
        s.node_feats[static_cast<std::size_t>(v) * kNodeFeatDim + kNumOpTypes + o] = 1;
        for (int j = 0; j < 4; ++j)
            s.node_feats[static_cast<std::size_t>(v) * kNodeFeatDim + kNumOpTypes + kNumOpcodes + j] =
                rand_uniform(rng, 0, 2);
    }
    for (int e = 0; e < n_edges; ++e) {
        GraphSample::Edge edge;
        edge.src = static_cast<int>(rand_index(rng, static_cast<std::uint64_t>(n_nodes)));
        do {
            edge.snk = static_cast<int>(rand_index(rng, static_cast<std::uint64_t>(n_nodes)));
        } while (edge.snk == edge.src && n_nodes > 1);
        edge.rel = static_cast<RelationType>(rand_index(rng, kNumRelations));
        for (auto& f : edge.feat) f = rand_uniform(rng, 0, 1.5);
        s.edges.push_back(edge);
    }
    if (with_meta) {
        s.metadata.resize(kMetadataDim);
        for (auto& v : s.metadata) v = rand_uniform(rng, 0.1, 100);
    }
    s.label = rand_uniform(rng, 0.5, 3.0);
    return s;
}

GraphSample permuted(const GraphSample& s, const std::vector<int>& perm) {
    GraphSample p = s;
    int n = s.num_nodes();
    for (int v = 0; v < n; ++v)
        for (int j = 0; j < s.node_feat_dim; ++j)
            p.node_feats[static_cast<std::size_t>(perm[static_cast<std::size_t>(v)]) *
                             s.node_feat_dim + j] = s.node_feat(v, j);
    for (std::size_t e = 0; e < s.edges.size(); ++e) {
        p.edges[e].src = perm[static_cast<std::size_t>(s.edges[e].src)];
        p.edges[e].snk = perm[static_cast<std::size_t>(s.edges[e].snk)];
    }
    return p;
}

HecGnnConfig tiny_config(int d = 4) {
    HecGnnConfig c;
    c.num_layers = 2;
    c.hidden_dim = d;
    c.metadata_embed_dim = 3;
    c.head_hidden_dim = 3;
    c.dropout = 0.0;
    return c;
}

} // namespace

TEST_CASE("config defaults follow the published hyperparameters") {
    HecGnnConfig c;
    CHECK(c.num_layers == 3);
    CHECK(c.hidden_dim == 128);
    CHECK(c.dropout == 0.2);
    CHECK(c.batch_size == 128);
    CHECK(c.learning_rate == doctest::Approx(0.0005));
    CHECK(c.epochs_total == 1200);
    CHECK(c.epochs_dynamic == 2400);
    CHECK(c.metadata_embed_dim == 64);
    CHECK(c.head_hidden_dim == 64);
    CHECK(c.use_edge_features);
    CHECK(c.directed);
    CHECK(c.heterogeneous);
    CHECK(c.use_metadata);
}

TEST_CASE("conv layer with no edges and identity W_V is ReLU(h_prev)") {
    HecGnnConfig c = tiny_config(2);
    GraphSample s;
    s.node_feat_dim = 2;
    s.node_feats = {1, -1, 0.5, 2};

    ModelParams::ConvLayer layer;
    layer.w_node = Mat(2, 2);
    layer.w_node.a = {1, 0, 0, 1};
    layer.w_edge = Mat(4, 2);
    layer.w_rel.assign(4, Mat(2, 2));
    layer.bias.assign(2, 0.0);

    auto out = conv_layer(s.node_feats, 2, s, layer, c);
    CHECK(out == std::vector<double>{1, 0, 0.5, 2});
}

TEST_CASE("conv layer with all-zero weights is all-zero") {
    Rng rng(3);
    GraphSample s = random_sample(rng, 6, 10);
    HecGnnConfig c = tiny_config(3);
    ModelParams::ConvLayer layer;
    layer.w_node = Mat(kNodeFeatDim, 3);
    layer.w_edge = Mat(4, 3);
    layer.w_rel.assign(4, Mat(3, 3));
    layer.bias.assign(3, 0.0);
    auto out = conv_layer(s.node_feats, kNodeFeatDim, s, layer, c);
    for (double v : out) CHECK(v == 0.0);
}

TEST_CASE("hand-evaluated 2-node 1-edge layer") {
    // 1x1 weights: W_V = 1, W_E = [1 0 0 0]^T, W_r = 2, h = [1, 1],
    // e = [0.5, *, *, *]  ->  sink ReLU(1 + 2*0.5) = 2, source ReLU(1) = 1
    HecGnnConfig c = tiny_config(1);
    GraphSample s;
    s.node_feat_dim = 1;
    s.node_feats = {1, 1};
    GraphSample::Edge e;
    e.src = 0;
    e.snk = 1;
    e.rel = RelationType::AA;
    e.feat = {0.5, 0.25, 0.125, 0.0625};
    s.edges.push_back(e);

    ModelParams::ConvLayer layer;
    layer.w_node = Mat(1, 1);
    layer.w_node.a = {1};
    layer.w_edge = Mat(4, 1);
    layer.w_edge.a = {1, 0, 0, 0};
    layer.w_rel.assign(4, Mat(1, 1));
    for (auto& m : layer.w_rel) m.a = {2};
    layer.bias.assign(1, 0.0);

    auto out = conv_layer(s.node_feats, 1, s, layer, c);
    REQUIRE(out.size() == 2);
    CHECK(out[0] == doctest::Approx(1.0));
    CHECK(out[1] == doctest::Approx(2.0));
}

TEST_CASE("pool sums nodes and layers; empty graph gives zeros") {
    std::vector<std::vector<double>> one = {{1, 2, 3, 4}}; // 2 nodes x d=2
    CHECK(pool(one, 2) == std::vector<double>{4, 6});

    std::vector<std::vector<double>> two = {{1, 1}, {1, 1}}; // 2 layers, 2 nodes, d=1
    CHECK(pool(two, 1) == std::vector<double>{4});

    std::vector<std::vector<double>> empty_layers = {{}, {}};
    CHECK(pool(empty_layers, 3) == std::vector<double>{0, 0, 0});
}

TEST_CASE("init_params: deterministic, seed-sensitive, within bounds") {
    HecGnnConfig c = tiny_config();
    ModelParams a = init_params(c, kNodeFeatDim, 7);
    ModelParams b = init_params(c, kNodeFeatDim, 7);
    ModelParams d = init_params(c, kNodeFeatDim, 8);
    CHECK(a == b);
    CHECK(a != d);
    CHECK(a.flatten().size() == a.num_weights());

    auto check_mat = [](const Mat& m) {
        double bound = 1.0 / std::sqrt(static_cast<double>(m.rows));
        for (double w : m.a) {
            CHECK(w >= -bound);
            CHECK(w <= bound);
        }
    };
    for (const auto& l : a.layers) {
        check_mat(l.w_node);
        check_mat(l.w_edge);
        for (const auto& m : l.w_rel) check_mat(m);
        for (double bias : l.bias) CHECK(bias == 0.0);
    }
    check_mat(a.w_head1);
    check_mat(a.w_head2);
}

TEST_CASE("all-zero params predict the final bias") {
    Rng rng(5);
    GraphSample s = random_sample(rng, 5, 8);
    HecGnnConfig c = tiny_config();
    ModelParams p = init_params(c, kNodeFeatDim, 0);
    std::vector<double> flat(p.num_weights(), 0.0);
    p.unflatten(flat);
    p.b_head2[0] = 0.7;
    CHECK(predict(s, p) == doctest::Approx(0.7));
}

TEST_CASE("permutation invariance of predict") {
    Rng rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        GraphSample s = random_sample(rng, 8, 14);
        HecGnnConfig c = tiny_config();
        ModelParams p = init_params(c, kNodeFeatDim, 100 + trial);
        std::vector<int> perm(8);
        for (int i = 0; i < 8; ++i) perm[static_cast<std::size_t>(i)] = i;
        shuffle_vec(perm, rng);
        GraphSample sp = permuted(s, perm);
        CHECK(std::abs(predict(s, p) - predict(sp, p)) < 1e-9);
    }
}

TEST_CASE("undirected mode equals directed mode on a pre-symmetrized edge list") {
    Rng rng(13);
    GraphSample s = random_sample(rng, 6, 9);
    GraphSample sym = s;
    for (const auto& e : s.edges) {
        GraphSample::Edge rev = e;
        std::swap(rev.src, rev.snk);
        sym.edges.push_back(rev);
    }
    HecGnnConfig undirected = tiny_config();
    undirected.directed = false;
    HecGnnConfig directed = tiny_config();
    ModelParams p = init_params(undirected, kNodeFeatDim, 3);
    ModelParams pd = p;
    pd.config = directed;
    CHECK(predict(s, p) == doctest::Approx(predict(sym, pd)).epsilon(1e-12));
}

TEST_CASE("swapping an edge's relation changes the message by (W_r1 - W_r2) W_E e") {
    // positive weights keep the layer in the linear region of ReLU
    HecGnnConfig c = tiny_config(2);
    c.num_layers = 1;
    GraphSample s;
    s.node_feat_dim = 1;
    s.node_feats = {0.5, 0.5};
    GraphSample::Edge e;
    e.src = 0;
    e.snk = 1;
    e.rel = RelationType::AA;
    e.feat = {0.3, 0.4, 0.5, 0.6};
    s.edges.push_back(e);

    ModelParams::ConvLayer layer;
    layer.w_node = Mat(1, 2);
    layer.w_node.a = {0.5, 0.5};
    layer.w_edge = Mat(4, 2);
    for (auto& w : layer.w_edge.a) w = 0.25;
    layer.w_rel.assign(4, Mat(2, 2));
    for (int r = 0; r < 4; ++r)
        for (auto& w : layer.w_rel[static_cast<std::size_t>(r)].a) w = 0.1 * (r + 1);
    layer.bias.assign(2, 0.0);

    auto out_aa = conv_layer(s.node_feats, 1, s, layer, c);
    s.edges[0].rel = RelationType::NA;
    auto out_na = conv_layer(s.node_feats, 1, s, layer, c);

    // e * W_E = [0.45, 0.45]; W_NA - W_AA = 0.2 entrywise, two summands per column
    double expected_delta = 0.45 * 0.2 * 2;
    CHECK(out_na[2] - out_aa[2] == doctest::Approx(expected_delta));
    CHECK(out_na[3] - out_aa[3] == doctest::Approx(expected_delta));
    CHECK(out_na[0] == out_aa[0]); // source row untouched
}

TEST_CASE("duplicating an edge adds exactly its aggregated contribution") {
    HecGnnConfig c = tiny_config(2);
    c.num_layers = 1;
    c.use_bias = false;
    Rng rng(17);
    GraphSample s = random_sample(rng, 4, 5);
    ModelParams p = init_params(c, kNodeFeatDim, 9);
    // positive-only weights keep pre-ReLU sums positive where they matter
    std::vector<double> flat = p.flatten();
    for (auto& w : flat) w = std::abs(w);
    p.unflatten(flat);

    auto layer_out = [&](const GraphSample& sample) {
        return conv_layer(sample.node_feats, kNodeFeatDim, sample, p.layers[0], c);
    };
    auto base = layer_out(s);
    GraphSample dup = s;
    dup.edges.push_back(s.edges[0]);
    auto doubled = layer_out(dup);

    // contribution of edge 0 alone
    GraphSample only = s;
    only.edges = {s.edges[0]};
    ModelParams zero_node = p;
    for (auto& v : zero_node.layers[0].w_node.a) v = 0;
    auto contrib = conv_layer(only.node_feats, kNodeFeatDim, only, zero_node.layers[0], c);

    int snk = s.edges[0].snk;
    for (int j = 0; j < 2; ++j) {
        double lhs = doubled[static_cast<std::size_t>(snk * 2 + j)];
        double rhs = base[static_cast<std::size_t>(snk * 2 + j)] +
                     contrib[static_cast<std::size_t>(snk * 2 + j)];
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
}

TEST_CASE("ensemble_predict averages member outputs") {
    Rng rng(19);
    GraphSample s = random_sample(rng, 4, 4);
    HecGnnConfig c = tiny_config();
    ModelParams a = init_params(c, kNodeFeatDim, 0);
    std::vector<double> zeros(a.num_weights(), 0.0);
    a.unflatten(zeros);
    ModelParams b = a;
    a.b_head2[0] = 1.0;
    b.b_head2[0] = 3.0;
    std::vector<ModelParams> members = {a, b};
    CHECK(ensemble_predict(s, members) == doctest::Approx(2.0));

    std::vector<ModelParams> one = {a};
    CHECK(ensemble_predict(s, one) == doctest::Approx(predict(s, a)));

    CHECK_THROWS_AS(ensemble_predict(s, std::span<const ModelParams>{}), ValidationError);
}

TEST_CASE("ensemble_predict equals an externally computed mean over 30 members") {
    Rng rng(23);
    GraphSample s = random_sample(rng, 5, 6);
    HecGnnConfig c = tiny_config();
    std::vector<ModelParams> members;
    for (int i = 0; i < 30; ++i) members.push_back(init_params(c, kNodeFeatDim, 1000 + i));
    double mean = 0;
    for (const auto& m : members) mean += predict(s, m);
    mean /= 30.0;
    CHECK(ensemble_predict(s, members) == doctest::Approx(mean).epsilon(1e-15));
}

TEST_CASE("missing metadata with use_metadata=true is an error") {
    Rng rng(29);
    GraphSample s = random_sample(rng, 4, 4, /*with_meta=*/false);
    HecGnnConfig c = tiny_config();
    ModelParams p = init_params(c, kNodeFeatDim, 1);
    CHECK_THROWS_AS(predict(s, p), ValidationError);
    c.use_metadata = false;
    ModelParams q = init_params(c, kNodeFeatDim, 1);
    CHECK_NOTHROW(predict(s, q));
}

TEST_CASE("checkpoint round-trips bit-for-bit") {
    Rng rng(31);
    GraphSample s = random_sample(rng, 6, 8);
    HecGnnConfig c = tiny_config();
    c.heterogeneous = false; // exercise the shared-relation naming too
    ModelParams p = init_params(c, kNodeFeatDim, 77);
    p.fold = 3;
    p.seed = 2;
    p.val_mape = 0.0321;
    p.meta_norm = {10, 20, 30, 40, 50};
    p.label_kind = LabelKind::Dynamic;

    std::string text = serialize_checkpoint(p);
    ModelParams back = parse_checkpoint(text);
    CHECK(back == p);
    CHECK(serialize_checkpoint(back) == text);
    double before = predict(s, p);
    double after = predict(s, back);
    CHECK(before == after); // bit-for-bit eval reproduction
}

TEST_CASE("end-to-end gradient of mape(predict) matches finite differences") {
    Rng rng(37);
    GraphSample s = random_sample(rng, 5, 7);
    HecGnnConfig c = tiny_config(3);
    ModelParams p = init_params(c, kNodeFeatDim, 55);
    std::vector<double> flat = p.flatten();

    auto loss_at = [&](const std::vector<double>& w) {
        ModelParams q = p;
        q.unflatten(w);
        const GraphSample* ptr = &s;
        Batch b = make_batch(std::span<const GraphSample* const>(&ptr, 1), q.config, q.meta_norm);
        Tape tape;
        ForwardResult fr = model_forward(tape, b, q, false, nullptr);
        Tensor truth = tape.constant(1, 1, {*s.label});
        return tape.mape_loss(fr.prediction, truth).scalar();
    };

    ModelParams q = p;
    const GraphSample* ptr = &s;
    Batch b = make_batch(std::span<const GraphSample* const>(&ptr, 1), q.config, q.meta_norm);
    Tape tape;
    ForwardResult fr = model_forward(tape, b, q, false, nullptr);
    Tensor truth = tape.constant(1, 1, {*s.label});
    Tensor loss = tape.mape_loss(fr.prediction, truth);
    tape.backward(loss);
    std::vector<double> analytic;
    collect_gradients(fr, analytic);
    REQUIRE(analytic.size() == flat.size());
    CHECK(max_grad_rel_err(loss_at, flat, analytic) < 1e-4);
}

TEST_CASE("eval-mode predict is deterministic") {
    Rng rng(41);
    GraphSample s = random_sample(rng, 6, 9);
    HecGnnConfig c = tiny_config();
    ModelParams p = init_params(c, kNodeFeatDim, 4);
    CHECK(predict(s, p) == predict(s, p));
}

TEST_SUITE_END();
