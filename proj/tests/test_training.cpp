#include <doctest.h>

#include <filesystem>
#include <map>

#include "powergear/synthgen.hpp"
#include "powergear/training.hpp"
#include "testutil.hpp"

using namespace powergear;
namespace fs = std::filesystem;

TEST_SUITE_BEGIN("training");

namespace {

// Tiny labeled samples: label is a linear function of edge activity so
// short trainings have signal.
std::vector<GraphSample> toy_samples(int n, Rng& rng) {
    std::vector<GraphSample> out;
    for (int i = 0; i < n; ++i) {
        GraphSample s;
        s.node_feat_dim = kNodeFeatDim;
        int nodes = 3 + static_cast<int>(rand_index(rng, 4));
        s.node_feats.assign(static_cast<std::size_t>(nodes) * kNodeFeatDim, 0.0);
        for (int v = 0; v < nodes; ++v) {
            s.node_feats[static_cast<std::size_t>(v) * kNodeFeatDim] = 1;
            s.node_feats[static_cast<std::size_t>(v) * kNodeFeatDim + kNumOpTypes] = 1;
        }
        double total = 0;
        for (int e = 0; e + 1 < nodes; ++e) {
            GraphSample::Edge edge;
            edge.src = e;
            edge.snk = e + 1;
            edge.rel = static_cast<RelationType>(rand_index(rng, 4));
            for (auto& f : edge.feat) f = rand_uniform(rng, 0, 1);
            total += edge.feat[0] + edge.feat[1];
            s.edges.push_back(edge);
        }
        s.metadata.assign(kMetadataDim, 1.0);
        s.label = 0.5 + total;
        s.label_kind = LabelKind::Total;
        s.uid = i;
        out.push_back(std::move(s));
    }
    return out;
}

HecGnnConfig fast_config() {
    HecGnnConfig c;
    c.num_layers = 1;
    c.hidden_dim = 4;
    c.metadata_embed_dim = 2;
    c.head_hidden_dim = 3;
    c.dropout = 0.0;
    c.batch_size = 8;
    c.learning_rate = 0.01;
    c.epochs_total = 30;
    c.epochs_dynamic = 30;
    return c;
}

} // namespace

TEST_CASE("mini_batch_iter: exact batching and full coverage") {
    Rng rng(1);
    auto one = mini_batch_iter(128, 128, rng);
    CHECK(one.size() == 1);
    CHECK(one[0].size() == 128);

    Rng rng2(1);
    auto two = mini_batch_iter(130, 128, rng2);
    REQUIRE(two.size() == 2);
    CHECK(two[0].size() == 128);
    CHECK(two[1].size() == 2);

    // multiset equality: every sample exactly once per epoch
    Rng rng3(9);
    auto batches = mini_batch_iter(57, 10, rng3);
    std::map<int, int> seen;
    for (const auto& b : batches)
        for (int i : b) ++seen[i];
    CHECK(seen.size() == 57);
    for (const auto& [i, count] : seen) CHECK(count == 1);
}

TEST_CASE("mape_of basics") {
    std::vector<double> same = {1, 2};
    CHECK(mape_of(same, same) == 0.0);
    std::vector<double> p1 = {1.1}, t1 = {1.0};
    CHECK(mape_of(p1, t1) == doctest::Approx(0.10));
    // hand-computed mean over 3 samples
    std::vector<double> preds = {1.0, 2.0, 4.5};
    std::vector<double> truths = {2.0, 2.0, 3.0};
    double byhand = (0.5 + 0.0 + 0.5) / 3.0;
    CHECK(mape_of(preds, truths) == doctest::Approx(byhand));
}

TEST_CASE("split_leave_one_out keeps groups disjoint and complete") {
    Rng rng(2);
    Dataset ds;
    ds.kind = LabelKind::Total;
    int uid = 0;
    for (const char* name : {"atax", "bicg", "gemm"}) {
        AppGroup g;
        g.name = name;
        auto samples = toy_samples(4, rng);
        for (auto& s : samples) s.uid = uid++;
        g.samples = samples;
        ds.groups.push_back(g);
    }
    auto [train, test] = split_leave_one_out(ds, "bicg");
    CHECK(train.size() == 8);
    CHECK(test.size() == 4);
    std::set<int> train_uids, test_uids;
    for (const auto& s : train) train_uids.insert(s.uid);
    for (const auto& s : test) test_uids.insert(s.uid);
    for (int u : test_uids) CHECK(train_uids.count(u) == 0);
    CHECK(train_uids.size() + test_uids.size() == 12);

    CHECK_THROWS_AS(split_leave_one_out(ds, "nosuch"), ValidationError);
}

TEST_CASE("train_ensemble: 3 seeds x 10 folds gives exactly 30 members with disjoint folds") {
    Rng rng(3);
    auto samples = toy_samples(24, rng);
    HecGnnConfig cfg = fast_config();
    cfg.epochs_total = 3;
    TrainOptions opts;
    opts.patience = 5;
    opts.threads = 2;
    EnsembleResult res = train_ensemble(samples, cfg, LabelKind::Total, opts);
    CHECK(res.members.size() == 30);

    std::map<long long, std::set<int>> val_by_seed;
    for (std::size_t i = 0; i < res.members.size(); ++i) {
        const auto& rep = res.reports[i];
        CHECK(res.members[i].fold == rep.fold);
        CHECK(res.members[i].seed == rep.seed);
        // validation fold disjoint from training folds
        for (int u : rep.val_uids) CHECK(rep.grad_uids.count(u) == 0);
        auto& seen = val_by_seed[rep.seed];
        for (int u : rep.val_uids) {
            CHECK(seen.count(u) == 0); // folds partition the data per seed
            seen.insert(u);
        }
    }
    for (auto& [seed, uids] : val_by_seed) CHECK(uids.size() == samples.size());
}

TEST_CASE("ensemble training is deterministic run to run") {
    Rng rng(4);
    auto samples = toy_samples(12, rng);
    HecGnnConfig cfg = fast_config();
    cfg.epochs_total = 4;
    TrainOptions opts;
    opts.folds = 3;
    opts.seeds = {0, 1};
    opts.threads = 2;
    EnsembleResult a = train_ensemble(samples, cfg, LabelKind::Total, opts);
    EnsembleResult b = train_ensemble(samples, cfg, LabelKind::Total, opts);
    REQUIRE(a.members.size() == b.members.size());
    for (std::size_t i = 0; i < a.members.size(); ++i) {
        CHECK(serialize_checkpoint(a.members[i]) == serialize_checkpoint(b.members[i]));
        CHECK(a.reports[i].val_mape == b.reports[i].val_mape);
    }
}

TEST_CASE("selected checkpoint's val MAPE never exceeds the final epoch's") {
    Rng rng(5);
    auto samples = toy_samples(16, rng);
    HecGnnConfig cfg = fast_config();
    cfg.epochs_total = 12;
    TrainOptions opts;
    opts.patience = 100;
    std::vector<int> train_idx, val_idx;
    for (int i = 0; i < 12; ++i) train_idx.push_back(i);
    for (int i = 12; i < 16; ++i) val_idx.push_back(i);
    auto [params, report] =
        train_member(samples, train_idx, val_idx, cfg, LabelKind::Total, 0, 0, opts);
    CHECK(report.best_val_mape <= report.val_mape.back());
    CHECK(params.val_mape == report.best_val_mape);
}

TEST_CASE("no test-set leakage: gradient and early-stop uids never include test uids") {
    Rng rng(6);
    auto samples = toy_samples(20, rng);
    std::vector<GraphSample> train(samples.begin(), samples.begin() + 15);
    std::vector<GraphSample> test(samples.begin() + 15, samples.end());
    HecGnnConfig cfg = fast_config();
    cfg.epochs_total = 3;
    TrainOptions opts;
    opts.folds = 3;
    opts.seeds = {0};
    EnsembleResult res = train_ensemble(train, cfg, LabelKind::Total, opts);
    std::set<int> test_uids;
    for (const auto& s : test) test_uids.insert(s.uid);
    for (const auto& rep : res.reports) {
        for (int u : rep.grad_uids) CHECK(test_uids.count(u) == 0);
        for (int u : rep.val_uids) CHECK(test_uids.count(u) == 0);
    }
    EvalReport ev = evaluate(res.members, test);
    CHECK(ev.ensemble_test_mape >= 0);
    CHECK(ev.member_test_mape.size() == res.members.size());
}

TEST_CASE("fewer samples than folds is an error") {
    Rng rng(7);
    auto samples = toy_samples(5, rng);
    TrainOptions opts; // 10 folds
    CHECK_THROWS_AS(train_ensemble(samples, fast_config(), LabelKind::Total, opts),
                    ValidationError);
}

TEST_CASE("dataset loading reads the directory layout and labels") {
    Rng rng(8);
    std::string root = testutil::tmp_dir("dataset");
    fs::remove_all(root);
    CorpusOptions opts;
    opts.count = 6;
    opts.seed = 99;
    opts.out_root = root;
    emit_corpus(opts);
    Dataset total = load_dataset(root, LabelKind::Total);
    Dataset dyn = load_dataset(root, LabelKind::Dynamic);
    CHECK(total.total_samples() == 6);
    CHECK(dyn.total_samples() == 6);
    for (const auto& g : dyn.groups)
        for (const auto& s : g.samples) {
            CHECK(s.label.has_value());
            CHECK(*s.label > 0);
            CHECK(s.metadata.size() == kMetadataDim);
        }
    fs::remove_all(root);
}

TEST_SUITE_END();
