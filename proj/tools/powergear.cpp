#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "powergear/dse.hpp"
#include "powergear/errors.hpp"
#include "powergear/hecgnn.hpp"
#include "powergear/interp.hpp"
#include "powergear/passes.hpp"
#include "powergear/sample.hpp"
#include "powergear/synthgen.hpp"
#include "powergear/training.hpp"
#include "powergear/version.hpp"

namespace fs = std::filesystem;
using namespace powergear;

namespace {

void print_diags(const Diagnostics& diags) {
    for (const auto& m : diags.messages) std::cerr << "[powergear] " << m << "\n";
}

LabelKind parse_kind(const std::string& s) {
    if (s == "total") return LabelKind::Total;
    if (s == "dynamic") return LabelKind::Dynamic;
    throw ValidationError("power kind must be total or dynamic, got '" + s + "'");
}

std::vector<ModelParams> load_ckpt_dir(const std::string& dir) {
    if (!fs::is_directory(dir)) throw IoError("checkpoint dir not found: " + dir);
    std::vector<std::string> files;
    for (const auto& f : fs::directory_iterator(dir))
        if (f.path().extension() == ".ckpt") files.push_back(f.path().string());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw ValidationError("no .ckpt files in " + dir);
    std::vector<ModelParams> members;
    for (const auto& f : files) members.push_back(load_checkpoint_file(f));
    return members;
}

GraphSample load_sample_with_meta(const std::string& sample_path) {
    GraphSample s = load_sample_file(sample_path);
    fs::path meta = fs::path(sample_path);
    meta.replace_extension(".meta");
    if (fs::exists(meta)) {
        MetaFile m = load_meta_file(meta.string());
        s.metadata.assign(m.metadata.begin(), m.metadata.end());
    }
    return s;
}

struct GlobalConfig {
    std::uint64_t seed = 0;
    int epochs = -1; // -1: per-kind default
    int hidden_dim = 128;
    int num_layers = 3;
    double dropout = 0.2;
    int batch_size = 128;
    double learning_rate = 5e-4;
    int folds = 10;
    int patience = 200;
    int threads = 0;
    bool no_edge_features = false;
    bool undirected = false;
    bool homogeneous = false;
    bool no_metadata = false;
    bool no_bias = false;

    HecGnnConfig model() const {
        HecGnnConfig c;
        c.hidden_dim = hidden_dim;
        c.num_layers = num_layers;
        c.dropout = dropout;
        c.batch_size = batch_size;
        c.learning_rate = learning_rate;
        if (epochs > 0) {
            c.epochs_total = epochs;
            c.epochs_dynamic = epochs;
        }
        c.use_edge_features = !no_edge_features;
        c.directed = !undirected;
        c.heterogeneous = !homogeneous;
        c.use_metadata = !no_metadata;
        c.use_bias = !no_bias;
        return c;
    }
    TrainOptions train_opts() const {
        TrainOptions o;
        o.folds = folds;
        o.patience = patience;
        o.threads = threads;
        return o;
    }
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"powergear: dataflow-graph power modeling and design-space exploration"};
    app.require_subcommand(0, 1);
    app.set_config("--config", "", "key=value configuration file");

    GlobalConfig cfg;
    app.add_option("--seed", cfg.seed, "global random seed")->envname("POWERGEAR_SEED");
    app.add_option("--epochs", cfg.epochs, "max training epochs (overrides per-kind default)")
        ->envname("POWERGEAR_EPOCHS");
    app.add_option("--hidden-dim", cfg.hidden_dim, "GNN hidden dimension")
        ->envname("POWERGEAR_HIDDEN_DIM");
    app.add_option("--layers", cfg.num_layers, "graph convolution layers")
        ->envname("POWERGEAR_LAYERS");
    app.add_option("--dropout", cfg.dropout, "dropout rate")->envname("POWERGEAR_DROPOUT");
    app.add_option("--batch-size", cfg.batch_size, "training batch size")
        ->envname("POWERGEAR_BATCH_SIZE");
    app.add_option("--lr", cfg.learning_rate, "learning rate")->envname("POWERGEAR_LR");
    app.add_option("--folds", cfg.folds, "cross-validation folds")->envname("POWERGEAR_FOLDS");
    app.add_option("--patience", cfg.patience, "early-stopping patience (epochs)")
        ->envname("POWERGEAR_PATIENCE");
    app.add_option("--threads", cfg.threads, "training worker threads (0 = hardware)")
        ->envname("POWERGEAR_THREADS");
    app.add_flag("--no-edge-features", cfg.no_edge_features, "ablation: constant-1 edge vectors");
    app.add_flag("--undirected", cfg.undirected, "ablation: duplicate every edge in reverse");
    app.add_flag("--homogeneous", cfg.homogeneous, "ablation: single shared relation matrix");
    app.add_flag("--no-metadata", cfg.no_metadata, "ablation: drop the metadata embedding");
    app.add_flag("--no-bias", cfg.no_bias, "exact-equation mode without affine biases");

    bool show_version = false;
    app.add_flag("--version", show_version, "print tool and schema versions");

    // construct
    auto* c_cmd = app.add_subcommand("construct", "build a graph sample from a dfg and a trace");
    c_cmd->fallthrough();
    std::string c_in, c_trace, c_out;
    c_cmd->add_option("--in", c_in, "input .dfg")->required();
    c_cmd->add_option("--trace", c_trace, "trace file keyed by the constructed graph")->required();
    c_cmd->add_option("--out", c_out, "output .sample")->required();

    // trace
    auto* t_cmd = app.add_subcommand("trace", "interpret a dfg and record value traces");
    t_cmd->fallthrough();
    std::string t_dfg, t_stim, t_out;
    long long t_iters = 16;
    t_cmd->add_option("--dfg", t_dfg, "input .dfg")->required();
    t_cmd->add_option("--stimuli", t_stim, "stimuli file for the constructed graph's entries")
        ->required();
    t_cmd->add_option("--iters", t_iters, "iterations to execute")->required();
    t_cmd->add_option("--out", t_out, "output trace file")->required();

    // synth
    auto* s_cmd = app.add_subcommand("synth", "generate a labeled synthetic corpus");
    s_cmd->fallthrough();
    int s_count = 64;
    std::string s_out;
    s_cmd->add_option("--count", s_count, "number of designs")->required();
    s_cmd->add_option("--out", s_out, "output dataset root")->required();

    // train
    auto* tr_cmd = app.add_subcommand("train", "train the ensemble on a dataset");
    tr_cmd->fallthrough();
    std::string tr_data, tr_target, tr_power = "total", tr_out;
    bool tr_single = false;
    tr_cmd->add_option("--data", tr_data, "dataset root")->required();
    tr_cmd->add_option("--target", tr_target, "left-out application group")->required();
    tr_cmd->add_option("--power", tr_power, "label kind: total|dynamic")->required();
    tr_cmd->add_option("--out", tr_out, "checkpoint output dir")->required();
    tr_cmd->add_flag("--single", tr_single, "20% holdout single-model mode");

    // predict
    auto* p_cmd = app.add_subcommand("predict", "predict power for one sample");
    p_cmd->fallthrough();
    std::string p_ckpt, p_sample;
    p_cmd->add_option("--ckpt-dir", p_ckpt, "checkpoint dir")->required();
    p_cmd->add_option("--sample", p_sample, "input .sample (sidecar .meta is picked up)")
        ->required();

    // eval
    auto* e_cmd = app.add_subcommand("eval", "evaluate an ensemble on a left-out group");
    e_cmd->fallthrough();
    std::string e_ckpt, e_data, e_target, e_out;
    e_cmd->add_option("--ckpt-dir", e_ckpt, "checkpoint dir")->required();
    e_cmd->add_option("--data", e_data, "dataset root")->required();
    e_cmd->add_option("--target", e_target, "test application group")->required();
    e_cmd->add_option("--out", e_out, "write the CSV here instead of stdout");

    // dse
    auto* d_cmd = app.add_subcommand("dse", "frontier-guided design space exploration");
    d_cmd->fallthrough();
    std::string d_space, d_ckpt, d_out = "results.csv";
    double d_init = 0.02, d_budget = 0.4;
    int d_batch = 8;
    d_cmd->add_option("--space", d_space, "design-space dataset root")->required();
    d_cmd->add_option("--ckpt-dir", d_ckpt, "power predictor checkpoints")->required();
    d_cmd->add_option("--init", d_init, "initial sampling budget fraction");
    d_cmd->add_option("--budget", d_budget, "total sampling budget fraction");
    d_cmd->add_option("--batch", d_batch, "points sampled per iteration");
    d_cmd->add_option("--out", d_out, "results CSV path (frontier.csv lands beside it)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) return app.exit(e);
        app.exit(e);
        return 2;
    }

    try {
        if (show_version) {
            std::cout << "powergear " << kToolVersion << "\n"
                      << "formats: dfg v" << kDfgSchemaVersion << ", trace v" << kTraceSchemaVersion
                      << ", stim v" << kStimuliSchemaVersion << ", sample v" << kSampleSchemaVersion
                      << ", meta v" << kMetaSchemaVersion << ", hecgnn-ckpt v"
                      << kCheckpointSchemaVersion << "\n";
            return 0;
        }
        if (app.get_subcommands().empty()) {
            std::cerr << app.help();
            return 2;
        }

        if (c_cmd->parsed()) {
            Dfg raw = load_dfg_file(c_in);
            Diagnostics diags;
            Dfg built = construct_graph(raw, &diags);
            print_diags(diags);
            TraceSet traces = load_trace_file(c_trace, &built);
            GraphSample sample = annotate_features(built, traces);
            save_sample_file(sample, c_out);
            std::cerr << "[powergear] construct: " << built.nodes.size() << " nodes, "
                      << built.edges.size() << " edges -> " << c_out << "\n";
        } else if (t_cmd->parsed()) {
            Dfg raw = load_dfg_file(t_dfg);
            Diagnostics diags;
            Dfg built = construct_graph(raw, &diags);
            print_diags(diags);
            Stimuli stim = load_stimuli_file(t_stim, built);
            TraceSet traces = interpret_dfg(built, stim, t_iters);
            save_trace_file(traces, t_out);
            std::cerr << "[powergear] trace: latency " << traces.latency << " -> " << t_out << "\n";
        } else if (s_cmd->parsed()) {
            CorpusOptions opts;
            opts.count = s_count;
            opts.seed = cfg.seed;
            opts.out_root = s_out;
            auto entries = emit_corpus(opts);
            std::cerr << "[powergear] synth: wrote " << entries.size() << " designs under " << s_out
                      << "\n";
        } else if (tr_cmd->parsed()) {
            LabelKind kind = parse_kind(tr_power);
            Dataset ds = load_dataset(tr_data, kind);
            auto [train, test] = split_leave_one_out(ds, tr_target);
            fs::create_directories(tr_out);
            HecGnnConfig model_cfg = cfg.model();
            TrainOptions opts = cfg.train_opts();
            if (tr_single) {
                auto [params, report] =
                    train_single(train, model_cfg, kind, static_cast<long long>(cfg.seed), opts);
                save_checkpoint_file(params,
                                     (fs::path(tr_out) / ("single_s" + std::to_string(cfg.seed) +
                                                          ".ckpt")).string());
                std::cerr << "[powergear] train(single): best val MAPE "
                          << format_double(report.best_val_mape) << " at epoch "
                          << report.best_epoch << "\n";
            } else {
                EnsembleResult res = train_ensemble(train, model_cfg, kind, opts);
                for (std::size_t i = 0; i < res.members.size(); ++i) {
                    const auto& m = res.members[i];
                    char name[64];
                    std::snprintf(name, sizeof(name), "member_s%lld_f%02d.ckpt", m.seed, m.fold);
                    save_checkpoint_file(m, (fs::path(tr_out) / name).string());
                }
                std::cerr << "[powergear] train: wrote " << res.members.size()
                          << " ensemble members to " << tr_out << "\n";
            }
        } else if (p_cmd->parsed()) {
            auto members = load_ckpt_dir(p_ckpt);
            GraphSample s = load_sample_with_meta(p_sample);
            double watts = ensemble_predict(s, members);
            std::cout << "power_watts=" << format_double(watts) << "\n";
        } else if (e_cmd->parsed()) {
            auto members = load_ckpt_dir(e_ckpt);
            Dataset ds = load_dataset(e_data, members.front().label_kind);
            auto [train, test] = split_leave_one_out(ds, e_target);
            (void)train;
            EvalReport report = evaluate(members, test);
            std::ostringstream csv;
            csv << "fold,seed,val_mape,test_mape\n";
            for (std::size_t i = 0; i < members.size(); ++i)
                csv << members[i].fold << ',' << members[i].seed << ','
                    << format_double(members[i].val_mape) << ','
                    << format_double(report.member_test_mape[i]) << "\n";
            if (e_out.empty()) {
                std::cout << csv.str();
            } else {
                std::ofstream f(e_out, std::ios::binary);
                if (!f) throw IoError("cannot write " + e_out);
                f << csv.str();
            }
            std::cout << "ensemble_test_mape=" << format_double(report.ensemble_test_mape) << "\n";
        } else if (d_cmd->parsed()) {
            auto members = load_ckpt_dir(d_ckpt);
            LabelKind kind = members.front().label_kind;
            Dataset ds = load_dataset(d_space, kind);
            std::vector<GraphSample> samples;
            for (const auto& g : ds.groups)
                samples.insert(samples.end(), g.samples.begin(), g.samples.end());
            std::vector<DesignPoint> space;
            for (std::size_t i = 0; i < samples.size(); ++i) {
                DesignPoint p;
                p.id = static_cast<int>(i);
                p.latency = samples[i].metadata.at(3);
                p.true_power = *samples[i].label;
                space.push_back(p);
            }
            auto exact = objectives_of(pareto_front(space, PowerField::TruePower),
                                       PowerField::TruePower);
            Predictor predictor = [&](const DesignPoint& p) {
                return ensemble_predict(samples[static_cast<std::size_t>(p.id)], members);
            };
            ExploreOptions opts;
            opts.init_budget = d_init;
            opts.total_budget = d_budget;
            opts.batch = d_batch;
            opts.seed = cfg.seed;
            ExploreResult result = explore(space, predictor, opts, &exact);

            std::ofstream f(d_out, std::ios::binary);
            if (!f) throw IoError("cannot write " + d_out);
            f << "iter,budget,adrs,frontier_size\n";
            for (const auto& it : result.trace)
                f << it.iter << ',' << format_double(it.budget_used) << ','
                  << format_double(it.adrs_value) << ',' << it.frontier_size << "\n";
            fs::path frontier_path = fs::path(d_out).parent_path() / "frontier.csv";
            std::ofstream ff(frontier_path, std::ios::binary);
            if (!ff) throw IoError("cannot write " + frontier_path.string());
            ff << "latency,power\n";
            for (const auto& p : result.sampled_frontier)
                ff << format_double(p.latency) << ',' << format_double(p.true_power) << "\n";
            std::cout << "final_adrs=" << format_double(result.trace.back().adrs_value) << "\n";
        }
        return 0;
    } catch (const IoError& e) {
        std::cerr << "error (io): " << e.what() << "\n";
        return 3;
    } catch (const ValidationError& e) {
        std::cerr << "error (validation): " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
