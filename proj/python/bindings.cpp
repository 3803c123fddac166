#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "powergear/dse.hpp"
#include "powergear/hecgnn.hpp"
#include "powergear/interp.hpp"
#include "powergear/passes.hpp"
#include "powergear/sample.hpp"
#include "powergear/synthgen.hpp"
#include "powergear/trace.hpp"
#include "powergear/training.hpp"
#include "powergear/version.hpp"

namespace py = pybind11;
using namespace powergear;

namespace {

// Text-level pipeline helpers keep the binding surface small: python sees
// the same documents the CLI reads and writes.
std::string py_construct(const std::string& dfg_text, const std::string& trace_text) {
    Dfg built = construct_graph(parse_dfg(dfg_text), nullptr);
    TraceSet traces = parse_traces(trace_text, &built);
    return serialize_sample(annotate_features(built, traces));
}

std::string py_trace(const std::string& dfg_text, const std::string& stimuli_text,
                     long long iterations) {
    Dfg built = construct_graph(parse_dfg(dfg_text), nullptr);
    Stimuli stim = parse_stimuli(stimuli_text, built);
    return serialize_traces(interpret_dfg(built, stim, iterations));
}

GraphSample sample_from_text(const std::string& text) { return parse_sample(text); }

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "powergear core bindings";
    m.attr("__version__") = kToolVersion;

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_IOError);

    // dfg round trip
    m.def("normalize_dfg", [](const std::string& text) { return serialize_dfg(parse_dfg(text)); },
          py::arg("text"), "parse + canonical serialize");
    m.def("dfg_stats", [](const std::string& text) {
        Dfg g = parse_dfg(text);
        return py::make_tuple(g.nodes.size(), g.edges.size(), g.latency);
    });

    // construction pipeline
    m.def("construct_dfg", [](const std::string& text) {
        return serialize_dfg(construct_graph(parse_dfg(text), nullptr));
    });
    m.def("construct_sample", &py_construct, py::arg("dfg_text"), py::arg("trace_text"));
    m.def("trace_dfg", &py_trace, py::arg("dfg_text"), py::arg("stimuli_text"),
          py::arg("iterations"));

    // activity primitives
    m.def("hamming_hex", [](const std::string& a, const std::string& b, int width) {
        return hamming(BitVec::from_hex(width, a), BitVec::from_hex(width, b));
    });
    m.def("switching_activity",
          [](const std::vector<std::pair<long long, std::string>>& events, int width,
             long long latency) {
              ValueTrace t;
              t.bitwidth = width;
              for (const auto& [cycle, hex] : events)
                  t.stream(Dir::Src).push_back(TraceEvent{cycle, BitVec::from_hex(width, hex)});
              t.validate();
              return switching_activity(t, Dir::Src, latency);
          },
          py::arg("events"), py::arg("width"), py::arg("latency"));
    m.def("activation_rate",
          [](const std::vector<std::pair<long long, std::string>>& events, int width,
             long long latency) {
              ValueTrace t;
              t.bitwidth = width;
              for (const auto& [cycle, hex] : events)
                  t.stream(Dir::Src).push_back(TraceEvent{cycle, BitVec::from_hex(width, hex)});
              t.validate();
              return activation_rate(t, Dir::Src, latency);
          },
          py::arg("events"), py::arg("width"), py::arg("latency"));

    // synthetic corpus + oracle
    py::class_<CorpusEntry>(m, "CorpusEntry")
        .def_readonly("app", &CorpusEntry::app)
        .def_readonly("stem", &CorpusEntry::stem)
        .def_readonly("dynamic_watts", &CorpusEntry::dynamic_watts)
        .def_readonly("total_watts", &CorpusEntry::total_watts);
    m.def("emit_corpus", [](int count, std::uint64_t seed, const std::string& out_root) {
        CorpusOptions opts;
        opts.count = count;
        opts.seed = seed;
        opts.out_root = out_root;
        return emit_corpus(opts);
    });
    m.def("oracle_power_text", [](const std::string& sample_text) {
        return oracle_power(parse_sample(sample_text), kOracleCapacitance, kOracleVoltage,
                            kOracleFrequency);
    });

    // model
    m.def("predict_file",
          [](const std::string& ckpt_path, const std::string& sample_text,
             const std::string& meta_text) {
              ModelParams p = load_checkpoint_file(ckpt_path);
              GraphSample s = sample_from_text(sample_text);
              if (!meta_text.empty()) {
                  MetaFile mf = parse_meta(meta_text);
                  s.metadata.assign(mf.metadata.begin(), mf.metadata.end());
              }
              return predict(s, p);
          },
          py::arg("ckpt_path"), py::arg("sample_text"), py::arg("meta_text") = std::string());
    m.def("train_single_dir",
          [](const std::string& data_root, const std::string& kind, long long seed, int epochs,
             int hidden_dim, const std::string& ckpt_out) {
              LabelKind k = kind == "total" ? LabelKind::Total : LabelKind::Dynamic;
              Dataset ds = load_dataset(data_root, k);
              std::vector<GraphSample> samples;
              for (const auto& g : ds.groups)
                  samples.insert(samples.end(), g.samples.begin(), g.samples.end());
              HecGnnConfig cfg;
              cfg.hidden_dim = hidden_dim;
              cfg.epochs_total = cfg.epochs_dynamic = epochs;
              TrainOptions opts;
              auto [params, report] = train_single(samples, cfg, k, seed, opts);
              if (!ckpt_out.empty()) save_checkpoint_file(params, ckpt_out);
              return report.best_val_mape;
          },
          py::arg("data_root"), py::arg("kind"), py::arg("seed"), py::arg("epochs"),
          py::arg("hidden_dim"), py::arg("ckpt_out") = std::string());

    // dse
    m.def("pareto_front",
          [](const std::vector<std::pair<double, double>>& pts) {
              std::vector<DesignPoint> space;
              for (std::size_t i = 0; i < pts.size(); ++i)
                  space.push_back(DesignPoint{static_cast<int>(i), pts[i].first, pts[i].second,
                                              0.0, false});
              std::vector<std::pair<double, double>> out;
              for (const auto& p : pareto_front(space, PowerField::TruePower))
                  out.push_back({p.latency, p.true_power});
              return out;
          },
          py::arg("points"));
    m.def("adrs",
          [](const std::vector<std::pair<double, double>>& exact,
             const std::vector<std::pair<double, double>>& approx) {
              std::vector<Objective> g, w;
              for (auto& p : exact) g.push_back({p.first, p.second});
              for (auto& p : approx) w.push_back({p.first, p.second});
              return adrs(g, w);
          },
          py::arg("exact"), py::arg("approx"));
}
