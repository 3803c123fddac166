#include "powergear/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "powergear/errors.hpp"
#include "powergear/passes.hpp"
#include "powergear/seeding.hpp"

namespace fs = std::filesystem;

namespace powergear {

namespace {

constexpr std::array<Opcode, 8> kArithPool = {Opcode::Add,  Opcode::Sub,  Opcode::Mul,
                                              Opcode::Div,  Opcode::FAdd, Opcode::FSub,
                                              Opcode::FMul, Opcode::FDiv};
constexpr std::array<int, 3> kWidthPool = {8, 16, 32};

struct Builder {
    Dfg g;
    int next_id = 0;
    int var_counter = 0;

    int add_node(Opcode op, int width, std::optional<long long> mem = std::nullopt,
                 std::optional<std::string> share = std::nullopt) {
        DfgNode n;
        n.id = next_id++;
        n.opcode = op;
        n.op_type = op_type_of(op);
        n.bitwidth = width;
        n.mem_words = mem;
        n.share_key = std::move(share);
        g.nodes.push_back(std::move(n));
        return g.nodes.back().id;
    }
    void connect(int src, int snk, int width) {
        g.edges.push_back(DfgEdge{src, snk, "v" + std::to_string(var_counter++), width, false});
    }
};

struct ResourceEstimate {
    double lut = 0, dsp = 0, bram = 0;
};

ResourceEstimate estimate_resources(const Dfg& g) {
    ResourceEstimate r;
    for (const auto& n : g.nodes) {
        double w = n.bitwidth;
        switch (n.opcode) {
        case Opcode::Add: case Opcode::Sub: case Opcode::FAdd: case Opcode::FSub:
            r.lut += 1.0 * w;
            break;
        case Opcode::Mul: case Opcode::FMul:
            r.lut += 2.0 * w;
            r.dsp += std::ceil(w / 16.0);
            break;
        case Opcode::Div: case Opcode::FDiv:
            r.lut += 6.0 * w;
            r.dsp += std::ceil(w / 8.0);
            break;
        case Opcode::ICmp: case Opcode::FCmp:
            r.lut += 0.5 * w;
            break;
        case Opcode::Alloca: case Opcode::GetElementPtr: case Opcode::Load: case Opcode::Store:
            r.lut += 0.5 * w;
            break;
        case Opcode::Buffer:
            r.lut += 0.3 * w;
            r.bram += std::ceil(static_cast<double>(n.mem_words.value_or(0)) * w / 18432.0);
            break;
        case Opcode::Trunc: case Opcode::SExt: case Opcode::ZExt: case Opcode::BitCast:
            r.lut += 0.1 * w;
            break;
        case Opcode::Phi: case Opcode::Select: case Opcode::Br: case Opcode::Ret:
            r.lut += 0.4 * w;
            break;
        }
    }
    return r;
}

// Core graph builder shared by the design and its unoptimized baseline.
// Stimulus toggle intensity is drawn later; here only structure.
Dfg build_structure(const DesignSpec& spec, Rng& rng, std::vector<int>& entry_allocas) {
    Builder b;
    b.g.latency = 1; // filled after construction

    std::vector<int> lane_outs;
    for (int lane = 0; lane < spec.unroll; ++lane) {
        long long words =
            spec.buffer_words.empty()
                ? 64
                : spec.buffer_words[static_cast<std::size_t>(lane) % spec.buffer_words.size()];
        int in_w = kWidthPool[rand_index(rng, kWidthPool.size())];
        int alloca_in = b.add_node(Opcode::Alloca, in_w, words);
        entry_allocas.push_back(alloca_in);

        int addr = alloca_in;
        bool dup_gep = rand_unit(rng) < 0.3; // duplicate address chains exercise merging
        if (rand_unit(rng) < 0.6) {
            int gep = b.add_node(Opcode::GetElementPtr, in_w);
            b.connect(alloca_in, gep, in_w);
            addr = gep;
        }
        int load = b.add_node(Opcode::Load, in_w);
        b.connect(addr, load, in_w);
        if (dup_gep && addr != alloca_in) {
            int gep2 = b.add_node(Opcode::GetElementPtr, in_w);
            b.connect(alloca_in, gep2, in_w);
            b.connect(gep2, load, in_w);
        }

        std::vector<int> prev = {load};
        std::vector<int> prev_w = {in_w};
        for (int layer = 0; layer < spec.depth; ++layer) {
            std::vector<int> cur, cur_w;
            for (int j = 0; j < spec.width; ++j) {
                Opcode op = kArithPool[rand_index(rng, kArithPool.size())];
                int w = kWidthPool[rand_index(rng, kWidthPool.size())];
                int node = b.add_node(op, w);
                std::size_t k0 = rand_index(rng, prev.size());
                int in0 = prev[k0];
                int in0_w = prev_w[k0];
                // occasional cast splice between layers exercises trimming
                if (rand_unit(rng) < 0.25) {
                    Opcode cast =
                        rand_unit(rng) < 0.5 ? Opcode::SExt : (rand_unit(rng) < 0.5 ? Opcode::ZExt : Opcode::Trunc);
                    int c = b.add_node(cast, w);
                    b.connect(in0, c, in0_w);
                    b.connect(c, node, w);
                } else {
                    b.connect(in0, node, in0_w);
                }
                if (prev.size() > 1 || rand_unit(rng) < 0.5) {
                    int k = static_cast<int>(rand_index(rng, prev.size()));
                    b.connect(prev[static_cast<std::size_t>(k)], node,
                              prev_w[static_cast<std::size_t>(k)]);
                }
                cur.push_back(node);
                cur_w.push_back(w);
            }
            // occasional compare + select pair for opcode coverage
            if (layer == 0 && rand_unit(rng) < 0.3 && cur.size() >= 2) {
                int cmp = b.add_node(Opcode::ICmp, 1);
                b.connect(cur[0], cmp, cur_w[0]);
                b.connect(cur[1], cmp, cur_w[1]);
                int sel = b.add_node(Opcode::Select, cur_w[0]);
                b.connect(cmp, sel, 1);
                b.connect(cur[0], sel, cur_w[0]);
                b.connect(cur[1], sel, cur_w[1]);
                cur.push_back(sel);
                cur_w.push_back(cur_w[0]);
            }
            prev = cur;
            prev_w = cur_w;
        }
        // lane combiner
        if (prev.size() > 1) {
            int comb = b.add_node(Opcode::Add, prev_w[0]);
            for (std::size_t i = 0; i < prev.size(); ++i) b.connect(prev[i], comb, prev_w[i]);
            lane_outs.push_back(comb);
        } else {
            lane_outs.push_back(prev[0]);
        }
    }

    // cross-lane reduction
    int acc = lane_outs[0];
    int acc_w = b.g.nodes[static_cast<std::size_t>(acc)].bitwidth;
    for (std::size_t i = 1; i < lane_outs.size(); ++i) {
        int add = b.add_node(Opcode::Add, acc_w);
        b.connect(acc, add, acc_w);
        b.connect(lane_outs[i], add,
                  b.g.nodes[static_cast<std::size_t>(lane_outs[i])].bitwidth);
        acc = add;
    }

    // occasional phi mux over the accumulator for opcode coverage
    if (spec.unroll >= 2 && rand_unit(rng) < 0.3) {
        int phi = b.add_node(Opcode::Phi, acc_w);
        b.connect(lane_outs[0], phi, acc_w);
        b.connect(acc, phi, acc_w);
        acc = phi;
    }

    long long out_words =
        spec.buffer_words.empty() ? 64 : spec.buffer_words[0];
    int alloca_out = b.add_node(Opcode::Alloca, acc_w, out_words);
    entry_allocas.push_back(alloca_out);
    int store = b.add_node(Opcode::Store, acc_w);
    b.connect(alloca_out, store, acc_w);
    b.connect(acc, store, acc_w);
    int ret = b.add_node(Opcode::Ret, 1);
    b.connect(store, ret, 1);
    if (rand_unit(rng) < 0.2) {
        int br = b.add_node(Opcode::Br, 1);
        b.connect(store, br, 1);
        b.connect(br, ret, 1);
    }

    b.g.validate();
    return b.g;
}

std::array<double, kMetadataDim> design_metadata(const Dfg& constructed, long long latency,
                                                 const ResourceEstimate& res,
                                                 const ResourceEstimate& base_res,
                                                 long long base_latency, double clock_ns,
                                                 double base_clock_ns) {
    std::array<double, kMetadataDim> md{};
    md[0] = res.lut;
    md[1] = res.dsp;
    md[2] = res.bram;
    md[3] = static_cast<double>(latency);
    md[4] = clock_ns;
    auto ratio = [](double a, double b) { return b > 0 ? a / b : 1.0; };
    md[5] = std::max(ratio(res.lut, base_res.lut), 1e-3);
    md[6] = base_res.dsp > 0 ? std::max(ratio(res.dsp, base_res.dsp), 1e-3) : 1.0;
    md[7] = base_res.bram > 0 ? std::max(ratio(res.bram, base_res.bram), 1e-3) : 1.0;
    md[8] = std::max(ratio(static_cast<double>(latency), static_cast<double>(base_latency)), 1e-3);
    md[9] = std::max(ratio(clock_ns, base_clock_ns), 1e-3);
    (void)constructed;
    return md;
}

double clock_estimate(const Dfg& g) {
    int max_w = 1;
    for (const auto& n : g.nodes) max_w = std::max(max_w, n.bitwidth);
    return 3.0 + 0.02 * max_w;
}

} // namespace

GeneratedDesign gen_design(const DesignSpec& spec) {
    if (spec.depth < 1 || spec.width < 1 || spec.unroll < 1)
        throw ValidationError("gen_design: dims must be positive");
    long long iterations = std::max<long long>(1, spec.base_iterations / spec.unroll);

    Rng rng(derive_seed(spec.seed, "synthgen"));
    std::vector<int> entry_allocas;
    GeneratedDesign d;
    d.dfg = build_structure(spec, rng, entry_allocas);

    Diagnostics diags;
    Dfg constructed = construct_graph(d.dfg, &diags);
    long long depth = pipeline_depth(constructed);
    long long latency = iterations * depth;
    d.dfg.latency = latency;

    // Per-design toggle intensity spreads the activity levels so that
    // structurally similar designs still differ in power.
    double toggle = rand_uniform(rng, 0.15, 1.0);
    for (int id : constructed.entry_ids()) {
        const DfgNode& n = constructed.node_at(id);
        std::vector<BitVec> seq;
        std::uint64_t cur = rng();
        seq.emplace_back(n.bitwidth, cur);
        for (long long t = 1; t < iterations; ++t) {
            if (rand_unit(rng) < toggle) cur = rng();
            seq.emplace_back(n.bitwidth, cur);
        }
        d.stimuli.inputs[id] = std::move(seq);
    }

    // Unoptimized baseline: same family, unroll 1.
    ResourceEstimate res = estimate_resources(constructed);
    ResourceEstimate base_res = res;
    long long base_latency = latency;
    double clock_ns = clock_estimate(constructed);
    double base_clock = clock_ns;
    if (spec.unroll > 1) {
        DesignSpec base = spec;
        base.unroll = 1;
        Rng base_rng(derive_seed(base.seed, "synthgen"));
        std::vector<int> base_entries;
        Dfg base_raw = build_structure(base, base_rng, base_entries);
        Dfg base_constructed = construct_graph(base_raw, nullptr);
        base_res = estimate_resources(base_constructed);
        base_latency = std::max<long long>(1, base.base_iterations / 1) *
                       pipeline_depth(base_constructed);
        base_clock = clock_estimate(base_constructed);
    }
    d.metadata = design_metadata(constructed, latency, res, base_res, base_latency, clock_ns,
                                 base_clock);
    return d;
}

double oracle_power(const GraphSample& sample, const std::array<double, kNumRelations>& c_rel,
                    double voltage, double freq) {
    for (double c : c_rel)
        if (c <= 0) throw ValidationError("oracle_power: capacitances must be > 0");
    if (voltage <= 0 || freq <= 0) throw ValidationError("oracle_power: V and f must be > 0");
    double p = 0;
    for (const auto& e : sample.edges) {
        double alpha = 0.5 * (e.feat[0] + e.feat[1]);
        p += alpha * c_rel[static_cast<std::size_t>(e.rel)] * voltage * voltage * freq;
    }
    return p;
}

double static_power_proxy(const std::array<double, kMetadataDim>& metadata) {
    return 0.05 + 2e-6 * metadata[0] + 5e-4 * metadata[1] + 1e-3 * metadata[2];
}

std::vector<CorpusEntry> emit_corpus(const CorpusOptions& opts) {
    if (opts.count < 1) throw ValidationError("emit_corpus: count must be >= 1");
    if (opts.out_root.empty()) throw ValidationError("emit_corpus: missing output root");
    fs::create_directories(opts.out_root);

    std::vector<CorpusEntry> entries;
    for (int i = 0; i < opts.count; ++i) {
        Rng rng(derive_seed(opts.seed, "corpus", static_cast<std::uint64_t>(i)));
        DesignSpec spec;
        spec.depth = 2 + static_cast<int>(rand_index(rng, 4));    // 2..5
        spec.width = 1 + static_cast<int>(rand_index(rng, 3));    // 1..3
        spec.unroll = 1 + static_cast<int>(rand_index(rng, 3));   // 1..3
        spec.buffer_words = {static_cast<long long>(16 + rand_index(rng, 241))};
        spec.base_iterations = 24;
        spec.seed = derive_seed(opts.seed, "design", static_cast<std::uint64_t>(i));

        std::string family;
        if (spec.unroll >= 2)
            family = "unrolled";
        else if (spec.depth >= 4)
            family = "deep";
        else if (spec.width >= 2)
            family = "wide";
        else
            family = "serial";

        GeneratedDesign d = gen_design(spec);
        Diagnostics diags;
        Dfg constructed = construct_graph(d.dfg, &diags);
        long long iterations = std::max<long long>(1, spec.base_iterations / spec.unroll);
        TraceSet traces = interpret_dfg(constructed, d.stimuli, iterations);
        // metadata and labels live in the .meta sidecar; the sample file
        // carries graph features only, exactly what `construct` rebuilds
        GraphSample sample = annotate_features(constructed, traces);

        double dynamic =
            oracle_power(sample, kOracleCapacitance, kOracleVoltage, kOracleFrequency);
        double total = dynamic + static_power_proxy(d.metadata);

        char stem[16];
        std::snprintf(stem, sizeof(stem), "s%04d", i);
        fs::path dir = fs::path(opts.out_root) / family;
        fs::create_directories(dir);
        fs::path base = dir / stem;
        save_dfg_file(d.dfg, base.string() + ".dfg");
        save_trace_file(traces, base.string() + ".trace");
        save_sample_file(sample, base.string() + ".sample");
        MetaFile meta;
        std::copy(d.metadata.begin(), d.metadata.end(), meta.metadata.begin());
        meta.label_dynamic = dynamic;
        meta.label_total = total;
        save_meta_file(meta, base.string() + ".meta");

        entries.push_back(CorpusEntry{family, stem, dynamic, total});
    }
    return entries;
}

} // namespace powergear
