#ifndef POWERGEAR_SYNTHGEN_HPP
#define POWERGEAR_SYNTHGEN_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "powergear/dfg.hpp"
#include "powergear/interp.hpp"
#include "powergear/sample.hpp"

namespace powergear {

/// Knobs of one synthetic design family member. Unrolling widens the
/// design into parallel lanes working on disjoint banks and divides the
/// iteration count, trading latency against switching power.
struct DesignSpec {
    int depth = 3;     // arithmetic layers per lane
    int width = 2;     // nodes per layer
    int unroll = 1;    // parallel lanes
    std::vector<long long> buffer_words = {64};
    long long base_iterations = 24; // per-lane iterations = base / unroll
    std::uint64_t seed = 0;
};

struct GeneratedDesign {
    Dfg dfg;          // pre-construction graph
    Stimuli stimuli;  // covers the constructed graph's entries
    std::array<double, kMetadataDim> metadata{};
};

GeneratedDesign gen_design(const DesignSpec& spec);

/// Analytic dynamic-power oracle mirroring the per-interconnect power sum:
/// P = sum over edges of mean(SA_src, SA_snk) * C_rel * V^2 * f.
double oracle_power(const GraphSample& sample, const std::array<double, kNumRelations>& c_rel,
                    double voltage, double freq);

/// Capacitance per relation (farads), supply (volts), clock (hertz) used
/// for corpus labels.
inline constexpr std::array<double, kNumRelations> kOracleCapacitance = {
    1.4e-10, 9.0e-11, 1.1e-10, 7.0e-11}; // AA, AN, NA, NN
inline constexpr double kOracleVoltage = 0.85;
inline constexpr double kOracleFrequency = 1.0e8;

/// Static-power proxy from resource metadata; total = dynamic + static.
double static_power_proxy(const std::array<double, kMetadataDim>& metadata);

struct CorpusOptions {
    int count = 64;
    std::uint64_t seed = 0;
    std::string out_root;
};

struct CorpusEntry {
    std::string app;
    std::string stem;
    double dynamic_watts = 0;
    double total_watts = 0;
};

/// Emits <root>/<family>/sNNNN.{dfg,trace,sample,meta}; returns the index
/// of written entries. Fully deterministic in (count, seed).
std::vector<CorpusEntry> emit_corpus(const CorpusOptions& opts);

} // namespace powergear

#endif
