#ifndef POWERGEAR_DSE_HPP
#define POWERGEAR_DSE_HPP

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <vector>

#include "powergear/sample.hpp"

namespace powergear {

/// One HLS configuration in a DSE space. true_power stays hidden behind
/// the explorer's sampling audit until the point is sampled.
struct DesignPoint {
    int id = 0;
    double latency = 0;
    double true_power = 0;
    double predicted_power = 0;
    bool sampled = false;
};

/// Objective vector (minimize latency, minimize power).
using Objective = std::array<double, 2>;

enum class PowerField { TruePower, PredictedPower };

Objective objective_of(const DesignPoint& p, PowerField field);

/// Exact non-dominated subset, ordered lexicographically by (latency,
/// power). Among duplicate objective vectors the lowest id is kept.
std::vector<DesignPoint> pareto_front(const std::vector<DesignPoint>& points, PowerField field);

/// Eq.-style average distance from reference set: mean over the exact set
/// of the clamped relative distance to the closest approximate point.
double adrs(const std::vector<Objective>& exact, const std::vector<Objective>& approx);

std::vector<Objective> objectives_of(const std::vector<DesignPoint>& points, PowerField field);

struct ExploreOptions {
    double init_budget = 0.02;
    double total_budget = 0.4;
    int batch = 8;
    std::uint64_t seed = 0;
};

struct ExploreIteration {
    int iter = 0;
    double budget_used = 0; // fraction of the space sampled so far
    double adrs_value = 0;  // vs the exact frontier, when provided
    int frontier_size = 0;
};

struct ExploreResult {
    std::vector<DesignPoint> sampled_frontier; // true-power frontier of sampled points
    std::vector<ExploreIteration> trace;
    std::vector<int> sampled_ids;
    // Audit: how often each point's true power was read; reads of
    // unsampled points would show up here.
    std::map<int, int> true_power_reads;
};

using Predictor = std::function<double(const DesignPoint&)>;

/// Iterative frontier-guided sampling: seed uniformly at init_budget,
/// then repeatedly sample the points non-dominated under (latency,
/// predicted power), tie-broken by crowding distance then id, until the
/// total budget ceil(total_budget * n) is exhausted. The exact frontier,
/// when given, is only used to fill the ADRS trace.
ExploreResult explore(std::vector<DesignPoint> space, const Predictor& predictor,
                      const ExploreOptions& opts,
                      const std::vector<Objective>* exact_frontier = nullptr);

/// Frontier of a uniform random sample at the same budget (baseline).
double uniform_sampling_adrs(const std::vector<DesignPoint>& space, double budget,
                             std::uint64_t seed, const std::vector<Objective>& exact_frontier);

} // namespace powergear

#endif
