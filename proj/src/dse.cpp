#include "powergear/dse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "powergear/errors.hpp"
#include "powergear/seeding.hpp"

namespace powergear {

Objective objective_of(const DesignPoint& p, PowerField field) {
    return {p.latency, field == PowerField::TruePower ? p.true_power : p.predicted_power};
}

namespace {

bool dominates(const Objective& a, const Objective& b) {
    return a[0] <= b[0] && a[1] <= b[1] && (a[0] < b[0] || a[1] < b[1]);
}

} // namespace

std::vector<DesignPoint> pareto_front(const std::vector<DesignPoint>& points, PowerField field) {
    if (points.empty()) throw ValidationError("pareto_front: empty point set");
    // Sweep by (latency, power, id): a point is non-dominated iff its power
    // is strictly below every earlier point's best power.
    std::vector<const DesignPoint*> sorted;
    sorted.reserve(points.size());
    for (const auto& p : points) sorted.push_back(&p);
    std::sort(sorted.begin(), sorted.end(), [&](const DesignPoint* a, const DesignPoint* b) {
        Objective oa = objective_of(*a, field), ob = objective_of(*b, field);
        return std::tie(oa[0], oa[1], a->id) < std::tie(ob[0], ob[1], b->id);
    });
    std::vector<DesignPoint> front;
    double best_power = std::numeric_limits<double>::infinity();
    Objective last{std::numeric_limits<double>::quiet_NaN(), 0};
    for (const DesignPoint* p : sorted) {
        Objective o = objective_of(*p, field);
        if (o[0] == last[0] && o[1] == last[1]) continue; // duplicate vector: first id kept
        if (o[1] < best_power) {
            front.push_back(*p);
            best_power = o[1];
            last = o;
        }
    }
    return front;
}

std::vector<Objective> objectives_of(const std::vector<DesignPoint>& points, PowerField field) {
    std::vector<Objective> out;
    out.reserve(points.size());
    for (const auto& p : points) out.push_back(objective_of(p, field));
    return out;
}

double adrs(const std::vector<Objective>& exact, const std::vector<Objective>& approx) {
    if (exact.empty() || approx.empty()) throw ValidationError("adrs: empty Pareto set");
    double sum = 0;
    for (const auto& g : exact) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& w : approx) {
            double f = 0;
            for (int j = 0; j < 2; ++j) {
                if (g[j] == 0) throw ValidationError("adrs: reference objective must be nonzero");
                f = std::max(f, std::max(0.0, (w[j] - g[j]) / g[j]));
            }
            best = std::min(best, f);
        }
        sum += best;
    }
    return sum / static_cast<double>(exact.size());
}

namespace {

// NSGA-II style crowding distance over two objectives.
std::vector<double> crowding_distance(const std::vector<DesignPoint*>& pts,
                                      PowerField field) {
    std::size_t n = pts.size();
    std::vector<double> dist(n, 0.0);
    if (n <= 2) {
        for (auto& d : dist) d = std::numeric_limits<double>::infinity();
        return dist;
    }
    for (int j = 0; j < 2; ++j) {
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            double va = objective_of(*pts[a], field)[static_cast<std::size_t>(j)];
            double vb = objective_of(*pts[b], field)[static_cast<std::size_t>(j)];
            return std::tie(va, pts[a]->id) < std::tie(vb, pts[b]->id);
        });
        double lo = objective_of(*pts[order.front()], field)[static_cast<std::size_t>(j)];
        double hi = objective_of(*pts[order.back()], field)[static_cast<std::size_t>(j)];
        dist[order.front()] = std::numeric_limits<double>::infinity();
        dist[order.back()] = std::numeric_limits<double>::infinity();
        double range = hi - lo;
        if (range <= 0) continue;
        for (std::size_t i = 1; i + 1 < n; ++i) {
            double prev = objective_of(*pts[order[i - 1]], field)[static_cast<std::size_t>(j)];
            double next = objective_of(*pts[order[i + 1]], field)[static_cast<std::size_t>(j)];
            dist[order[i]] += (next - prev) / range;
        }
    }
    return dist;
}

} // namespace

ExploreResult explore(std::vector<DesignPoint> space, const Predictor& predictor,
                      const ExploreOptions& opts, const std::vector<Objective>* exact_frontier) {
    const int n = static_cast<int>(space.size());
    if (n == 0) throw ValidationError("explore: empty design space");
    if (opts.init_budget <= 0 || opts.total_budget <= 0 || opts.total_budget > 1 ||
        opts.init_budget > opts.total_budget)
        throw ValidationError("explore: invalid budgets");
    if (opts.batch < 1) throw ValidationError("explore: batch must be >= 1");

    const int total_quota = static_cast<int>(std::ceil(opts.total_budget * n));
    const int init_quota = std::min(total_quota, std::max(1, static_cast<int>(std::ceil(
                                                                 opts.init_budget * n))));

    ExploreResult result;
    for (auto& p : space) p.sampled = false;

    // Sampling marks the point and reads its true power through the audit.
    auto sample_point = [&](DesignPoint& p) {
        p.sampled = true;
        result.sampled_ids.push_back(p.id);
        ++result.true_power_reads[p.id];
    };

    // init: uniform without replacement
    {
        std::vector<int> order(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
        Rng rng(derive_seed(opts.seed, "dse-init"));
        shuffle_vec(order, rng);
        for (int i = 0; i < init_quota; ++i) sample_point(space[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
    }

    auto record_iteration = [&](int iter) {
        std::vector<DesignPoint> sampled;
        for (const auto& p : space)
            if (p.sampled) sampled.push_back(p);
        std::vector<DesignPoint> front = pareto_front(sampled, PowerField::TruePower);
        ExploreIteration it;
        it.iter = iter;
        it.budget_used = static_cast<double>(result.sampled_ids.size()) / n;
        it.frontier_size = static_cast<int>(front.size());
        it.adrs_value = exact_frontier
                            ? adrs(*exact_frontier, objectives_of(front, PowerField::TruePower))
                            : 0.0;
        result.trace.push_back(it);
        result.sampled_frontier = std::move(front);
    };
    record_iteration(0);

    int iter = 0;
    while (static_cast<int>(result.sampled_ids.size()) < total_quota) {
        ++iter;
        // predict power for all unsampled points
        std::vector<DesignPoint*> unsampled;
        for (auto& p : space)
            if (!p.sampled) unsampled.push_back(&p);
        for (auto* p : unsampled) p->predicted_power = predictor(*p);

        int want = std::min(opts.batch, total_quota - static_cast<int>(result.sampled_ids.size()));
        // pick non-dominated layers under (latency, predicted power) until
        // the batch is filled
        std::vector<DesignPoint*> pool = unsampled;
        std::vector<DesignPoint*> picked;
        while (static_cast<int>(picked.size()) < want && !pool.empty()) {
            std::vector<DesignPoint> pool_copy;
            pool_copy.reserve(pool.size());
            for (auto* p : pool) pool_copy.push_back(*p);
            std::vector<DesignPoint> layer = pareto_front(pool_copy, PowerField::PredictedPower);
            std::set<int> layer_ids;
            for (const auto& p : layer) layer_ids.insert(p.id);
            std::vector<DesignPoint*> layer_ptrs;
            for (auto* p : pool)
                if (layer_ids.count(p->id)) layer_ptrs.push_back(p);

            std::vector<double> crowd = crowding_distance(layer_ptrs, PowerField::PredictedPower);
            std::vector<std::size_t> order(layer_ptrs.size());
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                if (crowd[a] != crowd[b]) return crowd[a] > crowd[b];
                return layer_ptrs[a]->id < layer_ptrs[b]->id;
            });
            for (std::size_t i : order) {
                if (static_cast<int>(picked.size()) >= want) break;
                picked.push_back(layer_ptrs[i]);
            }
            std::erase_if(pool, [&](DesignPoint* p) { return layer_ids.count(p->id) > 0; });
        }
        for (auto* p : picked) sample_point(*p);
        record_iteration(iter);
    }
    return result;
}

double uniform_sampling_adrs(const std::vector<DesignPoint>& space, double budget,
                             std::uint64_t seed, const std::vector<Objective>& exact_frontier) {
    const int n = static_cast<int>(space.size());
    if (n == 0) throw ValidationError("uniform_sampling_adrs: empty space");
    int quota = std::min(n, std::max(1, static_cast<int>(std::ceil(budget * n))));
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    Rng rng(derive_seed(seed, "dse-uniform"));
    shuffle_vec(order, rng);
    std::vector<DesignPoint> sampled;
    for (int i = 0; i < quota; ++i) sampled.push_back(space[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
    return adrs(exact_frontier, objectives_of(pareto_front(sampled, PowerField::TruePower),
                                              PowerField::TruePower));
}

} // namespace powergear
