#ifndef POWERGEAR_TRAINING_HPP
#define POWERGEAR_TRAINING_HPP

#include <set>
#include <string>
#include <vector>

#include "powergear/hecgnn.hpp"
#include "powergear/sample.hpp"

namespace powergear {

struct AppGroup {
    std::string name;
    std::vector<GraphSample> samples;
};

struct Dataset {
    LabelKind kind = LabelKind::Total;
    std::vector<AppGroup> groups; // sorted by name

    std::size_t total_samples() const;
};

/// Scans <root>/<app>/<id>.sample (+ sidecar .meta) and assigns uids.
/// Samples lacking the requested label kind are rejected.
Dataset load_dataset(const std::string& root, LabelKind kind);

std::pair<std::vector<GraphSample>, std::vector<GraphSample>>
split_leave_one_out(const Dataset& ds, const std::string& target);

struct TrainOptions {
    int folds = 10;
    std::vector<long long> seeds = {0, 1, 2};
    int patience = 200;       // early stop on validation MAPE
    int max_epochs = -1;      // -1: config epochs for the label kind
    double val_fraction = 0.2; // single-model holdout mode
    int threads = 0;          // 0: hardware concurrency
    bool quiet = true;
};

struct TrainReport {
    long long seed = 0;
    int fold = -1;
    std::vector<double> train_mape; // per epoch
    std::vector<double> val_mape;   // per epoch
    double best_val_mape = -1;
    int best_epoch = -1;
    double test_mape = -1;
    double wall_seconds = 0;
    // Leakage audit: uids that contributed gradients / early-stopping.
    std::set<int> grad_uids;
    std::set<int> val_uids;
};

/// Deterministic shuffled batching; the last partial batch is kept.
std::vector<std::vector<int>> mini_batch_iter(int num_samples, int batch_size, Rng& rng);

/// Trains one model on train_idx with val_idx for early stopping.
std::pair<ModelParams, TrainReport>
train_member(const std::vector<GraphSample>& samples, const std::vector<int>& train_idx,
             const std::vector<int>& val_idx, const HecGnnConfig& config, LabelKind kind,
             long long seed, int fold, const TrainOptions& opts);

struct EnsembleResult {
    std::vector<ModelParams> members; // folds x seeds, seed-major order
    std::vector<TrainReport> reports;
};

/// 10-fold cross-validation x seeds: every (seed, fold) pair trains one
/// member on the other folds with the held-out fold as validation.
EnsembleResult train_ensemble(const std::vector<GraphSample>& train, const HecGnnConfig& config,
                              LabelKind kind, const TrainOptions& opts);

/// Single-model mode: a val_fraction holdout drives early stopping.
std::pair<ModelParams, TrainReport> train_single(const std::vector<GraphSample>& samples,
                                                 const HecGnnConfig& config, LabelKind kind,
                                                 long long seed, const TrainOptions& opts);

double mape_of(std::span<const double> preds, std::span<const double> truths);

/// Ensemble test MAPE plus per-member test MAPEs.
struct EvalReport {
    double ensemble_test_mape = -1;
    std::vector<double> member_test_mape;
};
EvalReport evaluate(std::span<const ModelParams> members, const std::vector<GraphSample>& test);

} // namespace powergear

#endif
