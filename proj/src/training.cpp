#include "powergear/training.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <mutex>
#include <thread>

#include "powergear/errors.hpp"

namespace fs = std::filesystem;

namespace powergear {

std::size_t Dataset::total_samples() const {
    std::size_t n = 0;
    for (const auto& g : groups) n += g.samples.size();
    return n;
}

Dataset load_dataset(const std::string& root, LabelKind kind) {
    if (!fs::is_directory(root)) throw IoError("dataset root is not a directory: " + root);
    Dataset ds;
    ds.kind = kind;
    std::vector<std::string> apps;
    for (const auto& entry : fs::directory_iterator(root))
        if (entry.is_directory()) apps.push_back(entry.path().filename().string());
    std::sort(apps.begin(), apps.end());

    int uid = 0;
    for (const auto& app : apps) {
        AppGroup group;
        group.name = app;
        std::vector<std::string> stems;
        for (const auto& f : fs::directory_iterator(fs::path(root) / app))
            if (f.path().extension() == ".sample") stems.push_back(f.path().stem().string());
        std::sort(stems.begin(), stems.end());
        for (const auto& stem : stems) {
            fs::path base = fs::path(root) / app / stem;
            GraphSample s = load_sample_file(base.string() + ".sample");
            fs::path meta_path = base;
            meta_path += ".meta";
            if (fs::exists(meta_path)) {
                MetaFile m = load_meta_file(meta_path.string());
                s.metadata.assign(m.metadata.begin(), m.metadata.end());
                auto label = kind == LabelKind::Total ? m.label_total : m.label_dynamic;
                if (label) {
                    s.label = *label;
                    s.label_kind = kind;
                }
            }
            if (!s.label || s.label_kind != kind)
                throw ValidationError("sample " + base.string() + " lacks a " +
                                      label_kind_name(kind) + " power label");
            s.uid = uid++;
            group.samples.push_back(std::move(s));
        }
        if (!group.samples.empty()) ds.groups.push_back(std::move(group));
    }
    if (ds.groups.empty()) throw ValidationError("dataset is empty: " + root);
    return ds;
}

std::pair<std::vector<GraphSample>, std::vector<GraphSample>>
split_leave_one_out(const Dataset& ds, const std::string& target) {
    std::vector<GraphSample> train, test;
    bool found = false;
    for (const auto& g : ds.groups) {
        if (g.name == target) {
            found = true;
            test.insert(test.end(), g.samples.begin(), g.samples.end());
        } else {
            train.insert(train.end(), g.samples.begin(), g.samples.end());
        }
    }
    if (!found) throw ValidationError("unknown application group '" + target + "'");
    return {std::move(train), std::move(test)};
}

std::vector<std::vector<int>> mini_batch_iter(int num_samples, int batch_size, Rng& rng) {
    if (batch_size < 1) throw ValidationError("mini_batch_iter: batch size must be >= 1");
    std::vector<int> order(static_cast<std::size_t>(num_samples));
    for (int i = 0; i < num_samples; ++i) order[static_cast<std::size_t>(i)] = i;
    shuffle_vec(order, rng);
    std::vector<std::vector<int>> batches;
    for (int start = 0; start < num_samples; start += batch_size) {
        int end = std::min(num_samples, start + batch_size);
        batches.emplace_back(order.begin() + start, order.begin() + end);
    }
    return batches;
}

double mape_of(std::span<const double> preds, std::span<const double> truths) {
    if (preds.size() != truths.size() || preds.empty())
        throw ValidationError("mape_of: shape mismatch or empty");
    double sum = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (truths[i] == 0) throw ValidationError("mape_of: zero truth entry");
        sum += std::abs(preds[i] - truths[i]) / std::abs(truths[i]);
    }
    return sum / static_cast<double>(preds.size());
}

namespace {

std::array<double, 5> metadata_maxima(const std::vector<GraphSample>& samples,
                                      const std::vector<int>& idx) {
    std::array<double, 5> maxima{1, 1, 1, 1, 1};
    for (int i : idx) {
        const auto& md = samples[static_cast<std::size_t>(i)].metadata;
        for (int j = 0; j < 5 && j < static_cast<int>(md.size()); ++j)
            maxima[static_cast<std::size_t>(j)] =
                std::max(maxima[static_cast<std::size_t>(j)], md[static_cast<std::size_t>(j)]);
    }
    return maxima;
}

double eval_mape(const std::vector<GraphSample>& samples, const std::vector<int>& idx,
                 const ModelParams& params) {
    std::vector<const GraphSample*> ptrs;
    std::vector<double> truths;
    for (int i : idx) {
        ptrs.push_back(&samples[static_cast<std::size_t>(i)]);
        truths.push_back(*samples[static_cast<std::size_t>(i)].label);
    }
    Batch b = make_batch(ptrs, params.config, params.meta_norm);
    Tape tape;
    ForwardResult fr = model_forward(tape, b, params, false, nullptr);
    return mape_of(fr.prediction.value(), truths);
}

} // namespace

std::pair<ModelParams, TrainReport>
train_member(const std::vector<GraphSample>& samples, const std::vector<int>& train_idx,
             const std::vector<int>& val_idx, const HecGnnConfig& config, LabelKind kind,
             long long seed, int fold, const TrainOptions& opts) {
    config.validate();
    if (train_idx.empty() || val_idx.empty())
        throw ValidationError("train_member: empty train or validation split");
    auto t0 = std::chrono::steady_clock::now();

    int node_dim = samples[static_cast<std::size_t>(train_idx[0])].node_feat_dim;
    std::uint64_t member_seed =
        derive_seed(static_cast<std::uint64_t>(seed), "train-member", static_cast<std::uint64_t>(fold));

    ModelParams params = init_params(config, node_dim, member_seed);
    params.label_kind = kind;
    params.seed = seed;
    params.fold = fold;
    params.meta_norm = metadata_maxima(samples, train_idx); // train folds only

    std::vector<double> flat = params.flatten();
    AdamState adam;
    Rng dropout_rng(derive_seed(member_seed, "dropout"));

    int max_epochs = opts.max_epochs > 0 ? opts.max_epochs : config.epochs_for(kind);

    TrainReport report;
    report.seed = seed;
    report.fold = fold;
    for (int i : train_idx) report.grad_uids.insert(samples[static_cast<std::size_t>(i)].uid);
    for (int i : val_idx) report.val_uids.insert(samples[static_cast<std::size_t>(i)].uid);

    ModelParams best = params;
    double best_val = std::numeric_limits<double>::infinity();
    int best_epoch = -1;
    int since_best = 0;

    for (int epoch = 0; epoch < max_epochs; ++epoch) {
        Rng batch_rng(derive_seed(member_seed, "batches", static_cast<std::uint64_t>(epoch)));
        auto batches = mini_batch_iter(static_cast<int>(train_idx.size()), config.batch_size,
                                       batch_rng);
        double epoch_loss = 0;
        for (const auto& batch_rows : batches) {
            std::vector<const GraphSample*> ptrs;
            std::vector<double> truths;
            for (int r : batch_rows) {
                int i = train_idx[static_cast<std::size_t>(r)];
                ptrs.push_back(&samples[static_cast<std::size_t>(i)]);
                truths.push_back(*samples[static_cast<std::size_t>(i)].label);
            }
            params.unflatten(flat);
            Batch b = make_batch(ptrs, config, params.meta_norm);
            Tape tape;
            ForwardResult fr = model_forward(tape, b, params, true, &dropout_rng);
            Tensor truth = tape.constant(static_cast<int>(truths.size()), 1, truths);
            Tensor loss = tape.mape_loss(fr.prediction, truth);
            tape.backward(loss);
            std::vector<double> grads;
            grads.reserve(flat.size());
            collect_gradients(fr, grads);
            adam_step(flat, grads, adam, config.learning_rate);
            epoch_loss += loss.scalar() * static_cast<double>(batch_rows.size());
        }
        report.train_mape.push_back(epoch_loss / static_cast<double>(train_idx.size()));

        params.unflatten(flat);
        double val = eval_mape(samples, val_idx, params);
        report.val_mape.push_back(val);
        if (val < best_val) {
            best_val = val;
            best = params;
            best_epoch = epoch;
            since_best = 0;
        } else if (++since_best > opts.patience) {
            break;
        }
    }

    best.val_mape = best_val;
    report.best_val_mape = best_val;
    report.best_epoch = best_epoch;
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {std::move(best), std::move(report)};
}

EnsembleResult train_ensemble(const std::vector<GraphSample>& train, const HecGnnConfig& config,
                              LabelKind kind, const TrainOptions& opts) {
    if (opts.folds < 2) throw ValidationError("train_ensemble: need at least 2 folds");
    if (static_cast<int>(train.size()) < opts.folds)
        throw ValidationError("train_ensemble: fewer samples (" + std::to_string(train.size()) +
                              ") than folds (" + std::to_string(opts.folds) + ")");
    if (opts.seeds.empty()) throw ValidationError("train_ensemble: need at least one seed");

    struct Job {
        long long seed;
        int fold;
        std::vector<int> train_idx, val_idx;
    };
    std::vector<Job> jobs;
    for (long long seed : opts.seeds) {
        // Deterministic shuffle per seed, then round-robin fold assignment.
        std::vector<int> order(train.size());
        for (std::size_t i = 0; i < train.size(); ++i) order[i] = static_cast<int>(i);
        Rng rng(derive_seed(static_cast<std::uint64_t>(seed), "fold-shuffle"));
        shuffle_vec(order, rng);
        for (int fold = 0; fold < opts.folds; ++fold) {
            Job job;
            job.seed = seed;
            job.fold = fold;
            for (std::size_t i = 0; i < order.size(); ++i) {
                if (static_cast<int>(i % static_cast<std::size_t>(opts.folds)) == fold)
                    job.val_idx.push_back(order[i]);
                else
                    job.train_idx.push_back(order[i]);
            }
            jobs.push_back(std::move(job));
        }
    }

    EnsembleResult result;
    result.members.resize(jobs.size());
    result.reports.resize(jobs.size());

    int n_threads = opts.threads > 0 ? opts.threads
                                     : static_cast<int>(std::thread::hardware_concurrency());
    n_threads = std::max(1, std::min<int>(n_threads, static_cast<int>(jobs.size())));

    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&]() {
        while (true) {
            std::size_t j = next.fetch_add(1);
            if (j >= jobs.size()) return;
            try {
                auto [params, report] = train_member(train, jobs[j].train_idx, jobs[j].val_idx,
                                                     config, kind, jobs[j].seed, jobs[j].fold, opts);
                result.members[j] = std::move(params);
                result.reports[j] = std::move(report);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
    return result;
}

std::pair<ModelParams, TrainReport> train_single(const std::vector<GraphSample>& samples,
                                                 const HecGnnConfig& config, LabelKind kind,
                                                 long long seed, const TrainOptions& opts) {
    if (samples.size() < 2) throw ValidationError("train_single: need at least 2 samples");
    std::vector<int> order(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) order[i] = static_cast<int>(i);
    Rng rng(derive_seed(static_cast<std::uint64_t>(seed), "holdout-shuffle"));
    shuffle_vec(order, rng);
    std::size_t n_val = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(opts.val_fraction * static_cast<double>(order.size()))));
    n_val = std::min(n_val, order.size() - 1);
    std::vector<int> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<int> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
    return train_member(samples, train_idx, val_idx, config, kind, seed, /*fold=*/-1, opts);
}

EvalReport evaluate(std::span<const ModelParams> members, const std::vector<GraphSample>& test) {
    if (members.empty()) throw ValidationError("evaluate: no ensemble members");
    if (test.empty()) throw ValidationError("evaluate: empty test set");
    EvalReport report;
    std::vector<double> truths, ens_preds;
    std::vector<std::vector<double>> member_preds(members.size());
    for (const auto& s : test) {
        truths.push_back(*s.label);
        double sum = 0;
        for (std::size_t m = 0; m < members.size(); ++m) {
            double p = predict(s, members[m], Mode::Eval);
            member_preds[m].push_back(p);
            sum += p;
        }
        ens_preds.push_back(sum / static_cast<double>(members.size()));
    }
    report.ensemble_test_mape = mape_of(ens_preds, truths);
    for (auto& mp : member_preds) report.member_test_mape.push_back(mape_of(mp, truths));
    return report;
}

} // namespace powergear
