#include "powergear/tensor.hpp"

#include <bit>
#include <cmath>
#include <cstdlib>
#include <memory>
#include <unordered_map>

#include "powergear/errors.hpp"

namespace powergear {

namespace {

// Thread-local recycling of slot storage. Tapes are built and torn down
// once per batch; without reuse, multi-megabyte activations bounce
// through mmap on every forward pass.
class BufferPool {
public:
    std::vector<double> take(std::size_t n) {
        if (n == 0) return {};
        int b = bucket_of(n);
        auto& bucket = free_[b];
        if (bucket.empty()) {
            // reserve the full bucket size so the buffer lands back in the
            // same bucket on release
            std::vector<double> v;
            v.reserve(std::size_t{1} << b);
            return v;
        }
        std::vector<double> v = std::move(bucket.back());
        bucket.pop_back();
        bytes_ -= v.capacity() * sizeof(double);
        return v;
    }
    void give(std::vector<double>&& v) {
        std::size_t cap = v.capacity();
        if (cap == 0) return;
        if (bytes_ + cap * sizeof(double) > kMaxBytes) return; // let it free
        bytes_ += cap * sizeof(double);
        free_[bucket_of_capacity(cap)].push_back(std::move(v));
    }

private:
    static constexpr std::size_t kMaxBytes = 1536u << 20;
    static int bucket_of(std::size_t n) { return std::bit_width(n - 1); } // ceil log2
    static int bucket_of_capacity(std::size_t cap) { return std::bit_width(cap) - 1; } // floor
    std::unordered_map<int, std::vector<std::vector<double>>> free_;
    std::size_t bytes_ = 0;
};

thread_local BufferPool t_buffer_pool;

std::vector<double> pool_zero(std::size_t n) {
    std::vector<double> v = t_buffer_pool.take(n);
    v.assign(n, 0.0);
    return v;
}

std::vector<double> pool_copy(const std::vector<double>& src) {
    std::vector<double> v = t_buffer_pool.take(src.size());
    v.assign(src.begin(), src.end());
    return v;
}

} // namespace

Tape::~Tape() {
    for (auto& s : slots_) {
        t_buffer_pool.give(std::move(s.value));
        t_buffer_pool.give(std::move(s.grad));
    }
}

int Tensor::rows() const { return tape_->at(idx_).rows; }
int Tensor::cols() const { return tape_->at(idx_).cols; }
const std::vector<double>& Tensor::value() const { return tape_->at(idx_).value; }
const std::vector<double>& Tensor::grad() const { return tape_->at(idx_).grad; }
double Tensor::scalar() const { return tape_->at(idx_).value[0]; }

Tensor Tape::push(Slot s) {
    // constants are never written to in backward; skip their grad buffers
    if (s.requires_grad) s.grad = pool_zero(s.value.size());
    slots_.push_back(std::move(s));
    return Tensor(this, static_cast<int>(slots_.size()) - 1);
}

Tensor Tape::leaf(int rows, int cols, std::vector<double> value, bool requires_grad) {
    if (value.size() != static_cast<std::size_t>(rows) * cols)
        throw ValidationError("tensor data length does not match shape");
    Slot s;
    s.rows = rows;
    s.cols = cols;
    s.value = std::move(value);
    s.requires_grad = requires_grad;
    return push(std::move(s));
}

void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* ai = a + static_cast<std::size_t>(i) * k;
        double* ci = c + static_cast<std::size_t>(i) * n;
        for (int l = 0; l < k; ++l) {
            double ail = ai[l];
            if (ail == 0.0) continue;
            const double* bl = b + static_cast<std::size_t>(l) * n;
            for (int j = 0; j < n; ++j) ci[j] += ail * bl[j];
        }
    }
}

void matmul_nt(const double* a, const double* b, double* c, int m, int n, int k) {
    // b arrives [k x n]; stream it transposed so the inner loop vectorizes
    std::vector<double> bt = pool_zero(static_cast<std::size_t>(n) * k);
    for (int j = 0; j < k; ++j)
        for (int l = 0; l < n; ++l)
            bt[static_cast<std::size_t>(l) * k + j] = b[static_cast<std::size_t>(j) * n + l];
    for (int i = 0; i < m; ++i) {
        const double* ai = a + static_cast<std::size_t>(i) * n;
        double* ci = c + static_cast<std::size_t>(i) * k;
        for (int l = 0; l < n; ++l) {
            double ail = ai[l];
            if (ail == 0.0) continue;
            const double* btl = bt.data() + static_cast<std::size_t>(l) * k;
            for (int j = 0; j < k; ++j) ci[j] += ail * btl[j];
        }
    }
    t_buffer_pool.give(std::move(bt));
}

void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int l = 0; l < m; ++l) {
        const double* al = a + static_cast<std::size_t>(l) * k;
        const double* bl = b + static_cast<std::size_t>(l) * n;
        for (int i = 0; i < k; ++i) {
            double ali = al[i];
            if (ali == 0.0) continue;
            double* ci = c + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) ci[j] += ali * bl[j];
        }
    }
}

Tensor Tape::matmul(Tensor a, Tensor b) {
    const Slot& sa = at(a.idx_);
    const Slot& sb = at(b.idx_);
    if (sa.cols != sb.rows)
        throw ValidationError("matmul: inner dimensions differ (" + std::to_string(sa.cols) +
                              " vs " + std::to_string(sb.rows) + ")");
    Slot s;
    s.rows = sa.rows;
    s.cols = sb.cols;
    s.value = pool_zero(static_cast<std::size_t>(s.rows) * s.cols);
    matmul_nn(sa.value.data(), sb.value.data(), s.value.data(), sa.rows, sa.cols, sb.cols);
    s.requires_grad = sa.requires_grad || sb.requires_grad;
    int ia = a.idx_, ib = b.idx_;
    Tensor out = push(std::move(s));
    int io = out.idx_;
    at(io).back = [this, ia, ib, io]() {
        Slot& so = at(io);
        Slot& xa = at(ia);
        Slot& xb = at(ib);
        if (xa.requires_grad)
            matmul_nt(so.grad.data(), xb.value.data(), xa.grad.data(), so.rows, so.cols, xa.cols);
        if (xb.requires_grad)
            matmul_tn(xa.value.data(), so.grad.data(), xb.grad.data(), xa.rows, xa.cols, so.cols);
    };
    return out;
}

Tensor Tape::add(Tensor a, Tensor b) {
    const Slot& sa = at(a.idx_);
    const Slot& sb = at(b.idx_);
    if (sa.rows != sb.rows || sa.cols != sb.cols) throw ValidationError("add: shape mismatch");
    Slot s;
    s.rows = sa.rows;
    s.cols = sa.cols;
    s.value = pool_copy(sa.value);
    for (std::size_t i = 0; i < s.value.size(); ++i) s.value[i] += sb.value[i];
    s.requires_grad = sa.requires_grad || sb.requires_grad;
    int ia = a.idx_, ib = b.idx_;
    Tensor out = push(std::move(s));
    int io = out.idx_;
    at(io).back = [this, ia, ib, io]() {
        Slot& so = at(io);
        Slot& xa = at(ia);
        Slot& xb = at(ib);
        if (xa.requires_grad)
            for (std::size_t i = 0; i < so.grad.size(); ++i) xa.grad[i] += so.grad[i];
        if (xb.requires_grad)
            for (std::size_t i = 0; i < so.grad.size(); ++i) xb.grad[i] += so.grad[i];
    };
    return out;
}

Tensor Tape::add_bias(Tensor a, Tensor bias) {
    const Slot& sa = at(a.idx_);
    const Slot& sbias = at(bias.idx_);
    if (sbias.rows != 1 || sbias.cols != sa.cols)
        throw ValidationError("add_bias: bias must be 1 x cols");
    Slot s;
    s.rows = sa.rows;
    s.cols = sa.cols;
    s.value = pool_copy(sa.value);
    for (int i = 0; i < s.rows; ++i)
        for (int j = 0; j < s.cols; ++j)
            s.value[static_cast<std::size_t>(i) * s.cols + j] += sbias.value[static_cast<std::size_t>(j)];
    s.requires_grad = sa.requires_grad || sbias.requires_grad;
    int ia = a.idx_, ib = bias.idx_;
    Tensor out = push(std::move(s));
    int io = out.idx_;
    at(io).back = [this, ia, ib, io]() {
        Slot& so = at(io);
        Slot& xa = at(ia);
        Slot& xb = at(ib);
        if (xa.requires_grad)
            for (std::size_t i = 0; i < so.grad.size(); ++i) xa.grad[i] += so.grad[i];
        if (xb.requires_grad)
            for (int i = 0; i < so.rows; ++i)
                for (int j = 0; j < so.cols; ++j)
                    xb.grad[static_cast<std::size_t>(j)] +=
                        so.grad[static_cast<std::size_t>(i) * so.cols + j];
    };
    return out;
}

Tensor Tape::relu(Tensor a) {
    const Slot& sa = at(a.idx_);
    Slot s;
    s.rows = sa.rows;
    s.cols = sa.cols;
    s.value = pool_copy(sa.value);
    for (auto& v : s.value) v = v > 0 ? v : 0.0;
    s.requires_grad = sa.requires_grad;
    int ia = a.idx_;
    Tensor out = push(std::move(s));
    int io = out.idx_;
    at(io).back = [this, ia, io]() {
        Slot& so = at(io);
        Slot& xa = at(ia);
        if (!xa.requires_grad) return;
        for (std::size_t i = 0; i < so.grad.size(); ++i)
            if (xa.value[i] > 0) xa.grad[i] += so.grad[i];
    };
    return out;
}

Tensor Tape::dropout(Tensor a, double p, Rng& rng) {
    if (p < 0 || p >= 1) throw ValidationError("dropout: p must be in [0, 1)");
    const Slot& sa = at(a.idx_);
    double scale = 1.0 / (1.0 - p);
    // The mask is never materialized: backward replays the generator from
    // a saved copy instead of keeping a value-sized buffer alive.
    Rng replay = rng;
    Slot s;
    s.rows = sa.rows;
    s.cols = sa.cols;
    s.value = pool_copy(sa.value);
    for (std::size_t i = 0; i < s.value.size(); ++i)
        s.value[i] *= rand_unit(rng) < p ? 0.0 : scale;
    s.requires_grad = sa.requires_grad;
    int ia = a.idx_;
    Tensor out = push(std::move(s));
    int io = out.idx_;
    at(io).back = [this, ia, io, replay, p, scale]() mutable {
        Slot& so = at(io);
        Slot& xa = at(ia);
        if (!xa.requires_grad) return;
        for (std::size_t i = 0; i < so.grad.size(); ++i) {
            double m = rand_unit(replay) < p ? 0.0 : scale;
            xa.grad[i] += so.grad[i] * m;
        }
    };
    return out;
}

Tensor Tape::concat_cols(Tensor a, Tensor b) {
    const Slot& sa = at(a.idx_);
    const Slot& sb = at(b.idx_);
    if (sa.rows != sb.rows) throw ValidationError("concat_cols: row counts differ");
    Slot s;
    s.rows = sa.rows;
    s.cols = sa.cols + sb.cols;
    s.value = pool_zero(static_cast<std::size_t>(s.rows) * s.cols);
    for (int i = 0; i < s.rows; ++i) {
        for (int j = 0; j < sa.cols; ++j)
            s.value[static_cast<std::size_t>(i) * s.cols + j] =
                sa.value[static_cast<std::size_t>(i) * sa.cols + j];
        for (int j = 0; j < sb.cols; ++j)
            s.value[static_cast<std::size_t>(i) * s.cols + sa.cols + j] =
                sb.value[static_cast<std::size_t>(i) * sb.cols + j];
    }
    s.requires_grad = sa.requires_grad || sb.requires_grad;
    int ia = a.idx_, ib = b.idx_;
    Tensor out = push(std::move(s));
    int io = out.idx_;
    at(io).back = [this, ia, ib, io]() {
        Slot& so = at(io);
        Slot& xa = at(ia);
        Slot& xb = at(ib);
        for (int i = 0; i < so.rows; ++i) {
            if (xa.requires_grad)
                for (int j = 0; j < xa.cols; ++j)
                    xa.grad[static_cast<std::size_t>(i) * xa.cols + j] +=
                        so.grad[static_cast<std::size_t>(i) * so.cols + j];
            if (xb.requires_grad)
                for (int j = 0; j < xb.cols; ++j)
                    xb.grad[static_cast<std::size_t>(i) * xb.cols + j] +=
                        so.grad[static_cast<std::size_t>(i) * so.cols + xa.cols + j];
        }
    };
    return out;
}

Tensor Tape::scatter_sum(Tensor values, const std::vector<int>& index, int out_rows) {
    const Slot& sv = at(values.idx_);
    if (static_cast<int>(index.size()) != sv.rows)
        throw ValidationError("scatter_sum: index length must equal row count");
    for (int i : index)
        if (i < 0 || i >= out_rows)
            throw ValidationError("scatter_sum: index " + std::to_string(i) + " out of range [0, " +
                                  std::to_string(out_rows) + ")");
    Slot s;
    s.rows = out_rows;
    s.cols = sv.cols;
    s.value = pool_zero(static_cast<std::size_t>(out_rows) * sv.cols);
    for (int i = 0; i < sv.rows; ++i) {
        const double* src = sv.value.data() + static_cast<std::size_t>(i) * sv.cols;
        double* dst = s.value.data() + static_cast<std::size_t>(index[static_cast<std::size_t>(i)]) * sv.cols;
        for (int j = 0; j < sv.cols; ++j) dst[j] += src[j];
    }
    s.requires_grad = sv.requires_grad;
    int iv = values.idx_;
    auto idx = std::make_shared<std::vector<int>>(index);
    Tensor out = push(std::move(s));
    int io = out.idx_;
    at(io).back = [this, iv, io, idx]() {
        Slot& so = at(io);
        Slot& xv = at(iv);
        if (!xv.requires_grad) return;
        for (int i = 0; i < xv.rows; ++i) {
            const double* src =
                so.grad.data() + static_cast<std::size_t>((*idx)[static_cast<std::size_t>(i)]) * so.cols;
            double* dst = xv.grad.data() + static_cast<std::size_t>(i) * so.cols;
            for (int j = 0; j < so.cols; ++j) dst[j] += src[j];
        }
    };
    return out;
}

Tensor Tape::mean_all(Tensor a) {
    const Slot& sa = at(a.idx_);
    if (sa.value.empty()) throw ValidationError("mean_all: empty tensor");
    double sum = 0;
    for (double v : sa.value) sum += v;
    Slot s;
    s.rows = 1;
    s.cols = 1;
    s.value = {sum / static_cast<double>(sa.value.size())};
    s.requires_grad = sa.requires_grad;
    int ia = a.idx_;
    Tensor out = push(std::move(s));
    int io = out.idx_;
    at(io).back = [this, ia, io]() {
        Slot& so = at(io);
        Slot& xa = at(ia);
        if (!xa.requires_grad) return;
        double g = so.grad[0] / static_cast<double>(xa.value.size());
        for (auto& gv : xa.grad) gv += g;
    };
    return out;
}

Tensor Tape::mape_loss(Tensor pred, Tensor truth) {
    const Slot& sp = at(pred.idx_);
    const Slot& st = at(truth.idx_);
    if (sp.rows != st.rows || sp.cols != st.cols) throw ValidationError("mape_loss: shape mismatch");
    if (sp.value.empty()) throw ValidationError("mape_loss: empty tensors");
    for (double t : st.value)
        if (t == 0.0) throw ValidationError("mape_loss: truth entries must be nonzero");
    double sum = 0;
    for (std::size_t i = 0; i < sp.value.size(); ++i)
        sum += std::abs(sp.value[i] - st.value[i]) / std::abs(st.value[i]);
    Slot s;
    s.rows = 1;
    s.cols = 1;
    s.value = {sum / static_cast<double>(sp.value.size())};
    s.requires_grad = sp.requires_grad;
    int ip = pred.idx_, it = truth.idx_;
    Tensor out = push(std::move(s));
    int io = out.idx_;
    at(io).back = [this, ip, it, io]() {
        Slot& so = at(io);
        Slot& xp = at(ip);
        Slot& xt = at(it);
        if (!xp.requires_grad) return;
        double g = so.grad[0] / static_cast<double>(xp.value.size());
        for (std::size_t i = 0; i < xp.value.size(); ++i) {
            double d = xp.value[i] - xt.value[i];
            double sign = d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0);
            xp.grad[i] += g * sign / std::abs(xt.value[i]);
        }
    };
    return out;
}

void Tape::backward(Tensor loss) {
    Slot& s = at(loss.idx_);
    if (s.rows != 1 || s.cols != 1) throw ValidationError("backward: loss must be 1x1");
    s.grad[0] = 1.0;
    for (int i = loss.idx_; i >= 0; --i) {
        Slot& slot = at(i);
        if (slot.back && slot.requires_grad) slot.back();
    }
}

void adam_step(std::vector<double>& params, const std::vector<double>& grads, AdamState& state,
               double lr, double beta1, double beta2, double eps) {
    if (params.size() != grads.size()) throw ValidationError("adam_step: shape mismatch");
    if (state.m.empty()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    if (state.m.size() != params.size()) throw ValidationError("adam_step: stale state size");
    ++state.t;
    double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
    double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grads[i];
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grads[i] * grads[i];
        double mhat = state.m[i] / bc1;
        double vhat = state.v[i] / bc2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

} // namespace powergear
