#ifndef POWERGEAR_TENSOR_HPP
#define POWERGEAR_TENSOR_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include "powergear/seeding.hpp"

namespace powergear {

class Tape;

/// Lightweight handle to a 2-D tensor slot on a tape. Scalars are 1x1,
/// row vectors 1xN. 64-bit floats throughout.
class Tensor {
public:
    Tensor() = default;
    Tensor(Tape* tape, int idx) : tape_(tape), idx_(idx) {}

    int rows() const;
    int cols() const;
    std::size_t size() const { return static_cast<std::size_t>(rows()) * cols(); }
    const std::vector<double>& value() const;
    const std::vector<double>& grad() const;
    double scalar() const; // value()[0] of a 1x1 tensor
    bool valid() const { return tape_ != nullptr; }
    int index() const { return idx_; }

private:
    friend class Tape;
    Tape* tape_ = nullptr;
    int idx_ = -1;
};

/// Reverse-mode tape: ops append slots in topological order, backward()
/// sweeps once in reverse. One tape per forward pass, confined to a
/// single thread. Slot storage is recycled through a thread-local pool,
/// so building a tape per batch stays cheap.
class Tape {
public:
    Tape() = default;
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Tensor leaf(int rows, int cols, std::vector<double> value, bool requires_grad);
    Tensor constant(int rows, int cols, std::vector<double> value) {
        return leaf(rows, cols, std::move(value), false);
    }
    Tensor zeros(int rows, int cols) {
        return constant(rows, cols, std::vector<double>(static_cast<std::size_t>(rows) * cols, 0.0));
    }

    /// a[m x k] * b[k x n]
    Tensor matmul(Tensor a, Tensor b);
    /// elementwise sum, same shape
    Tensor add(Tensor a, Tensor b);
    /// a[m x n] + bias[1 x n] broadcast over rows
    Tensor add_bias(Tensor a, Tensor bias);
    Tensor relu(Tensor a);
    /// training-mode inverted dropout (keep prob 1-p, 1/(1-p) scaling)
    Tensor dropout(Tensor a, double p, Rng& rng);
    /// [m x p] || [m x q] -> [m x (p+q)]
    Tensor concat_cols(Tensor a, Tensor b);
    /// row j of the result is the sum of value rows i with index[i] == j
    Tensor scatter_sum(Tensor values, const std::vector<int>& index, int out_rows);
    Tensor mean_all(Tensor a);
    /// mean(|pred - truth| / |truth|); truth entries must be nonzero
    Tensor mape_loss(Tensor pred, Tensor truth);

    /// Seeds d(loss)/d(loss)=1 and sweeps the tape once in reverse.
    void backward(Tensor loss);

    int num_slots() const { return static_cast<int>(slots_.size()); }

private:
    friend class Tensor;
    struct Slot {
        int rows = 0, cols = 0;
        std::vector<double> value;
        std::vector<double> grad;
        bool requires_grad = false;
        std::function<void()> back; // empty for leaves
    };
    Slot& at(int idx) { return slots_[static_cast<std::size_t>(idx)]; }
    const Slot& at(int idx) const { return slots_[static_cast<std::size_t>(idx)]; }
    Tensor push(Slot s);

    std::vector<Slot> slots_;
};

/// c[m x n] += a[m x k] * b[k x n]
void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n);
/// c[m x k] += a[m x n] * b[k x n]^T
void matmul_nt(const double* a, const double* b, double* c, int m, int n, int k);
/// c[k x n] += a[m x k]^T * b[m x n]
void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n);

/// Adam with bias correction over a flat parameter vector.
struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    long long t = 0;
};

void adam_step(std::vector<double>& params, const std::vector<double>& grads, AdamState& state,
               double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

} // namespace powergear

#endif
