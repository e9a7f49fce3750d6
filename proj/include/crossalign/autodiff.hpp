#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "crossalign/errors.hpp"
#include "crossalign/rng.hpp"

namespace crossalign::ad {

// Dense row-major float64 tensor. No views, no strides: every op copies.
// Values are immutable once a tensor has been recorded on a graph; only the
// grad buffer is written afterwards.
struct Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

struct Tensor {
    std::vector<int> shape;       // positive extents
    std::vector<double> values;   // row-major, size == product(shape)
    bool requires_grad = false;
    std::vector<double> grad;     // same size as values once allocated

    int size() const { return static_cast<int>(values.size()); }
    int rank() const { return static_cast<int>(shape.size()); }
    int rows() const { return shape[0]; }
    int cols() const { return shape[static_cast<size_t>(rank()) - 1]; }

    void ensure_grad();           // allocate + zero the grad buffer
    void zero_grad();

    static TensorPtr zeros(std::vector<int> shape, bool requires_grad = false);
    static TensorPtr full(std::vector<int> shape, double v, bool requires_grad = false);
    static TensorPtr from(std::vector<int> shape, std::vector<double> values,
                          bool requires_grad = false);
    // Uniform init in [lo, hi), the project-wide weight init.
    static TensorPtr uniform(std::vector<int> shape, Rng& rng, double lo, double hi,
                             bool requires_grad = true);
};

// Reverse-mode tape. Ops validate shapes, compute values immediately and push
// a backward closure; backward() replays the closures in reverse and then
// clears the tape, so a graph can be reused as if freshly constructed.
//
// Broadcast is restricted to one pattern: a length-n vector against the rows
// of an [m x n] matrix (add/mul). Everything else is a DimensionError.
class Graph {
  public:
    Graph() = default;
    explicit Graph(bool recording) : recording_(recording) {}

    // Opt-in NaN/Inf screening at op boundaries.
    void set_check_finite(bool on) { check_finite_ = on; }
    bool recording() const { return recording_; }
    size_t tape_size() const { return tape_.size(); }

    // --- core ops ---
    TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);
    TensorPtr add(const TensorPtr& a, const TensorPtr& b);
    TensorPtr sub(const TensorPtr& a, const TensorPtr& b);
    TensorPtr mul(const TensorPtr& a, const TensorPtr& b);
    TensorPtr tanh(const TensorPtr& x);
    TensorPtr sigmoid(const TensorPtr& x);
    TensorPtr relu(const TensorPtr& x);
    TensorPtr exp(const TensorPtr& x);
    TensorPtr log(const TensorPtr& x);
    TensorPtr clamp(const TensorPtr& x, double lo, double hi);
    TensorPtr scale(const TensorPtr& x, double c);
    TensorPtr add_const(const TensorPtr& x, double c);
    TensorPtr rsub_const(double c, const TensorPtr& x);   // c - x
    TensorPtr sum(const TensorPtr& x);
    TensorPtr mean(const TensorPtr& x);

    // Row-wise softmax of v / gamma. Rank-1 or rank-2. gamma > 0.
    TensorPtr softmax_temperature(const TensorPtr& v, double gamma);

    // Mean of -log softmax(logits)[target] over unmasked rows.
    // logits: [n x V]; targets, mask: length n. Masked rows contribute 0.
    TensorPtr cross_entropy_logits(const TensorPtr& logits, const std::vector<int>& targets,
                                   const std::vector<char>& mask);

    // --- structure ops ---
    TensorPtr reshape(const TensorPtr& x, std::vector<int> shape);
    TensorPtr concat_cols(const TensorPtr& a, const TensorPtr& b);
    TensorPtr repeat_rows(const TensorPtr& v, int m);            // [n] -> [m x n]
    TensorPtr mask_rows(const TensorPtr& x, const std::vector<double>& row_scale);
    TensorPtr stack_time(const std::vector<TensorPtr>& steps);   // T x [b x d] -> [b x T x d]
    TensorPtr embed_rows(const TensorPtr& table, const std::vector<int>& ids);

    // --- convolution path ---
    // seq [b x T x d], w [k x d x F], bias [F] -> [b x (T-k+1) x F]
    TensorPtr conv1d_time(const TensorPtr& seq, const TensorPtr& w, const TensorPtr& bias);
    // Max over the first valid_counts[i] time positions of row i (all T when
    // valid_counts is empty). Ties resolve to the earliest position.
    TensorPtr max_over_time(const TensorPtr& x, const std::vector<int>& valid_counts = {});

    // Inverted dropout; identity when train_mode is false. Mask drawn from rng.
    TensorPtr dropout(const TensorPtr& x, double rate, Rng& rng, bool train_mode);

    // Seeds d(loss)/d(loss) = 1, replays the tape in reverse, then clears it.
    void backward(const TensorPtr& loss);
    void clear();

  private:
    TensorPtr make_out(std::vector<int> shape, bool requires_grad);
    void record(std::function<void()> fn) { if (recording_) tape_.push_back(std::move(fn)); }
    void screen(const TensorPtr& t, const char* op) const;

    std::vector<std::function<void()>> tape_;
    bool recording_ = true;
    bool check_finite_ = false;
};

// Central finite-difference check of d(f)/d(wrt). f rebuilds the forward pass
// from current tensor values and must be deterministic. Returns
// max_i |analytic_i - numeric_i| / max(1, |analytic_i|).
double grad_check(const std::function<TensorPtr(Graph&)>& f, const TensorPtr& wrt,
                  double h = 1e-5);

// Comparison half of grad_check, exposed so tests can feed deliberately
// corrupted analytic gradients (fault injection).
double max_rel_error(const std::vector<double>& analytic, const std::vector<double>& numeric);

}  // namespace crossalign::ad
