#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "msct/common.hpp"

namespace msct {

/*** Dense row-major tensor of doubles. Shape dims are positive; value count
 * equals the product of dims. */
struct Tensor {
    std::vector<int> shape;
    std::vector<double> v;

    Tensor() = default;
    explicit Tensor(std::vector<int> s);
    Tensor(std::vector<int> s, std::vector<double> data);

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
    static Tensor scalar(double x) { return Tensor({1}, {x}); }

    std::size_t numel() const { return v.size(); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
    int rank() const { return static_cast<int>(shape.size()); }
    void check_finite(const std::string& where) const;
};

std::string shape_str(const std::vector<int>& s);
std::size_t shape_numel(const std::vector<int>& s);

/*** Reverse-mode tape. Nodes are appended in forward (topological) order;
 * backward() walks them in reverse. One tape per thread; closures address
 * nodes by id so the node vector may reallocate while building. */
class Tape {
public:
    using BackFn = std::function<void(Tape&, int self)>;

    int push(Tensor value, BackFn back = {});
    int leaf(const Tensor& value) { return push(value); }

    const Tensor& val(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    /*** Gradient buffer, zero-allocated on first touch. */
    Tensor& grad(int id);
    bool has_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad_alloc; }

    /*** Seed d(root)/d(root) = 1 and propagate; root must be scalar. */
    void backward(int root);

    std::size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool grad_alloc = false;
        BackFn back;
    };
    std::vector<Node> nodes_;
};

enum class Pad { same, valid };

// ---- elementwise and arithmetic ----
int add(Tape& t, int a, int b);         // same shape
int sub(Tape& t, int a, int b);         // same shape
int mul(Tape& t, int a, int b);         // broadcast: equal rank, dims equal or 1
int scale(Tape& t, int a, double c);
int relu(Tape& t, int a);
int sigmoid(Tape& t, int a);
int mean_all(Tape& t, int a);           // -> scalar
int reshape(Tape& t, int a, std::vector<int> shape);

// ---- structure ----
int concat0(Tape& t, const std::vector<int>& ids);      // along dim 0
int slice0(Tape& t, int a, int c0, int c1);             // rows [c0, c1) of dim 0

// ---- neural primitives ----
/*** Convolution along one axis of x = [Cin, d1, ..., dk], mixing dim 0.
 * w = [Cout, Cin, K], b = [Cout] or -1 for none. axis >= 1. Pad::same keeps
 * the axis length (zero padding, odd K); Pad::valid shrinks it by K-1. */
int conv_axis(Tape& t, int x, int w, int b, int axis, Pad pad);

/*** 2-D convolution, x = [Cin, H, W], w = [Cout, Cin, KH, KW], 'same'
 * zero padding, odd kernels. */
int conv2d(Tape& t, int x, int w, int b);

/*** Fully connected: x = [Cin], w = [Cout, Cin], b = [Cout] or -1. */
int linear(Tape& t, int x, int w, int b);

/*** Per-channel normalization over all non-channel dims with learned
 * gamma/beta [C]; population statistics of the sample itself (deterministic,
 * batch-free). */
int batchnorm(Tape& t, int x, int gamma, int beta, double eps = 1e-5);

int global_max(Tape& t, int x);      // [C, ...] -> [C], max over non-channel dims
int global_avg(Tape& t, int x);      // [C, ...] -> [C]
int channel_max(Tape& t, int x);     // [C, ...] -> [1, ...], max over dim 0
int channel_avg(Tape& t, int x);     // [C, ...] -> [1, ...]

int avgpool2_axis(Tape& t, int x, int axis);                 // length -> ceil(L/2)
int upsample2_axis(Tape& t, int x, int axis, int target);    // nearest, target in {2L-1, 2L}

int mse(Tape& t, int a, int b);      // mean squared difference -> scalar

/*** Central-difference verification harness. `build` wires inputs into a
 * scalar loss on a fresh tape. Failures are reported, never thrown. */
struct GradCheckReport {
    double max_rel_err = 0.0;
    int worst_input = -1;
    std::size_t worst_index = 0;
    double analytic = 0.0, numeric = 0.0;
    bool pass(double tol) const { return max_rel_err < tol; }
    std::string str() const;
};

GradCheckReport gradient_check(
    const std::function<int(Tape&, const std::vector<int>&)>& build,
    std::vector<Tensor> inputs, double step = 1e-5);

}  // namespace msct
