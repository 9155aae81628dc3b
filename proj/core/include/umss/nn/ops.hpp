#pragma once

#include "umss/nn/graph.hpp"

namespace umss::nn {

// Elementwise
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var relu(const Var& a);
Var tanh_op(const Var& a);
Var abs_op(const Var& a);
Var square(const Var& a);
// log(max(x, floor)); the clamp keeps cross-entropy finite at zero probability.
Var log_clamped(const Var& a, double floor);

// Reductions
Var sum_all(const Var& a);
Var mean_all(const Var& a);
// Euclidean distance between two same-shape tensors; eps keeps the sqrt
// differentiable when the tensors coincide.
Var l2_distance(const Var& a, const Var& b, double eps = 1e-24);

// Shape
Var reshape(const Var& a, std::vector<int> shape);
Var select_row(const Var& a, int row);                 // [R,C] -> [C]
Var stack_rows(const std::vector<Var>& rows);          // k x [C] -> [k,C]
Var slice_last(const Var& a, int start, int len);      // slice of last dim
Var pad_last(const Var& a, int new_size);              // zero-pad last dim
Var crop_last(const Var& a, int new_size);
Var concat_channels(const Var& a, const Var& b);       // [N,Ca,T,F]+[N,Cb,T,F]

// Linear algebra
Var matmul(const Var& a, const Var& b);                // [...,m,k] x [k,n]
Var linear(const Var& x, const Var& w, const Var& b);  // [...,in] -> [...,out]

// Feature maps, layout [N, C, T, F]. With circular_t the time axis wraps
// instead of zero-padding, making temporal processing translation-closed
// over periodic inputs.
Var conv2d(const Var& x, const Var& w, const Var& b, int pad_t, int pad_f,
           bool circular_t = false);
Var maxpool2d(const Var& x, int pool_t, int pool_f);
Var upsample_freq(const Var& x, int factor);
Var batch_norm(const Var& x, const Var& gamma, const Var& beta,
               Tensor* running_mean, Tensor* running_var,
               bool training, double momentum = 0.1, double eps = 1e-5);
// Per-channel modulation, g/b indexed [N,C]: y = g*x + b broadcast over (T,F).
Var film_channel(const Var& x, const Var& g, const Var& b);
// Per-frame modulation, g/b indexed [N,T,C]: broadcast over F.
Var film_time(const Var& x, const Var& g, const Var& b);

Var softmax_last(const Var& a);
Var mean_time(const Var& a);                           // [N,T,M] -> [N,M]
Var frame_features(const Var& x);                      // [N,C,T,F] -> [N,T,C*F]

// Relabel a node for structural audits without changing semantics.
inline Var tag(const Var& v, const char* label) {
    v->op = label;
    return v;
}

} // namespace umss::nn
