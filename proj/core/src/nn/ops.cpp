#include "umss/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace umss::nn {

namespace {

void check_same_shape(const Var& a, const Var& b, const char* op) {
    require(a->value.same_shape(b->value),
            std::string(op) + ": shape mismatch " + shape_str(a->value.shape()) +
                " vs " + shape_str(b->value.shape()));
}

// Unary elementwise with derivative expressed from input x and output y.
template <typename F, typename DF>
Var unary(const Var& a, const char* op, F f, DF df) {
    Tensor out(a->value.shape());
    const double* x = a->value.data();
    double* y = out.data();
    const int64_t n = out.size();
#pragma omp parallel for schedule(static) if (n > 16384)
    for (int64_t i = 0; i < n; ++i) y[i] = f(x[i]);
    return make_op(std::move(out), {a}, op, [a, df](Node& node) {
        if (!a->requires_grad) return;
        const double* x = a->value.data();
        const double* y = node.value.data();
        const double* g = node.grad.data();
        double* ga = a->grad.data();
        const int64_t n = node.value.size();
#pragma omp parallel for schedule(static) if (n > 16384)
        for (int64_t i = 0; i < n; ++i) ga[i] += g[i] * df(x[i], y[i]);
    });
}

} // namespace

Var add(const Var& a, const Var& b) {
    check_same_shape(a, b, "add");
    Tensor out(a->value.shape());
    out.array() = a->value.array() + b->value.array();
    return make_op(std::move(out), {a, b}, "add", [a, b](Node& node) {
        if (a->requires_grad) a->grad.array() += node.grad.array();
        if (b->requires_grad) b->grad.array() += node.grad.array();
    });
}

Var sub(const Var& a, const Var& b) {
    check_same_shape(a, b, "sub");
    Tensor out(a->value.shape());
    out.array() = a->value.array() - b->value.array();
    return make_op(std::move(out), {a, b}, "sub", [a, b](Node& node) {
        if (a->requires_grad) a->grad.array() += node.grad.array();
        if (b->requires_grad) b->grad.array() -= node.grad.array();
    });
}

Var mul(const Var& a, const Var& b) {
    check_same_shape(a, b, "mul");
    Tensor out(a->value.shape());
    out.array() = a->value.array() * b->value.array();
    return make_op(std::move(out), {a, b}, "mul", [a, b](Node& node) {
        if (a->requires_grad) a->grad.array() += node.grad.array() * b->value.array();
        if (b->requires_grad) b->grad.array() += node.grad.array() * a->value.array();
    });
}

Var scale(const Var& a, double s) {
    Tensor out(a->value.shape());
    out.array() = a->value.array() * s;
    return make_op(std::move(out), {a}, "scale", [a, s](Node& node) {
        if (a->requires_grad) a->grad.array() += node.grad.array() * s;
    });
}

Var add_scalar(const Var& a, double s) {
    Tensor out(a->value.shape());
    out.array() = a->value.array() + s;
    return make_op(std::move(out), {a}, "add_scalar", [a](Node& node) {
        if (a->requires_grad) a->grad.array() += node.grad.array();
    });
}

Var relu(const Var& a) {
    return unary(
        a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
        [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var tanh_op(const Var& a) {
    return unary(
        a, "tanh", [](double x) { return std::tanh(x); },
        [](double, double y) { return 1.0 - y * y; });
}

Var abs_op(const Var& a) {
    return unary(
        a, "abs", [](double x) { return std::fabs(x); },
        [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var square(const Var& a) {
    return unary(
        a, "square", [](double x) { return x * x; },
        [](double x, double) { return 2.0 * x; });
}

Var log_clamped(const Var& a, double floor) {
    return unary(
        a, "log", [floor](double x) { return std::log(std::max(x, floor)); },
        [floor](double x, double) { return x > floor ? 1.0 / x : 0.0; });
}

Var sum_all(const Var& a) {
    Tensor out = Tensor::scalar(a->value.array().sum());
    return make_op(std::move(out), {a}, "sum", [a](Node& node) {
        if (a->requires_grad) a->grad.array() += node.grad[0];
    });
}

Var mean_all(const Var& a) {
    const double inv = 1.0 / static_cast<double>(a->value.size());
    Tensor out = Tensor::scalar(a->value.array().sum() * inv);
    return make_op(std::move(out), {a}, "mean", [a, inv](Node& node) {
        if (a->requires_grad) a->grad.array() += node.grad[0] * inv;
    });
}

Var l2_distance(const Var& a, const Var& b, double eps) {
    check_same_shape(a, b, "l2_distance");
    const int64_t n = a->value.size();
    double ss = eps;
    for (int64_t i = 0; i < n; ++i) {
        double d = a->value[i] - b->value[i];
        ss += d * d;
    }
    const double dist = std::sqrt(ss);
    Tensor out = Tensor::scalar(dist);
    return make_op(std::move(out), {a, b}, "l2_distance", [a, b, dist](Node& node) {
        const double g = node.grad[0] / dist;
        const int64_t n = a->value.size();
        for (int64_t i = 0; i < n; ++i) {
            double d = (a->value[i] - b->value[i]) * g;
            if (a->requires_grad) a->grad[i] += d;
            if (b->requires_grad) b->grad[i] -= d;
        }
    });
}

Var reshape(const Var& a, std::vector<int> shape) {
    Tensor out = a->value.reshaped(std::move(shape));
    return make_op(std::move(out), {a}, "reshape", [a](Node& node) {
        if (a->requires_grad) a->grad.array() += node.grad.array();
    });
}

Var select_row(const Var& a, int row) {
    require(a->value.ndim() == 2, "select_row expects a 2-D tensor");
    const int rows = a->value.dim(0), cols = a->value.dim(1);
    require(row >= 0 && row < rows, "select_row: row out of range");
    Tensor out({cols});
    std::memcpy(out.data(), a->value.data() + static_cast<int64_t>(row) * cols,
                static_cast<size_t>(cols) * sizeof(double));
    return make_op(std::move(out), {a}, "select_row", [a, row, cols](Node& node) {
        if (!a->requires_grad) return;
        double* ga = a->grad.data() + static_cast<int64_t>(row) * cols;
        const double* g = node.grad.data();
        for (int i = 0; i < cols; ++i) ga[i] += g[i];
    });
}

Var stack_rows(const std::vector<Var>& rows) {
    require(!rows.empty(), "stack_rows: empty input");
    const int cols = static_cast<int>(rows[0]->value.size());
    for (const Var& r : rows)
        require(r->value.ndim() == 1 && r->value.size() == cols,
                "stack_rows: rows must be 1-D and equally sized");
    Tensor out({static_cast<int>(rows.size()), cols});
    for (size_t i = 0; i < rows.size(); ++i)
        std::memcpy(out.data() + static_cast<int64_t>(i) * cols, rows[i]->value.data(),
                    static_cast<size_t>(cols) * sizeof(double));
    std::vector<Var> parents = rows;
    return make_op(std::move(out), std::move(parents), "stack_rows", [cols](Node& node) {
        for (size_t i = 0; i < node.parents.size(); ++i) {
            Var& p = node.parents[i];
            if (!p->requires_grad) continue;
            const double* g = node.grad.data() + static_cast<int64_t>(i) * cols;
            for (int j = 0; j < cols; ++j) p->grad[j] += g[j];
        }
    });
}

Var slice_last(const Var& a, int start, int len) {
    const auto& shape = a->value.shape();
    require(!shape.empty(), "slice_last on empty tensor");
    const int last = shape.back();
    require(start >= 0 && len > 0 && start + len <= last, "slice_last out of range");
    std::vector<int> out_shape = shape;
    out_shape.back() = len;
    Tensor out(out_shape);
    const int64_t rows = a->value.size() / last;
    for (int64_t r = 0; r < rows; ++r)
        std::memcpy(out.data() + r * len, a->value.data() + r * last + start,
                    static_cast<size_t>(len) * sizeof(double));
    return make_op(std::move(out), {a}, "slice_last", [a, start, len, last](Node& node) {
        if (!a->requires_grad) return;
        const int64_t rows = a->value.size() / last;
        for (int64_t r = 0; r < rows; ++r) {
            double* ga = a->grad.data() + r * last + start;
            const double* g = node.grad.data() + r * len;
            for (int i = 0; i < len; ++i) ga[i] += g[i];
        }
    });
}

Var pad_last(const Var& a, int new_size) {
    const auto& shape = a->value.shape();
    const int last = shape.back();
    require(new_size >= last, "pad_last: target smaller than input");
    if (new_size == last) return a;
    std::vector<int> out_shape = shape;
    out_shape.back() = new_size;
    Tensor out(out_shape);
    const int64_t rows = a->value.size() / last;
    for (int64_t r = 0; r < rows; ++r)
        std::memcpy(out.data() + r * new_size, a->value.data() + r * last,
                    static_cast<size_t>(last) * sizeof(double));
    return make_op(std::move(out), {a}, "pad_last", [a, last, new_size](Node& node) {
        if (!a->requires_grad) return;
        const int64_t rows = a->value.size() / last;
        for (int64_t r = 0; r < rows; ++r) {
            double* ga = a->grad.data() + r * last;
            const double* g = node.grad.data() + r * new_size;
            for (int i = 0; i < last; ++i) ga[i] += g[i];
        }
    });
}

Var crop_last(const Var& a, int new_size) {
    const int last = a->value.shape().back();
    require(new_size <= last, "crop_last: target larger than input");
    if (new_size == last) return a;
    return slice_last(a, 0, new_size);
}

Var concat_channels(const Var& a, const Var& b) {
    const auto& sa = a->value.shape();
    const auto& sb = b->value.shape();
    require(sa.size() == 4 && sb.size() == 4, "concat_channels expects [N,C,T,F]");
    require(sa[0] == sb[0] && sa[2] == sb[2] && sa[3] == sb[3],
            "concat_channels: incompatible shapes");
    const int n = sa[0], ca = sa[1], cb = sb[1], t = sa[2], f = sa[3];
    const int64_t plane = static_cast<int64_t>(t) * f;
    Tensor out({n, ca + cb, t, f});
    for (int i = 0; i < n; ++i) {
        std::memcpy(out.data() + (static_cast<int64_t>(i) * (ca + cb)) * plane,
                    a->value.data() + static_cast<int64_t>(i) * ca * plane,
                    static_cast<size_t>(ca * plane) * sizeof(double));
        std::memcpy(out.data() + (static_cast<int64_t>(i) * (ca + cb) + ca) * plane,
                    b->value.data() + static_cast<int64_t>(i) * cb * plane,
                    static_cast<size_t>(cb * plane) * sizeof(double));
    }
    return make_op(std::move(out), {a, b}, "concat", [a, b, n, ca, cb, plane](Node& node) {
        for (int i = 0; i < n; ++i) {
            const double* g = node.grad.data() + static_cast<int64_t>(i) * (ca + cb) * plane;
            if (a->requires_grad) {
                double* ga = a->grad.data() + static_cast<int64_t>(i) * ca * plane;
                for (int64_t j = 0; j < ca * plane; ++j) ga[j] += g[j];
            }
            if (b->requires_grad) {
                double* gb = b->grad.data() + static_cast<int64_t>(i) * cb * plane;
                const double* gsrc = g + ca * plane;
                for (int64_t j = 0; j < cb * plane; ++j) gb[j] += gsrc[j];
            }
        }
    });
}

Var matmul(const Var& a, const Var& b) {
    const auto& sa = a->value.shape();
    const auto& sb = b->value.shape();
    require(sa.size() >= 2 && sb.size() == 2, "matmul expects [...,m,k] x [k,n]");
    const int k = sa.back();
    require(k == sb[0], "matmul inner dimension mismatch");
    const int n = sb[1];
    const int64_t rows = a->value.size() / k;
    std::vector<int> out_shape(sa.begin(), sa.end() - 1);
    out_shape.push_back(n);
    Tensor out(out_shape);
    out.matrix(rows, n).noalias() = a->value.matrix(rows, k) * b->value.matrix(k, n);
    return make_op(std::move(out), {a, b}, "matmul", [a, b, rows, k, n](Node& node) {
        auto g = node.grad.matrix(rows, n);
        if (a->requires_grad)
            a->grad.matrix(rows, k).noalias() += g * b->value.matrix(k, n).transpose();
        if (b->requires_grad)
            b->grad.matrix(k, n).noalias() += a->value.matrix(rows, k).transpose() * g;
    });
}

Var linear(const Var& x, const Var& w, const Var& b) {
    const auto& sx = x->value.shape();
    const auto& sw = w->value.shape();
    require(sw.size() == 2, "linear: weight must be [in,out]");
    const int in = sw[0], out_dim = sw[1];
    require(sx.back() == in, "linear: input feature size mismatch");
    require(b->value.size() == out_dim, "linear: bias size mismatch");
    const int64_t rows = x->value.size() / in;
    std::vector<int> out_shape(sx.begin(), sx.end() - 1);
    out_shape.push_back(out_dim);
    Tensor out(out_shape);
    auto om = out.matrix(rows, out_dim);
    om.noalias() = x->value.matrix(rows, in) * w->value.matrix(in, out_dim);
    om.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b->value.data(), out_dim);
    return make_op(std::move(out), {x, w, b}, "linear", [x, w, b, rows, in, out_dim](Node& node) {
        auto g = node.grad.matrix(rows, out_dim);
        if (x->requires_grad)
            x->grad.matrix(rows, in).noalias() += g * w->value.matrix(in, out_dim).transpose();
        if (w->requires_grad)
            w->grad.matrix(in, out_dim).noalias() += x->value.matrix(rows, in).transpose() * g;
        if (b->requires_grad) {
            // Fixed-order accumulation; see the conv2d bias note.
            for (int64_t r = 0; r < rows; ++r) {
                const double* row = node.grad.data() + r * out_dim;
                for (int j = 0; j < out_dim; ++j) b->grad[j] += row[j];
            }
        }
    });
}

namespace {

// Scatter a [C*kh*kw, oT*oF] column matrix for one sample. Row-contiguous
// copies keep this memory bound rather than loop bound.
void im2col(const double* x, int c_in, int t_in, int f_in, int kh, int kw,
            int pad_t, int pad_f, int o_t, int o_f, bool circular_t, double* col) {
    const int64_t o_plane = static_cast<int64_t>(o_t) * o_f;
    for (int c = 0; c < c_in; ++c) {
        const double* xc = x + static_cast<int64_t>(c) * t_in * f_in;
        for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
                double* row = col + ((static_cast<int64_t>(c) * kh + ky) * kw + kx) * o_plane;
                for (int ot = 0; ot < o_t; ++ot) {
                    double* dst = row + static_cast<int64_t>(ot) * o_f;
                    int ts = ot + ky - pad_t;
                    if (circular_t) ts = ((ts % t_in) + t_in) % t_in;
                    if (ts < 0 || ts >= t_in) {
                        std::fill(dst, dst + o_f, 0.0);
                        continue;
                    }
                    const int f0 = kx - pad_f; // source f for of = 0
                    const int lo = std::max(0, -f0);
                    const int hi = std::min(o_f, f_in - f0);
                    if (lo > 0) std::fill(dst, dst + lo, 0.0);
                    if (hi > lo)
                        std::memcpy(dst + lo, xc + static_cast<int64_t>(ts) * f_in + f0 + lo,
                                    static_cast<size_t>(hi - lo) * sizeof(double));
                    if (hi < o_f) std::fill(dst + std::max(hi, lo), dst + o_f, 0.0);
                }
            }
        }
    }
}

void col2im_accumulate(const double* col, int c_in, int t_in, int f_in, int kh, int kw,
                       int pad_t, int pad_f, int o_t, int o_f, bool circular_t, double* dx) {
    const int64_t o_plane = static_cast<int64_t>(o_t) * o_f;
    for (int c = 0; c < c_in; ++c) {
        double* xc = dx + static_cast<int64_t>(c) * t_in * f_in;
        for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
                const double* row = col + ((static_cast<int64_t>(c) * kh + ky) * kw + kx) * o_plane;
                for (int ot = 0; ot < o_t; ++ot) {
                    int ts = ot + ky - pad_t;
                    if (circular_t) ts = ((ts % t_in) + t_in) % t_in;
                    if (ts < 0 || ts >= t_in) continue;
                    const double* src = row + static_cast<int64_t>(ot) * o_f;
                    const int f0 = kx - pad_f;
                    const int lo = std::max(0, -f0);
                    const int hi = std::min(o_f, f_in - f0);
                    double* dst = xc + static_cast<int64_t>(ts) * f_in + f0;
                    for (int of = lo; of < hi; ++of) dst[of] += src[of];
                }
            }
        }
    }
}

AlignedDoubles& conv_scratch(int which, size_t n) {
    static thread_local AlignedDoubles bufs[2];
    if (bufs[which].size() < n) bufs[which].resize(n);
    return bufs[which];
}

} // namespace

Var conv2d(const Var& x, const Var& w, const Var& b, int pad_t, int pad_f, bool circular_t) {
    const auto& sx = x->value.shape();
    const auto& sw = w->value.shape();
    require(sx.size() == 4, "conv2d input must be [N,C,T,F]");
    require(sw.size() == 4, "conv2d weight must be [Cout,Cin,kh,kw]");
    const int n = sx[0], c_in = sx[1], t_in = sx[2], f_in = sx[3];
    const int c_out = sw[0], kh = sw[2], kw = sw[3];
    require(sw[1] == c_in, "conv2d channel mismatch");
    require(b->value.size() == c_out, "conv2d bias size mismatch");
    const int o_t = t_in + 2 * pad_t - kh + 1;
    const int o_f = f_in + 2 * pad_f - kw + 1;
    require(o_t > 0 && o_f > 0, "conv2d output would be empty");
    const int64_t o_plane = static_cast<int64_t>(o_t) * o_f;
    const int64_t krows = static_cast<int64_t>(c_in) * kh * kw;
    const bool pointwise = (kh == 1 && kw == 1 && pad_t == 0 && pad_f == 0);

    Tensor out({n, c_out, o_t, o_f});
    CMapMat wm(w->value.data(), c_out, krows);
    Eigen::Map<const Eigen::VectorXd> bias(b->value.data(), c_out);
    // Samples are independent; parallelize across the batch rather than
    // inside the (small) per-sample GEMMs.
#pragma omp parallel if (n > 1)
    {
        double* col = pointwise ? nullptr
                                : conv_scratch(0, static_cast<size_t>(krows * o_plane)).data();
#pragma omp for schedule(static)
        for (int i = 0; i < n; ++i) {
            const double* xi = x->value.data() + static_cast<int64_t>(i) * c_in * t_in * f_in;
            MapMat om(out.data() + static_cast<int64_t>(i) * c_out * o_plane, c_out, o_plane);
            if (pointwise) {
                CMapMat cm(xi, c_in, o_plane);
                om.noalias() = wm * cm;
            } else {
                im2col(xi, c_in, t_in, f_in, kh, kw, pad_t, pad_f, o_t, o_f, circular_t, col);
                CMapMat cm(col, krows, o_plane);
                om.noalias() = wm * cm;
            }
            om.colwise() += bias;
        }
    }

    auto bw = [x, w, b, n, c_in, t_in, f_in, c_out, kh, kw, pad_t, pad_f, o_t, o_f, o_plane,
               krows, pointwise, circular_t](Node& node) {
        CMapMat wm(w->value.data(), c_out, krows);
        // Per-sample weight/bias contributions land in scratch and are
        // reduced in sample order afterwards, keeping backward deterministic.
        const int64_t wsize = static_cast<int64_t>(c_out) * krows;
        std::vector<double> dw_scratch, db_scratch;
        if (w->requires_grad) dw_scratch.assign(static_cast<size_t>(n) * wsize, 0.0);
        if (b->requires_grad) db_scratch.assign(static_cast<size_t>(n) * c_out, 0.0);
#pragma omp parallel if (n > 1)
        {
            double* col = (!pointwise && w->requires_grad)
                              ? conv_scratch(0, static_cast<size_t>(krows * o_plane)).data()
                              : nullptr;
            double* dcol = (!pointwise && x->requires_grad)
                               ? conv_scratch(1, static_cast<size_t>(krows * o_plane)).data()
                               : nullptr;
#pragma omp for schedule(static)
            for (int i = 0; i < n; ++i) {
                const double* xi =
                    x->value.data() + static_cast<int64_t>(i) * c_in * t_in * f_in;
                CMapMat gm(node.grad.data() + static_cast<int64_t>(i) * c_out * o_plane, c_out,
                           o_plane);
                if (pointwise) {
                    if (w->requires_grad) {
                        CMapMat cm(xi, c_in, o_plane);
                        MapMat(dw_scratch.data() + static_cast<int64_t>(i) * wsize, c_out, krows)
                            .noalias() = gm * cm.transpose();
                    }
                    if (x->requires_grad) {
                        MapMat dxm(x->grad.data() + static_cast<int64_t>(i) * c_in * t_in * f_in,
                                   c_in, o_plane);
                        dxm.noalias() += wm.transpose() * gm;
                    }
                } else {
                    if (w->requires_grad) {
                        im2col(xi, c_in, t_in, f_in, kh, kw, pad_t, pad_f, o_t, o_f, circular_t,
                               col);
                        CMapMat cm(col, krows, o_plane);
                        MapMat(dw_scratch.data() + static_cast<int64_t>(i) * wsize, c_out, krows)
                            .noalias() = gm * cm.transpose();
                    }
                    if (x->requires_grad) {
                        MapMat dcm(dcol, krows, o_plane);
                        dcm.noalias() = wm.transpose() * gm;
                        col2im_accumulate(
                            dcol, c_in, t_in, f_in, kh, kw, pad_t, pad_f, o_t, o_f,
                            circular_t,
                            x->grad.data() + static_cast<int64_t>(i) * c_in * t_in * f_in);
                    }
                }
                if (b->requires_grad) {
                    // Explicit loop: redux kernels reorder summation based
                    // on destination alignment, which breaks bitwise
                    // reproducibility across allocations.
                    double* dbi = db_scratch.data() + static_cast<int64_t>(i) * c_out;
                    for (int r = 0; r < c_out; ++r) {
                        double acc = 0.0;
                        const double* row = node.grad.data() +
                                            (static_cast<int64_t>(i) * c_out + r) * o_plane;
                        for (int64_t j = 0; j < o_plane; ++j) acc += row[j];
                        dbi[r] = acc;
                    }
                }
            }
        }
        for (int i = 0; i < n; ++i) {
            if (w->requires_grad)
                MapArr(w->grad.data(), wsize) +=
                    CMapArr(dw_scratch.data() + static_cast<int64_t>(i) * wsize, wsize);
            if (b->requires_grad)
                MapArr(b->grad.data(), c_out) +=
                    CMapArr(db_scratch.data() + static_cast<int64_t>(i) * c_out, c_out);
        }
    };
    return make_op(std::move(out), {x, w, b}, "conv2d", std::move(bw));
}

Var maxpool2d(const Var& x, int pool_t, int pool_f) {
    const auto& sx = x->value.shape();
    require(sx.size() == 4, "maxpool2d input must be [N,C,T,F]");
    require(pool_t >= 1 && pool_f >= 1, "maxpool2d: bad pool size");
    const int n = sx[0], c = sx[1], t = sx[2], f = sx[3];
    const int o_t = t / pool_t, o_f = f / pool_f;
    require(o_t > 0 && o_f > 0, "maxpool2d output would be empty");
    Tensor out({n, c, o_t, o_f});
    auto argmax = std::make_shared<std::vector<int64_t>>(out.size());
    const double* xd = x->value.data();
    double* od = out.data();
#pragma omp parallel for schedule(static) collapse(2)
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch) {
            const int64_t base = (static_cast<int64_t>(i) * c + ch) * t * f;
            int64_t oi = (static_cast<int64_t>(i) * c + ch) * o_t * o_f;
            for (int ot = 0; ot < o_t; ++ot)
                for (int of = 0; of < o_f; ++of, ++oi) {
                    double best = -1e308;
                    int64_t best_idx = -1;
                    for (int pt = 0; pt < pool_t; ++pt) {
                        const int64_t rowbase = base + static_cast<int64_t>(ot * pool_t + pt) * f +
                                                static_cast<int64_t>(of) * pool_f;
                        for (int pf = 0; pf < pool_f; ++pf) {
                            double v = xd[rowbase + pf];
                            if (v > best) {
                                best = v;
                                best_idx = rowbase + pf;
                            }
                        }
                    }
                    od[oi] = best;
                    (*argmax)[static_cast<size_t>(oi)] = best_idx;
                }
        }
    return make_op(std::move(out), {x}, "maxpool", [x, argmax](Node& node) {
        if (!x->requires_grad) return;
        const double* g = node.grad.data();
        double* gx = x->grad.data();
        const int64_t m = node.value.size();
        // Pooling windows are disjoint, so the argmax targets are unique.
#pragma omp parallel for schedule(static) if (m > 16384)
        for (int64_t i = 0; i < m; ++i) gx[(*argmax)[static_cast<size_t>(i)]] += g[i];
    });
}

Var upsample_freq(const Var& x, int factor) {
    const auto& sx = x->value.shape();
    require(sx.size() == 4, "upsample_freq input must be [N,C,T,F]");
    require(factor >= 1, "upsample_freq: bad factor");
    const int n = sx[0], c = sx[1], t = sx[2], f = sx[3];
    const int o_f = f * factor;
    Tensor out({n, c, t, o_f});
    const double* xd = x->value.data();
    double* od = out.data();
    const int64_t rows = static_cast<int64_t>(n) * c * t;
#pragma omp parallel for schedule(static) if (rows > 64)
    for (int64_t r = 0; r < rows; ++r) {
        const double* src = xd + r * f;
        double* dst = od + r * o_f;
        for (int i = 0; i < f; ++i)
            for (int k = 0; k < factor; ++k) dst[i * factor + k] = src[i];
    }
    return make_op(std::move(out), {x}, "upsample_freq", [x, f, factor](Node& node) {
        if (!x->requires_grad) return;
        const int o_f = f * factor;
        const int64_t rows = x->value.size() / f;
        const double* g = node.grad.data();
        double* gx = x->grad.data();
#pragma omp parallel for schedule(static) if (rows > 64)
        for (int64_t r = 0; r < rows; ++r) {
            const double* src = g + r * o_f;
            double* dst = gx + r * f;
            for (int i = 0; i < f; ++i) {
                double s = 0.0;
                for (int k = 0; k < factor; ++k) s += src[i * factor + k];
                dst[i] += s;
            }
        }
    });
}

Var batch_norm(const Var& x, const Var& gamma, const Var& beta,
               Tensor* running_mean, Tensor* running_var,
               bool training, double momentum, double eps) {
    const auto& sx = x->value.shape();
    require(sx.size() == 4, "batch_norm input must be [N,C,T,F]");
    const int n = sx[0], c = sx[1], t = sx[2], f = sx[3];
    require(gamma->value.size() == c && beta->value.size() == c, "batch_norm param size");
    require(running_mean && running_var && running_mean->size() == c &&
                running_var->size() == c,
            "batch_norm running stats size");
    const int64_t plane = static_cast<int64_t>(t) * f;
    const int64_t count = static_cast<int64_t>(n) * plane;

    auto mean = std::make_shared<std::vector<double>>(c, 0.0);
    auto invstd = std::make_shared<std::vector<double>>(c, 0.0);
    if (training) {
#pragma omp parallel for schedule(static)
        for (int ch = 0; ch < c; ++ch) {
            double s = 0.0, ss = 0.0;
            for (int i = 0; i < n; ++i) {
                const double* p = x->value.data() + (static_cast<int64_t>(i) * c + ch) * plane;
                for (int64_t j = 0; j < plane; ++j) {
                    s += p[j];
                    ss += p[j] * p[j];
                }
            }
            const double m = s / static_cast<double>(count);
            const double var = std::max(ss / static_cast<double>(count) - m * m, 0.0);
            (*mean)[ch] = m;
            (*invstd)[ch] = 1.0 / std::sqrt(var + eps);
            (*running_mean)[ch] = (1.0 - momentum) * (*running_mean)[ch] + momentum * m;
            (*running_var)[ch] = (1.0 - momentum) * (*running_var)[ch] + momentum * var;
        }
    } else {
        for (int ch = 0; ch < c; ++ch) {
            (*mean)[ch] = (*running_mean)[ch];
            (*invstd)[ch] = 1.0 / std::sqrt((*running_var)[ch] + eps);
        }
    }

    Tensor out(sx);
#pragma omp parallel for schedule(static) collapse(2)
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch) {
            const double* p = x->value.data() + (static_cast<int64_t>(i) * c + ch) * plane;
            double* o = out.data() + (static_cast<int64_t>(i) * c + ch) * plane;
            const double m = (*mean)[ch], is = (*invstd)[ch];
            const double g = gamma->value[ch], bt = beta->value[ch];
            for (int64_t j = 0; j < plane; ++j) o[j] = (p[j] - m) * is * g + bt;
        }

    auto bw = [x, gamma, beta, mean, invstd, n, c, plane, count, training](Node& node) {
#pragma omp parallel for schedule(static)
        for (int ch = 0; ch < c; ++ch) {
            const double m = (*mean)[ch], is = (*invstd)[ch];
            const double g = gamma->value[ch];
            double sum_dy = 0.0, sum_dy_xhat = 0.0;
            for (int i = 0; i < n; ++i) {
                const int64_t base = (static_cast<int64_t>(i) * c + ch) * plane;
                const double* dy = node.grad.data() + base;
                const double* xv = x->value.data() + base;
                for (int64_t j = 0; j < plane; ++j) {
                    sum_dy += dy[j];
                    sum_dy_xhat += dy[j] * (xv[j] - m) * is;
                }
            }
            if (gamma->requires_grad) gamma->grad[ch] += sum_dy_xhat;
            if (beta->requires_grad) beta->grad[ch] += sum_dy;
            if (!x->requires_grad) continue;
            const double inv_count = 1.0 / static_cast<double>(count);
            for (int i = 0; i < n; ++i) {
                const int64_t base = (static_cast<int64_t>(i) * c + ch) * plane;
                const double* dy = node.grad.data() + base;
                const double* xv = x->value.data() + base;
                double* dx = x->grad.data() + base;
                if (training) {
                    // dL/dx through batch statistics.
                    for (int64_t j = 0; j < plane; ++j) {
                        const double xhat = (xv[j] - m) * is;
                        dx[j] += g * is * (dy[j] - inv_count * (sum_dy + xhat * sum_dy_xhat));
                    }
                } else {
                    for (int64_t j = 0; j < plane; ++j) dx[j] += g * is * dy[j];
                }
            }
        }
    };
    return make_op(std::move(out), {x, gamma, beta}, "batch_norm", std::move(bw));
}

Var film_channel(const Var& x, const Var& g, const Var& b) {
    const auto& sx = x->value.shape();
    require(sx.size() == 4, "film_channel input must be [N,C,T,F]");
    const int n = sx[0], c = sx[1];
    const int64_t plane = static_cast<int64_t>(sx[2]) * sx[3];
    require(g->value.ndim() == 2 && g->value.dim(0) == n && g->value.dim(1) == c,
            "film_channel gamma must be [N,C]");
    check_same_shape(g, b, "film_channel");
    Tensor out(sx);
#pragma omp parallel for schedule(static) collapse(2)
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch) {
            const int64_t base = (static_cast<int64_t>(i) * c + ch) * plane;
            const double gv = g->value[static_cast<int64_t>(i) * c + ch];
            const double bv = b->value[static_cast<int64_t>(i) * c + ch];
            const double* xp = x->value.data() + base;
            double* op = out.data() + base;
            for (int64_t j = 0; j < plane; ++j) op[j] = gv * xp[j] + bv;
        }
    return make_op(std::move(out), {x, g, b}, "film_channel", [x, g, b, n, c, plane](Node& node) {
#pragma omp parallel for schedule(static) collapse(2)
        for (int i = 0; i < n; ++i)
            for (int ch = 0; ch < c; ++ch) {
                const int64_t base = (static_cast<int64_t>(i) * c + ch) * plane;
                const int64_t gi = static_cast<int64_t>(i) * c + ch;
                const double* dy = node.grad.data() + base;
                const double* xp = x->value.data() + base;
                if (x->requires_grad) {
                    const double gv = g->value[gi];
                    double* dx = x->grad.data() + base;
                    for (int64_t j = 0; j < plane; ++j) dx[j] += gv * dy[j];
                }
                if (g->requires_grad || b->requires_grad) {
                    double sg = 0.0, sb = 0.0;
                    for (int64_t j = 0; j < plane; ++j) {
                        sg += dy[j] * xp[j];
                        sb += dy[j];
                    }
                    if (g->requires_grad) g->grad[gi] += sg;
                    if (b->requires_grad) b->grad[gi] += sb;
                }
            }
    });
}

Var film_time(const Var& x, const Var& g, const Var& b) {
    const auto& sx = x->value.shape();
    require(sx.size() == 4, "film_time input must be [N,C,T,F]");
    const int n = sx[0], c = sx[1], t = sx[2], f = sx[3];
    require(g->value.ndim() == 3 && g->value.dim(0) == n && g->value.dim(1) == t &&
                g->value.dim(2) == c,
            "film_time gamma must be [N,T,C]");
    check_same_shape(g, b, "film_time");
    Tensor out(sx);
#pragma omp parallel for schedule(static) collapse(2)
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch)
            for (int tt = 0; tt < t; ++tt) {
                const int64_t base =
                    ((static_cast<int64_t>(i) * c + ch) * t + tt) * f;
                const int64_t gi = (static_cast<int64_t>(i) * t + tt) * c + ch;
                const double gv = g->value[gi], bv = b->value[gi];
                const double* xp = x->value.data() + base;
                double* op = out.data() + base;
                for (int j = 0; j < f; ++j) op[j] = gv * xp[j] + bv;
            }
    return make_op(std::move(out), {x, g, b}, "film_time", [x, g, b, n, c, t, f](Node& node) {
#pragma omp parallel for schedule(static) collapse(2)
        for (int i = 0; i < n; ++i)
            for (int ch = 0; ch < c; ++ch)
                for (int tt = 0; tt < t; ++tt) {
                    const int64_t base = ((static_cast<int64_t>(i) * c + ch) * t + tt) * f;
                    const int64_t gi = (static_cast<int64_t>(i) * t + tt) * c + ch;
                    const double* dy = node.grad.data() + base;
                    const double* xp = x->value.data() + base;
                    if (x->requires_grad) {
                        const double gv = g->value[gi];
                        double* dx = x->grad.data() + base;
                        for (int j = 0; j < f; ++j) dx[j] += gv * dy[j];
                    }
                    if (g->requires_grad || b->requires_grad) {
                        double sg = 0.0, sb = 0.0;
                        for (int j = 0; j < f; ++j) {
                            sg += dy[j] * xp[j];
                            sb += dy[j];
                        }
                        if (g->requires_grad) g->grad[gi] += sg;
                        if (b->requires_grad) b->grad[gi] += sb;
                    }
                }
    });
}

Var softmax_last(const Var& a) {
    const auto& shape = a->value.shape();
    const int last = shape.back();
    const int64_t rows = a->value.size() / last;
    Tensor out(shape);
#pragma omp parallel for schedule(static) if (rows > 32)
    for (int64_t r = 0; r < rows; ++r) {
        const double* xp = a->value.data() + r * last;
        double* op = out.data() + r * last;
        double mx = xp[0];
        for (int i = 1; i < last; ++i) mx = std::max(mx, xp[i]);
        double s = 0.0;
        for (int i = 0; i < last; ++i) {
            op[i] = std::exp(xp[i] - mx);
            s += op[i];
        }
        const double inv = 1.0 / s;
        for (int i = 0; i < last; ++i) op[i] *= inv;
    }
    return make_op(std::move(out), {a}, "softmax", [a, last, rows](Node& node) {
        if (!a->requires_grad) return;
#pragma omp parallel for schedule(static) if (rows > 32)
        for (int64_t r = 0; r < rows; ++r) {
            const double* y = node.value.data() + r * last;
            const double* dy = node.grad.data() + r * last;
            double* dx = a->grad.data() + r * last;
            double dot = 0.0;
            for (int i = 0; i < last; ++i) dot += dy[i] * y[i];
            for (int i = 0; i < last; ++i) dx[i] += y[i] * (dy[i] - dot);
        }
    });
}

Var mean_time(const Var& a) {
    const auto& shape = a->value.shape();
    require(shape.size() == 3, "mean_time expects [N,T,M]");
    const int n = shape[0], t = shape[1], m = shape[2];
    Tensor out({n, m});
    const double inv = 1.0 / static_cast<double>(t);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) {
            double s = 0.0;
            for (int tt = 0; tt < t; ++tt)
                s += a->value[(static_cast<int64_t>(i) * t + tt) * m + j];
            out[static_cast<int64_t>(i) * m + j] = s * inv;
        }
    return make_op(std::move(out), {a}, "mean_time", [a, n, t, m, inv](Node& node) {
        if (!a->requires_grad) return;
        for (int i = 0; i < n; ++i)
            for (int tt = 0; tt < t; ++tt)
                for (int j = 0; j < m; ++j)
                    a->grad[(static_cast<int64_t>(i) * t + tt) * m + j] +=
                        node.grad[static_cast<int64_t>(i) * m + j] * inv;
    });
}

Var frame_features(const Var& x) {
    const auto& sx = x->value.shape();
    require(sx.size() == 4, "frame_features input must be [N,C,T,F]");
    const int n = sx[0], c = sx[1], t = sx[2], f = sx[3];
    Tensor out({n, t, c * f});
#pragma omp parallel for schedule(static) collapse(2)
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch)
            for (int tt = 0; tt < t; ++tt) {
                const double* src =
                    x->value.data() + ((static_cast<int64_t>(i) * c + ch) * t + tt) * f;
                double* dst = out.data() +
                              (static_cast<int64_t>(i) * t + tt) * (c * f) +
                              static_cast<int64_t>(ch) * f;
                std::memcpy(dst, src, static_cast<size_t>(f) * sizeof(double));
            }
    return make_op(std::move(out), {x}, "frame_features", [x, n, c, t, f](Node& node) {
        if (!x->requires_grad) return;
#pragma omp parallel for schedule(static) collapse(2)
        for (int i = 0; i < n; ++i)
            for (int ch = 0; ch < c; ++ch)
                for (int tt = 0; tt < t; ++tt) {
                    double* dst =
                        x->grad.data() + ((static_cast<int64_t>(i) * c + ch) * t + tt) * f;
                    const double* src = node.grad.data() +
                                        (static_cast<int64_t>(i) * t + tt) * (c * f) +
                                        static_cast<int64_t>(ch) * f;
                    for (int j = 0; j < f; ++j) dst[j] += src[j];
                }
    });
}

} // namespace umss::nn
