#include "roiattn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>

#include "roiattn/gemm.hpp"
#include "roiattn/parallel.hpp"

namespace roiattn {

namespace {

bool tape_wants(std::initializer_list<const Tensor*> inputs) {
    if (!Tape::current()) return false;
    for (const Tensor* t : inputs) {
        if (t->requires_grad()) return true;
    }
    return false;
}

void finish(Tensor& out, const char* name, bool taped, std::function<void()> backward_rule) {
    check_finite(out, name);
    if (taped) {
        out.set_requires_grad(true);
        Tape::current()->record(std::move(backward_rule));
    }
}

void require_rank(const Tensor& t, int rank, const char* op) {
    if (t.rank() != rank) {
        throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         ", got shape " + shape_str(t.shape()));
    }
}

// Slice geometry for an axis: x viewed as (outer, len, inner).
struct AxisView {
    int64_t outer, len, inner;
};

AxisView axis_view(const Tensor& x, int dim, const char* op) {
    if (dim < 0 || dim >= x.rank()) {
        throw ShapeError(std::string(op) + ": axis " + std::to_string(dim) +
                         " out of range for shape " + shape_str(x.shape()));
    }
    AxisView v{1, x.dim(dim), 1};
    for (int i = 0; i < dim; ++i) v.outer *= x.dim(i);
    for (int i = dim + 1; i < x.rank(); ++i) v.inner *= x.dim(i);
    return v;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank(a, 2, "matmul");
    require_rank(b, 2, "matmul");
    const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) {
        throw ShapeError("matmul: inner extents disagree, " + shape_str(a.shape()) +
                         " x " + shape_str(b.shape()));
    }
    Tensor out = Tensor::zeros({m, n});
    gemm_nn(m, n, k, a.data(), k, b.data(), n, out.data(), n, false);
    const bool taped = tape_wants({&a, &b});
    finish(out, "matmul", taped, [a, b, out, m, k, n]() mutable {
        if (a.requires_grad()) {
            std::vector<float> bt(size_t(k) * n);
            transpose(b.data(), bt.data(), k, n);
            gemm_nn(m, k, n, out.grad(), n, bt.data(), k, a.grad(), k, true);
        }
        if (b.requires_grad()) {
            gemm_tn(k, n, m, a.data(), k, out.grad(), n, b.grad(), n, true);
        }
    });
    return out;
}

Tensor transpose2d(const Tensor& x) {
    require_rank(x, 2, "transpose2d");
    const int m = x.dim(0), n = x.dim(1);
    Tensor out = Tensor::zeros({n, m});
    transpose(x.data(), out.data(), m, n);
    const bool taped = tape_wants({&x});
    finish(out, "transpose2d", taped, [x, out, m, n]() mutable {
        if (!x.requires_grad()) return;
        const float* g = out.grad();
        float* xg = x.grad();
        for (int j = 0; j < n; ++j) {
            for (int i = 0; i < m; ++i) xg[int64_t(i) * n + j] += g[int64_t(j) * m + i];
        }
    });
    return out;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    require_rank(x, 2, "linear");
    require_rank(w, 2, "linear");
    require_rank(b, 1, "linear");
    const int n = x.dim(0), f = x.dim(1), o = w.dim(1);
    if (w.dim(0) != f || b.dim(0) != o) {
        throw ShapeError("linear: x " + shape_str(x.shape()) + ", w " + shape_str(w.shape()) +
                         ", b " + shape_str(b.shape()));
    }
    Tensor out = Tensor::zeros({n, o});
    gemm_nn(n, o, f, x.data(), f, w.data(), o, out.data(), o, false);
    parallel_for_chunks(0, n, [&](int64_t i0, int64_t i1) {
        for (int64_t i = i0; i < i1; ++i) {
            float* row = out.data() + i * o;
            const float* bias = b.data();
            for (int j = 0; j < o; ++j) row[j] += bias[j];
        }
    });
    const bool taped = tape_wants({&x, &w, &b});
    finish(out, "linear", taped, [x, w, b, out, n, f, o]() mutable {
        if (x.requires_grad()) {
            std::vector<float> wt(size_t(f) * o);
            transpose(w.data(), wt.data(), f, o);
            gemm_nn(n, f, o, out.grad(), o, wt.data(), f, x.grad(), f, true);
        }
        if (w.requires_grad()) {
            gemm_tn(f, o, n, x.data(), f, out.grad(), o, w.grad(), o, true);
        }
        if (b.requires_grad()) {
            const float* g = out.grad();
            float* bg = b.grad();
            for (int j = 0; j < o; ++j) {
                double s = 0.0;
                for (int i = 0; i < n; ++i) s += g[int64_t(i) * o + j];
                bg[j] += float(s);
            }
        }
    });
    return out;
}

namespace {

struct ConvDims {
    int n, c, h, w, o, kh, kw, stride, padding, oh, ow;
    int64_t rows() const { return int64_t(n) * oh * ow; }
    int cols() const { return c * kh * kw; }
};

ConvDims conv_dims(const Tensor& x, const Tensor& weight, const Tensor& bias,
                   int stride, int padding) {
    ConvDims d{};
    d.n = x.dim(0);
    d.c = x.dim(1);
    d.h = x.dim(2);
    d.w = x.dim(3);
    d.o = weight.dim(0);
    d.kh = weight.dim(2);
    d.kw = weight.dim(3);
    d.stride = stride;
    d.padding = padding;
    if (weight.dim(1) != d.c) {
        throw ShapeError("conv2d: input channels " + shape_str(x.shape()) +
                         " vs weight " + shape_str(weight.shape()));
    }
    if (bias.dim(0) != d.o) {
        throw ShapeError("conv2d: bias " + shape_str(bias.shape()) + " vs weight " +
                         shape_str(weight.shape()));
    }
    if (stride < 1) throw ConfigError("conv2d: stride must be >= 1");
    if (padding < 0) throw ConfigError("conv2d: padding must be >= 0");
    const int num_h = d.h + 2 * padding - d.kh;
    const int num_w = d.w + 2 * padding - d.kw;
    if (num_h < 0 || num_w < 0) {
        throw ConfigError("conv2d: kernel does not fit padded input, x " +
                          shape_str(x.shape()) + ", weight " + shape_str(weight.shape()) +
                          ", padding " + std::to_string(padding));
    }
    if (num_h % stride != 0 || num_w % stride != 0) {
        throw ConfigError("conv2d: non-integral output extent for input " +
                          shape_str(x.shape()) + ", kernel " + shape_str(weight.shape()) +
                          ", stride " + std::to_string(stride) + ", padding " +
                          std::to_string(padding));
    }
    d.oh = num_h / stride + 1;
    d.ow = num_w / stride + 1;
    return d;
}

void im2col_image(const float* img, float* col_rows, const ConvDims& d) {
    // col_rows covers one image: (oh*ow) x (c*kh*kw)
    const int cols = d.cols();
    for (int oy = 0; oy < d.oh; ++oy) {
        for (int ox = 0; ox < d.ow; ++ox) {
            float* row = col_rows + (int64_t(oy) * d.ow + ox) * cols;
            for (int ci = 0; ci < d.c; ++ci) {
                const float* plane = img + int64_t(ci) * d.h * d.w;
                for (int ky = 0; ky < d.kh; ++ky) {
                    const int iy = oy * d.stride + ky - d.padding;
                    for (int kx = 0; kx < d.kw; ++kx) {
                        const int ix = ox * d.stride + kx - d.padding;
                        const bool inside = iy >= 0 && iy < d.h && ix >= 0 && ix < d.w;
                        row[(ci * d.kh + ky) * d.kw + kx] =
                            inside ? plane[int64_t(iy) * d.w + ix] : 0.0f;
                    }
                }
            }
        }
    }
}

void col2im_image(const float* col_rows, float* img_grad, const ConvDims& d) {
    const int cols = d.cols();
    for (int oy = 0; oy < d.oh; ++oy) {
        for (int ox = 0; ox < d.ow; ++ox) {
            const float* row = col_rows + (int64_t(oy) * d.ow + ox) * cols;
            for (int ci = 0; ci < d.c; ++ci) {
                float* plane = img_grad + int64_t(ci) * d.h * d.w;
                for (int ky = 0; ky < d.kh; ++ky) {
                    const int iy = oy * d.stride + ky - d.padding;
                    if (iy < 0 || iy >= d.h) continue;
                    for (int kx = 0; kx < d.kw; ++kx) {
                        const int ix = ox * d.stride + kx - d.padding;
                        if (ix < 0 || ix >= d.w) continue;
                        plane[int64_t(iy) * d.w + ix] += row[(ci * d.kh + ky) * d.kw + kx];
                    }
                }
            }
        }
    }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              int stride, int padding) {
    require_rank(x, 4, "conv2d");
    require_rank(weight, 4, "conv2d");
    require_rank(bias, 1, "conv2d");
    const ConvDims d = conv_dims(x, weight, bias, stride, padding);
    const int64_t rows = d.rows();
    const int cols = d.cols();
    const int64_t img_px = int64_t(d.oh) * d.ow;

    auto col = std::make_shared<std::vector<float>>(size_t(rows) * cols);
    parallel_for(0, d.n, [&](int64_t ni) {
        im2col_image(x.data() + ni * int64_t(d.c) * d.h * d.w,
                     col->data() + ni * img_px * cols, d);
    });

    // (rows x cols) * (cols x o) via a transposed weight copy.
    std::vector<float> wt(size_t(cols) * d.o);
    transpose(weight.data(), wt.data(), d.o, cols);
    std::vector<float> out_rows(size_t(rows) * d.o);
    gemm_nn(int(rows), d.o, cols, col->data(), cols, wt.data(), d.o,
            out_rows.data(), d.o, false);

    Tensor out = Tensor::zeros({d.n, d.o, d.oh, d.ow});
    parallel_for(0, d.n, [&](int64_t ni) {
        const float* src = out_rows.data() + ni * img_px * d.o;
        float* dst = out.data() + ni * int64_t(d.o) * img_px;
        const float* bv = bias.data();
        for (int64_t px = 0; px < img_px; ++px) {
            for (int oc = 0; oc < d.o; ++oc) {
                dst[int64_t(oc) * img_px + px] = src[px * d.o + oc] + bv[oc];
            }
        }
    });

    const bool taped = tape_wants({&x, &weight, &bias});
    finish(out, "conv2d", taped, [x, weight, bias, out, col, d, rows, cols, img_px]() mutable {
        std::vector<float> gout_rows(size_t(rows) * d.o);
        parallel_for(0, d.n, [&](int64_t ni) {
            const float* src = out.grad() + ni * int64_t(d.o) * img_px;
            float* dst = gout_rows.data() + ni * img_px * d.o;
            for (int64_t px = 0; px < img_px; ++px) {
                for (int oc = 0; oc < d.o; ++oc) {
                    dst[px * d.o + oc] = src[int64_t(oc) * img_px + px];
                }
            }
        });
        if (weight.requires_grad()) {
            gemm_tn(d.o, cols, int(rows), gout_rows.data(), d.o, col->data(), cols,
                    weight.grad(), cols, true);
        }
        if (bias.requires_grad()) {
            float* bg = bias.grad();
            for (int oc = 0; oc < d.o; ++oc) {
                double s = 0.0;
                for (int64_t r = 0; r < rows; ++r) s += gout_rows[size_t(r) * d.o + oc];
                bg[oc] += float(s);
            }
        }
        if (x.requires_grad()) {
            std::vector<float> gcol(size_t(rows) * cols);
            gemm_nn(int(rows), cols, d.o, gout_rows.data(), d.o, weight.data(), cols,
                    gcol.data(), cols, false);
            parallel_for(0, d.n, [&](int64_t ni) {
                col2im_image(gcol.data() + ni * img_px * cols,
                             x.grad() + ni * int64_t(d.c) * d.h * d.w, d);
            });
        }
    });
    return out;
}

namespace {
thread_local bool g_relu_probe_enabled = false;
thread_local uint64_t g_relu_pattern = 1469598103934665603ull;
}  // namespace

void relu_probe_reset(bool enabled) {
    g_relu_probe_enabled = enabled;
    g_relu_pattern = 1469598103934665603ull;
}

uint64_t relu_probe_pattern() { return g_relu_pattern; }

Tensor relu(const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape());
    const float* xv = x.data();
    float* ov = out.data();
    const int64_t n = x.numel();
    parallel_for_chunks(0, n, [&](int64_t lo, int64_t hi) {
        for (int64_t i = lo; i < hi; ++i) ov[i] = xv[i] > 0.0f ? xv[i] : 0.0f;
    });
    if (g_relu_probe_enabled) {
        uint64_t h = g_relu_pattern;
        for (int64_t i = 0; i < n; ++i) {
            h = (h ^ uint64_t(xv[i] > 0.0f ? 2 : 1)) * 1099511628211ull;
        }
        g_relu_pattern = h;
    }
    const bool taped = tape_wants({&x});
    finish(out, "relu", taped, [x, out, n]() mutable {
        if (!x.requires_grad()) return;
        const float* xv = x.data();
        const float* g = out.grad();
        float* xg = x.grad();
        parallel_for_chunks(0, n, [&](int64_t lo, int64_t hi) {
            for (int64_t i = lo; i < hi; ++i) {
                if (xv[i] > 0.0f) xg[i] += g[i];
            }
        });
    });
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError("add: shapes differ, " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
    Tensor out = Tensor::zeros(a.shape());
    const float* av = a.data();
    const float* bv = b.data();
    float* ov = out.data();
    const int64_t n = a.numel();
    parallel_for_chunks(0, n, [&](int64_t lo, int64_t hi) {
        for (int64_t i = lo; i < hi; ++i) ov[i] = av[i] + bv[i];
    });
    const bool taped = tape_wants({&a, &b});
    finish(out, "add", taped, [a, b, out, n]() mutable {
        const float* g = out.grad();
        if (a.requires_grad()) {
            float* ag = a.grad();
            for (int64_t i = 0; i < n; ++i) ag[i] += g[i];
        }
        if (b.requires_grad()) {
            float* bg = b.grad();
            for (int64_t i = 0; i < n; ++i) bg[i] += g[i];
        }
    });
    return out;
}

Tensor softmax_dim(const Tensor& x, int dim) {
    const AxisView v = axis_view(x, dim, "softmax_dim");
    Tensor out = Tensor::zeros(x.shape());
    const float* xv = x.data();
    float* ov = out.data();
    parallel_for(0, v.outer, [&](int64_t ou) {
        for (int64_t in = 0; in < v.inner; ++in) {
            const int64_t base = ou * v.len * v.inner + in;
            float mx = xv[base];
            for (int64_t k = 1; k < v.len; ++k) {
                mx = std::max(mx, xv[base + k * v.inner]);
            }
            double denom = 0.0;
            for (int64_t k = 0; k < v.len; ++k) {
                const double e = std::exp(double(xv[base + k * v.inner]) - double(mx));
                ov[base + k * v.inner] = float(e);
                denom += e;
            }
            for (int64_t k = 0; k < v.len; ++k) {
                ov[base + k * v.inner] = float(double(ov[base + k * v.inner]) / denom);
            }
        }
    });
    const bool taped = tape_wants({&x});
    finish(out, "softmax_dim", taped, [x, out, v]() mutable {
        if (!x.requires_grad()) return;
        const float* y = out.data();
        const float* g = out.grad();
        float* xg = x.grad();
        parallel_for(0, v.outer, [&](int64_t ou) {
            for (int64_t in = 0; in < v.inner; ++in) {
                const int64_t base = ou * v.len * v.inner + in;
                double dot = 0.0;
                for (int64_t k = 0; k < v.len; ++k) {
                    const int64_t idx = base + k * v.inner;
                    dot += double(g[idx]) * double(y[idx]);
                }
                for (int64_t k = 0; k < v.len; ++k) {
                    const int64_t idx = base + k * v.inner;
                    xg[idx] += float(double(y[idx]) * (double(g[idx]) - dot));
                }
            }
        });
    });
    return out;
}

Tensor l1_normalize_dim(const Tensor& x, int dim, float eps) {
    const AxisView v = axis_view(x, dim, "l1_normalize_dim");
    Tensor out = Tensor::zeros(x.shape());
    const float* xv = x.data();
    float* ov = out.data();
    // Denominators kept for the backward rule.
    auto denoms = std::make_shared<std::vector<double>>(size_t(v.outer * v.inner));
    parallel_for(0, v.outer, [&](int64_t ou) {
        for (int64_t in = 0; in < v.inner; ++in) {
            const int64_t base = ou * v.len * v.inner + in;
            double sum = 0.0;
            for (int64_t k = 0; k < v.len; ++k) sum += double(xv[base + k * v.inner]);
            const double denom = sum + double(eps);
            (*denoms)[size_t(ou * v.inner + in)] = denom;
            for (int64_t k = 0; k < v.len; ++k) {
                ov[base + k * v.inner] = float(double(xv[base + k * v.inner]) / denom);
            }
        }
    });
    const bool taped = tape_wants({&x});
    finish(out, "l1_normalize_dim", taped, [x, out, v, denoms]() mutable {
        if (!x.requires_grad()) return;
        const float* y = out.data();
        const float* g = out.grad();
        float* xg = x.grad();
        parallel_for(0, v.outer, [&](int64_t ou) {
            for (int64_t in = 0; in < v.inner; ++in) {
                const int64_t base = ou * v.len * v.inner + in;
                const double denom = (*denoms)[size_t(ou * v.inner + in)];
                double dot = 0.0;
                for (int64_t k = 0; k < v.len; ++k) {
                    const int64_t idx = base + k * v.inner;
                    dot += double(g[idx]) * double(y[idx]);
                }
                for (int64_t k = 0; k < v.len; ++k) {
                    const int64_t idx = base + k * v.inner;
                    xg[idx] += float((double(g[idx]) - dot) / denom);
                }
            }
        });
    });
    return out;
}

Tensor concat_channels(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat_channels: no inputs");
    const int rank = parts[0].rank();
    if (rank != 3 && rank != 4) {
        throw ShapeError("concat_channels: expected rank 3 or 4, got " +
                         shape_str(parts[0].shape()));
    }
    const int axis = rank == 3 ? 0 : 1;
    Shape out_shape = parts[0].shape();
    int total_c = 0;
    for (const Tensor& p : parts) {
        if (p.rank() != rank) {
            throw ShapeError("concat_channels: rank mismatch, " + shape_str(parts[0].shape()) +
                             " vs " + shape_str(p.shape()));
        }
        for (int i = 0; i < rank; ++i) {
            if (i != axis && p.dim(i) != out_shape[size_t(i)]) {
                throw ShapeError("concat_channels: extents differ, " +
                                 shape_str(parts[0].shape()) + " vs " + shape_str(p.shape()));
            }
        }
        total_c += p.dim(axis);
    }
    out_shape[size_t(axis)] = total_c;

    const int64_t outer = rank == 4 ? out_shape[0] : 1;
    int64_t inner = 1;
    for (int i = axis + 1; i < rank; ++i) inner *= out_shape[size_t(i)];

    Tensor out = Tensor::zeros(out_shape);
    int64_t chan_offset = 0;
    for (const Tensor& p : parts) {
        const int64_t pc = p.dim(axis);
        for (int64_t ou = 0; ou < outer; ++ou) {
            std::memcpy(out.data() + (ou * total_c + chan_offset) * inner,
                        p.data() + ou * pc * inner, size_t(pc * inner) * sizeof(float));
        }
        chan_offset += pc;
    }

    bool any_grad = false;
    for (const Tensor& p : parts) any_grad = any_grad || p.requires_grad();
    const bool taped = Tape::current() && any_grad;
    std::vector<Tensor> captured = parts;
    finish(out, "concat_channels", taped, [captured, out, total_c, outer, inner]() mutable {
        int64_t chan_offset = 0;
        for (Tensor& p : captured) {
            const int64_t pc = p.shape()[p.rank() == 3 ? 0 : 1];
            if (p.requires_grad()) {
                for (int64_t ou = 0; ou < outer; ++ou) {
                    const float* g = out.grad() + (ou * total_c + chan_offset) * inner;
                    float* pg = p.grad() + ou * pc * inner;
                    for (int64_t i = 0; i < pc * inner; ++i) pg[i] += g[i];
                }
            }
            chan_offset += pc;
        }
    });
    return out;
}

Tensor reshape(const Tensor& x, Shape new_shape) {
    if (shape_numel(new_shape) != x.numel()) {
        throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                         shape_str(new_shape));
    }
    Tensor out = Tensor::from_values(std::move(new_shape), x.values());
    const bool taped = tape_wants({&x});
    finish(out, "reshape", taped, [x, out]() mutable {
        if (!x.requires_grad()) return;
        const float* g = out.grad();
        float* xg = x.grad();
        const int64_t n = x.numel();
        for (int64_t i = 0; i < n; ++i) xg[i] += g[i];
    });
    return out;
}

Tensor flatten2d(const Tensor& x) {
    if (x.rank() < 1) throw ShapeError("flatten2d: scalar input");
    const int64_t d0 = x.dim(0);
    const int64_t rest = d0 == 0 ? 0 : x.numel() / d0;
    return reshape(x, {int(d0), int(rest)});
}

Tensor avg_pool_global(const Tensor& x) {
    require_rank(x, 4, "avg_pool_global");
    const int n = x.dim(0), c = x.dim(1);
    const int64_t hw = int64_t(x.dim(2)) * x.dim(3);
    if (hw == 0) throw ShapeError("avg_pool_global: empty spatial extent " + shape_str(x.shape()));
    Tensor out = Tensor::zeros({n, c});
    const float* xv = x.data();
    float* ov = out.data();
    parallel_for(0, int64_t(n) * c, [&](int64_t nc) {
        const float* plane = xv + nc * hw;
        double s = 0.0;
        for (int64_t i = 0; i < hw; ++i) s += double(plane[i]);
        ov[nc] = float(s / double(hw));
    });
    const bool taped = tape_wants({&x});
    finish(out, "avg_pool_global", taped, [x, out, n, c, hw]() mutable {
        if (!x.requires_grad()) return;
        const float* g = out.grad();
        float* xg = x.grad();
        parallel_for(0, int64_t(n) * c, [&](int64_t nc) {
            const float gv = g[nc] / float(hw);
            float* plane = xg + nc * hw;
            for (int64_t i = 0; i < hw; ++i) plane[i] += gv;
        });
    });
    return out;
}

Tensor select_rows(const Tensor& x, const std::vector<int>& rows) {
    if (x.rank() < 1) throw ShapeError("select_rows: scalar input");
    const int d0 = x.dim(0);
    const int64_t stride = d0 == 0 ? 0 : x.numel() / d0;
    for (int r : rows) {
        if (r < 0 || r >= d0) {
            throw ShapeError("select_rows: row " + std::to_string(r) + " out of range for " +
                             shape_str(x.shape()));
        }
    }
    Shape out_shape = x.shape();
    out_shape[0] = int(rows.size());
    Tensor out = Tensor::zeros(out_shape);
    for (size_t i = 0; i < rows.size(); ++i) {
        std::memcpy(out.data() + int64_t(i) * stride, x.data() + int64_t(rows[i]) * stride,
                    size_t(stride) * sizeof(float));
    }
    const bool taped = tape_wants({&x});
    finish(out, "select_rows", taped, [x, out, rows, stride]() mutable {
        if (!x.requires_grad()) return;
        const float* g = out.grad();
        float* xg = x.grad();
        for (size_t i = 0; i < rows.size(); ++i) {
            float* dst = xg + int64_t(rows[i]) * stride;
            const float* src = g + int64_t(i) * stride;
            for (int64_t j = 0; j < stride; ++j) dst[j] += src[j];
        }
    });
    return out;
}

Tensor sum_all(const Tensor& x) {
    Tensor out = Tensor::zeros({1});
    double s = 0.0;
    const float* xv = x.data();
    const int64_t n = x.numel();
    for (int64_t i = 0; i < n; ++i) s += double(xv[i]);
    out.data()[0] = float(s);
    const bool taped = tape_wants({&x});
    finish(out, "sum_all", taped, [x, out, n]() mutable {
        if (!x.requires_grad()) return;
        const float g = out.grad()[0];
        float* xg = x.grad();
        for (int64_t i = 0; i < n; ++i) xg[i] += g;
    });
    return out;
}

Tensor weighted_sum(const Tensor& x, std::span<const float> weights) {
    if (int64_t(weights.size()) != x.numel()) {
        throw ShapeError("weighted_sum: " + std::to_string(weights.size()) +
                         " weights for tensor " + shape_str(x.shape()));
    }
    Tensor out = Tensor::zeros({1});
    double s = 0.0;
    const float* xv = x.data();
    for (int64_t i = 0; i < x.numel(); ++i) s += double(weights[size_t(i)]) * double(xv[i]);
    out.data()[0] = float(s);
    const bool taped = tape_wants({&x});
    std::vector<float> w(weights.begin(), weights.end());
    finish(out, "weighted_sum", taped, [x, out, w = std::move(w)]() mutable {
        if (!x.requires_grad()) return;
        const float g = out.grad()[0];
        float* xg = x.grad();
        for (size_t i = 0; i < w.size(); ++i) xg[i] += w[i] * g;
    });
    return out;
}

Tensor scale(const Tensor& x, float factor) {
    Tensor out = Tensor::zeros(x.shape());
    const float* xv = x.data();
    float* ov = out.data();
    const int64_t n = x.numel();
    for (int64_t i = 0; i < n; ++i) ov[i] = xv[i] * factor;
    const bool taped = tape_wants({&x});
    finish(out, "scale", taped, [x, out, factor, n]() mutable {
        if (!x.requires_grad()) return;
        const float* g = out.grad();
        float* xg = x.grad();
        for (int64_t i = 0; i < n; ++i) xg[i] += factor * g[i];
    });
    return out;
}

Tensor cross_entropy_with_logits(const Tensor& logits, const std::vector<int>& labels) {
    require_rank(logits, 2, "cross_entropy_with_logits");
    const int n = logits.dim(0), k = logits.dim(1);
    if (int(labels.size()) != n) {
        throw ShapeError("cross_entropy_with_logits: " + std::to_string(labels.size()) +
                         " labels for logits " + shape_str(logits.shape()));
    }
    if (n == 0) throw ShapeError("cross_entropy_with_logits: empty batch");
    for (int y : labels) {
        if (y < 0 || y >= k) {
            throw ShapeError("cross_entropy_with_logits: label " + std::to_string(y) +
                             " out of range for " + std::to_string(k) + " classes");
        }
    }
    auto probs = std::make_shared<std::vector<float>>(size_t(n) * k);
    const float* z = logits.data();
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        const float* row = z + int64_t(i) * k;
        float mx = row[0];
        for (int j = 1; j < k; ++j) mx = std::max(mx, row[j]);
        double denom = 0.0;
        for (int j = 0; j < k; ++j) denom += std::exp(double(row[j]) - double(mx));
        const double lse = double(mx) + std::log(denom);
        total += lse - double(row[labels[size_t(i)]]);
        for (int j = 0; j < k; ++j) {
            (*probs)[size_t(i) * k + j] = float(std::exp(double(row[j]) - lse));
        }
    }
    Tensor out = Tensor::zeros({1});
    out.data()[0] = float(total / double(n));
    const bool taped = tape_wants({&logits});
    finish(out, "cross_entropy_with_logits", taped, [logits, out, labels, probs, n, k]() mutable {
        if (!logits.requires_grad()) return;
        const float g = out.grad()[0] / float(n);
        float* zg = logits.grad();
        for (int i = 0; i < n; ++i) {
            const int y = labels[size_t(i)];
            for (int j = 0; j < k; ++j) {
                const float p = (*probs)[size_t(i) * k + j];
                zg[int64_t(i) * k + j] += g * (p - (j == y ? 1.0f : 0.0f));
            }
        }
    });
    return out;
}

Tensor smooth_l1(const Tensor& pred, const Tensor& target, float beta, float normalizer) {
    if (pred.shape() != target.shape()) {
        throw ShapeError("smooth_l1: pred " + shape_str(pred.shape()) + " vs target " +
                         shape_str(target.shape()));
    }
    if (beta <= 0.0f) throw ConfigError("smooth_l1: beta must be positive");
    if (normalizer <= 0.0f) throw ConfigError("smooth_l1: normalizer must be positive");
    const float* p = pred.data();
    const float* t = target.data();
    const int64_t n = pred.numel();
    double total = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        const double e = double(p[i]) - double(t[i]);
        const double a = std::abs(e);
        total += a < beta ? 0.5 * e * e / beta : a - 0.5 * beta;
    }
    Tensor out = Tensor::zeros({1});
    out.data()[0] = float(total / double(normalizer));
    const bool taped = tape_wants({&pred});
    finish(out, "smooth_l1", taped, [pred, target, out, beta, normalizer, n]() mutable {
        if (!pred.requires_grad()) return;
        const float g = out.grad()[0] / normalizer;
        const float* p = pred.data();
        const float* t = target.data();
        float* pg = pred.grad();
        for (int64_t i = 0; i < n; ++i) {
            const float e = p[i] - t[i];
            const float d = std::abs(e) < beta ? e / beta : (e > 0.0f ? 1.0f : -1.0f);
            pg[i] += g * d;
        }
    });
    return out;
}

SgdOptimizer::SgdOptimizer(std::vector<Tensor> params, float lr, float momentum,
                           float weight_decay)
    : lr_(lr), momentum_(momentum), weight_decay_(weight_decay) {
    slots_.reserve(params.size());
    for (Tensor& p : params) {
        if (!p.requires_grad()) {
            throw ConfigError("SgdOptimizer: parameter without gradient buffer, shape " +
                              shape_str(p.shape()));
        }
        Slot s;
        s.param = p;
        s.velocity.assign(size_t(p.numel()), 0.0f);
        slots_.push_back(std::move(s));
    }
}

void SgdOptimizer::step() {
    for (Slot& s : slots_) {
        float* theta = s.param.data();
        const float* g = s.param.grad();
        float* v = s.velocity.data();
        const int64_t n = s.param.numel();
        for (int64_t i = 0; i < n; ++i) {
            v[i] = momentum_ * v[i] + g[i] + weight_decay_ * theta[i];
            theta[i] -= lr_ * v[i];
        }
    }
}

void SgdOptimizer::zero_grad() {
    for (Slot& s : slots_) s.param.zero_grad();
}

}  // namespace roiattn
