#include "memotion/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <limits>

namespace memotion::kernels {

namespace {
std::atomic<bool> g_parallel{true};

constexpr int64_t kGrain = 4096;  // skip thread fan-out for tiny workloads

inline bool par(int64_t work) { return g_parallel.load(std::memory_order_relaxed) && work >= kGrain; }
}  // namespace

void set_parallel(bool enabled) { g_parallel.store(enabled, std::memory_order_relaxed); }
bool parallel_enabled() { return g_parallel.load(std::memory_order_relaxed); }

void gemm_serial(bool trans_a, bool trans_b, int m, int n, int k, double alpha,
                 const double* a, const double* b, double beta, double* c) {
    // Strides for op(A)[i,k] and op(B)[k,j] over the row-major storage.
    const int64_t a_i = trans_a ? 1 : k;
    const int64_t a_k = trans_a ? m : 1;
    const int64_t b_k = trans_b ? 1 : n;
    const int64_t b_j = trans_b ? k : 1;
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int p = 0; p < k; ++p)
                acc += a[i * a_i + p * a_k] * b[p * b_k + j * b_j];
            double& out = c[static_cast<int64_t>(i) * n + j];
            out = alpha * acc + (beta == 0.0 ? 0.0 : beta * out);
        }
    }
}

void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha,
          const double* a, const double* b, double beta, double* c) {
    const int64_t work = static_cast<int64_t>(m) * n * k;
    if (!trans_a && !trans_b) {
        // i-k-j with a row accumulator: contiguous access to B and C, and the
        // per-element k order matches the serial reference exactly.
#pragma omp parallel for schedule(static) if (par(work))
        for (int i = 0; i < m; ++i) {
            double* crow = c + static_cast<int64_t>(i) * n;
            if (beta == 0.0)
                std::memset(crow, 0, sizeof(double) * static_cast<size_t>(n));
            else
                for (int j = 0; j < n; ++j) crow[j] *= beta;
            std::vector<double> acc(static_cast<size_t>(n), 0.0);
            const double* arow = a + static_cast<int64_t>(i) * k;
            for (int p = 0; p < k; ++p) {
                const double av = arow[p];
                const double* brow = b + static_cast<int64_t>(p) * n;
                for (int j = 0; j < n; ++j) acc[j] += av * brow[j];
            }
            for (int j = 0; j < n; ++j) crow[j] += alpha * acc[j];
        }
        return;
    }
    const int64_t a_i = trans_a ? 1 : k;
    const int64_t a_k = trans_a ? m : 1;
    const int64_t b_k = trans_b ? 1 : n;
    const int64_t b_j = trans_b ? k : 1;
#pragma omp parallel for schedule(static) if (par(work))
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int p = 0; p < k; ++p)
                acc += a[i * a_i + p * a_k] * b[p * b_k + j * b_j];
            double& out = c[static_cast<int64_t>(i) * n + j];
            out = alpha * acc + (beta == 0.0 ? 0.0 : beta * out);
        }
    }
}

void im2col(const double* in, int channels, int h, int w, int kh, int kw,
            int stride, int pad, double* col) {
    const int out_h = conv_out_extent(h, kh, stride, pad);
    const int out_w = conv_out_extent(w, kw, stride, pad);
    const int64_t out_spatial = static_cast<int64_t>(out_h) * out_w;
    const int64_t rows = static_cast<int64_t>(channels) * kh * kw;
#pragma omp parallel for schedule(static) if (par(rows* out_spatial))
    for (int64_t r = 0; r < rows; ++r) {
        const int c = static_cast<int>(r / (kh * kw));
        const int rem = static_cast<int>(r % (kh * kw));
        const int dy = rem / kw;
        const int dx = rem % kw;
        const double* plane = in + static_cast<int64_t>(c) * h * w;
        double* dst = col + r * out_spatial;
        for (int oy = 0; oy < out_h; ++oy) {
            const int iy = oy * stride - pad + dy;
            for (int ox = 0; ox < out_w; ++ox) {
                const int ix = ox * stride - pad + dx;
                const bool inside = iy >= 0 && iy < h && ix >= 0 && ix < w;
                dst[static_cast<int64_t>(oy) * out_w + ox] =
                    inside ? plane[static_cast<int64_t>(iy) * w + ix] : 0.0;
            }
        }
    }
}

void col2im(const double* col, int channels, int h, int w, int kh, int kw,
            int stride, int pad, double* in) {
    const int out_h = conv_out_extent(h, kh, stride, pad);
    const int out_w = conv_out_extent(w, kw, stride, pad);
    const int64_t out_spatial = static_cast<int64_t>(out_h) * out_w;
    std::memset(in, 0, sizeof(double) * static_cast<size_t>(channels) * h * w);
    // Parallel over channels: every (c, dy, dx) row scatters only into
    // channel c's plane, so threads never collide.
#pragma omp parallel for schedule(static) if (par(static_cast<int64_t>(channels) * kh * kw * out_spatial))
    for (int c = 0; c < channels; ++c) {
        double* plane = in + static_cast<int64_t>(c) * h * w;
        for (int dy = 0; dy < kh; ++dy) {
            for (int dx = 0; dx < kw; ++dx) {
                const int64_t r = (static_cast<int64_t>(c) * kh + dy) * kw + dx;
                const double* src = col + r * out_spatial;
                for (int oy = 0; oy < out_h; ++oy) {
                    const int iy = oy * stride - pad + dy;
                    if (iy < 0 || iy >= h) continue;
                    for (int ox = 0; ox < out_w; ++ox) {
                        const int ix = ox * stride - pad + dx;
                        if (ix < 0 || ix >= w) continue;
                        plane[static_cast<int64_t>(iy) * w + ix] +=
                            src[static_cast<int64_t>(oy) * out_w + ox];
                    }
                }
            }
        }
    }
}

void conv2d_serial(const double* in, int c_in, int h, int w,
                   const double* weights, const double* bias, int c_out,
                   int kh, int kw, int stride, int pad, double* out) {
    const int out_h = conv_out_extent(h, kh, stride, pad);
    const int out_w = conv_out_extent(w, kw, stride, pad);
    for (int co = 0; co < c_out; ++co) {
        const double* wbase = weights + static_cast<int64_t>(co) * c_in * kh * kw;
        double* oplane = out + static_cast<int64_t>(co) * out_h * out_w;
        for (int oy = 0; oy < out_h; ++oy) {
            for (int ox = 0; ox < out_w; ++ox) {
                double acc = 0.0;
                for (int ci = 0; ci < c_in; ++ci) {
                    const double* plane = in + static_cast<int64_t>(ci) * h * w;
                    const double* wk = wbase + static_cast<int64_t>(ci) * kh * kw;
                    for (int dy = 0; dy < kh; ++dy) {
                        const int iy = oy * stride - pad + dy;
                        if (iy < 0 || iy >= h) continue;
                        for (int dx = 0; dx < kw; ++dx) {
                            const int ix = ox * stride - pad + dx;
                            if (ix < 0 || ix >= w) continue;
                            acc += plane[static_cast<int64_t>(iy) * w + ix] *
                                   wk[dy * kw + dx];
                        }
                    }
                }
                oplane[static_cast<int64_t>(oy) * out_w + ox] =
                    acc + (bias ? bias[co] : 0.0);
            }
        }
    }
}

void maxpool2d(const double* in, int channels, int h, int w, int kernel,
               int stride, int pad, double* out, int* argmax) {
    const int out_h = conv_out_extent(h, kernel, stride, pad);
    const int out_w = conv_out_extent(w, kernel, stride, pad);
    const int64_t per_channel = static_cast<int64_t>(out_h) * out_w;
#pragma omp parallel for schedule(static) if (par(channels* per_channel* kernel* kernel))
    for (int c = 0; c < channels; ++c) {
        const double* plane = in + static_cast<int64_t>(c) * h * w;
        double* oplane = out + c * per_channel;
        int* aplane = argmax + c * per_channel;
        for (int oy = 0; oy < out_h; ++oy) {
            for (int ox = 0; ox < out_w; ++ox) {
                double best = -std::numeric_limits<double>::infinity();
                int best_idx = -1;
                for (int dy = 0; dy < kernel; ++dy) {
                    const int iy = oy * stride - pad + dy;
                    if (iy < 0 || iy >= h) continue;
                    for (int dx = 0; dx < kernel; ++dx) {
                        const int ix = ox * stride - pad + dx;
                        if (ix < 0 || ix >= w) continue;
                        const int idx = iy * w + ix;
                        if (plane[idx] > best) {
                            best = plane[idx];
                            best_idx = idx;
                        }
                    }
                }
                const int64_t o = static_cast<int64_t>(oy) * out_w + ox;
                oplane[o] = best;
                aplane[o] = best_idx + static_cast<int>(static_cast<int64_t>(c) * h * w);
            }
        }
    }
}

void maxpool2d_backward(const double* grad_out, const int* argmax,
                        int64_t out_count, double* grad_in) {
    for (int64_t i = 0; i < out_count; ++i) grad_in[argmax[i]] += grad_out[i];
}

void avgpool2d(const double* in, int channels, int h, int w, int kernel,
               int stride, double* out) {
    const int out_h = conv_out_extent(h, kernel, stride, 0);
    const int out_w = conv_out_extent(w, kernel, stride, 0);
    const double inv = 1.0 / (kernel * kernel);
#pragma omp parallel for schedule(static) if (par(static_cast<int64_t>(channels) * out_h * out_w * kernel * kernel))
    for (int c = 0; c < channels; ++c) {
        const double* plane = in + static_cast<int64_t>(c) * h * w;
        double* oplane = out + static_cast<int64_t>(c) * out_h * out_w;
        for (int oy = 0; oy < out_h; ++oy) {
            for (int ox = 0; ox < out_w; ++ox) {
                double acc = 0.0;
                for (int dy = 0; dy < kernel; ++dy)
                    for (int dx = 0; dx < kernel; ++dx)
                        acc += plane[static_cast<int64_t>(oy * stride + dy) * w + ox * stride + dx];
                oplane[static_cast<int64_t>(oy) * out_w + ox] = acc * inv;
            }
        }
    }
}

void avgpool2d_backward(const double* grad_out, int channels, int h, int w,
                        int kernel, int stride, double* grad_in) {
    const int out_h = conv_out_extent(h, kernel, stride, 0);
    const int out_w = conv_out_extent(w, kernel, stride, 0);
    const double inv = 1.0 / (kernel * kernel);
    for (int c = 0; c < channels; ++c) {
        const double* oplane = grad_out + static_cast<int64_t>(c) * out_h * out_w;
        double* plane = grad_in + static_cast<int64_t>(c) * h * w;
        for (int oy = 0; oy < out_h; ++oy)
            for (int ox = 0; ox < out_w; ++ox) {
                const double g = oplane[static_cast<int64_t>(oy) * out_w + ox] * inv;
                for (int dy = 0; dy < kernel; ++dy)
                    for (int dx = 0; dx < kernel; ++dx)
                        plane[static_cast<int64_t>(oy * stride + dy) * w + ox * stride + dx] += g;
            }
    }
}

void global_maxpool(const double* in, int channels, int spatial, double* out,
                    int* argmax) {
#pragma omp parallel for schedule(static) if (par(static_cast<int64_t>(channels) * spatial))
    for (int c = 0; c < channels; ++c) {
        const double* plane = in + static_cast<int64_t>(c) * spatial;
        int best = 0;
        for (int i = 1; i < spatial; ++i)
            if (plane[i] > plane[best]) best = i;
        out[c] = plane[best];
        argmax[c] = best;
    }
}

void global_maxpool_backward(const double* grad_out, const int* argmax,
                             int channels, int spatial, double* grad_in) {
    for (int c = 0; c < channels; ++c)
        grad_in[static_cast<int64_t>(c) * spatial + argmax[c]] += grad_out[c];
}

void batchnorm_infer(const double* in, int channels, int spatial,
                     const double* gamma, const double* beta,
                     const double* mean, const double* var, double eps,
                     double* out) {
#pragma omp parallel for schedule(static) if (par(static_cast<int64_t>(channels) * spatial))
    for (int c = 0; c < channels; ++c) {
        const double scale = gamma[c] / std::sqrt(var[c] + eps);
        const double shift = beta[c] - mean[c] * scale;
        const double* src = in + static_cast<int64_t>(c) * spatial;
        double* dst = out + static_cast<int64_t>(c) * spatial;
        for (int i = 0; i < spatial; ++i) dst[i] = src[i] * scale + shift;
    }
}

void batchnorm_infer_backward(const double* in, const double* grad_out,
                              int channels, int spatial, const double* gamma,
                              const double* mean, const double* var,
                              double eps, double* grad_in, double* grad_gamma,
                              double* grad_beta) {
#pragma omp parallel for schedule(static) if (par(static_cast<int64_t>(channels) * spatial))
    for (int c = 0; c < channels; ++c) {
        const double inv_std = 1.0 / std::sqrt(var[c] + eps);
        const double scale = gamma[c] * inv_std;
        const double* x = in + static_cast<int64_t>(c) * spatial;
        const double* gy = grad_out + static_cast<int64_t>(c) * spatial;
        double* gx = grad_in + static_cast<int64_t>(c) * spatial;
        double dg = 0.0, db = 0.0;
        for (int i = 0; i < spatial; ++i) {
            gx[i] += gy[i] * scale;
            dg += gy[i] * (x[i] - mean[c]) * inv_std;
            db += gy[i];
        }
        grad_gamma[c] += dg;
        grad_beta[c] += db;
    }
}

void layernorm(const double* in, int rows, int cols, const double* gamma,
               const double* beta, double eps, double* out, double* mean,
               double* inv_std) {
#pragma omp parallel for schedule(static) if (par(static_cast<int64_t>(rows) * cols))
    for (int r = 0; r < rows; ++r) {
        const double* x = in + static_cast<int64_t>(r) * cols;
        double* y = out + static_cast<int64_t>(r) * cols;
        double mu = 0.0;
        for (int c = 0; c < cols; ++c) mu += x[c];
        mu /= cols;
        double var = 0.0;
        for (int c = 0; c < cols; ++c) var += (x[c] - mu) * (x[c] - mu);
        var /= cols;
        const double is = 1.0 / std::sqrt(var + eps);
        mean[r] = mu;
        inv_std[r] = is;
        for (int c = 0; c < cols; ++c)
            y[c] = (x[c] - mu) * is * gamma[c] + beta[c];
    }
}

void layernorm_backward(const double* in, const double* grad_out, int rows,
                        int cols, const double* gamma, const double* mean,
                        const double* inv_std, double* grad_in,
                        double* grad_gamma, double* grad_beta) {
    for (int r = 0; r < rows; ++r) {
        const double* x = in + static_cast<int64_t>(r) * cols;
        const double* gy = grad_out + static_cast<int64_t>(r) * cols;
        double* gx = grad_in + static_cast<int64_t>(r) * cols;
        const double mu = mean[r];
        const double is = inv_std[r];
        double sum_gxh = 0.0, sum_gxh_xhat = 0.0;
        for (int c = 0; c < cols; ++c) {
            const double xhat = (x[c] - mu) * is;
            const double g = gy[c] * gamma[c];
            sum_gxh += g;
            sum_gxh_xhat += g * xhat;
            grad_gamma[c] += gy[c] * xhat;
            grad_beta[c] += gy[c];
        }
        const double inv_n = 1.0 / cols;
        for (int c = 0; c < cols; ++c) {
            const double xhat = (x[c] - mu) * is;
            const double g = gy[c] * gamma[c];
            gx[c] += is * (g - inv_n * sum_gxh - xhat * inv_n * sum_gxh_xhat);
        }
    }
}

void softmax_rows(const double* in, int rows, int cols, double* out) {
#pragma omp parallel for schedule(static) if (par(static_cast<int64_t>(rows) * cols))
    for (int r = 0; r < rows; ++r) {
        const double* x = in + static_cast<int64_t>(r) * cols;
        double* y = out + static_cast<int64_t>(r) * cols;
        double mx = x[0];
        for (int c = 1; c < cols; ++c) mx = std::max(mx, x[c]);
        double sum = 0.0;
        for (int c = 0; c < cols; ++c) {
            y[c] = std::exp(x[c] - mx);
            sum += y[c];
        }
        const double inv = 1.0 / sum;
        for (int c = 0; c < cols; ++c) y[c] *= inv;
    }
}

void softmax_rows_backward(const double* probs, const double* grad_out,
                           int rows, int cols, double* grad_in) {
#pragma omp parallel for schedule(static) if (par(static_cast<int64_t>(rows) * cols))
    for (int r = 0; r < rows; ++r) {
        const double* p = probs + static_cast<int64_t>(r) * cols;
        const double* gy = grad_out + static_cast<int64_t>(r) * cols;
        double* gx = grad_in + static_cast<int64_t>(r) * cols;
        double dot = 0.0;
        for (int c = 0; c < cols; ++c) dot += gy[c] * p[c];
        for (int c = 0; c < cols; ++c) gx[c] = (gy[c] - dot) * p[c];
    }
}

void relu(const double* in, int64_t n, double* out) {
#pragma omp parallel for schedule(static) if (par(n))
    for (int64_t i = 0; i < n; ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
}

void relu_backward(const double* in, const double* grad_out, int64_t n,
                   double* grad_in) {
#pragma omp parallel for schedule(static) if (par(n))
    for (int64_t i = 0; i < n; ++i)
        grad_in[i] += in[i] > 0.0 ? grad_out[i] : 0.0;
}

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
}  // namespace

void gelu(const double* in, int64_t n, double* out) {
#pragma omp parallel for schedule(static) if (par(n))
    for (int64_t i = 0; i < n; ++i) {
        const double x = in[i];
        out[i] = 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
    }
}

void gelu_backward(const double* in, const double* grad_out, int64_t n,
                   double* grad_in) {
#pragma omp parallel for schedule(static) if (par(n))
    for (int64_t i = 0; i < n; ++i) {
        const double x = in[i];
        const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
        const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
        grad_in[i] += grad_out[i] * (cdf + x * pdf);
    }
}

void bias_add_rows(double* out, int rows, int cols, const double* bias) {
#pragma omp parallel for schedule(static) if (par(static_cast<int64_t>(rows) * cols))
    for (int r = 0; r < rows; ++r) {
        double* row = out + static_cast<int64_t>(r) * cols;
        for (int c = 0; c < cols; ++c) row[c] += bias[c];
    }
}

void colsum_accum(const double* grad, int rows, int cols, double* bias_grad) {
    for (int r = 0; r < rows; ++r) {
        const double* row = grad + static_cast<int64_t>(r) * cols;
        for (int c = 0; c < cols; ++c) bias_grad[c] += row[c];
    }
}

void add_inplace(double* dst, const double* src, int64_t n) {
#pragma omp parallel for schedule(static) if (par(n))
    for (int64_t i = 0; i < n; ++i) dst[i] += src[i];
}

void axpy(double alpha, const double* x, double* y, int64_t n) {
#pragma omp parallel for schedule(static) if (par(n))
    for (int64_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale_inplace(double* dst, double alpha, int64_t n) {
#pragma omp parallel for schedule(static) if (par(n))
    for (int64_t i = 0; i < n; ++i) dst[i] *= alpha;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace memotion::kernels
