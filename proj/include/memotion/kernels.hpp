#pragma once

#include <cstdint>
#include <vector>

// Compute kernels behind the layer stack. Every kernel is deterministic:
// each output element is produced by exactly one thread with a fixed
// accumulation order, so the parallel implementations are bitwise equal to
// their serial references at any thread count. Tests enforce that equality;
// bench/kernel_bench compares their throughput.
namespace memotion::kernels {

// Process-wide switch; kernels run serially when disabled.
void set_parallel(bool enabled);
bool parallel_enabled();

// C(m x n) = alpha * op(A) * op(B) + beta * C.
// A is (m x k) row-major, or (k x m) when trans_a; B likewise with n.
void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha,
          const double* a, const double* b, double beta, double* c);

// Naive triple-loop reference, same accumulation order as gemm.
void gemm_serial(bool trans_a, bool trans_b, int m, int n, int k, double alpha,
                 const double* a, const double* b, double beta, double* c);

// Convolution lowering: input (C,H,W) -> col (C*kh*kw, out_h*out_w) with
// zero padding. col2im is the adjoint scatter-add.
void im2col(const double* in, int channels, int h, int w, int kh, int kw,
            int stride, int pad, double* col);
void col2im(const double* col, int channels, int h, int w, int kh, int kw,
            int stride, int pad, double* in);

inline int conv_out_extent(int in, int kernel, int stride, int pad) {
    return (in + 2 * pad - kernel) / stride + 1;
}

// Direct 2-D convolution, kept as the reference for the im2col+gemm path.
// weights (c_out, c_in, kh, kw), bias (c_out) or nullptr.
void conv2d_serial(const double* in, int c_in, int h, int w,
                   const double* weights, const double* bias, int c_out,
                   int kh, int kw, int stride, int pad, double* out);

// Max pooling with -inf padding semantics; argmax holds flat input indices.
void maxpool2d(const double* in, int channels, int h, int w, int kernel,
               int stride, int pad, double* out, int* argmax);
void maxpool2d_backward(const double* grad_out, const int* argmax,
                        int64_t out_count, double* grad_in);

// Average pooling, valid windows only.
void avgpool2d(const double* in, int channels, int h, int w, int kernel,
               int stride, double* out);
void avgpool2d_backward(const double* grad_out, int channels, int h, int w,
                        int kernel, int stride, double* grad_in);

// (C,H,W) -> (C,), spatial argmax per channel.
void global_maxpool(const double* in, int channels, int spatial, double* out,
                    int* argmax);
void global_maxpool_backward(const double* grad_out, const int* argmax,
                             int channels, int spatial, double* grad_in);

// Per-channel affine using running statistics.
void batchnorm_infer(const double* in, int channels, int spatial,
                     const double* gamma, const double* beta,
                     const double* mean, const double* var, double eps,
                     double* out);
void batchnorm_infer_backward(const double* in, const double* grad_out,
                              int channels, int spatial, const double* gamma,
                              const double* mean, const double* var,
                              double eps, double* grad_in, double* grad_gamma,
                              double* grad_beta);

// Row-wise layer normalization over the last dimension.
void layernorm(const double* in, int rows, int cols, const double* gamma,
               const double* beta, double eps, double* out, double* mean,
               double* inv_std);
void layernorm_backward(const double* in, const double* grad_out, int rows,
                        int cols, const double* gamma, const double* mean,
                        const double* inv_std, double* grad_in,
                        double* grad_gamma, double* grad_beta);

// Numerically shifted row-wise softmax (in place allowed: out may equal in).
void softmax_rows(const double* in, int rows, int cols, double* out);
// grad_in = (grad_out - sum(grad_out * probs)) * probs, row-wise.
void softmax_rows_backward(const double* probs, const double* grad_out,
                           int rows, int cols, double* grad_in);

void relu(const double* in, int64_t n, double* out);
void relu_backward(const double* in, const double* grad_out, int64_t n,
                   double* grad_in);

// Exact erf-based GELU.
void gelu(const double* in, int64_t n, double* out);
void gelu_backward(const double* in, const double* grad_out, int64_t n,
                   double* grad_in);

// out[r, :] += bias for every row r.
void bias_add_rows(double* out, int rows, int cols, const double* bias);
// bias_grad[c] += sum over rows of grad[r, c].
void colsum_accum(const double* grad, int rows, int cols, double* bias_grad);

void add_inplace(double* dst, const double* src, int64_t n);
void axpy(double alpha, const double* x, double* y, int64_t n);
void scale_inplace(double* dst, double alpha, int64_t n);

double sigmoid(double x);

}  // namespace memotion::kernels
