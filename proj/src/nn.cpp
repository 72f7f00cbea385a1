#include "memotion/nn.hpp"

#include <cmath>
#include <stdexcept>

#include "memotion/kernels.hpp"

namespace memotion::nn {

namespace k = memotion::kernels;

void glorot_uniform(Tensor& t, int fan_in, int fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-limit, limit);
}

Dense::Dense(std::string name, int in_dim, int out_dim, Rng& rng, bool use_bias)
    : in_dim_(in_dim),
      out_dim_(out_dim),
      use_bias_(use_bias),
      kernel_(name + ".kernel", Tensor({in_dim, out_dim})),
      bias_(name + ".bias", Tensor({out_dim})) {
    glorot_uniform(kernel_.value, in_dim, out_dim, rng);
}

Tensor Dense::forward(const Tensor& x, bool training) {
    input_was_vector_ = x.rank() == 1;
    const Tensor x2 = input_was_vector_ ? x.reshaped({1, in_dim_}) : x;
    if (x2.rank() != 2 || x2.dim(1) != in_dim_)
        throw std::invalid_argument("Dense " + kernel_.name + ": bad input shape " + x.shape_str());
    const int rows = x2.dim(0);
    Tensor y({rows, out_dim_});
    k::gemm(false, false, rows, out_dim_, in_dim_, 1.0, x2.data(),
            kernel_.value.data(), 0.0, y.data());
    if (use_bias_) k::bias_add_rows(y.data(), rows, out_dim_, bias_.value.data());
    if (training) x_cache_ = x2;
    return input_was_vector_ ? y.reshaped({out_dim_}) : y;
}

Tensor Dense::backward(const Tensor& grad_out) {
    const Tensor gy = grad_out.rank() == 1 ? grad_out.reshaped({1, out_dim_}) : grad_out;
    const int rows = gy.dim(0);
    // dW += x^T gy, db += column sums, dx = gy W^T
    k::gemm(true, false, in_dim_, out_dim_, rows, 1.0, x_cache_.data(),
            gy.data(), 1.0, kernel_.grad.data());
    if (use_bias_) k::colsum_accum(gy.data(), rows, out_dim_, bias_.grad.data());
    Tensor gx({rows, in_dim_});
    k::gemm(false, true, rows, in_dim_, out_dim_, 1.0, gy.data(),
            kernel_.value.data(), 0.0, gx.data());
    return input_was_vector_ ? gx.reshaped({in_dim_}) : gx;
}

void Dense::collect(std::vector<Parameter*>& out) {
    out.push_back(&kernel_);
    if (use_bias_) out.push_back(&bias_);
}

Tensor Dropout::forward(const Tensor& x, bool training) {
    active_ = training && rate_ > 0.0;
    if (!active_) return x;
    const double keep = 1.0 - rate_;
    const double scale = 1.0 / keep;
    mask_ = Tensor(x.shape());
    Tensor y(x.shape());
    for (int64_t i = 0; i < x.size(); ++i) {
        mask_[i] = rng_->uniform() < keep ? scale : 0.0;
        y[i] = x[i] * mask_[i];
    }
    return y;
}

Tensor Dropout::backward(const Tensor& grad_out) {
    if (!active_) return grad_out;
    Tensor gx(grad_out.shape());
    for (int64_t i = 0; i < grad_out.size(); ++i) gx[i] = grad_out[i] * mask_[i];
    return gx;
}

Tensor ReLULayer::forward(const Tensor& x, bool training) {
    if (training) x_cache_ = x;
    Tensor y(x.shape());
    k::relu(x.data(), x.size(), y.data());
    return y;
}

Tensor ReLULayer::backward(const Tensor& grad_out) {
    Tensor gx(grad_out.shape());
    k::relu_backward(x_cache_.data(), grad_out.data(), grad_out.size(), gx.data());
    return gx;
}

Tensor GELULayer::forward(const Tensor& x, bool training) {
    if (training) x_cache_ = x;
    Tensor y(x.shape());
    k::gelu(x.data(), x.size(), y.data());
    return y;
}

Tensor GELULayer::backward(const Tensor& grad_out) {
    Tensor gx(grad_out.shape());
    k::gelu_backward(x_cache_.data(), grad_out.data(), grad_out.size(), gx.data());
    return gx;
}

LayerNorm::LayerNorm(std::string name, int dim, double eps)
    : dim_(dim),
      eps_(eps),
      gamma_(name + ".gamma", Tensor({dim})),
      beta_(name + ".beta", Tensor({dim})) {
    gamma_.value.fill(1.0);
}

Tensor LayerNorm::forward(const Tensor& x, bool training) {
    const bool vec = x.rank() == 1;
    const Tensor x2 = vec ? x.reshaped({1, dim_}) : x;
    const int rows = x2.dim(0);
    Tensor y({rows, dim_});
    mean_ = Tensor({rows});
    inv_std_ = Tensor({rows});
    k::layernorm(x2.data(), rows, dim_, gamma_.value.data(), beta_.value.data(),
                 eps_, y.data(), mean_.data(), inv_std_.data());
    if (training) x_cache_ = x2;
    return vec ? y.reshaped({dim_}) : y;
}

Tensor LayerNorm::backward(const Tensor& grad_out) {
    const bool vec = grad_out.rank() == 1;
    const Tensor gy = vec ? grad_out.reshaped({1, dim_}) : grad_out;
    const int rows = gy.dim(0);
    Tensor gx({rows, dim_});
    k::layernorm_backward(x_cache_.data(), gy.data(), rows, dim_,
                          gamma_.value.data(), mean_.data(), inv_std_.data(),
                          gx.data(), gamma_.grad.data(), beta_.grad.data());
    return vec ? gx.reshaped({dim_}) : gx;
}

void LayerNorm::collect(std::vector<Parameter*>& out) {
    out.push_back(&gamma_);
    out.push_back(&beta_);
}

Embedding::Embedding(std::string name, int vocab, int dim, Rng& rng)
    : table_(std::move(name), Tensor({vocab, dim})) {
    glorot_uniform(table_.value, vocab, dim, rng);
}

Tensor Embedding::forward(const std::vector<int>& ids) const {
    const int d = dim();
    Tensor y({static_cast<int>(ids.size()), d});
    for (size_t t = 0; t < ids.size(); ++t) {
        const int id = ids[t];
        if (id < 0 || id >= vocab())
            throw std::out_of_range(table_.name + ": token id " + std::to_string(id) +
                                    " outside vocabulary of size " + std::to_string(vocab()));
        const double* src = table_.value.data() + static_cast<int64_t>(id) * d;
        double* dst = y.data() + static_cast<int64_t>(t) * d;
        for (int c = 0; c < d; ++c) dst[c] = src[c];
    }
    return y;
}

void Embedding::backward(const std::vector<int>& ids, const Tensor& grad_out) {
    const int d = dim();
    for (size_t t = 0; t < ids.size(); ++t) {
        double* dst = table_.grad.data() + static_cast<int64_t>(ids[t]) * d;
        const double* src = grad_out.data() + static_cast<int64_t>(t) * d;
        for (int c = 0; c < d; ++c) dst[c] += src[c];
    }
}

Adam::Adam(std::vector<Parameter*> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Parameter* p : params_) {
        m_.emplace_back(p->value.shape());
        v_.emplace_back(p->value.shape());
    }
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
        Parameter& p = *params_[i];
        if (!p.trainable) continue;
        double* w = p.value.data();
        const double* g = p.grad.data();
        double* m = m_[i].data();
        double* v = v_[i].data();
        const int64_t n = p.value.size();
        for (int64_t j = 0; j < n; ++j) {
            m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
            v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            w[j] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon);
        }
    }
}

void Adam::zero_grad() {
    for (Parameter* p : params_) p->zero_grad();
}

}  // namespace memotion::nn
