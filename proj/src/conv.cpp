#include "memotion/conv.hpp"

#include <cstring>
#include <stdexcept>

#include "memotion/kernels.hpp"

namespace memotion::nn {

namespace k = memotion::kernels;

Conv2d::Conv2d(std::string name, int c_in, int c_out, int kernel, int stride,
               int pad, bool use_bias, Rng& rng)
    : c_in_(c_in),
      c_out_(c_out),
      kernel_(kernel),
      stride_(stride),
      pad_(pad),
      use_bias_(use_bias),
      weights_(name + ".weights", Tensor({c_out, c_in, kernel, kernel})),
      bias_(name + ".bias", Tensor({c_out})) {
    const int receptive = c_in * kernel * kernel;
    glorot_uniform(weights_.value, receptive, c_out * kernel * kernel, rng);
}

Tensor Conv2d::forward(const Tensor& x, bool training) {
    if (x.rank() != 3 || x.dim(0) != c_in_)
        throw std::invalid_argument("Conv2d " + weights_.name + ": bad input " + x.shape_str());
    in_h_ = x.dim(1);
    in_w_ = x.dim(2);
    const int out_h = k::conv_out_extent(in_h_, kernel_, stride_, pad_);
    const int out_w = k::conv_out_extent(in_w_, kernel_, stride_, pad_);
    const int ckk = c_in_ * kernel_ * kernel_;
    const int spatial = out_h * out_w;

    Tensor col({ckk, spatial});
    k::im2col(x.data(), c_in_, in_h_, in_w_, kernel_, kernel_, stride_, pad_, col.data());

    Tensor y({c_out_, out_h, out_w});
    k::gemm(false, false, c_out_, spatial, ckk, 1.0, weights_.value.data(),
            col.data(), 0.0, y.data());
    if (use_bias_) {
        double* out = y.data();
        for (int co = 0; co < c_out_; ++co) {
            const double b = bias_.value[co];
            for (int s = 0; s < spatial; ++s) out[static_cast<int64_t>(co) * spatial + s] += b;
        }
    }
    if (training) col_cache_ = std::move(col);
    return y;
}

Tensor Conv2d::backward(const Tensor& grad_out) {
    const int out_h = grad_out.dim(1);
    const int out_w = grad_out.dim(2);
    const int spatial = out_h * out_w;
    const int ckk = c_in_ * kernel_ * kernel_;

    // dW += dy * col^T
    k::gemm(false, true, c_out_, ckk, spatial, 1.0, grad_out.data(),
            col_cache_.data(), 1.0, weights_.grad.data());
    if (use_bias_) {
        for (int co = 0; co < c_out_; ++co) {
            double acc = 0.0;
            const double* row = grad_out.data() + static_cast<int64_t>(co) * spatial;
            for (int s = 0; s < spatial; ++s) acc += row[s];
            bias_.grad[co] += acc;
        }
    }
    // dcol = W^T * dy, then fold back to image space.
    Tensor dcol({ckk, spatial});
    k::gemm(true, false, ckk, spatial, c_out_, 1.0, weights_.value.data(),
            grad_out.data(), 0.0, dcol.data());
    Tensor gx({c_in_, in_h_, in_w_});
    k::col2im(dcol.data(), c_in_, in_h_, in_w_, kernel_, kernel_, stride_, pad_, gx.data());
    col_cache_ = Tensor();
    return gx;
}

void Conv2d::collect(std::vector<Parameter*>& out) {
    out.push_back(&weights_);
    if (use_bias_) out.push_back(&bias_);
}

BatchNorm2d::BatchNorm2d(std::string name, int channels, double eps)
    : channels_(channels),
      eps_(eps),
      gamma_(name + ".gamma", Tensor({channels})),
      beta_(name + ".beta", Tensor({channels})),
      running_mean_(name + ".running_mean", Tensor({channels})),
      running_var_(name + ".running_var", Tensor({channels})) {
    gamma_.value.fill(1.0);
    running_var_.value.fill(1.0);
    running_mean_.trainable = false;
    running_var_.trainable = false;
}

Tensor BatchNorm2d::forward(const Tensor& x, bool training) {
    const int spatial = x.dim(1) * x.dim(2);
    Tensor y(x.shape());
    k::batchnorm_infer(x.data(), channels_, spatial, gamma_.value.data(),
                       beta_.value.data(), running_mean_.value.data(),
                       running_var_.value.data(), eps_, y.data());
    if (training) x_cache_ = x;
    return y;
}

Tensor BatchNorm2d::backward(const Tensor& grad_out) {
    const int spatial = grad_out.dim(1) * grad_out.dim(2);
    Tensor gx(grad_out.shape());
    k::batchnorm_infer_backward(x_cache_.data(), grad_out.data(), channels_,
                                spatial, gamma_.value.data(),
                                running_mean_.value.data(),
                                running_var_.value.data(), eps_, gx.data(),
                                gamma_.grad.data(), beta_.grad.data());
    return gx;
}

void BatchNorm2d::collect(std::vector<Parameter*>& out) {
    out.push_back(&gamma_);
    out.push_back(&beta_);
    out.push_back(&running_mean_);
    out.push_back(&running_var_);
}

Tensor MaxPool2d::forward(const Tensor& x, bool training) {
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    const int out_h = k::conv_out_extent(h, kernel_, stride_, pad_);
    const int out_w = k::conv_out_extent(w, kernel_, stride_, pad_);
    Tensor y({c, out_h, out_w});
    argmax_.assign(static_cast<size_t>(y.size()), 0);
    k::maxpool2d(x.data(), c, h, w, kernel_, stride_, pad_, y.data(), argmax_.data());
    if (training) in_shape_ = x.shape();
    return y;
}

Tensor MaxPool2d::backward(const Tensor& grad_out) {
    Tensor gx(in_shape_);
    k::maxpool2d_backward(grad_out.data(), argmax_.data(), grad_out.size(), gx.data());
    return gx;
}

Tensor AvgPool2d::forward(const Tensor& x, bool training) {
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    const int out_h = k::conv_out_extent(h, kernel_, stride_, 0);
    const int out_w = k::conv_out_extent(w, kernel_, stride_, 0);
    Tensor y({c, out_h, out_w});
    k::avgpool2d(x.data(), c, h, w, kernel_, stride_, y.data());
    if (training) in_shape_ = x.shape();
    return y;
}

Tensor AvgPool2d::backward(const Tensor& grad_out) {
    Tensor gx(in_shape_);
    k::avgpool2d_backward(grad_out.data(), in_shape_[0], in_shape_[1],
                          in_shape_[2], kernel_, stride_, gx.data());
    return gx;
}

Tensor GlobalMaxPool::forward(const Tensor& x, bool training) {
    const int c = x.dim(0);
    const int spatial = x.dim(1) * x.dim(2);
    Tensor y({c});
    argmax_.assign(static_cast<size_t>(c), 0);
    k::global_maxpool(x.data(), c, spatial, y.data(), argmax_.data());
    if (training) in_shape_ = x.shape();
    return y;
}

Tensor GlobalMaxPool::backward(const Tensor& grad_out) {
    Tensor gx(in_shape_);
    k::global_maxpool_backward(grad_out.data(), argmax_.data(), in_shape_[0],
                               in_shape_[1] * in_shape_[2], gx.data());
    return gx;
}

Tensor Chain::forward(const Tensor& x, bool training) {
    Tensor cur = x;
    for (auto& layer : layers_) cur = layer->forward(cur, training);
    return cur;
}

Tensor Chain::backward(const Tensor& grad_out) {
    Tensor cur = grad_out;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
        cur = (*it)->backward(cur);
    return cur;
}

void Chain::collect(std::vector<Parameter*>& out) {
    for (auto& layer : layers_) layer->collect(out);
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2))
        throw std::invalid_argument("concat_channels: spatial shapes differ");
    Tensor y({a.dim(0) + b.dim(0), a.dim(1), a.dim(2)});
    std::memcpy(y.data(), a.data(), sizeof(double) * static_cast<size_t>(a.size()));
    std::memcpy(y.data() + a.size(), b.data(), sizeof(double) * static_cast<size_t>(b.size()));
    return y;
}

void split_channels(const Tensor& joined, int first_channels, Tensor& a, Tensor& b) {
    const int h = joined.dim(1), w = joined.dim(2);
    a = Tensor({first_channels, h, w});
    b = Tensor({joined.dim(0) - first_channels, h, w});
    std::memcpy(a.data(), joined.data(), sizeof(double) * static_cast<size_t>(a.size()));
    std::memcpy(b.data(), joined.data() + a.size(), sizeof(double) * static_cast<size_t>(b.size()));
}

}  // namespace memotion::nn
