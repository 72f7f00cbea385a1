#pragma once

#include <memory>
#include <string>
#include <vector>

#include "memotion/nn.hpp"
#include "memotion/tensor.hpp"

// Spatial layers over single-image (C,H,W) tensors.
namespace memotion::nn {

class Conv2d : public Layer {
public:
    Conv2d(std::string name, int c_in, int c_out, int kernel, int stride,
           int pad, bool use_bias, Rng& rng);

    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& grad_out) override;
    void collect(std::vector<Parameter*>& out) override;

    Parameter& weights() { return weights_; }

private:
    int c_in_, c_out_, kernel_, stride_, pad_;
    bool use_bias_;
    Parameter weights_;  // (c_out, c_in, kernel, kernel)
    Parameter bias_;
    Tensor col_cache_;
    int in_h_ = 0, in_w_ = 0;
};

// Runs on stored running statistics in both modes; gamma/beta are the
// trainable parameters, mean/var are checkpointed buffers.
class BatchNorm2d : public Layer {
public:
    BatchNorm2d(std::string name, int channels, double eps = 1e-5);

    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& grad_out) override;
    void collect(std::vector<Parameter*>& out) override;

    Parameter& gamma() { return gamma_; }
    Parameter& beta() { return beta_; }
    Parameter& running_mean() { return running_mean_; }
    Parameter& running_var() { return running_var_; }

private:
    int channels_;
    double eps_;
    Parameter gamma_, beta_, running_mean_, running_var_;
    Tensor x_cache_;
};

class MaxPool2d : public Layer {
public:
    MaxPool2d(int kernel, int stride, int pad)
        : kernel_(kernel), stride_(stride), pad_(pad) {}

    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& grad_out) override;

private:
    int kernel_, stride_, pad_;
    std::vector<int> argmax_;
    std::vector<int> in_shape_;
};

class AvgPool2d : public Layer {
public:
    AvgPool2d(int kernel, int stride) : kernel_(kernel), stride_(stride) {}

    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& grad_out) override;

private:
    int kernel_, stride_;
    std::vector<int> in_shape_;
};

// (C,H,W) -> (C,)
class GlobalMaxPool : public Layer {
public:
    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& grad_out) override;

private:
    std::vector<int> argmax_;
    std::vector<int> in_shape_;
};

// Sequential composition of layers.
class Chain : public Layer {
public:
    Chain() = default;

    template <typename L, typename... Args>
    L* emplace(Args&&... args) {
        auto layer = std::make_unique<L>(std::forward<Args>(args)...);
        L* raw = layer.get();
        layers_.push_back(std::move(layer));
        return raw;
    }

    void append(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }

    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& grad_out) override;
    void collect(std::vector<Parameter*>& out) override;

    size_t size() const { return layers_.size(); }

private:
    std::vector<std::unique_ptr<Layer>> layers_;
};

// Channel-dimension helpers for (C,H,W) tensors.
Tensor concat_channels(const Tensor& a, const Tensor& b);
void split_channels(const Tensor& joined, int first_channels, Tensor& a, Tensor& b);

}  // namespace memotion::nn
