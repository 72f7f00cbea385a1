#pragma once

#include <memory>
#include <optional>
#include <string>

#include "memotion/conv.hpp"

namespace memotion::nn {

// One densely connected unit: out = concat(x, f(x)) where f is the
// BN-ReLU-1x1 bottleneck followed by BN-ReLU-3x3 producing `growth` channels.
class DenseUnit : public Layer {
public:
    DenseUnit(const std::string& name, int in_channels, int growth, Rng& rng);

    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& grad_out) override;
    void collect(std::vector<Parameter*>& out) override;

private:
    int in_channels_;
    Chain body_;
};

// Residual bottleneck: 1x1 reduce, 3x3 (carries the stride), 1x1 expand,
// plus identity or projected shortcut, ReLU after the join.
class BottleneckBlock : public Layer {
public:
    BottleneckBlock(const std::string& name, int in_channels, int width,
                    int stride, bool project, Rng& rng);

    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& grad_out) override;
    void collect(std::vector<Parameter*>& out) override;

    static constexpr int kExpansion = 4;

private:
    Chain main_;
    std::optional<Chain> shortcut_;
    ReLULayer join_relu_;
    Tensor sum_cache_;
};

// 121-layer densely connected feature extractor, blocks (6,12,24,16),
// growth 32, global-max-pooled to a 1024-d vector.
std::unique_ptr<Chain> make_densenet121(Rng& rng);
constexpr int kDenseNet121Dim = 1024;

// 50-layer residual feature extractor, stages (3,4,6,3), global-max-pooled
// to a 2048-d vector.
std::unique_ptr<Chain> make_resnet50(Rng& rng);
constexpr int kResNet50Dim = 2048;

int64_t trainable_parameter_count(Layer& layer);

}  // namespace memotion::nn
