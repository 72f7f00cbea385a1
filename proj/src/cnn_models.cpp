#include "memotion/cnn_models.hpp"

#include "memotion/kernels.hpp"

namespace memotion::nn {

namespace k = memotion::kernels;

DenseUnit::DenseUnit(const std::string& name, int in_channels, int growth, Rng& rng)
    : in_channels_(in_channels) {
    const int bottleneck = 4 * growth;
    body_.emplace<BatchNorm2d>(name + ".bn1", in_channels);
    body_.emplace<ReLULayer>();
    body_.emplace<Conv2d>(name + ".conv1", in_channels, bottleneck, 1, 1, 0, false, rng);
    body_.emplace<BatchNorm2d>(name + ".bn2", bottleneck);
    body_.emplace<ReLULayer>();
    body_.emplace<Conv2d>(name + ".conv2", bottleneck, growth, 3, 1, 1, false, rng);
}

Tensor DenseUnit::forward(const Tensor& x, bool training) {
    return concat_channels(x, body_.forward(x, training));
}

Tensor DenseUnit::backward(const Tensor& grad_out) {
    Tensor g_direct, g_new;
    split_channels(grad_out, in_channels_, g_direct, g_new);
    Tensor gx = body_.backward(g_new);
    k::add_inplace(gx.data(), g_direct.data(), gx.size());
    return gx;
}

void DenseUnit::collect(std::vector<Parameter*>& out) { body_.collect(out); }

BottleneckBlock::BottleneckBlock(const std::string& name, int in_channels,
                                 int width, int stride, bool project, Rng& rng) {
    const int out_channels = width * kExpansion;
    main_.emplace<Conv2d>(name + ".conv1", in_channels, width, 1, 1, 0, false, rng);
    main_.emplace<BatchNorm2d>(name + ".bn1", width);
    main_.emplace<ReLULayer>();
    main_.emplace<Conv2d>(name + ".conv2", width, width, 3, stride, 1, false, rng);
    main_.emplace<BatchNorm2d>(name + ".bn2", width);
    main_.emplace<ReLULayer>();
    main_.emplace<Conv2d>(name + ".conv3", width, out_channels, 1, 1, 0, false, rng);
    main_.emplace<BatchNorm2d>(name + ".bn3", out_channels);
    if (project) {
        shortcut_.emplace();
        shortcut_->emplace<Conv2d>(name + ".proj", in_channels, out_channels, 1,
                                   stride, 0, false, rng);
        shortcut_->emplace<BatchNorm2d>(name + ".proj_bn", out_channels);
    }
}

Tensor BottleneckBlock::forward(const Tensor& x, bool training) {
    Tensor m = main_.forward(x, training);
    const Tensor s = shortcut_ ? shortcut_->forward(x, training) : x;
    k::add_inplace(m.data(), s.data(), m.size());
    return join_relu_.forward(m, training);
}

Tensor BottleneckBlock::backward(const Tensor& grad_out) {
    const Tensor g = join_relu_.backward(grad_out);
    Tensor gx = main_.backward(g);
    if (shortcut_) {
        k::add_inplace(gx.data(), shortcut_->backward(g).data(), gx.size());
    } else {
        k::add_inplace(gx.data(), g.data(), gx.size());
    }
    return gx;
}

void BottleneckBlock::collect(std::vector<Parameter*>& out) {
    main_.collect(out);
    if (shortcut_) shortcut_->collect(out);
}

std::unique_ptr<Chain> make_densenet121(Rng& rng) {
    constexpr int kGrowth = 32;
    constexpr int kBlocks[] = {6, 12, 24, 16};

    auto net = std::make_unique<Chain>();
    net->emplace<Conv2d>("stem.conv", 3, 64, 7, 2, 3, false, rng);
    net->emplace<BatchNorm2d>("stem.bn", 64);
    net->emplace<ReLULayer>();
    net->emplace<MaxPool2d>(3, 2, 1);

    int channels = 64;
    for (int b = 0; b < 4; ++b) {
        const std::string block = "block" + std::to_string(b);
        for (int u = 0; u < kBlocks[b]; ++u) {
            net->emplace<DenseUnit>(block + ".unit" + std::to_string(u), channels,
                                    kGrowth, rng);
            channels += kGrowth;
        }
        if (b < 3) {
            const std::string trans = "transition" + std::to_string(b);
            net->emplace<BatchNorm2d>(trans + ".bn", channels);
            net->emplace<ReLULayer>();
            channels /= 2;
            net->emplace<Conv2d>(trans + ".conv", channels * 2, channels, 1, 1, 0,
                                 false, rng);
            net->emplace<AvgPool2d>(2, 2);
        }
    }
    net->emplace<BatchNorm2d>("final.bn", channels);
    net->emplace<ReLULayer>();
    net->emplace<GlobalMaxPool>();
    return net;
}

std::unique_ptr<Chain> make_resnet50(Rng& rng) {
    constexpr int kBlocks[] = {3, 4, 6, 3};
    constexpr int kWidths[] = {64, 128, 256, 512};

    auto net = std::make_unique<Chain>();
    net->emplace<Conv2d>("stem.conv", 3, 64, 7, 2, 3, false, rng);
    net->emplace<BatchNorm2d>("stem.bn", 64);
    net->emplace<ReLULayer>();
    net->emplace<MaxPool2d>(3, 2, 1);

    int channels = 64;
    for (int s = 0; s < 4; ++s) {
        const std::string stage = "stage" + std::to_string(s);
        for (int b = 0; b < kBlocks[s]; ++b) {
            const int stride = (s > 0 && b == 0) ? 2 : 1;
            const bool project = b == 0;  // channel change (and stride) on entry
            net->emplace<BottleneckBlock>(stage + ".block" + std::to_string(b),
                                          channels, kWidths[s], stride, project, rng);
            channels = kWidths[s] * BottleneckBlock::kExpansion;
        }
    }
    net->emplace<GlobalMaxPool>();
    return net;
}

int64_t trainable_parameter_count(Layer& layer) {
    std::vector<Parameter*> ps;
    layer.collect(ps);
    int64_t n = 0;
    for (const Parameter* p : ps)
        if (p->trainable) n += p->value.size();
    return n;
}

}  // namespace memotion::nn
