#pragma once

#include <memory>
#include <string>
#include <vector>

#include "memotion/rng.hpp"
#include "memotion/tensor.hpp"

namespace memotion::nn {

struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
    bool trainable = true;

    Parameter() = default;
    Parameter(std::string n, Tensor v)
        : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

    void zero_grad() { grad.fill(0.0); }
};

// Keras-style Glorot uniform, the initialization for every added layer.
void glorot_uniform(Tensor& t, int fan_in, int fan_out, Rng& rng);

// Single-example layer: tensors flow one record at a time, gradients
// accumulate into Parameter::grad across a batch. backward must follow a
// forward(training=true) call on the same input.
class Layer {
public:
    virtual ~Layer() = default;
    virtual Tensor forward(const Tensor& x, bool training) = 0;
    virtual Tensor backward(const Tensor& grad_out) = 0;
    virtual void collect(std::vector<Parameter*>& out) {}
};

// y = x W + b with W (in, out). Accepts rank-1 (in,) or rank-2 (rows, in).
class Dense : public Layer {
public:
    Dense(std::string name, int in_dim, int out_dim, Rng& rng, bool use_bias = true);

    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& grad_out) override;
    void collect(std::vector<Parameter*>& out) override;

    Parameter& kernel() { return kernel_; }
    Parameter& bias() { return bias_; }
    int in_dim() const { return in_dim_; }
    int out_dim() const { return out_dim_; }

private:
    int in_dim_, out_dim_;
    bool use_bias_;
    Parameter kernel_, bias_;
    Tensor x_cache_;
    bool input_was_vector_ = false;
};

// Inverted dropout; identity when not training or rate == 0.
class Dropout : public Layer {
public:
    Dropout(double rate, Rng* rng) : rate_(rate), rng_(rng) {}

    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& grad_out) override;

private:
    double rate_;
    Rng* rng_;
    Tensor mask_;
    bool active_ = false;
};

class ReLULayer : public Layer {
public:
    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& grad_out) override;

private:
    Tensor x_cache_;
};

class GELULayer : public Layer {
public:
    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& grad_out) override;

private:
    Tensor x_cache_;
};

// Normalizes over the last dimension of a (rows, cols) or (cols,) tensor.
class LayerNorm : public Layer {
public:
    LayerNorm(std::string name, int dim, double eps = 1e-12);

    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& grad_out) override;
    void collect(std::vector<Parameter*>& out) override;

    Parameter& gamma() { return gamma_; }
    Parameter& beta() { return beta_; }

private:
    int dim_;
    double eps_;
    Parameter gamma_, beta_;
    Tensor x_cache_, mean_, inv_std_;
};

// Lookup table: ids -> (len(ids), dim). Gradient scatters into used rows.
class Embedding {
public:
    Embedding(std::string name, int vocab, int dim, Rng& rng);

    Tensor forward(const std::vector<int>& ids) const;
    void backward(const std::vector<int>& ids, const Tensor& grad_out);
    void collect(std::vector<Parameter*>& out) { out.push_back(&table_); }

    Parameter& table() { return table_; }
    int vocab() const { return table_.value.dim(0); }
    int dim() const { return table_.value.dim(1); }

private:
    Parameter table_;
};

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

class Adam {
public:
    Adam(std::vector<Parameter*> params, AdamConfig cfg);

    void step();
    void zero_grad();
    void set_learning_rate(double lr) { cfg_.learning_rate = lr; }
    const AdamConfig& config() const { return cfg_; }
    long step_count() const { return t_; }

private:
    std::vector<Parameter*> params_;
    std::vector<Tensor> m_, v_;
    AdamConfig cfg_;
    long t_ = 0;
};

}  // namespace memotion::nn
