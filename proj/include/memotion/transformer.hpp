#pragma once

#include <memory>
#include <string>
#include <vector>

#include "memotion/nn.hpp"
#include "memotion/tensor.hpp"

namespace memotion::nn {

struct TransformerConfig {
    int vocab_size = 0;
    int hidden = 768;
    int layers = 12;
    int heads = 12;
    int intermediate = 3072;
    int max_position = 512;
    int type_vocab = 2;
    double layernorm_eps = 1e-12;
    double dropout = 0.0;  // internal dropout; the task head owns its own

    // The 12-layer, 768-hidden, 12-head geometry of the cased base model.
    static TransformerConfig base_uncut(int vocab) {
        TransformerConfig c;
        c.vocab_size = vocab;
        return c;
    }
};

// Bidirectional self-attention over one unpadded sequence (T, hidden).
class MultiHeadSelfAttention {
public:
    MultiHeadSelfAttention(const std::string& name, int hidden, int heads, Rng& rng);

    Tensor forward(const Tensor& x, bool training);
    Tensor backward(const Tensor& grad_out);
    void collect(std::vector<Parameter*>& out);

private:
    int hidden_, heads_, head_dim_;
    Dense query_, key_, value_, output_;
    Tensor q_, k_, v_;      // (T, hidden)
    Tensor probs_;          // (heads, T, T)
};

// Post-layernorm block: attention and feed-forward sublayers with residuals.
class TransformerBlock {
public:
    TransformerBlock(const std::string& name, const TransformerConfig& cfg, Rng& rng,
                     Rng* dropout_rng);

    Tensor forward(const Tensor& x, bool training);
    Tensor backward(const Tensor& grad_out);
    void collect(std::vector<Parameter*>& out);

private:
    MultiHeadSelfAttention attention_;
    LayerNorm ln_attention_, ln_ffn_;
    Dense ffn_in_, ffn_out_;
    GELULayer gelu_;
    Dropout drop_attention_, drop_ffn_;
};

// Token + position + segment embeddings, encoder stack, final hidden states.
// The sequence embedding is the hidden state at the leading classification
// token of the last layer.
class TransformerEncoder {
public:
    TransformerEncoder(const TransformerConfig& cfg, uint64_t init_seed);

    // (T, hidden) final hidden states.
    Tensor forward(const std::vector<int>& token_ids,
                   const std::vector<int>& segment_ids, bool training);
    // Gradient w.r.t. the full hidden-state matrix of the last forward.
    void backward(const Tensor& grad_hidden);

    Tensor encode_cls(const std::vector<int>& token_ids,
                      const std::vector<int>& segment_ids, bool training);
    // Backward entry point matching encode_cls.
    void backward_cls(const Tensor& grad_cls);

    void collect(std::vector<Parameter*>& out);
    const TransformerConfig& config() const { return cfg_; }
    int64_t parameter_count();

private:
    TransformerConfig cfg_;
    Rng dropout_rng_;
    Rng init_rng_;  // declared before the layers so construction order pins init draws
    Embedding word_, position_, segment_;
    LayerNorm embed_ln_;
    Dropout embed_drop_;
    std::vector<std::unique_ptr<TransformerBlock>> blocks_;
    std::vector<int> ids_cache_, segments_cache_;
    int last_len_ = 0;
};

}  // namespace memotion::nn
