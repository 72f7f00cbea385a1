#include "memotion/transformer.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "memotion/kernels.hpp"

namespace memotion::nn {

namespace k = memotion::kernels;

namespace {

// Copy head slice a of (T, hidden) into a contiguous (T, head_dim) buffer.
void gather_head(const Tensor& src, int head, int head_dim, Tensor& dst) {
    const int t_len = src.dim(0);
    const int hidden = src.dim(1);
    dst = Tensor({t_len, head_dim});
    for (int t = 0; t < t_len; ++t)
        std::memcpy(dst.data() + static_cast<int64_t>(t) * head_dim,
                    src.data() + static_cast<int64_t>(t) * hidden + head * head_dim,
                    sizeof(double) * static_cast<size_t>(head_dim));
}

void scatter_head_add(const Tensor& src, int head, int head_dim, Tensor& dst) {
    const int t_len = dst.dim(0);
    const int hidden = dst.dim(1);
    for (int t = 0; t < t_len; ++t) {
        double* out = dst.data() + static_cast<int64_t>(t) * hidden + head * head_dim;
        const double* in = src.data() + static_cast<int64_t>(t) * head_dim;
        for (int c = 0; c < head_dim; ++c) out[c] += in[c];
    }
}

}  // namespace

MultiHeadSelfAttention::MultiHeadSelfAttention(const std::string& name, int hidden,
                                               int heads, Rng& rng)
    : hidden_(hidden),
      heads_(heads),
      head_dim_(hidden / heads),
      query_(name + ".query", hidden, hidden, rng),
      key_(name + ".key", hidden, hidden, rng),
      value_(name + ".value", hidden, hidden, rng),
      output_(name + ".output", hidden, hidden, rng) {
    if (hidden % heads != 0)
        throw std::invalid_argument("attention: hidden not divisible by heads");
}

Tensor MultiHeadSelfAttention::forward(const Tensor& x, bool training) {
    const int t_len = x.dim(0);
    q_ = query_.forward(x, training);
    k_ = key_.forward(x, training);
    v_ = value_.forward(x, training);

    const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim_));
    probs_ = Tensor({heads_, t_len, t_len});
    Tensor ctx({t_len, hidden_});
    Tensor qa, ka, va;
    for (int a = 0; a < heads_; ++a) {
        gather_head(q_, a, head_dim_, qa);
        gather_head(k_, a, head_dim_, ka);
        gather_head(v_, a, head_dim_, va);
        double* p = probs_.data() + static_cast<int64_t>(a) * t_len * t_len;
        k::gemm(false, true, t_len, t_len, head_dim_, scale, qa.data(), ka.data(), 0.0, p);
        k::softmax_rows(p, t_len, t_len, p);
        Tensor ctx_a({t_len, head_dim_});
        k::gemm(false, false, t_len, head_dim_, t_len, 1.0, p, va.data(), 0.0, ctx_a.data());
        for (int t = 0; t < t_len; ++t)
            std::memcpy(ctx.data() + static_cast<int64_t>(t) * hidden_ + a * head_dim_,
                        ctx_a.data() + static_cast<int64_t>(t) * head_dim_,
                        sizeof(double) * static_cast<size_t>(head_dim_));
    }
    return output_.forward(ctx, training);
}

Tensor MultiHeadSelfAttention::backward(const Tensor& grad_out) {
    const int t_len = grad_out.dim(0);
    const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim_));

    const Tensor d_ctx = output_.backward(grad_out);
    Tensor dq({t_len, hidden_}), dk({t_len, hidden_}), dv({t_len, hidden_});
    Tensor qa, ka, va, dctx_a;
    for (int a = 0; a < heads_; ++a) {
        gather_head(q_, a, head_dim_, qa);
        gather_head(k_, a, head_dim_, ka);
        gather_head(v_, a, head_dim_, va);
        gather_head(d_ctx, a, head_dim_, dctx_a);
        const double* p = probs_.data() + static_cast<int64_t>(a) * t_len * t_len;

        // dP = dctx V^T ; dV = P^T dctx
        Tensor dp({t_len, t_len});
        k::gemm(false, true, t_len, t_len, head_dim_, 1.0, dctx_a.data(), va.data(), 0.0, dp.data());
        Tensor dva({t_len, head_dim_});
        k::gemm(true, false, t_len, head_dim_, t_len, 1.0, p, dctx_a.data(), 0.0, dva.data());

        Tensor ds({t_len, t_len});
        k::softmax_rows_backward(p, dp.data(), t_len, t_len, ds.data());

        Tensor dqa({t_len, head_dim_});
        k::gemm(false, false, t_len, head_dim_, t_len, scale, ds.data(), ka.data(), 0.0, dqa.data());
        Tensor dka({t_len, head_dim_});
        k::gemm(true, false, t_len, head_dim_, t_len, scale, ds.data(), qa.data(), 0.0, dka.data());

        scatter_head_add(dqa, a, head_dim_, dq);
        scatter_head_add(dka, a, head_dim_, dk);
        scatter_head_add(dva, a, head_dim_, dv);
    }
    Tensor dx = query_.backward(dq);
    k::add_inplace(dx.data(), key_.backward(dk).data(), dx.size());
    k::add_inplace(dx.data(), value_.backward(dv).data(), dx.size());
    return dx;
}

void MultiHeadSelfAttention::collect(std::vector<Parameter*>& out) {
    query_.collect(out);
    key_.collect(out);
    value_.collect(out);
    output_.collect(out);
}

TransformerBlock::TransformerBlock(const std::string& name,
                                   const TransformerConfig& cfg, Rng& rng,
                                   Rng* dropout_rng)
    : attention_(name + ".attention", cfg.hidden, cfg.heads, rng),
      ln_attention_(name + ".ln_attention", cfg.hidden, cfg.layernorm_eps),
      ln_ffn_(name + ".ln_ffn", cfg.hidden, cfg.layernorm_eps),
      ffn_in_(name + ".ffn_in", cfg.hidden, cfg.intermediate, rng),
      ffn_out_(name + ".ffn_out", cfg.intermediate, cfg.hidden, rng),
      drop_attention_(cfg.dropout, dropout_rng),
      drop_ffn_(cfg.dropout, dropout_rng) {}

Tensor TransformerBlock::forward(const Tensor& x, bool training) {
    Tensor a = attention_.forward(x, training);
    a = drop_attention_.forward(a, training);
    k::add_inplace(a.data(), x.data(), a.size());
    const Tensor h1 = ln_attention_.forward(a, training);

    Tensor f = ffn_in_.forward(h1, training);
    f = gelu_.forward(f, training);
    f = ffn_out_.forward(f, training);
    f = drop_ffn_.forward(f, training);
    k::add_inplace(f.data(), h1.data(), f.size());
    return ln_ffn_.forward(f, training);
}

Tensor TransformerBlock::backward(const Tensor& grad_out) {
    Tensor g2 = ln_ffn_.backward(grad_out);  // grad of h1 + ffn path
    Tensor gf = drop_ffn_.backward(g2);
    gf = ffn_out_.backward(gf);
    gf = gelu_.backward(gf);
    gf = ffn_in_.backward(gf);
    k::add_inplace(g2.data(), gf.data(), g2.size());

    Tensor g1 = ln_attention_.backward(g2);  // grad of x + attention path
    Tensor ga = drop_attention_.backward(g1);
    ga = attention_.backward(ga);
    k::add_inplace(g1.data(), ga.data(), g1.size());
    return g1;
}

void TransformerBlock::collect(std::vector<Parameter*>& out) {
    attention_.collect(out);
    ln_attention_.collect(out);
    ln_ffn_.collect(out);
    ffn_in_.collect(out);
    ffn_out_.collect(out);
}

TransformerEncoder::TransformerEncoder(const TransformerConfig& cfg, uint64_t init_seed)
    : cfg_(cfg),
      dropout_rng_(Rng::stream(init_seed, 0x64726F70)),
      init_rng_(Rng::stream(init_seed, 0x696E6974)),
      word_("embeddings.word", cfg.vocab_size, cfg.hidden, init_rng_),
      position_("embeddings.position", cfg.max_position, cfg.hidden, init_rng_),
      segment_("embeddings.segment", cfg.type_vocab, cfg.hidden, init_rng_),
      embed_ln_("embeddings.ln", cfg.hidden, cfg.layernorm_eps),
      embed_drop_(cfg.dropout, &dropout_rng_) {
    if (cfg.vocab_size <= 0)
        throw std::invalid_argument("transformer: vocab_size must be positive");
    blocks_.reserve(static_cast<size_t>(cfg.layers));
    for (int i = 0; i < cfg.layers; ++i)
        blocks_.push_back(std::make_unique<TransformerBlock>(
            "block" + std::to_string(i), cfg, init_rng_, &dropout_rng_));
}

Tensor TransformerEncoder::forward(const std::vector<int>& token_ids,
                                   const std::vector<int>& segment_ids, bool training) {
    if (token_ids.size() != segment_ids.size())
        throw std::invalid_argument("transformer: ids/segments length mismatch");
    const int t_len = static_cast<int>(token_ids.size());
    if (t_len > cfg_.max_position)
        throw std::invalid_argument("transformer: sequence longer than max_position");

    std::vector<int> positions(static_cast<size_t>(t_len));
    for (int t = 0; t < t_len; ++t) positions[static_cast<size_t>(t)] = t;

    Tensor h = word_.forward(token_ids);
    k::add_inplace(h.data(), position_.forward(positions).data(), h.size());
    k::add_inplace(h.data(), segment_.forward(segment_ids).data(), h.size());
    h = embed_ln_.forward(h, training);
    h = embed_drop_.forward(h, training);
    for (auto& block : blocks_) h = block->forward(h, training);
    if (training) {
        ids_cache_ = token_ids;
        segments_cache_ = segment_ids;
        last_len_ = t_len;
    }
    return h;
}

void TransformerEncoder::backward(const Tensor& grad_hidden) {
    Tensor g = grad_hidden;
    for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) g = (*it)->backward(g);
    g = embed_drop_.backward(g);
    g = embed_ln_.backward(g);
    word_.backward(ids_cache_, g);
    std::vector<int> positions(static_cast<size_t>(last_len_));
    for (int t = 0; t < last_len_; ++t) positions[static_cast<size_t>(t)] = t;
    position_.backward(positions, g);
    segment_.backward(segments_cache_, g);
}

Tensor TransformerEncoder::encode_cls(const std::vector<int>& token_ids,
                                      const std::vector<int>& segment_ids, bool training) {
    const Tensor h = forward(token_ids, segment_ids, training);
    Tensor cls({cfg_.hidden});
    std::memcpy(cls.data(), h.data(), sizeof(double) * static_cast<size_t>(cfg_.hidden));
    return cls;
}

void TransformerEncoder::backward_cls(const Tensor& grad_cls) {
    Tensor g({last_len_, cfg_.hidden});
    std::memcpy(g.data(), grad_cls.data(), sizeof(double) * static_cast<size_t>(cfg_.hidden));
    backward(g);
}

void TransformerEncoder::collect(std::vector<Parameter*>& out) {
    word_.collect(out);
    position_.collect(out);
    segment_.collect(out);
    embed_ln_.collect(out);
    for (auto& block : blocks_) block->collect(out);
}

int64_t TransformerEncoder::parameter_count() {
    std::vector<Parameter*> ps;
    collect(ps);
    int64_t n = 0;
    for (const Parameter* p : ps) n += p->value.size();
    return n;
}

}  // namespace memotion::nn
