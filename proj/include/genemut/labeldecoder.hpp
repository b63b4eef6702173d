#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "genemut/autodiff.hpp"
#include "genemut/bindings.hpp"
#include "genemut/optim.hpp"

namespace genemut {

// Label decoder: gene priors query the slide's patch features through
// cross-attention layers, then a gene-wise projection maps each fused gene
// feature to its mutation logit.

struct DecoderConfig {
    std::size_t num_genes = 0;
    std::size_t dim = 64;
    std::size_t layers = 2;
    double ln_eps = 1e-5;
};

// Parameter names:
//   dec.mk, dec.mv                             (d x d, shared by all layers)
//   dec.layer<i>.ffn.w1 / .ffn.b1 / .ffn.w2 / .ffn.b2
//   dec.layer<i>.ln1.gain / .ln1.bias / .ln2.gain / .ln2.bias
//   dec.proj                                   (K x d; row k is gene k's vector)
void init_decoder_params(ParamStore& params, const DecoderConfig& cfg,
                         std::uint64_t seed);

struct DecoderLayerVars {
    ad::Var ffn_w1, ffn_b1, ffn_w2, ffn_b2;
    ad::Var ln1_gain, ln1_bias, ln2_gain, ln2_bias;
};

struct DecoderVars {
    ad::Var mk = nullptr;
    ad::Var mv = nullptr;
    std::vector<DecoderLayerVars> layers;
    ad::Var proj = nullptr;
};

DecoderVars bind_decoder(ad::Tape& tape, VarBindings& bindings,
                         const ParamStore& params, const DecoderConfig& cfg);

// K_LD = F M_K and V_LD = F M_V, computed once per slide and reused by every
// layer. Throws on an empty slide (N = 0).
std::pair<ad::Var, ad::Var> project_kv(ad::Tape& tape, ad::Var features, ad::Var mk,
                                       ad::Var mv);

// Q_hat = LN(softmax(Q K^T / sqrt(d)) V + Q); out = LN(FFN(Q_hat) + Q_hat).
// When attention_out is non-null it receives a copy of the softmax weights.
ad::Var decoder_layer(ad::Tape& tape, ad::Var q, ad::Var k_ld, ad::Var v_ld,
                      const DecoderLayerVars& layer, double ln_eps,
                      Tensor* attention_out = nullptr);

// y_k = <row k of Q, row k of proj>; per-gene vectors, not a shared map.
ad::Var gene_wise_projection(ad::Tape& tape, ad::Var q_final, ad::Var proj);

struct DecodeResult {
    ad::Var logits = nullptr;
    Tensor attention;  // final layer's K x N softmax weights
};

DecodeResult decode(ad::Tape& tape, ad::Var gene_priors, ad::Var features,
                    const DecoderVars& vars, double ln_eps);

// Ablation stand-in for the fusion module: one shared linear map over the
// gene priors gated by the mean-pooled patch features. Parameter: fusion.w
// ([d]). Declared baseline, not a formula from the method.
void init_matrix_fusion_params(ParamStore& params, std::size_t dim,
                               std::uint64_t seed);
ad::Var matrix_fusion_baseline(ad::Tape& tape, ad::Var gene_priors, ad::Var features,
                               ad::Var fusion_w);

struct Prediction {
    Tensor probs;                     // sigmoid(logits)
    std::vector<std::uint8_t> calls;  // probs > beta, strict
};

Prediction predict(const Tensor& logits, double beta = 0.5);

}  // namespace genemut
