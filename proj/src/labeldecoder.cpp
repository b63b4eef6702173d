#include "genemut/labeldecoder.hpp"

#include <cmath>
#include <string>

#include "genemut/errors.hpp"
#include "genemut/rng.hpp"

namespace genemut {

namespace {

std::string layer_prefix(std::size_t i) {
    return "dec.layer" + std::to_string(i) + ".";
}

}  // namespace

void init_decoder_params(ParamStore& params, const DecoderConfig& cfg,
                         std::uint64_t seed) {
    const std::size_t K = cfg.num_genes, d = cfg.dim, dff = 4 * cfg.dim;
    params.add("dec.mk", xavier_init(d, d, Rng::substream(seed, "dec.mk")));
    params.add("dec.mv", xavier_init(d, d, Rng::substream(seed, "dec.mv")));
    for (std::size_t i = 0; i < cfg.layers; ++i) {
        const std::string p = layer_prefix(i);
        params.add(p + "ffn.w1",
                   xavier_init(d, dff, Rng::substream(seed, p + "ffn.w1")));
        params.add(p + "ffn.b1", Tensor::vec(dff, 0.0));
        params.add(p + "ffn.w2",
                   xavier_init(dff, d, Rng::substream(seed, p + "ffn.w2")));
        params.add(p + "ffn.b2", Tensor::vec(d, 0.0));
        params.add(p + "ln1.gain", Tensor::vec(d, 1.0));
        params.add(p + "ln1.bias", Tensor::vec(d, 0.0));
        params.add(p + "ln2.gain", Tensor::vec(d, 1.0));
        params.add(p + "ln2.bias", Tensor::vec(d, 0.0));
    }
    // gene-wise vectors are d x 1 each, packed as rows
    Tensor proj(K, d);
    for (std::size_t k = 0; k < K; ++k) {
        Tensor row = xavier_init(d, 1,
                                 Rng::substream(seed, "dec.proj.row" + std::to_string(k)));
        for (std::size_t j = 0; j < d; ++j) proj.at(k, j) = row.data[j];
    }
    params.add("dec.proj", std::move(proj));
}

DecoderVars bind_decoder(ad::Tape& tape, VarBindings& bindings,
                         const ParamStore& params, const DecoderConfig& cfg) {
    DecoderVars vars;
    vars.mk = bindings.bind(tape, params, "dec.mk");
    vars.mv = bindings.bind(tape, params, "dec.mv");
    for (std::size_t i = 0; i < cfg.layers; ++i) {
        const std::string p = layer_prefix(i);
        DecoderLayerVars lv;
        lv.ffn_w1 = bindings.bind(tape, params, p + "ffn.w1");
        lv.ffn_b1 = bindings.bind(tape, params, p + "ffn.b1");
        lv.ffn_w2 = bindings.bind(tape, params, p + "ffn.w2");
        lv.ffn_b2 = bindings.bind(tape, params, p + "ffn.b2");
        lv.ln1_gain = bindings.bind(tape, params, p + "ln1.gain");
        lv.ln1_bias = bindings.bind(tape, params, p + "ln1.bias");
        lv.ln2_gain = bindings.bind(tape, params, p + "ln2.gain");
        lv.ln2_bias = bindings.bind(tape, params, p + "ln2.bias");
        vars.layers.push_back(lv);
    }
    vars.proj = bindings.bind(tape, params, "dec.proj");
    return vars;
}

std::pair<ad::Var, ad::Var> project_kv(ad::Tape& tape, ad::Var features, ad::Var mk,
                                       ad::Var mv) {
    if (features->value.rank() != 2 || features->value.shape[0] == 0) {
        throw ContractError("project_kv: empty slide, need at least one patch");
    }
    return {tape.matmul(features, mk), tape.matmul(features, mv)};
}

ad::Var decoder_layer(ad::Tape& tape, ad::Var q, ad::Var k_ld, ad::Var v_ld,
                      const DecoderLayerVars& layer, double ln_eps,
                      Tensor* attention_out) {
    const std::size_t d = q->value.shape[1];
    ad::Var scores =
        tape.scale(tape.matmul_nt(q, k_ld), 1.0 / std::sqrt(static_cast<double>(d)));
    ad::Var weights = tape.softmax_rows(scores);
    if (attention_out) *attention_out = weights->value;
    ad::Var context = tape.matmul(weights, v_ld);
    ad::Var qhat = tape.layer_norm(tape.add(context, q), layer.ln1_gain,
                                   layer.ln1_bias, ln_eps);
    ad::Var ff = tape.relu(tape.add_row_bias(tape.matmul(qhat, layer.ffn_w1),
                                             layer.ffn_b1));
    ff = tape.add_row_bias(tape.matmul(ff, layer.ffn_w2), layer.ffn_b2);
    return tape.layer_norm(tape.add(ff, qhat), layer.ln2_gain, layer.ln2_bias,
                           ln_eps);
}

ad::Var gene_wise_projection(ad::Tape& tape, ad::Var q_final, ad::Var proj) {
    if (!q_final->value.same_shape(proj->value)) {
        throw ContractError("gene_wise_projection: need one d-vector per gene, got " +
                            q_final->value.shape_str() + " features vs " +
                            proj->value.shape_str() + " vectors");
    }
    return tape.rowwise_dot(q_final, proj);
}

DecodeResult decode(ad::Tape& tape, ad::Var gene_priors, ad::Var features,
                    const DecoderVars& vars, double ln_eps) {
    auto [k_ld, v_ld] = project_kv(tape, features, vars.mk, vars.mv);
    DecodeResult result;
    ad::Var q = gene_priors;
    for (std::size_t i = 0; i < vars.layers.size(); ++i) {
        const bool last = i + 1 == vars.layers.size();
        try {
            q = decoder_layer(tape, q, k_ld, v_ld, vars.layers[i], ln_eps,
                              last ? &result.attention : nullptr);
        } catch (const NumericError& e) {
            throw NumericError("decoder layer " + std::to_string(i) + ": " + e.what());
        }
    }
    result.logits = gene_wise_projection(tape, q, vars.proj);
    return result;
}

void init_matrix_fusion_params(ParamStore& params, std::size_t dim,
                               std::uint64_t seed) {
    Tensor w = xavier_init(dim, 1, Rng::substream(seed, "fusion.w"));
    Tensor v = Tensor::vec(dim);
    v.data = std::move(w.data);
    params.add("fusion.w", std::move(v));
}

ad::Var matrix_fusion_baseline(ad::Tape& tape, ad::Var gene_priors, ad::Var features,
                               ad::Var fusion_w) {
    if (features->value.shape[0] == 0) {
        throw ContractError("matrix_fusion_baseline: empty slide");
    }
    ad::Var pooled = tape.mean_rows(features);
    ad::Var gated = tape.mul_row_broadcast(gene_priors, pooled);
    return tape.matvec(gated, fusion_w);
}

Prediction predict(const Tensor& logits, double beta) {
    if (!(beta > 0.0 && beta < 1.0)) {
        throw ContractError("predict: beta must be in (0,1)");
    }
    Prediction p;
    p.probs = Tensor::vec(logits.numel());
    p.calls.resize(logits.numel());
    for (std::size_t k = 0; k < logits.numel(); ++k) {
        p.probs.data[k] = ad::sigmoid_value(logits.data[k]);
        p.calls[k] = p.probs.data[k] > beta ? 1 : 0;
    }
    return p;
}

}  // namespace genemut
