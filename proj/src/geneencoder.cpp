#include "genemut/geneencoder.hpp"

#include <cmath>
#include <string>

#include "genemut/errors.hpp"
#include "genemut/rng.hpp"

namespace genemut {

ad::Var VarBindings::bind(ad::Tape& tape, const ParamStore& params,
                          const std::string& name) {
    for (const auto& [bound_name, var] : bound_) {
        if (bound_name == name) {
            throw ContractError("VarBindings: " + name + " bound twice");
        }
    }
    ad::Var v = tape.leaf(params.at(name), true);
    bound_.push_back({name, v});
    return v;
}

void VarBindings::harvest(ParamStore& grads) const {
    for (const auto& [name, var] : bound_) grads.at(name) = var->grad;
}

namespace {

Tensor xavier_named(std::size_t rows, std::size_t cols, std::uint64_t seed,
                    const std::string& name) {
    return xavier_init(rows, cols, Rng::substream(seed, name));
}

std::string layer_prefix(std::size_t l) {
    return "kam.layer" + std::to_string(l) + ".";
}

}  // namespace

void init_kam_params(ParamStore& params, const KamConfig& cfg, std::uint64_t seed) {
    const std::size_t K = cfg.num_genes, d = cfg.dim, dff = 4 * cfg.dim;
    params.add("kam.gamma", Tensor(K, K, 1.0));
    params.add("kam.lambda", Tensor(K, K, 1.0));
    for (std::size_t l = 0; l < cfg.layers; ++l) {
        const std::string p = layer_prefix(l);
        params.add(p + "wq", xavier_named(d, d, seed, p + "wq"));
        params.add(p + "wk", xavier_named(d, d, seed, p + "wk"));
        params.add(p + "wv", xavier_named(d, d, seed, p + "wv"));
        params.add(p + "ffn.w1", xavier_named(d, dff, seed, p + "ffn.w1"));
        params.add(p + "ffn.b1", Tensor::vec(dff, 0.0));
        params.add(p + "ffn.w2", xavier_named(dff, d, seed, p + "ffn.w2"));
        params.add(p + "ffn.b2", Tensor::vec(d, 0.0));
        params.add(p + "ln1.gain", Tensor::vec(d, 1.0));
        params.add(p + "ln1.bias", Tensor::vec(d, 0.0));
        params.add(p + "ln2.gain", Tensor::vec(d, 1.0));
        params.add(p + "ln2.bias", Tensor::vec(d, 0.0));
    }
}

KamVars bind_kam(ad::Tape& tape, VarBindings& bindings, const ParamStore& params,
                 const KamConfig& cfg) {
    KamVars vars;
    vars.gamma = bindings.bind(tape, params, "kam.gamma");
    vars.lambda = bindings.bind(tape, params, "kam.lambda");
    for (std::size_t l = 0; l < cfg.layers; ++l) {
        const std::string p = layer_prefix(l);
        KalVars kv;
        kv.wq = bindings.bind(tape, params, p + "wq");
        kv.wk = bindings.bind(tape, params, p + "wk");
        kv.wv = bindings.bind(tape, params, p + "wv");
        kv.ffn_w1 = bindings.bind(tape, params, p + "ffn.w1");
        kv.ffn_b1 = bindings.bind(tape, params, p + "ffn.b1");
        kv.ffn_w2 = bindings.bind(tape, params, p + "ffn.w2");
        kv.ffn_b2 = bindings.bind(tape, params, p + "ffn.b2");
        kv.ln1_gain = bindings.bind(tape, params, p + "ln1.gain");
        kv.ln1_bias = bindings.bind(tape, params, p + "ln1.bias");
        kv.ln2_gain = bindings.bind(tape, params, p + "ln2.gain");
        kv.ln2_bias = bindings.bind(tape, params, p + "ln2.bias");
        vars.layers.push_back(kv);
    }
    return vars;
}

ad::Var kam_input(ad::Tape& tape, ad::Var g, ad::Var phi) {
    check_same_shape(g->value, phi->value, "kam_input");
    return tape.add(g, phi);
}

ad::Var kal_forward(ad::Tape& tape, ad::Var h, const KalVars& layer, ad::Var gamma,
                    ad::Var lambda, ad::Var e_con, ad::Var e_adj, double ln_eps) {
    const std::size_t d = h->value.shape[1];
    ad::Var q = tape.matmul(h, layer.wq);
    ad::Var k = tape.matmul(h, layer.wk);
    ad::Var v = tape.matmul(h, layer.wv);
    ad::Var s = tape.scale(tape.matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(d)));
    s = tape.add(s, tape.hadamard(gamma, e_con));
    s = tape.add(s, tape.hadamard(lambda, e_adj));
    ad::Var attended = tape.matmul(tape.softmax_rows(s), v);
    ad::Var h1 = tape.layer_norm(tape.add(attended, h), layer.ln1_gain,
                                 layer.ln1_bias, ln_eps);
    ad::Var ff = tape.relu(tape.add_row_bias(tape.matmul(h1, layer.ffn_w1),
                                             layer.ffn_b1));
    ff = tape.add_row_bias(tape.matmul(ff, layer.ffn_w2), layer.ffn_b2);
    return tape.layer_norm(tape.add(ff, h1), layer.ln2_gain, layer.ln2_bias, ln_eps);
}

ad::Var gene_priors(ad::Tape& tape, ad::Var g, ad::Var phi, const KamVars& vars,
                    ad::Var e_con, ad::Var e_adj, double ln_eps) {
    ad::Var h = phi ? kam_input(tape, g, phi) : g;
    for (std::size_t l = 0; l < vars.layers.size(); ++l) {
        try {
            h = kal_forward(tape, h, vars.layers[l], vars.gamma, vars.lambda, e_con,
                            e_adj, ln_eps);
        } catch (const NumericError& e) {
            throw NumericError("kal layer " + std::to_string(l) + ": " + e.what());
        }
    }
    return h;
}

}  // namespace genemut
