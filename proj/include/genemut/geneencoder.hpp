#pragma once

#include <cstdint>
#include <vector>

#include "genemut/autodiff.hpp"
#include "genemut/bindings.hpp"
#include "genemut/genegraph.hpp"
#include "genemut/optim.hpp"

namespace genemut {

// Gene encoder: a stack of knowledge association layers over the gene graph.
// Each layer is single-head self-attention whose pre-softmax scores carry the
// consistency and pathway encodings as learnably scaled additive biases,
// followed by the usual Add&Norm / FFN / Add&Norm block.

struct KamConfig {
    std::size_t num_genes = 0;
    std::size_t dim = 64;
    std::size_t layers = 2;
    double ln_eps = 1e-5;
};

// Parameter names:
//   kam.gamma, kam.lambda                      (K x K, shared across layers)
//   kam.layer<l>.wq / .wk / .wv                (d x d)
//   kam.layer<l>.ffn.w1 / .ffn.b1 / .ffn.w2 / .ffn.b2   (d -> 4d -> d)
//   kam.layer<l>.ln1.gain / .ln1.bias / .ln2.gain / .ln2.bias
// Weight matrices are Xavier with substream(seed, name); gains start at 1,
// biases at 0, gamma/lambda at 1 so the knowledge biases are live from the
// first step.
void init_kam_params(ParamStore& params, const KamConfig& cfg, std::uint64_t seed);

struct KalVars {
    ad::Var wq, wk, wv;
    ad::Var ffn_w1, ffn_b1, ffn_w2, ffn_b2;
    ad::Var ln1_gain, ln1_bias, ln2_gain, ln2_bias;
};

struct KamVars {
    ad::Var gamma = nullptr;
    ad::Var lambda = nullptr;
    std::vector<KalVars> layers;
};

KamVars bind_kam(ad::Tape& tape, VarBindings& bindings, const ParamStore& params,
                 const KamConfig& cfg);

// H1 = G + Phi
ad::Var kam_input(ad::Tape& tape, ad::Var g, ad::Var phi);

// One knowledge association layer:
//   S = Q K^T / sqrt(d) + Gamma.*E_con + Lambda.*E_adj
//   out = AddNorm(FFN(AddNorm(softmax(S) V + H)))
ad::Var kal_forward(ad::Tape& tape, ad::Var h, const KalVars& layer, ad::Var gamma,
                    ad::Var lambda, ad::Var e_con, ad::Var e_adj, double ln_eps);

// P = KAL^L(G + Phi). phi may be nullptr (phenotype encoding disabled), in
// which case H1 = G. With layers=0 the priors are H1 itself (association
// ablation).
ad::Var gene_priors(ad::Tape& tape, ad::Var g, ad::Var phi, const KamVars& vars,
                    ad::Var e_con, ad::Var e_adj, double ln_eps);

}  // namespace genemut
