#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "genemut/genegraph.hpp"
#include "genemut/tensor.hpp"

// Independent reference computations used to cross-check the primary
// implementations. Each is written from the defining formula with plain
// loops, deliberately sharing no code with the path it verifies.

namespace genemut::oracle {

// Shared-pathway counts by direct pairwise intersection over the raw pair
// list; diagonal is max over the row plus one.
Tensor pathway_adjacency_bruteforce(const PathwayMembership& membership,
                                    const GeneVocabulary& vocab);

// Direct evaluation of the consistency weights: rescan the table per (i,j,c).
Tensor consistency_bruteforce(const MutationTable& table, const GeneVocabulary& vocab,
                              double prob_threshold, bool joint_mode);

// O(pos*neg) pairwise ranking statistic with half credit for ties.
std::optional<double> auc_pairwise(const std::vector<double>& scores,
                                   const std::vector<std::uint8_t>& labels);

// Exhaustive scan over all 255 cut points maximizing between-class variance;
// exact integer/rational comparisons, smallest threshold wins ties.
int otsu_exhaustive(const std::vector<std::uint8_t>& pixels);

// Plain single-head post-norm transformer encoder layer (no bias terms on
// Q/K/V, ReLU FFN) evaluated with naive loops.
struct EncoderLayerRef {
    Tensor wq, wk, wv;        // d x d
    Tensor ffn_w1, ffn_b1;    // d x 4d, 4d
    Tensor ffn_w2, ffn_b2;    // 4d x d, d
    Tensor ln1_gain, ln1_bias, ln2_gain, ln2_bias;  // d
    double ln_eps = 1e-5;
};

Tensor encoder_layer_reference(const Tensor& h, const EncoderLayerRef& p);

// Same block with cross-attention: queries q over keys/values derived from f.
Tensor cross_attention_layer_reference(const Tensor& q, const Tensor& k,
                                       const Tensor& v, const EncoderLayerRef& p);

}  // namespace genemut::oracle
