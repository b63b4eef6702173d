#include "genemut/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "genemut/errors.hpp"

namespace genemut::oracle {

Tensor pathway_adjacency_bruteforce(const PathwayMembership& membership,
                                    const GeneVocabulary& vocab) {
    const std::size_t K = vocab.num_genes();
    std::set<std::string> pathway_ids;
    for (const auto& [p, g] : membership.pairs) pathway_ids.insert(p);

    auto contains = [&](const std::string& pathway, std::size_t gene) {
        for (const auto& [p, g] : membership.pairs) {
            if (p == pathway && vocab.gene_index(g) == gene) return true;
        }
        return false;
    };

    Tensor a(K, K, 0.0);
    for (std::size_t i = 0; i < K; ++i) {
        for (std::size_t j = 0; j < K; ++j) {
            if (i == j) continue;
            double n = 0.0;
            for (const auto& pathway : pathway_ids) {
                if (contains(pathway, i) && contains(pathway, j)) n += 1.0;
            }
            a.at(i, j) = n;
        }
    }
    for (std::size_t i = 0; i < K; ++i) {
        double mx = 0.0;
        for (std::size_t j = 0; j < K; ++j) {
            if (j != i) mx = std::max(mx, a.at(i, j));
        }
        a.at(i, i) = mx + 1.0;
    }
    return a;
}

Tensor consistency_bruteforce(const MutationTable& table, const GeneVocabulary& vocab,
                              double prob_threshold, bool joint_mode) {
    const std::size_t K = vocab.num_genes();
    const std::size_t N = table.rows.size();
    Tensor e(K, K, 0.0);
    for (std::size_t i = 0; i < K; ++i) {
        for (std::size_t j = 0; j < K; ++j) {
            if (i == j) {
                e.at(i, j) = 1.0;
                continue;
            }
            double weighted = 0.0;
            for (const auto& cancer : vocab.cancers()) {
                std::size_t nc = 0, both = 0, only_i = 0, only_j = 0;
                for (const auto& row : table.rows) {
                    if (row.cancer_type != cancer) continue;
                    ++nc;
                    if (row.mutated[i] && row.mutated[j]) ++both;
                    if (row.mutated[i]) ++only_i;
                    if (row.mutated[j]) ++only_j;
                }
                if (nc == 0) continue;
                bool zeta;
                if (joint_mode) {
                    zeta = static_cast<double>(both) / static_cast<double>(nc) >=
                           prob_threshold;
                } else {
                    zeta = static_cast<double>(only_i) / static_cast<double>(nc) >=
                               prob_threshold &&
                           static_cast<double>(only_j) / static_cast<double>(nc) >=
                               prob_threshold;
                }
                if (zeta) weighted += static_cast<double>(nc);
            }
            e.at(i, j) = weighted / static_cast<double>(N);
        }
    }
    return e;
}

std::optional<double> auc_pairwise(const std::vector<double>& scores,
                                   const std::vector<std::uint8_t>& labels) {
    std::vector<double> pos, neg;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        (labels[i] ? pos : neg).push_back(scores[i]);
    }
    if (pos.empty() || neg.empty()) return std::nullopt;
    unsigned long long wins2 = 0;  // 2*wins + ties
    for (double p : pos) {
        for (double n : neg) {
            if (p > n) wins2 += 2;
            else if (p == n) wins2 += 1;
        }
    }
    return static_cast<double>(wins2) /
           (2.0 * static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

int otsu_exhaustive(const std::vector<std::uint8_t>& pixels) {
    if (pixels.empty()) throw ContractError("otsu_exhaustive: empty raster");
    unsigned long long hist[256] = {0};
    for (std::uint8_t p : pixels) ++hist[p];
    int lo = 255, hi = 0;
    for (int v = 0; v < 256; ++v) {
        if (hist[v]) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (lo == hi) return lo;  // degenerate: single value

    // Between-class variance at cut t is (s0*w1 - s1*w0)^2 / (w0*w1) up to a
    // constant factor; compare candidates as exact rationals.
    const auto total_w = static_cast<unsigned long long>(pixels.size());
    unsigned long long total_s = 0;
    for (int v = 0; v < 256; ++v) total_s += hist[v] * static_cast<unsigned long long>(v);

    int best_t = -1;
    unsigned __int128 best_num = 0;  // a^2
    unsigned __int128 best_den = 1;  // w0*w1
    for (int t = 0; t <= 254; ++t) {
        unsigned long long w0 = 0, s0 = 0;
        for (int v = 0; v <= t; ++v) {
            w0 += hist[v];
            s0 += hist[v] * static_cast<unsigned long long>(v);
        }
        const unsigned long long w1 = total_w - w0;
        if (w0 == 0 || w1 == 0) continue;
        const unsigned long long s1 = total_s - s0;
        const long long a = static_cast<long long>(s0 * w1) - static_cast<long long>(s1 * w0);
        const unsigned __int128 num =
            static_cast<unsigned __int128>(a < 0 ? -a : a) *
            static_cast<unsigned __int128>(a < 0 ? -a : a);
        const unsigned __int128 den =
            static_cast<unsigned __int128>(w0) * static_cast<unsigned __int128>(w1);
        // num/den > best_num/best_den, strict so the smallest t wins ties
        if (best_t < 0 || num * best_den > best_num * den) {
            best_t = t;
            best_num = num;
            best_den = den;
        }
    }
    return best_t;
}

namespace {

Tensor naive_matmul(const Tensor& a, const Tensor& b) {
    Tensor c(a.shape[0], b.shape[1], 0.0);
    for (std::size_t i = 0; i < a.shape[0]; ++i) {
        for (std::size_t j = 0; j < b.shape[1]; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < a.shape[1]; ++k) {
                acc += a.at(i, k) * b.at(k, j);
            }
            c.at(i, j) = acc;
        }
    }
    return c;
}

Tensor naive_softmax_rows(const Tensor& s) {
    Tensor y(s.shape[0], s.shape[1]);
    for (std::size_t i = 0; i < s.shape[0]; ++i) {
        double mx = s.at(i, 0);
        for (std::size_t j = 1; j < s.shape[1]; ++j) mx = std::max(mx, s.at(i, j));
        double denom = 0.0;
        for (std::size_t j = 0; j < s.shape[1]; ++j) {
            y.at(i, j) = std::exp(s.at(i, j) - mx);
            denom += y.at(i, j);
        }
        for (std::size_t j = 0; j < s.shape[1]; ++j) y.at(i, j) /= denom;
    }
    return y;
}

Tensor naive_layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                        double eps) {
    Tensor y(x.shape[0], x.shape[1]);
    const double n = static_cast<double>(x.shape[1]);
    for (std::size_t i = 0; i < x.shape[0]; ++i) {
        double mean = 0.0;
        for (std::size_t j = 0; j < x.shape[1]; ++j) mean += x.at(i, j);
        mean /= n;
        double var = 0.0;
        for (std::size_t j = 0; j < x.shape[1]; ++j) {
            var += (x.at(i, j) - mean) * (x.at(i, j) - mean);
        }
        var /= n;
        for (std::size_t j = 0; j < x.shape[1]; ++j) {
            y.at(i, j) = gain.data[j] * (x.at(i, j) - mean) / std::sqrt(var + eps) +
                         bias.data[j];
        }
    }
    return y;
}

Tensor attention_block(const Tensor& q_in, const Tensor& k_in, const Tensor& v_in,
                       const Tensor& residual, const EncoderLayerRef& p) {
    const std::size_t d = q_in.shape[1];
    Tensor scores(q_in.shape[0], k_in.shape[0]);
    for (std::size_t i = 0; i < q_in.shape[0]; ++i) {
        for (std::size_t j = 0; j < k_in.shape[0]; ++j) {
            double acc = 0.0;
            for (std::size_t t = 0; t < d; ++t) acc += q_in.at(i, t) * k_in.at(j, t);
            scores.at(i, j) = acc / std::sqrt(static_cast<double>(d));
        }
    }
    Tensor attended = naive_matmul(naive_softmax_rows(scores), v_in);
    for (std::size_t i = 0; i < attended.numel(); ++i) {
        attended.data[i] += residual.data[i];
    }
    Tensor h1 = naive_layer_norm(attended, p.ln1_gain, p.ln1_bias, p.ln_eps);

    Tensor ff = naive_matmul(h1, p.ffn_w1);
    for (std::size_t i = 0; i < ff.shape[0]; ++i) {
        for (std::size_t j = 0; j < ff.shape[1]; ++j) {
            ff.at(i, j) = std::max(0.0, ff.at(i, j) + p.ffn_b1.data[j]);
        }
    }
    Tensor ff2 = naive_matmul(ff, p.ffn_w2);
    for (std::size_t i = 0; i < ff2.shape[0]; ++i) {
        for (std::size_t j = 0; j < ff2.shape[1]; ++j) {
            ff2.at(i, j) += p.ffn_b2.data[j] + h1.at(i, j);
        }
    }
    return naive_layer_norm(ff2, p.ln2_gain, p.ln2_bias, p.ln_eps);
}

}  // namespace

Tensor encoder_layer_reference(const Tensor& h, const EncoderLayerRef& p) {
    return attention_block(naive_matmul(h, p.wq), naive_matmul(h, p.wk),
                           naive_matmul(h, p.wv), h, p);
}

Tensor cross_attention_layer_reference(const Tensor& q, const Tensor& k,
                                       const Tensor& v, const EncoderLayerRef& p) {
    return attention_block(q, k, v, q, p);
}

}  // namespace genemut::oracle
