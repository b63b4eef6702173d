#include "genemut/selfcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>

#include "genemut/bindings.hpp"
#include "genemut/datagen.hpp"
#include "genemut/format.hpp"
#include "genemut/geneencoder.hpp"
#include "genemut/labeldecoder.hpp"
#include "genemut/objective.hpp"
#include "genemut/oracles.hpp"
#include "genemut/pipeline.hpp"
#include "genemut/rng.hpp"

namespace genemut {

namespace {

using Clock = std::chrono::steady_clock;

double softplus_ref(double z) {
    if (z > 0.0) return z + std::log1p(std::exp(-z));
    return std::log1p(std::exp(z));
}

CheckResult timed(const std::string& name,
                  const std::function<std::pair<bool, std::string>()>& body) {
    const auto t0 = Clock::now();
    CheckResult r;
    r.name = name;
    try {
        auto [pass, detail] = body();
        r.pass = pass;
        r.detail = detail;
    } catch (const std::exception& e) {
        r.pass = false;
        r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    return r;
}

// --- criterion 1: whole-pipeline gradients ------------------------------------

CheckResult check_pipeline_gradients(const CheckOptions& opt) {
    return timed("gradient-soundness", [&]() -> std::pair<bool, std::string> {
        double worst = 0.0;
        std::string worst_param;
        for (int s = 1; s <= opt.fd_seeds; ++s) {
            SynthConfig synth;
            synth.seed = opt.seed * 1000 + static_cast<std::uint64_t>(s);
            synth.num_slides = 12;
            synth.num_genes = 4;
            synth.num_cancers = 3;
            synth.feature_dim = 4;
            synth.patches_min = 5;
            synth.patches_max = 5;
            synth.groups = {{{0, 1}, 0.9}};
            synth.base_rate = 0.3;
            synth.group_rate = 0.5;
            synth.signal_strength = 1.0;
            Dataset ds = generate_dataset(synth);

            RunConfig cfg;
            cfg.dim = 4;
            cfg.kam_layers = 2;
            cfg.dec_layers = 2;
            cfg.seed = synth.seed;
            cfg.loss = (s % 2 == 0) ? LossMode::Bce : LossMode::Comparative;

            std::vector<std::size_t> all_slides(ds.slides.size());
            for (std::size_t i = 0; i < all_slides.size(); ++i) all_slides[i] = i;
            GeneGraph graph = build_graph(ds, cfg, all_slides);
            ParamStore params = init_model_params(cfg, 4, 3);

            const Tensor features = ds.slides[0].features;
            const std::vector<std::uint8_t> labels = {1, 0, 1, 0};
            auto objective = [&](const ParamStore& p, ParamStore* grads) {
                return slide_loss(p, cfg, graph, features, labels, grads);
            };
            FdReport rep = finite_diff_check(objective, params, 1e-4, 1e-4);
            if (rep.max_rel_err > worst) {
                worst = rep.max_rel_err;
                worst_param = rep.worst_param;
            }
            if (!rep.pass) {
                return {false, "seed " + std::to_string(s) + ": max rel err " +
                                   fmt_double(rep.max_rel_err) + " at " +
                                   rep.worst_param};
            }
        }
        return {true, std::to_string(opt.fd_seeds) +
                          " seeds, K=4 C=3 d=4 N=5 L=2 I=2, max rel err " +
                          fmt_double(worst) + " at " + worst_param};
    });
}

// --- criterion 2: shared-pathway counting --------------------------------------

CheckResult check_pathway_oracle(const CheckOptions& opt) {
    return timed("pathway-adjacency-oracle", [&]() -> std::pair<bool, std::string> {
        // worked toy case: TP53 and BRCA1 share exactly one pathway
        {
            GeneVocabulary vocab({"GSDME", "TP53", "BRCA2", "BRCA1"}, {});
            PathwayMembership m;
            m.pairs = {{"Pathway1", "GSDME"}, {"Pathway1", "TP53"},
                       {"Pathway1", "BRCA2"}, {"Pathway2", "TP53"},
                       {"Pathway2", "BRCA2"}, {"Pathway2", "BRCA1"}};
            Tensor a = pathway_adjacency(m, vocab);
            if (a.at(1, 3) != 1.0 || a.at(3, 1) != 1.0) {
                return {false, "toy case: expected A[2][4]=A[4][2]=1, got " +
                                   fmt_double(a.at(1, 3)) + "/" +
                                   fmt_double(a.at(3, 1))};
            }
        }
        Rng rng(Rng::substream(opt.seed, "pathway-oracle"));
        for (int t = 0; t < opt.pathway_instances; ++t) {
            const std::size_t K = 2 + rng.below(7);   // <= 8
            const std::size_t P = 1 + rng.below(6);   // <= 6
            std::vector<std::string> genes;
            for (std::size_t k = 0; k < K; ++k) genes.push_back("g" + std::to_string(k));
            GeneVocabulary vocab(genes, {});
            PathwayMembership m;
            for (std::size_t p = 0; p < P; ++p) {
                for (std::size_t k = 0; k < K; ++k) {
                    if (rng.uniform() < 0.4) {
                        m.pairs.push_back({"p" + std::to_string(p), genes[k]});
                    }
                }
            }
            const Tensor got = pathway_adjacency(m, vocab);
            const Tensor want = oracle::pathway_adjacency_bruteforce(m, vocab);
            if (got.data != want.data) {
                return {false, "instance " + std::to_string(t) + " differs"};
            }
        }
        return {true, std::to_string(opt.pathway_instances) +
                          " random bipartite instances exact, toy case exact"};
    });
}

// --- criterion 3: consistency weights ------------------------------------------

CheckResult check_consistency_oracle(const CheckOptions& opt) {
    return timed("consistency-encoding-oracle", [&]() -> std::pair<bool, std::string> {
        Rng rng(Rng::substream(opt.seed, "consistency-oracle"));
        for (int t = 0; t < opt.consistency_instances; ++t) {
            const std::size_t K = 2 + rng.below(5);
            const std::size_t C = 1 + rng.below(3);
            const std::size_t N = 5 + rng.below(36);
            std::vector<std::string> genes, cancers;
            for (std::size_t k = 0; k < K; ++k) genes.push_back("g" + std::to_string(k));
            for (std::size_t c = 0; c < C; ++c) cancers.push_back("c" + std::to_string(c));
            GeneVocabulary vocab(genes, cancers);
            MutationTable table;
            for (std::size_t i = 0; i < N; ++i) {
                SlideLabel row;
                row.slide_id = "s" + std::to_string(i);
                row.cancer_type = cancers[rng.below(C)];
                row.mutated.resize(K);
                for (auto& b : row.mutated) b = rng.uniform() < 0.3 ? 1 : 0;
                table.rows.push_back(row);
            }
            const bool joint = t % 2 == 0;
            const double threshold = 0.01 + 0.2 * rng.uniform();
            const Tensor got = consistency_encoding(
                table, vocab, threshold,
                joint ? ConcurrenceMode::Joint : ConcurrenceMode::Marginal);
            const Tensor want =
                oracle::consistency_bruteforce(table, vocab, threshold, joint);
            for (std::size_t i = 0; i < got.numel(); ++i) {
                if (std::fabs(got.data[i] - want.data[i]) > 1e-12) {
                    return {false, "instance " + std::to_string(t) + " differs at " +
                                       std::to_string(i)};
                }
            }
            for (std::size_t k = 0; k < K; ++k) {
                if (got.at(k, k) != 1.0) {
                    return {false, "diagonal not exactly 1"};
                }
            }
        }
        return {true, std::to_string(opt.consistency_instances) +
                          " random tables within 1e-12, diagonal exact"};
    });
}

// --- criterion 4: loss identities ----------------------------------------------

CheckResult check_loss_identities(const CheckOptions& opt) {
    return timed("comparative-loss-identities", [&]() -> std::pair<bool, std::string> {
        Rng rng(Rng::substream(opt.seed, "loss-identities"));
        // reduction |P|=|N|=1 across T
        for (int t = 0; t < opt.loss_reduction_trials; ++t) {
            const double yp = rng.uniform(-6.0, 6.0);
            const double yn = rng.uniform(-6.0, 6.0);
            for (double T : {0.25, 0.5, 1.0, 2.0}) {
                const double got = comparative_loss_value({yp, yn}, {1, 0}, T,
                                                          EmptySetMode::ZeroLoss);
                const double want = softplus_ref(yn - yp);
                if (std::fabs(got - want) > 1e-12) {
                    return {false, "reduction off by " + fmt_double(got - want) +
                                       " at T=" + fmt_double(T)};
                }
            }
        }
        // monotonicity under single-logit perturbations
        for (int t = 0; t < opt.loss_monotonic_trials; ++t) {
            const std::size_t K = 2 + rng.below(7);
            std::vector<double> y(K);
            std::vector<std::uint8_t> labels(K);
            bool has_pos = false, has_neg = false;
            for (std::size_t k = 0; k < K; ++k) {
                y[k] = rng.uniform(-4.0, 4.0);
                labels[k] = rng.uniform() < 0.5 ? 1 : 0;
                (labels[k] ? has_pos : has_neg) = true;
            }
            if (!has_pos) labels[0] = 1;
            if (!has_neg) labels[K - 1] = 0;
            const double T = 0.25 + 2.0 * rng.uniform();
            const double base =
                comparative_loss_value(y, labels, T, EmptySetMode::ZeroLoss);
            std::size_t k = rng.below(K);
            const double delta = 0.05 + 2.0 * rng.uniform();
            std::vector<double> bumped = y;
            if (labels[k]) {
                bumped[k] += delta;  // raising a positive must not increase loss
                const double after =
                    comparative_loss_value(bumped, labels, T, EmptySetMode::ZeroLoss);
                if (!(after < base)) {
                    return {false, "raising positive logit did not reduce loss"};
                }
            } else {
                bumped[k] += delta;  // raising a negative must not decrease loss
                const double after =
                    comparative_loss_value(bumped, labels, T, EmptySetMode::ZeroLoss);
                if (!(after > base)) {
                    return {false, "raising negative logit did not grow loss"};
                }
            }
        }
        // T -> 0 limit finds the hardest positive
        for (int t = 0; t < 50; ++t) {
            const std::size_t P = 2 + rng.below(5);
            std::vector<double> y(P);
            std::vector<std::uint8_t> labels(P, 1);
            double min_y = std::numeric_limits<double>::infinity();
            for (auto& v : y) {
                v = rng.uniform(-3.0, 3.0);
                min_y = std::min(min_y, v);
            }
            // isolate the positive-side term: softplus is invertible given the
            // negative side, so evaluate with one very low negative
            y.push_back(-40.0);
            labels.push_back(0);
            const double T = 1e-3;
            const double loss =
                comparative_loss_value(y, labels, T, EmptySetMode::ZeroLoss);
            // loss = softplus(-40 + pos_term); recover pos_term
            const double z = std::log(std::expm1(loss));
            const double pos_term = z + 40.0;
            if (std::fabs(pos_term - (-min_y)) > 1e-3) {
                return {false, "T->0 limit: positive term " + fmt_double(pos_term) +
                                   " vs hardest positive " + fmt_double(-min_y)};
            }
        }
        // empty-set convention
        if (comparative_loss_value({1.0, 2.0}, {1, 1}, 1.0, EmptySetMode::ZeroLoss) !=
            0.0) {
            return {false, "empty negative set should give zero loss"};
        }
        return {true, "reduction<=1e-12 on T in {0.25,0.5,1,2}, " +
                          std::to_string(opt.loss_monotonic_trials) +
                          " monotonicity trials, T->0 limit within 1e-3"};
    });
}

// --- criterion 5: KAL reduction to a vanilla encoder layer ----------------------

CheckResult check_kal_reduction(const CheckOptions& opt) {
    return timed("kal-vanilla-reduction", [&]() -> std::pair<bool, std::string> {
        Rng rng(Rng::substream(opt.seed, "kal-reduction"));
        double worst = 0.0;
        for (int t = 0; t < opt.kal_instances; ++t) {
            const std::size_t K = 2 + rng.below(4);
            const std::size_t d = 2 + rng.below(5);
            auto rand_mat = [&](std::size_t r, std::size_t c) {
                Tensor m(r, c);
                for (double& v : m.data) v = rng.uniform(-1.0, 1.0);
                return m;
            };
            auto rand_vec = [&](std::size_t n, double lo, double hi) {
                Tensor v = Tensor::vec(n);
                for (double& x : v.data) x = rng.uniform(lo, hi);
                return v;
            };
            oracle::EncoderLayerRef ref;
            ref.wq = rand_mat(d, d);
            ref.wk = rand_mat(d, d);
            ref.wv = rand_mat(d, d);
            ref.ffn_w1 = rand_mat(d, 4 * d);
            ref.ffn_b1 = rand_vec(4 * d, -0.3, 0.3);
            ref.ffn_w2 = rand_mat(4 * d, d);
            ref.ffn_b2 = rand_vec(d, -0.3, 0.3);
            ref.ln1_gain = rand_vec(d, 0.5, 1.5);
            ref.ln1_bias = rand_vec(d, -0.3, 0.3);
            ref.ln2_gain = rand_vec(d, 0.5, 1.5);
            ref.ln2_bias = rand_vec(d, -0.3, 0.3);
            ref.ln_eps = 1e-5;
            const Tensor h = rand_mat(K, d);

            ad::Tape tape;
            KalVars layer;
            layer.wq = tape.constant(ref.wq);
            layer.wk = tape.constant(ref.wk);
            layer.wv = tape.constant(ref.wv);
            layer.ffn_w1 = tape.constant(ref.ffn_w1);
            layer.ffn_b1 = tape.constant(ref.ffn_b1);
            layer.ffn_w2 = tape.constant(ref.ffn_w2);
            layer.ffn_b2 = tape.constant(ref.ffn_b2);
            layer.ln1_gain = tape.constant(ref.ln1_gain);
            layer.ln1_bias = tape.constant(ref.ln1_bias);
            layer.ln2_gain = tape.constant(ref.ln2_gain);
            layer.ln2_bias = tape.constant(ref.ln2_bias);
            ad::Var gamma = tape.constant(Tensor(K, K, 0.0));
            ad::Var lambda = tape.constant(Tensor(K, K, 0.0));
            ad::Var e_con = tape.constant(rand_mat(K, K));
            ad::Var e_adj = tape.constant(rand_mat(K, K));
            ad::Var out = kal_forward(tape, tape.constant(h), layer, gamma, lambda,
                                      e_con, e_adj, ref.ln_eps);
            const Tensor want = oracle::encoder_layer_reference(h, ref);
            for (std::size_t i = 0; i < want.numel(); ++i) {
                worst = std::max(worst,
                                 std::fabs(out->value.data[i] - want.data[i]));
            }
        }
        if (worst > 1e-10) {
            return {false, "max deviation " + fmt_double(worst)};
        }
        return {true, std::to_string(opt.kal_instances) +
                          " instances, max deviation " + fmt_double(worst)};
    });
}

// --- criterion 6: decoder identities --------------------------------------------

CheckResult check_decoder_identities(const CheckOptions& opt) {
    return timed("decoder-identities", [&]() -> std::pair<bool, std::string> {
        Rng rng(Rng::substream(opt.seed, "decoder-identities"));
        double worst = 0.0;
        for (int t = 0; t < opt.decoder_instances; ++t) {
            const std::size_t K = 2 + rng.below(4);
            const std::size_t d = 2 + rng.below(5);
            const std::size_t N = 2 + rng.below(6);
            RunConfig cfg;
            cfg.dim = d;
            cfg.dec_layers = 2;
            cfg.seed = opt.seed * 100 + static_cast<std::uint64_t>(t);
            ParamStore params;
            init_decoder_params(params, {K, d, cfg.dec_layers, cfg.ln_eps}, cfg.seed);

            Tensor priors(K, d);
            for (double& v : priors.data) v = rng.uniform(-1.0, 1.0);
            Tensor f(N, d);
            for (double& v : f.data) v = rng.uniform(-1.0, 1.0);

            auto run = [&](const Tensor& feats, Tensor* attn) {
                ad::Tape tape;
                VarBindings binds;
                DecoderVars dv =
                    bind_decoder(tape, binds, params, {K, d, cfg.dec_layers, cfg.ln_eps});
                DecodeResult res =
                    decode(tape, tape.constant(priors), tape.constant(feats), dv,
                           cfg.ln_eps);
                if (attn) *attn = res.attention;
                return res.logits->value;
            };

            const Tensor base = run(f, nullptr);

            // duplication invariance
            Tensor doubled(2 * N, d);
            for (std::size_t i = 0; i < N; ++i) {
                for (std::size_t j = 0; j < d; ++j) {
                    doubled.at(i, j) = f.at(i, j);
                    doubled.at(N + i, j) = f.at(i, j);
                }
            }
            const Tensor dup = run(doubled, nullptr);
            for (std::size_t k = 0; k < K; ++k) {
                worst = std::max(worst, std::fabs(dup.data[k] - base.data[k]));
            }

            // permutation invariance
            std::vector<std::size_t> perm(N);
            for (std::size_t i = 0; i < N; ++i) perm[i] = i;
            rng.shuffle(perm);
            Tensor shuffled(N, d);
            for (std::size_t i = 0; i < N; ++i) {
                for (std::size_t j = 0; j < d; ++j) {
                    shuffled.at(i, j) = f.at(perm[i], j);
                }
            }
            const Tensor per = run(shuffled, nullptr);
            for (std::size_t k = 0; k < K; ++k) {
                worst = std::max(worst, std::fabs(per.data[k] - base.data[k]));
            }

            // single patch: attention weights exactly one, rows sum to one
            Tensor single(1, d);
            for (std::size_t j = 0; j < d; ++j) single.at(0, j) = f.at(0, j);
            Tensor attn;
            run(single, &attn);
            for (std::size_t k = 0; k < K; ++k) {
                if (attn.at(k, 0) != 1.0) {
                    return {false, "single-patch attention weight not exactly 1"};
                }
            }
            Tensor attn_full;
            run(f, &attn_full);
            for (std::size_t k = 0; k < K; ++k) {
                double sum = 0.0;
                for (std::size_t p = 0; p < N; ++p) {
                    if (attn_full.at(k, p) < 0.0) return {false, "negative attention"};
                    sum += attn_full.at(k, p);
                }
                if (std::fabs(sum - 1.0) > 1e-12) {
                    return {false, "attention row does not sum to 1"};
                }
            }
        }
        if (worst > 1e-10) {
            return {false, "max deviation " + fmt_double(worst)};
        }
        return {true, std::to_string(opt.decoder_instances) +
                          " instances, duplication/permutation deviation " +
                          fmt_double(worst) + ", single-patch weight exact"};
    });
}

// --- criterion 7: AUC and OF1 ----------------------------------------------------

CheckResult check_auc_oracle(const CheckOptions& opt) {
    return timed("auc-pairwise-oracle", [&]() -> std::pair<bool, std::string> {
        Rng rng(Rng::substream(opt.seed, "auc-oracle"));
        for (int t = 0; t < opt.auc_instances; ++t) {
            const std::size_t n = 2 + rng.below(49);
            std::vector<double> scores(n);
            std::vector<std::uint8_t> labels(n);
            const bool with_ties = t % 2 == 0;
            for (std::size_t i = 0; i < n; ++i) {
                scores[i] = with_ties ? static_cast<double>(rng.below(5)) * 0.25
                                      : rng.uniform();
                labels[i] = rng.uniform() < 0.5 ? 1 : 0;
            }
            const auto got = per_class_auc(scores, labels);
            const auto want = oracle::auc_pairwise(scores, labels);
            if (got.has_value() != want.has_value()) {
                return {false, "definedness mismatch on instance " + std::to_string(t)};
            }
            if (got && *got != *want) {
                return {false, "AUC mismatch: " + fmt_double(*got) + " vs " +
                                   fmt_double(*want)};
            }
        }
        // micro-F1 consistency on random reports
        for (int t = 0; t < 50; ++t) {
            const std::size_t K = 2 + rng.below(5), n = 5 + rng.below(20);
            std::vector<std::string> names;
            std::vector<std::vector<double>> scores(K);
            std::vector<std::vector<std::uint8_t>> calls(K), truth(K);
            for (std::size_t k = 0; k < K; ++k) {
                names.push_back("g" + std::to_string(k));
                for (std::size_t i = 0; i < n; ++i) {
                    scores[k].push_back(rng.uniform());
                    calls[k].push_back(rng.uniform() < 0.5);
                    truth[k].push_back(rng.uniform() < 0.5);
                }
            }
            const EvalReport rep = build_report(names, scores, calls, truth);
            const double denom = rep.op + rep.orecall;
            const double expected = denom > 0.0 ? 2.0 * rep.op * rep.orecall / denom : 0.0;
            if (rep.of1 != expected) {
                return {false, "OF1 formula inconsistency"};
            }
        }
        return {true, std::to_string(opt.auc_instances) +
                          " instances bit-equal to the pairwise statistic; OF1 "
                          "formula exact"};
    });
}

// --- criterion 8: Otsu -------------------------------------------------------------

CheckResult check_otsu_oracle(const CheckOptions& opt) {
    return timed("otsu-exhaustive-oracle", [&]() -> std::pair<bool, std::string> {
        {
            Raster half;
            half.height = 10;
            half.width = 10;
            half.pixels.assign(100, 10);
            for (std::size_t i = 50; i < 100; ++i) half.pixels[i] = 200;
            if (otsu_threshold(half) != 10) {
                return {false, "bimodal tie should resolve to the smallest t=10"};
            }
            Raster flat;
            flat.height = 3;
            flat.width = 3;
            flat.pixels.assign(9, 77);
            if (otsu_threshold(flat) != 77) {
                return {false, "constant raster should return its value"};
            }
        }
        Rng rng(Rng::substream(opt.seed, "otsu-oracle"));
        for (int t = 0; t < opt.otsu_instances; ++t) {
            Raster r;
            r.height = 2 + rng.below(63);
            r.width = 2 + rng.below(63);
            r.pixels.resize(r.height * r.width);
            if (t % 3 == 0) {
                // bimodal with noise
                for (auto& p : r.pixels) {
                    const double mean = rng.uniform() < 0.5 ? 60.0 : 190.0;
                    const double v = mean + 25.0 * rng.gauss();
                    p = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
                }
            } else {
                for (auto& p : r.pixels) {
                    p = static_cast<std::uint8_t>(rng.below(256));
                }
            }
            const int got = otsu_threshold(r);
            const int want = oracle::otsu_exhaustive(r.pixels);
            if (got != want) {
                return {false, "threshold mismatch " + std::to_string(got) + " vs " +
                                   std::to_string(want)};
            }
        }
        return {true, std::to_string(opt.otsu_instances) +
                          " random rasters exact, degenerate and tie cases exact"};
    });
}

}  // namespace

std::vector<CheckResult> run_self_checks(const CheckOptions& opt) {
    std::vector<CheckResult> results;
    results.push_back(check_pipeline_gradients(opt));
    results.push_back(check_pathway_oracle(opt));
    results.push_back(check_consistency_oracle(opt));
    results.push_back(check_loss_identities(opt));
    results.push_back(check_kal_reduction(opt));
    results.push_back(check_decoder_identities(opt));
    results.push_back(check_auc_oracle(opt));
    results.push_back(check_otsu_oracle(opt));
    return results;
}

}  // namespace genemut
