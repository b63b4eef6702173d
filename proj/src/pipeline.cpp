#include "genemut/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "genemut/bindings.hpp"
#include "genemut/errors.hpp"
#include "genemut/format.hpp"
#include "genemut/geneencoder.hpp"
#include "genemut/labeldecoder.hpp"
#include "genemut/rng.hpp"

namespace genemut {

namespace fs = std::filesystem;

const char* to_string(LossMode m) {
    return m == LossMode::Comparative ? "comparative" : "bce";
}
const char* to_string(FusionMode m) {
    return m == FusionMode::Mfm ? "mfm" : "matrix-baseline";
}
const char* to_string(EmptySetMode m) {
    return m == EmptySetMode::ZeroLoss ? "zero-loss" : "zero-anchor";
}

namespace {

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "on" || v == "true" || v == "1") return true;
    if (v == "off" || v == "false" || v == "0") return false;
    throw IngestionError("config: " + key + " wants on/off, got '" + v + "'");
}

std::size_t parse_size(const std::string& v, const std::string& key) {
    try {
        return static_cast<std::size_t>(std::stoull(v));
    } catch (...) {
        throw IngestionError("config: " + key + " wants an integer, got '" + v + "'");
    }
}

double parse_real(const std::string& v, const std::string& key) {
    try {
        std::size_t used = 0;
        const double out = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (...) {
        throw IngestionError("config: " + key + " wants a number, got '" + v + "'");
    }
}

}  // namespace

void RunConfig::apply(const std::string& key, const std::string& value) {
    if (key == "dataset") dataset_dir = value;
    else if (key == "out") out_dir = value;
    else if (key == "dim") dim = parse_size(value, key);
    else if (key == "kam_layers") kam_layers = parse_size(value, key);
    else if (key == "dec_layers") dec_layers = parse_size(value, key);
    else if (key == "T") temperature = parse_real(value, key);
    else if (key == "loss") {
        if (value == "comparative") loss = LossMode::Comparative;
        else if (value == "bce") loss = LossMode::Bce;
        else throw IngestionError("config: loss wants comparative|bce, got '" + value + "'");
    } else if (key == "fusion") {
        if (value == "mfm") fusion = FusionMode::Mfm;
        else if (value == "matrix-baseline") fusion = FusionMode::MatrixBaseline;
        else throw IngestionError("config: fusion wants mfm|matrix-baseline, got '" +
                                  value + "'");
    } else if (key == "linguistic") encodings.linguistic = parse_bool(value, key);
    else if (key == "phenotype") encodings.phenotype = parse_bool(value, key);
    else if (key == "pathway") encodings.pathway = parse_bool(value, key);
    else if (key == "consistency") encodings.consistency = parse_bool(value, key);
    else if (key == "association") association = parse_bool(value, key);
    else if (key == "empty_set") {
        if (value == "zero-loss") empty_set = EmptySetMode::ZeroLoss;
        else if (value == "zero-anchor") empty_set = EmptySetMode::ZeroAnchor;
        else throw IngestionError("config: empty_set wants zero-loss|zero-anchor");
    } else if (key == "concurrence") {
        if (value == "joint") concurrence = ConcurrenceMode::Joint;
        else if (value == "marginal") concurrence = ConcurrenceMode::Marginal;
        else throw IngestionError("config: concurrence wants joint|marginal");
    } else if (key == "consistency_value") {
        if (value == "truncate") consistency_value = ConsistencyValue::Truncate;
        else if (value == "probability") consistency_value = ConsistencyValue::Probability;
        else throw IngestionError("config: consistency_value wants truncate|probability");
    } else if (key == "consistency_threshold") {
        consistency_threshold = parse_real(value, key);
    } else if (key == "embedder") embedder = value;
    else if (key == "epochs") epochs = parse_size(value, key);
    else if (key == "folds") folds = parse_size(value, key);
    else if (key == "fold") fold = static_cast<long>(parse_size(value, key));
    else if (key == "max_steps") max_steps = parse_size(value, key);
    else if (key == "lr") lr = parse_real(value, key);
    else if (key == "l2") l2_weight = parse_real(value, key);
    else if (key == "beta") beta = parse_real(value, key);
    else if (key == "ln_eps") ln_eps = parse_real(value, key);
    else if (key == "seed") seed = parse_size(value, key);
    else throw IngestionError("config: unknown key '" + key + "'");
}

RunConfig RunConfig::from_file(const std::string& path) {
    return from_file(path, RunConfig{});
}

RunConfig RunConfig::from_file(const std::string& path, RunConfig base) {
    std::ifstream is(path);
    if (!is) throw IngestionError("cannot open config: " + path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        // trim
        while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) {
            line.pop_back();
        }
        std::size_t b = 0;
        while (b < line.size() && std::isspace(static_cast<unsigned char>(line[b]))) ++b;
        line = line.substr(b);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw IngestionError(path + ":" + std::to_string(lineno) +
                                 ": expected key=value");
        }
        base.apply(line.substr(0, eq), line.substr(eq + 1));
    }
    return base;
}

std::vector<std::string> RunConfig::to_lines() const {
    auto onoff = [](bool b) { return b ? "on" : "off"; };
    return {
        "dataset=" + dataset_dir,
        "out=" + out_dir,
        "dim=" + std::to_string(dim),
        "kam_layers=" + std::to_string(kam_layers),
        "dec_layers=" + std::to_string(dec_layers),
        "T=" + fmt_double(temperature),
        std::string("loss=") + to_string(loss),
        std::string("fusion=") + to_string(fusion),
        std::string("linguistic=") + onoff(encodings.linguistic),
        std::string("phenotype=") + onoff(encodings.phenotype),
        std::string("pathway=") + onoff(encodings.pathway),
        std::string("consistency=") + onoff(encodings.consistency),
        std::string("association=") + onoff(association),
        std::string("empty_set=") + to_string(empty_set),
        std::string("concurrence=") +
            (concurrence == ConcurrenceMode::Joint ? "joint" : "marginal"),
        std::string("consistency_value=") +
            (consistency_value == ConsistencyValue::Truncate ? "truncate"
                                                             : "probability"),
        "consistency_threshold=" + fmt_double(consistency_threshold),
        "embedder=" + embedder,
        "epochs=" + std::to_string(epochs),
        "folds=" + std::to_string(folds),
        "fold=" + std::to_string(fold),
        "max_steps=" + std::to_string(max_steps),
        "lr=" + fmt_double(lr),
        "l2=" + fmt_double(l2_weight),
        "beta=" + fmt_double(beta),
        "ln_eps=" + fmt_double(ln_eps),
        "seed=" + std::to_string(seed),
    };
}

std::vector<std::vector<std::size_t>> kfold_split(
    const std::vector<std::string>& strata, std::size_t k, std::uint64_t seed) {
    if (k == 0) throw ContractError("kfold_split: k must be >= 1");
    if (strata.size() < k) {
        throw ContractError("kfold_split: " + std::to_string(strata.size()) +
                            " slides cannot fill " + std::to_string(k) + " folds");
    }
    std::map<std::string, std::vector<std::size_t>> by_stratum;
    for (std::size_t i = 0; i < strata.size(); ++i) by_stratum[strata[i]].push_back(i);

    std::vector<std::vector<std::size_t>> folds(k);
    std::size_t cursor = 0;
    for (auto& [stratum, members] : by_stratum) {
        Rng rng(Rng::substream(seed, "fold/" + stratum));
        rng.shuffle(members);
        for (std::size_t idx : members) folds[cursor++ % k].push_back(idx);
    }
    for (auto& f : folds) std::sort(f.begin(), f.end());
    return folds;
}

GeneGraph build_graph(const Dataset& ds, const RunConfig& cfg,
                      const std::vector<std::size_t>& training_slides) {
    const std::size_t K = ds.vocab.num_genes();
    const std::size_t C = ds.vocab.num_cancers();

    Tensor g;
    if (cfg.encodings.linguistic) {
        g = embed_linguistic(ds.records, EmbedderSpec::parse(cfg.embedder), cfg.dim,
                             cfg.seed);
    } else {
        if (cfg.dim < K) {
            throw ContractError(
                "build_graph: one-hot node features need dim >= num_genes (" +
                std::to_string(cfg.dim) + " < " + std::to_string(K) + ")");
        }
        g = Tensor(K, cfg.dim, 0.0);
        for (std::size_t i = 0; i < K; ++i) g.at(i, i) = 1.0;
    }

    Tensor delta = cfg.encodings.phenotype ? ds.assoc.delta : Tensor(K, C, 0.0);

    Tensor e_adj = cfg.encodings.pathway
                       ? normalize_adjacency(pathway_adjacency(ds.pathways, ds.vocab))
                       : Tensor(K, K, 0.0);

    Tensor e_con(K, K, 0.0);
    if (cfg.encodings.consistency) {
        MutationTable training;
        for (std::size_t idx : training_slides) training.rows.push_back(ds.table.rows[idx]);
        e_con = consistency_encoding(training, ds.vocab, cfg.consistency_threshold,
                                     cfg.concurrence, cfg.consistency_value);
    }

    return assemble_graph(std::move(g), std::move(delta), std::move(e_adj),
                          std::move(e_con), ds.vocab);
}

ParamStore init_model_params(const RunConfig& cfg, std::size_t num_genes,
                             std::size_t num_cancers) {
    ParamStore params;
    if (cfg.encodings.phenotype) {
        // additive embeddings start small so they perturb rather than swamp
        // the node features; they serve the role of positional embeddings
        Tensor wc = xavier_init(num_cancers, cfg.dim,
                                Rng::substream(cfg.seed, "cancer.embed"));
        for (double& v : wc.data) v *= 0.1;
        params.add("cancer.embed", std::move(wc));
    }
    if (cfg.association) {
        init_kam_params(params, {num_genes, cfg.dim, cfg.kam_layers, cfg.ln_eps},
                        cfg.seed);
    }
    if (cfg.fusion == FusionMode::Mfm) {
        init_decoder_params(params, {num_genes, cfg.dim, cfg.dec_layers, cfg.ln_eps},
                            cfg.seed);
    } else {
        init_matrix_fusion_params(params, cfg.dim, cfg.seed);
    }
    return params;
}

namespace {

ad::Var forward_slide(ad::Tape& tape, VarBindings& binds, const ParamStore& params,
                      const RunConfig& cfg, const GeneGraph& graph,
                      const Tensor& features, Tensor* attention_out) {
    ad::Var g = tape.constant(graph.initial_features);
    ad::Var phi = nullptr;
    if (cfg.encodings.phenotype) {
        ad::Var wc = binds.bind(tape, params, "cancer.embed");
        phi = tape.matmul(tape.constant(graph.delta), wc);
    }

    ad::Var priors;
    if (cfg.association) {
        KamConfig kc{graph.vocab.num_genes(), cfg.dim, cfg.kam_layers, cfg.ln_eps};
        KamVars kv = bind_kam(tape, binds, params, kc);
        priors = gene_priors(tape, g, phi, kv, tape.constant(graph.e_con),
                             tape.constant(graph.e_adj), cfg.ln_eps);
    } else {
        priors = phi ? kam_input(tape, g, phi) : g;
    }

    ad::Var f = tape.constant(features);
    if (cfg.fusion == FusionMode::Mfm) {
        DecoderConfig dc{graph.vocab.num_genes(), cfg.dim, cfg.dec_layers, cfg.ln_eps};
        DecoderVars dv = bind_decoder(tape, binds, params, dc);
        DecodeResult res = decode(tape, priors, f, dv, cfg.ln_eps);
        if (attention_out) *attention_out = res.attention;
        return res.logits;
    }
    ad::Var w = binds.bind(tape, params, "fusion.w");
    if (attention_out) *attention_out = Tensor();
    return matrix_fusion_baseline(tape, priors, f, w);
}

double train_step(ParamStore& params, AdamState& adam, const RunConfig& cfg,
                  const GeneGraph& graph, const SlideSample& slide) {
    ad::Tape tape;
    VarBindings binds;
    ad::Var logits =
        forward_slide(tape, binds, params, cfg, graph, slide.features, nullptr);
    ad::Var loss = cfg.loss == LossMode::Comparative
                       ? comparative_loss(tape, logits, slide.labels, cfg.temperature,
                                          cfg.empty_set)
                       : bce_loss(tape, logits, slide.labels);
    const double value = loss->value.data[0];
    tape.backward(loss);
    ParamStore grads = params.zeros_like();
    binds.harvest(grads);
    adam.step(params, grads);
    return value;
}

}  // namespace

double slide_loss(const ParamStore& params, const RunConfig& cfg,
                  const GeneGraph& graph, const Tensor& features,
                  const std::vector<std::uint8_t>& labels, ParamStore* grads) {
    ad::Tape tape;
    VarBindings binds;
    ad::Var logits = forward_slide(tape, binds, params, cfg, graph, features, nullptr);
    ad::Var loss = cfg.loss == LossMode::Comparative
                       ? comparative_loss(tape, logits, labels, cfg.temperature,
                                          cfg.empty_set)
                       : bce_loss(tape, logits, labels);
    const double value = loss->value.data[0];
    if (grads) {
        tape.backward(loss);
        binds.harvest(*grads);
    }
    return value;
}

SlideEval eval_slide(const ParamStore& params, const RunConfig& cfg,
                     const GeneGraph& graph, const Tensor& features) {
    ad::Tape tape;
    VarBindings binds;
    SlideEval out;
    ad::Var logits =
        forward_slide(tape, binds, params, cfg, graph, features, &out.attention);
    out.logits = logits->value;
    return out;
}

EvalReport evaluate(const ParamStore& params, const RunConfig& cfg,
                    const GeneGraph& graph, const Dataset& ds,
                    const std::vector<std::size_t>& slide_indices, int fold_id) {
    const std::size_t K = ds.vocab.num_genes();
    std::vector<std::vector<double>> scores(K);
    std::vector<std::vector<std::uint8_t>> calls(K), truth(K);
    for (std::size_t idx : slide_indices) {
        const SlideSample& slide = ds.slides[idx];
        const SlideEval ev = eval_slide(params, cfg, graph, slide.features);
        const Prediction pred = predict(ev.logits, cfg.beta);
        for (std::size_t k = 0; k < K; ++k) {
            scores[k].push_back(pred.probs.data[k]);
            calls[k].push_back(pred.calls[k]);
            truth[k].push_back(slide.labels[k]);
        }
    }
    EvalReport report = build_report(ds.vocab.genes(), scores, calls, truth);
    report.fold = fold_id;
    report.loss_mode = to_string(cfg.loss);
    report.fusion_mode = to_string(cfg.fusion);
    report.empty_set_mode = to_string(cfg.empty_set);
    return report;
}

RunRecord train(const RunConfig& cfg, const Dataset& ds) {
    if (cfg.epochs == 0) throw ContractError("train: epochs must be >= 1");
    if (!cfg.encodings.linguistic && !cfg.encodings.phenotype &&
        !cfg.encodings.pathway && !cfg.encodings.consistency) {
        // legal: one-hot node features stand in for every encoding
        if (cfg.dim < ds.vocab.num_genes()) {
            throw ContractError("train: all encodings disabled needs dim >= K");
        }
    }
    const auto t0 = std::chrono::steady_clock::now();
    RunRecord record;
    record.config = cfg;

    std::vector<std::string> strata;
    for (const auto& row : ds.table.rows) strata.push_back(row.cancer_type);

    std::vector<std::vector<std::size_t>> folds;
    if (cfg.folds <= 1) {
        std::vector<std::size_t> all(ds.slides.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        folds.push_back(std::move(all));  // evaluated on the training slides
    } else {
        folds = kfold_split(strata, cfg.folds, cfg.seed);
    }

    for (std::size_t f = 0; f < folds.size(); ++f) {
        if (cfg.fold >= 0 && f != static_cast<std::size_t>(cfg.fold)) continue;
        std::vector<std::size_t> train_idx, eval_idx;
        if (cfg.folds <= 1) {
            train_idx = folds[0];
            eval_idx = folds[0];
        } else {
            eval_idx = folds[f];
            for (std::size_t g = 0; g < folds.size(); ++g) {
                if (g == f) continue;
                train_idx.insert(train_idx.end(), folds[g].begin(), folds[g].end());
            }
            std::sort(train_idx.begin(), train_idx.end());
        }

        GeneGraph graph = build_graph(ds, cfg, train_idx);
        ParamStore params =
            init_model_params(cfg, ds.vocab.num_genes(), ds.vocab.num_cancers());
        AdamState adam({.lr = cfg.lr, .l2_weight = cfg.l2_weight});

        std::vector<double> losses;
        std::size_t steps = 0;
        bool stopped = false;
        for (std::size_t epoch = 0; epoch < cfg.epochs && !stopped; ++epoch) {
            std::vector<std::size_t> order = train_idx;
            Rng rng(Rng::substream(cfg.seed, "order/" + std::to_string(f) + "/" +
                                                 std::to_string(epoch)));
            rng.shuffle(order);
            double total = 0.0;
            std::size_t count = 0;
            for (std::size_t idx : order) {
                if (cfg.max_steps && steps >= cfg.max_steps) {
                    stopped = true;
                    break;
                }
                double value;
                try {
                    value = train_step(params, adam, cfg, graph, ds.slides[idx]);
                } catch (const NumericError& e) {
                    throw NumericError("train: fold " + std::to_string(f) + " epoch " +
                                       std::to_string(epoch) + " slide " +
                                       ds.slides[idx].slide_id + ": " + e.what());
                }
                total += value;
                ++count;
                ++steps;
            }
            if (count) losses.push_back(total / static_cast<double>(count));
        }

        record.epoch_loss.push_back(std::move(losses));
        record.fold_reports.push_back(
            evaluate(params, cfg, graph, ds, eval_idx,
                     cfg.folds <= 1 ? -1 : static_cast<int>(f)));
        record.fold_params.push_back(std::move(params));
    }

    record.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return record;
}

void write_run_outputs(const std::string& dir, const RunRecord& record) {
    fs::create_directories(dir);
    write_metrics_csv((fs::path(dir) / "metrics.csv").string(), record.fold_reports);
    write_summary_csv((fs::path(dir) / "summary.csv").string(), record.fold_reports);
    {
        std::ofstream os((fs::path(dir) / "loss.csv").string());
        if (!os) throw IngestionError("cannot open for write: " + dir + "/loss.csv");
        os << "fold,epoch,loss\n";
        for (std::size_t f = 0; f < record.epoch_loss.size(); ++f) {
            for (std::size_t e = 0; e < record.epoch_loss[f].size(); ++e) {
                os << record.fold_reports[f].fold << "," << e << ","
                   << fmt_double(record.epoch_loss[f][e]) << "\n";
            }
        }
    }
    {
        std::ofstream os((fs::path(dir) / "config.txt").string());
        if (!os) throw IngestionError("cannot open for write: " + dir + "/config.txt");
        for (const auto& line : record.config.to_lines()) os << line << "\n";
        os << "wall_seconds=" << fmt_double(record.wall_seconds) << "\n";
    }
    for (std::size_t f = 0; f < record.fold_params.size(); ++f) {
        record.fold_params[f].save_file(
            (fs::path(dir) / ("fold" + std::to_string(f) + ".params")).string());
    }
}

std::vector<AblationRow> ablation_suite(const Dataset& ds, const RunConfig& base,
                                        const std::vector<std::string>& axes,
                                        const std::string& out_dir) {
    std::vector<AblationRow> rows;
    auto run_variant = [&](const std::string& axis, const std::string& variant,
                           RunConfig cfg) {
        cfg.out_dir = (fs::path(out_dir) / (axis + "-" + variant)).string();
        RunRecord record = train(cfg, ds);
        write_run_outputs(cfg.out_dir, record);
        std::vector<double> of1s;
        for (const auto& rep : record.fold_reports) of1s.push_back(rep.of1);
        const FoldSummary s = mean_std(of1s);
        rows.push_back({axis, variant, s.mean, s.stddev, of1s.size()});
    };

    for (const auto& axis : axes) {
        if (axis == "encodings") {
            auto with = [&](bool ph, bool pw, bool cons) {
                RunConfig cfg = base;
                cfg.encodings.phenotype = ph;
                cfg.encodings.pathway = pw;
                cfg.encodings.consistency = cons;
                return cfg;
            };
            run_variant(axis, "none", with(false, false, false));
            run_variant(axis, "pathway", with(false, true, false));
            run_variant(axis, "phenotype", with(true, false, false));
            run_variant(axis, "consistency", with(false, false, true));
            run_variant(axis, "all", with(true, true, true));
        } else if (axis == "association") {
            RunConfig off = base;
            off.association = false;
            run_variant(axis, "kam", base);
            run_variant(axis, "no-association", off);
        } else if (axis == "fusion") {
            RunConfig alt = base;
            alt.fusion = base.fusion == FusionMode::Mfm ? FusionMode::MatrixBaseline
                                                        : FusionMode::Mfm;
            run_variant(axis, to_string(base.fusion), base);
            run_variant(axis, to_string(alt.fusion), alt);
        } else if (axis == "loss") {
            RunConfig alt = base;
            alt.loss = base.loss == LossMode::Comparative ? LossMode::Bce
                                                          : LossMode::Comparative;
            run_variant(axis, to_string(base.loss), base);
            run_variant(axis, to_string(alt.loss), alt);
        } else {
            throw IngestionError("ablation_suite: unknown axis '" + axis + "'");
        }
    }
    return rows;
}

void write_ablation_csv(const std::string& path, const std::vector<AblationRow>& rows) {
    std::ofstream os(path);
    if (!os) throw IngestionError("cannot open for write: " + path);
    os << "axis,variant,of1_mean,of1_std,folds\n";
    for (const auto& r : rows) {
        os << r.axis << "," << r.variant << "," << fmt_double(r.of1_mean) << ","
           << fmt_double(r.of1_std) << "," << r.folds << "\n";
    }
}

void write_attention_csv(const std::string& path, const GeneVocabulary& vocab,
                         const Tensor& attention,
                         const std::vector<std::pair<std::size_t, std::size_t>>& coords) {
    std::ofstream os(path);
    if (!os) throw IngestionError("cannot open for write: " + path);
    const std::size_t n = attention.rank() == 2 ? attention.shape[1] : 0;
    os << "gene";
    for (std::size_t p = 0; p < n; ++p) {
        if (p < coords.size()) {
            os << "," << coords[p].first << "_" << coords[p].second;
        } else {
            os << ",p" << p;
        }
    }
    os << "\n";
    for (std::size_t k = 0; k < attention.shape[0]; ++k) {
        os << vocab.gene(k);
        for (std::size_t p = 0; p < n; ++p) os << "," << fmt_double(attention.at(k, p));
        os << "\n";
    }
}

}  // namespace genemut
