#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "genemut/datagen.hpp"
#include "genemut/genegraph.hpp"
#include "genemut/objective.hpp"
#include "genemut/optim.hpp"

namespace genemut {

enum class LossMode { Comparative, Bce };
enum class FusionMode { Mfm, MatrixBaseline };

struct EncodingToggles {
    bool linguistic = true;
    bool phenotype = true;
    bool pathway = true;
    bool consistency = true;
};

struct RunConfig {
    std::string dataset_dir;
    std::string out_dir = "out";
    std::size_t dim = 64;
    std::size_t kam_layers = 2;
    std::size_t dec_layers = 2;
    double temperature = 1.0;
    LossMode loss = LossMode::Comparative;
    FusionMode fusion = FusionMode::Mfm;
    EncodingToggles encodings;
    bool association = true;  // off: priors are the raw node features
    EmptySetMode empty_set = EmptySetMode::ZeroLoss;
    ConcurrenceMode concurrence = ConcurrenceMode::Joint;
    ConsistencyValue consistency_value = ConsistencyValue::Truncate;
    double consistency_threshold = 0.01;
    std::string embedder = "token-hash";
    std::size_t epochs = 250;
    std::size_t folds = 5;     // 1 = no held-out split (overfit mode)
    long fold = -1;            // >= 0: train/evaluate that single fold
    std::size_t max_steps = 0; // optional cap on optimizer steps per fold
    double lr = 1e-4;
    double l2_weight = 1e-5;
    double beta = 0.5;
    double ln_eps = 1e-5;
    std::uint64_t seed = 1;

    void apply(const std::string& key, const std::string& value);
    static RunConfig from_file(const std::string& path);
    static RunConfig from_file(const std::string& path, RunConfig base);
    std::vector<std::string> to_lines() const;
};

const char* to_string(LossMode m);
const char* to_string(FusionMode m);
const char* to_string(EmptySetMode m);

// Deterministic stratified split: indices grouped by stratum value, each
// group shuffled by a seed substream, then dealt round-robin so fold sizes
// differ by at most one.
std::vector<std::vector<std::size_t>> kfold_split(
    const std::vector<std::string>& strata, std::size_t k, std::uint64_t seed);

// Graph for one training fold: disabled encodings become zero matrices (or
// one-hot node features for the linguistic toggle); the consistency encoding
// sees only the training slides.
GeneGraph build_graph(const Dataset& ds, const RunConfig& cfg,
                      const std::vector<std::size_t>& training_slides);

ParamStore init_model_params(const RunConfig& cfg, std::size_t num_genes,
                             std::size_t num_cancers);

struct SlideEval {
    Tensor logits;     // [K]
    Tensor attention;  // K x N final-layer weights (empty for the baseline fusion)
};

SlideEval eval_slide(const ParamStore& params, const RunConfig& cfg,
                     const GeneGraph& graph, const Tensor& features);

// Training loss of one slide; fills analytic gradients when grads is non-null
// (grads must be zeros_like the parameters). Backbone of the whole-pipeline
// gradient verification.
double slide_loss(const ParamStore& params, const RunConfig& cfg,
                  const GeneGraph& graph, const Tensor& features,
                  const std::vector<std::uint8_t>& labels, ParamStore* grads);

EvalReport evaluate(const ParamStore& params, const RunConfig& cfg,
                    const GeneGraph& graph, const Dataset& ds,
                    const std::vector<std::size_t>& slide_indices, int fold_id);

struct RunRecord {
    RunConfig config;
    std::vector<std::vector<double>> epoch_loss;  // [fold][epoch]
    std::vector<EvalReport> fold_reports;
    std::vector<ParamStore> fold_params;
    double wall_seconds = 0.0;
};

RunRecord train(const RunConfig& cfg, const Dataset& ds);

// summary.csv, metrics.csv, loss.csv, config.txt, fold<i>.params
void write_run_outputs(const std::string& dir, const RunRecord& record);

struct AblationRow {
    std::string axis;
    std::string variant;
    double of1_mean = 0.0;
    double of1_std = 0.0;
    std::size_t folds = 0;
};

// axes subset of {encodings, association, fusion, loss}; every run shares the
// base seed, folds, and data order so rows differ only in the varied axis.
std::vector<AblationRow> ablation_suite(const Dataset& ds, const RunConfig& base,
                                        const std::vector<std::string>& axes,
                                        const std::string& out_dir);

void write_ablation_csv(const std::string& path, const std::vector<AblationRow>& rows);

void write_attention_csv(const std::string& path, const GeneVocabulary& vocab,
                         const Tensor& attention,
                         const std::vector<std::pair<std::size_t, std::size_t>>& coords);

// CLI entry point (subcommands gen-data, build-graph, train, eval, ablate,
// export-attention, check). Returns 0 on success, 1 on validation failure,
// 2 on runtime error.
int cli_main(int argc, char** argv);

}  // namespace genemut
