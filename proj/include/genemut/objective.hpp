#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "genemut/autodiff.hpp"

namespace genemut {

// --- comparative multi-label loss ---------------------------------------------
// L = softplus( logsumexp_{n in N} y_n + T * logsumexp_{p in P} (-y_p / T) )
// N / P are the negative / positive label sets. The log-sum-exp over an empty
// set is -inf, so with either set empty the loss collapses to softplus(-inf)=0;
// that limit is the default. ZeroAnchor instead augments each empty side with
// a virtual logit 0 so all-positive / all-negative slides still push logits
// across zero.

enum class EmptySetMode { ZeroLoss, ZeroAnchor };

// Eager evaluation; fills d(loss)/d(logits) when grad is non-null.
double comparative_loss_value(const std::vector<double>& logits,
                              const std::vector<std::uint8_t>& truth, double temperature,
                              EmptySetMode mode, std::vector<double>* grad = nullptr);

ad::Var comparative_loss(ad::Tape& tape, ad::Var logits,
                         const std::vector<std::uint8_t>& truth, double temperature,
                         EmptySetMode mode = EmptySetMode::ZeroLoss);

// Mean over genes of the stabilized logit BCE.
double bce_loss_value(const std::vector<double>& logits,
                      const std::vector<std::uint8_t>& truth,
                      std::vector<double>* grad = nullptr);

ad::Var bce_loss(ad::Tape& tape, ad::Var logits, const std::vector<std::uint8_t>& truth);

// --- metrics -------------------------------------------------------------------

// Ranking AUC with half credit for ties (equals the trapezoidal ROC area).
// nullopt when only one class is present.
std::optional<double> per_class_auc(const std::vector<double>& scores,
                                    const std::vector<std::uint8_t>& labels);

struct ConfusionCounts {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

ConfusionCounts count_confusion(const std::vector<std::uint8_t>& calls,
                                const std::vector<std::uint8_t>& truth);

struct PrecisionRecallF1 {
    double precision = 0.0, recall = 0.0, f1 = 0.0;
};

// 0/0 convention: precision or recall with an empty denominator is 0.
PrecisionRecallF1 f1_from_counts(const ConfusionCounts& c);

struct GeneMetrics {
    std::string gene;
    std::optional<double> auc;
    ConfusionCounts counts;
    PrecisionRecallF1 prf;
};

struct EvalReport {
    int fold = -1;
    std::vector<GeneMetrics> per_gene;
    double overall_auc = 0.0;        // mean over genes with defined AUC
    std::size_t auc_defined = 0;     // how many genes entered that mean
    std::size_t auc_undefined = 0;   // single-class genes excluded, with warning
    double op = 0.0, orecall = 0.0, of1 = 0.0;  // micro-summed
    std::string loss_mode, fusion_mode, empty_set_mode;  // provenance echo
};

// scores/calls/truth indexed [gene][slide].
EvalReport build_report(const std::vector<std::string>& gene_names,
                        const std::vector<std::vector<double>>& scores,
                        const std::vector<std::vector<std::uint8_t>>& calls,
                        const std::vector<std::vector<std::uint8_t>>& truth);

struct FoldSummary {
    double mean = 0.0, stddev = 0.0;
};

FoldSummary mean_std(const std::vector<double>& values);

void write_metrics_csv(const std::string& path, const std::vector<EvalReport>& folds);
void write_summary_csv(const std::string& path, const std::vector<EvalReport>& folds);

}  // namespace genemut
