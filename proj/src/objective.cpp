#include "genemut/objective.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "genemut/errors.hpp"
#include "genemut/format.hpp"

namespace genemut {

namespace {

double softplus(double z) {
    if (z > 0.0) return z + std::log1p(std::exp(-z));
    return std::log1p(std::exp(z));
}

}  // namespace

double comparative_loss_value(const std::vector<double>& logits,
                              const std::vector<std::uint8_t>& truth,
                              double temperature, EmptySetMode mode,
                              std::vector<double>* grad) {
    if (!(temperature > 0.0)) {
        throw ContractError("comparative_loss: T must be > 0");
    }
    if (logits.size() != truth.size()) {
        throw DimensionError("comparative_loss: " + std::to_string(logits.size()) +
                             " logits vs " + std::to_string(truth.size()) + " labels");
    }
    if (grad) grad->assign(logits.size(), 0.0);

    const bool anchored = mode == EmptySetMode::ZeroAnchor;
    std::vector<std::size_t> pos, neg;
    for (std::size_t k = 0; k < truth.size(); ++k) {
        (truth[k] ? pos : neg).push_back(k);
    }
    if (!anchored && (pos.empty() || neg.empty())) {
        return 0.0;  // log-sum-exp over an empty set is -inf; softplus(-inf) = 0
    }

    // negative side: logsumexp of y_n (plus the 0 anchor when enabled)
    double neg_max = anchored ? 0.0 : -std::numeric_limits<double>::infinity();
    for (std::size_t k : neg) neg_max = std::max(neg_max, logits[k]);
    double neg_sum = anchored ? std::exp(0.0 - neg_max) : 0.0;
    for (std::size_t k : neg) neg_sum += std::exp(logits[k] - neg_max);
    const double lse_neg = neg_max + std::log(neg_sum);

    // positive side: T * logsumexp of -y_p / T (plus the 0 anchor)
    double pos_max = anchored ? 0.0 : -std::numeric_limits<double>::infinity();
    for (std::size_t k : pos) pos_max = std::max(pos_max, -logits[k] / temperature);
    double pos_sum = anchored ? std::exp(0.0 - pos_max) : 0.0;
    for (std::size_t k : pos) pos_sum += std::exp(-logits[k] / temperature - pos_max);
    const double lse_pos = pos_max + std::log(pos_sum);

    const double z = lse_neg + temperature * lse_pos;
    const double loss = softplus(z);

    if (grad) {
        const double dz = ad::sigmoid_value(z);
        for (std::size_t k : neg) {
            (*grad)[k] = dz * std::exp(logits[k] - neg_max) / neg_sum;
        }
        for (std::size_t k : pos) {
            (*grad)[k] =
                -dz * std::exp(-logits[k] / temperature - pos_max) / pos_sum;
        }
    }
    return loss;
}

ad::Var comparative_loss(ad::Tape& tape, ad::Var logits,
                         const std::vector<std::uint8_t>& truth, double temperature,
                         EmptySetMode mode) {
    if (logits->value.rank() != 1) {
        throw DimensionError("comparative_loss: want logit vector, got " +
                             logits->value.shape_str());
    }
    auto grad_buf = std::make_shared<std::vector<double>>();
    const double loss = comparative_loss_value(logits->value.data, truth, temperature,
                                               mode, grad_buf.get());
    ad::Var r = tape.record("comparative_loss", Tensor::scalar(loss), {logits},
                            nullptr);
    if (r->requires_grad) {
        r->backprop = [logits, r, grad_buf] {
            const double g = r->grad.data[0];
            for (std::size_t k = 0; k < grad_buf->size(); ++k) {
                logits->grad.data[k] += g * (*grad_buf)[k];
            }
        };
    }
    return r;
}

double bce_loss_value(const std::vector<double>& logits,
                      const std::vector<std::uint8_t>& truth,
                      std::vector<double>* grad) {
    if (logits.size() != truth.size()) {
        throw DimensionError("bce_loss: " + std::to_string(logits.size()) +
                             " logits vs " + std::to_string(truth.size()) + " labels");
    }
    if (grad) grad->assign(logits.size(), 0.0);
    const double inv_k = 1.0 / static_cast<double>(logits.size());
    double total = 0.0;
    for (std::size_t k = 0; k < logits.size(); ++k) {
        const double y = logits[k];
        total += truth[k] ? softplus(-y) : softplus(y);
        if (grad) (*grad)[k] = (ad::sigmoid_value(y) - static_cast<double>(truth[k])) * inv_k;
    }
    return total * inv_k;
}

ad::Var bce_loss(ad::Tape& tape, ad::Var logits,
                 const std::vector<std::uint8_t>& truth) {
    if (logits->value.rank() != 1) {
        throw DimensionError("bce_loss: want logit vector, got " +
                             logits->value.shape_str());
    }
    auto grad_buf = std::make_shared<std::vector<double>>();
    const double loss = bce_loss_value(logits->value.data, truth, grad_buf.get());
    ad::Var r = tape.record("bce_loss", Tensor::scalar(loss), {logits}, nullptr);
    if (r->requires_grad) {
        r->backprop = [logits, r, grad_buf] {
            const double g = r->grad.data[0];
            for (std::size_t k = 0; k < grad_buf->size(); ++k) {
                logits->grad.data[k] += g * (*grad_buf)[k];
            }
        };
    }
    return r;
}

std::optional<double> per_class_auc(const std::vector<double>& scores,
                                    const std::vector<std::uint8_t>& labels) {
    if (scores.size() != labels.size()) {
        throw DimensionError("per_class_auc: size mismatch");
    }
    std::size_t pos = 0;
    for (std::uint8_t b : labels) pos += b;
    const std::size_t neg = labels.size() - pos;
    if (pos == 0 || neg == 0) return std::nullopt;

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] < scores[b];
    });

    // Mann-Whitney with average ranks over tie groups, kept in integers:
    // for a tie group spanning sorted positions [a,b), twice the average
    // 1-based rank is a+b+1.
    unsigned long long twice_rank_sum = 0;
    std::size_t a = 0;
    while (a < order.size()) {
        std::size_t b = a + 1;
        while (b < order.size() && scores[order[b]] == scores[order[a]]) ++b;
        std::size_t pos_in_group = 0;
        for (std::size_t i = a; i < b; ++i) pos_in_group += labels[order[i]];
        twice_rank_sum +=
            static_cast<unsigned long long>(pos_in_group) * (a + b + 1);
        a = b;
    }
    const unsigned long long numer2 =
        twice_rank_sum - static_cast<unsigned long long>(pos) * (pos + 1);
    return static_cast<double>(numer2) /
           (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

ConfusionCounts count_confusion(const std::vector<std::uint8_t>& calls,
                                const std::vector<std::uint8_t>& truth) {
    if (calls.size() != truth.size()) {
        throw DimensionError("count_confusion: size mismatch");
    }
    ConfusionCounts c;
    for (std::size_t i = 0; i < calls.size(); ++i) {
        if (calls[i] && truth[i]) ++c.tp;
        else if (calls[i] && !truth[i]) ++c.fp;
        else if (!calls[i] && truth[i]) ++c.fn;
        else ++c.tn;
    }
    return c;
}

PrecisionRecallF1 f1_from_counts(const ConfusionCounts& c) {
    PrecisionRecallF1 out;
    const std::size_t called = c.tp + c.fp;
    const std::size_t actual = c.tp + c.fn;
    out.precision = called ? static_cast<double>(c.tp) / static_cast<double>(called) : 0.0;
    out.recall = actual ? static_cast<double>(c.tp) / static_cast<double>(actual) : 0.0;
    const double denom = out.precision + out.recall;
    out.f1 = denom > 0.0 ? 2.0 * out.precision * out.recall / denom : 0.0;
    return out;
}

EvalReport build_report(const std::vector<std::string>& gene_names,
                        const std::vector<std::vector<double>>& scores,
                        const std::vector<std::vector<std::uint8_t>>& calls,
                        const std::vector<std::vector<std::uint8_t>>& truth) {
    const std::size_t K = gene_names.size();
    if (scores.size() != K || calls.size() != K || truth.size() != K) {
        throw DimensionError("build_report: per-gene vectors must match vocabulary");
    }
    EvalReport report;
    double auc_sum = 0.0;
    std::size_t tp = 0, called = 0, actual = 0;
    for (std::size_t k = 0; k < K; ++k) {
        GeneMetrics gm;
        gm.gene = gene_names[k];
        gm.auc = per_class_auc(scores[k], truth[k]);
        gm.counts = count_confusion(calls[k], truth[k]);
        gm.prf = f1_from_counts(gm.counts);
        if (gm.auc) {
            auc_sum += *gm.auc;
            ++report.auc_defined;
        } else {
            ++report.auc_undefined;
        }
        tp += gm.counts.tp;
        called += gm.counts.tp + gm.counts.fp;
        actual += gm.counts.tp + gm.counts.fn;
        report.per_gene.push_back(std::move(gm));
    }
    report.overall_auc =
        report.auc_defined ? auc_sum / static_cast<double>(report.auc_defined) : 0.0;
    report.op = called ? static_cast<double>(tp) / static_cast<double>(called) : 0.0;
    report.orecall = actual ? static_cast<double>(tp) / static_cast<double>(actual) : 0.0;
    const double denom = report.op + report.orecall;
    report.of1 = denom > 0.0 ? 2.0 * report.op * report.orecall / denom : 0.0;
    return report;
}

FoldSummary mean_std(const std::vector<double>& values) {
    FoldSummary s;
    if (values.empty()) return s;
    for (double v : values) s.mean += v;
    s.mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - s.mean) * (v - s.mean);
    var /= static_cast<double>(values.size());
    s.stddev = std::sqrt(var);
    return s;
}

void write_metrics_csv(const std::string& path, const std::vector<EvalReport>& folds) {
    std::ofstream os(path);
    if (!os) throw IngestionError("cannot open for write: " + path);
    os << "fold,gene,auc,precision,recall,f1\n";
    for (const auto& rep : folds) {
        for (const auto& gm : rep.per_gene) {
            os << rep.fold << "," << gm.gene << ",";
            if (gm.auc) os << fmt_double(*gm.auc);
            os << "," << fmt_double(gm.prf.precision) << ","
               << fmt_double(gm.prf.recall) << "," << fmt_double(gm.prf.f1) << "\n";
        }
    }
}

void write_summary_csv(const std::string& path, const std::vector<EvalReport>& folds) {
    std::ofstream os(path);
    if (!os) throw IngestionError("cannot open for write: " + path);
    os << "fold,overall_auc,op,or,of1,auc_undefined,loss_mode,fusion_mode,empty_set_mode\n";
    std::vector<double> aucs, ops, ors, of1s;
    for (const auto& rep : folds) {
        os << rep.fold << "," << fmt_double(rep.overall_auc) << ","
           << fmt_double(rep.op) << "," << fmt_double(rep.orecall) << ","
           << fmt_double(rep.of1) << "," << rep.auc_undefined << ","
           << rep.loss_mode << "," << rep.fusion_mode << "," << rep.empty_set_mode
           << "\n";
        aucs.push_back(rep.overall_auc);
        ops.push_back(rep.op);
        ors.push_back(rep.orecall);
        of1s.push_back(rep.of1);
    }
    const FoldSummary sa = mean_std(aucs), sp = mean_std(ops), sr = mean_std(ors),
                      sf = mean_std(of1s);
    const std::string modes = folds.empty()
                                  ? ",,"
                                  : folds[0].loss_mode + "," + folds[0].fusion_mode +
                                        "," + folds[0].empty_set_mode;
    os << "mean," << fmt_double(sa.mean) << "," << fmt_double(sp.mean) << ","
       << fmt_double(sr.mean) << "," << fmt_double(sf.mean) << ",," << modes << "\n";
    os << "std," << fmt_double(sa.stddev) << "," << fmt_double(sp.stddev) << ","
       << fmt_double(sr.stddev) << "," << fmt_double(sf.stddev) << ",," << modes
       << "\n";
}

}  // namespace genemut
