#include "genemut/optim.hpp"

#include <cmath>
#include <fstream>

#include "genemut/errors.hpp"
#include "genemut/rng.hpp"

namespace genemut {

void ParamStore::add(const std::string& name, Tensor value) {
    if (has(name)) throw ContractError("ParamStore: duplicate name " + name);
    order_.push_back(name);
    values_.emplace(name, std::move(value));
}

Tensor& ParamStore::at(const std::string& name) {
    auto it = values_.find(name);
    if (it == values_.end()) throw ContractError("ParamStore: unknown name " + name);
    return it->second;
}

const Tensor& ParamStore::at(const std::string& name) const {
    auto it = values_.find(name);
    if (it == values_.end()) throw ContractError("ParamStore: unknown name " + name);
    return it->second;
}

ParamStore ParamStore::zeros_like() const {
    ParamStore out;
    for (const auto& name : order_) out.add(name, Tensor::zeros_like(at(name)));
    return out;
}

void ParamStore::save_file(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IngestionError("cannot open for write: " + path);
    os << "PARAMS " << order_.size() << "\n";
    for (const auto& name : order_) {
        os << name << "\n";
        at(name).save(os);
    }
}

ParamStore ParamStore::load_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IngestionError("cannot open for read: " + path);
    std::string magic;
    std::size_t count = 0;
    is >> magic >> count;
    if (!is || magic != "PARAMS") {
        throw IngestionError("checkpoint parse error: expected 'PARAMS n' header");
    }
    is.get();
    ParamStore out;
    for (std::size_t i = 0; i < count; ++i) {
        std::string name;
        std::getline(is, name);
        if (!is || name.empty()) {
            throw IngestionError("checkpoint parse error: missing name for entry " +
                                 std::to_string(i));
        }
        Tensor t = Tensor::load(is);
        if (t.shape[0] == 1 && t.shape[1] != 1) {
            // rank-1 tensors round-trip through the 1 x n encoding
            Tensor v = Tensor::vec(t.shape[1]);
            v.data = std::move(t.data);
            out.add(name, std::move(v));
        } else {
            out.add(name, std::move(t));
        }
    }
    return out;
}

void AdamState::step(ParamStore& params, const ParamStore& grads) {
    for (const auto& name : params.names()) {
        if (!grads.has(name)) {
            throw ContractError("adam_step: missing gradient for " + name);
        }
        const Tensor& g = grads.at(name);
        if (!params.at(name).same_shape(g)) {
            throw DimensionError("adam_step: gradient shape mismatch for " + name);
        }
        if (!g.all_finite()) {
            throw NumericError("adam_step: non-finite gradient for " + name +
                               ", step aborted with parameters unchanged");
        }
    }

    ++step_;
    const double bc1 = 1.0 - std::pow(hp_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(hp_.beta2, static_cast<double>(step_));
    for (const auto& name : params.names()) {
        Tensor& p = params.at(name);
        const Tensor& g = grads.at(name);
        Tensor& m = m_.try_emplace(name, Tensor::zeros_like(p)).first->second;
        Tensor& v = v_.try_emplace(name, Tensor::zeros_like(p)).first->second;
        for (std::size_t i = 0; i < p.numel(); ++i) {
            m.data[i] = hp_.beta1 * m.data[i] + (1.0 - hp_.beta1) * g.data[i];
            v.data[i] = hp_.beta2 * v.data[i] + (1.0 - hp_.beta2) * g.data[i] * g.data[i];
            const double mhat = m.data[i] / bc1;
            const double vhat = v.data[i] / bc2;
            p.data[i] -= hp_.lr * (mhat / (std::sqrt(vhat) + hp_.eps));
            p.data[i] -= hp_.lr * hp_.l2_weight * p.data[i];
        }
    }
}

Tensor xavier_init(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    const double bound =
        std::sqrt(6.0 / static_cast<double>(rows + cols));
    Rng rng(seed);
    Tensor t(rows, cols);
    for (double& v : t.data) v = rng.uniform(-bound, bound);
    return t;
}

FdReport finite_diff_check(const Objective& f, ParamStore& params, double h,
                           double tol) {
    if (!(h > 0.0 && h <= 1e-2)) {
        throw ContractError("finite_diff_check: h must be in (0, 1e-2]");
    }
    const double v1 = f(params, nullptr);
    const double v2 = f(params, nullptr);
    if (v1 != v2) {
        throw ContractError(
            "finite_diff_check: oracle invalid, objective is non-deterministic");
    }

    ParamStore analytic = params.zeros_like();
    f(params, &analytic);

    FdReport report;
    for (const auto& name : params.names()) {
        Tensor& p = params.at(name);
        const Tensor& a = analytic.at(name);
        for (std::size_t i = 0; i < p.numel(); ++i) {
            const double saved = p.data[i];
            p.data[i] = saved + h;
            const double fp = f(params, nullptr);
            p.data[i] = saved - h;
            const double fm = f(params, nullptr);
            p.data[i] = saved;
            const double numeric = (fp - fm) / (2.0 * h);
            const double denom =
                std::max(1.0, std::max(std::fabs(a.data[i]), std::fabs(numeric)));
            const double rel = std::fabs(a.data[i] - numeric) / denom;
            ++report.entries_checked;
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst_param = name;
                report.worst_index = i;
            }
            if (rel > tol) {
                report.failures.push_back({name, i, a.data[i], numeric, rel});
            }
        }
    }
    report.pass = report.failures.empty();
    return report;
}

}  // namespace genemut
