#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "genemut/tensor.hpp"

namespace genemut {

// Named learnable tensors, insertion-ordered. Checkpoints are a "PARAMS n"
// header followed by name lines and tensor blocks; rank-1 tensors round-trip
// through the 1 x n tensor encoding (no parameter here is a true 1 x n
// matrix).
class ParamStore {
public:
    void add(const std::string& name, Tensor value);
    bool has(const std::string& name) const { return values_.count(name) != 0; }
    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;
    const std::vector<std::string>& names() const { return order_; }
    std::size_t size() const { return order_.size(); }

    ParamStore zeros_like() const;

    void save_file(const std::string& path) const;
    static ParamStore load_file(const std::string& path);

private:
    std::vector<std::string> order_;
    std::unordered_map<std::string, Tensor> values_;
};

struct AdamHyper {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double l2_weight = 1e-5;  // decoupled weight decay
};

class AdamState {
public:
    explicit AdamState(AdamHyper hp = {}) : hp_(hp) {}

    // Bias-corrected Adam plus decoupled L2. Validates every gradient before
    // touching any parameter; a NaN gradient aborts with nothing mutated.
    void step(ParamStore& params, const ParamStore& grads);

    long step_count() const { return step_; }
    const AdamHyper& hyper() const { return hp_; }

private:
    AdamHyper hp_;
    long step_ = 0;
    std::unordered_map<std::string, Tensor> m_, v_;
};

// Uniform on +/- sqrt(6 / (rows + cols)), bit-reproducible per seed.
Tensor xavier_init(std::size_t rows, std::size_t cols, std::uint64_t seed);

// Objective evaluates a scalar at the current parameters; when grads is
// non-null it must also accumulate analytic gradients there (zero-filled on
// entry).
using Objective = std::function<double(const ParamStore&, ParamStore* grads)>;

struct FdIssue {
    std::string param;
    std::size_t index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_err = 0.0;
};

struct FdReport {
    bool pass = false;
    double max_rel_err = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    std::size_t entries_checked = 0;
    std::vector<FdIssue> failures;  // entries above tol
};

// Central differences (f(t+h) - f(t-h)) / 2h against the analytic gradient.
// Relative error uses max(1, |analytic|, |numeric|). Evaluates f twice up
// front and rejects a non-deterministic objective.
FdReport finite_diff_check(const Objective& f, ParamStore& params, double h,
                           double tol);

}  // namespace genemut
