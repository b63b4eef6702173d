#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace genemut {

// Oracle and identity checks covering every formula-bearing subsystem. The
// defaults match the counts the verification gate requires; the CLI `check`
// subcommand runs the same suite.
struct CheckOptions {
    std::uint64_t seed = 1;
    int fd_seeds = 10;
    int pathway_instances = 200;
    int consistency_instances = 100;
    int loss_reduction_trials = 200;
    int loss_monotonic_trials = 1000;
    int kal_instances = 50;
    int decoder_instances = 20;
    int auc_instances = 500;
    int otsu_instances = 100;
};

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
};

std::vector<CheckResult> run_self_checks(const CheckOptions& opt = {});

}  // namespace genemut
