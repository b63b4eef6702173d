#pragma once

#include <string>
#include <utility>
#include <vector>

#include "genemut/autodiff.hpp"
#include "genemut/optim.hpp"

namespace genemut {

// Binds named parameters to tape leaves for one forward/backward pass, then
// harvests the leaf adjoints back into a gradient store.
class VarBindings {
public:
    ad::Var bind(ad::Tape& tape, const ParamStore& params, const std::string& name);

    // grads must hold the same names (zeros_like of the parameters).
    void harvest(ParamStore& grads) const;

private:
    std::vector<std::pair<std::string, ad::Var>> bound_;
};

}  // namespace genemut
