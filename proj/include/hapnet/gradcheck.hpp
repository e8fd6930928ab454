#pragma once

#include <functional>
#include <string>

#include "hapnet/param_store.hpp"
#include "hapnet/tape.hpp"

namespace hapnet {

// A scalar-valued function of a parameter store, expressed as a tape build.
// The same builder is replayed for analytic gradients and for central
// finite differences over every stored parameter.
struct DifferentiableProgram {
    ParamStore* params = nullptr;
    std::function<Var(Tape&)> forward;
};

struct GradCheckReport {
    double max_rel_err = 0.0;
    double max_abs_err = 0.0;
    std::string worst_param;
    int worst_index = -1;
    int checked = 0;
    bool ok(double tol) const { return checked > 0 && max_rel_err < tol; }
};

// Central differences with step h over all parameters (or a strided subset
// when stride > 1). Relative error uses max(|analytic|, |numeric|, floor)
// as the denominator so near-zero gradients do not blow up the ratio.
GradCheckReport gradient_check(DifferentiableProgram& prog, double h = 1e-5,
                               int stride = 1, double denom_floor = 0.01);

} // namespace hapnet
