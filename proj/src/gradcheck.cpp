#include "hapnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "hapnet/errors.hpp"

namespace hapnet {

namespace {

double eval_scalar(DifferentiableProgram& prog, Tape& tape) {
    tape.reset();
    Var out = prog.forward(tape);
    if (tape.dim(out) != 1) throw ContractError("gradient_check: program output must be scalar");
    return tape.scalar(out);
}

} // namespace

GradCheckReport gradient_check(DifferentiableProgram& prog, double h, int stride, double denom_floor) {
    if (prog.params == nullptr || !prog.forward) throw ContractError("gradient_check: incomplete program");
    if (h <= 0.0) throw ContractError("gradient_check: step must be positive");
    if (stride < 1) throw ContractError("gradient_check: stride must be >= 1");

    ParamStore& ps = *prog.params;
    std::vector<double> analytic(static_cast<size_t>(ps.size()), 0.0);

    Tape tape(&ps, analytic.data());
    Var out = prog.forward(tape);
    if (tape.dim(out) != 1) throw ContractError("gradient_check: program output must be scalar");
    tape.backward(out);

    Tape probe(&ps, nullptr);
    GradCheckReport rep;
    double* theta = ps.raw().data();
    for (int64_t i = 0; i < ps.size(); i += stride) {
        double saved = theta[i];
        theta[i] = saved + h;
        double fp = eval_scalar(prog, probe);
        theta[i] = saved - h;
        double fm = eval_scalar(prog, probe);
        theta[i] = saved;
        double numeric = (fp - fm) / (2.0 * h);
        double a = analytic[static_cast<size_t>(i)];
        double abs_err = std::abs(a - numeric);
        double rel = abs_err / std::max({std::abs(a), std::abs(numeric), denom_floor});
        rep.max_abs_err = std::max(rep.max_abs_err, abs_err);
        ++rep.checked;
        if (rel > rep.max_rel_err) {
            rep.max_rel_err = rel;
            int64_t at = i;
            for (int e = 0; e < ps.entry_count(); ++e) {
                const auto& ent = ps.entry(e);
                if (at >= ent.ref.off && at < ent.ref.off + ent.ref.size()) {
                    rep.worst_param = ent.name;
                    rep.worst_index = static_cast<int>(at - ent.ref.off);
                    break;
                }
            }
        }
    }
    return rep;
}

} // namespace hapnet
