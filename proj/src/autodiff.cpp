#include "glimit/autodiff.hpp"

#include <string>

namespace glimit::ad {

std::vector<double> parameter_gradient(const Rev& loss, Tape& tape) {
    if (tape.consumed()) throw UsageError("parameter_gradient: tape already consumed");
    if (tape.size() == 0) throw UsageError("parameter_gradient: empty tape");
    if (loss.i < 0) throw UsageError("parameter_gradient: loss is not recorded on the tape");
    std::vector<double> grad(tape.num_leaves());
    tape.reverse_into(loss.i, grad);
    tape.mark_consumed();
    for (size_t j = 0; j < grad.size(); ++j) {
        if (!std::isfinite(grad[j])) {
            const int32_t bad = tape.first_nonfinite_node();
            throw NumericError("parameter_gradient: non-finite gradient (first bad node " +
                               std::to_string(bad) + ")");
        }
    }
    return grad;
}

} // namespace glimit::ad
