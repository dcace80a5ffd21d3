#pragma once

#include <functional>
#include <string>
#include <vector>

#include "hscr/graph.hpp"

namespace hscr {

struct GradCheckReport {
    double max_rel_error = 0.0;
    int64_t param_index = -1;   // position in the params list
    int64_t flat_index = -1;    // element within that parameter
    double analytic = 0.0;
    double numeric = 0.0;
    double tolerance = 0.0;
    bool passed = false;
};

// Builds the loss at the current parameter values and returns its root node.
using LossBuilder = std::function<Graph::Id(Graph&)>;

// Compares tape gradients against central finite differences
// (f(p+h) - f(p-h)) / 2h for every element of every parameter. Relative
// error uses denominator max(|analytic|, |numeric|, 1e-8). The loss builder
// is evaluated twice at the base point first; a value mismatch means it is
// not deterministic and is reported as a contract violation.
GradCheckReport finite_diff_check(const LossBuilder& loss,
                                  const std::vector<Tensor*>& params,
                                  double step, double tolerance);

}  // namespace hscr
