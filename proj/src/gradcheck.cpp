#include "hscr/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "hscr/common.hpp"

namespace hscr {

namespace {

double eval_loss(const LossBuilder& loss) {
    Graph g;
    return g.scalar_value(loss(g));
}

}  // namespace

GradCheckReport finite_diff_check(const LossBuilder& loss,
                                  const std::vector<Tensor*>& params,
                                  double step, double tolerance) {
    require(step > 0.0, "finite_diff_check: step must be positive");

    const double base1 = eval_loss(loss);
    const double base2 = eval_loss(loss);
    if (base1 != base2)
        throw std::logic_error("finite_diff_check: loss_fn is not deterministic");

    // Analytic pass.
    std::vector<std::vector<double>> saved_grads;
    for (Tensor* p : params) {
        saved_grads.push_back(p->grad);
        p->ensure_grad();
        p->zero_grad();
    }
    {
        Graph g;
        g.backward(loss(g));
    }
    std::vector<std::vector<double>> analytic;
    for (Tensor* p : params) analytic.push_back(p->grad);
    for (size_t i = 0; i < params.size(); ++i) params[i]->grad = saved_grads[i];

    GradCheckReport report;
    report.tolerance = tolerance;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        Tensor& p = *params[pi];
        for (size_t i = 0; i < p.data.size(); ++i) {
            const double original = p.data[i];
            p.data[i] = original + step;
            const double fp = eval_loss(loss);
            p.data[i] = original - step;
            const double fm = eval_loss(loss);
            p.data[i] = original;
            const double numeric = (fp - fm) / (2.0 * step);
            const double a = analytic[pi][i];
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
            const double rel = std::abs(a - numeric) / denom;
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.param_index = static_cast<int64_t>(pi);
                report.flat_index = static_cast<int64_t>(i);
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    report.passed = report.max_rel_error <= tolerance;
    return report;
}

}  // namespace hscr
