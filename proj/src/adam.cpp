#include "hscr/adam.hpp"

#include <cmath>

#include "hscr/common.hpp"

namespace hscr {

Adam::Adam(std::vector<Tensor*> params, Options opts)
    : params_(std::move(params)), opts_(opts) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Tensor* p : params_) {
        m_.emplace_back(p->data.size(), 0.0);
        v_.emplace_back(p->data.size(), 0.0);
    }
}

void Adam::step() {
    ++step_;
    const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(step_));
    for (size_t t = 0; t < params_.size(); ++t) {
        Tensor& p = *params_[t];
        require(p.grad.empty() || p.grad.size() == p.data.size(),
                "adam: grad/param shape mismatch");
        std::vector<double>& m = m_[t];
        std::vector<double>& v = v_[t];
        for (size_t i = 0; i < p.data.size(); ++i) {
            const double g = p.grad.empty() ? 0.0 : p.grad[i];
            m[i] = opts_.beta1 * m[i] + (1.0 - opts_.beta1) * g;
            v[i] = opts_.beta2 * v[i] + (1.0 - opts_.beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p.data[i] -= opts_.learning_rate * mhat / (std::sqrt(vhat) + opts_.epsilon);
        }
    }
}

}  // namespace hscr
