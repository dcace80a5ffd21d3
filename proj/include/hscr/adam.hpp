#pragma once

#include <cstdint>
#include <vector>

#include "hscr/tensor.hpp"

namespace hscr {

// Standard Adam with bias correction. Deterministic: identical parameter,
// gradient and state inputs produce bitwise-identical updates.
class Adam {
public:
    struct Options {
        double learning_rate = 1e-3;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double epsilon = 1e-8;
    };

    Adam(std::vector<Tensor*> params, Options opts);

    // Consumes each parameter's grad buffer (missing grads count as zero),
    // then leaves it untouched; callers zero grads between steps.
    void step();
    void set_learning_rate(double lr) { opts_.learning_rate = lr; }
    int64_t step_count() const { return step_; }

private:
    std::vector<Tensor*> params_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    Options opts_;
    int64_t step_ = 0;
};

}  // namespace hscr
