#pragma once

#include "nw/tensor.hpp"

#include <cstddef>
#include <vector>

namespace nw {

/// Linear warmup to base_lr, then cosine decay to zero at total_steps.
/// Throws BadSchedule when warmup > total or step is outside [0, total].
double lr_schedule(std::size_t step, std::size_t warmup_steps, std::size_t total_steps, double base_lr);

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

/// Adam with decoupled weight decay.
class AdamW {
public:
    AdamW(std::vector<Tensor> params, AdamWConfig config = {});

    void step(double lr);
    void zero_grad();
    std::size_t steps_taken() const noexcept { return t_; }

private:
    std::vector<Tensor> params_;
    AdamWConfig config_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    std::size_t t_ = 0;
};

} // namespace nw
