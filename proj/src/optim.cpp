#include "nw/optim.hpp"

#include "nw/error.hpp"

#include <cmath>
#include <numbers>

namespace nw {

double lr_schedule(std::size_t step, std::size_t warmup_steps, std::size_t total_steps, double base_lr) {
    if (warmup_steps > total_steps) {
        fail(ErrorKind::BadSchedule, "warmup " + std::to_string(warmup_steps) + " exceeds total " +
                                         std::to_string(total_steps));
    }
    if (step > total_steps) {
        fail(ErrorKind::BadSchedule, "step " + std::to_string(step) + " beyond total " + std::to_string(total_steps));
    }
    if (step < warmup_steps) {
        return base_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
    }
    const std::size_t decay = total_steps - warmup_steps;
    if (decay == 0) {
        return base_lr;
    }
    const double progress = static_cast<double>(step - warmup_steps) / static_cast<double>(decay);
    return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

AdamW::AdamW(std::vector<Tensor> params, AdamWConfig config) : params_(std::move(params)), config_(config) {
    for (const auto& p : params_) {
        m_.emplace_back(p.numel(), 0.0);
        v_.emplace_back(p.numel(), 0.0);
    }
}

void AdamW::step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto values = params_[i].mutable_values();
        const auto grad = params_[i].grad();
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t j = 0; j < values.size(); ++j) {
            const double g = grad[j];
            m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * g;
            v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * g * g;
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            values[j] -= lr * (mhat / (std::sqrt(vhat) + config_.eps) + config_.weight_decay * values[j]);
        }
    }
}

void AdamW::zero_grad() {
    for (auto& p : params_) {
        p.zero_grad();
    }
}

} // namespace nw
