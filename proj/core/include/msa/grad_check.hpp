#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "msa/tensor.hpp"

namespace msa {

// Central-difference gradient check in f64. f must map the given inputs to a
// scalar tensor using taped ops only; it is re-run for every perturbed
// coordinate, so keep instances small. Returns the max over all coordinates
// of |analytic - numeric| / max(1, |analytic|, |numeric|).
inline double grad_check_multi(const std::function<Tensor<double>()>& f,
                               const std::vector<Tensor<double>*>& inputs, double eps = 1e-5) {
    if (eps <= 0) throw ContractError("grad_check: eps must be > 0");
    for (auto* in : inputs) in->set_requires_grad(true);

    std::vector<std::vector<double>> analytic;
    {
        Tape<double> tape;
        tape.set_check_finite(true);
        TapeScope<double> scope(tape);
        for (auto* in : inputs) in->zero_grad();
        Tensor<double> y = f();
        if (y.numel() != 1) throw ContractError("grad_check: function must return a scalar");
        tape.backward(y);
        for (auto* in : inputs)
            analytic.emplace_back(in->grad().begin(), in->grad().end());
    }

    double max_err = 0.0;
    for (std::size_t t = 0; t < inputs.size(); ++t) {
        auto* in = inputs[t];
        auto vals = in->data_mut();
        for (std::size_t i = 0; i < vals.size(); ++i) {
            const double saved = vals[i];
            vals[i] = saved + eps;
            const double fp = f().item();
            vals[i] = saved - eps;
            const double fm = f().item();
            vals[i] = saved;
            const double numeric = (fp - fm) / (2.0 * eps);
            const double a = analytic[t][i];
            const double err =
                std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
            max_err = std::max(max_err, err);
        }
    }
    return max_err;
}

inline double grad_check(const std::function<Tensor<double>(const Tensor<double>&)>& f,
                         Tensor<double>& input, double eps = 1e-5) {
    return grad_check_multi([&]() { return f(input); }, {&input}, eps);
}

}  // namespace msa
