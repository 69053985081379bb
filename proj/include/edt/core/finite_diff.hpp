#pragma once

#include <functional>

#include "edt/core/graph.hpp"

namespace edt::ad {

struct FiniteDiffReport {
    double max_rel_err = 0.0;
    std::size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
};

/// Checks backward() of an arbitrary scalar-valued computation against
/// central finite differences, one coordinate at a time. `f` receives a
/// fresh graph and the perturbed tensor as a parameter leaf and must return
/// a scalar Var. Relative error uses denominator max(|a|, |n|, 1e-2).
inline FiniteDiffReport finite_diff_check(const std::function<Var(Graph&, Var)>& f,
                                          const Tensor& x, double step) {
    if (step <= 0.0) throw std::invalid_argument("finite_diff_check: step must be > 0");

    Graph g;
    Var vx = g.param(x);
    Var loss = f(g, vx);
    if (loss.val().size() != 1) throw std::invalid_argument("finite_diff_check: f must be scalar");
    g.backward(loss);
    Tensor analytic = g.grad(vx);

    auto eval = [&f](const Tensor& t) {
        Graph h;
        Var v = h.param(t);
        Var out = f(h, v);
        double val = out.val()[0];
        if (!std::isfinite(val)) throw std::runtime_error("finite_diff_check: non-finite f output");
        return val;
    };

    FiniteDiffReport rep;
    Tensor probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double orig = probe[i];
        probe[i] = orig + step;
        double fp = eval(probe);
        probe[i] = orig - step;
        double fm = eval(probe);
        probe[i] = orig;
        double numeric = (fp - fm) / (2.0 * step);
        double denom = std::max({std::fabs(analytic[i]), std::fabs(numeric), 1e-2});
        double rel = std::fabs(analytic[i] - numeric) / denom;
        if (rel > rep.max_rel_err) {
            rep.max_rel_err = rel;
            rep.worst_index = i;
            rep.analytic = analytic[i];
            rep.numeric = numeric;
        }
    }
    return rep;
}

}  // namespace edt::ad
