#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mpath/autograd.hpp"
#include "mpath/rng.hpp"
#include "mpath/tensor.hpp"

namespace mpath {

struct GradCheckOptions {
  double eps = 1e-5;
  double tol = 1e-4;
  // when >0, only this many randomly chosen coordinates per parameter are
  // probed by finite differences (the analytic side is always full)
  int64_t max_coords_per_param = -1;
  uint64_t coord_seed = 0x6d70617468ULL;
};

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  bool pass = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double worst = 0.0;
  bool all_pass = true;
};

// Compares analytic gradients of a scalar-valued graph builder against
// central finite differences (f(x+eps) - f(x-eps)) / 2eps, in the tensor's
// own precision (use Tensor<double> params for check-grade accuracy).
//
// `build` is invoked as build(graph) and must construct the loss from the
// given parameter tensors; it is re-run for every probe, so it must be
// deterministic. A non-deterministic builder is reported as an error.
template <typename F>
GradCheckReport grad_check(F&& build, const std::vector<std::pair<std::string, TensorD>>& params,
                           const GradCheckOptions& opt = {}) {
  // determinism probe: two untracked evaluations must agree bit-for-bit
  double base;
  {
    Graph<double> g1(GradMode::kNoGrad);
    base = build(g1).item();
    Graph<double> g2(GradMode::kNoGrad);
    const double again = build(g2).item();
    if (base != again) {
      throw std::runtime_error("grad_check: builder is non-deterministic (" +
                               std::to_string(base) + " vs " + std::to_string(again) + ")");
    }
  }
  (void)base;

  for (auto& [name, p] : params) {
    (void)name;
    const_cast<TensorD&>(p).drop_grad();
    const_cast<TensorD&>(p).set_requires_grad(true);
  }

  Graph<double> g;
  TensorD loss = build(g);
  g.backward(loss);

  GradCheckReport report;
  Rng coord_rng(opt.coord_seed);
  for (const auto& [name, p] : params) {
    TensorD param = p;
    GradCheckEntry entry;
    entry.name = name;
    if (!param.has_grad()) {
      // parameter unused by the builder: analytic gradient is identically 0
      param.ensure_grad();
    }

    std::vector<int64_t> coords(static_cast<size_t>(param.numel()));
    for (size_t i = 0; i < coords.size(); ++i) coords[i] = static_cast<int64_t>(i);
    if (opt.max_coords_per_param > 0 &&
        static_cast<int64_t>(coords.size()) > opt.max_coords_per_param) {
      coord_rng.shuffle(coords.begin(), coords.end());
      coords.resize(static_cast<size_t>(opt.max_coords_per_param));
    }

    auto data = param.data();
    auto grad = param.grad();
    for (int64_t c : coords) {
      const double saved = data[c];
      data[c] = saved + opt.eps;
      Graph<double> gp(GradMode::kNoGrad);
      const double fp = build(gp).item();
      data[c] = saved - opt.eps;
      Graph<double> gm(GradMode::kNoGrad);
      const double fm = build(gm).item();
      data[c] = saved;
      const double numeric = (fp - fm) / (2.0 * opt.eps);
      const double rel = std::abs(grad[c] - numeric) / std::max(std::abs(numeric), 1e-8);
      entry.max_rel_err = std::max(entry.max_rel_err, rel);
    }
    entry.pass = entry.max_rel_err < opt.tol;
    report.worst = std::max(report.worst, entry.max_rel_err);
    report.all_pass = report.all_pass && entry.pass;
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace mpath
