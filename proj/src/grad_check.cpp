#include "amaa/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace amaa {

double GradCheckReport::max_rel_error() const {
  double m = 0.0;
  for (const auto& p : params) m = std::max(m, p.max_rel_error);
  return m;
}

std::size_t GradCheckReport::checked() const {
  std::size_t n = 0;
  for (const auto& p : params) n += p.checked;
  return n;
}

std::size_t GradCheckReport::kink_crossings() const {
  std::size_t n = 0;
  for (const auto& p : params) n += p.kink_crossings;
  return n;
}

GradCheckReport grad_check(const std::function<Var(Tape&, ParamStore&)>& f,
                           ParamStore& params, const GradCheckOptions& opts) {
  Tape tape;
  const Var out = f(tape, params);
  if (!out.valid() || tape.value(out).size() != 1) {
    throw ContractError("grad_check requires a scalar-valued computation");
  }
  params.zero_grad();
  tape.backward(out);
  const std::vector<std::uint8_t> base_regime = tape.regime_signature();

  GradCheckReport report;
  report.tolerance = opts.tolerance;
  for (auto& [name, param] : params) {
    ParamGradError entry{name};
    const std::vector<Var> leaves = tape.param_leaves(name);
    const std::size_t n = param.value.size();
    const std::size_t stride =
        (opts.max_entries == 0 || n <= opts.max_entries)
            ? 1
            : (n + opts.max_entries - 1) / opts.max_entries;
    for (std::size_t i = 0; i < n; i += stride) {
      const double analytic = param.grad[i];
      double numeric = 0.0;
      bool crossed = false;
      if (!leaves.empty()) {
        const double base = tape.leaf_value(leaves.front())[i];
        auto eval_at = [&](double v) {
          for (Var leaf : leaves) tape.leaf_value(leaf)[i] = v;
          tape.replay();
          crossed = crossed || tape.regime_signature() != base_regime;
          return tape.value(out)[0];
        };
        const double fp = eval_at(base + opts.step);
        const double fm = eval_at(base - opts.step);
        for (Var leaf : leaves) tape.leaf_value(leaf)[i] = base;
        numeric = (fp - fm) / (2.0 * opts.step);
      }
      ++entry.checked;
      if (crossed) {
        ++entry.kink_crossings;
        if (opts.skip_kink_crossings) continue;
      }
      const double err = std::abs(analytic - numeric);
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      entry.max_entry_rel_error = std::max(entry.max_entry_rel_error, err / denom);
      entry.max_abs_error = std::max(entry.max_abs_error, err);
      entry.max_abs_analytic = std::max(entry.max_abs_analytic, std::abs(analytic));
      entry.max_abs_numeric = std::max(entry.max_abs_numeric, std::abs(numeric));
    }
    entry.max_rel_error =
        entry.max_abs_error /
        std::max({entry.max_abs_analytic, entry.max_abs_numeric, 1e-8});
    report.params.push_back(entry);
  }
  tape.replay();
  return report;
}

}  // namespace amaa
