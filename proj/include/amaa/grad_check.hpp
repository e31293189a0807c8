#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "amaa/param_store.hpp"
#include "amaa/tape.hpp"

namespace amaa {

struct ParamGradError {
  std::string name;
  std::size_t checked = 0;    // entries compared
  /// Entries whose ±step evaluations landed on a different smooth piece of a
  /// ReLU / |x| / floor than the base point. The difference quotient then
  /// straddles a kink and says nothing about the derivative, so these entries
  /// are excluded from max_rel_error when skip_kink_crossings is set.
  std::size_t kink_crossings = 0;
  /// max_i |a_i - n_i| / max(max_i |a_i|, max_i |n_i|, 1e-8) over the
  /// parameter tensor.
  double max_rel_error = 0.0;
  /// Worst per-entry ratio |a_i - n_i| / max(|a_i|, |n_i|, 1e-8); diagnostic
  /// only, since entries with near-zero gradient magnify truncation error.
  double max_entry_rel_error = 0.0;
  double max_abs_error = 0.0;
  double max_abs_analytic = 0.0;
  double max_abs_numeric = 0.0;
};

struct GradCheckReport {
  std::vector<ParamGradError> params;  // name order
  double tolerance = 0.0;

  double max_rel_error() const;
  std::size_t checked() const;
  std::size_t kink_crossings() const;
  bool passed() const { return max_rel_error() <= tolerance; }
};

struct GradCheckOptions {
  double step = 1e-3;
  double tolerance = 1e-4;
  /// Upper bound on checked entries per parameter (0 = all). Entries are
  /// sampled with a fixed stride, so the subset is deterministic.
  std::size_t max_entries = 0;
  bool skip_kink_crossings = true;
};

/// Records `f` once, runs the reverse pass, then compares every parameter
/// gradient against central differences (f(θ+h) − f(θ−h)) / 2h obtained by
/// replaying the same tape. Errors are relative to the parameter's largest
/// gradient magnitude (see ParamGradError).
GradCheckReport grad_check(const std::function<Var(Tape&, ParamStore&)>& f,
                           ParamStore& params, const GradCheckOptions& opts = {});

}  // namespace amaa
