#include "amaa/objective.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace amaa {

LabelVolume LabelVolume::flipped_w() const {
  LabelVolume out = *this;
  for (std::size_t d = 0; d < dims.depth; ++d) {
    for (std::size_t h = 0; h < dims.height; ++h) {
      for (std::size_t w = 0; w < dims.width; ++w) {
        const std::size_t src = index(d, h, dims.width - 1 - w);
        out.ids[index(d, h, w)] = ids[src];
        if (!mask.empty()) out.mask[index(d, h, w)] = mask[src];
      }
    }
  }
  return out;
}

void LossConfig::validate(std::size_t classes) const {
  if (class_weights.size() != classes) {
    throw ConfigError("expected " + std::to_string(classes) + " class weights, got " +
                      std::to_string(class_weights.size()));
  }
  for (double w : class_weights) {
    if (!(w > 0.0)) throw ConfigError("class weights must be > 0");
  }
  if (!(lambda_c >= 0.0)) throw ConfigError("lambda_c must be >= 0");
  if (consistency_window == 0 || consistency_window % 2 == 0) {
    throw ConfigError("consistency window must be odd");
  }
}

namespace {

void check_alignment(const Tensor& probs, const LabelVolume& truth) {
  probs.require_rank(4);
  if (spatial_dims(probs) != truth.dims || truth.ids.size() != truth.dims.count()) {
    throw ShapeError("probabilities " + to_string(probs.shape()) +
                     " do not align with the label volume");
  }
  if (!truth.mask.empty() && truth.mask.size() != truth.ids.size()) {
    throw ShapeError("label mask length does not match the label volume");
  }
  for (auto id : truth.ids) {
    if (id >= probs.channels()) {
      throw ShapeError("label id " + std::to_string(id) + " >= class count " +
                       std::to_string(probs.channels()));
    }
  }
}

}  // namespace

LabelVolume predict_labels(const Tensor& probs) {
  probs.require_rank(4);
  LabelVolume out(spatial_dims(probs));
  const std::size_t n = probs.voxels();
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < probs.channels(); ++c) {
      if (probs[c * n + i] > probs[best * n + i]) best = c;
    }
    out.ids[i] = static_cast<std::uint16_t>(best);
  }
  return out;
}

std::vector<double> inverse_frequency_weights(const std::vector<LabelVolume>& labels,
                                              std::size_t classes) {
  std::vector<double> counts(classes, 0.0);
  double total = 0.0;
  for (const auto& lv : labels) {
    for (std::size_t i = 0; i < lv.size(); ++i) {
      if (!lv.valid(i)) continue;
      if (lv.ids[i] >= classes) throw ShapeError("label id exceeds class count");
      counts[lv.ids[i]] += 1.0;
      total += 1.0;
    }
  }
  std::vector<double> w(classes, 1.0);
  if (total == 0.0) return w;
  for (std::size_t c = 0; c < classes; ++c) {
    const double raw = counts[c] > 0.0
                           ? total / (static_cast<double>(classes) * counts[c])
                           : 5.0;
    w[c] = std::clamp(raw, 0.2, 5.0);
  }
  double mean = 0.0;
  for (double v : w) mean += v;
  mean /= static_cast<double>(classes);
  for (double& v : w) v /= mean;
  return w;
}

namespace ad {

Var weighted_ce(Tape& t, Var probs, LabelsPtr truth, const LossConfig& cfg) {
  check_alignment(t.value(probs), *truth);
  cfg.validate(t.value(probs).channels());
  std::size_t valid = 0;
  for (std::size_t i = 0; i < truth->size(); ++i) valid += truth->valid(i);
  if (valid == 0) throw ContractError("weighted CE undefined: every voxel is masked");
  const auto weights = cfg.class_weights;
  const double inv_n = 1.0 / static_cast<double>(valid);
  return t.record(
      {probs},
      [=](const Tape& tp) {
        const Tensor& p = tp.value(probs);
        const std::size_t n = p.voxels();
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          if (!truth->valid(i)) continue;
          const std::size_t y = truth->ids[i];
          acc += -weights[y] * std::log(p[y * n + i] + kLogEpsilon);
        }
        return Tensor::scalar(acc * inv_n);
      },
      [=](Tape& tp, std::size_t self) {
        const double g = tp.grad_slot({self})[0];
        const Tensor& p = tp.value(probs);
        Tensor& gp = tp.grad_slot(probs);
        const std::size_t n = p.voxels();
        for (std::size_t i = 0; i < n; ++i) {
          if (!truth->valid(i)) continue;
          const std::size_t k = truth->ids[i] * n + i;
          gp[k] += -g * weights[truth->ids[i]] * inv_n / (p[k] + kLogEpsilon);
        }
      });
}

namespace {

struct AffinityStats {
  std::vector<std::size_t> present;  // classes with n_c > 0
  std::vector<double> t, s, q;       // per present class
  std::vector<double> n_c, m_c;
};

AffinityStats affinity_stats(const Tensor& p, const LabelVolume& truth) {
  const std::size_t n = p.voxels();
  const std::size_t classes = p.channels();
  std::vector<double> count(classes, 0.0);
  double valid = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!truth.valid(i)) continue;
    count[truth.ids[i]] += 1.0;
    valid += 1.0;
  }
  AffinityStats st;
  for (std::size_t c = 0; c < classes; ++c) {
    if (count[c] == 0.0) continue;
    double t = 0.0, s = 0.0, q = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!truth.valid(i)) continue;
      const double pc = p[c * n + i];
      s += pc;
      if (truth.ids[i] == c) {
        t += pc;
      } else {
        q += 1.0 - pc;
      }
    }
    st.present.push_back(c);
    st.t.push_back(t);
    st.s.push_back(s);
    st.q.push_back(q);
    st.n_c.push_back(count[c]);
    st.m_c.push_back(valid - count[c]);
  }
  return st;
}

}  // namespace

Var affinity(Tape& t, Var probs, LabelsPtr truth) {
  check_alignment(t.value(probs), *truth);
  return t.record(
      {probs},
      [=](const Tape& tp) {
        const auto st = affinity_stats(tp.value(probs), *truth);
        double acc = 0.0;
        for (std::size_t k = 0; k < st.present.size(); ++k) {
          const double prec = st.t[k] / (st.s[k] + kLogEpsilon);
          const double rec = st.t[k] / st.n_c[k];
          double term = std::log(prec + kLogEpsilon) + std::log(rec + kLogEpsilon);
          if (st.m_c[k] > 0.0) term += std::log(st.q[k] / st.m_c[k] + kLogEpsilon);
          acc += term / 3.0;
        }
        const double k_n = static_cast<double>(st.present.size());
        return Tensor::scalar(st.present.empty() ? 0.0 : -acc / k_n);
      },
      [=](Tape& tp, std::size_t self) {
        const double g = tp.grad_slot({self})[0];
        const Tensor& p = tp.value(probs);
        const auto st = affinity_stats(p, *truth);
        if (st.present.empty()) return;
        Tensor& gp = tp.grad_slot(probs);
        const std::size_t n = p.voxels();
        const double coef = -g / (3.0 * static_cast<double>(st.present.size()));
        for (std::size_t k = 0; k < st.present.size(); ++k) {
          const std::size_t c = st.present[k];
          const double denom = st.s[k] + kLogEpsilon;
          const double prec = st.t[k] / denom;
          const double rec = st.t[k] / st.n_c[k];
          const double d_log_p = 1.0 / (prec + kLogEpsilon);
          const double d_log_r = 1.0 / (rec + kLogEpsilon);
          const bool has_spec = st.m_c[k] > 0.0;
          const double spec = has_spec ? st.q[k] / st.m_c[k] : 1.0;
          const double d_log_q = 1.0 / (spec + kLogEpsilon);
          for (std::size_t i = 0; i < n; ++i) {
            if (!truth->valid(i)) continue;
            const bool hit = truth->ids[i] == c;
            const double dp = ((hit ? denom : 0.0) - st.t[k]) / (denom * denom);
            double v = d_log_p * dp;
            if (hit) v += d_log_r / st.n_c[k];
            if (!hit && has_spec) v -= d_log_q / st.m_c[k];
            gp[c * n + i] += coef * v;
          }
        }
      });
}

namespace {

Tensor occupancy(const Tensor& p) {
  const GridDims g = spatial_dims(p);
  Tensor o = Tensor::volume(1, g.depth, g.height, g.width);
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = 1.0 - p[i];
  return o;
}

// dev_i = mean over the clipped window of (o_j - o_i), i.e. box_mean(o) - o.
// Summing differences keeps the result exactly 0 on locally constant input.
Tensor window_deviation(const Tensor& o, std::size_t window) {
  const std::size_t D = o.depth(), H = o.height(), W = o.width();
  const std::size_t r = window / 2;
  Tensor dev(o.shape());
  for (std::size_t d = 0; d < D; ++d) {
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t w = 0; w < W; ++w) {
        const double x = o.at(0, d, h, w);
        double acc = 0.0;
        std::size_t n = 0;
        for (std::size_t a = d > r ? d - r : 0; a <= std::min(D - 1, d + r); ++a) {
          for (std::size_t b = h > r ? h - r : 0; b <= std::min(H - 1, h + r); ++b) {
            for (std::size_t c = w > r ? w - r : 0; c <= std::min(W - 1, w + r); ++c) {
              acc += o.at(0, a, b, c) - x;
              ++n;
            }
          }
        }
        dev.at(0, d, h, w) = acc / static_cast<double>(n);
      }
    }
  }
  return dev;
}

}  // namespace

Var consistency(Tape& t, Var probs, const LossConfig& cfg) {
  t.value(probs).require_rank(4);
  const std::size_t window = cfg.consistency_window;
  if (window == 0 || window % 2 == 0) throw ConfigError("consistency window must be odd");
  const Var out = t.record(
      {probs},
      [=](const Tape& tp) {
        const Tensor dev = window_deviation(occupancy(tp.value(probs)), window);
        double acc = 0.0;
        for (double v : dev.values()) acc += std::abs(v);
        return Tensor::scalar(acc / static_cast<double>(dev.size()));
      },
      [=](Tape& tp, std::size_t self) {
        const double g = tp.grad_slot({self})[0];
        const Tensor dev = window_deviation(occupancy(tp.value(probs)), window);
        const double inv_n = 1.0 / static_cast<double>(dev.size());
        // d|o - m|/do = sign(o - m) = -sign(dev)
        Tensor sgn(dev.shape());
        for (std::size_t i = 0; i < dev.size(); ++i) {
          const double d = dev[i];
          sgn[i] = (d < 0.0 ? 1.0 : (d > 0.0 ? -1.0 : 0.0)) * g * inv_n;
        }
        const Tensor through_mean = ops::box_mean_backward(sgn, window);
        Tensor& gp = tp.grad_slot(probs);
        // o = 1 - p_empty
        for (std::size_t i = 0; i < sgn.size(); ++i) gp[i] -= sgn[i] - through_mean[i];
      });
  t.mark_nonsmooth(out, [probs, window](const Tape& tp, std::vector<std::uint8_t>& sig) {
    const Tensor dev = window_deviation(occupancy(tp.value(probs)), window);
    for (double d : dev.values()) sig.push_back(static_cast<std::uint8_t>((d < 0.0) + 2 * (d > 0.0)));
  });
  return out;
}

LossVars loss_total(Tape& t, Var probs, LabelsPtr truth, const LossConfig& cfg) {
  LossVars v;
  v.ce = weighted_ce(t, probs, truth, cfg);
  v.consistency = consistency(t, probs, cfg);
  Var sem = v.ce;
  if (cfg.use_affinity) {
    v.affinity = affinity(t, probs, truth);
    sem = add(t, sem, v.affinity);
  }
  v.total = add(t, sem, scale(t, v.consistency, cfg.lambda_c));
  return v;
}

}  // namespace ad

double loss_weighted_ce(const Tensor& probs, const LabelVolume& truth,
                        const LossConfig& cfg) {
  Tape t;
  return t.value(ad::weighted_ce(t, t.constant(probs),
                                 std::make_shared<LabelVolume>(truth), cfg))[0];
}

double loss_affinity(const Tensor& probs, const LabelVolume& truth) {
  Tape t;
  return t.value(
      ad::affinity(t, t.constant(probs), std::make_shared<LabelVolume>(truth)))[0];
}

double loss_consistency(const Tensor& probs, const LossConfig& cfg) {
  Tape t;
  return t.value(ad::consistency(t, t.constant(probs), cfg))[0];
}

LossBreakdown loss_total(const Tensor& probs, const LabelVolume& truth,
                         const LossConfig& cfg) {
  Tape t;
  const auto v = ad::loss_total(t, t.constant(probs),
                                std::make_shared<LabelVolume>(truth), cfg);
  LossBreakdown b;
  b.ce = t.value(v.ce)[0];
  b.affinity = v.affinity.valid() ? t.value(v.affinity)[0] : 0.0;
  b.consistency = t.value(v.consistency)[0];
  b.total = t.value(v.total)[0];
  return b;
}

}  // namespace amaa
