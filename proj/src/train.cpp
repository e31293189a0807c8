#include "amaa/train.hpp"

#include <charconv>
#include <cmath>
#include <memory>
#include <numeric>

#include "amaa/rng.hpp"
#include "amaa/scene.hpp"

namespace amaa {

void TrainConfig::validate() const {
  if (!(lr >= 0.0)) throw ConfigError("lr must be >= 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("beta1 and beta2 must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw ConfigError("eps must be > 0");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(decay_power >= 0.0)) throw ConfigError("decay_power must be >= 0");
}

double poly_lr(double lr0, std::size_t step, std::size_t total, double power) {
  if (total == 0) return lr0;
  const double frac = 1.0 - static_cast<double>(step) / static_cast<double>(total);
  return lr0 * std::pow(frac, power);
}

AdamW::AdamW(const TrainConfig& tc)
    : beta1_(tc.beta1), beta2_(tc.beta2), eps_(tc.eps), wd_(tc.weight_decay) {}

void AdamW::step(ParamStore& params, double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (auto& [name, p] : params) {
    auto it = moments_.find(name);
    if (it == moments_.end()) {
      it = moments_.emplace(name, std::pair{Tensor(p.value.shape()), Tensor(p.value.shape())})
               .first;
    }
    Tensor& m = it->second.first;
    Tensor& v = it->second.second;
    const bool has_grad = !p.grad.empty();
    const double shrink = p.decay ? 1.0 - lr * wd_ : 1.0;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = has_grad ? p.grad[i] : 0.0;
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p.value[i] = p.value[i] * shrink - lr * (m_hat / (std::sqrt(v_hat) + eps_));
    }
  }
}

NonFiniteLossError::NonFiniteLossError(const std::string& term, std::size_t epoch,
                                       std::size_t step)
    : std::runtime_error("non-finite " + term + " loss at epoch " + std::to_string(epoch) +
                         ", step " + std::to_string(step)),
      term_(term) {}

MetricsReport evaluate(const Model& model, const ParamStore& params,
                       const std::vector<SceneSample>& split) {
  if (split.empty()) throw ConfigError("cannot evaluate an empty split");
  MetricsAccumulator acc(model.config().classes);
  for (const auto& s : split) acc.add(predict_labels(model.predict(params, s.rgb)), s.labels);
  return acc.report();
}

namespace {

LossConfig resolve_loss(const Model& model, const std::vector<SceneSample>& train_split) {
  LossConfig loss = model.config().loss;
  if (loss.class_weights.empty()) {
    std::vector<LabelVolume> labels;
    for (const auto& s : train_split) labels.push_back(s.labels);
    loss.class_weights = inverse_frequency_weights(labels, model.config().classes);
  }
  loss.validate(model.config().classes);
  return loss;
}

void check_finite(const LossBreakdown& b, std::size_t epoch, std::size_t step) {
  if (!std::isfinite(b.ce)) throw NonFiniteLossError("ce", epoch, step);
  if (!std::isfinite(b.affinity)) throw NonFiniteLossError("affinity", epoch, step);
  if (!std::isfinite(b.consistency)) throw NonFiniteLossError("consistency", epoch, step);
  if (!std::isfinite(b.total)) throw NonFiniteLossError("total", epoch, step);
}

}  // namespace

TrainResult train(const Model& model, const std::vector<SceneSample>& train_split,
                  const std::vector<SceneSample>& val_split, const TrainConfig& tc,
                  const EpochCallback& on_epoch) {
  return train_from(model, model.init_params(), train_split, val_split, tc, on_epoch);
}

TrainResult train_from(const Model& model, ParamStore params,
                       const std::vector<SceneSample>& train_split,
                       const std::vector<SceneSample>& val_split, const TrainConfig& tc,
                       const EpochCallback& on_epoch) {
  tc.validate();
  if (train_split.empty()) throw ConfigError("training split is empty");
  if (tc.flip && !flip_is_consistent(model.grid())) {
    throw ConfigError("flip augmentation needs a centred principal point, a grid "
                      "symmetric about the optical axis and an identity pose");
  }
  TrainResult result;
  const LossConfig loss = resolve_loss(model, train_split);
  result.class_weights = loss.class_weights;

  const std::size_t n = train_split.size();
  const std::size_t steps_per_epoch = (n + tc.batch_size - 1) / tc.batch_size;
  const std::size_t total_steps = steps_per_epoch * tc.epochs;
  AdamW opt(tc);
  SplitMix64 rng(tc.seed ^ fnv1a64("train.order"));
  std::vector<std::size_t> order(n);
  std::size_t step = 0;

  for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = n; i-- > 1;) std::swap(order[i], order[rng.below(i + 1)]);

    EpochLog log;
    log.epoch = epoch;
    for (std::size_t b = 0; b < n; b += tc.batch_size) {
      const std::size_t end = std::min(n, b + tc.batch_size);
      params.zero_grad();
      for (std::size_t k = b; k < end; ++k) {
        const SceneSample& s = train_split[order[k]];
        const bool flip = tc.flip && rng.below(2) == 1;
        const Tensor image = flip ? flip_image(s.rgb) : s.rgb;
        const auto labels =
            std::make_shared<const LabelVolume>(flip ? s.labels.flipped_w() : s.labels);
        Tape t;
        const ForwardVars fv = model.forward(t, params, image);
        const ad::LossVars lv = ad::loss_total(t, fv.probs, labels, loss);
        LossBreakdown lb{t.value(lv.ce)[0],
                         lv.affinity.valid() ? t.value(lv.affinity)[0] : 0.0,
                         t.value(lv.consistency)[0], t.value(lv.total)[0]};
        check_finite(lb, epoch, step);
        t.backward(lv.total);
        log.loss.ce += lb.ce;
        log.loss.affinity += lb.affinity;
        log.loss.consistency += lb.consistency;
        log.loss.total += lb.total;
      }
      params.scale_grad(1.0 / static_cast<double>(end - b));
      if (tc.clip_norm > 0.0) {
        const double norm = params.grad_norm();
        if (norm > tc.clip_norm) params.scale_grad(tc.clip_norm / norm);
      }
      log.lr = poly_lr(tc.lr, step, total_steps, tc.decay_power);
      opt.step(params, log.lr);
      ++step;
    }
    const double inv = 1.0 / static_cast<double>(n);
    log.loss.ce *= inv;
    log.loss.affinity *= inv;
    log.loss.consistency *= inv;
    log.loss.total *= inv;
    log.val = evaluate(model, params, val_split);
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  result.params = std::move(params);
  return result;
}

std::vector<AblationRow> run_ablation(const ModelConfig& base, const CameraGrid& grid,
                                      const std::vector<SceneSample>& train_split,
                                      const std::vector<SceneSample>& val_split,
                                      const TrainConfig& tc,
                                      const std::vector<std::uint64_t>& seeds,
                                      const RunCallback& on_run) {
  if (seeds.empty()) throw ConfigError("ablation needs at least one seed");
  std::vector<AblationRow> rows;
  for (char variant : {'A', 'B', 'C', 'D'}) {
    for (std::uint64_t seed : seeds) {
      ModelConfig cfg = with_variant(base, variant);
      cfg.seed = seed;
      TrainConfig run_tc = tc;
      run_tc.seed = seed;
      const Model model(cfg, grid);
      TrainResult r = train(model, train_split, val_split, run_tc);
      if (on_run) {
        const std::string method(1, variant);
        on_run({method + "_seed" + std::to_string(seed), method, seed, cfg, run_tc}, r);
      }
      rows.push_back({variant, seed, r.log.back().val, std::move(r.log)});
    }
  }
  return rows;
}

std::vector<SweepRow> sweep_alpha(const ModelConfig& cfg, const CameraGrid& grid,
                                  const std::vector<SceneSample>& train_split,
                                  const std::vector<SceneSample>& val_split,
                                  const TrainConfig& tc, const std::vector<double>& alphas,
                                  const RunCallback& on_run) {
  if (!cfg.use_afg) throw ConfigError("the alpha sweep needs use_afg enabled");
  if (alphas.empty()) throw ConfigError("alpha sweep needs at least one alpha");
  std::vector<SweepRow> rows;
  for (double alpha : alphas) {
    ModelConfig run_cfg = cfg;
    run_cfg.alpha = alpha;
    const Model model(run_cfg, grid);
    TrainResult r = train(model, train_split, val_split, tc);
    if (on_run) {
      const std::string name = "alpha_" + format_alpha(alpha);
      on_run({name, name, tc.seed, run_cfg, tc}, r);
    }
    rows.push_back({alpha, r.log.back().val, std::move(r.log)});
  }
  return rows;
}

std::string epoch_log_csv(const std::vector<EpochLog>& log, std::size_t classes) {
  std::string s = "epoch,lr,ce,affinity,consistency,total," + metrics_csv_header(classes) + "\n";
  for (const auto& e : log) {
    s += std::to_string(e.epoch) + "," + format_double(e.lr) + "," +
         format_double(e.loss.ce) + "," + format_double(e.loss.affinity) + "," +
         format_double(e.loss.consistency) + "," + format_double(e.loss.total) + "," +
         metrics_csv_row(e.val) + "\n";
  }
  return s;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string s = "variant,seed,sc_iou,miou\n";
  for (const auto& r : rows) {
    s += std::string(1, r.variant) + "," + std::to_string(r.seed) + "," +
         format_double(r.report.sc_iou) + "," + format_double(r.report.miou) + "\n";
  }
  return s;
}

std::string format_alpha(double alpha) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, alpha, std::chars_format::fixed, 2);
  return std::string(buf, res.ptr);
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string s = "alpha,miou,sc_iou,precision,recall\n";
  for (const auto& r : rows) {
    s += format_alpha(r.alpha) + "," + format_double(r.report.miou) + "," +
         format_double(r.report.sc_iou) + "," + format_double(r.report.precision) + "," +
         format_double(r.report.recall) + "\n";
  }
  return s;
}

}  // namespace amaa
