#pragma once

// Optimisation loop (AdamW with decoupled weight decay, polynomial decay,
// global-norm clipping, fixed-order batch accumulation), evaluation, and the
// ablation / alpha-sweep drivers built on top of them.

#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "amaa/dataset.hpp"
#include "amaa/metrics.hpp"
#include "amaa/model.hpp"

namespace amaa {

struct TrainConfig {
  double lr = 1e-4;
  double weight_decay = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t epochs = 15;
  std::size_t batch_size = 2;
  double decay_power = 0.9;
  double clip_norm = 5.0;  // <= 0 disables clipping
  std::uint64_t seed = 0;
  bool flip = true;  // horizontal flip augmentation

  void validate() const;
};

/// lr0 * (1 - step / total)^power.
double poly_lr(double lr0, std::size_t step, std::size_t total, double power);

class AdamW {
 public:
  explicit AdamW(const TrainConfig& tc);

  /// One update with learning rate `lr`. Parameters flagged for decay are
  /// first shrunk by (1 - lr * wd), then moved by lr * m_hat / (sqrt(v_hat) + eps).
  void step(ParamStore& params, double lr);
  std::size_t steps() const { return t_; }

 private:
  double beta1_, beta2_, eps_, wd_;
  std::size_t t_ = 0;
  std::map<std::string, std::pair<Tensor, Tensor>> moments_;
};

class NonFiniteLossError : public std::runtime_error {
 public:
  NonFiniteLossError(const std::string& term, std::size_t epoch, std::size_t step);
  const std::string& term() const { return term_; }

 private:
  std::string term_;
};

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double lr = 0.0;        // rate used by the epoch's last step
  LossBreakdown loss;     // means over the epoch's training samples
  MetricsReport val;
};

struct TrainResult {
  ParamStore params;
  std::vector<EpochLog> log;
  std::vector<double> class_weights;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Class weights come from the model's LossConfig, or from inverse frequency
/// over `train_split` when that list is empty.
TrainResult train(const Model& model, const std::vector<SceneSample>& train_split,
                  const std::vector<SceneSample>& val_split, const TrainConfig& tc,
                  const EpochCallback& on_epoch = {});

/// Trains from caller-supplied initial parameters.
TrainResult train_from(const Model& model, ParamStore params,
                       const std::vector<SceneSample>& train_split,
                       const std::vector<SceneSample>& val_split, const TrainConfig& tc,
                       const EpochCallback& on_epoch = {});

/// Global count accumulation over the split. Throws ConfigError when empty.
MetricsReport evaluate(const Model& model, const ParamStore& params,
                       const std::vector<SceneSample>& split);

struct AblationRow {
  char variant = 'A';
  std::uint64_t seed = 0;
  MetricsReport report;
  std::vector<EpochLog> log;
};

/// What one ablation or sweep run trained, for callers that persist runs.
struct RunSpec {
  std::string name;    // "A_seed1", "alpha_0.75", ...
  std::string method;  // "A".."D" or "alpha_0.75"
  std::uint64_t seed = 0;
  ModelConfig model;
  TrainConfig train;
};

using RunCallback = std::function<void(const RunSpec& run, const TrainResult&)>;

/// Variants A-D for every seed (variant-major). The seed drives both the
/// parameter init and the training stream.
std::vector<AblationRow> run_ablation(const ModelConfig& base, const CameraGrid& grid,
                                      const std::vector<SceneSample>& train_split,
                                      const std::vector<SceneSample>& val_split,
                                      const TrainConfig& tc,
                                      const std::vector<std::uint64_t>& seeds,
                                      const RunCallback& on_run = {});

inline const std::vector<double> kDefaultAlphas{0.0, 0.25, 0.5, 0.75, 1.0, 1.25};
inline constexpr double kChosenAlpha = 0.75;

struct SweepRow {
  double alpha = 0.0;
  MetricsReport report;
  std::vector<EpochLog> log;
};

/// One variant-D run per alpha, everything else fixed.
std::vector<SweepRow> sweep_alpha(const ModelConfig& cfg, const CameraGrid& grid,
                                  const std::vector<SceneSample>& train_split,
                                  const std::vector<SceneSample>& val_split,
                                  const TrainConfig& tc, const std::vector<double>& alphas,
                                  const RunCallback& on_run = {});

/// CSV (LF, header row): epoch,lr,ce,affinity,consistency,total, then the
/// validation metric columns.
std::string epoch_log_csv(const std::vector<EpochLog>& log, std::size_t classes);
std::string ablation_csv(const std::vector<AblationRow>& rows);
/// Alpha column uses two fixed decimals ("0.00", "0.25", ...).
std::string sweep_csv(const std::vector<SweepRow>& rows);
std::string format_alpha(double alpha);

}  // namespace amaa
