#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "mpath/metrics.hpp"
#include "mpath/model.hpp"

namespace mpath {

struct TrainConfig {
  double lr = 1e-4;
  int64_t warmup_steps = 500;
  int64_t batch_size = 8;
  int64_t max_epochs = 100;
  int64_t patience = 20;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  uint64_t seed = 7;
  int64_t n_folds = 5;

  void validate() const;
};

// linear warmup to lr, constant afterwards; t is 1-based
double lr_at_step(int64_t t, const TrainConfig& cfg);

struct OptState {
  struct Moments {
    std::vector<float> m, v;
  };
  std::map<std::string, Moments> moments;
  int64_t t = 0;
};

// Decoupled-weight-decay Adam with bias correction over the trainable subset.
// Frozen parameters are untouched; a trainable parameter without a gradient
// is an error.
void adamw_step(ModelStateF& state, OptState& opt, double lr_t, const TrainConfig& cfg);

// Patience-based stopping on a maximized validation score. Epochs are
// 1-based; stop fires exactly `patience` epochs after the best one.
class EarlyStopper {
 public:
  explicit EarlyStopper(int64_t patience) : patience_(patience) {}

  // returns true when training should stop after this observation
  bool observe(int64_t epoch, double score) {
    if (score > best_score_) {
      best_score_ = score;
      best_epoch_ = epoch;
    }
    return epoch - best_epoch_ >= patience_;
  }

  int64_t best_epoch() const { return best_epoch_; }
  double best_score() const { return best_score_; }

 private:
  int64_t patience_;
  int64_t best_epoch_ = 0;
  double best_score_ = -1e300;
};

// seeded permutation split; fold i's validation set is chunk i
std::vector<std::pair<std::vector<int64_t>, std::vector<int64_t>>> kfold_split(int64_t n,
                                                                               int64_t n_folds,
                                                                               uint64_t seed);

struct EpochRecord {
  int64_t epoch = 0;
  double train_loss = 0.0;
  double val_bleu = 0.0;
  double val_rouge = 0.0;
  double val_key = 0.0;
  double val_emb = 0.0;
  double val_composite = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  ModelStateF best_state;
  std::vector<EpochRecord> history;
  int64_t best_epoch = 0;
  double best_score = 0.0;
};

// greedy generations for every sample, scored against their references;
// parallel across samples, reduced in sample order
ScoreBreakdown evaluate_generations(std::span<const PairedSample> samples,
                                    const ModelStateF& state, const ModelConfig& cfg,
                                    const Vocab& vocab, const ScoreContext& ctx,
                                    std::vector<std::string>* generations = nullptr);

TrainResult train_fold(std::span<const PairedSample> train_set,
                       std::span<const PairedSample> val_set, const ModelStateF& initial,
                       const ModelConfig& mcfg, const TrainConfig& tcfg,
                       const ScoreContext& score_ctx, const Vocab& vocab);

}  // namespace mpath
