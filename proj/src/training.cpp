#include "mpath/training.hpp"

#include <atomic>
#include <cmath>
#include <thread>

namespace mpath {

namespace {
constexpr uint64_t kTrainStream = 0x1717c0ffee000003ULL;
}

void TrainConfig::validate() const {
  if (lr <= 0) throw std::invalid_argument("train config: lr must be > 0");
  if (patience < 1) throw std::invalid_argument("train config: patience must be >= 1");
  if (n_folds < 2) throw std::invalid_argument("train config: n_folds must be >= 2");
  if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
  if (max_epochs < 1) throw std::invalid_argument("train config: max_epochs must be >= 1");
  if (warmup_steps < 1) throw std::invalid_argument("train config: warmup_steps must be >= 1");
}

double lr_at_step(int64_t t, const TrainConfig& cfg) {
  if (t < 1) throw std::invalid_argument("lr_at_step: t must be >= 1");
  return cfg.lr * std::min(1.0, double(t) / double(cfg.warmup_steps));
}

void adamw_step(ModelStateF& state, OptState& opt, double lr_t, const TrainConfig& cfg) {
  opt.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, double(opt.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, double(opt.t));
  for (auto& [name, p] : state.params) {
    if (p.frozen) continue;
    if (!p.value.has_grad()) {
      throw std::runtime_error("adamw_step: trainable parameter '" + name + "' has no grad");
    }
    auto& mom = opt.moments[name];
    const size_t n = p.value.data().size();
    if (mom.m.empty()) {
      mom.m.assign(n, 0.0f);
      mom.v.assign(n, 0.0f);
    }
    auto theta = p.value.data();
    auto grad = p.value.grad();
    for (size_t i = 0; i < n; ++i) {
      const double gi = grad[i];
      mom.m[i] = float(cfg.beta1 * mom.m[i] + (1.0 - cfg.beta1) * gi);
      mom.v[i] = float(cfg.beta2 * mom.v[i] + (1.0 - cfg.beta2) * gi * gi);
      const double mhat = mom.m[i] / bc1;
      const double vhat = mom.v[i] / bc2;
      const double update = mhat / (std::sqrt(vhat) + cfg.eps) + cfg.weight_decay * theta[i];
      theta[i] = float(theta[i] - lr_t * update);
    }
  }
}

std::vector<std::pair<std::vector<int64_t>, std::vector<int64_t>>> kfold_split(int64_t n,
                                                                               int64_t n_folds,
                                                                               uint64_t seed) {
  if (n_folds < 2) throw std::invalid_argument("kfold_split: n_folds must be >= 2");
  if (n < n_folds) {
    throw std::invalid_argument("kfold_split: need at least n_folds samples, got " +
                                std::to_string(n));
  }
  std::vector<int64_t> perm(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) perm[static_cast<size_t>(i)] = i;
  Rng rng(Rng::derive(seed, kTrainStream));
  rng.shuffle(perm.begin(), perm.end());

  std::vector<std::pair<std::vector<int64_t>, std::vector<int64_t>>> folds;
  const int64_t base = n / n_folds;
  const int64_t rem = n % n_folds;
  int64_t cursor = 0;
  for (int64_t f = 0; f < n_folds; ++f) {
    const int64_t size = base + (f < rem ? 1 : 0);
    std::vector<int64_t> val(perm.begin() + cursor, perm.begin() + cursor + size);
    std::vector<int64_t> train;
    train.reserve(static_cast<size_t>(n - size));
    train.insert(train.end(), perm.begin(), perm.begin() + cursor);
    train.insert(train.end(), perm.begin() + cursor + size, perm.end());
    folds.emplace_back(std::move(train), std::move(val));
    cursor += size;
  }
  return folds;
}

ScoreBreakdown evaluate_generations(std::span<const PairedSample> samples,
                                    const ModelStateF& state, const ModelConfig& cfg,
                                    const Vocab& vocab, const ScoreContext& ctx,
                                    std::vector<std::string>* generations) {
  std::vector<std::string> outputs(samples.size());
  const int threads = eval_thread_count(samples.size());
  GenerateOptions opts;
  opts.prompt_text = cfg.prompt_text;
  opts.max_len = cfg.max_len;
  if (threads <= 1 || samples.size() < 2) {
    for (size_t i = 0; i < samples.size(); ++i) {
      outputs[i] = generate(samples[i].features, state, cfg, vocab, opts);
    }
  } else {
    std::vector<std::thread> workers;
    std::atomic<size_t> next{0};
    for (int t = 0; t < threads; ++t) {
      workers.emplace_back([&] {
        size_t i;
        while ((i = next.fetch_add(1)) < samples.size()) {
          outputs[i] = generate(samples[i].features, state, cfg, vocab, opts);
        }
      });
    }
    for (auto& w : workers) w.join();
  }

  ScoreBreakdown mean;
  for (size_t i = 0; i < samples.size(); ++i) {
    const auto s = score_pair(outputs[i], samples[i].report_text, ctx);
    mean.bleu4 += s.bleu4;
    mean.rouge_l_f1 += s.rouge_l_f1;
    mean.key += s.key;
    mean.emb += s.emb;
    mean.composite += s.composite;
  }
  if (!samples.empty()) {
    const double inv = 1.0 / double(samples.size());
    mean.bleu4 *= inv;
    mean.rouge_l_f1 *= inv;
    mean.key *= inv;
    mean.emb *= inv;
    mean.composite *= inv;
  }
  if (generations) *generations = std::move(outputs);
  return mean;
}

TrainResult train_fold(std::span<const PairedSample> train_set,
                       std::span<const PairedSample> val_set, const ModelStateF& initial,
                       const ModelConfig& mcfg, const TrainConfig& tcfg,
                       const ScoreContext& score_ctx, const Vocab& vocab) {
  if (train_set.empty()) throw std::invalid_argument("train_fold: empty training set");
  if (val_set.empty()) throw std::invalid_argument("train_fold: empty validation set");
  tcfg.validate();

  ModelStateF state = initial.clone();
  OptState opt;
  Rng rng(Rng::derive(tcfg.seed, kTrainStream));
  EarlyStopper stopper(tcfg.patience);

  std::vector<int64_t> order(train_set.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = int64_t(i);

  TrainResult result;
  for (int64_t epoch = 1; epoch <= tcfg.max_epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    double loss_acc = 0.0;
    double lr_now = 0.0;
    for (size_t start = 0; start < order.size(); start += size_t(tcfg.batch_size)) {
      const size_t stop = std::min(order.size(), start + size_t(tcfg.batch_size));
      std::vector<PairedSample> batch;
      batch.reserve(stop - start);
      for (size_t i = start; i < stop; ++i) {
        batch.push_back(train_set[static_cast<size_t>(order[i])]);
      }
      GraphF g;
      LossParts parts;
      auto loss = forward_loss(g, batch, state, mcfg, vocab, rng, &parts);
      state.zero_grads();
      g.backward(loss);
      state.ensure_trainable_grads();
      lr_now = lr_at_step(opt.t + 1, tcfg);
      adamw_step(state, opt, lr_now, tcfg);
      loss_acc += parts.total * double(batch.size());
    }

    const auto val = evaluate_generations(val_set, state, mcfg, vocab, score_ctx);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_acc / double(train_set.size());
    rec.val_bleu = val.bleu4;
    rec.val_rouge = val.rouge_l_f1;
    rec.val_key = val.key;
    rec.val_emb = val.emb;
    rec.val_composite = val.composite;
    rec.lr = lr_now;
    result.history.push_back(rec);

    if (val.composite > result.best_score || result.best_epoch == 0) {
      result.best_score = val.composite;
      result.best_epoch = epoch;
      result.best_state = state.clone();
    }
    if (stopper.observe(epoch, val.composite)) break;
  }
  return result;
}

}  // namespace mpath
