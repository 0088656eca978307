// Policy-gradient retraining for one relation's agent: per epoch, sample a
// removal set under a fixed budget, rebuild the training set, filter the
// validation set, retrain a fresh reward classifier, convert the F1 movement
// into a reward, and push the policy toward (or away from) the decisions that
// changed between consecutive epochs.
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rldenoise/agent.hpp"
#include "rldenoise/common.hpp"
#include "rldenoise/corpus.hpp"
#include "rldenoise/evaluate.hpp"
#include "rldenoise/featurize.hpp"
#include "rldenoise/tinynn.hpp"

namespace rldenoise {

struct ClassifierConfig {
  int c_w = 3;
  int c_k = 100;
  int d_w = 50;
  int d_p = 5;
  int L_max = 100;
  FitConfig fit;  // defaults: 15 epochs, lr 0.01, momentum 0.9, batch 64
};

struct TrainerConfig {
  int n_epochs = 30;
  double alpha = 100.0;
  double rl_lr = 2e-5;
  int f1_window = 5;
  ClassifierConfig classifier;
  std::uint64_t seed = 0;

  void check() const {
    if (alpha <= 0.0) throw input_error("trainer config: alpha must be positive");
    if (n_epochs < 2) throw input_error("trainer config: need at least 2 epochs");
    if (f1_window < 1) throw input_error("trainer config: F1 window must be >= 1");
    if (rl_lr <= 0.0) throw input_error("trainer config: rl learning rate must be positive");
  }
};

struct EpochLog {
  int epoch = 0;
  std::vector<int> psi;                // removed ids in rank order
  std::map<int, Vec> cached_states;    // decision-time state per removed id
  double f1 = 0.0;
  double reward = 0.0;
  RemovedAverage avg_end;              // running average after this epoch's pass
  SoftmaxHead head;                    // policy head in effect during this epoch
};

// ---------------------------------------------------------------------------
// Features are fixed during retraining (only the policy head moves), so each
// candidate sentence is encoded once up front.

inline std::map<int, Vec> compute_features(const PolicyAgent& agent, const Dataset& ds,
                                           const std::vector<int>& ids) {
  std::map<int, Vec> out;
  for (int id : ids) {
    const SentenceMatrix sm = vectorize(ds.instances.at(id), agent.net.emb, agent.net.L_max);
    out.emplace(id, encode(agent.net.enc, sm));
  }
  return out;
}

struct RankedCandidate {
  int id = -1;
  double p_remove = 0.0;
};

struct RemovalPass {
  std::vector<int> psi;              // top-ranked removals within budget
  std::map<int, Vec> cached_states;  // states for psi members only
  std::vector<RankedCandidate> ranked;  // every sampled removal, rank order
};

inline void rank_candidates(std::vector<RankedCandidate>& t) {
  std::sort(t.begin(), t.end(), [](const RankedCandidate& a, const RankedCandidate& b) {
    if (a.p_remove != b.p_remove) return a.p_remove > b.p_remove;
    return a.id < b.id;
  });
}

// One stochastic pass over the positive training ids in ascending-id order.
// Every sampled removal updates the running average immediately; the budget
// is applied afterward by rank.
inline RemovalPass run_removal_pass(const PolicyAgent& agent,
                                    const std::map<int, Vec>& features,
                                    const std::vector<int>& p_t_ori, int gamma_t,
                                    Rng& rng, RemovedAverage& avg) {
  if (gamma_t < 0) throw input_error("run_removal_pass: negative budget");
  RemovalPass pass;
  std::map<int, Vec> sampled_states;
  std::vector<int> order = p_t_ori;
  std::sort(order.begin(), order.end());
  for (int id : order) {
    const Vec& f = features.at(id);
    const Vec state = make_state(f, avg, agent.lambda);
    const Vec probs = forward_softmax(agent.net.head, state);
    const Decision d = act(probs, rng);
    if (d.action == kActionRemove) {
      pass.ranked.push_back({id, d.p_remove});
      sampled_states.emplace(id, state);
      avg = update_avg(avg, f);
    }
  }
  rank_candidates(pass.ranked);
  const auto keep = std::min<std::size_t>(pass.ranked.size(), gamma_t);
  for (std::size_t k = 0; k < keep; ++k) {
    const int id = pass.ranked[k].id;
    pass.psi.push_back(id);
    pass.cached_states.emplace(id, sampled_states.at(id));
  }
  return pass;
}

// P - psi, N + psi. Sorted id vectors throughout.
inline std::pair<std::vector<int>, std::vector<int>> rebuild_sets(
    const std::vector<int>& p_ori, const std::vector<int>& n_ori,
    const std::vector<int>& psi) {
  std::set<int> p(p_ori.begin(), p_ori.end());
  for (int id : psi)
    if (p.erase(id) == 0)
      throw fault("rebuild_sets: removed id " + std::to_string(id) +
                  " not in the positive set");
  std::vector<int> p_new(p.begin(), p.end());
  std::vector<int> n_new = n_ori;
  n_new.insert(n_new.end(), psi.begin(), psi.end());
  std::sort(n_new.begin(), n_new.end());
  return {std::move(p_new), std::move(n_new)};
}

// Deterministic counterpart of the removal pass for the validation split:
// greedy decisions, rank confident removals, keep the top gamma_v. Works on a
// local copy of the running average and discards it.
inline std::pair<std::vector<int>, std::vector<int>> filter_validation(
    const PolicyAgent& agent, const std::map<int, Vec>& features,
    const std::vector<int>& p_v_ori, const std::vector<int>& n_v_ori, int gamma_v,
    const RemovedAverage& avg_in) {
  if (gamma_v < 0) throw input_error("filter_validation: negative budget");
  if (gamma_v == 0) {
    warn("filter_validation: budget 0, validation set unchanged");
    std::vector<int> p = p_v_ori, n = n_v_ori;
    std::sort(p.begin(), p.end());
    std::sort(n.begin(), n.end());
    return {std::move(p), std::move(n)};
  }
  RemovedAverage avg = avg_in;
  std::vector<RankedCandidate> t;
  std::vector<int> order = p_v_ori;
  std::sort(order.begin(), order.end());
  for (int id : order) {
    const Vec& f = features.at(id);
    const Vec state = make_state(f, avg, agent.lambda);
    const Decision d = act_deterministic(forward_softmax(agent.net.head, state));
    if (d.action == kActionRemove) {
      t.push_back({id, d.p_remove});
      avg = update_avg(avg, f);
    }
  }
  rank_candidates(t);
  std::vector<int> removed;
  for (std::size_t k = 0; k < std::min<std::size_t>(t.size(), gamma_v); ++k)
    removed.push_back(t[k].id);
  return rebuild_sets(order, n_v_ori, removed);
}

// ---------------------------------------------------------------------------
// Reward classifier: a fresh binary relation-vs-not CNN each epoch, identical
// seed-fixed initialization, so F1 movements trace back to the data alone.

inline CnnNet train_reward_classifier(const Dataset& ds, const std::vector<int>& p_ids,
                                      const std::vector<int>& n_ids,
                                      const ClassifierConfig& cfg, std::uint64_t seed) {
  if (p_ids.empty() || n_ids.empty())
    throw input_error("training error: reward classifier needs non-empty sets");
  CnnNet net = make_classifier_net(
      make_embeddings(ds.vocab, cfg.d_w, cfg.d_p, split_seed(seed, "clf-emb", 0)),
      cfg.L_max, cfg.c_w, cfg.c_k, 2, split_seed(seed, "clf-init", 0));
  std::vector<const Instance*> xs;
  std::vector<int> ys;
  xs.reserve(p_ids.size() + n_ids.size());
  for (int id : p_ids) {
    xs.push_back(&ds.instances.at(id));
    ys.push_back(1);
  }
  for (int id : n_ids) {
    xs.push_back(&ds.instances.at(id));
    ys.push_back(0);
  }
  FitConfig fit = cfg.fit;
  fit.seed = split_seed(seed, "clf-fit", 0);
  fit_classifier(net, xs, ys, fit);
  return net;
}

// F1 of the positive class on labeled validation ids.
inline double classifier_f1(const CnnNet& net, const Dataset& ds,
                            const std::vector<int>& p_ids,
                            const std::vector<int>& n_ids) {
  long tp = 0, fp = 0, fn = 0;
  for (int id : p_ids) {
    const Vec p = predict_probs(net, ds.instances.at(id));
    if (p[1] > 0.5) ++tp; else ++fn;
  }
  for (int id : n_ids) {
    const Vec p = predict_probs(net, ds.instances.at(id));
    if (p[1] > 0.5) ++fp;
  }
  return prf1(tp, fp, fn).f1;
}

// ---------------------------------------------------------------------------
// Rewards and the policy update

// R_i = alpha * (mean of the trailing window ending at i
//                - mean of the trailing window ending at i-1).
inline double compute_reward(const std::vector<double>& f1s, int i, double alpha,
                             int w = 5) {
  if (i < 1 || i >= static_cast<int>(f1s.size()))
    throw fault("compute_reward: epoch index " + std::to_string(i) +
                " outside history of " + std::to_string(f1s.size()));
  if (w < 1) throw input_error("compute_reward: window must be >= 1");
  auto window_mean = [&](int lo, int hi) {
    double s = 0.0;
    for (int k = lo; k <= hi; ++k) s += f1s[k];
    return s / static_cast<double>(hi - lo + 1);
  };
  const double cur = window_mean(std::max(0, i - w + 1), i);
  const double prev = window_mean(std::max(0, i - w), i - 1);
  return alpha * (cur - prev);
}

// The parts of consecutive removed sets that differ; only these carry
// gradient.
inline std::pair<std::vector<int>, std::vector<int>> omega_sets(
    const std::vector<int>& psi_prev, const std::vector<int>& psi_cur) {
  const std::set<int> prev(psi_prev.begin(), psi_prev.end());
  const std::set<int> cur(psi_cur.begin(), psi_cur.end());
  std::vector<int> omega_prev, omega_cur;
  for (int id : prev)
    if (!cur.count(id)) omega_prev.push_back(id);
  for (int id : cur)
    if (!prev.count(id)) omega_cur.push_back(id);
  return {std::move(omega_prev), std::move(omega_cur)};
}

// One ascent step on R * (sum over omega_cur of log pi(remove|s)
//                         - sum over omega_prev of log pi(remove|s)),
// each state exactly as cached in its own epoch. The cached state is a
// constant input, so only the head moves.
inline void policy_update(PolicyAgent& agent, const std::vector<int>& omega_cur,
                          const std::vector<int>& omega_prev,
                          const std::map<int, Vec>& cached_cur,
                          const std::map<int, Vec>& cached_prev, double reward,
                          double lr) {
  if (reward == 0.0) return;
  SoftmaxHead& head = agent.net.head;
  Mat d_w(head.W.rows, head.W.cols);
  Vec d_b(head.b.size(), 0.0);
  auto accumulate = [&](int id, const std::map<int, Vec>& cached, double coef) {
    auto it = cached.find(id);
    if (it == cached.end())
      throw fault("policy_update: no cached state for instance " + std::to_string(id));
    const Vec& x = it->second;
    const Vec p = forward_softmax(head, x);
    // Descent gradient of coef * log p(remove): coef * (onehot - p).
    for (int c = 0; c < head.n_classes(); ++c) {
      const double dz = coef * ((c == kActionRemove ? 1.0 : 0.0) - p[c]);
      double* row = d_w.row(c);
      for (int i = 0; i < head.input_dim(); ++i) row[i] += dz * x[i];
      d_b[c] += dz;
    }
  };
  // Descending on -J: current epoch's extra removals weighted -R, the
  // previous epoch's abandoned removals weighted +R.
  for (int id : omega_cur) accumulate(id, cached_cur, -reward);
  for (int id : omega_prev) accumulate(id, cached_prev, reward);
  for (double v : d_w.a)
    if (!std::isfinite(v)) throw fault("training fault: non-finite policy gradient");
  for (double v : d_b)
    if (!std::isfinite(v)) throw fault("training fault: non-finite policy gradient");
  for (std::size_t i = 0; i < head.W.a.size(); ++i) head.W.a[i] -= lr * d_w.a[i];
  for (std::size_t i = 0; i < head.b.size(); ++i) head.b[i] -= lr * d_b[i];
}

// ---------------------------------------------------------------------------
// The full retraining loop

struct TrainResult {
  PolicyAgent best_agent;
  std::vector<EpochLog> logs;
  int best_epoch = 0;      // 1-based epoch whose F1 was maximal
  double f1_baseline = 0.0;
  std::vector<double> f1_history;  // [f1_baseline, f1_1, ..., f1_N]
};

inline TrainResult train_agent(const Dataset& ds, const std::vector<int>& p_t_ori,
                               const std::vector<int>& p_v_ori,
                               const std::vector<int>& n_t_ori,
                               const std::vector<int>& n_v_ori,
                               const PolicyAgent& pretrained, const Budget& budget,
                               const TrainerConfig& cfg) {
  cfg.check();
  PolicyAgent agent = pretrained;

  std::vector<int> feat_ids = p_t_ori;
  feat_ids.insert(feat_ids.end(), p_v_ori.begin(), p_v_ori.end());
  const std::map<int, Vec> features = compute_features(agent, ds, feat_ids);

  const std::uint64_t clf_seed = split_seed(cfg.seed, "reward-clf", agent.relation);
  TrainResult res;
  {
    const CnnNet clf = train_reward_classifier(ds, p_t_ori, n_t_ori, cfg.classifier, clf_seed);
    res.f1_baseline = classifier_f1(clf, ds, p_v_ori, n_v_ori);
  }
  res.f1_history.push_back(res.f1_baseline);

  Rng rng(split_seed(cfg.seed, "removal-pass", agent.relation));
  RemovedAverage avg(agent.c_k());
  std::vector<int> psi_prev;
  std::map<int, Vec> cached_prev;

  for (int epoch = 1; epoch <= cfg.n_epochs; ++epoch) {
    EpochLog log;
    log.epoch = epoch;
    log.head = agent.net.head;  // parameters the epoch's decisions use

    RemovalPass pass =
        run_removal_pass(agent, features, p_t_ori, budget.gamma_t, rng, avg);
    auto [p_t_i, n_t_i] = rebuild_sets(p_t_ori, n_t_ori, pass.psi);
    auto [p_v_i, n_v_i] =
        filter_validation(agent, features, p_v_ori, n_v_ori, budget.gamma_v, avg);

    const CnnNet clf = train_reward_classifier(ds, p_t_i, n_t_i, cfg.classifier, clf_seed);
    const double f1 = classifier_f1(clf, ds, p_v_i, n_v_i);
    res.f1_history.push_back(f1);
    const double reward =
        compute_reward(res.f1_history, epoch, cfg.alpha, cfg.f1_window);

    auto [omega_prev, omega_cur] = omega_sets(psi_prev, pass.psi);
    policy_update(agent, omega_cur, omega_prev, pass.cached_states, cached_prev,
                  reward, cfg.rl_lr);

    log.psi = pass.psi;
    log.cached_states = pass.cached_states;
    log.f1 = f1;
    log.reward = reward;
    log.avg_end = avg;
    res.logs.push_back(std::move(log));

    psi_prev = pass.psi;
    cached_prev = res.logs.back().cached_states;
  }

  int best = 0;
  for (int i = 1; i < static_cast<int>(res.logs.size()); ++i)
    if (res.logs[i].f1 > res.logs[best].f1) best = i;
  res.best_epoch = res.logs[best].epoch;
  res.best_agent = agent;
  res.best_agent.net.head = res.logs[best].head;
  res.best_agent.frozen_avg = res.logs[best].avg_end;
  return res;
}

// ---------------------------------------------------------------------------
// Log serialization

inline std::string epoch_log_csv(const TrainResult& res) {
  std::ostringstream out;
  out << "epoch,psi_size,f1,reward\n";
  out << "0,0," << fmt_double(res.f1_baseline) << ",0\n";
  for (const auto& log : res.logs)
    out << log.epoch << ',' << log.psi.size() << ',' << fmt_double(log.f1) << ','
        << fmt_double(log.reward) << '\n';
  return out.str();
}

inline std::string removed_ids_csv(const TrainResult& res) {
  std::ostringstream out;
  out << "epoch,instance_id\n";
  for (const auto& log : res.logs)
    for (int id : log.psi) out << log.epoch << ',' << id << '\n';
  return out.str();
}

}  // namespace rldenoise
