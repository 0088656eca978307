// Per-relation policy agent: decides remove/retain per sentence. The decision
// state concatenates the scaled feature of the current sentence with the
// running average feature of everything removed so far.
#pragma once

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "rldenoise/common.hpp"
#include "rldenoise/corpus.hpp"
#include "rldenoise/featurize.hpp"
#include "rldenoise/tinynn.hpp"

namespace rldenoise {

constexpr int kActionRemove = 0;
constexpr int kActionRetain = 1;

struct RemovedAverage {
  Vec avg;  // all-zero while count == 0
  long count = 0;

  explicit RemovedAverage(int c_k = 0) : avg(c_k, 0.0) {}
};

// s*' = (s* * count + f) / (count + 1)
inline RemovedAverage update_avg(const RemovedAverage& a, const Vec& f) {
  if (a.avg.size() != f.size()) throw fault("update_avg: dimension mismatch");
  RemovedAverage out = a;
  const double n = static_cast<double>(a.count);
  for (std::size_t i = 0; i < f.size(); ++i)
    out.avg[i] = (a.avg[i] * n + f[i]) / (n + 1.0);
  out.count = a.count + 1;
  return out;
}

inline Vec make_state(const Vec& f_cur, const RemovedAverage& avg, double lambda) {
  if (lambda <= 0.0) throw input_error("make_state: lambda must be positive");
  if (f_cur.size() != avg.avg.size()) throw fault("make_state: dimension mismatch");
  Vec state;
  state.reserve(2 * f_cur.size());
  for (double v : f_cur) state.push_back(lambda * v);
  for (double v : avg.avg) state.push_back(v);
  return state;
}

struct PolicyAgent {
  int relation = -1;
  CnnNet net;  // head over [lambda * feature, s*], classes {remove, retain}
  double lambda = 2.0;
  RemovedAverage frozen_avg;  // end-of-training s*, for stateless reuse

  int c_k() const { return net.enc.c_k(); }

  StateSpec state_spec(const RemovedAverage& avg) const {
    StateSpec st;
    st.feature_scale = lambda;
    st.extra = avg.avg;
    return st;
  }
};

inline PolicyAgent make_agent(int relation, EmbeddingTable emb, int L_max, int c_w,
                              int c_k, double lambda, std::uint64_t seed) {
  PolicyAgent a;
  a.relation = relation;
  a.lambda = lambda;
  a.net = make_net(std::move(emb), L_max, c_w, c_k, 2, 2 * c_k, seed);
  a.frozen_avg = RemovedAverage(c_k);
  return a;
}

struct Decision {
  int action = kActionRetain;
  double p_remove = 0.0;
};

// Stochastic draw from the 2-class policy.
inline Decision act(const Vec& probs, Rng& rng) {
  Decision d;
  d.p_remove = probs.at(kActionRemove);
  d.action = rand_unit(rng) < d.p_remove ? kActionRemove : kActionRetain;
  return d;
}

// Greedy argmax; an exact tie keeps the sentence.
inline Decision act_deterministic(const Vec& probs) {
  Decision d;
  d.p_remove = probs.at(kActionRemove);
  d.action = d.p_remove > 0.5 ? kActionRemove : kActionRetain;
  return d;
}

// Forward pass producing everything a later policy update needs.
struct AgentForward {
  SentenceMatrix sm;
  ForwardTape tape;
};

inline AgentForward agent_forward(const PolicyAgent& agent, const Instance& inst,
                                  const RemovedAverage& avg) {
  AgentForward out;
  out.sm = vectorize(inst, agent.net.emb, agent.net.L_max);
  out.tape = forward_net(agent.net, out.sm, agent.state_spec(avg));
  return out;
}

inline Decision decide(const PolicyAgent& agent, const Instance& inst,
                       const RemovedAverage& avg, Rng& rng) {
  return act(agent_forward(agent, inst, avg).tape.probs, rng);
}

inline Decision decide_deterministic(const PolicyAgent& agent, const Instance& inst,
                                     const RemovedAverage& avg) {
  return act_deterministic(agent_forward(agent, inst, avg).tape.probs);
}

// ---------------------------------------------------------------------------
// Supervised pre-training. Distant-supervision labels stand in for actions:
// the relation's own sentences are "retain", sampled negatives are "remove".
// Training stops at the end of the first epoch whose held-out accuracy lands
// inside the stop band; running to full convergence is deliberately avoided
// so the policy keeps enough entropy to explore.

struct PretrainConfig {
  double stop_lo = 0.85;
  double stop_hi = 0.90;
  int max_epochs = 50;
  double lr = 5e-4;
  double momentum = 0.9;
  int batch_size = 64;
  double holdout_frac = 0.1;
  int negative_multiple = 10;
  std::uint64_t seed = 0;
};

struct PretrainResult {
  int epochs_run = 0;
  bool stopped_in_band = false;
  std::vector<double> accuracy_history;  // held-out, one entry per epoch
  std::vector<double> loss_history;      // mean training loss per epoch
};

inline double holdout_accuracy(const PolicyAgent& agent,
                               const std::vector<const Instance*>& xs,
                               const std::vector<int>& ys,
                               const RemovedAverage& zero_avg) {
  int hit = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const Decision d = decide_deterministic(agent, *xs[i], zero_avg);
    if (d.action == ys[i]) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(xs.size());
}

inline PretrainResult pretrain(PolicyAgent& agent, const Dataset& ds,
                               const std::vector<int>& positives,
                               const std::vector<int>& negative_pool,
                               const PretrainConfig& cfg) {
  if (positives.size() < 10)
    throw input_error("pretrain: need at least 10 positive instances, got " +
                      std::to_string(positives.size()));
  if (negative_pool.empty()) throw input_error("pretrain: empty negative pool");
  if (!(cfg.stop_lo <= cfg.stop_hi))
    throw input_error("pretrain: stop band inverted");

  const std::vector<int> negs =
      sample_negatives(negative_pool, cfg.negative_multiple * positives.size(),
                       split_seed(cfg.seed, "pretrain-negatives", agent.relation));

  std::vector<const Instance*> xs;
  std::vector<int> ys;
  xs.reserve(positives.size() + negs.size());
  for (int id : positives) {
    xs.push_back(&ds.instances.at(id));
    ys.push_back(kActionRetain);
  }
  for (int id : negs) {
    xs.push_back(&ds.instances.at(id));
    ys.push_back(kActionRemove);
  }

  // Hold out a slice for the stopping accuracy.
  std::vector<int> order(xs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  Rng split_rng(split_seed(cfg.seed, "pretrain-holdout", agent.relation));
  seeded_shuffle(order, split_rng);
  auto n_hold = static_cast<std::size_t>(
      std::llround(cfg.holdout_frac * static_cast<double>(xs.size())));
  n_hold = std::clamp<std::size_t>(n_hold, 1, xs.size() - 1);
  std::vector<const Instance*> hold_x, train_x;
  std::vector<int> hold_y, train_y;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const int idx = order[i];
    if (i < n_hold) {
      hold_x.push_back(xs[idx]);
      hold_y.push_back(ys[idx]);
    } else {
      train_x.push_back(xs[idx]);
      train_y.push_back(ys[idx]);
    }
  }

  const RemovedAverage zero_avg(agent.c_k());
  const StateSpec st = agent.state_spec(zero_avg);
  SgdOptimizer opt(agent.net, cfg.lr, cfg.momentum);
  Rng fit_rng(split_seed(cfg.seed, "pretrain-fit", agent.relation));

  PretrainResult res;
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const double loss =
        fit_epoch(agent.net, opt, train_x, train_y, cfg.batch_size, fit_rng, st);
    const double acc = holdout_accuracy(agent, hold_x, hold_y, zero_avg);
    res.loss_history.push_back(loss);
    res.accuracy_history.push_back(acc);
    res.epochs_run = epoch + 1;
    if (acc >= cfg.stop_lo && acc <= cfg.stop_hi) {
      res.stopped_in_band = true;
      break;
    }
  }
  if (!res.stopped_in_band)
    warn("pretrain: relation " + std::to_string(agent.relation) +
         " never landed in the stop band [" + fmt_double(cfg.stop_lo) + ", " +
         fmt_double(cfg.stop_hi) + "] within " + std::to_string(cfg.max_epochs) +
         " epochs");
  return res;
}

// ---------------------------------------------------------------------------
// Removal budgets. The pre-trained agent's confident removals on the training
// split set the per-epoch budget, clamped away from degenerate values; the
// validation budget scales it proportionally.

struct Budget {
  int gamma_t = 1;
  int gamma_v = 1;
};

inline Budget derive_budget(const PolicyAgent& agent, const Dataset& ds,
                            const std::vector<int>& p_train,
                            const std::vector<int>& p_val) {
  if (p_train.empty() || p_val.empty())
    throw input_error("derive_budget: empty split");
  const RemovedAverage zero_avg(agent.c_k());
  int flagged = 0;
  for (int id : p_train) {
    const Decision d = decide_deterministic(agent, ds.instances.at(id), zero_avg);
    if (d.action == kActionRemove) ++flagged;
  }
  Budget b;
  const int hi = std::max(1, static_cast<int>(p_train.size()) / 2);
  b.gamma_t = std::clamp(flagged, 1, hi);
  b.gamma_v = std::max<int>(
      1, static_cast<int>(std::llround(static_cast<double>(b.gamma_t) *
                                       static_cast<double>(p_val.size()) /
                                       static_cast<double>(p_train.size()))));
  return b;
}

// ---------------------------------------------------------------------------
// Agent checkpoint: the network checkpoint plus identity, lambda, and the
// frozen removed-average.

inline void save_agent(std::ostream& out, const PolicyAgent& a) {
  out << "agent v1\n";
  out << "relation " << a.relation << '\n';
  out << "lambda " << hex_double(a.lambda) << '\n';
  out << "avg_count " << a.frozen_avg.count << '\n';
  detail::write_vec(out, "avg", a.frozen_avg.avg);
  save_net(out, a.net);
}

inline PolicyAgent load_agent(std::istream& in) {
  std::string magic, version, key, tok;
  if (!(in >> magic >> version) || magic != "agent" || version != "v1")
    throw input_error("checkpoint error: bad agent header");
  PolicyAgent a;
  if (!(in >> key >> a.relation) || key != "relation")
    throw input_error("checkpoint error: expected relation");
  if (!(in >> key >> tok) || key != "lambda")
    throw input_error("checkpoint error: expected lambda");
  a.lambda = parse_double(tok);
  if (!(in >> key >> a.frozen_avg.count) || key != "avg_count")
    throw input_error("checkpoint error: expected avg_count");
  a.frozen_avg.avg = detail::read_vec(in, "avg");
  a.net = load_net(in);
  if (a.net.head.input_dim() != 2 * a.net.enc.c_k())
    throw input_error("checkpoint error: head width is not twice the kernel count");
  return a;
}

}  // namespace rldenoise
