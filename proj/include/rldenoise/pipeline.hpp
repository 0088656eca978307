// Orchestration shared by the CLI subcommands. A run directory is
// self-describing: it holds the resolved config snapshot, the dataset, and
// every artifact a stage produces, so re-running any stage reproduces its
// outputs byte for byte.
#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <tuple>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "rldenoise/agent.hpp"
#include "rldenoise/common.hpp"
#include "rldenoise/config.hpp"
#include "rldenoise/corpus.hpp"
#include "rldenoise/evaluate.hpp"
#include "rldenoise/featurize.hpp"
#include "rldenoise/redistribute.hpp"
#include "rldenoise/rltrain.hpp"
#include "rldenoise/tinynn.hpp"
#include "rldenoise/vocab.hpp"

namespace rldenoise {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// File helpers

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw input_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw input_error("cannot write " + path.string());
  out << content;
  if (!out) throw fault("write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Run directory layout

struct RunDir {
  fs::path root;

  fs::path config() const { return root / "config.cfg"; }
  fs::path dataset() const { return root / "dataset.tsv"; }
  fs::path noise_truth() const { return root / "noise_truth.txt"; }
  fs::path pretrained_agent(int rel) const {
    return root / "agents_pretrained" / ("agent_r" + std::to_string(rel) + ".ckpt");
  }
  fs::path trained_agent(int rel) const {
    return root / "agents_trained" / ("agent_r" + std::to_string(rel) + ".ckpt");
  }
  fs::path pretrain_history() const { return root / "pretrain_history.csv"; }
  fs::path budgets() const { return root / "budgets.csv"; }
  fs::path rl_log(int rel) const {
    return root / "rl" / ("epoch_log_r" + std::to_string(rel) + ".csv");
  }
  fs::path rl_removed(int rel) const {
    return root / "rl" / ("removed_ids_r" + std::to_string(rel) + ".csv");
  }
  fs::path redistributed() const { return root / "redistributed.tsv"; }
  fs::path redistribution_report() const { return root / "redistribution_report.csv"; }
  fs::path classifier_dir(const std::string& stem) const {
    return root / ("classifiers_" + stem);
  }
  fs::path classifier(const std::string& stem, int rel) const {
    return classifier_dir(stem) / ("clf_r" + std::to_string(rel) + ".ckpt");
  }
};

inline RunConfig load_config(const RunDir& run) {
  RunConfig cfg;
  parse_config_text(cfg, read_file(run.config()));
  cfg.check();
  return cfg;
}

// Rebuilds the vocabulary under a count threshold and remaps every sentence;
// words below the threshold collapse into the padding index.
inline void apply_min_count(Dataset& ds, int min_count) {
  if (min_count <= 1) return;
  std::map<std::string, long> counts;
  for (const auto& [id, inst] : ds.instances)
    for (int w : inst.tokens) ++counts[ds.vocab.words.at(w)];
  const Vocab pruned = Vocab::build(counts, min_count);
  for (auto& [id, inst] : ds.instances)
    for (int& w : inst.tokens) w = pruned.lookup(ds.vocab.words.at(w));
  ds.vocab = pruned;
}

inline Dataset load_run_dataset(const RunDir& run, const RunConfig& cfg,
                                const std::string& name = "dataset.tsv") {
  const fs::path path = run.root / name;
  if (!fs::exists(path))
    throw input_error("missing artifact: " + path.string() + " (run gen first)");
  Dataset ds = parse_dataset(read_file(path));
  apply_min_count(ds, cfg.vocab_min_count);
  return ds;
}

inline std::set<int> load_noise_truth(const RunDir& run) {
  if (!fs::exists(run.noise_truth())) return {};
  std::istringstream in(read_file(run.noise_truth()));
  return parse_noise_truth(in);
}

// ---------------------------------------------------------------------------
// Per-relation set construction: capped positives, 2:1 train/validation
// split, and disjoint negative samples sized as a multiple of each split.

struct RelationSets {
  int relation = 0;
  std::vector<int> p_t, p_v, n_t, n_v;
};

inline std::vector<RelationSets> prepare_relation_sets(const Dataset& ds,
                                                       const RunConfig& cfg) {
  std::vector<RelationSets> out;
  const std::vector<int> na_pool = ds.negatives();
  for (int rel = 1; rel < static_cast<int>(ds.relations.size()); ++rel) {
    std::vector<int> positives = ds.positives_of(rel);
    if (positives.empty()) continue;
    if (positives.size() < 10) {
      warn("relation " + ds.relations[rel] + ": only " +
           std::to_string(positives.size()) + " positives, skipped");
      continue;
    }
    RelationSets sets;
    sets.relation = rel;
    positives = cap_subsample(positives, cfg.positive_cap,
                              split_seed(cfg.seed, "cap", rel));
    std::tie(sets.p_t, sets.p_v) =
        split_positive(positives, split_seed(cfg.seed, "split", rel));
    sets.n_t = sample_negatives(na_pool, cfg.train_negative_multiple * sets.p_t.size(),
                                split_seed(cfg.seed, "neg-t", rel));
    // Validation negatives drawn from the pool minus the training sample.
    std::vector<int> rest;
    const std::set<int> taken(sets.n_t.begin(), sets.n_t.end());
    for (int id : na_pool)
      if (!taken.count(id)) rest.push_back(id);
    if (rest.empty())
      throw input_error("relation " + ds.relations[rel] +
                        ": negative pool exhausted by the training sample");
    sets.n_v = sample_negatives(rest, cfg.train_negative_multiple * sets.p_v.size(),
                                split_seed(cfg.seed, "neg-v", rel));
    out.push_back(std::move(sets));
  }
  if (out.empty()) throw input_error("no relation has enough positives to train on");
  return out;
}

// ---------------------------------------------------------------------------
// Stages

inline void stage_gen(const RunConfig& cfg, const fs::path& out_dir) {
  cfg.check();
  auto [ds, truth] = generate_synthetic(cfg.synthetic());
  RunDir run{out_dir};
  write_file(run.config(), config_to_string(cfg));
  write_file(run.dataset(), dataset_to_tsv(ds));
  std::ostringstream truth_out;
  write_noise_truth(truth_out, truth);
  write_file(run.noise_truth(), truth_out.str());
}

inline PolicyAgent make_run_agent(const Dataset& ds, const RunConfig& cfg, int rel) {
  EmbeddingTable emb =
      make_embeddings(ds.vocab, cfg.d_w, cfg.d_p, split_seed(cfg.seed, "agent-emb", rel));
  return make_agent(rel, std::move(emb), cfg.l_max, cfg.c_w, cfg.c_k, cfg.lambda,
                    split_seed(cfg.seed, "agent-init", rel));
}

inline void stage_pretrain(const RunDir& run) {
  const RunConfig cfg = load_config(run);
  const Dataset ds = load_run_dataset(run, cfg);
  const auto sets = prepare_relation_sets(ds, cfg);
  std::ostringstream history;
  history << "relation,epoch,train_loss,holdout_accuracy\n";
  for (const auto& s : sets) {
    PolicyAgent agent = make_run_agent(ds, cfg, s.relation);
    const PretrainResult res = pretrain(agent, ds, s.p_t, ds.negatives(), cfg.pretrain_cfg());
    for (int e = 0; e < res.epochs_run; ++e)
      history << s.relation << ',' << (e + 1) << ',' << fmt_double(res.loss_history[e])
              << ',' << fmt_double(res.accuracy_history[e]) << '\n';
    std::ostringstream ckpt;
    save_agent(ckpt, agent);
    write_file(run.pretrained_agent(s.relation), ckpt.str());
  }
  write_file(run.pretrain_history(), history.str());
}

inline PolicyAgent load_agent_file(const fs::path& path, const std::string& hint) {
  if (!fs::exists(path))
    throw input_error("missing artifact: " + path.string() + " (" + hint + ")");
  std::istringstream in(read_file(path));
  return load_agent(in);
}

inline void stage_train_agent(const RunDir& run, int parallel_relations = 1) {
  const RunConfig cfg = load_config(run);
  const Dataset ds = load_run_dataset(run, cfg);
  const auto sets = prepare_relation_sets(ds, cfg);

  struct Job {
    const RelationSets* sets = nullptr;
    PolicyAgent agent;
    Budget budget;
    TrainResult result;
    std::string error;
  };
  std::vector<Job> jobs(sets.size());
  for (std::size_t i = 0; i < sets.size(); ++i) {
    jobs[i].sets = &sets[i];
    jobs[i].agent = load_agent_file(run.pretrained_agent(sets[i].relation),
                                    "run pretrain first");
    jobs[i].budget = derive_budget(jobs[i].agent, ds, sets[i].p_t, sets[i].p_v);
  }

  TrainerConfig trainer = cfg.trainer_cfg();
  auto work = [&](Job& job) {
    try {
      job.result = train_agent(ds, job.sets->p_t, job.sets->p_v, job.sets->n_t,
                               job.sets->n_v, job.agent, job.budget, trainer);
    } catch (const std::exception& e) {
      job.error = e.what();
    }
  };
  const int threads = std::max(1, parallel_relations);
  for (std::size_t at = 0; at < jobs.size(); at += threads) {
    std::vector<std::thread> pool;
    for (std::size_t i = at; i < std::min(jobs.size(), at + threads); ++i)
      pool.emplace_back(work, std::ref(jobs[i]));
    for (auto& t : pool) t.join();
  }
  for (const auto& job : jobs)
    if (!job.error.empty())
      throw fault("training relation " + std::to_string(job.sets->relation) +
                  " failed: " + job.error);

  std::ostringstream budgets;
  budgets << "relation,gamma_t,gamma_v\n";
  for (const auto& job : jobs) {
    budgets << job.sets->relation << ',' << job.budget.gamma_t << ','
            << job.budget.gamma_v << '\n';
    std::ostringstream ckpt;
    save_agent(ckpt, job.result.best_agent);
    write_file(run.trained_agent(job.sets->relation), ckpt.str());
    write_file(run.rl_log(job.sets->relation), epoch_log_csv(job.result));
    write_file(run.rl_removed(job.sets->relation), removed_ids_csv(job.result));
  }
  write_file(run.budgets(), budgets.str());
}

inline std::map<int, PolicyAgent> load_agents(const RunDir& run, const Dataset& ds,
                                              bool trained, bool required) {
  std::map<int, PolicyAgent> agents;
  for (int rel = 1; rel < static_cast<int>(ds.relations.size()); ++rel) {
    const fs::path path = trained ? run.trained_agent(rel) : run.pretrained_agent(rel);
    if (!fs::exists(path)) {
      if (required)
        throw input_error("missing artifact: " + path.string() +
                          (trained ? " (run train-agent first)" : " (run pretrain first)"));
      continue;
    }
    std::istringstream in(read_file(path));
    agents.emplace(rel, load_agent(in));
  }
  return agents;
}

inline void stage_redistribute(const RunDir& run, bool use_pretrained = false) {
  const RunConfig cfg = load_config(run);
  const Dataset ds = load_run_dataset(run, cfg);
  const auto agents = load_agents(run, ds, !use_pretrained, false);
  if (agents.empty())
    throw input_error("missing artifact: no agent checkpoints under " +
                      run.root.string() + " (run " +
                      (use_pretrained ? "pretrain" : "train-agent") + " first)");
  auto [out, report] = redistribute(ds, agents);
  write_file(run.redistributed(), dataset_to_tsv(out));
  write_file(run.redistribution_report(), redistribution_report_csv(ds, report));
}

// Trains one binary relation-vs-NA classifier per relation on the named
// dataset's sets and saves the checkpoints.
inline void stage_train_classifier(const RunDir& run, const std::string& input_name) {
  const RunConfig cfg = load_config(run);
  const Dataset ds = load_run_dataset(run, cfg, input_name);
  const auto sets = prepare_relation_sets(ds, cfg);
  const std::string stem = fs::path(input_name).stem().string();
  for (const auto& s : sets) {
    const CnnNet clf =
        train_reward_classifier(ds, s.p_t, s.n_t, cfg.classifier_cfg(),
                                split_seed(cfg.seed, "reward-clf", s.relation));
    std::ostringstream ckpt;
    save_net(ckpt, clf);
    write_file(run.classifier(stem, s.relation), ckpt.str());
  }
}

struct EvalRow {
  int relation = 0;
  double f1 = 0.0;
  double auc = 0.0;
  bool has_truth = false;
  double f1_true = 0.0;
  double auc_true = 0.0;
};

struct EvalResult {
  std::vector<EvalRow> rows;
  PRCurve pooled;  // distant-label pooled curve over all relations
};

// Scores every relation's validation split with its binary classifier.
// Distant labels always; truth-corrected variants when ground truth exists.
inline EvalResult evaluate_classifiers(
    const Dataset& ds, const std::vector<RelationSets>& sets,
    const std::map<int, CnnNet>& classifiers, const std::set<int>& truth) {
  EvalResult out;
  std::vector<ScoredItem> pooled;
  for (const auto& s : sets) {
    const CnnNet& clf = classifiers.at(s.relation);
    EvalRow row;
    row.relation = s.relation;
    long tp = 0, fp = 0, fn = 0, tp_t = 0, fp_t = 0, fn_t = 0;
    std::vector<ScoredItem> scored, scored_true;
    auto add = [&](int id, bool distant_pos) {
      const double p = predict_probs(clf, ds.instances.at(id))[1];
      const bool pred = p > 0.5;
      if (distant_pos) {
        pred ? ++tp : ++fn;
      } else if (pred) {
        ++fp;
      }
      // Pooled ids stay unique across relations.
      scored.push_back({id * 16 + s.relation, p, distant_pos});
      if (!truth.empty()) {
        const bool true_pos = distant_pos && !truth.count(id);
        if (true_pos) {
          pred ? ++tp_t : ++fn_t;
        } else if (pred) {
          ++fp_t;
        }
        scored_true.push_back({id * 16 + s.relation, p, true_pos});
      }
    };
    for (int id : s.p_v) add(id, true);
    for (int id : s.n_v) add(id, false);
    row.f1 = prf1(tp, fp, fn).f1;
    row.auc = pr_curve(scored).auc;
    if (!truth.empty()) {
      row.has_truth = true;
      row.f1_true = prf1(tp_t, fp_t, fn_t).f1;
      row.auc_true = pr_curve(scored_true).auc;
    }
    pooled.insert(pooled.end(), scored.begin(), scored.end());
    out.rows.push_back(row);
  }
  out.pooled = pr_curve(pooled);
  return out;
}

inline std::string eval_csv(const Dataset& ds, const EvalResult& res) {
  std::ostringstream out;
  out << "relation,f1,auc,f1_true,auc_true\n";
  double sf = 0, sa = 0, sft = 0, sat = 0;
  bool any_truth = false;
  for (const auto& row : res.rows) {
    out << ds.relations.at(row.relation) << ',' << fmt_double(row.f1) << ','
        << fmt_double(row.auc) << ',';
    if (row.has_truth)
      out << fmt_double(row.f1_true) << ',' << fmt_double(row.auc_true) << '\n';
    else
      out << "na,na\n";
    sf += row.f1;
    sa += row.auc;
    sft += row.f1_true;
    sat += row.auc_true;
    any_truth = any_truth || row.has_truth;
  }
  const auto n = static_cast<double>(res.rows.size());
  out << "mean," << fmt_double(sf / n) << ',' << fmt_double(sa / n) << ',';
  if (any_truth)
    out << fmt_double(sft / n) << ',' << fmt_double(sat / n) << '\n';
  else
    out << "na,na\n";
  return out.str();
}

inline void stage_eval(const RunDir& run, const std::string& input_name) {
  const RunConfig cfg = load_config(run);
  const Dataset ds = load_run_dataset(run, cfg, input_name);
  const auto sets = prepare_relation_sets(ds, cfg);
  const std::set<int> truth = load_noise_truth(run);
  const std::string stem = fs::path(input_name).stem().string();

  std::map<int, CnnNet> classifiers;
  for (const auto& s : sets) {
    const fs::path path = run.classifier(stem, s.relation);
    if (fs::exists(path)) {
      std::istringstream in(read_file(path));
      classifiers.emplace(s.relation, load_net(in));
    } else {
      classifiers.emplace(
          s.relation,
          train_reward_classifier(ds, s.p_t, s.n_t, cfg.classifier_cfg(),
                                  split_seed(cfg.seed, "reward-clf", s.relation)));
    }
  }
  const EvalResult res = evaluate_classifiers(ds, sets, classifiers, truth);
  write_file(run.root / ("eval_" + stem + ".csv"), eval_csv(ds, res));
  write_file(run.root / ("pr_" + stem + ".csv"), pr_curve_csv(res.pooled));
  write_file(run.root / ("pr_" + stem + ".svg"),
             pr_curve_svg(res.pooled, "validation precision-recall"));
}

// Three-way comparison: classifiers trained on the original data, on data
// redistributed by the pre-trained agents, and on data redistributed by the
// RL-trained agents. Scored against ground truth when available, otherwise
// against distant labels.
inline void stage_report(const RunDir& run) {
  const RunConfig cfg = load_config(run);
  const Dataset original = load_run_dataset(run, cfg);
  const std::set<int> truth = load_noise_truth(run);

  const auto pre_agents = load_agents(run, original, false, true);
  const auto rl_agents = load_agents(run, original, true, true);
  auto [pre_ds, pre_report] = redistribute(original, pre_agents);
  auto [rl_ds, rl_report] = redistribute(original, rl_agents);

  struct Condition {
    const char* name;
    const Dataset* ds;
  };
  const Condition conditions[] = {
      {"original", &original}, {"pretrain", &pre_ds}, {"rl", &rl_ds}};

  // relation -> F1 per condition, keyed by condition order above.
  std::map<int, std::array<double, 3>> f1s;
  for (int c = 0; c < 3; ++c) {
    const Dataset& ds = *conditions[c].ds;
    const auto sets = prepare_relation_sets(ds, cfg);
    std::map<int, CnnNet> classifiers;
    for (const auto& s : sets)
      classifiers.emplace(
          s.relation,
          train_reward_classifier(ds, s.p_t, s.n_t, cfg.classifier_cfg(),
                                  split_seed(cfg.seed, "reward-clf", s.relation)));
    const EvalResult res = evaluate_classifiers(ds, sets, classifiers, truth);
    for (const auto& row : res.rows)
      f1s[row.relation][c] = row.has_truth ? row.f1_true : row.f1;
  }

  std::ostringstream report;
  report << "relation,f1_original,f1_pretrain,f1_rl\n";
  std::array<double, 3> sums{0, 0, 0};
  for (const auto& [rel, by_cond] : f1s) {
    report << original.relations.at(rel);
    for (int c = 0; c < 3; ++c) {
      report << ',' << fmt_double(by_cond[c]);
      sums[c] += by_cond[c];
    }
    report << '\n';
  }
  report << "mean";
  for (int c = 0; c < 3; ++c)
    report << ',' << fmt_double(sums[c] / static_cast<double>(f1s.size()));
  report << '\n';
  write_file(run.root / "report.csv", report.str());

  std::ostringstream removed;
  removed << "relation,removed_pretrain,removed_rl\n";
  for (std::size_t i = 0; i < pre_report.rows.size(); ++i)
    removed << original.relations.at(pre_report.rows[i].relation) << ','
            << pre_report.rows[i].flagged_instances << ','
            << rl_report.rows[i].flagged_instances << '\n';
  write_file(run.root / "removed_counts.csv", removed.str());
}

}  // namespace rldenoise
