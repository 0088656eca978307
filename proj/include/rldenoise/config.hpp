// Run configuration: one flat key=value namespace covering every module
// knob, parsed from text, overridable from the command line, and written
// back verbatim so each run directory carries its exact provenance.
#pragma once

#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "rldenoise/agent.hpp"
#include "rldenoise/common.hpp"
#include "rldenoise/corpus.hpp"
#include "rldenoise/rltrain.hpp"

namespace rldenoise {

struct RunConfig {
  std::uint64_t seed = 1;

  // synthetic generator
  int gen_relations = 5;
  int gen_instances_per_relation = 600;
  double gen_noise_rate = 0.3;
  int gen_vocab_size = 120;
  int gen_min_len = 7;
  int gen_max_len = 12;
  int gen_na_instances = -1;  // -1: 10x instances_per_relation

  // featurization
  int d_w = 50;
  int d_p = 5;
  int l_max = 100;
  int vocab_min_count = 1;

  // encoder and policy state
  int c_w = 3;
  int c_k = 100;
  double lambda = 2.0;

  // agent pre-training
  double pretrain_stop_lo = 0.85;
  double pretrain_stop_hi = 0.90;
  int pretrain_max_epochs = 50;
  double pretrain_lr = 1e-3;
  double pretrain_momentum = 0.9;
  int pretrain_negative_multiple = 10;
  double pretrain_holdout_frac = 0.1;

  // policy-gradient retraining
  int rl_epochs = 30;
  double rl_alpha = 100.0;
  double rl_lr = 2e-5;
  int rl_f1_window = 5;

  // reward/downstream classifier
  int clf_epochs = 15;
  double clf_lr = 0.01;
  double clf_momentum = 0.9;

  // shared training and set construction
  int batch_size = 64;
  int train_negative_multiple = 2;
  int positive_cap = 7500;

  SyntheticConfig synthetic() const {
    SyntheticConfig s;
    s.n_relations = gen_relations;
    s.instances_per_relation = gen_instances_per_relation;
    s.noise_rate = gen_noise_rate;
    s.vocab_size = gen_vocab_size;
    s.min_sentence_len = gen_min_len;
    s.max_sentence_len = gen_max_len;
    s.na_instances = gen_na_instances;
    s.seed = split_seed(seed, "gen", 0);
    return s;
  }

  PretrainConfig pretrain_cfg() const {
    PretrainConfig p;
    p.stop_lo = pretrain_stop_lo;
    p.stop_hi = pretrain_stop_hi;
    p.max_epochs = pretrain_max_epochs;
    p.lr = pretrain_lr;
    p.momentum = pretrain_momentum;
    p.batch_size = batch_size;
    p.holdout_frac = pretrain_holdout_frac;
    p.negative_multiple = pretrain_negative_multiple;
    p.seed = split_seed(seed, "pretrain", 0);
    return p;
  }

  ClassifierConfig classifier_cfg() const {
    ClassifierConfig c;
    c.c_w = c_w;
    c.c_k = c_k;
    c.d_w = d_w;
    c.d_p = d_p;
    c.L_max = l_max;
    c.fit.epochs = clf_epochs;
    c.fit.lr = clf_lr;
    c.fit.momentum = clf_momentum;
    c.fit.batch_size = batch_size;
    return c;
  }

  TrainerConfig trainer_cfg() const {
    TrainerConfig t;
    t.n_epochs = rl_epochs;
    t.alpha = rl_alpha;
    t.rl_lr = rl_lr;
    t.f1_window = rl_f1_window;
    t.classifier = classifier_cfg();
    t.seed = split_seed(seed, "rl", 0);
    return t;
  }

  void check() const {
    synthetic().check();
    trainer_cfg().check();
    if (d_w < 1 || d_p < 1) throw input_error("config: embedding dims must be >= 1");
    if (l_max < c_w) throw input_error("config: l_max must be >= c_w");
    if (c_w < 1 || c_k < 1) throw input_error("config: encoder dims must be >= 1");
    if (lambda <= 0.0) throw input_error("config: lambda must be positive");
    if (!(pretrain_stop_lo <= pretrain_stop_hi))
      throw input_error("config: pre-training stop band inverted");
    if (pretrain_stop_lo < 0.0 || pretrain_stop_hi > 1.0)
      throw input_error("config: stop band outside [0,1]");
    if (pretrain_max_epochs < 1) throw input_error("config: pretrain_max_epochs must be >= 1");
    if (pretrain_lr <= 0.0 || clf_lr <= 0.0)
      throw input_error("config: learning rates must be positive");
    if (pretrain_negative_multiple < 1)
      throw input_error("config: pretrain_negative_multiple must be >= 1");
    if (!(pretrain_holdout_frac > 0.0 && pretrain_holdout_frac < 1.0))
      throw input_error("config: holdout fraction must be in (0,1)");
    if (clf_epochs < 1) throw input_error("config: clf_epochs must be >= 1");
    if (batch_size < 1) throw input_error("config: batch_size must be >= 1");
    if (train_negative_multiple < 1)
      throw input_error("config: train_negative_multiple must be >= 1");
    if (positive_cap < 3) throw input_error("config: positive_cap must be >= 3");
    if (vocab_min_count < 1) throw input_error("config: vocab_min_count must be >= 1");
  }
};

// ---------------------------------------------------------------------------
// Key registry: one place naming every field, used by parsing, overrides,
// and the snapshot writer.

namespace detail {
enum class FieldKind { int_field, double_field, seed_field };

struct FieldRef {
  const char* key;
  FieldKind kind;
  void* ptr;
};

inline std::vector<FieldRef> config_fields(RunConfig& c) {
  return {
      {"seed", FieldKind::seed_field, &c.seed},
      {"gen_relations", FieldKind::int_field, &c.gen_relations},
      {"gen_instances_per_relation", FieldKind::int_field, &c.gen_instances_per_relation},
      {"gen_noise_rate", FieldKind::double_field, &c.gen_noise_rate},
      {"gen_vocab_size", FieldKind::int_field, &c.gen_vocab_size},
      {"gen_min_len", FieldKind::int_field, &c.gen_min_len},
      {"gen_max_len", FieldKind::int_field, &c.gen_max_len},
      {"gen_na_instances", FieldKind::int_field, &c.gen_na_instances},
      {"d_w", FieldKind::int_field, &c.d_w},
      {"d_p", FieldKind::int_field, &c.d_p},
      {"l_max", FieldKind::int_field, &c.l_max},
      {"vocab_min_count", FieldKind::int_field, &c.vocab_min_count},
      {"c_w", FieldKind::int_field, &c.c_w},
      {"c_k", FieldKind::int_field, &c.c_k},
      {"lambda", FieldKind::double_field, &c.lambda},
      {"pretrain_stop_lo", FieldKind::double_field, &c.pretrain_stop_lo},
      {"pretrain_stop_hi", FieldKind::double_field, &c.pretrain_stop_hi},
      {"pretrain_max_epochs", FieldKind::int_field, &c.pretrain_max_epochs},
      {"pretrain_lr", FieldKind::double_field, &c.pretrain_lr},
      {"pretrain_momentum", FieldKind::double_field, &c.pretrain_momentum},
      {"pretrain_negative_multiple", FieldKind::int_field, &c.pretrain_negative_multiple},
      {"pretrain_holdout_frac", FieldKind::double_field, &c.pretrain_holdout_frac},
      {"rl_epochs", FieldKind::int_field, &c.rl_epochs},
      {"rl_alpha", FieldKind::double_field, &c.rl_alpha},
      {"rl_lr", FieldKind::double_field, &c.rl_lr},
      {"rl_f1_window", FieldKind::int_field, &c.rl_f1_window},
      {"clf_epochs", FieldKind::int_field, &c.clf_epochs},
      {"clf_lr", FieldKind::double_field, &c.clf_lr},
      {"clf_momentum", FieldKind::double_field, &c.clf_momentum},
      {"batch_size", FieldKind::int_field, &c.batch_size},
      {"train_negative_multiple", FieldKind::int_field, &c.train_negative_multiple},
      {"positive_cap", FieldKind::int_field, &c.positive_cap},
  };
}
}  // namespace detail

inline void apply_config_value(RunConfig& cfg, const std::string& key,
                               const std::string& value) {
  for (const auto& f : detail::config_fields(cfg)) {
    if (key != f.key) continue;
    try {
      switch (f.kind) {
        case detail::FieldKind::int_field: {
          std::size_t used = 0;
          *static_cast<int*>(f.ptr) = std::stoi(value, &used);
          if (used != value.size()) throw std::invalid_argument(value);
          return;
        }
        case detail::FieldKind::double_field:
          *static_cast<double*>(f.ptr) = parse_double(value);
          return;
        case detail::FieldKind::seed_field: {
          // stoull wraps negative input instead of rejecting it.
          if (!value.empty() && value[0] == '-') throw std::invalid_argument(value);
          std::size_t used = 0;
          *static_cast<std::uint64_t*>(f.ptr) = std::stoull(value, &used);
          if (used != value.size()) throw std::invalid_argument(value);
          return;
        }
      }
    } catch (const std::exception&) {
      throw input_error("config: bad value '" + value + "' for key '" + key + "'");
    }
  }
  throw input_error("config: unknown key '" + key + "'");
}

// Flat text: one `key = value` per line, '#' comments, blank lines ignored.
inline void parse_config_text(RunConfig& cfg, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return std::string();
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw input_error("config line " + std::to_string(line_no) +
                        ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw input_error("config line " + std::to_string(line_no) +
                        ": empty key or value");
    apply_config_value(cfg, key, value);
  }
}

inline std::string config_to_string(const RunConfig& cfg) {
  std::ostringstream out;
  auto& mutable_cfg = const_cast<RunConfig&>(cfg);
  for (const auto& f : detail::config_fields(mutable_cfg)) {
    out << f.key << " = ";
    switch (f.kind) {
      case detail::FieldKind::int_field:
        out << *static_cast<const int*>(f.ptr);
        break;
      case detail::FieldKind::double_field:
        out << fmt_double(*static_cast<const double*>(f.ptr));
        break;
      case detail::FieldKind::seed_field:
        out << *static_cast<const std::uint64_t*>(f.ptr);
        break;
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace rldenoise
