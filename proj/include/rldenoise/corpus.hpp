// Dataset model, TSV ingestion, synthetic noisy-corpus generation, and all
// split/sampling operations. Relation id 0 is the NA (no relation) universe.
//
// TSV line format, one instance per line:
//   bag_key <TAB> head <TAB> tail <TAB> relation_name <TAB> head_idx <TAB>
//   tail_idx <TAB> space-separated tokens
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rldenoise/common.hpp"
#include "rldenoise/vocab.hpp"

namespace rldenoise {

struct Instance {
  int id = -1;
  std::vector<int> tokens;  // vocab indices
  int head_pos = 0;
  int tail_pos = 0;
  int relation = 0;  // 0 = NA
  int bag_id = -1;
  std::optional<bool> noise_flag;  // ground truth, synthetic corpora only
};

struct Bag {
  int bag_id = -1;
  std::string head_entity;
  std::string tail_entity;
  int relation = 0;
  std::vector<int> instance_ids;
};

struct Dataset {
  std::vector<std::string> relations{"NA"};  // index 0 reserved for NA
  std::map<int, Bag> bags;
  std::map<int, Instance> instances;
  Vocab vocab;

  int relation_id(const std::string& name) const {
    for (std::size_t i = 0; i < relations.size(); ++i)
      if (relations[i] == name) return static_cast<int>(i);
    return -1;
  }

  // Instance ids with the given relation label, ascending.
  std::vector<int> instances_of(int relation) const {
    std::vector<int> out;
    for (const auto& [id, inst] : instances)
      if (inst.relation == relation) out.push_back(id);
    return out;
  }

  std::vector<int> positives_of(int relation) const {
    if (relation == 0) throw fault("positives_of: NA is not a positive relation");
    return instances_of(relation);
  }

  std::vector<int> negatives() const { return instances_of(0); }

  void check() const {
    for (const auto& [id, inst] : instances) {
      if (inst.tokens.empty()) throw fault("instance " + std::to_string(id) + ": no tokens");
      const int n = static_cast<int>(inst.tokens.size());
      if (inst.head_pos == inst.tail_pos || inst.head_pos < 0 || inst.tail_pos < 0 ||
          inst.head_pos >= n || inst.tail_pos >= n)
        throw fault("instance " + std::to_string(id) + ": bad entity positions");
      auto it = bags.find(inst.bag_id);
      if (it == bags.end()) throw fault("instance " + std::to_string(id) + ": missing bag");
      if (it->second.relation != inst.relation)
        throw fault("instance " + std::to_string(id) + ": relation differs from bag");
    }
    for (const auto& [bid, bag] : bags) {
      if (bag.instance_ids.empty()) throw fault("bag " + std::to_string(bid) + ": empty");
      if (bag.relation < 0 || bag.relation >= static_cast<int>(relations.size()))
        throw fault("bag " + std::to_string(bid) + ": relation out of range");
    }
  }
};

// ---------------------------------------------------------------------------
// TSV ingestion

namespace detail {
inline std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline int parse_int_field(const std::string& s, int line_no, const char* what) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw input_error("parse error at line " + std::to_string(line_no) + ": bad " +
                      std::string(what) + " '" + s + "'");
  }
}
}  // namespace detail

inline Dataset parse_dataset(std::istream& in) {
  Dataset ds;
  std::map<std::string, int> bag_ids;
  std::string line;
  int line_no = 0;
  int next_instance = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = detail::split_on(line, '\t');
    if (fields.size() != 7)
      throw input_error("parse error at line " + std::to_string(line_no) +
                        ": expected 7 tab-separated fields, got " +
                        std::to_string(fields.size()));
    const std::string& bag_key = fields[0];
    const std::string& head = fields[1];
    const std::string& tail = fields[2];
    const std::string& rel_name = fields[3];
    const int head_idx = detail::parse_int_field(fields[4], line_no, "head_idx");
    const int tail_idx = detail::parse_int_field(fields[5], line_no, "tail_idx");

    std::vector<std::string> toks;
    {
      std::istringstream ts(fields[6]);
      std::string t;
      while (ts >> t) toks.push_back(t);
    }
    if (toks.empty())
      throw input_error("validation error at line " + std::to_string(line_no) +
                        ": empty token list");
    const int n = static_cast<int>(toks.size());
    if (head_idx < 0 || head_idx >= n || tail_idx < 0 || tail_idx >= n)
      throw input_error("validation error at line " + std::to_string(line_no) +
                        ": entity index out of range (tokens=" + std::to_string(n) +
                        ", head_idx=" + std::to_string(head_idx) +
                        ", tail_idx=" + std::to_string(tail_idx) + ")");
    if (head_idx == tail_idx)
      throw input_error("validation error at line " + std::to_string(line_no) +
                        ": head_idx equals tail_idx");

    int rel = ds.relation_id(rel_name);
    if (rel < 0) {
      rel = static_cast<int>(ds.relations.size());
      ds.relations.push_back(rel_name);
    }

    int bag_id;
    auto bit = bag_ids.find(bag_key);
    if (bit == bag_ids.end()) {
      bag_id = static_cast<int>(bag_ids.size());
      bag_ids.emplace(bag_key, bag_id);
      Bag b;
      b.bag_id = bag_id;
      b.head_entity = head;
      b.tail_entity = tail;
      b.relation = rel;
      ds.bags.emplace(bag_id, b);
    } else {
      bag_id = bit->second;
      const Bag& b = ds.bags.at(bag_id);
      if (b.relation != rel || b.head_entity != head || b.tail_entity != tail)
        throw input_error("validation error at line " + std::to_string(line_no) +
                          ": bag '" + bag_key + "' redefined with different fields");
    }

    Instance inst;
    inst.id = next_instance++;
    inst.head_pos = head_idx;
    inst.tail_pos = tail_idx;
    inst.relation = rel;
    inst.bag_id = bag_id;
    inst.tokens.reserve(toks.size());
    for (const auto& t : toks) inst.tokens.push_back(ds.vocab.add(t));
    ds.bags.at(bag_id).instance_ids.push_back(inst.id);
    ds.instances.emplace(inst.id, inst);
  }
  ds.check();
  return ds;
}

inline Dataset parse_dataset(const std::string& text) {
  std::istringstream in(text);
  return parse_dataset(in);
}

inline void write_dataset(std::ostream& out, const Dataset& ds) {
  for (const auto& [id, inst] : ds.instances) {
    const Bag& bag = ds.bags.at(inst.bag_id);
    out << 'b' << bag.bag_id << '\t' << bag.head_entity << '\t' << bag.tail_entity
        << '\t' << ds.relations[inst.relation] << '\t' << inst.head_pos << '\t'
        << inst.tail_pos << '\t';
    for (std::size_t t = 0; t < inst.tokens.size(); ++t) {
      if (t) out << ' ';
      const int w = inst.tokens[t];
      if (w < 0 || w >= ds.vocab.size()) throw fault("write_dataset: corrupt vocab index");
      out << ds.vocab.words[w];
    }
    out << '\n';
  }
}

inline std::string dataset_to_tsv(const Dataset& ds) {
  std::ostringstream out;
  write_dataset(out, ds);
  return out.str();
}

// Sidecar noise-truth file: one instance id per line, ascending.
inline void write_noise_truth(std::ostream& out, const std::set<int>& truth) {
  for (int id : truth) out << id << '\n';
}

inline std::set<int> parse_noise_truth(std::istream& in) {
  std::set<int> truth;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    truth.insert(detail::parse_int_field(line, line_no, "instance id"));
  }
  return truth;
}

// Attach sidecar flags to a parsed dataset: listed ids true, all others false.
inline void apply_noise_truth(Dataset& ds, const std::set<int>& truth) {
  for (auto& [id, inst] : ds.instances) inst.noise_flag = truth.count(id) > 0;
}

// ---------------------------------------------------------------------------
// Synthetic corpus generation

// Bag sizes 1..5. Default mix heavily favors 1-2 sentence bags (normalized
// from observed NYT bag-size shares).
inline std::array<double, 5> default_bag_size_distribution() {
  std::array<double, 5> raw{0.559, 0.320, 0.037, 0.044, 0.007};
  double sum = 0;
  for (double v : raw) sum += v;
  for (double& v : raw) v /= sum;
  return raw;
}

struct SyntheticConfig {
  int n_relations = 5;
  int instances_per_relation = 600;
  double noise_rate = 0.3;  // exact fraction of each relation's positives
  int vocab_size = 120;     // generator word budget: triggers + filler
  int min_sentence_len = 7;
  int max_sentence_len = 12;
  std::array<double, 5> bag_size_distribution = default_bag_size_distribution();
  int na_instances = -1;  // -1: 10 x instances_per_relation
  std::uint64_t seed = 1;

  int resolved_na_instances() const {
    return na_instances >= 0 ? na_instances : 10 * instances_per_relation;
  }

  void check() const {
    if (n_relations < 1) throw input_error("synthetic config: n_relations must be >= 1");
    if (instances_per_relation < 1)
      throw input_error("synthetic config: instances_per_relation must be >= 1");
    if (!(noise_rate >= 0.0 && noise_rate < 1.0))
      throw input_error("synthetic config: noise_rate must be in [0,1)");
    if (min_sentence_len < 3 || max_sentence_len < min_sentence_len)
      throw input_error("synthetic config: need 3 <= min_sentence_len <= max_sentence_len");
    double sum = 0;
    for (double p : bag_size_distribution) {
      if (p < 0) throw input_error("synthetic config: negative bag-size probability");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw input_error("synthetic config: bag_size_distribution must sum to 1");
    if (resolved_na_instances() < 1)
      throw input_error("synthetic config: need at least one NA instance");
  }
};

namespace detail {
constexpr int kTriggersPerRelation = 4;
constexpr int kMinFillerWords = 8;

inline int draw_bag_size(const std::array<double, 5>& dist, Rng& rng) {
  const double u = rand_unit(rng);
  double acc = 0;
  for (int s = 0; s < 5; ++s) {
    acc += dist[s];
    if (u < acc) return s + 1;
  }
  return 5;
}
}  // namespace detail

// Clean instances of relation r carry trigger tokens owned by r between the
// two entity positions. A noisy instance keeps label r but its sentence is
// drawn from another relation's generator (wrong triggers) or from NA's
// (no triggers); its id goes into the returned truth set.
inline std::pair<Dataset, std::set<int>> generate_synthetic(const SyntheticConfig& cfg) {
  cfg.check();
  const int n_trigger_words = detail::kTriggersPerRelation * cfg.n_relations;
  if (cfg.vocab_size < n_trigger_words + detail::kMinFillerWords)
    throw input_error("synthetic config: vocab_size " + std::to_string(cfg.vocab_size) +
                      " too small to allocate disjoint trigger sets (need >= " +
                      std::to_string(n_trigger_words + detail::kMinFillerWords) + ")");

  Dataset ds;
  std::set<int> truth;
  Rng rng(cfg.seed);

  // Vocabulary: per-relation triggers first, then filler. Indices start at 1.
  std::vector<std::vector<int>> triggers(cfg.n_relations + 1);
  for (int r = 1; r <= cfg.n_relations; ++r)
    for (int j = 0; j < detail::kTriggersPerRelation; ++j)
      triggers[r].push_back(ds.vocab.add("t" + std::to_string(r) + "_" + std::to_string(j)));
  std::vector<int> filler;
  for (int i = 0; i < cfg.vocab_size - n_trigger_words; ++i)
    filler.push_back(ds.vocab.add("w" + std::to_string(i)));

  for (int r = 1; r <= cfg.n_relations; ++r)
    ds.relations.push_back("rel" + std::to_string(r));

  int next_instance = 0;
  int next_bag = 0;

  // source == 0 generates a trigger-free NA-style sentence.
  auto make_sentence = [&](int source, Instance& inst) {
    const int len = rand_int(rng, cfg.min_sentence_len, cfg.max_sentence_len);
    inst.tokens.assign(len, 0);
    for (int t = 0; t < len; ++t)
      inst.tokens[t] = filler[rand_int(rng, 0, static_cast<int>(filler.size()) - 1)];
    inst.head_pos = rand_int(rng, 0, len - 3);
    inst.tail_pos = rand_int(rng, inst.head_pos + 2, len - 1);
    if (source != 0) {
      const auto& trig = triggers[source];
      const int gap = inst.tail_pos - inst.head_pos - 1;
      const int n_plant = gap >= 2 ? 2 : 1;
      std::vector<int> slots;
      for (int t = inst.head_pos + 1; t < inst.tail_pos; ++t) slots.push_back(t);
      seeded_shuffle(slots, rng);
      for (int j = 0; j < n_plant; ++j)
        inst.tokens[slots[j]] = trig[rand_int(rng, 0, detail::kTriggersPerRelation - 1)];
    }
  };

  auto build_relation = [&](int r, int count) {
    // Exact noisy-slot count, random placement.
    const int n_noisy =
        r == 0 ? 0 : static_cast<int>(std::llround(cfg.noise_rate * count));
    std::vector<int> slot_ids(count);
    for (int i = 0; i < count; ++i) slot_ids[i] = i;
    std::set<int> noisy_slots;
    if (n_noisy > 0)
      for (int s : sample_without_replacement(slot_ids, n_noisy, rng)) noisy_slots.insert(s);

    int produced = 0;
    while (produced < count) {
      int size = detail::draw_bag_size(cfg.bag_size_distribution, rng);
      size = std::min(size, count - produced);
      Bag bag;
      bag.bag_id = next_bag++;
      bag.relation = r;
      bag.head_entity = "e" + std::to_string(r) + "h" + std::to_string(bag.bag_id);
      bag.tail_entity = "e" + std::to_string(r) + "t" + std::to_string(bag.bag_id);
      for (int k = 0; k < size; ++k, ++produced) {
        Instance inst;
        inst.id = next_instance++;
        inst.relation = r;
        inst.bag_id = bag.bag_id;
        const bool noisy = noisy_slots.count(produced) > 0;
        int source = r;
        if (noisy) {
          // Half NA-style, half another relation's triggers.
          if (cfg.n_relations == 1 || rand_unit(rng) < 0.5) {
            source = 0;
          } else {
            source = rand_int(rng, 1, cfg.n_relations - 1);
            if (source >= r) ++source;
          }
        }
        make_sentence(source, inst);
        inst.noise_flag = noisy;
        if (noisy) truth.insert(inst.id);
        bag.instance_ids.push_back(inst.id);
        ds.instances.emplace(inst.id, inst);
      }
      ds.bags.emplace(bag.bag_id, bag);
    }
  };

  for (int r = 1; r <= cfg.n_relations; ++r) build_relation(r, cfg.instances_per_relation);
  build_relation(0, cfg.resolved_na_instances());

  ds.check();
  return {std::move(ds), std::move(truth)};
}

// ---------------------------------------------------------------------------
// Splits and sampling. All pure functions of (input, seed).

// 2:1 train/validation partition of positive instance ids.
inline std::pair<std::vector<int>, std::vector<int>> split_positive(
    const std::vector<int>& positives, std::uint64_t seed) {
  if (positives.size() < 3)
    throw input_error("split error: need at least 3 positives, got " +
                      std::to_string(positives.size()));
  std::vector<int> ids = positives;
  Rng rng(seed);
  seeded_shuffle(ids, rng);
  const auto n_train = static_cast<std::size_t>(
      std::llround(2.0 * static_cast<double>(ids.size()) / 3.0));
  std::vector<int> train(ids.begin(), ids.begin() + n_train);
  std::vector<int> val(ids.begin() + n_train, ids.end());
  std::sort(train.begin(), train.end());
  std::sort(val.begin(), val.end());
  return {std::move(train), std::move(val)};
}

// min(target, |pool|) ids without replacement; warns when the pool is short.
inline std::vector<int> sample_negatives(const std::vector<int>& pool,
                                         std::size_t target, std::uint64_t seed) {
  if (pool.empty()) throw input_error("sample_negatives: empty pool");
  if (target >= pool.size()) {
    if (target > pool.size())
      warn("sample_negatives: pool of " + std::to_string(pool.size()) +
           " short of target " + std::to_string(target) + "; returning whole pool");
    std::vector<int> all = pool;
    std::sort(all.begin(), all.end());
    return all;
  }
  Rng rng(seed);
  return sample_without_replacement(pool, target, rng);
}

// Identity under the cap, else a uniform subset of exactly cap ids.
inline std::vector<int> cap_subsample(const std::vector<int>& ids, std::size_t cap,
                                      std::uint64_t seed) {
  if (cap < 1) throw input_error("cap_subsample: cap must be >= 1");
  if (ids.size() <= cap) return ids;
  Rng rng(seed);
  return sample_without_replacement(ids, cap, rng);
}

}  // namespace rldenoise
