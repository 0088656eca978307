// Embedding tables and sentence-to-matrix conversion. Each sentence becomes a
// fixed-height matrix whose rows concatenate a word vector with two position
// vectors (offset from head entity, offset from tail entity).
#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "rldenoise/common.hpp"
#include "rldenoise/corpus.hpp"
#include "rldenoise/vocab.hpp"

namespace rldenoise {

constexpr int kMaxRelDist = 30;
constexpr int kPosBuckets = 2 * kMaxRelDist + 1;
constexpr double kEmbedInitRange = 0.25;

// Relative offset of a token from an entity, saturated to [-30, 30] and
// shifted to a table row in [0, 60].
inline int rel_position_bucket(int token_index, int entity_index) {
  if (token_index < 0 || entity_index < 0)
    throw fault("rel_position_bucket: negative index");
  const int d = std::clamp(token_index - entity_index, -kMaxRelDist, kMaxRelDist);
  return d + kMaxRelDist;
}

struct EmbeddingTable {
  Mat words;     // |V| x d_w
  Mat pos_head;  // 61 x d_p
  Mat pos_tail;  // 61 x d_p

  int d_w() const { return words.cols; }
  int d_p() const { return pos_head.cols; }
  int row_width() const { return d_w() + 2 * d_p(); }

  void check() const {
    if (pos_head.rows != kPosBuckets || pos_tail.rows != kPosBuckets)
      throw fault("embedding table: position tables must have 61 rows");
    if (pos_head.cols != pos_tail.cols)
      throw fault("embedding table: position dims differ");
    auto all_finite = [](const Mat& m) {
      for (double v : m.a)
        if (!std::isfinite(v)) return false;
      return true;
    };
    if (!all_finite(words) || !all_finite(pos_head) || !all_finite(pos_tail))
      throw fault("embedding table: non-finite entry");
  }
};

// Fresh table, every entry uniform in [-0.25, 0.25]. Draw order is fixed:
// word rows first, then head-position rows, then tail-position rows.
inline EmbeddingTable make_embeddings(const Vocab& vocab, int d_w, int d_p,
                                      std::uint64_t seed) {
  if (d_w < 1 || d_p < 1) throw input_error("embedding dims must be >= 1");
  EmbeddingTable t;
  Rng rng(seed);
  t.words = Mat(vocab.size(), d_w);
  t.words.fill_uniform(rng, -kEmbedInitRange, kEmbedInitRange);
  t.pos_head = Mat(kPosBuckets, d_p);
  t.pos_head.fill_uniform(rng, -kEmbedInitRange, kEmbedInitRange);
  t.pos_tail = Mat(kPosBuckets, d_p);
  t.pos_tail.fill_uniform(rng, -kEmbedInitRange, kEmbedInitRange);
  return t;
}

// Pretrained word vectors, one `word v_1 ... v_d` line each. Vocab words
// found in the file take the file vector; the rest keep their random
// initialization. A nonempty file fixes d_w; an empty file falls back to the
// supplied default with a warning.
inline EmbeddingTable load_embeddings(const std::string& text, const Vocab& vocab,
                                      int default_d_w, int d_p, std::uint64_t seed) {
  struct Row {
    std::string word;
    Vec values;
  };
  std::vector<Row> rows;
  int file_dim = -1;
  {
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      std::istringstream ls(line);
      Row r;
      if (!(ls >> r.word))
        throw input_error("embedding file line " + std::to_string(line_no) +
                          ": missing word");
      std::string tok;
      while (ls >> tok) r.values.push_back(parse_double(tok));
      if (r.values.empty())
        throw input_error("embedding file line " + std::to_string(line_no) +
                          ": no vector components");
      const int dim = static_cast<int>(r.values.size());
      if (file_dim < 0)
        file_dim = dim;
      else if (dim != file_dim)
        throw input_error("embedding file line " + std::to_string(line_no) +
                          ": dimension " + std::to_string(dim) +
                          " differs from first line's " + std::to_string(file_dim));
      rows.push_back(std::move(r));
    }
  }
  if (file_dim < 0) {
    warn("embedding file is empty; all word vectors randomly initialized");
    file_dim = default_d_w;
  }

  EmbeddingTable t = make_embeddings(vocab, file_dim, d_p, seed);
  for (const auto& r : rows) {
    auto it = vocab.index.find(r.word);
    if (it == vocab.index.end()) continue;
    double* dst = t.words.row(it->second);
    std::copy(r.values.begin(), r.values.end(), dst);
  }
  return t;
}

struct SentenceMatrix {
  Mat m;                // L_max x (d_w + 2 d_p); rows >= valid_length stay zero
  int valid_length = 0;
  // Per valid row, the table rows it was assembled from. Gradient routing in
  // the network backward pass needs these.
  std::vector<int> word_rows;
  std::vector<int> head_buckets;
  std::vector<int> tail_buckets;
};

// A sentence longer than L_max keeps the L_max-token window centered on the
// midpoint of the two entities (shifted inward at the edges). Position
// buckets are computed from the original indices, so relative offsets
// survive truncation.
inline SentenceMatrix vectorize(const Instance& inst, const EmbeddingTable& table,
                                int L_max) {
  if (L_max < 1) throw input_error("vectorize: L_max must be >= 1");
  const int len = static_cast<int>(inst.tokens.size());
  int start = 0;
  if (len > L_max) {
    const int mid = (inst.head_pos + inst.tail_pos) / 2;
    start = std::clamp(mid - L_max / 2, 0, len - L_max);
  }
  SentenceMatrix sm;
  sm.valid_length = std::min(len, L_max);
  sm.m = Mat(L_max, table.row_width());
  sm.word_rows.resize(sm.valid_length);
  sm.head_buckets.resize(sm.valid_length);
  sm.tail_buckets.resize(sm.valid_length);
  const int d_w = table.d_w();
  const int d_p = table.d_p();
  for (int r = 0; r < sm.valid_length; ++r) {
    const int t = start + r;
    const int w = inst.tokens[t];
    if (w < 0 || w >= table.words.rows)
      throw fault("vectorize: token index " + std::to_string(w) +
                  " outside embedding table of " + std::to_string(table.words.rows));
    const int hb = rel_position_bucket(t, inst.head_pos);
    const int tb = rel_position_bucket(t, inst.tail_pos);
    sm.word_rows[r] = w;
    sm.head_buckets[r] = hb;
    sm.tail_buckets[r] = tb;
    double* dst = sm.m.row(r);
    const double* wv = table.words.row(w);
    const double* hv = table.pos_head.row(hb);
    const double* tv = table.pos_tail.row(tb);
    std::copy(wv, wv + d_w, dst);
    std::copy(hv, hv + d_p, dst + d_w);
    std::copy(tv, tv + d_p, dst + d_w + d_p);
  }
  return sm;
}

}  // namespace rldenoise
