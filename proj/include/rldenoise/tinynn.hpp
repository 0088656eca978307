// Minimal neural toolkit shared by the policy network and the relation
// classifiers: a single-window CNN encoder over sentence matrices, a softmax
// head, exact manual backpropagation (max-pool argmax routing, relu gating,
// sparse embedding-row gradients), SGD with momentum, bit-exact checkpoint
// serialization, and a central-difference gradient checker.
#pragma once

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "rldenoise/common.hpp"
#include "rldenoise/corpus.hpp"
#include "rldenoise/featurize.hpp"

namespace rldenoise {

struct EncoderParams {
  int c_w = 3;
  Mat filters;  // c_k x (c_w * row_width)
  Vec bias;     // c_k

  int c_k() const { return filters.rows; }
  int row_width() const { return c_w > 0 ? filters.cols / c_w : 0; }
};

struct SoftmaxHead {
  Mat W;  // n_classes x input_dim
  Vec b;  // n_classes

  int n_classes() const { return W.rows; }
  int input_dim() const { return W.cols; }
};

// Full network: trainable embeddings feeding the encoder feeding the head.
// The head input is [feature_scale * feature, extra]; classifiers use scale 1
// and no extra, the policy agent scales the feature and appends its running
// average vector.
struct CnnNet {
  EmbeddingTable emb;
  EncoderParams enc;
  SoftmaxHead head;
  int L_max = 100;
};

struct StateSpec {
  double feature_scale = 1.0;
  Vec extra;  // appended to the scaled feature; receives no gradient
};

struct LossSpec {
  enum class Kind { cross_entropy, weighted_logp };
  Kind kind = Kind::cross_entropy;
  int target = 0;             // class label, or the chosen action
  double coefficient = 1.0;   // weighted_logp only

  static LossSpec cross_entropy(int target_class) {
    return LossSpec{Kind::cross_entropy, target_class, 1.0};
  }
  static LossSpec weighted_logp(int action, double coefficient) {
    return LossSpec{Kind::weighted_logp, action, coefficient};
  }
};

struct ForwardTape {
  std::vector<int> argmax;  // per filter, winning window start
  Vec pre;                  // per filter, max conv value before relu
  Vec feature;              // relu(pre)
  Vec head_input;
  Vec probs;
};

struct GradientBundle {
  Mat d_filters;
  Vec d_bias;
  Mat d_W;
  Vec d_b;
  std::map<int, Vec> d_words;
  std::map<int, Vec> d_pos_head;
  std::map<int, Vec> d_pos_tail;

  void add(const GradientBundle& o) {
    auto axpy = [](Vec& dst, const Vec& src) {
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    };
    axpy(d_filters.a, o.d_filters.a);
    axpy(d_bias, o.d_bias);
    axpy(d_W.a, o.d_W.a);
    axpy(d_b, o.d_b);
    auto merge = [](std::map<int, Vec>& dst, const std::map<int, Vec>& src) {
      for (const auto& [row, g] : src) {
        auto it = dst.find(row);
        if (it == dst.end()) {
          dst.emplace(row, g);
        } else {
          for (std::size_t i = 0; i < g.size(); ++i) it->second[i] += g[i];
        }
      }
    };
    merge(d_words, o.d_words);
    merge(d_pos_head, o.d_pos_head);
    merge(d_pos_tail, o.d_pos_tail);
  }

  void scale(double c) {
    for (double& v : d_filters.a) v *= c;
    for (double& v : d_bias) v *= c;
    for (double& v : d_W.a) v *= c;
    for (double& v : d_b) v *= c;
    for (auto& [row, g] : d_words)
      for (double& v : g) v *= c;
    for (auto& [row, g] : d_pos_head)
      for (double& v : g) v *= c;
    for (auto& [row, g] : d_pos_tail)
      for (double& v : g) v *= c;
  }
};

inline GradientBundle zero_bundle(const CnnNet& net) {
  GradientBundle g;
  g.d_filters = Mat(net.enc.filters.rows, net.enc.filters.cols);
  g.d_bias.assign(net.enc.bias.size(), 0.0);
  g.d_W = Mat(net.head.W.rows, net.head.W.cols);
  g.d_b.assign(net.head.b.size(), 0.0);
  return g;
}

// ---------------------------------------------------------------------------
// Forward

// feature[k] = relu(max over window starts t of filter_k . m[t..t+c_w) + b_k).
// Sentences shorter than the window borrow all-zero padding rows so at least
// one window exists.
inline Vec encode(const EncoderParams& enc, const SentenceMatrix& sm,
                  std::vector<int>* argmax_out = nullptr, Vec* pre_out = nullptr) {
  const int c_w = enc.c_w;
  const int c_k = enc.c_k();
  if (c_w < 1 || c_k < 1) throw fault("encode: empty encoder");
  if (sm.m.cols * c_w != enc.filters.cols)
    throw fault("encode: filter width " + std::to_string(enc.filters.cols) +
                " does not match window of " + std::to_string(sm.m.cols * c_w));
  const int valid_rows = std::max(sm.valid_length, c_w);
  if (valid_rows > sm.m.rows)
    throw fault("encode: matrix of " + std::to_string(sm.m.rows) +
                " rows cannot hold a window of " + std::to_string(c_w));
  const int n_windows = valid_rows - c_w + 1;
  const int win = enc.filters.cols;

  Vec feature(c_k);
  if (argmax_out) argmax_out->assign(c_k, 0);
  if (pre_out) pre_out->assign(c_k, 0.0);
  for (int k = 0; k < c_k; ++k) {
    const double* f = enc.filters.row(k);
    double best = 0.0;
    int best_t = 0;
    for (int t = 0; t < n_windows; ++t) {
      const double* x = sm.m.row(t);  // rows are contiguous
      double dot = enc.bias[k];
      for (int i = 0; i < win; ++i) dot += f[i] * x[i];
      if (t == 0 || dot > best) {
        best = dot;
        best_t = t;
      }
    }
    if (argmax_out) (*argmax_out)[k] = best_t;
    if (pre_out) (*pre_out)[k] = best;
    feature[k] = best > 0.0 ? best : 0.0;
  }
  return feature;
}

// Numerically stable softmax of Wx + b.
inline Vec forward_softmax(const SoftmaxHead& head, const Vec& x) {
  if (static_cast<int>(x.size()) != head.input_dim())
    throw fault("forward_softmax: input of " + std::to_string(x.size()) +
                " does not match head width " + std::to_string(head.input_dim()));
  const int n = head.n_classes();
  Vec logits(n);
  for (int c = 0; c < n; ++c) {
    const double* w = head.W.row(c);
    double z = head.b[c];
    for (int i = 0; i < head.input_dim(); ++i) z += w[i] * x[i];
    logits[c] = z;
  }
  const double zmax = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  Vec p(n);
  for (int c = 0; c < n; ++c) {
    p[c] = std::exp(logits[c] - zmax);
    sum += p[c];
  }
  for (double& v : p) v /= sum;
  return p;
}

inline ForwardTape forward_net(const CnnNet& net, const SentenceMatrix& sm,
                               const StateSpec& st = {}) {
  ForwardTape tape;
  tape.feature = encode(net.enc, sm, &tape.argmax, &tape.pre);
  tape.head_input.reserve(tape.feature.size() + st.extra.size());
  for (double v : tape.feature) tape.head_input.push_back(st.feature_scale * v);
  for (double v : st.extra) tape.head_input.push_back(v);
  tape.probs = forward_softmax(net.head, tape.head_input);
  return tape;
}

inline double loss_value(const ForwardTape& tape, const LossSpec& loss) {
  const double p = tape.probs.at(loss.target);
  if (loss.kind == LossSpec::Kind::cross_entropy) return -std::log(p);
  return loss.coefficient * std::log(p);
}

// ---------------------------------------------------------------------------
// Backward

// Exact gradients of the scalar loss with respect to every parameter tensor
// and every embedding row the sentence touched. The extra portion of the head
// input is treated as a constant.
inline GradientBundle backward_net(const CnnNet& net, const SentenceMatrix& sm,
                                   const StateSpec& st, const ForwardTape& tape,
                                   const LossSpec& loss) {
  GradientBundle g = zero_bundle(net);
  const int n = net.head.n_classes();
  if (loss.target < 0 || loss.target >= n)
    throw fault("backward_net: target class out of range");

  // d loss / d logits
  Vec dlogits(n);
  if (loss.kind == LossSpec::Kind::cross_entropy) {
    for (int c = 0; c < n; ++c) dlogits[c] = tape.probs[c];
    dlogits[loss.target] -= 1.0;
  } else {
    if (loss.coefficient == 0.0) return g;
    for (int c = 0; c < n; ++c) dlogits[c] = -loss.coefficient * tape.probs[c];
    dlogits[loss.target] += loss.coefficient;
  }

  const int in_dim = net.head.input_dim();
  Vec dx(in_dim, 0.0);
  for (int c = 0; c < n; ++c) {
    const double gz = dlogits[c];
    double* dw = g.d_W.row(c);
    const double* w = net.head.W.row(c);
    for (int i = 0; i < in_dim; ++i) {
      dw[i] += gz * tape.head_input[i];
      dx[i] += gz * w[i];
    }
    g.d_b[c] += gz;
  }

  // Through the scaled feature; the extra tail takes no gradient.
  const int c_k = net.enc.c_k();
  const int c_w = net.enc.c_w;
  const int width = sm.m.cols;
  std::map<int, Vec> d_rows;  // matrix row -> gradient, only for touched rows
  for (int k = 0; k < c_k; ++k) {
    if (tape.pre[k] <= 0.0) continue;  // relu gate
    const double df = dx[k] * st.feature_scale;
    if (df == 0.0) continue;
    const int t0 = tape.argmax[k];
    const double* f = net.enc.filters.row(k);
    double* dfk = g.d_filters.row(k);
    g.d_bias[k] += df;
    for (int r = 0; r < c_w; ++r) {
      const double* x = sm.m.row(t0 + r);
      auto it = d_rows.find(t0 + r);
      if (it == d_rows.end()) it = d_rows.emplace(t0 + r, Vec(width, 0.0)).first;
      double* dr = it->second.data();
      const double* fr = f + r * width;
      double* dfr = dfk + r * width;
      for (int i = 0; i < width; ++i) {
        dfr[i] += df * x[i];
        dr[i] += df * fr[i];
      }
    }
  }

  // Route matrix-row gradients to the embedding rows they were copied from.
  // Padding rows (beyond valid_length) have no source and are dropped.
  const int d_w = net.emb.d_w();
  const int d_p = net.emb.d_p();
  auto bump = [](std::map<int, Vec>& dst, int row, const double* g_part, int len) {
    auto it = dst.find(row);
    if (it == dst.end()) it = dst.emplace(row, Vec(len, 0.0)).first;
    for (int i = 0; i < len; ++i) it->second[i] += g_part[i];
  };
  for (const auto& [r, dr] : d_rows) {
    if (r >= sm.valid_length) continue;
    bump(g.d_words, sm.word_rows[r], dr.data(), d_w);
    bump(g.d_pos_head, sm.head_buckets[r], dr.data() + d_w, d_p);
    bump(g.d_pos_tail, sm.tail_buckets[r], dr.data() + d_w + d_p, d_p);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Initialization

inline CnnNet make_net(EmbeddingTable emb, int L_max, int c_w, int c_k,
                       int n_classes, int head_input_dim, std::uint64_t seed) {
  if (c_w < 1 || c_k < 1 || n_classes < 2 || head_input_dim < c_k)
    throw input_error("make_net: bad architecture parameters");
  if (L_max < c_w) throw input_error("make_net: L_max must be >= window size");
  CnnNet net;
  net.emb = std::move(emb);
  net.L_max = L_max;
  net.enc.c_w = c_w;
  Rng rng(seed);
  const int win = c_w * net.emb.row_width();
  net.enc.filters = Mat(c_k, win);
  const double fs = std::sqrt(6.0 / (win + 1));
  net.enc.filters.fill_uniform(rng, -fs, fs);
  net.enc.bias.assign(c_k, 0.0);
  net.head.W = Mat(n_classes, head_input_dim);
  const double hs = std::sqrt(6.0 / (head_input_dim + n_classes));
  net.head.W.fill_uniform(rng, -hs, hs);
  net.head.b.assign(n_classes, 0.0);
  return net;
}

inline CnnNet make_classifier_net(EmbeddingTable emb, int L_max, int c_w, int c_k,
                                  int n_classes, std::uint64_t seed) {
  return make_net(std::move(emb), L_max, c_w, c_k, n_classes, c_k, seed);
}

// ---------------------------------------------------------------------------
// Optimizer

struct SgdOptimizer {
  double lr = 0.01;
  double momentum = 0.0;
  Mat v_filters;
  Vec v_bias;
  Mat v_W;
  Vec v_b;
  Mat v_words;
  Mat v_pos_head;
  Mat v_pos_tail;

  SgdOptimizer() = default;
  SgdOptimizer(const CnnNet& net, double lr_, double momentum_)
      : lr(lr_), momentum(momentum_) {
    v_filters = Mat(net.enc.filters.rows, net.enc.filters.cols);
    v_bias.assign(net.enc.bias.size(), 0.0);
    v_W = Mat(net.head.W.rows, net.head.W.cols);
    v_b.assign(net.head.b.size(), 0.0);
    v_words = Mat(net.emb.words.rows, net.emb.words.cols);
    v_pos_head = Mat(net.emb.pos_head.rows, net.emb.pos_head.cols);
    v_pos_tail = Mat(net.emb.pos_tail.rows, net.emb.pos_tail.cols);
  }

  // v <- momentum*v + g; p <- p - lr*v. Sparse embedding gradients are zero
  // for untouched rows, whose velocity still decays.
  void step(CnnNet& net, const GradientBundle& g) {
    check_finite(g);
    dense(net.enc.filters.a, v_filters.a, g.d_filters.a);
    dense(net.enc.bias, v_bias, g.d_bias);
    dense(net.head.W.a, v_W.a, g.d_W.a);
    dense(net.head.b, v_b, g.d_b);
    table(net.emb.words, v_words, g.d_words);
    table(net.emb.pos_head, v_pos_head, g.d_pos_head);
    table(net.emb.pos_tail, v_pos_tail, g.d_pos_tail);
  }

 private:
  void dense(Vec& p, Vec& v, const Vec& g) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      v[i] = momentum * v[i] + g[i];
      p[i] -= lr * v[i];
    }
  }

  void table(Mat& p, Mat& v, const std::map<int, Vec>& g) {
    if (momentum == 0.0) {
      // Velocity equals the gradient, so untouched rows stay put.
      for (const auto& [row, gr] : g) {
        double* pr = p.row(row);
        for (std::size_t i = 0; i < gr.size(); ++i) pr[i] -= lr * gr[i];
      }
      return;
    }
    for (double& vv : v.a) vv *= momentum;
    for (const auto& [row, gr] : g) {
      double* vr = v.row(row);
      for (std::size_t i = 0; i < gr.size(); ++i) vr[i] += gr[i];
    }
    for (std::size_t i = 0; i < p.a.size(); ++i) p.a[i] -= lr * v.a[i];
  }

  static void check_finite(const GradientBundle& g) {
    auto scan = [](const Vec& v, const char* name) {
      for (double x : v)
        if (!std::isfinite(x))
          throw fault(std::string("training fault: non-finite gradient in ") + name);
    };
    scan(g.d_filters.a, "encoder filters");
    scan(g.d_bias, "encoder bias");
    scan(g.d_W.a, "head weights");
    scan(g.d_b, "head bias");
    for (const auto& [row, gr] : g.d_words) scan(gr, "word embedding rows");
    for (const auto& [row, gr] : g.d_pos_head) scan(gr, "head position rows");
    for (const auto& [row, gr] : g.d_pos_tail) scan(gr, "tail position rows");
  }
};

// ---------------------------------------------------------------------------
// Mini-batch classifier fitting (shared by agent pre-training and the reward
// classifier). Batches of 64 by default, last partial batch kept, one
// optimizer step per batch on the batch-mean gradient.

struct FitConfig {
  int epochs = 15;
  double lr = 0.01;
  double momentum = 0.9;
  int batch_size = 64;
  std::uint64_t seed = 0;
};

// One shuffled pass of mini-batch cross-entropy SGD. Returns the mean
// per-example training loss of the pass.
inline double fit_epoch(CnnNet& net, SgdOptimizer& opt,
                        const std::vector<const Instance*>& xs,
                        const std::vector<int>& ys, int batch_size, Rng& rng,
                        const StateSpec& st = {}) {
  if (xs.size() != ys.size()) throw fault("fit_epoch: label count mismatch");
  if (xs.empty()) throw input_error("fit_epoch: empty training set");
  if (batch_size < 1) throw input_error("fit_epoch: batch_size must be >= 1");
  std::vector<int> order(xs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  seeded_shuffle(order, rng);
  double loss_sum = 0.0;
  for (std::size_t at = 0; at < order.size(); at += batch_size) {
    const std::size_t end = std::min(order.size(), at + batch_size);
    GradientBundle batch = zero_bundle(net);
    for (std::size_t i = at; i < end; ++i) {
      const int idx = order[i];
      const SentenceMatrix sm = vectorize(*xs[idx], net.emb, net.L_max);
      const ForwardTape tape = forward_net(net, sm, st);
      const LossSpec loss = LossSpec::cross_entropy(ys[idx]);
      loss_sum += loss_value(tape, loss);
      batch.add(backward_net(net, sm, st, tape, loss));
    }
    batch.scale(1.0 / static_cast<double>(end - at));
    opt.step(net, batch);
  }
  return loss_sum / static_cast<double>(xs.size());
}

inline void fit_classifier(CnnNet& net, const std::vector<const Instance*>& xs,
                           const std::vector<int>& ys, const FitConfig& cfg) {
  SgdOptimizer opt(net, cfg.lr, cfg.momentum);
  Rng rng(cfg.seed);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch)
    fit_epoch(net, opt, xs, ys, cfg.batch_size, rng);
}

inline Vec predict_probs(const CnnNet& net, const Instance& inst,
                         const StateSpec& st = {}) {
  const SentenceMatrix sm = vectorize(inst, net.emb, net.L_max);
  return forward_net(net, sm, st).probs;
}

// ---------------------------------------------------------------------------
// Checkpoint serialization. Hexfloat text, bit-exact round trip.

namespace detail {
inline void write_mat(std::ostream& out, const char* name, const Mat& m) {
  out << "mat " << name << ' ' << m.rows << ' ' << m.cols << '\n';
  for (int r = 0; r < m.rows; ++r) {
    const double* p = m.row(r);
    for (int c = 0; c < m.cols; ++c) {
      if (c) out << ' ';
      out << hex_double(p[c]);
    }
    out << '\n';
  }
}

inline void write_vec(std::ostream& out, const char* name, const Vec& v) {
  out << "vec " << name << ' ' << v.size() << '\n';
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out << ' ';
    out << hex_double(v[i]);
  }
  out << '\n';
}

inline Mat read_mat(std::istream& in, const std::string& name) {
  std::string kind, got;
  int rows = 0, cols = 0;
  if (!(in >> kind >> got >> rows >> cols) || kind != "mat" || got != name)
    throw input_error("checkpoint error: expected matrix '" + name + "'");
  if (rows < 0 || cols < 0) throw input_error("checkpoint error: negative shape");
  Mat m(rows, cols);
  std::string tok;
  for (int i = 0; i < rows * cols; ++i) {
    if (!(in >> tok)) throw input_error("checkpoint error: truncated matrix '" + name + "'");
    m.a[i] = parse_double(tok);
  }
  return m;
}

inline Vec read_vec(std::istream& in, const std::string& name) {
  std::string kind, got;
  std::size_t n = 0;
  if (!(in >> kind >> got >> n) || kind != "vec" || got != name)
    throw input_error("checkpoint error: expected vector '" + name + "'");
  Vec v(n);
  std::string tok;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(in >> tok)) throw input_error("checkpoint error: truncated vector '" + name + "'");
    v[i] = parse_double(tok);
  }
  return v;
}
}  // namespace detail

inline void save_net(std::ostream& out, const CnnNet& net) {
  out << "net v1\n";
  out << "c_w " << net.enc.c_w << '\n';
  out << "L_max " << net.L_max << '\n';
  detail::write_mat(out, "words", net.emb.words);
  detail::write_mat(out, "pos_head", net.emb.pos_head);
  detail::write_mat(out, "pos_tail", net.emb.pos_tail);
  detail::write_mat(out, "filters", net.enc.filters);
  detail::write_vec(out, "enc_bias", net.enc.bias);
  detail::write_mat(out, "head_w", net.head.W);
  detail::write_vec(out, "head_b", net.head.b);
  out << "end\n";
}

inline CnnNet load_net(std::istream& in) {
  std::string magic, version;
  if (!(in >> magic >> version) || magic != "net" || version != "v1")
    throw input_error("checkpoint error: bad header");
  CnnNet net;
  std::string key;
  if (!(in >> key >> net.enc.c_w) || key != "c_w")
    throw input_error("checkpoint error: expected c_w");
  if (!(in >> key >> net.L_max) || key != "L_max")
    throw input_error("checkpoint error: expected L_max");
  net.emb.words = detail::read_mat(in, "words");
  net.emb.pos_head = detail::read_mat(in, "pos_head");
  net.emb.pos_tail = detail::read_mat(in, "pos_tail");
  net.enc.filters = detail::read_mat(in, "filters");
  net.enc.bias = detail::read_vec(in, "enc_bias");
  net.head.W = detail::read_mat(in, "head_w");
  net.head.b = detail::read_vec(in, "head_b");
  if (!(in >> key) || key != "end")
    throw input_error("checkpoint error: missing trailer");
  net.emb.check();
  return net;
}

// ---------------------------------------------------------------------------
// Gradient checking. Central differences over every parameter coordinate,
// compared against one analytic backward pass.

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst;  // tensor and coordinate of the worst error
};

namespace detail {
struct ParamRef {
  double* p;
  const char* tensor;
  int index;
};

inline std::vector<ParamRef> all_params(CnnNet& net) {
  std::vector<ParamRef> out;
  auto push = [&out](Vec& v, const char* name) {
    for (std::size_t i = 0; i < v.size(); ++i)
      out.push_back({&v[i], name, static_cast<int>(i)});
  };
  push(net.emb.words.a, "words");
  push(net.emb.pos_head.a, "pos_head");
  push(net.emb.pos_tail.a, "pos_tail");
  push(net.enc.filters.a, "filters");
  push(net.enc.bias, "enc_bias");
  push(net.head.W.a, "head_w");
  push(net.head.b, "head_b");
  return out;
}

// Analytic gradient for the coordinate all_params() listed at the same
// position, with sparse embedding maps read as zero when a row is untouched.
inline double analytic_at(const CnnNet& net, const GradientBundle& g,
                          const ParamRef& ref) {
  auto from_map = [](const std::map<int, Vec>& m, int cols, int flat) {
    auto it = m.find(flat / cols);
    return it == m.end() ? 0.0 : it->second[flat % cols];
  };
  const std::string t = ref.tensor;
  if (t == "words") return from_map(g.d_words, net.emb.words.cols, ref.index);
  if (t == "pos_head") return from_map(g.d_pos_head, net.emb.pos_head.cols, ref.index);
  if (t == "pos_tail") return from_map(g.d_pos_tail, net.emb.pos_tail.cols, ref.index);
  if (t == "filters") return g.d_filters.a[ref.index];
  if (t == "enc_bias") return g.d_bias[ref.index];
  if (t == "head_w") return g.d_W.a[ref.index];
  return g.d_b[ref.index];
}
}  // namespace detail

inline GradCheckReport gradient_check(CnnNet& net, const Instance& inst,
                                      const StateSpec& st, const LossSpec& loss,
                                      double eps = 1e-5) {
  const auto loss_of = [&]() {
    const SentenceMatrix sm = vectorize(inst, net.emb, net.L_max);
    return loss_value(forward_net(net, sm, st), loss);
  };
  const SentenceMatrix sm = vectorize(inst, net.emb, net.L_max);
  const ForwardTape tape = forward_net(net, sm, st);
  const GradientBundle g = backward_net(net, sm, st, tape, loss);

  GradCheckReport report;
  for (const auto& ref : detail::all_params(net)) {
    const double saved = *ref.p;
    *ref.p = saved + eps;
    const double lp = loss_of();
    *ref.p = saved - eps;
    const double lm = loss_of();
    *ref.p = saved;
    const double numeric = (lp - lm) / (2.0 * eps);
    const double analytic = detail::analytic_at(net, g, ref);
    const double diff = std::abs(numeric - analytic);
    if (diff < 1e-10) continue;
    const double rel = diff / std::max(std::abs(numeric), std::abs(analytic));
    if (rel > report.max_rel_err) {
      report.max_rel_err = rel;
      report.worst = std::string(ref.tensor) + "[" + std::to_string(ref.index) + "]";
    }
  }
  return report;
}

}  // namespace rldenoise
