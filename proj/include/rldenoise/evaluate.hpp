// Metrics: binary precision/recall/F1, ranked precision-recall curves with
// AUC, bag-level scoring, denoising recovery against synthetic ground truth,
// and a Welch two-sample t-test for cross-seed significance.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rldenoise/common.hpp"
#include "rldenoise/corpus.hpp"
#include "rldenoise/tinynn.hpp"

namespace rldenoise {

struct Prf1 {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Any zero denominator yields 0 for that quantity.
inline Prf1 prf1(long tp, long fp, long fn) {
  if (tp < 0 || fp < 0 || fn < 0) throw fault("prf1: negative count");
  Prf1 m;
  if (tp + fp > 0) m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn > 0) m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (m.precision + m.recall > 0.0)
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

// ---------------------------------------------------------------------------
// Precision-recall curves

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;
};

struct PRCurve {
  std::vector<PrPoint> points;  // one per ranked item, recall non-decreasing
  double auc = 0.0;
};

struct ScoredItem {
  int id = 0;
  double score = 0.0;
  bool gold = false;
};

// Sweep by descending score (ties by ascending id), emit a point per item,
// integrate precision over the recall axis by trapezoid, anchored at
// (0, precision of the top item).
inline PRCurve pr_curve(std::vector<ScoredItem> items) {
  long gold_total = 0;
  for (const auto& it : items) gold_total += it.gold ? 1 : 0;
  if (gold_total == 0) throw input_error("metric error: no gold-positive items");
  std::sort(items.begin(), items.end(), [](const ScoredItem& a, const ScoredItem& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  PRCurve curve;
  curve.points.reserve(items.size());
  long tp = 0;
  for (std::size_t k = 0; k < items.size(); ++k) {
    if (items[k].gold) ++tp;
    PrPoint pt;
    pt.recall = static_cast<double>(tp) / static_cast<double>(gold_total);
    pt.precision = static_cast<double>(tp) / static_cast<double>(k + 1);
    curve.points.push_back(pt);
  }
  double prev_r = 0.0;
  double prev_p = curve.points.front().precision;
  double auc = 0.0;
  for (const auto& pt : curve.points) {
    auc += (pt.recall - prev_r) * (pt.precision + prev_p) / 2.0;
    prev_r = pt.recall;
    prev_p = pt.precision;
  }
  curve.auc = auc;
  return curve;
}

inline std::string pr_curve_csv(const PRCurve& curve) {
  std::ostringstream out;
  out << "rank,recall,precision\n";
  for (std::size_t k = 0; k < curve.points.size(); ++k)
    out << (k + 1) << ',' << fmt_double(curve.points[k].recall) << ','
        << fmt_double(curve.points[k].precision) << '\n';
  return out.str();
}

// Minimal standalone line plot of the curve, precision over recall.
inline std::string pr_curve_svg(const PRCurve& curve, const std::string& title) {
  const double w = 640, h = 480, ml = 60, mr = 20, mt = 40, mb = 50;
  auto sx = [&](double r) { return ml + r * (w - ml - mr); };
  auto sy = [&](double p) { return h - mb - p * (h - mt - mb); };
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << w << ' ' << h
      << "\">\n";
  out << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << w / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
      << title << " (AUC " << fmt_double(curve.auc) << ")</text>\n";
  for (int i = 0; i <= 5; ++i) {
    const double f = i / 5.0;
    out << "<line x1=\"" << sx(f) << "\" y1=\"" << sy(0) << "\" x2=\"" << sx(f)
        << "\" y2=\"" << sy(0) + 5 << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << sx(f) << "\" y=\"" << sy(0) + 20
        << "\" text-anchor=\"middle\" font-size=\"11\">" << fmt_double(f) << "</text>\n";
    out << "<line x1=\"" << sx(0) - 5 << "\" y1=\"" << sy(f) << "\" x2=\"" << sx(0)
        << "\" y2=\"" << sy(f) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << sx(0) - 8 << "\" y=\"" << sy(f) + 4
        << "\" text-anchor=\"end\" font-size=\"11\">" << fmt_double(f) << "</text>\n";
  }
  out << "<line x1=\"" << sx(0) << "\" y1=\"" << sy(0) << "\" x2=\"" << sx(1)
      << "\" y2=\"" << sy(0) << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << sx(0) << "\" y1=\"" << sy(0) << "\" x2=\"" << sx(0)
      << "\" y2=\"" << sy(1) << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << (ml + (w - ml - mr) / 2) << "\" y=\"" << h - 12
      << "\" text-anchor=\"middle\" font-size=\"13\">recall</text>\n";
  out << "<text x=\"16\" y=\"" << mt + (h - mt - mb) / 2
      << "\" font-size=\"13\" transform=\"rotate(-90 16 " << mt + (h - mt - mb) / 2
      << ")\" text-anchor=\"middle\">precision</text>\n";
  out << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
  out << sx(0) << ',' << sy(curve.points.front().precision);
  for (const auto& pt : curve.points) out << ' ' << sx(pt.recall) << ',' << sy(pt.precision);
  out << "\"/>\n</svg>\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// Bag-level scoring: a bag's score for a relation is the max over its
// instances of the classifier's probability for that relation. A multi-class
// net (one class per relation, NA = class 0) scores every non-NA relation; a
// binary net scores the single relation passed in (class 1 = that relation).

struct BagScore {
  int bag_id = -1;
  int relation = 0;
  double score = 0.0;
};

inline std::vector<BagScore> bag_scores(const CnnNet& net, const Dataset& ds,
                                        const std::vector<int>& bag_ids,
                                        int relation = -1) {
  const int n_rel = static_cast<int>(ds.relations.size());
  if (relation < 0 && net.head.n_classes() != n_rel)
    throw input_error("bag_scores: multi-class head of " +
                      std::to_string(net.head.n_classes()) + " classes but dataset has " +
                      std::to_string(n_rel) + " relations");
  if (relation >= 0 && net.head.n_classes() != 2)
    throw input_error("bag_scores: single-relation scoring needs a binary head");
  std::vector<BagScore> out;
  for (int bid : bag_ids) {
    const Bag& bag = ds.bags.at(bid);
    Vec best;
    for (int iid : bag.instance_ids) {
      const Vec p = predict_probs(net, ds.instances.at(iid));
      if (best.empty()) {
        best = p;
      } else {
        for (std::size_t c = 0; c < p.size(); ++c) best[c] = std::max(best[c], p[c]);
      }
    }
    if (relation >= 0) {
      out.push_back({bid, relation, best.at(1)});
    } else {
      for (int r = 1; r < n_rel; ++r) out.push_back({bid, r, best.at(r)});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Denoising recovery against synthetic ground truth

inline std::pair<double, double> noise_recovery(const std::set<int>& flagged,
                                                const std::set<int>& truth) {
  if (truth.empty()) throw input_error("metric error: empty noise truth");
  long hit = 0;
  for (int id : flagged) hit += truth.count(id) > 0 ? 1 : 0;
  const double precision =
      flagged.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(flagged.size());
  const double recall = static_cast<double>(hit) / static_cast<double>(truth.size());
  return {precision, recall};
}

struct DenoiseReport {
  double removal_precision = 0.0;
  double removal_recall = 0.0;
  struct PerRelation {
    int relation = 0;
    long flagged = 0;
    double precision = 0.0;
    double recall = 0.0;
  };
  std::vector<PerRelation> per_relation;
  std::map<int, long> flagged_bag_size_histogram;  // bag size -> flagged count
};

inline DenoiseReport make_denoise_report(const Dataset& ds, const std::set<int>& flagged,
                                         const std::set<int>& truth) {
  DenoiseReport rep;
  auto [p, r] = noise_recovery(flagged, truth);
  rep.removal_precision = p;
  rep.removal_recall = r;
  for (int rel = 1; rel < static_cast<int>(ds.relations.size()); ++rel) {
    std::set<int> rel_flagged, rel_truth;
    for (int id : ds.instances_of(rel)) {
      if (flagged.count(id)) rel_flagged.insert(id);
      if (truth.count(id)) rel_truth.insert(id);
    }
    DenoiseReport::PerRelation row;
    row.relation = rel;
    row.flagged = static_cast<long>(rel_flagged.size());
    if (!rel_truth.empty()) {
      auto [rp, rr] = noise_recovery(rel_flagged, rel_truth);
      row.precision = rp;
      row.recall = rr;
    }
    rep.per_relation.push_back(row);
  }
  for (int id : flagged) {
    auto it = ds.instances.find(id);
    if (it == ds.instances.end()) continue;
    const auto size = static_cast<int>(ds.bags.at(it->second.bag_id).instance_ids.size());
    ++rep.flagged_bag_size_histogram[size];
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Welch two-sample t-test, two-sided p-value through the regularized
// incomplete beta function.

namespace detail {
// Continued-fraction core of the incomplete beta (modified Lentz).
inline double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw fault("betacf: continued fraction failed to converge");
}

inline double reg_inc_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                       a * std::log(x) + b * std::log(1.0 - x);
  const double bt = std::exp(ln_bt);
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
  return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}
}  // namespace detail

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
};

inline WelchResult welch_t_test(const Vec& a, const Vec& b) {
  if (a.size() < 2 || b.size() < 2)
    throw input_error("welch_t_test: each sample needs at least 2 values");
  auto mean_var = [](const Vec& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::pair<double, double>(m, s / static_cast<double>(v.size() - 1));
  };
  const auto [ma, va] = mean_var(a);
  const auto [mb, vb] = mean_var(b);
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  WelchResult res;
  const double se2 = va / na + vb / nb;
  if (se2 == 0.0) {
    if (ma == mb) {
      warn("welch_t_test: both samples constant and equal; p = 1");
      res.t = 0.0;
      res.df = na + nb - 2.0;
      res.p = 1.0;
      return res;
    }
    warn("welch_t_test: both samples constant but different; p = 0");
    res.t = ma > mb ? std::numeric_limits<double>::infinity()
                    : -std::numeric_limits<double>::infinity();
    res.df = na + nb - 2.0;
    res.p = 0.0;
    return res;
  }
  res.t = (ma - mb) / std::sqrt(se2);
  const double ra = va / na, rb = vb / nb;
  res.df = (ra + rb) * (ra + rb) /
           (ra * ra / (na - 1.0) + rb * rb / (nb - 1.0));
  const double x = res.df / (res.df + res.t * res.t);
  res.p = detail::reg_inc_beta(res.df / 2.0, 0.5, x);
  return res;
}

}  // namespace rldenoise
