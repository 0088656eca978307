#pragma once

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "rldenoise/common.hpp"

namespace rldenoise {

inline const char* kPadToken = "<pad>";

// Token -> dense index map. Index 0 is always the padding token; real tokens
// occupy [1, size). Generators and the synthetic corpus never emit index 0.
struct Vocab {
  std::vector<std::string> words{kPadToken};
  std::unordered_map<std::string, int> index;
  int min_count = 1;

  int size() const { return static_cast<int>(words.size()); }

  // 0 (padding) for unknown words.
  int lookup(const std::string& w) const {
    auto it = index.find(w);
    return it == index.end() ? 0 : it->second;
  }

  int add(const std::string& w) {
    auto it = index.find(w);
    if (it != index.end()) return it->second;
    const int id = size();
    words.push_back(w);
    index.emplace(w, id);
    return id;
  }

  // Keeps words seen at least min_count times. Order: count descending, then
  // word ascending, so the mapping is a pure function of the counts.
  static Vocab build(const std::map<std::string, long>& counts, int min_count) {
    std::vector<std::pair<long, std::string>> kept;
    for (const auto& [w, c] : counts)
      if (c >= min_count) kept.emplace_back(c, w);
    std::sort(kept.begin(), kept.end(), [](const auto& x, const auto& y) {
      if (x.first != y.first) return x.first > y.first;
      return x.second < y.second;
    });
    Vocab v;
    v.min_count = min_count;
    for (const auto& [c, w] : kept) v.add(w);
    return v;
  }
};

}  // namespace rldenoise
