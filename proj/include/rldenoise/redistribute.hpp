// Applies trained agents as false-positive classifiers over a whole dataset:
// flagged instances are relabeled NA and moved into the negative universe,
// and a bag whose instances are all flagged becomes an NA bag itself.
#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rldenoise/agent.hpp"
#include "rldenoise/common.hpp"
#include "rldenoise/corpus.hpp"

namespace rldenoise {

// Deterministic false-positive call using the agent's frozen removed-average
// as the second half of the state. Strict threshold: exactly 0.5 keeps.
inline std::pair<bool, double> classify_instance(const PolicyAgent& agent,
                                                 const Instance& inst,
                                                 bool use_frozen_avg = true) {
  const RemovedAverage zero(agent.c_k());
  const Decision d = decide_deterministic(
      agent, inst, use_frozen_avg ? agent.frozen_avg : zero);
  return {d.p_remove > 0.5, d.p_remove};
}

struct RedistributionReport {
  struct PerRelation {
    int relation = 0;
    bool had_agent = false;
    long flagged_instances = 0;
    long flagged_bags = 0;
    long positive_before = 0;
    long positive_after = 0;
    std::vector<int> flagged_ids;
  };
  std::vector<PerRelation> rows;
  long instances_before = 0;
  long instances_after = 0;
};

// Flagged instances leave their bag for a fresh NA bag (one per affected bag,
// same entity pair); a fully flagged bag is relabeled NA in place. Instance
// count is conserved.
inline std::pair<Dataset, RedistributionReport> redistribute(
    const Dataset& input, const std::map<int, PolicyAgent>& agents,
    bool use_frozen_avg = true) {
  Dataset ds = input;
  RedistributionReport report;
  report.instances_before = static_cast<long>(ds.instances.size());

  int next_bag = ds.bags.empty() ? 0 : ds.bags.rbegin()->first + 1;
  for (int rel = 1; rel < static_cast<int>(ds.relations.size()); ++rel) {
    RedistributionReport::PerRelation row;
    row.relation = rel;
    const std::vector<int> positives = ds.instances_of(rel);
    row.positive_before = static_cast<long>(positives.size());
    auto agent_it = agents.find(rel);
    if (agent_it == agents.end()) {
      row.positive_after = row.positive_before;
      report.rows.push_back(std::move(row));
      continue;
    }
    row.had_agent = true;
    const PolicyAgent& agent = agent_it->second;

    std::set<int> flagged;
    for (int id : positives) {
      const auto [flag, p] = classify_instance(agent, ds.instances.at(id), use_frozen_avg);
      if (flag) flagged.insert(id);
    }
    row.flagged_instances = static_cast<long>(flagged.size());
    row.flagged_ids.assign(flagged.begin(), flagged.end());
    row.positive_after = row.positive_before - row.flagged_instances;

    // Group flagged instances by their bag, ascending, so new bag ids are
    // reproducible.
    std::map<int, std::vector<int>> by_bag;
    for (int id : flagged) by_bag[ds.instances.at(id).bag_id].push_back(id);
    for (auto& [bid, ids] : by_bag) {
      Bag& bag = ds.bags.at(bid);
      const bool whole_bag = ids.size() == bag.instance_ids.size();
      if (whole_bag) {
        ++row.flagged_bags;
        bag.relation = 0;
        for (int id : ids) ds.instances.at(id).relation = 0;
        continue;
      }
      Bag moved;
      moved.bag_id = next_bag++;
      moved.head_entity = bag.head_entity;
      moved.tail_entity = bag.tail_entity;
      moved.relation = 0;
      for (int id : ids) {
        Instance& inst = ds.instances.at(id);
        inst.relation = 0;
        inst.bag_id = moved.bag_id;
        moved.instance_ids.push_back(id);
        bag.instance_ids.erase(
            std::find(bag.instance_ids.begin(), bag.instance_ids.end(), id));
      }
      ds.bags.emplace(moved.bag_id, std::move(moved));
    }
    report.rows.push_back(std::move(row));
  }
  report.instances_after = static_cast<long>(ds.instances.size());
  ds.check();
  return {std::move(ds), std::move(report)};
}

inline std::string redistribution_report_csv(const Dataset& ds,
                                             const RedistributionReport& report) {
  std::ostringstream out;
  out << "relation,flagged_instances,flagged_bags,positive_before,positive_after\n";
  for (const auto& row : report.rows)
    out << ds.relations.at(row.relation) << ',' << row.flagged_instances << ','
        << row.flagged_bags << ',' << row.positive_before << ','
        << row.positive_after << '\n';
  return out.str();
}

}  // namespace rldenoise
