#pragma once

#include <algorithm>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rode/core/rng.hpp"
#include "rode/repr/action_repr.hpp"
#include "rode/roles/kmeans.hpp"

namespace rode {

/// K restricted action subsets covering the full action set. Subsets may
/// overlap; none is a singleton. Immutable once built.
class RoleSet {
 public:
  RoleSet() = default;
  RoleSet(int action_count, std::vector<std::vector<int>> members)
      : action_count_(action_count), members_(std::move(members)) {
    for (auto& m : members_) std::sort(m.begin(), m.end());
    masks_.assign(members_.size(),
                  std::vector<std::uint8_t>(static_cast<std::size_t>(action_count), 0));
    std::vector<std::uint8_t> covered(static_cast<std::size_t>(action_count), 0);
    for (std::size_t j = 0; j < members_.size(); ++j) {
      if (members_[j].empty()) throw std::runtime_error("RoleSet: empty role");
      for (int a : members_[j]) {
        if (a < 0 || a >= action_count) throw std::runtime_error("RoleSet: action out of range");
        masks_[j][static_cast<std::size_t>(a)] = 1;
        covered[static_cast<std::size_t>(a)] = 1;
      }
    }
    for (int a = 0; a < action_count; ++a)
      if (!covered[static_cast<std::size_t>(a)])
        throw std::runtime_error("RoleSet: action " + std::to_string(a) +
                                 " not covered by any role");
  }

  int count() const { return static_cast<int>(members_.size()); }
  int action_count() const { return action_count_; }
  const std::vector<int>& members(int j) const { return members_.at(static_cast<std::size_t>(j)); }
  const std::vector<std::uint8_t>& mask(int j) const { return masks_.at(static_cast<std::size_t>(j)); }

  bool contains(int j, int action) const {
    return masks_.at(static_cast<std::size_t>(j))[static_cast<std::size_t>(action)] != 0;
  }

  /// Role representation: arithmetic mean of member embeddings (untracked).
  std::vector<double> representation(int j, const ActionReprTable& table) const {
    const std::vector<int>& m = members(j);
    std::vector<double> z(static_cast<std::size_t>(table.dim()), 0.0);
    for (int a : m) {
      const std::vector<double> row = table.row(a);
      for (std::size_t i = 0; i < z.size(); ++i) z[i] += row[i];
    }
    for (double& v : z) v /= static_cast<double>(m.size());
    return z;
  }

  /// All K role representations stacked as an untracked [K, d] tensor.
  Tensor representations(const ActionReprTable& table) const {
    Tensor out = Tensor::zeros({count(), table.dim()});
    for (int j = 0; j < count(); ++j) {
      const std::vector<double> z = representation(j, table);
      std::copy(z.begin(), z.end(), out.data() + static_cast<std::size_t>(j) * table.dim());
    }
    return out;
  }

 private:
  int action_count_ = 0;
  std::vector<std::vector<int>> members_;
  std::vector<std::vector<std::uint8_t>> masks_;
};

/// K roles, each granted the full action space (the pre-clustering
/// initialization and the "full action spaces" ablation).
inline RoleSet init_roles(int K, int action_count) {
  if (K < 1) throw std::runtime_error("init_roles: K must be >= 1");
  std::vector<int> all(static_cast<std::size_t>(action_count));
  for (int a = 0; a < action_count; ++a) all[static_cast<std::size_t>(a)] = a;
  return RoleSet(action_count, std::vector<std::vector<int>>(static_cast<std::size_t>(K), all));
}

/// Factors the action space by k-means over the frozen representations, then
/// applies the outlier rule: every action in a singleton cluster is added to
/// all clusters and its own cluster dissolves, so no surviving role is a
/// singleton and the union still covers the action set. The surviving
/// cluster count (which may be < k) becomes the role count.
inline RoleSet cluster_actions(const ActionReprTable& table, int k, Rng& rng) {
  if (!table.defined()) throw std::runtime_error("cluster_actions: table not frozen yet");
  const int A = table.action_count();
  if (k < 2) throw std::runtime_error("cluster_actions: k must be >= 2");
  if (k > A) throw std::runtime_error("cluster_actions: k exceeds action count");

  std::vector<std::vector<double>> points;
  points.reserve(static_cast<std::size_t>(A));
  for (int a = 0; a < A; ++a) points.push_back(table.row(a));
  KMeansResult km = kmeans(points, k, rng);

  std::vector<std::vector<int>> clusters(static_cast<std::size_t>(k));
  for (int a = 0; a < A; ++a)
    clusters[static_cast<std::size_t>(km.assignment[static_cast<std::size_t>(a)])].push_back(a);

  std::vector<std::vector<int>> survivors;
  std::vector<int> outliers;
  for (const auto& c : clusters) {
    if (c.empty()) continue;  // dropped
    if (c.size() == 1)
      outliers.push_back(c.front());
    else
      survivors.push_back(c);
  }
  if (survivors.empty()) {
    // Every cluster was a singleton (or empty): collapse to one role with
    // the whole action space.
    std::vector<int> all(static_cast<std::size_t>(A));
    for (int a = 0; a < A; ++a) all[static_cast<std::size_t>(a)] = a;
    return RoleSet(A, {all});
  }
  for (int a : outliers)
    for (auto& s : survivors) s.push_back(a);
  return RoleSet(A, std::move(survivors));
}

/// Transfer mapping for an enlarged action set. `fresh_labels` is the
/// co-clustering of ALL new-task actions (old actions keep their indices;
/// new ones are appended) produced by the phase-1-plus-k-means procedure on
/// the new task. Each new action takes the mean OLD representation of the
/// old actions sharing its fresh cluster and joins every old role that
/// intersects that similar set. Role count never changes.
inline std::pair<ActionReprTable, RoleSet> map_new_actions(const ActionReprTable& old_table,
                                                           const RoleSet& old_roles,
                                                           const std::vector<int>& fresh_labels,
                                                           int new_action_count) {
  const int A_old = old_table.action_count();
  if (new_action_count < A_old)
    throw std::runtime_error("map_new_actions: new action set smaller than the old one");
  if (static_cast<int>(fresh_labels.size()) != new_action_count)
    throw std::runtime_error("map_new_actions: need one fresh cluster label per new-task action");

  Tensor ext = Tensor::zeros({new_action_count, old_table.dim()});
  std::copy(old_table.values().data(),
            old_table.values().data() + static_cast<std::size_t>(A_old) * old_table.dim(),
            ext.data());

  std::vector<std::vector<int>> members;
  members.reserve(static_cast<std::size_t>(old_roles.count()));
  for (int j = 0; j < old_roles.count(); ++j) members.push_back(old_roles.members(j));

  for (int a = A_old; a < new_action_count; ++a) {
    std::vector<int> similar;
    for (int o = 0; o < A_old; ++o)
      if (fresh_labels[static_cast<std::size_t>(o)] == fresh_labels[static_cast<std::size_t>(a)])
        similar.push_back(o);
    if (similar.empty())
      throw std::runtime_error("map_new_actions: new action " + std::to_string(a) +
                               " shares no cluster with any old action");
    double* dst = ext.data() + static_cast<std::size_t>(a) * old_table.dim();
    for (int o : similar) {
      const std::vector<double> row = old_table.row(o);
      for (int i = 0; i < old_table.dim(); ++i) dst[static_cast<std::size_t>(i)] += row[static_cast<std::size_t>(i)];
    }
    for (int i = 0; i < old_table.dim(); ++i)
      dst[static_cast<std::size_t>(i)] /= static_cast<double>(similar.size());
    for (std::size_t j = 0; j < members.size(); ++j) {
      const bool intersects = std::any_of(similar.begin(), similar.end(), [&](int o) {
        return old_roles.contains(static_cast<int>(j), o);
      });
      if (intersects) members[j].push_back(a);
    }
  }
  return {ActionReprTable(ext, new_action_count, old_table.dim()),
          RoleSet(new_action_count, std::move(members))};
}

/// Human-readable partition + pairwise embedding distances.
inline std::string cluster_report(const ActionReprTable& table, const RoleSet& roles) {
  std::ostringstream os;
  os << "roles: " << roles.count() << ", actions: " << table.action_count() << "\n";
  for (int j = 0; j < roles.count(); ++j) {
    os << "role " << j << ":";
    for (int a : roles.members(j)) os << " " << a;
    os << "\n";
  }
  os << "pairwise distances:\n";
  os << std::fixed << std::setprecision(4);
  for (int a = 0; a < table.action_count(); ++a) {
    for (int b = 0; b < table.action_count(); ++b) {
      const std::vector<double> ra = table.row(a), rb = table.row(b);
      double s = 0.0;
      for (std::size_t i = 0; i < ra.size(); ++i) s += (ra[i] - rb[i]) * (ra[i] - rb[i]);
      os << (b ? " " : "") << std::sqrt(s);
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace rode
