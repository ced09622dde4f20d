#include "rode/roles/roles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "rode/core/rng.hpp"
#include "rode/core/tensor.hpp"

using namespace rode;

namespace {

ActionReprTable make_table(const std::vector<std::vector<double>>& rows) {
  const int A = static_cast<int>(rows.size());
  const int d = static_cast<int>(rows[0].size());
  Tensor values = Tensor::zeros({A, d});
  for (int a = 0; a < A; ++a)
    std::copy(rows[static_cast<std::size_t>(a)].begin(), rows[static_cast<std::size_t>(a)].end(),
              values.data() + static_cast<std::size_t>(a) * d);
  return ActionReprTable(values, A, d);
}

std::set<std::set<int>> as_partition(const RoleSet& roles) {
  std::set<std::set<int>> out;
  for (int j = 0; j < roles.count(); ++j)
    out.insert(std::set<int>(roles.members(j).begin(), roles.members(j).end()));
  return out;
}

}  // namespace

TEST(RoleSet, ValidatesCoverageAndRange) {
  EXPECT_NO_THROW(RoleSet(4, {{0, 1}, {2, 3}}));
  EXPECT_THROW(RoleSet(4, {{0, 1}, {2}}), std::runtime_error);   // 3 uncovered
  EXPECT_THROW(RoleSet(4, {{0, 1, 4}, {2, 3}}), std::runtime_error);
  EXPECT_THROW(RoleSet(4, {{0, 1, 2, 3}, {}}), std::runtime_error);
}

TEST(RoleSet, MasksAndMembership) {
  RoleSet roles(5, {{3, 0, 1}, {2, 3, 4}});
  EXPECT_EQ(roles.count(), 2);
  EXPECT_EQ(roles.action_count(), 5);
  EXPECT_EQ(roles.members(0), (std::vector<int>{0, 1, 3}));  // sorted
  EXPECT_TRUE(roles.contains(0, 3));
  EXPECT_TRUE(roles.contains(1, 3));  // overlap permitted
  EXPECT_FALSE(roles.contains(0, 2));
  const std::vector<std::uint8_t> expect_mask = {1, 1, 0, 1, 0};
  EXPECT_EQ(roles.mask(0), expect_mask);
}

TEST(InitRoles, FullActionSpaces) {
  RoleSet roles = init_roles(3, 10);
  EXPECT_EQ(roles.count(), 3);
  for (int j = 0; j < 3; ++j) {
    EXPECT_EQ(static_cast<int>(roles.members(j).size()), 10);
    for (int a = 0; a < 10; ++a) EXPECT_TRUE(roles.contains(j, a));
  }
  EXPECT_THROW(init_roles(0, 10), std::runtime_error);
}

TEST(InitRoles, AllRoleRepresentationsEqualTheGlobalMean) {
  std::vector<std::vector<double>> rows = {{1.0, 2.0}, {3.0, -1.0}, {-4.0, 5.0}};
  ActionReprTable table = make_table(rows);
  RoleSet roles = init_roles(3, 3);
  std::vector<double> mean = {0.0, 0.0};
  for (const auto& r : rows)
    for (std::size_t i = 0; i < 2; ++i) mean[i] += r[i] / 3.0;
  for (int j = 0; j < 3; ++j) {
    const std::vector<double> z = roles.representation(j, table);
    EXPECT_NEAR(z[0], mean[0], 1e-12);
    EXPECT_NEAR(z[1], mean[1], 1e-12);
  }
}

TEST(RoleRepresentation, MeanOfMembers) {
  // Hypothetical singleton: the representation is the member itself.
  ActionReprTable table = make_table({{1.5, -2.0}, {-1.5, 2.0}, {3.0, 3.0}});
  RoleSet single(3, {{0}, {0, 1, 2}});
  EXPECT_EQ(single.representation(0, table), (std::vector<double>{1.5, -2.0}));

  // Opposite embeddings cancel.
  RoleSet pair(3, {{0, 1}, {2, 0}});
  const std::vector<double> z = pair.representation(0, table);
  EXPECT_DOUBLE_EQ(z[0], 0.0);
  EXPECT_DOUBLE_EQ(z[1], 0.0);

  // Independent elementwise oracle on three random-ish vectors.
  ActionReprTable t3 = make_table({{0.3, 1.1, -0.7}, {2.0, 0.4, 0.9}, {-1.2, 0.5, 0.0}});
  RoleSet all(3, {{0, 1, 2}});
  const std::vector<double> m = all.representation(0, t3);
  EXPECT_NEAR(m[0], (0.3 + 2.0 - 1.2) / 3.0, 1e-12);
  EXPECT_NEAR(m[1], (1.1 + 0.4 + 0.5) / 3.0, 1e-12);
  EXPECT_NEAR(m[2], (-0.7 + 0.9 + 0.0) / 3.0, 1e-12);

  // Stacked form matches the per-role form row by row.
  Tensor stacked = all.representations(t3);
  EXPECT_EQ(stacked.shape(), (std::vector<int>{1, 3}));
  for (int i = 0; i < 3; ++i)
    EXPECT_DOUBLE_EQ(stacked.data()[i], m[static_cast<std::size_t>(i)]);
}

TEST(ClusterActions, TwoObviousGroups) {
  ActionReprTable table =
      make_table({{0.0, 0.0}, {0.1, 0.0}, {10.0, 10.0}, {10.0, 10.1}});
  Rng rng(1);
  RoleSet roles = cluster_actions(table, 2, rng);
  EXPECT_EQ(roles.count(), 2);
  const std::set<std::set<int>> expect = {{0, 1}, {2, 3}};
  EXPECT_EQ(as_partition(roles), expect);
}

TEST(ClusterActions, OutlierJoinsEveryClusterAndItsOwnDissolves) {
  ActionReprTable table = make_table(
      {{0.0, 0.0}, {0.1, 0.0}, {0.0, 0.1}, {5.0, 5.0}, {5.0, 5.1}, {20.0, 20.0}});
  Rng rng(2);
  RoleSet roles = cluster_actions(table, 3, rng);
  EXPECT_EQ(roles.count(), 2);  // the singleton {5} dissolved
  for (int j = 0; j < roles.count(); ++j) {
    EXPECT_GE(roles.members(j).size(), 2u);
    EXPECT_TRUE(roles.contains(j, 5));
  }
  const std::set<std::set<int>> expect = {{0, 1, 2, 5}, {3, 4, 5}};
  EXPECT_EQ(as_partition(roles), expect);
}

TEST(ClusterActions, IdenticalRepresentationsCollapseToOneFullRole) {
  ActionReprTable table = make_table({{1.0, 1.0}, {1.0, 1.0}, {1.0, 1.0}, {1.0, 1.0}});
  Rng rng(3);
  RoleSet roles = cluster_actions(table, 2, rng);
  // Ties go to the lowest cluster index, the other cluster empties and is
  // dropped: one role containing every action.
  EXPECT_EQ(roles.count(), 1);
  EXPECT_EQ(roles.members(0), (std::vector<int>{0, 1, 2, 3}));
}

TEST(ClusterActions, AllSingletonsFallBackToOneFullRole) {
  ActionReprTable table = make_table({{0.0, 0.0}, {100.0, 0.0}});
  Rng rng(4);
  RoleSet roles = cluster_actions(table, 2, rng);
  EXPECT_EQ(roles.count(), 1);
  EXPECT_EQ(roles.members(0), (std::vector<int>{0, 1}));
}

TEST(ClusterActions, RejectsBadArguments) {
  ActionReprTable table = make_table({{0.0}, {1.0}, {2.0}});
  Rng rng(5);
  EXPECT_THROW(cluster_actions(table, 4, rng), std::runtime_error);
  EXPECT_THROW(cluster_actions(table, 1, rng), std::runtime_error);
  EXPECT_THROW(cluster_actions(ActionReprTable{}, 2, rng), std::runtime_error);
}

TEST(ClusterActions, InvariantUnderActionRelabeling) {
  // Clearly separated groups: the optimal partition is unique, so permuting
  // action indices must yield the same partition after mapping back.
  const std::vector<std::vector<double>> rows = {
      {0.0, 0.0}, {0.2, 0.1}, {6.0, 6.0}, {6.1, 5.9}, {-7.0, 3.0}, {-7.2, 3.1}};
  const int A = static_cast<int>(rows.size());
  ActionReprTable base = make_table(rows);
  Rng rng(6);
  RoleSet base_roles = cluster_actions(base, 3, rng);
  const std::set<std::set<int>> base_partition = as_partition(base_roles);

  Rng perm_rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<int> perm(static_cast<std::size_t>(A));
    for (int i = 0; i < A; ++i) perm[static_cast<std::size_t>(i)] = i;
    perm_rng.shuffle(perm);
    std::vector<std::vector<double>> permuted(static_cast<std::size_t>(A));
    for (int i = 0; i < A; ++i)
      permuted[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] =
          rows[static_cast<std::size_t>(i)];
    Rng run_rng(static_cast<std::uint64_t>(100 + trial));
    RoleSet perm_roles = cluster_actions(make_table(permuted), 3, run_rng);
    std::set<std::set<int>> mapped;
    for (int j = 0; j < perm_roles.count(); ++j) {
      std::set<int> members;
      for (int a : perm_roles.members(j)) {
        // Map the permuted index back to the original labeling.
        for (int i = 0; i < A; ++i)
          if (perm[static_cast<std::size_t>(i)] == a) members.insert(i);
      }
      mapped.insert(members);
    }
    EXPECT_EQ(mapped, base_partition) << "trial " << trial;
  }
}

TEST(MapNewActions, SingleSimilarActionCopiesExactly) {
  ActionReprTable old_table = make_table({{1.0, 0.0}, {0.0, 1.0}, {-1.0, -1.0}});
  RoleSet old_roles(3, {{0, 1}, {1, 2}});
  // New action 3 shares a fresh cluster with old action 1 only.
  const std::vector<int> fresh = {0, 1, 2, 1};
  auto [table, roles] = map_new_actions(old_table, old_roles, fresh, 4);

  EXPECT_EQ(table.action_count(), 4);
  EXPECT_EQ(table.row(3), old_table.row(1));
  for (int a = 0; a < 3; ++a) EXPECT_EQ(table.row(a), old_table.row(a));

  EXPECT_EQ(roles.count(), old_roles.count());
  EXPECT_TRUE(roles.contains(0, 3));  // both roles hold action 1
  EXPECT_TRUE(roles.contains(1, 3));
  // Old memberships untouched.
  for (int j = 0; j < 2; ++j)
    for (int a = 0; a < 3; ++a) EXPECT_EQ(roles.contains(j, a), old_roles.contains(j, a));
}

TEST(MapNewActions, MeanOfSimilarSetAndIntersectionMembership) {
  ActionReprTable old_table = make_table({{2.0, 0.0}, {0.0, 2.0}, {-3.0, -3.0}});
  RoleSet old_roles(3, {{0, 1}, {2, 0}});
  // New action 3 is similar to old {0, 1}; new action 4 to old {2}.
  const std::vector<int> fresh = {0, 0, 1, 0, 1};
  auto [table, roles] = map_new_actions(old_table, old_roles, fresh, 5);

  EXPECT_EQ(roles.count(), 2);  // never changes
  EXPECT_EQ(table.row(3), (std::vector<double>{1.0, 1.0}));
  EXPECT_EQ(table.row(4), (std::vector<double>{-3.0, -3.0}));
  // Action 3's similar set {0,1} meets both roles; action 4's {2} only role 1.
  EXPECT_TRUE(roles.contains(0, 3));
  EXPECT_TRUE(roles.contains(1, 3));
  EXPECT_FALSE(roles.contains(0, 4));
  EXPECT_TRUE(roles.contains(1, 4));
}

TEST(MapNewActions, UnmappableActionRejected) {
  ActionReprTable old_table = make_table({{1.0}, {2.0}});
  RoleSet old_roles(2, {{0, 1}});
  EXPECT_THROW(map_new_actions(old_table, old_roles, {0, 1, 7}, 3), std::runtime_error);
  EXPECT_THROW(map_new_actions(old_table, old_roles, {0, 1}, 1), std::runtime_error);
  EXPECT_THROW(map_new_actions(old_table, old_roles, {0, 1}, 3), std::runtime_error);
}

TEST(ClusterReport, ListsRolesAndDistances) {
  ActionReprTable table = make_table({{0.0, 0.0}, {3.0, 4.0}});
  RoleSet roles(2, {{0, 1}});
  const std::string report = cluster_report(table, roles);
  EXPECT_NE(report.find("roles: 1"), std::string::npos);
  EXPECT_NE(report.find("actions: 2"), std::string::npos);
  EXPECT_NE(report.find("5.0000"), std::string::npos);  // |(0,0)-(3,4)| = 5
}
