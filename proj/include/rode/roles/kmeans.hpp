#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "rode/core/rng.hpp"

namespace rode {

struct KMeansResult {
  std::vector<int> assignment;               // point -> cluster id in [0, k)
  std::vector<std::vector<double>> centroids;  // k x dim
  double sse = std::numeric_limits<double>::infinity();
};

namespace detail {

inline double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

inline KMeansResult lloyd_once(const std::vector<std::vector<double>>& points, int k, Rng& rng,
                               int max_iters) {
  const int n = static_cast<int>(points.size());
  const std::size_t dim = points[0].size();

  // k-means++ seeding: first centroid uniform, the rest D^2-weighted.
  std::vector<std::vector<double>> centroids;
  centroids.push_back(points[static_cast<std::size_t>(rng.next_int(n))]);
  std::vector<double> d2(static_cast<std::size_t>(n));
  while (static_cast<int>(centroids.size()) < k) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centroids)
        best = std::min(best, sq_dist(points[static_cast<std::size_t>(i)], c));
      d2[static_cast<std::size_t>(i)] = best;
      total += best;
    }
    // All points coincide with a centroid: fall back to uniform choice.
    const int pick = total > 0.0 ? rng.weighted_index(d2) : rng.next_int(n);
    centroids.push_back(points[static_cast<std::size_t>(pick)]);
  }

  std::vector<int> assign(static_cast<std::size_t>(n), -1);
  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      int best_c = 0;
      double best_d = sq_dist(points[static_cast<std::size_t>(i)], centroids[0]);
      for (int c = 1; c < k; ++c) {
        const double d = sq_dist(points[static_cast<std::size_t>(i)], centroids[static_cast<std::size_t>(c)]);
        if (d < best_d) {  // strict: ties stay with the lowest index
          best_d = d;
          best_c = c;
        }
      }
      if (assign[static_cast<std::size_t>(i)] != best_c) {
        assign[static_cast<std::size_t>(i)] = best_c;
        changed = true;
      }
    }
    if (!changed) break;
    for (int c = 0; c < k; ++c) {
      std::vector<double> mean(dim, 0.0);
      int count = 0;
      for (int i = 0; i < n; ++i) {
        if (assign[static_cast<std::size_t>(i)] != c) continue;
        ++count;
        for (std::size_t j = 0; j < dim; ++j) mean[j] += points[static_cast<std::size_t>(i)][j];
      }
      if (count > 0) {
        for (std::size_t j = 0; j < dim; ++j) mean[j] /= count;
        centroids[static_cast<std::size_t>(c)] = std::move(mean);
      }
      // Empty cluster: centroid stays put; it may capture points later or be
      // dropped by the caller at the end.
    }
  }

  KMeansResult res;
  res.assignment = std::move(assign);
  res.centroids = std::move(centroids);
  res.sse = 0.0;
  for (int i = 0; i < n; ++i)
    res.sse += sq_dist(points[static_cast<std::size_t>(i)],
                       res.centroids[static_cast<std::size_t>(res.assignment[static_cast<std::size_t>(i)])]);
  return res;
}

}  // namespace detail

/// Lloyd's algorithm with k-means++ seeding; `restarts` independent runs,
/// best within-cluster SSE wins. Ties in point assignment go to the
/// lowest-index cluster, making results deterministic given the generator.
inline KMeansResult kmeans(const std::vector<std::vector<double>>& points, int k, Rng& rng,
                           int restarts = 10, int max_iters = 100) {
  const int n = static_cast<int>(points.size());
  if (n == 0) throw std::runtime_error("kmeans: no points");
  if (k < 1) throw std::runtime_error("kmeans: k must be >= 1");
  if (k > n)
    throw std::runtime_error("kmeans: k = " + std::to_string(k) + " exceeds point count " +
                             std::to_string(n));
  for (const auto& p : points)
    if (p.size() != points[0].size()) throw std::runtime_error("kmeans: ragged points");

  KMeansResult best;
  for (int r = 0; r < restarts; ++r) {
    KMeansResult res = detail::lloyd_once(points, k, rng, max_iters);
    if (res.sse < best.sse) best = std::move(res);
  }
  return best;
}

/// Adjusted Rand index between two labelings; 1.0 iff identical partitions
/// up to relabeling.
inline double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw std::runtime_error("adjusted_rand_index: length mismatch");
  const int n = static_cast<int>(a.size());
  if (n == 0) throw std::runtime_error("adjusted_rand_index: empty labelings");
  int ka = 0, kb = 0;
  for (int x : a) ka = std::max(ka, x + 1);
  for (int x : b) kb = std::max(kb, x + 1);
  std::vector<std::vector<long long>> table(static_cast<std::size_t>(ka),
                                            std::vector<long long>(static_cast<std::size_t>(kb), 0));
  for (int i = 0; i < n; ++i)
    ++table[static_cast<std::size_t>(a[static_cast<std::size_t>(i)])]
           [static_cast<std::size_t>(b[static_cast<std::size_t>(i)])];
  auto choose2 = [](long long m) { return m * (m - 1) / 2; };
  long long sum_ij = 0, sum_a = 0, sum_b = 0;
  for (int i = 0; i < ka; ++i) {
    long long row = 0;
    for (int j = 0; j < kb; ++j) {
      sum_ij += choose2(table[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
      row += table[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    sum_a += choose2(row);
  }
  for (int j = 0; j < kb; ++j) {
    long long col = 0;
    for (int i = 0; i < ka; ++i) col += table[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    sum_b += choose2(col);
  }
  const double total = static_cast<double>(choose2(n));
  if (total == 0.0) return 1.0;  // a single point: both labelings are trivially identical
  const double expected = static_cast<double>(sum_a) * static_cast<double>(sum_b) / total;
  const double maximum = 0.5 * static_cast<double>(sum_a + sum_b);
  if (maximum == expected) return 1.0;  // both labelings trivial (single class)
  return (static_cast<double>(sum_ij) - expected) / (maximum - expected);
}

}  // namespace rode
