#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace ncp {

/// Largest N for which whole-partition enumeration is allowed (Bell(12) =
/// 4,213,597).
inline constexpr int kEnumerationGuard = 12;

/// Cluster assignment of N points in canonical first-appearance form.
///
/// Labels are stored zero-based: labels()[0] == 0 and every label is at most
/// one more than the maximum of the labels before it. Text formats use the
/// one-based convention (first point in cluster 1).
class Assignment {
 public:
  Assignment() = default;

  /// Validates canonical form; throws ConfigError otherwise.
  static Assignment from_labels(std::vector<int> zero_based);
  /// Relabels any label sequence by order of first appearance.
  static Assignment canonicalize(std::span<const int> labels);
  /// Parses whitespace separated one-based labels.
  static Assignment parse(const std::string& text);

  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }
  int num_clusters() const { return num_clusters_; }
  int operator[](std::size_t i) const { return labels_[i]; }
  const std::vector<int>& labels() const { return labels_; }

  /// Cluster sizes n_k, k = 0..K-1.
  std::vector<int> cluster_sizes() const;
  /// Assignment of the first `n` points (already canonical).
  Assignment prefix(std::size_t n) const;
  /// Labels after reordering the points: point i of the result is point
  /// order[i] of this assignment. The result is re-canonicalized.
  Assignment permuted(std::span<const int> order) const;

  /// One-based labels separated by single spaces.
  std::string to_string() const;

  friend bool operator==(const Assignment&, const Assignment&) = default;
  friend auto operator<=>(const Assignment& a, const Assignment& b) {
    return a.labels_ <=> b.labels_;
  }

 private:
  std::vector<int> labels_;
  int num_clusters_ = 0;
};

/// Bell number B_n by the Bell-triangle recurrence (exact for n <= 25).
std::uint64_t bell_number(int n);

/// Visits every canonical assignment of n points in lexicographic order.
/// The visitor receives zero-based labels; `n == 0` yields nothing.
void for_each_assignment(int n, const std::function<void(std::span<const int>)>& visit);

/// All canonical assignments of n points, lexicographically ordered.
/// Throws GuardError for n > kEnumerationGuard.
std::vector<Assignment> enumerate_assignments(int n);

/// Visits every canonical completion of a canonical prefix to `total`
/// points. The visitor receives the full zero-based label sequence.
void for_each_completion(std::span<const int> prefix, int total,
                         const std::function<void(std::span<const int>)>& visit);

/// Number of completions of a prefix with `k` clusters by `tail` more points,
/// saturating at UINT64_MAX.
std::uint64_t completion_count(int k, int tail);

}  // namespace ncp
