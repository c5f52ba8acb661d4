#include "ncp/partition.hpp"

#include <algorithm>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "ncp/errors.hpp"

namespace ncp {

Assignment Assignment::from_labels(std::vector<int> zero_based) {
  int next = 0;
  for (std::size_t i = 0; i < zero_based.size(); ++i) {
    const int c = zero_based[i];
    if (c < 0 || c > next) {
      throw ConfigError("assignment is not canonical at position " + std::to_string(i + 1));
    }
    if (c == next) ++next;
  }
  Assignment a;
  a.labels_ = std::move(zero_based);
  a.num_clusters_ = next;
  return a;
}

Assignment Assignment::canonicalize(std::span<const int> labels) {
  std::unordered_map<int, int> remap;
  std::vector<int> out;
  out.reserve(labels.size());
  for (int c : labels) {
    auto [it, inserted] = remap.try_emplace(c, static_cast<int>(remap.size()));
    out.push_back(it->second);
  }
  Assignment a;
  a.labels_ = std::move(out);
  a.num_clusters_ = static_cast<int>(remap.size());
  return a;
}

Assignment Assignment::parse(const std::string& text) {
  std::istringstream in(text);
  std::vector<int> labels;
  long long v;
  while (in >> v) {
    if (v < 1) throw ConfigError("assignment labels are one-based");
    labels.push_back(static_cast<int>(v - 1));
  }
  if (!in.eof()) throw ConfigError("malformed assignment: '" + text + "'");
  return from_labels(std::move(labels));
}

std::vector<int> Assignment::cluster_sizes() const {
  std::vector<int> sizes(static_cast<std::size_t>(num_clusters_), 0);
  for (int c : labels_) ++sizes[static_cast<std::size_t>(c)];
  return sizes;
}

Assignment Assignment::prefix(std::size_t n) const {
  if (n > labels_.size()) throw ConfigError("prefix longer than assignment");
  std::vector<int> head(labels_.begin(), labels_.begin() + static_cast<std::ptrdiff_t>(n));
  Assignment a;
  a.num_clusters_ = head.empty() ? 0 : *std::max_element(head.begin(), head.end()) + 1;
  a.labels_ = std::move(head);
  return a;
}

Assignment Assignment::permuted(std::span<const int> order) const {
  if (order.size() != labels_.size()) throw ConfigError("permutation length mismatch");
  std::vector<int> moved(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    moved[i] = labels_[static_cast<std::size_t>(order[i])];
  }
  return canonicalize(moved);
}

std::string Assignment::to_string() const {
  std::string s;
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (i) s += ' ';
    s += std::to_string(labels_[i] + 1);
  }
  return s;
}

std::uint64_t bell_number(int n) {
  if (n < 0) throw ConfigError("bell_number: negative n");
  std::vector<std::uint64_t> row{1};
  for (int i = 0; i < n; ++i) {
    std::vector<std::uint64_t> next{row.back()};
    for (std::uint64_t v : row) next.push_back(next.back() + v);
    row = std::move(next);
  }
  return row.front();
}

namespace {

// Restricted-growth-string walk; `labels[0..fixed)` stay untouched.
void walk(std::vector<int>& labels, std::size_t pos, int k,
          const std::function<void(std::span<const int>)>& visit) {
  if (pos == labels.size()) {
    visit(labels);
    return;
  }
  for (int c = 0; c <= k; ++c) {
    labels[pos] = c;
    walk(labels, pos + 1, c == k ? k + 1 : k, visit);
  }
}

}  // namespace

void for_each_assignment(int n, const std::function<void(std::span<const int>)>& visit) {
  if (n <= 0) return;
  std::vector<int> labels(static_cast<std::size_t>(n), 0);
  walk(labels, 1, 1, visit);
}

std::vector<Assignment> enumerate_assignments(int n) {
  if (n > kEnumerationGuard) {
    throw GuardError("enumeration guard: n=" + std::to_string(n) + " exceeds " +
                     std::to_string(kEnumerationGuard));
  }
  std::vector<Assignment> out;
  if (n > 0) out.reserve(static_cast<std::size_t>(bell_number(n)));
  for_each_assignment(n, [&](std::span<const int> labels) {
    out.push_back(Assignment::from_labels({labels.begin(), labels.end()}));
  });
  return out;
}

void for_each_completion(std::span<const int> prefix, int total,
                         const std::function<void(std::span<const int>)>& visit) {
  if (total < static_cast<int>(prefix.size())) throw ConfigError("completion shorter than prefix");
  if (prefix.empty()) {
    for_each_assignment(total, visit);
    return;
  }
  const Assignment checked = Assignment::from_labels({prefix.begin(), prefix.end()});
  std::vector<int> labels(static_cast<std::size_t>(total), 0);
  std::copy(prefix.begin(), prefix.end(), labels.begin());
  walk(labels, prefix.size(), checked.num_clusters(), visit);
}

std::uint64_t completion_count(int k, int tail) {
  constexpr std::uint64_t kMax = std::numeric_limits<std::uint64_t>::max();
  // counts[j] = completions of `t` points starting from k + j clusters.
  std::vector<std::uint64_t> counts(static_cast<std::size_t>(tail) + 1, 1);
  for (int t = 1; t <= tail; ++t) {
    for (int j = 0; j + t <= tail; ++j) {
      const std::uint64_t stay = counts[static_cast<std::size_t>(j)];
      const std::uint64_t fresh = counts[static_cast<std::size_t>(j) + 1];
      const auto kk = static_cast<std::uint64_t>(k + j);
      std::uint64_t v = kMax;
      if (kk == 0 || stay <= kMax / kk) {
        const std::uint64_t a = kk * stay;
        v = a > kMax - fresh ? kMax : a + fresh;
      }
      counts[static_cast<std::size_t>(j)] = v;
    }
  }
  return counts[0];
}

}  // namespace ncp
