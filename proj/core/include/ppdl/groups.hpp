#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace ppdl {

using NodeId = std::uint32_t;
using ArmIndex = std::uint64_t;

// Number of M-subsets of an n-element neighborhood, binomial(n, m).
// Throws DomainError if m > n and CapacityError if the result does not fit.
std::uint64_t count_groups(std::uint64_t n, std::uint64_t m);

// Number of groups sharing exactly `u` members with a fixed group in a fully
// connected network of `n` nodes (the fixed group's owner included):
// binomial(m, u) * binomial(n - m - 1, m - u). Requires u < m and n > 2m.
std::uint64_t overlap_class_count(std::uint64_t n, std::uint64_t m,
                                  std::uint64_t u);

// A candidate collaborator set. Members are strictly increasing node ids.
struct Group {
  std::vector<NodeId> members;

  std::size_t size() const { return members.size(); }
  friend bool operator==(const Group&, const Group&) = default;
};

// |a ∩ b| over two sorted member lists.
std::size_t overlap(const Group& a, const Group& b);

// Bijection between arm indices [0, num_arms) and the M-subsets of a node's
// neighborhood, in lexicographic order over the sorted neighborhood.
// Immutable after construction.
class GroupCatalog {
 public:
  GroupCatalog(NodeId owner, std::vector<NodeId> neighborhood,
               std::size_t group_size);

  NodeId owner() const { return owner_; }
  std::span<const NodeId> neighborhood() const { return neighborhood_; }
  std::size_t group_size() const { return group_size_; }
  ArmIndex num_arms() const { return num_arms_; }

  Group unrank(ArmIndex arm) const;
  ArmIndex rank(const Group& group) const;

  // Positions of the arm's members within neighborhood(); `out` must hold
  // group_size() entries.
  void unrank_positions(ArmIndex arm, std::span<std::size_t> out) const;

  // Advances `positions` to the lexicographically next combination. Returns
  // false after the last one.
  bool next_positions(std::span<std::size_t> positions) const;

  std::size_t overlap(ArmIndex a, ArmIndex b) const;

 private:
  std::uint64_t choose(std::size_t n, std::size_t k) const;

  NodeId owner_;
  std::vector<NodeId> neighborhood_;
  std::size_t group_size_;
  ArmIndex num_arms_;
  // binom_[n * (group_size_ + 1) + k] for n <= |neighborhood|, k <= M,
  // saturated at UINT64_MAX where it does not fit.
  std::vector<std::uint64_t> binom_;
};

}  // namespace ppdl
