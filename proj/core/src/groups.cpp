#include "ppdl/groups.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "ppdl/errors.hpp"

namespace ppdl {

namespace {

constexpr std::uint64_t kMax = std::numeric_limits<std::uint64_t>::max();

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
  const unsigned __int128 p = static_cast<unsigned __int128>(a) * b;
  if (p > kMax) {
    throw CapacityError("group count overflows 64-bit representation");
  }
  return static_cast<std::uint64_t>(p);
}

}  // namespace

std::uint64_t count_groups(std::uint64_t n, std::uint64_t m) {
  if (m > n) {
    throw DomainError("count_groups: group size " + std::to_string(m) +
                      " exceeds neighborhood size " + std::to_string(n));
  }
  const std::uint64_t k = std::min(m, n - m);
  // result * (n - k + i) / i stays exact: the running value is always
  // binomial(n - k + i, i).
  unsigned __int128 result = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    result = result * (n - k + i) / i;
    if (result > kMax) {
      throw CapacityError("count_groups(" + std::to_string(n) + ", " +
                          std::to_string(m) + ") overflows 64 bits");
    }
  }
  return static_cast<std::uint64_t>(result);
}

std::uint64_t overlap_class_count(std::uint64_t n, std::uint64_t m,
                                  std::uint64_t u) {
  if (m == 0 || u >= m) {
    throw DomainError("overlap_class_count: overlap must lie in [0, m-1]");
  }
  if (n <= 2 * m) {
    throw DomainError("overlap_class_count: requires n > 2m");
  }
  return checked_mul(count_groups(m, u), count_groups(n - m - 1, m - u));
}

std::size_t overlap(const Group& a, const Group& b) {
  std::size_t count = 0;
  auto i = a.members.begin();
  auto j = b.members.begin();
  while (i != a.members.end() && j != b.members.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++count;
      ++i;
      ++j;
    }
  }
  return count;
}

GroupCatalog::GroupCatalog(NodeId owner, std::vector<NodeId> neighborhood,
                           std::size_t group_size)
    : owner_(owner),
      neighborhood_(std::move(neighborhood)),
      group_size_(group_size) {
  if (group_size_ == 0) {
    throw DomainError("GroupCatalog: group size must be positive");
  }
  std::sort(neighborhood_.begin(), neighborhood_.end());
  if (std::adjacent_find(neighborhood_.begin(), neighborhood_.end()) !=
      neighborhood_.end()) {
    throw DomainError("GroupCatalog: duplicate node in neighborhood of " +
                      std::to_string(owner_));
  }
  if (std::binary_search(neighborhood_.begin(), neighborhood_.end(), owner_)) {
    throw DomainError("GroupCatalog: node " + std::to_string(owner_) +
                      " listed in its own neighborhood");
  }
  if (neighborhood_.size() < group_size_) {
    throw DomainError("GroupCatalog: node " + std::to_string(owner_) +
                      " has " + std::to_string(neighborhood_.size()) +
                      " neighbors, fewer than group size " +
                      std::to_string(group_size_));
  }
  num_arms_ = count_groups(neighborhood_.size(), group_size_);

  const std::size_t n = neighborhood_.size();
  const std::size_t w = group_size_ + 1;
  binom_.assign((n + 1) * w, 0);
  for (std::size_t r = 0; r <= n; ++r) {
    binom_[r * w] = 1;
    for (std::size_t k = 1; k <= std::min(r, group_size_); ++k) {
      const std::uint64_t a = binom_[(r - 1) * w + k - 1];
      const std::uint64_t b = k <= r - 1 ? binom_[(r - 1) * w + k] : 0;
      binom_[r * w + k] = (a > kMax - b) ? kMax : a + b;
    }
  }
}

std::uint64_t GroupCatalog::choose(std::size_t n, std::size_t k) const {
  if (k > n) return 0;
  return binom_[n * (group_size_ + 1) + k];
}

void GroupCatalog::unrank_positions(ArmIndex arm,
                                    std::span<std::size_t> out) const {
  if (arm >= num_arms_) {
    throw IndexError("arm " + std::to_string(arm) + " out of range [0, " +
                     std::to_string(num_arms_) + ")");
  }
  const std::size_t n = neighborhood_.size();
  std::size_t next = 0;
  for (std::size_t slot = 0; slot < group_size_; ++slot) {
    const std::size_t remaining = group_size_ - slot - 1;
    for (std::size_t x = next;; ++x) {
      // Combinations whose slot-th smallest position is x.
      const std::uint64_t block = choose(n - x - 1, remaining);
      if (arm < block) {
        out[slot] = x;
        next = x + 1;
        break;
      }
      arm -= block;
    }
  }
}

bool GroupCatalog::next_positions(std::span<std::size_t> positions) const {
  const std::size_t n = neighborhood_.size();
  const std::size_t m = group_size_;
  for (std::size_t i = m; i-- > 0;) {
    if (positions[i] < n - m + i) {
      ++positions[i];
      for (std::size_t j = i + 1; j < m; ++j) positions[j] = positions[j - 1] + 1;
      return true;
    }
  }
  return false;
}

Group GroupCatalog::unrank(ArmIndex arm) const {
  std::vector<std::size_t> pos(group_size_);
  unrank_positions(arm, pos);
  Group g;
  g.members.reserve(group_size_);
  for (auto p : pos) g.members.push_back(neighborhood_[p]);
  return g;
}

ArmIndex GroupCatalog::rank(const Group& group) const {
  if (group.members.size() != group_size_) {
    throw DomainError("rank: group has " +
                      std::to_string(group.members.size()) +
                      " members, expected " + std::to_string(group_size_));
  }
  const std::size_t n = neighborhood_.size();
  ArmIndex arm = 0;
  std::size_t next = 0;
  for (std::size_t slot = 0; slot < group_size_; ++slot) {
    const NodeId id = group.members[slot];
    auto it = std::lower_bound(neighborhood_.begin(), neighborhood_.end(), id);
    if (it == neighborhood_.end() || *it != id) {
      throw DomainError("rank: node " + std::to_string(id) +
                        " is not in the neighborhood of " +
                        std::to_string(owner_));
    }
    const auto pos = static_cast<std::size_t>(it - neighborhood_.begin());
    if (pos < next) {
      throw DomainError("rank: group members must be strictly increasing");
    }
    const std::size_t remaining = group_size_ - slot - 1;
    for (std::size_t x = next; x < pos; ++x) arm += choose(n - x - 1, remaining);
    next = pos + 1;
  }
  return arm;
}

std::size_t GroupCatalog::overlap(ArmIndex a, ArmIndex b) const {
  return ppdl::overlap(unrank(a), unrank(b));
}

}  // namespace ppdl
