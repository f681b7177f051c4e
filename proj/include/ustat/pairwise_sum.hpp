#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <span>

namespace ustat {

/// Streaming pairwise (tree) summation.
///
/// Leaves are grouped in blocks of 8 that are summed naively; completed
/// blocks are merged like a binary counter, so the result is the same tree
/// a recursive pairwise sum over the whole sequence would build. Memory is
/// one slot per tree level.
class PairwiseSum {
 public:
  void add(double x) {
    block_ += x;
    if (++in_block_ < kBlock) return;
    carry(block_);
    block_ = 0.0;
    in_block_ = 0;
  }

  PairwiseSum& operator+=(double x) {
    add(x);
    return *this;
  }

  [[nodiscard]] double total() const {
    double s = block_;
    std::uint64_t occ = occupied_;
    while (occ != 0) {
      const int level = std::countr_zero(occ);
      s += levels_[static_cast<std::size_t>(level)];
      occ &= occ - 1;
    }
    return s;
  }

  [[nodiscard]] std::uint64_t count() const { return (blocks_ * kBlock) + in_block_; }

 private:
  static constexpr unsigned kBlock = 8;

  void carry(double v) {
    ++blocks_;
    std::size_t level = 0;
    while ((occupied_ >> level) & 1U) {
      v += levels_[level];
      occupied_ &= ~(std::uint64_t{1} << level);
      ++level;
    }
    levels_[level] = v;
    occupied_ |= std::uint64_t{1} << level;
  }

  std::array<double, 64> levels_{};
  std::uint64_t occupied_ = 0;
  std::uint64_t blocks_ = 0;
  double block_ = 0.0;
  unsigned in_block_ = 0;
};

inline double pairwise_sum(std::span<const double> xs) {
  if (xs.size() <= 8) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  const std::size_t half = xs.size() / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

}  // namespace ustat
