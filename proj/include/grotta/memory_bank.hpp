#pragma once

// Category-balanced memory bank: one FIFO queue per predicted class, each
// capped at ceil(N / C). A full queue drops its oldest entries before the
// new sample goes in. The cap is per class, so with C not dividing N the
// total can reach C * ceil(N / C), slightly above the nominal N.

#include "grotta/matrix.hpp"
#include "grotta/random.hpp"

#include <cstddef>
#include <cstdint>
#include <deque>
#include <span>
#include <vector>

namespace grotta {

inline constexpr std::size_t kDefaultBankCapacity = 1024;

struct BankSample {
  Vector x;              // raw input features
  std::size_t label = 0; // predicted class
  std::uint64_t arrival = 0;
};

class MemoryBank {
public:
  MemoryBank(std::size_t capacity, std::size_t num_classes);

  // Throws InvalidClass if predicted >= num_classes.
  void insert(std::span<const double> x, std::size_t predicted);

  // `count` draws, uniform with replacement over every stored sample.
  // Throws EmptyBank.
  std::vector<BankSample> sample_batch(std::size_t count, RandomSource &rng) const;
  Matrix sample_matrix(std::size_t count, RandomSource &rng) const;

  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t num_classes() const noexcept { return queues_.size(); }
  std::size_t per_class_cap() const noexcept { return per_class_cap_; }
  std::size_t size() const noexcept { return total_; }
  bool empty() const noexcept { return total_ == 0; }
  const std::deque<BankSample> &queue(std::size_t cls) const { return queues_.at(cls); }
  std::uint64_t inserted() const noexcept { return next_arrival_; }
  // Arrival indices of evicted samples, oldest eviction first.
  const std::vector<std::uint64_t> &evicted() const noexcept { return evicted_; }

private:
  std::size_t capacity_;
  std::size_t per_class_cap_;
  std::vector<std::deque<BankSample>> queues_;
  std::size_t total_ = 0;
  std::uint64_t next_arrival_ = 0;
  std::vector<std::uint64_t> evicted_;
};

} // namespace grotta
