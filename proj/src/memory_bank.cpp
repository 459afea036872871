#include "grotta/memory_bank.hpp"

#include "grotta/errors.hpp"

#include <string>

namespace grotta {

MemoryBank::MemoryBank(std::size_t capacity, std::size_t num_classes)
    : capacity_(capacity),
      per_class_cap_(num_classes == 0 ? 0 : (capacity + num_classes - 1) / num_classes),
      queues_(num_classes) {
  if (num_classes < 2)
    throw InvalidParameter("memory bank needs at least two classes");
  if (capacity < 1)
    throw InvalidParameter("memory bank capacity must be positive");
}

void MemoryBank::insert(std::span<const double> x, std::size_t predicted) {
  if (predicted >= queues_.size())
    throw InvalidClass("predicted class " + std::to_string(predicted) +
                       " outside [0, " + std::to_string(queues_.size()) + ")");
  auto &q = queues_[predicted];
  while (q.size() >= per_class_cap_) {
    evicted_.push_back(q.front().arrival);
    q.pop_front();
    --total_;
  }
  q.push_back({Vector(x.begin(), x.end()), predicted, next_arrival_++});
  ++total_;
}

std::vector<BankSample> MemoryBank::sample_batch(std::size_t count,
                                                 RandomSource &rng) const {
  if (total_ == 0)
    throw EmptyBank("cannot sample from an empty memory bank");
  std::vector<BankSample> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    std::size_t pos = rng.index(total_);
    for (const auto &q : queues_) {
      if (pos < q.size()) {
        out.push_back(q[pos]);
        break;
      }
      pos -= q.size();
    }
  }
  return out;
}

Matrix MemoryBank::sample_matrix(std::size_t count, RandomSource &rng) const {
  const auto samples = sample_batch(count, rng);
  std::vector<Vector> rows;
  rows.reserve(samples.size());
  for (const auto &s : samples)
    rows.push_back(s.x);
  return Matrix::from_rows(rows);
}

} // namespace grotta
