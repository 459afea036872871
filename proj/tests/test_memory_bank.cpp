#include "grotta/errors.hpp"
#include "grotta/memory_bank.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>

using namespace grotta;

namespace {

Vector tag(double v) { return Vector{v}; }

} // namespace

TEST(MemoryBank, PerClassCapIsCeiling) {
  EXPECT_EQ(MemoryBank(8, 4).per_class_cap(), 2u);
  EXPECT_EQ(MemoryBank(10, 10).per_class_cap(), 1u);
  EXPECT_EQ(MemoryBank(1024, 100).per_class_cap(), 11u);
  EXPECT_EQ(MemoryBank(1024, 8).per_class_cap(), 128u);
  EXPECT_THROW(MemoryBank(8, 1), InvalidParameter);
  EXPECT_THROW(MemoryBank(0, 4), InvalidParameter);
}

TEST(MemoryBank, FifoEvictionTrace) {
  MemoryBank bank(8, 4);
  bank.insert(tag(1), 0);
  bank.insert(tag(2), 0);
  bank.insert(tag(3), 0);
  const auto &q = bank.queue(0);
  ASSERT_EQ(q.size(), 2u);
  EXPECT_EQ(q[0].x[0], 2.0);
  EXPECT_EQ(q[1].x[0], 3.0);
  EXPECT_EQ(bank.evicted(), (std::vector<std::uint64_t>{0}));
}

TEST(MemoryBank, CapOfOneReplaces) {
  MemoryBank bank(10, 10);
  bank.insert(tag(1), 3);
  bank.insert(tag(2), 3);
  ASSERT_EQ(bank.queue(3).size(), 1u);
  EXPECT_EQ(bank.queue(3)[0].x[0], 2.0);
  EXPECT_EQ(bank.size(), 1u);
}

TEST(MemoryBank, FillsWithoutEviction) {
  MemoryBank bank(12, 4);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 4; ++c)
      bank.insert(tag(static_cast<double>(r * 4 + c)), c);
  EXPECT_TRUE(bank.evicted().empty());
  EXPECT_EQ(bank.size(), 12u);
  for (std::size_t c = 0; c < 4; ++c)
    EXPECT_EQ(bank.queue(c).size(), 3u);
}

TEST(MemoryBank, InvalidClass) {
  MemoryBank bank(8, 4);
  EXPECT_THROW(bank.insert(tag(0), 4), InvalidClass);
}

TEST(MemoryBank, EmptyBank) {
  MemoryBank bank(8, 4);
  RandomSource rng(1);
  EXPECT_THROW(bank.sample_batch(3, rng), EmptyBank);
  EXPECT_THROW(bank.sample_matrix(3, rng), EmptyBank);
}

TEST(MemoryBank, SingleSampleRepeats) {
  MemoryBank bank(8, 4);
  bank.insert(Vector{7, 8}, 2);
  RandomSource rng(1);
  auto batch = bank.sample_batch(3, rng);
  ASSERT_EQ(batch.size(), 3u);
  for (const auto &s : batch) {
    EXPECT_EQ(s.x, (Vector{7, 8}));
    EXPECT_EQ(s.label, 2u);
  }
  Matrix m = bank.sample_matrix(3, rng);
  EXPECT_EQ(m, (Matrix{{7, 8}, {7, 8}, {7, 8}}));
}

TEST(MemoryBank, SameSeedSameBatch) {
  MemoryBank bank(40, 4);
  for (int i = 0; i < 40; ++i)
    bank.insert(tag(i), static_cast<std::size_t>(i % 4));
  RandomSource a(5), b(5);
  EXPECT_EQ(bank.sample_matrix(16, a), bank.sample_matrix(16, b));
}

TEST(MemoryBank, BalancedBankSamplesClassesUniformly) {
  const std::size_t classes = 5;
  MemoryBank bank(50, classes);
  for (int i = 0; i < 50; ++i)
    bank.insert(tag(i), static_cast<std::size_t>(i) % classes);
  RandomSource rng(7);
  const int n = 10000;
  std::vector<int> counts(classes, 0);
  for (const auto &s : bank.sample_batch(n, rng))
    ++counts[s.label];
  const double p = 1.0 / classes;
  const double sigma = std::sqrt(n * p * (1 - p));
  for (int c : counts)
    EXPECT_NEAR(c, n * p, 3 * sigma);
}

// Random insertion streams: per-class cap, FIFO order, evictions form a
// prefix of each class's insertion order, stored set is the suffix.
TEST(MemoryBankProperty, CapAndFifoUnderRandomStreams) {
  for (int trial = 0; trial < 20; ++trial) {
    RandomSource rng(100 + trial);
    const std::size_t classes = 2 + rng.index(12);
    const std::size_t capacity = 1 + rng.index(60);
    MemoryBank bank(capacity, classes);
    const std::size_t cap = (capacity + classes - 1) / classes;
    std::vector<std::vector<std::uint64_t>> inserted(classes);
    const bool skewed = trial % 2 == 0;
    for (std::uint64_t step = 0; step < 1000; ++step) {
      const std::size_t c = skewed && rng.uniform() < 0.7 ? 0 : rng.index(classes);
      bank.insert(tag(static_cast<double>(step)), c);
      inserted[c].push_back(step);
      for (std::size_t k = 0; k < classes; ++k)
        ASSERT_LE(bank.queue(k).size(), cap);
    }
    EXPECT_LE(bank.size(), classes * cap);
    std::map<std::uint64_t, std::size_t> evicted_class;
    for (std::size_t c = 0; c < classes; ++c) {
      const auto &q = bank.queue(c);
      const auto &ins = inserted[c];
      const std::size_t kept = std::min(ins.size(), cap);
      ASSERT_EQ(q.size(), kept);
      for (std::size_t i = 0; i < kept; ++i) {
        EXPECT_EQ(q[i].arrival, ins[ins.size() - kept + i]);
        EXPECT_EQ(q[i].label, c);
        if (i > 0) {
          EXPECT_LT(q[i - 1].arrival, q[i].arrival);
        }
      }
      for (std::size_t i = 0; i + kept < ins.size(); ++i)
        evicted_class[ins[i]] = c;
    }
    // evictions, per class, appear in insertion order
    std::vector<std::uint64_t> last(classes, 0);
    std::vector<bool> any(classes, false);
    ASSERT_EQ(bank.evicted().size(), evicted_class.size());
    for (std::uint64_t a : bank.evicted()) {
      ASSERT_TRUE(evicted_class.count(a));
      const std::size_t c = evicted_class[a];
      if (any[c]) {
        EXPECT_LT(last[c], a);
      }
      last[c] = a;
      any[c] = true;
    }
  }
}

TEST(MemoryBankProperty, FullBankIsExactlyUniform) {
  RandomSource rng(3);
  const std::size_t classes = 6;
  MemoryBank bank(60, classes);
  for (int step = 0; step < 2000; ++step)
    bank.insert(tag(step), rng.index(classes));
  for (std::size_t c = 0; c < classes; ++c)
    EXPECT_EQ(bank.queue(c).size(), 10u);
}

TEST(MemoryBankProperty, TotalCanExceedNominalCapacity) {
  MemoryBank bank(1024, 100);
  for (int step = 0; step < 5000; ++step)
    bank.insert(tag(step), static_cast<std::size_t>(step % 100));
  EXPECT_EQ(bank.size(), 1100u);
}
