#include <gtest/gtest.h>

#include <atomic>
#include <set>
#include <stdexcept>
#include <vector>

#include "anthro/core.hpp"
#include "anthro/rng.hpp"

using namespace anthro;

TEST(Rng, DerivedSeedsDifferByEveryKeyPart) {
  const auto base = derive_seed(7, 1, "background");
  EXPECT_NE(base, derive_seed(8, 1, "background"));
  EXPECT_NE(base, derive_seed(7, 2, "background"));
  EXPECT_NE(base, derive_seed(7, 1, "complexity"));
  EXPECT_NE(base, derive_seed(7, 1, "background", 1));
  EXPECT_EQ(base, derive_seed(7, 1, "background"));
}

TEST(Rng, EnginesReproduce) {
  auto a = make_engine(3, 4, "x");
  auto b = make_engine(3, 4, "x");
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a(), b());
}

TEST(Rng, NoCollisionsOverManyIds) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t id = 0; id < 10000; ++id) seen.insert(derive_seed(1, id, "decision"));
  EXPECT_EQ(seen.size(), 10000u);
}

TEST(ParallelFor, VisitsEveryIndexOnce) {
  for (unsigned threads : {1u, 2u, 7u}) {
    std::vector<std::atomic<int>> hits(1000);
    parallel_for(hits.size(), threads, [&](std::size_t i) { hits[i]++; });
    for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
  }
}

TEST(ParallelFor, RethrowsWorkerException) {
  EXPECT_THROW(parallel_for(100, 4,
                            [](std::size_t i) {
                              if (i == 42) throw DataError("boom");
                            }),
               DataError);
}

TEST(Label, RoundTrip) {
  EXPECT_EQ(label_from_string(to_string(Label::lesion)), Label::lesion);
  EXPECT_EQ(label_from_string(to_string(Label::healthy)), Label::healthy);
  EXPECT_THROW(label_from_string("maybe"), DataError);
}
