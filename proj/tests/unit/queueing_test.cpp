#include <gtest/gtest.h>

#include <random>

#include "d2dcache/optimize.hpp"
#include "d2dcache/queueing.hpp"

using namespace d2dcache;

TEST(ArrivalRates, AllSelfServed) {
  const auto lib = ContentLibrary::zipf(3, 1.0, 2);
  const auto r = arrival_rates(std::vector<double>(3, 1.0), lib, 4, 2.0);
  EXPECT_EQ(r.zeta_1, 0.0);
  EXPECT_EQ(r.zeta_2, 0.0);
  EXPECT_EQ(r.zeta_3, 2.0);
}

TEST(ArrivalRates, NothingCached) {
  const auto lib = ContentLibrary::zipf(3, 1.0, 2);
  const auto r = arrival_rates(std::vector<double>(3, 0.0), lib, 4, 2.0);
  EXPECT_EQ(r.zeta_1, 0.0);
  EXPECT_NEAR(r.zeta_2, 2.0, 1e-15);
  EXPECT_NEAR(r.zeta_3, 0.0, 1e-15);
}

TEST(ArrivalRates, SingleFileSubstitution) {
  // a library needs M < N, so pad with a file nobody asks for
  ContentLibrary lib({1.0, 0.0}, {5, 5}, 1);
  const auto r = arrival_rates(std::vector<double>{0.5, 0.5}, lib, 2, 2.0);
  EXPECT_DOUBLE_EQ(r.zeta_1, 0.5);
  EXPECT_DOUBLE_EQ(r.zeta_2, 0.5);
  EXPECT_DOUBLE_EQ(r.zeta_3, 1.0);
  EXPECT_THROW(arrival_rates(std::vector<double>{0.5, 0.5}, lib, 0, 2.0), InvalidArgument);
}

TEST(ArrivalRates, SplitSumsAndMonotoneInCaching) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto lib = ContentLibrary::zipf(10, 0.8, 3);
  for (int t = 0; t < 500; ++t) {
    std::vector<double> b(10);
    for (auto& x : b) x = u(rng);
    const int k = 1 + t % 9;
    const auto r = arrival_rates(b, lib, k, 3.0);
    EXPECT_NEAR(r.zeta_1 + r.zeta_2 + r.zeta_3, 3.0, 1e-12);
    EXPECT_GE(r.zeta_1, 0.0);
    const std::size_t i = t % 10;
    auto more = b;
    more[i] = std::min(1.0, b[i] + 0.1);
    const auto s = arrival_rates(more, lib, k, 3.0);
    EXPECT_LE(s.zeta_2, r.zeta_2 + 1e-15);
    EXPECT_GE(s.zeta_3, r.zeta_3 - 1e-15);
  }
}

TEST(ServiceRate, Examples) {
  const CoverageResult half(0.5, CoverageMethod::Analytic);
  EXPECT_DOUBLE_EQ(service_rate(10e6, 1.0, half, 5.0), 1.0);
  EXPECT_DOUBLE_EQ(service_rate(20e6, 1.0, half, 5.0), 2.0 * service_rate(10e6, 1.0, half, 5.0));
  const CoverageResult none(0.0, CoverageMethod::Analytic);
  EXPECT_EQ(service_rate(10e6, 1.0, none, 5.0), 0.0);
  EXPECT_THROW(per_queue_delay(0.1, service_rate(10e6, 1.0, none, 5.0)), UnstableQueue);
  EXPECT_THROW(service_rate(10e6, 1.0, half, 0.0), InvalidArgument);
}

TEST(MeanQueueLength, AgreementAndDisagreement) {
  EXPECT_EQ(mean_queue_length(0.0, 1.0).mm1, 0.0);
  const auto agree = mean_queue_length(1.0, 2.0);
  EXPECT_DOUBLE_EQ(agree.printed_formula, 1.0);
  EXPECT_DOUBLE_EQ(agree.mm1, 1.0);
  EXPECT_FALSE(agree.inconsistent);
  const auto differ = mean_queue_length(0.9, 1.0);
  EXPECT_NEAR(differ.printed_formula, 9.9, 1e-12);
  EXPECT_NEAR(differ.mm1, 9.0, 1e-12);
  EXPECT_TRUE(differ.inconsistent);
  EXPECT_THROW(mean_queue_length(1.0, 1.0), UnstableQueue);
}

TEST(PerQueueDelay, Examples) {
  EXPECT_EQ(per_queue_delay(0.0, 1.0), 1.0);
  EXPECT_EQ(per_queue_delay(1.0, 2.0), 1.0);
  EXPECT_THROW(per_queue_delay(1.0 - 1e-12, 1.0), UnstableQueue);
  try {
    per_queue_delay(3.0, 2.0, 2);
    FAIL();
  } catch (const UnstableQueue& e) {
    EXPECT_EQ(e.queue_index, 2);
  }
}

TEST(PerQueueDelay, ReciprocalOfSpareCapacity) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 1000; ++t) {
    const double mu = 0.1 + 10 * u(rng);
    const double zeta = 0.99 * mu * u(rng);
    EXPECT_NEAR(per_queue_delay(zeta, mu) * (mu - zeta), 1.0, 1e-15);
  }
}

TEST(DelayModel, MatchesWeightedDelay) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto lib = ContentLibrary::zipf(20, 1.0, 4);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> b(20);
    for (auto& x : b) x = u(rng);
    const double w1 = 20e6 * u(rng);
    const auto m = delay_model(b, lib, 6, 2.0, w1, 2e-7, 1.1e-7, 20e6);
    EXPECT_NEAR(m.zeta_1 + m.zeta_2 + m.zeta_3, 2.0, 1e-12);
    EXPECT_DOUBLE_EQ(m.w1 + m.w2, 20e6);
    if (m.stable_1 && m.stable_2) {
      EXPECT_NEAR(m.d_weighted, weighted_delay(b, lib, 6, 2.0, w1, 2e-7, 1.1e-7, 20e6), 1e-12 * m.d_weighted);
    } else {
      EXPECT_TRUE(std::isinf(m.d_weighted));
      EXPECT_THROW(weighted_delay(b, lib, 6, 2.0, w1, 2e-7, 1.1e-7, 20e6), UnstableQueue);
    }
  }
}

TEST(DelayModel, StabilityFlagsFollowLoad) {
  const auto lib = ContentLibrary::zipf(5, 1.0, 2);
  const std::vector<double> b(5, 0.4);
  const auto ok = delay_model(b, lib, 3, 1.0, 10e6, 1e-6, 1e-6, 20e6);
  EXPECT_TRUE(ok.stable_1 && ok.stable_2);
  EXPECT_NEAR(ok.rho_1, ok.zeta_1 / ok.mu_1, 1e-15);
  const auto bad = delay_model(b, lib, 3, 1.0, 0.0, 1e-6, 1e-6, 20e6);
  EXPECT_FALSE(bad.stable_1);
  EXPECT_TRUE(bad.stable_2);
}
