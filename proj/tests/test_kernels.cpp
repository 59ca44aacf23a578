#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sensekern/kernels.hpp"
#include "sensekern/verification.hpp"

using namespace sensekern;

namespace {

CountVector random_doc(std::mt19937_64& rng, std::size_t w, Count max_count) {
  std::uniform_int_distribution<Count> d(0, max_count);
  std::vector<Count> v(w);
  do {
    for (auto& c : v) c = d(rng);
  } while (std::all_of(v.begin(), v.end(), [](Count c) { return c == 0; }));
  return CountVector::from_dense(std::span<const Count>(v));
}

}  // namespace

TEST(CountVector, RejectsUnsortedOrZeroEntries) {
  EXPECT_THROW(CountVector(3, {{2, 1}, {1, 1}}), UsageError);
  EXPECT_THROW(CountVector(3, {{1, 0}}), UsageError);
  EXPECT_THROW(CountVector(3, {{3, 1}}), UsageError);
  EXPECT_THROW(CountVector(0, {}), UsageError);
}

TEST(CountVector, DenseRoundTripAndTotal) {
  const auto v = CountVector::from_dense({0, 3, 0, 2});
  EXPECT_EQ(v.nnz(), 2u);
  EXPECT_EQ(v.total(), 5u);
  EXPECT_EQ(v.dense(), (std::vector<Count>{0, 3, 0, 2}));
  EXPECT_EQ(v.scaled(3).dense(), (std::vector<Count>{0, 9, 0, 6}));
}

TEST(FrequencyVector, EmptyDocumentRejected) {
  EXPECT_THROW(FrequencyVector(CountVector::from_dense({0, 0})), UsageError);
  const std::vector<double> bad{0.5, 0.6};
  EXPECT_THROW(FrequencyVector::from_dense(bad), UsageError);
}

TEST(LogKernelExact, SingleWordVocabularyGivesOne) {
  EXPECT_DOUBLE_EQ(log_kernel_exact(CountVector::from_dense({3}), CountVector::from_dense({5})), 0.0);
  EXPECT_DOUBLE_EQ(log_kernel_exact(CountVector::from_dense({17}), CountVector::from_dense({1})), 0.0);
}

TEST(LogKernelExact, HandCheckedIntegrals) {
  // Independent reference: the simplex quadrature oracle.
  const auto a = CountVector::from_dense({1, 0}), b = CountVector::from_dense({0, 1});
  const double oracle = verify::simplex_integral_oracle(a, b, 4000);
  EXPECT_NEAR(kernel_exact(a, b), oracle, 1e-9 * oracle);
  EXPECT_NEAR(log_kernel_exact(a, b), std::log(1.0 / 6.0), 1e-12);

  const auto c = CountVector::from_dense({1, 1}), d = CountVector::from_dense({2, 0});
  EXPECT_NEAR(kernel_exact(c, d), verify::simplex_integral_oracle(c, d, 4000), 1e-9);
  EXPECT_NEAR(log_kernel_exact(c, d), std::log(0.1), 1e-12);
}

TEST(LogKernelExact, VocabularyMismatchIsUsageError) {
  EXPECT_THROW(log_kernel_exact(CountVector::from_dense({1, 0}), CountVector::from_dense({1, 0, 0})), UsageError);
}

TEST(LogKernelExact, MatchesSumOfLogsOracleOnRandomDocs) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 50; ++t) {
    const auto a = random_doc(rng, 40, 30), b = random_doc(rng, 40, 30);
    const double got = log_kernel_exact(a, b);
    const double want = verify::log_kernel_by_sums(a.dense(), b.dense());
    EXPECT_NEAR(got, want, 1e-10 * std::abs(want));
  }
}

TEST(LogKernelExact, FiniteForHugeDocuments) {
  std::vector<Count> a(100000, 10), b(100000, 0);
  b[0] = 1000000;
  const auto ca = CountVector::from_dense(std::span<const Count>(a));
  const auto cb = CountVector::from_dense(std::span<const Count>(b));
  EXPECT_TRUE(std::isfinite(log_kernel_exact(ca, cb)));
  EXPECT_TRUE(std::isfinite(log_kernel_exact(cb, cb)));
}

TEST(Sensing0, EqualsLogKernelAndIsBitwiseSymmetric) {
  std::mt19937_64 rng(2);
  const auto a = CountVector::from_dense({1, 0}), b = CountVector::from_dense({0, 1});
  EXPECT_NEAR(kernel_sensing0(a, b), -1.791759, 1e-6);
  for (int t = 0; t < 100; ++t) {
    const auto x = random_doc(rng, 25, 9), y = random_doc(rng, 25, 9);
    EXPECT_EQ(kernel_sensing0(x, y), kernel_sensing0(y, x));
  }
}

TEST(Sensing1, DisjointUnitFrequenciesGiveZero) {
  EXPECT_DOUBLE_EQ(kernel_sensing1(CountVector::from_dense({1, 0}), CountVector::from_dense({0, 1}), 1), 0.0);
}

TEST(Sensing1, HalfHalfAtNTwo) {
  const auto a = CountVector::from_dense({1, 1});
  const double want = 2.0 * (std::lgamma(3.0) - 2.0 * std::lgamma(2.0));
  EXPECT_NEAR(kernel_sensing1(a, a, 2), want, 1e-14);
  EXPECT_NEAR(kernel_sensing1(a, a, 2), 2.0 * std::log(2.0), 1e-14);
}

TEST(Sensing1, InvariantToIntegerScaling) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 20; ++t) {
    const auto a = random_doc(rng, 15, 6);
    for (Count c : {1u, 2u, 7u}) {
      for (std::uint32_t n : {1u, 50u, 150u}) {
        EXPECT_NEAR(kernel_sensing1(a, a.scaled(c), n), kernel_sensing1(a, a, n), 1e-12);
      }
    }
  }
}

TEST(Sensing1, EmptyDocumentAndZeroN) {
  const auto a = CountVector::from_dense({1, 1});
  EXPECT_THROW(kernel_sensing1(a, CountVector::from_dense({0, 0}), 5), UsageError);
  EXPECT_THROW(kernel_sensing1(a, a, 0), UsageError);
}

TEST(Sensing2, ConcentratedDocumentResamplesToPointMass) {
  const auto a = CountVector::from_dense({0, 7, 0});
  const auto r = resample_document(a, 500, 1, 99);
  EXPECT_EQ(r.dense(), (std::vector<Count>{0, 500, 0}));
}

TEST(Sensing2, ResampledLengthIsExact) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 20; ++t) {
    const auto a = random_doc(rng, 30, 4);
    EXPECT_EQ(resample_document(a, 137, t, 5).total(), 137u);
  }
}

TEST(Sensing2, DeterministicForFixedSeed) {
  const Document a{"a", CountVector::from_dense({3, 1, 4, 1, 5})};
  const Document b{"b", CountVector::from_dense({2, 7, 1, 8, 2})};
  const double k1 = kernel_sensing2(a, b, 80, 11);
  const double k2 = kernel_sensing2(a, b, 80, 11);
  EXPECT_EQ(std::bit_cast<std::uint64_t>(k1), std::bit_cast<std::uint64_t>(k2));
  EXPECT_EQ(kernel_sensing2(a, b, 80, 11), kernel_sensing2(b, a, 80, 11));
}

TEST(Sensing2, EmptyDocumentIsUsageError) {
  const Document a{"a", CountVector::from_dense({0, 0})};
  const Document b{"b", CountVector::from_dense({1, 0})};
  EXPECT_THROW(kernel_sensing2(a, b, 10, 1), UsageError);
}

TEST(Sensing2, SeedAverageMatchesMonteCarloOracle) {
  // a == b with frequencies (0.5, 0.5); average over 100 seeds vs. the
  // oracle's expectation from 1e5 independent resamples.
  const Document a{"a", CountVector::from_dense({1, 1})};
  const Document b{"b", CountVector::from_dense({1, 1})};
  double sum = 0.0;
  std::vector<double> vals;
  for (std::uint64_t s = 0; s < 100; ++s) vals.push_back(kernel_sensing2(a, b, 50, s));
  for (double v : vals) sum += v;
  const double mean = sum / 100.0;
  double var = 0.0;
  for (double v : vals) var += (v - mean) * (v - mean);
  const double se_ours = std::sqrt(var / 99.0 / 100.0);
  const auto mc = verify::mc_expected_log_kernel(a.counts, b.counts, 50, 100000, 12345);
  const double se = std::sqrt(se_ours * se_ours + mc.std_error * mc.std_error);
  EXPECT_LE(std::abs(mean - mc.mean), 3.0 * se) << "mean " << mean << " oracle " << mc.mean;
}

TEST(Rbf, BasicValuesAndErrors) {
  const auto a = FrequencyVector(CountVector::from_dense({1, 1, 2}));
  EXPECT_DOUBLE_EQ(kernel_rbf(a, a, 0.3), 1.0);
  // |a-b|^2 = 2 for disjoint point masses; sigma = 1 gives e^-1.
  const auto p = FrequencyVector(CountVector::from_dense({1, 0}));
  const auto q = FrequencyVector(CountVector::from_dense({0, 1}));
  EXPECT_NEAR(kernel_rbf(p, q, 1.0), std::exp(-1.0), 1e-15);
  EXPECT_THROW(kernel_rbf(p, q, 0.0), UsageError);
  EXPECT_THROW(kernel_rbf(p, q, -1.0), UsageError);
}

TEST(Rbf, Symmetric) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 50; ++t) {
    const FrequencyVector a(random_doc(rng, 20, 5)), b(random_doc(rng, 20, 5));
    EXPECT_EQ(kernel_rbf(a, b, 0.2), kernel_rbf(b, a, 0.2));
  }
}

TEST(Ppk, BasicValuesAndErrors) {
  const auto a = CountVector::from_dense({2, 3, 5});
  EXPECT_NEAR(kernel_ppk(a, a, 0.5), 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(kernel_ppk(CountVector::from_dense({1, 0}), CountVector::from_dense({0, 4}), 0.5), 0.0);
  EXPECT_NEAR(kernel_ppk(CountVector::from_dense({1, 1}), CountVector::from_dense({1, 0}), 0.5), std::sqrt(0.5), 1e-15);
  EXPECT_THROW(kernel_ppk(a, CountVector::from_dense({0, 0, 0}), 0.5), UsageError);
}

TEST(KernelSpec, ParseRoundTrip) {
  for (const char* text : {"exact", "sensing0", "sensing1:n=150", "sensing2:N=500,seed=7", "rbf:sigma=0.1",
                           "ppk:rho=0.5", "sensing0:pyramid=0.25/0.25/0.5"}) {
    const auto spec = KernelSpec::parse(text);
    EXPECT_EQ(KernelSpec::parse(spec.to_string()), spec) << text;
    EXPECT_EQ(KernelSpec::parse(spec.to_string()).fingerprint(), spec.fingerprint()) << text;
  }
  EXPECT_NE(KernelSpec::parse("sensing1:n=50").fingerprint(), KernelSpec::parse("sensing1:n=150").fingerprint());
}

TEST(KernelSpec, ParseErrors) {
  EXPECT_THROW(KernelSpec::parse("linear"), UsageError);
  EXPECT_THROW(KernelSpec::parse("rbf:sigma=0"), UsageError);
  EXPECT_THROW(KernelSpec::parse("rbf:sigma=abc"), UsageError);
  EXPECT_THROW(KernelSpec::parse("sensing1:n=0"), UsageError);
  EXPECT_THROW(KernelSpec::parse("sensing1:q=3"), UsageError);
  EXPECT_THROW(KernelSpec::parse("sensing1:n"), UsageError);
}

TEST(BaseKernel, Sensing2PrepareUsesDocumentKey) {
  KernelSpec spec;
  spec.family = KernelFamily::Sensing2;
  spec.resample_n = 60;
  spec.seed = 4;
  const BaseKernel k(spec);
  const Document a{"alpha", CountVector::from_dense({4, 1, 2, 9})};
  const Document b{"beta", CountVector::from_dense({1, 1, 6, 2})};
  EXPECT_EQ(k(a, b), kernel_sensing2(a, b, 60, 4));
}
