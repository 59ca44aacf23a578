#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <sstream>

#include "sensekern/pyramid.hpp"
#include "sensekern/verification.hpp"

using namespace sensekern;

namespace {

SampleMatrix two_clouds(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  SampleMatrix s;
  s.dim = 2;
  for (int i = 0; i < 100; ++i) {
    const double cx = i % 2 ? 10.0 : -10.0;
    s.values.push_back(cx + u(rng));
    s.values.push_back(u(rng));
  }
  return s;
}

double inertia_one_centroid(const SampleMatrix& s) {
  std::vector<double> mean(s.dim, 0.0);
  for (std::size_t i = 0; i < s.rows(); ++i)
    for (std::size_t k = 0; k < s.dim; ++k) mean[k] += s.row(i)[k] / static_cast<double>(s.rows());
  double in = 0.0;
  for (std::size_t i = 0; i < s.rows(); ++i)
    for (std::size_t k = 0; k < s.dim; ++k) in += (s.row(i)[k] - mean[k]) * (s.row(i)[k] - mean[k]);
  return in;
}

VisualVocabulary fixed_vocab(std::vector<double> centroids, std::size_t dim) {
  VisualVocabulary v;
  v.dim = dim;
  v.centroids = std::move(centroids);
  return v;
}

}  // namespace

TEST(KMeans, SeparatedCloudsAreRecovered) {
  const auto s = two_clouds(1);
  const auto v = kmeans_fit(s, 2, 42);
  ASSERT_EQ(v.words(), 2u);
  std::vector<double> xs{v.centroid(0)[0], v.centroid(1)[0]};
  std::sort(xs.begin(), xs.end());
  EXPECT_GE(xs[0], -10.5);
  EXPECT_LE(xs[0], -9.5);
  EXPECT_GE(xs[1], 9.5);
  EXPECT_LE(xs[1], 10.5);
  for (std::size_t w = 0; w < 2; ++w) EXPECT_LE(std::abs(v.centroid(w)[1]), 0.5);
  EXPECT_LT(v.inertia, inertia_one_centroid(s));
}

TEST(KMeans, AsManyWordsAsDistinctSamplesGivesZeroInertia) {
  SampleMatrix s;
  s.dim = 1;
  s.values = {0.0, 1.0, 5.0, 9.0, 1.0, 5.0};
  const auto v = kmeans_fit(s, 4, 3);
  EXPECT_EQ(v.inertia, 0.0);
}

TEST(KMeans, DeterministicAndSeedSensitive) {
  const auto s = two_clouds(2);
  SampleMatrix t = s;
  for (int i = 0; i < 200; ++i) t.values.push_back(static_cast<double>(i % 17) - 8.0);
  const auto a = kmeans_fit(t, 5, 7), b = kmeans_fit(t, 5, 7);
  EXPECT_EQ(a.centroids, b.centroids);
  EXPECT_EQ(a.fingerprint(), b.fingerprint());
}

TEST(KMeans, TooFewSamplesIsUsageError) {
  SampleMatrix s;
  s.dim = 1;
  s.values = {1.0, 2.0};
  EXPECT_THROW(kmeans_fit(s, 3, 0), UsageError);
}

TEST(KMeans, DuplicatePointsStillGiveDistinctCentroids) {
  SampleMatrix s;
  s.dim = 1;
  s.values = {0, 0, 0, 0, 0, 0, 10, 10.5};
  const auto v = kmeans_fit(s, 3, 5);
  std::vector<double> c{v.centroid(0)[0], v.centroid(1)[0], v.centroid(2)[0]};
  std::sort(c.begin(), c.end());
  EXPECT_EQ(c, (std::vector<double>{0.0, 10.0, 10.5}));
  EXPECT_EQ(v.inertia, 0.0);
}

TEST(Quantize, NearestCentroidWithLowestIdTies) {
  // Ten 1-D centroids; ids 3 and 7 sit at equal distance from x = 5.
  std::vector<double> c(10, 100.0);
  c[3] = 3.0;
  c[7] = 7.0;
  const auto vocab = fixed_vocab(c, 1);
  DescriptorSet d;
  d.image_id = "im";
  d.width = d.height = 10;
  d.dim = 1;
  d.positions = {{1, 1}, {2, 2}};
  d.values = {5.0f, 7.0f};
  const auto q = quantize(d, vocab);
  EXPECT_EQ(q[0].word, 3u);
  EXPECT_EQ(q[1].word, 7u);
  d.dim = 2;
  d.values = {1, 2, 3, 4};
  EXPECT_THROW(quantize(d, vocab), UsageError);
}

TEST(Quantize, PermutingInputPermutesOutput) {
  const auto vocab = fixed_vocab({0.0, 0.0, 1.0, 1.0, 0.0, 1.0}, 2);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<float> u(0.f, 1.f);
  DescriptorSet d;
  d.image_id = "im";
  d.width = d.height = 4;
  d.dim = 2;
  for (int i = 0; i < 30; ++i) {
    d.positions.push_back({u(rng) * 4, u(rng) * 4});
    d.values.push_back(u(rng));
    d.values.push_back(u(rng));
  }
  const auto q = quantize(d, vocab);
  DescriptorSet r = d;
  std::vector<std::size_t> order(30);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::reverse(order.begin(), order.end());
  for (std::size_t i = 0; i < 30; ++i) {
    r.positions[i] = d.positions[order[i]];
    r.values[2 * i] = d.values[2 * order[i]];
    r.values[2 * i + 1] = d.values[2 * order[i] + 1];
  }
  const auto qr = quantize(r, vocab);
  for (std::size_t i = 0; i < 30; ++i) EXPECT_EQ(qr[i].word, q[order[i]].word);
}

TEST(Pyramid, LevelZeroIsWholeImage) {
  const std::vector<QuantizedPatch> p{{1, 1, 0}, {9, 9, 1}, {5, 5, 1}};
  const auto doc = build_pyramid("im", p, 10, 10, 0, 2);
  ASSERT_EQ(doc.levels.size(), 1u);
  EXPECT_EQ(doc.levels[0][0].dense(), (std::vector<Count>{1, 2}));
}

TEST(Pyramid, CenterPointGoesToLowerRightByFloorRule) {
  EXPECT_EQ(pyramid_cell(5.f, 5.f, 10, 10, 1), 3u);  // row 1, col 1
  EXPECT_EQ(pyramid_cell(10.f, 10.f, 10, 10, 2), 15u);
  EXPECT_EQ(pyramid_cell(0.f, 0.f, 10, 10, 2), 0u);
  EXPECT_EQ(pyramid_cell(4.99f, 5.f, 10, 10, 1), 2u);
}

TEST(Pyramid, CellCountsAreConserved) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<float> ux(0.f, 640.f), uy(0.f, 480.f);
  std::vector<QuantizedPatch> p;
  for (int i = 0; i < 500; ++i) p.push_back({ux(rng), uy(rng), static_cast<WordId>(i % 13)});
  const auto doc = build_pyramid("im", p, 640, 480, 3, 13);
  for (std::size_t l = 0; l <= 3; ++l) {
    std::vector<Count> sum(13, 0);
    for (const auto& cell : doc.levels[l])
      for (const auto& e : cell.entries()) sum[e.word] += e.count;
    EXPECT_EQ(sum, doc.levels[0][0].dense()) << "level " << l;
  }
}

TEST(Pyramid, PositionOutsideImageIsDataError) {
  const std::vector<QuantizedPatch> p{{11, 1, 0}};
  EXPECT_THROW(build_pyramid("im", p, 10, 10, 1, 2), DataError);
  const std::vector<QuantizedPatch> q{{1, -0.5f, 0}};
  EXPECT_THROW(build_pyramid("im", q, 10, 10, 1, 2), DataError);
}

TEST(PyramidKernel, SingleLevelWeightReducesToBaseKernel) {
  const std::vector<QuantizedPatch> pa{{1, 1, 0}, {9, 9, 1}, {5, 5, 1}, {2, 7, 2}};
  const std::vector<QuantizedPatch> pb{{3, 3, 2}, {8, 2, 1}, {6, 6, 0}};
  const auto a = build_pyramid("a", pa, 10, 10, 0, 3);
  const auto b = build_pyramid("b", pb, 10, 10, 0, 3);
  KernelSpec base;
  base.family = KernelFamily::Sensing0;
  EXPECT_EQ(pyramid_kernel(a, b, base, {1.0}), kernel_sensing0(a.levels[0][0], b.levels[0][0]));
}

TEST(PyramidKernel, AllZeroWeightsGiveZero) {
  const std::vector<QuantizedPatch> pa{{1, 1, 0}, {9, 9, 1}};
  const auto a = build_pyramid("a", pa, 10, 10, 2, 2);
  KernelSpec base;
  base.family = KernelFamily::Sensing1;
  EXPECT_EQ(pyramid_kernel(a, a, base, {0.0, 0.0, 0.0}), 0.0);
}

TEST(PyramidKernel, HandBuiltTwoWordImages) {
  // 4x4 images with L = 2: one patch per level-2 cell for image a; image b
  // fills only the top-left quadrant. Expected value built cell by cell from
  // the quadrature oracle.
  std::vector<QuantizedPatch> pa, pb;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) pa.push_back({c + 0.5f, r + 0.5f, static_cast<WordId>((r + c) % 2)});
  pb = {{0.5f, 0.5f, 0}, {1.5f, 0.5f, 0}, {0.5f, 1.5f, 1}};
  const auto a = build_pyramid("a", pa, 4, 4, 2, 2);
  const auto b = build_pyramid("b", pb, 4, 4, 2, 2);
  KernelSpec base;
  base.family = KernelFamily::SensingExact;
  const std::vector<double> w{0.25, 0.25, 0.5};
  double expected = 0.0;
  for (std::size_t l = 0; l <= 2; ++l) {
    double level = 0.0;
    for (std::size_t c = 0; c < a.levels[l].size(); ++c) {
      const auto& ca = a.levels[l][c];
      const auto& cb = b.levels[l][c];
      if (ca.empty() || cb.empty()) continue;
      level += verify::simplex_integral_oracle(ca, cb, 2000);
    }
    expected += w[l] * level;
  }
  const double got = pyramid_kernel(a, b, base, w);
  EXPECT_NEAR(got, expected, 1e-9 * expected);
  EXPECT_EQ(a.levels[1].size() + a.levels[2].size() + a.levels[0].size(), 21u);
}

TEST(PyramidKernel, ShapeMismatchIsUsageError) {
  const std::vector<QuantizedPatch> p{{1, 1, 0}};
  const auto a = build_pyramid("a", p, 10, 10, 1, 2);
  KernelSpec base;
  base.family = KernelFamily::Sensing0;
  EXPECT_THROW(pyramid_kernel(a, a, base, {0.5, 0.25, 0.25}), UsageError);
  const auto c = build_pyramid("c", p, 10, 10, 1, 3);
  EXPECT_THROW(pyramid_kernel(a, c, base, {0.5, 0.5}), UsageError);
}

TEST(PyramidKernel, Sensing2GramIsDeterministicAndSymmetric) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<float> u(0.f, 32.f);
  std::vector<PyramidDoc> docs;
  for (int i = 0; i < 6; ++i) {
    std::vector<QuantizedPatch> p;
    for (int k = 0; k < 40; ++k) p.push_back({u(rng), u(rng), static_cast<WordId>(k % 5)});
    docs.push_back(build_pyramid("im" + std::to_string(i), p, 32, 32, 2, 5));
  }
  const auto spec = KernelSpec::parse("sensing2:N=50,seed=3,pyramid=0.25/0.25/0.5");
  const auto g1 = build_gram(std::span<const PyramidDoc>(docs), spec, 1);
  const auto g2 = build_gram(std::span<const PyramidDoc>(docs), spec, 3);
  EXPECT_TRUE(g1.is_symmetric());
  for (std::size_t i = 0; i < g1.values().size(); ++i) EXPECT_EQ(g1.values()[i], g2.values()[i]);
}

TEST(PyramidWeights, Defaults) {
  EXPECT_EQ(default_pyramid_weights(2), (std::vector<double>{0.25, 0.25, 0.5}));
  EXPECT_EQ(default_pyramid_weights(0), (std::vector<double>{1.0}));
  EXPECT_EQ(default_pyramid_weights(1), (std::vector<double>{0.5, 0.5}));
}

TEST(DescriptorIo, TextAndBinaryRoundTrip) {
  DescriptorSet d;
  d.image_id = "scene_01";
  d.width = 64;
  d.height = 48;
  d.dim = 3;
  d.positions = {{0.f, 0.f}, {63.5f, 47.25f}};
  d.values = {0.1f, 0.2f, 0.3f, 1.5f, -2.0f, 1e-7f};
  for (bool binary : {false, true}) {
    std::stringstream ss;
    if (binary) write_descriptors_binary(ss, d);
    else write_descriptors_text(ss, d);
    const auto back = binary ? read_descriptors_binary(ss) : read_descriptors_text(ss);
    EXPECT_EQ(back.image_id, d.image_id);
    EXPECT_EQ(back.width, d.width);
    EXPECT_EQ(back.values, d.values);
    EXPECT_EQ(back.positions[1].x, d.positions[1].x);
  }
  std::stringstream bad("im 10 10 2 1\n11 1 0.5 0.5\n");
  EXPECT_THROW(read_descriptors_text(bad), DataError);
}

TEST(PyramidCorpusIo, RoundTrip) {
  const std::vector<QuantizedPatch> p{{1, 1, 0}, {9, 9, 1}, {5, 5, 1}, {2, 7, 2}};
  PyramidCorpus c;
  c.vocab_size = 3;
  c.levels = 2;
  c.docs.push_back({build_pyramid("a", p, 10, 10, 2, 3), "kitchen"});
  c.docs.push_back({build_pyramid("b", std::span(p).subspan(1), 10, 10, 2, 3), "street"});
  std::stringstream ss;
  write_pyramid_corpus(ss, c);
  const auto back = read_pyramid_corpus(ss);
  ASSERT_EQ(back.docs.size(), 2u);
  EXPECT_EQ(back.docs[1].label, "street");
  EXPECT_EQ(back.docs[0].doc.levels, c.docs[0].doc.levels);
}

TEST(PrepareBof, VocabularyFitOnTrainingImagesOnly) {
  std::mt19937_64 rng(7);
  std::normal_distribution<float> nd(0.f, 0.1f);
  auto image = [&](const std::string& id, float centre) {
    DescriptorSet d;
    d.image_id = id;
    d.label = centre > 0 ? "pos" : "neg";
    d.width = d.height = 16;
    d.dim = 2;
    for (int i = 0; i < 20; ++i) {
      d.positions.push_back({static_cast<float>(i % 16), static_cast<float>(i / 2)});
      d.values.push_back(centre + nd(rng));
      d.values.push_back(nd(rng));
    }
    return d;
  };
  std::vector<DescriptorSet> train{image("t1", 1.f), image("t2", -1.f)};
  std::vector<DescriptorSet> test_a{image("s1", 5.f)}, test_b{image("s1", -5.f)};
  BofOptions opt;
  opt.words = 2;
  opt.sample_size = 30;
  opt.levels = 1;
  opt.seed = 9;
  const auto a = prepare_bof(train, test_a, opt);
  const auto b = prepare_bof(train, test_b, opt);
  EXPECT_EQ(a.vocab.fingerprint(), b.vocab.fingerprint());
  EXPECT_EQ(a.train.vocab_fingerprint, a.vocab.fingerprint());
  EXPECT_EQ(a.test.docs[0].doc.levels[0][0].total(), 20u);
}
