#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <filesystem>
#include <random>
#include <sstream>

#include "sensekern/gram.hpp"

using namespace sensekern;

namespace {

std::vector<Document> random_docs(std::uint64_t seed, std::size_t m, std::size_t w, Count max_count) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Count> d(0, max_count);
  std::vector<Document> out;
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<Count> v(w);
    do {
      for (auto& c : v) c = d(rng);
    } while (std::all_of(v.begin(), v.end(), [](Count c) { return c == 0; }));
    out.push_back({"doc" + std::to_string(i), CountVector::from_dense(std::span<const Count>(v))});
  }
  return out;
}

KernelSpec spec_of(const char* text) { return KernelSpec::parse(text); }

}  // namespace

TEST(BuildGram, SingleWordSelfGramIsZero) {
  const std::vector<Document> docs{{"only", CountVector::from_dense({4})}};
  const auto g = build_gram(docs, spec_of("sensing0"));
  ASSERT_EQ(g.rows(), 1u);
  EXPECT_EQ(g(0, 0), 0.0);
}

TEST(BuildGram, SymmetricExactlyForEveryFamily) {
  const auto docs = random_docs(1, 3, 12, 6);
  for (const char* k : {"exact", "sensing0", "sensing1:n=50", "sensing2:N=40,seed=3", "rbf:sigma=0.3", "ppk:rho=0.5"}) {
    const auto g = build_gram(docs, spec_of(k));
    EXPECT_TRUE(g.is_symmetric()) << k;
  }
}

TEST(BuildGram, RectangularMatchesPairwiseKernel) {
  const auto rows = random_docs(2, 4, 10, 5);
  const auto cols = random_docs(3, 6, 10, 5);
  const auto spec = spec_of("sensing1:n=150");
  const auto g = build_gram(std::span<const Document>(rows), std::span<const Document>(cols), spec);
  ASSERT_EQ(g.rows(), 4u);
  ASSERT_EQ(g.cols(), 6u);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 6; ++j) EXPECT_EQ(g(i, j), kernel_sensing1(rows[i].counts, cols[j].counts, 150));
  EXPECT_EQ(g.row_ids()[2], "doc2");
  EXPECT_EQ(g.spec(), spec.fingerprint());
}

TEST(BuildGram, ThreadCountDoesNotChangeValues) {
  const auto docs = random_docs(4, 25, 30, 4);
  const auto spec = spec_of("sensing2:N=60,seed=9");
  const auto a = build_gram(docs, spec, 1);
  const auto b = build_gram(docs, spec, 4);
  ASSERT_EQ(a.values().size(), b.values().size());
  for (std::size_t i = 0; i < a.values().size(); ++i) EXPECT_EQ(a.values()[i], b.values()[i]);
}

TEST(BuildGram, ExactKernelGramIsPsd) {
  const auto docs = random_docs(5, 50, 6, 4);
  const auto g = build_gram(docs, spec_of("exact"));
  Eigen::MatrixXd m(50, 50);
  for (std::size_t i = 0; i < 50; ++i)
    for (std::size_t j = 0; j < 50; ++j) m(i, j) = g(i, j);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  EXPECT_GE(es.eigenvalues().minCoeff(), -1e-8 * g.trace());
}

TEST(BuildGram, PairErrorIdentifiesOffendingDocuments) {
  std::vector<Document> docs = random_docs(6, 3, 5, 3);
  docs.push_back({"empty-one", CountVector::from_dense({0, 0, 0, 0, 0})});
  try {
    build_gram(docs, spec_of("sensing1:n=10"));
    FAIL() << "expected a usage error";
  } catch (const UsageError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("empty-one"), std::string::npos) << msg;
    EXPECT_NE(msg.find("doc0"), std::string::npos) << msg;
  }
}

TEST(BuildGram, RejectsPyramidSpecForPlainDocuments) {
  const auto docs = random_docs(7, 2, 4, 3);
  EXPECT_THROW(build_gram(docs, spec_of("sensing0:pyramid=0.5/0.5")), UsageError);
}

TEST(GramMatrix, ShapeValidation) {
  EXPECT_THROW(GramMatrix(2, 2, {1.0, 2.0, 3.0}, {"a", "b"}, {"a", "b"}, {}), UsageError);
  EXPECT_THROW(GramMatrix(1, 1, {1.0}, {"a", "b"}, {"a"}, {}), UsageError);
}

TEST(GramMatrix, SelectSubmatrix) {
  const auto g = GramMatrix::from_values(3, {0, 1, 2, 3, 4, 5, 6, 7, 8});
  const std::vector<std::size_t> r{2, 0}, c{1};
  const auto s = g.select(r, c);
  EXPECT_EQ(s.rows(), 2u);
  EXPECT_EQ(s(0, 0), 7.0);
  EXPECT_EQ(s(1, 0), 1.0);
  EXPECT_EQ(s.row_ids(), (std::vector<std::string>{"2", "0"}));
}

TEST(GramIo, BinaryRoundTripIsBitExact) {
  const auto docs = random_docs(8, 7, 9, 5);
  const auto g = build_gram(docs, spec_of("sensing0"));
  std::stringstream ss;
  write_gram_binary(ss, g);
  const auto back = read_gram_binary(ss, std::make_pair(g.row_ids(), g.col_ids()));
  EXPECT_EQ(back.spec(), g.spec());
  ASSERT_EQ(back.values().size(), g.values().size());
  for (std::size_t i = 0; i < g.values().size(); ++i)
    EXPECT_EQ(std::bit_cast<std::uint64_t>(back.values()[i]), std::bit_cast<std::uint64_t>(g.values()[i]));
}

TEST(GramIo, RectangularAndTextRoundTripThroughFiles) {
  const auto rows = random_docs(9, 3, 8, 4);
  const auto cols = random_docs(10, 5, 8, 4);
  const auto g = build_gram(std::span<const Document>(rows), std::span<const Document>(cols), spec_of("rbf:sigma=0.4"));
  const auto dir = std::filesystem::temp_directory_path() / "sensekern_gram_io";
  std::filesystem::create_directories(dir);
  for (bool text : {false, true}) {
    const auto path = (dir / (text ? "g.txt" : "g.bin")).string();
    save_gram(path, g, text);
    const auto back = load_gram(path);
    EXPECT_EQ(back.rows(), 3u);
    EXPECT_EQ(back.cols(), 5u);
    EXPECT_EQ(back.row_ids(), g.row_ids());
    EXPECT_EQ(back.col_ids(), g.col_ids());
    for (std::size_t i = 0; i < g.values().size(); ++i) EXPECT_EQ(back.values()[i], g.values()[i]);
  }
  std::filesystem::remove_all(dir);
}

TEST(GramIo, CorruptInputIsDataError) {
  std::stringstream bad("XXXX");
  EXPECT_THROW(read_gram_binary(bad), DataError);
  const auto g = GramMatrix::from_values(2, {1, 0, 0, 1});
  std::stringstream ss;
  write_gram_binary(ss, g);
  std::string bytes = ss.str();
  bytes.resize(bytes.size() - 4);
  std::stringstream truncated(bytes);
  EXPECT_THROW(read_gram_binary(truncated), DataError);
}
