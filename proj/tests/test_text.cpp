#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "sensekern/text.hpp"

using namespace sensekern;
using Tokens = std::vector<std::string>;

TEST(Tokenize, Rules) {
  EXPECT_EQ(tokenize("God exists?"), (Tokens{"god", "exists"}));
  EXPECT_EQ(tokenize(""), Tokens{});
  EXPECT_EQ(tokenize("a I ok"), Tokens{"ok"});
  EXPECT_EQ(tokenize("don't re-use x2y4 ABC"), (Tokens{"don", "re", "use", "abc"}));
  EXPECT_EQ(tokenize("caf\xc3\xa9 na\xc3\xafve"), (Tokens{"caf", "na", "ve"}));
}

TEST(Stopwords, RemovalRules) {
  const Stoplist stop(std::vector<std::string>{"the"});
  EXPECT_EQ(remove_stopwords({"the", "god"}, stop), Tokens{"god"});
  EXPECT_EQ(remove_stopwords({"the", "god"}, Stoplist{}), (Tokens{"the", "god"}));
  EXPECT_EQ(remove_stopwords({"the", "the"}, stop), Tokens{});
}

TEST(Stopwords, SmartListContents) {
  const auto smart = Stoplist::smart();
  EXPECT_EQ(smart.size(), 570u);
  for (const char* w : {"the", "about", "would", "yourselves", "zero"}) EXPECT_TRUE(smart.contains(w)) << w;
  EXPECT_FALSE(smart.contains("god"));
  EXPECT_FALSE(smart.contains("religion"));
}

TEST(Stopwords, LoadFromFileAndMissingFile) {
  const auto path = std::filesystem::temp_directory_path() / "sensekern_stop.txt";
  {
    std::ofstream os(path);
    os << "  Foo \n\nbar\n";
  }
  const auto s = Stoplist::load(path.string());
  EXPECT_TRUE(s.contains("foo"));
  EXPECT_TRUE(s.contains("bar"));
  EXPECT_EQ(s.size(), 2u);
  std::filesystem::remove(path);
  EXPECT_THROW(Stoplist::load("/nonexistent/stoplist.txt"), ConfigError);
}

TEST(Headers, StripKeepsSubjectByDefault) {
  const std::string post =
      "From: someone@example.com\nSubject: Re: divine\n  continued\nOrganization: Nowhere\n\nBody text here.\n";
  EXPECT_EQ(strip_newsgroup_headers(post), " Re: divine\nBody text here.\n");
  EXPECT_EQ(strip_newsgroup_headers(post, false), "Body text here.\n");
  EXPECT_EQ(strip_newsgroup_headers("No header here\nat all"), "No header here\nat all");
}

TEST(Vocabulary, BuildRules) {
  const std::vector<Tokens> docs{{"a", "b"}, {"b", "c"}};
  const auto v = build_vocabulary(docs, 1);
  EXPECT_EQ(v.size(), 3u);
  EXPECT_EQ(*v.id("a"), 0u);
  EXPECT_EQ(*v.id("b"), 1u);
  EXPECT_EQ(*v.id("c"), 2u);
  EXPECT_FALSE(v.id("d").has_value());
  const auto v2 = build_vocabulary(docs, 2);
  EXPECT_EQ(v2.terms(), Tokens{"b"});
  EXPECT_EQ(build_vocabulary(docs, 1).fingerprint(), v.fingerprint());
  EXPECT_NE(v2.fingerprint(), v.fingerprint());
}

TEST(Vocabulary, Errors) {
  const std::vector<Tokens> none{{}, {}};
  EXPECT_THROW(build_vocabulary(none, 1), DataError);
  const std::vector<Tokens> docs{{"a"}};
  EXPECT_THROW(build_vocabulary(docs, 2), DataError);
  EXPECT_THROW(build_vocabulary(docs, 0), UsageError);
}

TEST(Vectorize, CountsOnlyInVocabularyTokens) {
  const Vocabulary v(Tokens{"god", "exists", "faith"});
  const Tokens all{"god", "god", "faith"};
  EXPECT_EQ(vectorize(all, v).total(), 3u);
  EXPECT_EQ(vectorize(all, v).count(*v.id("god")), 2u);
  const Tokens oov{"zeus", "odin"};
  EXPECT_TRUE(vectorize(oov, v).empty());
  const Tokens mixed{"zeus", "faith"};
  EXPECT_EQ(vectorize(mixed, v).dense(), (std::vector<Count>{0, 1, 0}));
}

TEST(PrepareText, VocabularyFromTrainingOnlyAndEmptyExclusion) {
  const std::vector<RawDocument> train{{"t1", "x", "Faith and reason"}, {"t2", "y", "Reason alone matters"}};
  const std::vector<RawDocument> test{{"s1", "x", "faith healing"}, {"s2", "y", "the and of"}};
  std::ostringstream log;
  const auto p = prepare_text(train, test, Stoplist::smart(), TextOptions{}, &log);
  EXPECT_EQ(p.vocab.terms(), (Tokens{"faith", "matters", "reason"}));
  ASSERT_EQ(p.test.docs.size(), 1u);
  EXPECT_EQ(p.test.docs[0].doc.counts.total(), 1u);  // "healing" is unseen in training
  EXPECT_EQ(p.excluded, Tokens{"s2"});
  EXPECT_NE(log.str().find("s2"), std::string::npos);
  EXPECT_EQ(p.train.vocab_fingerprint, p.vocab.fingerprint());
  EXPECT_EQ(p.test.vocab_fingerprint, p.vocab.fingerprint());
}

TEST(Readers, ClassDirectoryAndTsv) {
  namespace fs = std::filesystem;
  const auto root = fs::temp_directory_path() / "sensekern_text_reader";
  fs::remove_all(root);
  fs::create_directories(root / "beta");
  fs::create_directories(root / "alpha");
  std::ofstream(root / "beta" / "2") << "second";
  std::ofstream(root / "alpha" / "9") << "ninth";
  std::ofstream(root / "alpha" / "10") << "tenth";
  const auto docs = read_class_directory(root);
  ASSERT_EQ(docs.size(), 3u);
  EXPECT_EQ(docs[0].id, "alpha/10");
  EXPECT_EQ(docs[1].id, "alpha/9");
  EXPECT_EQ(docs[2].label, "beta");
  EXPECT_EQ(read_class_directory(root, {"beta"}).size(), 1u);
  EXPECT_THROW(read_class_directory(root, {"gamma"}), ConfigError);
  EXPECT_THROW(read_class_directory(root / "missing"), ConfigError);
  fs::remove_all(root);

  std::istringstream tsv("d1\tpos\tsome text\nd2\tneg\tmore\ttabs\n");
  const auto t = read_tsv(tsv);
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t[1].text, "more\ttabs");
  std::istringstream bad("only-one-field\n");
  EXPECT_THROW(read_tsv(bad), DataError);
}

TEST(CorpusIo, RoundTrip) {
  const std::vector<RawDocument> train{{"a/1", "a", "apples oranges apples"}, {"b/1", "b", "pears plums"}};
  const auto p = prepare_text(train, train, Stoplist{}, TextOptions{}, nullptr);
  std::stringstream ss;
  write_corpus(ss, p.train);
  const auto back = read_corpus(ss);
  EXPECT_EQ(back.fingerprint(), p.train.fingerprint());
  EXPECT_EQ(back.docs[0].doc.counts, p.train.docs[0].doc.counts);
  EXPECT_EQ(back.label_set(), (Tokens{"a", "b"}));

  std::stringstream vs;
  write_vocabulary(vs, p.vocab);
  EXPECT_EQ(read_vocabulary(vs).fingerprint(), p.vocab.fingerprint());
}

TEST(CorpusIo, MalformedInputIsDataError) {
  std::stringstream a("nonsense\n");
  EXPECT_THROW(read_corpus(a), DataError);
  std::stringstream b("sensekern-corpus 1\nW 3\nvocab " + std::string(64, '0') + "\nM 1\nsplit x\nd\tl\t5:1\n");
  EXPECT_THROW(read_corpus(b), DataError);
  std::stringstream c("sensekern-corpus 1\nW 3\nvocab " + std::string(64, '0') + "\nM 2\nsplit x\nd\tl\t1:1\n");
  EXPECT_THROW(read_corpus(c), DataError);
  std::stringstream d("sensekern-corpus 1\nW 3\nvocab " + std::string(64, '0') + "\nM 1\nsplit x\nd\tl\t1:x\n");
  EXPECT_THROW(read_corpus(d), DataError);
}
