#pragma once

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "sensekern/count_vector.hpp"
#include "sensekern/error.hpp"
#include "sensekern/fingerprint.hpp"
#include "sensekern/smart_stoplist.hpp"

namespace sensekern {

// Lowercased runs of ASCII letters of length >= 2. Everything else, including
// digits, punctuation and non-ASCII bytes, separates tokens.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (cur.size() >= 2) out.push_back(cur);
    cur.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c < 0x80 && std::isalpha(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
  }
  flush();
  return out;
}

class Stoplist {
 public:
  Stoplist() = default;

  template <class Range>
  explicit Stoplist(const Range& words) {
    for (const auto& w : words) words_.emplace(w);
  }

  static Stoplist smart() { return Stoplist(kSmartStoplist); }

  // One term per line; blank lines and surrounding whitespace ignored.
  static Stoplist load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open stoplist " + path);
    Stoplist s;
    std::string line;
    while (std::getline(is, line)) {
      std::istringstream ls(line);
      std::string w;
      if (ls >> w) {
        std::transform(w.begin(), w.end(), w.begin(), [](unsigned char c) { return std::tolower(c); });
        s.words_.insert(w);
      }
    }
    return s;
  }

  bool contains(std::string_view w) const { return words_.count(std::string(w)) > 0; }
  std::size_t size() const { return words_.size(); }

 private:
  std::unordered_set<std::string> words_;
};

inline std::vector<std::string> remove_stopwords(std::vector<std::string> tokens, const Stoplist& stop) {
  std::erase_if(tokens, [&](const std::string& t) { return stop.contains(t); });
  return tokens;
}

// Drops the RFC-822 style header block of a newsgroup post (everything up to
// the first blank line). The Subject value is kept as body text unless
// keep_subject is false. Text without a header block is returned unchanged.
inline std::string strip_newsgroup_headers(std::string_view text, bool keep_subject = true) {
  const auto looks_like_header = [](std::string_view line) {
    const auto colon = line.find(':');
    if (colon == std::string_view::npos || colon == 0) return false;
    return std::all_of(line.begin(), line.begin() + static_cast<std::ptrdiff_t>(colon), [](char c) {
      return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
    });
  };
  std::size_t pos = 0;
  std::string subject;
  bool any_header = false;
  while (pos < text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    auto line = text.substr(pos, eol - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) {
      pos = eol + 1;
      break;
    }
    const bool continuation = line.front() == ' ' || line.front() == '\t';
    if (!continuation && !looks_like_header(line)) {
      if (!any_header) return std::string(text);
      break;
    }
    any_header = true;
    if (line.size() > 8 && (line.substr(0, 8) == "Subject:" || line.substr(0, 8) == "subject:")) {
      subject = std::string(line.substr(8));
    }
    pos = eol + 1;
  }
  if (!any_header) return std::string(text);
  std::string out;
  if (keep_subject && !subject.empty()) out = subject + "\n";
  if (pos < text.size()) out += std::string(text.substr(pos));
  return out;
}

// Term -> id map with ids assigned in sorted term order.
class Vocabulary {
 public:
  Vocabulary() = default;

  explicit Vocabulary(std::vector<std::string> terms) : terms_(std::move(terms)) {
    std::sort(terms_.begin(), terms_.end());
    terms_.erase(std::unique(terms_.begin(), terms_.end()), terms_.end());
    for (std::size_t i = 0; i < terms_.size(); ++i) index_.emplace(terms_[i], static_cast<WordId>(i));
    Hasher h;
    h.field("sensekern-vocab-v1");
    for (const auto& t : terms_) h.field(t);
    fingerprint_ = h.finish();
  }

  std::size_t size() const { return terms_.size(); }
  const std::vector<std::string>& terms() const { return terms_; }
  const std::string& term(WordId id) const { return terms_.at(id); }
  const Fingerprint& fingerprint() const { return fingerprint_; }

  std::optional<WordId> id(std::string_view term) const {
    auto it = index_.find(std::string(term));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::vector<std::string> terms_;
  std::unordered_map<std::string, WordId> index_;
  Fingerprint fingerprint_;
};

// Terms whose total count over the training documents is >= min_count.
inline Vocabulary build_vocabulary(std::span<const std::vector<std::string>> train_docs, std::size_t min_count = 1) {
  if (min_count == 0) throw UsageError("build_vocabulary: min_count must be >= 1");
  std::map<std::string, std::size_t> counts;
  for (const auto& doc : train_docs)
    for (const auto& t : doc) ++counts[t];
  std::vector<std::string> terms;
  for (const auto& [t, c] : counts)
    if (c >= min_count) terms.push_back(t);
  if (terms.empty()) throw DataError("build_vocabulary: vocabulary is empty");
  return Vocabulary(std::move(terms));
}

// Counts of in-vocabulary tokens; out-of-vocabulary tokens are dropped. The
// result may be empty; callers exclude such documents.
inline CountVector vectorize(std::span<const std::string> tokens, const Vocabulary& vocab) {
  if (vocab.size() == 0) throw UsageError("vectorize: empty vocabulary");
  std::vector<WordId> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens)
    if (auto id = vocab.id(t)) ids.push_back(*id);
  return CountVector::from_words(vocab.size(), ids);
}

struct RawDocument {
  std::string id;
  std::string label;
  std::string text;
};

struct LabeledDocument {
  Document doc;
  std::string label;
};

// Vectorized documents sharing one vocabulary.
struct Corpus {
  std::size_t vocab_size = 1;
  Fingerprint vocab_fingerprint;
  std::string split = "train";
  std::vector<LabeledDocument> docs;

  std::vector<Document> documents() const {
    std::vector<Document> out;
    out.reserve(docs.size());
    for (const auto& d : docs) out.push_back(d.doc);
    return out;
  }

  // Sorted distinct labels.
  std::vector<std::string> label_set() const {
    std::vector<std::string> out;
    for (const auto& d : docs) out.push_back(d.label);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  // Class ids relative to `classes` (which must contain every label).
  std::vector<int> class_ids(const std::vector<std::string>& classes) const {
    std::vector<int> out;
    out.reserve(docs.size());
    for (const auto& d : docs) {
      auto it = std::lower_bound(classes.begin(), classes.end(), d.label);
      if (it == classes.end() || *it != d.label) throw DataError("label '" + d.label + "' not in the label set");
      out.push_back(static_cast<int>(it - classes.begin()));
    }
    return out;
  }

  Fingerprint fingerprint() const {
    Hasher h;
    h.field("sensekern-corpus-v1").field(std::to_string(vocab_size)).field(vocab_fingerprint.hex()).field(split);
    for (const auto& d : docs) {
      h.field(d.doc.id).field(d.label);
      for (const auto& e : d.doc.counts.entries())
        h.field(std::to_string(e.word) + ":" + std::to_string(e.count));
    }
    return h.finish();
  }
};

struct TextOptions {
  bool strip_headers = false;
  bool keep_subject = true;
  std::size_t min_count = 1;
};

inline std::vector<std::string> preprocess(const RawDocument& doc, const Stoplist& stop, const TextOptions& opt) {
  const std::string body = opt.strip_headers ? strip_newsgroup_headers(doc.text, opt.keep_subject) : doc.text;
  return remove_stopwords(tokenize(body), stop);
}

// Vectorizes tokenized documents; empty results are excluded and their ids
// appended to `excluded` with a warning on `log`.
inline Corpus vectorize_corpus(std::span<const RawDocument> docs, std::span<const std::vector<std::string>> tokens,
                               const Vocabulary& vocab, std::string split, std::vector<std::string>* excluded = nullptr,
                               std::ostream* log = &std::clog) {
  Corpus c;
  c.vocab_size = vocab.size();
  c.vocab_fingerprint = vocab.fingerprint();
  c.split = std::move(split);
  for (std::size_t i = 0; i < docs.size(); ++i) {
    auto counts = vectorize(tokens[i], vocab);
    if (counts.empty()) {
      if (log) *log << "warning: document " << docs[i].id << " has no in-vocabulary words; excluded\n";
      if (excluded) excluded->push_back(docs[i].id);
      continue;
    }
    c.docs.push_back({Document{docs[i].id, std::move(counts)}, docs[i].label});
  }
  return c;
}

struct PreparedText {
  Vocabulary vocab;
  Corpus train;
  Corpus test;
  std::vector<std::string> excluded;
};

// Builds the vocabulary from the training split only, then vectorizes both
// splits against it (test words unseen in training are dropped).
inline PreparedText prepare_text(std::span<const RawDocument> train, std::span<const RawDocument> test,
                                 const Stoplist& stop, const TextOptions& opt, std::ostream* log = &std::clog) {
  std::vector<std::vector<std::string>> train_tokens, test_tokens;
  train_tokens.reserve(train.size());
  test_tokens.reserve(test.size());
  for (const auto& d : train) train_tokens.push_back(preprocess(d, stop, opt));
  for (const auto& d : test) test_tokens.push_back(preprocess(d, stop, opt));
  PreparedText out;
  out.vocab = build_vocabulary(train_tokens, opt.min_count);
  out.train = vectorize_corpus(train, train_tokens, out.vocab, "train", &out.excluded, log);
  out.test = vectorize_corpus(test, test_tokens, out.vocab, "test", &out.excluded, log);
  return out;
}

// ---------------------------------------------------------------------------
// Input readers.

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw ConfigError("cannot open " + p.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// root/<class>/<file>: one document per file, id "<class>/<file>". Classes
// and files are visited in sorted order. `classes`, when non-empty, selects
// a subset of class directories.
inline std::vector<RawDocument> read_class_directory(const std::filesystem::path& root,
                                                     const std::vector<std::string>& classes = {}) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw ConfigError("not a directory: " + root.string());
  std::vector<fs::path> class_dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) class_dirs.push_back(e.path());
  std::sort(class_dirs.begin(), class_dirs.end());
  std::vector<RawDocument> out;
  for (const auto& dir : class_dirs) {
    const auto label = dir.filename().string();
    if (!classes.empty() && std::find(classes.begin(), classes.end(), label) == classes.end()) continue;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) out.push_back({label + "/" + f.filename().string(), label, read_file(f)});
  }
  for (const auto& c : classes) {
    if (std::none_of(out.begin(), out.end(), [&](const RawDocument& d) { return d.label == c; })) {
      throw ConfigError("class directory '" + c + "' not found or empty under " + root.string());
    }
  }
  return out;
}

// "<id>\t<label>\t<text>" per line.
inline std::vector<RawDocument> read_tsv(std::istream& is) {
  std::vector<RawDocument> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) throw DataError("TSV line " + std::to_string(lineno) + ": expected id, label, text");
    out.push_back({line.substr(0, t1), line.substr(t1 + 1, t2 - t1 - 1), line.substr(t2 + 1)});
  }
  return out;
}

inline std::vector<RawDocument> read_tsv(const std::filesystem::path& p) {
  std::ifstream is(p);
  if (!is) throw ConfigError("cannot open " + p.string());
  return read_tsv(is);
}

// ---------------------------------------------------------------------------
// Corpus and vocabulary files.
//
// Corpus:  "sensekern-corpus 1", "W <W>", "vocab <hex>", "M <M>", "split <tag>",
//          then "<id>\t<label>\t<word:count word:count ...>" per document.
// Vocabulary: one term per line in id order.

inline void write_corpus(std::ostream& os, const Corpus& c) {
  os << "sensekern-corpus 1\n";
  os << "W " << c.vocab_size << '\n';
  os << "vocab " << c.vocab_fingerprint.hex() << '\n';
  os << "M " << c.docs.size() << '\n';
  os << "split " << c.split << '\n';
  for (const auto& d : c.docs) {
    os << d.doc.id << '\t' << d.label << '\t';
    bool first = true;
    for (const auto& e : d.doc.counts.entries()) {
      if (!first) os << ' ';
      os << e.word << ':' << e.count;
      first = false;
    }
    os << '\n';
  }
}

namespace detail {

inline std::string corpus_key(std::istream& is, std::string_view key) {
  std::string line;
  if (!std::getline(is, line) || line.rfind(std::string(key) + " ", 0) != 0) {
    throw DataError("corpus file: expected '" + std::string(key) + "' header line");
  }
  return line.substr(key.size() + 1);
}

inline CountVector parse_counts(std::string_view text, std::size_t vocab_size) {
  std::vector<CountEntry> entries;
  std::size_t pos = 0;
  while (pos < text.size()) {
    while (pos < text.size() && text[pos] == ' ') ++pos;
    if (pos >= text.size()) break;
    auto end = text.find(' ', pos);
    if (end == std::string_view::npos) end = text.size();
    const auto item = text.substr(pos, end - pos);
    const auto colon = item.find(':');
    if (colon == std::string_view::npos) throw DataError("malformed word:count pair '" + std::string(item) + "'");
    try {
      entries.push_back({static_cast<WordId>(std::stoul(std::string(item.substr(0, colon)))),
                         static_cast<Count>(std::stoull(std::string(item.substr(colon + 1))))});
    } catch (const std::logic_error&) {
      throw DataError("malformed word:count pair '" + std::string(item) + "'");
    }
    pos = end;
  }
  try {
    return CountVector(vocab_size, std::move(entries));
  } catch (const UsageError& e) {
    throw DataError(e.what());
  }
}

}  // namespace detail

inline Corpus read_corpus(std::istream& is) {
  std::string header;
  if (!std::getline(is, header) || header != "sensekern-corpus 1") throw DataError("not a corpus file");
  Corpus c;
  try {
    c.vocab_size = std::stoull(detail::corpus_key(is, "W"));
  } catch (const std::logic_error&) {
    throw DataError("corpus file: bad W");
  }
  c.vocab_fingerprint = Fingerprint::from_hex(detail::corpus_key(is, "vocab"));
  const auto m = std::stoull(detail::corpus_key(is, "M"));
  c.split = detail::corpus_key(is, "split");
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) throw DataError("corpus file: malformed document line");
    auto counts = detail::parse_counts(std::string_view(line).substr(t2 + 1), c.vocab_size);
    if (counts.empty()) throw DataError("corpus file: empty document " + line.substr(0, t1));
    c.docs.push_back({Document{line.substr(0, t1), std::move(counts)}, line.substr(t1 + 1, t2 - t1 - 1)});
  }
  if (c.docs.size() != m) throw DataError("corpus file: document count does not match header");
  return c;
}

inline Corpus load_corpus(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open " + path);
  return read_corpus(is);
}

inline void save_corpus(const std::string& path, const Corpus& c) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write " + path);
  write_corpus(os, c);
}

inline void write_vocabulary(std::ostream& os, const Vocabulary& v) {
  for (const auto& t : v.terms()) os << t << '\n';
}

inline Vocabulary read_vocabulary(std::istream& is) {
  std::vector<std::string> terms;
  std::string line;
  while (std::getline(is, line))
    if (!line.empty()) terms.push_back(line);
  if (!std::is_sorted(terms.begin(), terms.end())) throw DataError("vocabulary file is not in sorted term order");
  return Vocabulary(std::move(terms));
}

}  // namespace sensekern
