#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <iomanip>
#include <map>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "sensekern/count_vector.hpp"
#include "sensekern/error.hpp"
#include "sensekern/fingerprint.hpp"
#include "sensekern/gram.hpp"
#include "sensekern/kernels.hpp"
#include "sensekern/pyramid.hpp"
#include "sensekern/random.hpp"
#include "sensekern/svm.hpp"
#include "sensekern/text.hpp"

namespace sensekern {

// Stratified k-fold assignment. Within each class, documents are ranked by a
// hash of (seed, id) and dealt round-robin into folds, so the assignment
// depends only on the ids, their classes and the seed, not on input order.
inline std::vector<std::size_t> stratified_folds(std::span<const std::string> ids, std::span<const int> labels,
                                                 std::size_t folds, std::uint64_t seed) {
  if (folds < 2) throw UsageError("cross-validation needs at least 2 folds");
  if (ids.size() != labels.size()) throw UsageError("stratified_folds: ids and labels differ in length");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  std::vector<std::size_t> fold(ids.size(), 0);
  for (auto& [label, members] : by_class) {
    if (members.size() < folds) {
      throw UsageError("class " + std::to_string(label) + " has " + std::to_string(members.size()) +
                       " documents, fewer than " + std::to_string(folds) + " folds");
    }
    std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
      const auto ha = mix_seed(seed, fnv1a64(ids[a]));
      const auto hb = mix_seed(seed, fnv1a64(ids[b]));
      return ha != hb ? ha < hb : ids[a] < ids[b];
    });
    for (std::size_t r = 0; r < members.size(); ++r) fold[members[r]] = r % folds;
  }
  return fold;
}

// Features for one train/evaluation split. `fingerprint` identifies every
// data-derived artifact (vocabulary, visual words) and must depend on the
// training portion only.
template <class Doc>
struct FoldData {
  std::vector<Doc> train;
  std::vector<int> train_labels;
  std::vector<Doc> eval;
  std::vector<int> eval_labels;
  std::size_t eval_excluded = 0;
  Fingerprint fingerprint;
};

// Documents whose features are fixed up front (synthetic corpora, prepared
// pyramids): folds are plain subsets.
template <class Doc>
class FixedFeaturizer {
 public:
  using DocType = Doc;

  FixedFeaturizer(std::vector<Doc> docs, std::vector<int> labels, Fingerprint fp = {})
      : docs_(std::move(docs)), labels_(std::move(labels)), fp_(fp) {
    if (docs_.size() != labels_.size()) throw UsageError("featurizer: documents and labels differ in length");
  }

  std::size_t size() const { return docs_.size(); }
  const std::string& id(std::size_t i) const { return row_id(docs_[i]); }
  int label(std::size_t i) const { return labels_[i]; }

  FoldData<Doc> fold(std::span<const std::size_t> train, std::span<const std::size_t> eval) const {
    FoldData<Doc> out;
    for (auto i : train) {
      out.train.push_back(docs_[i]);
      out.train_labels.push_back(labels_[i]);
    }
    for (auto i : eval) {
      out.eval.push_back(docs_[i]);
      out.eval_labels.push_back(labels_[i]);
    }
    out.fingerprint = fp_;
    return out;
  }

 private:
  std::vector<Doc> docs_;
  std::vector<int> labels_;
  Fingerprint fp_;
};

// Count documents whose vocabulary is re-derived from each training portion:
// a word survives if its total count over the training documents is at least
// min_count; surviving words are renumbered in their original (sorted-term)
// order and other words are dropped from both sides. Documents left empty are
// excluded. With the full term list available the fold fingerprint equals the
// fingerprint build_vocabulary would give for the same training documents.
class CountFeaturizer {
 public:
  using DocType = Document;

  CountFeaturizer(std::vector<Document> docs, std::vector<int> labels, std::size_t min_count = 1,
                  std::vector<std::string> terms = {})
      : docs_(std::move(docs)), labels_(std::move(labels)), min_count_(min_count), terms_(std::move(terms)) {
    if (docs_.size() != labels_.size()) throw UsageError("featurizer: documents and labels differ in length");
    if (min_count_ == 0) throw UsageError("featurizer: min_count must be >= 1");
    if (!docs_.empty() && !terms_.empty() && terms_.size() != docs_.front().counts.vocab_size()) {
      throw UsageError("featurizer: term list does not match the vocabulary size");
    }
  }

  static CountFeaturizer from_corpus(const Corpus& c, const std::vector<std::string>& classes, std::size_t min_count = 1,
                                     std::vector<std::string> terms = {}) {
    return CountFeaturizer(c.documents(), c.class_ids(classes), min_count, std::move(terms));
  }

  std::size_t size() const { return docs_.size(); }
  const std::string& id(std::size_t i) const { return docs_[i].id; }
  int label(std::size_t i) const { return labels_[i]; }

  FoldData<Document> fold(std::span<const std::size_t> train, std::span<const std::size_t> eval) const {
    std::map<WordId, Count> totals;
    for (auto i : train)
      for (const auto& e : docs_[i].counts.entries()) totals[e.word] += e.count;
    std::map<WordId, WordId> remap;
    for (const auto& [w, c] : totals)
      if (c >= min_count_) remap.emplace(w, static_cast<WordId>(remap.size()));
    if (remap.empty()) throw DataError("fold vocabulary is empty");

    Hasher h;
    if (!terms_.empty()) {
      h.field("sensekern-vocab-v1");
      for (const auto& [w, id] : remap) h.field(terms_[w]);
    } else {
      h.field("sensekern-fold-words-v1");
      for (const auto& [w, id] : remap) h.field(std::to_string(w));
    }

    auto restrict = [&](const Document& d) {
      std::vector<CountEntry> entries;
      for (const auto& e : d.counts.entries()) {
        auto it = remap.find(e.word);
        if (it != remap.end()) entries.push_back({it->second, e.count});
      }
      return Document{d.id, CountVector(remap.size(), std::move(entries))};
    };

    FoldData<Document> out;
    out.fingerprint = h.finish();
    for (auto i : train) {
      auto d = restrict(docs_[i]);
      if (d.counts.empty()) continue;
      out.train.push_back(std::move(d));
      out.train_labels.push_back(labels_[i]);
    }
    for (auto i : eval) {
      auto d = restrict(docs_[i]);
      if (d.counts.empty()) {
        ++out.eval_excluded;
        continue;
      }
      out.eval.push_back(std::move(d));
      out.eval_labels.push_back(labels_[i]);
    }
    return out;
  }

 private:
  std::vector<Document> docs_;
  std::vector<int> labels_;
  std::size_t min_count_;
  std::vector<std::string> terms_;
};

// Images as descriptor sets: each fold samples descriptors from its training
// images only, fits the visual vocabulary on them, and builds pyramids.
class DescriptorFeaturizer {
 public:
  using DocType = PyramidDoc;

  DescriptorFeaturizer(std::vector<DescriptorSet> images, std::vector<int> labels, BofOptions opt)
      : images_(std::move(images)), labels_(std::move(labels)), opt_(opt) {
    if (images_.size() != labels_.size()) throw UsageError("featurizer: images and labels differ in length");
  }

  std::size_t size() const { return images_.size(); }
  const std::string& id(std::size_t i) const { return images_[i].image_id; }
  int label(std::size_t i) const { return labels_[i]; }

  FoldData<PyramidDoc> fold(std::span<const std::size_t> train, std::span<const std::size_t> eval) const {
    std::vector<DescriptorSet> train_images;
    for (auto i : train) train_images.push_back(images_[i]);
    const auto samples = sample_descriptors(train_images, opt_.sample_size, opt_.seed);
    const auto vocab = kmeans_fit(samples, opt_.words, opt_.seed, opt_.max_iters, opt_.tol);
    FoldData<PyramidDoc> out;
    out.fingerprint = vocab.fingerprint();
    auto pyramid = [&](const DescriptorSet& im) {
      return build_pyramid(im.image_id, quantize(im, vocab), im.width, im.height, opt_.levels, vocab.words());
    };
    for (auto i : train) {
      out.train.push_back(pyramid(images_[i]));
      out.train_labels.push_back(labels_[i]);
    }
    for (auto i : eval) {
      out.eval.push_back(pyramid(images_[i]));
      out.eval_labels.push_back(labels_[i]);
    }
    return out;
  }

 private:
  std::vector<DescriptorSet> images_;
  std::vector<int> labels_;
  BofOptions opt_;
};

struct CvOptions {
  std::vector<KernelSpec> kernels;
  std::vector<double> c_grid{0.01, 0.1, 1.0, 10.0, 100.0};
  std::size_t folds = 5;
  std::uint64_t seed = 0;
  double tolerance = 1e-3;
  bool shrinking = true;
  unsigned threads = 0;

  void validate() const {
    if (kernels.empty()) throw UsageError("kernel grid is empty");
    if (c_grid.empty()) throw UsageError("C grid is empty");
    if (folds < 2) throw UsageError("cross-validation needs at least 2 folds");
    for (const auto& k : kernels) k.validate();
    for (double c : c_grid)
      if (!(c > 0.0)) throw UsageError("C values must be positive");
  }
};

struct CvRow {
  KernelSpec kernel;
  double C = 1.0;
  std::vector<std::size_t> fold_correct;
  std::vector<std::size_t> fold_total;
  double mean_ccr = 0.0;
};

struct CvReport {
  std::vector<CvRow> rows;  // kernel-major, C-minor, in grid order
  std::size_t selected = 0;
  std::vector<Fingerprint> fold_fingerprints;

  const CvRow& best() const { return rows.at(selected); }
};

namespace detail {

struct Evaluation {
  std::size_t correct = 0;
  std::size_t total = 0;
  std::vector<int> predicted;
};

template <class Doc>
Evaluation train_and_score(const FoldData<Doc>& data, const GramMatrix& train_gram, const GramMatrix& eval_gram,
                           const std::vector<std::string>& classes, const TrainConfig& cfg) {
  auto model = train_one_vs_all(train_gram, data.train_labels, classes, cfg);
  Evaluation ev;
  ev.predicted = predict_multiclass(model, eval_gram);
  ev.total = ev.predicted.size();
  for (std::size_t r = 0; r < ev.total; ++r)
    if (ev.predicted[r] == data.eval_labels[r]) ++ev.correct;
  return ev;
}

// Highest mean CCR; ties go to the smaller C, then to the earlier grid point.
inline std::size_t select_row(const std::vector<CvRow>& rows) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].mean_ccr > rows[best].mean_ccr ||
        (rows[i].mean_ccr == rows[best].mean_ccr && rows[i].C < rows[best].C)) {
      best = i;
    }
  }
  return best;
}

}  // namespace detail

// k-fold cross-validation over the (kernel x C) grid, restricted to the
// featurizer entries listed in `pool`. Features are re-derived per fold from
// the fold's training portion.
template <class Featurizer>
CvReport cross_validate(const Featurizer& feat, std::span<const std::size_t> pool,
                        const std::vector<std::string>& classes, const CvOptions& opt) {
  opt.validate();
  std::vector<std::string> ids;
  std::vector<int> labels;
  for (auto i : pool) {
    ids.push_back(feat.id(i));
    labels.push_back(feat.label(i));
  }
  const auto fold_of = stratified_folds(ids, labels, opt.folds, opt.seed);

  CvReport report;
  for (const auto& k : opt.kernels) {
    for (double c : opt.c_grid) {
      CvRow row;
      row.kernel = k;
      row.C = c;
      report.rows.push_back(row);
    }
  }

  for (std::size_t f = 0; f < opt.folds; ++f) {
    std::vector<std::size_t> train, eval;
    for (std::size_t p = 0; p < pool.size(); ++p) (fold_of[p] == f ? eval : train).push_back(pool[p]);
    const auto data = feat.fold(train, eval);
    report.fold_fingerprints.push_back(data.fingerprint);
    using Doc = typename Featurizer::DocType;
    std::span<const Doc> tr(data.train), ev(data.eval);
    for (std::size_t k = 0; k < opt.kernels.size(); ++k) {
      const auto train_gram = build_gram(tr, tr, opt.kernels[k], opt.threads);
      const auto eval_gram = build_gram(ev, tr, opt.kernels[k], opt.threads);
      for (std::size_t ci = 0; ci < opt.c_grid.size(); ++ci) {
        TrainConfig cfg;
        cfg.C = opt.c_grid[ci];
        cfg.tolerance = opt.tolerance;
        cfg.shrinking = opt.shrinking;
        const auto result = detail::train_and_score(data, train_gram, eval_gram, classes, cfg);
        auto& row = report.rows[k * opt.c_grid.size() + ci];
        row.fold_correct.push_back(result.correct);
        row.fold_total.push_back(result.total);
      }
    }
  }

  for (auto& row : report.rows) {
    double sum = 0.0;
    for (std::size_t f = 0; f < row.fold_total.size(); ++f) {
      sum += row.fold_total[f] ? static_cast<double>(row.fold_correct[f]) / static_cast<double>(row.fold_total[f])
                               : 0.0;
    }
    row.mean_ccr = sum / static_cast<double>(row.fold_total.size());
  }
  report.selected = detail::select_row(report.rows);
  return report;
}

template <class Featurizer>
CvReport cross_validate(const Featurizer& feat, const std::vector<std::string>& classes, const CvOptions& opt) {
  std::vector<std::size_t> pool(feat.size());
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  return cross_validate(feat, pool, classes, opt);
}

struct Report {
  std::string name;
  std::vector<std::string> classes;
  std::size_t folds = 0;
  std::uint64_t seed = 0;
  CvReport cv;
  KernelSpec selected_kernel;
  double selected_C = 1.0;
  std::size_t test_correct = 0;
  std::size_t test_total = 0;
  std::size_t test_excluded = 0;
  std::vector<std::vector<std::size_t>> confusion;  // [true class][predicted class]
  std::vector<std::pair<std::string, double>> timings;  // seconds

  double test_ccr() const {
    return test_total ? static_cast<double>(test_correct) / static_cast<double>(test_total) : 0.0;
  }

  // Human-readable report without timings; identical across reruns.
  std::string body() const {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4);
    os << "experiment: " << name << '\n';
    os << "classes (" << classes.size() << "):";
    for (const auto& c : classes) os << ' ' << c;
    os << '\n';
    os << "cross-validation: " << folds << " folds, seed " << seed << '\n';
    os << "  " << std::left << std::setw(44) << "kernel" << std::setw(12) << "C" << "mean CCR %\n";
    for (std::size_t i = 0; i < cv.rows.size(); ++i) {
      const auto& r = cv.rows[i];
      std::ostringstream c;
      c << std::setprecision(6) << r.C;
      os << (i == cv.selected ? "* " : "  ") << std::setw(44) << r.kernel.to_string() << std::setw(12) << c.str()
         << 100.0 * r.mean_ccr << '\n';
    }
    std::ostringstream c;
    c << std::setprecision(6) << selected_C;
    os << "selected: " << selected_kernel.to_string() << " C=" << c.str() << '\n';
    os << "test CCR: " << 100.0 * test_ccr() << "% (" << test_correct << '/' << test_total << ")";
    if (test_excluded) os << ", " << test_excluded << " empty test documents excluded";
    os << '\n';
    os << "confusion (rows = true class, columns = predicted):\n";
    for (std::size_t t = 0; t < confusion.size(); ++t) {
      os << "  " << std::setw(28) << classes[t];
      for (auto v : confusion[t]) os << ' ' << std::right << std::setw(6) << v << std::left;
      os << '\n';
    }
    return os.str();
  }

  std::string timings_text() const {
    std::ostringstream os;
    os << std::fixed << std::setprecision(3);
    for (const auto& [stage, secs] : timings) os << "time " << stage << ": " << secs << " s\n";
    return os.str();
  }

  // Machine-readable key=value lines (timings last).
  std::string key_values() const {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "name=" << name << '\n';
    os << "classes=" << classes.size() << '\n';
    for (std::size_t i = 0; i < classes.size(); ++i) os << "class." << i << '=' << classes[i] << '\n';
    os << "cv.folds=" << folds << '\n' << "cv.seed=" << seed << '\n';
    for (std::size_t i = 0; i < cv.rows.size(); ++i) {
      const auto& r = cv.rows[i];
      os << "cv." << i << ".kernel=" << r.kernel.to_string() << '\n';
      os << "cv." << i << ".C=" << r.C << '\n';
      os << "cv." << i << ".mean_ccr=" << r.mean_ccr << '\n';
    }
    os << "selected.index=" << cv.selected << '\n';
    os << "selected.kernel=" << selected_kernel.to_string() << '\n';
    os << "selected.C=" << selected_C << '\n';
    os << "test.correct=" << test_correct << '\n';
    os << "test.total=" << test_total << '\n';
    os << "test.excluded=" << test_excluded << '\n';
    os << "test.ccr=" << test_ccr() << '\n';
    for (std::size_t t = 0; t < confusion.size(); ++t)
      for (std::size_t p = 0; p < confusion[t].size(); ++p)
        os << "confusion." << t << '.' << p << '=' << confusion[t][p] << '\n';
    for (const auto& [stage, secs] : timings) os << "timing." << stage << '=' << secs << '\n';
    return os.str();
  }
};

// Cross-validate on the training entries, retrain the selected configuration
// on all of them, and evaluate on the test entries.
template <class Featurizer>
Report run_experiment(const Featurizer& feat, std::span<const std::size_t> train_idx,
                      std::span<const std::size_t> test_idx, const std::vector<std::string>& classes,
                      const CvOptions& opt, std::string name = "experiment") {
  if (test_idx.empty()) throw UsageError("experiment: test set is empty");
  if (train_idx.empty()) throw UsageError("experiment: training set is empty");
  using Clock = std::chrono::steady_clock;
  auto seconds = [](Clock::time_point a, Clock::time_point b) { return std::chrono::duration<double>(b - a).count(); };

  Report rep;
  rep.name = std::move(name);
  rep.classes = classes;
  rep.folds = opt.folds;
  rep.seed = opt.seed;

  auto t0 = Clock::now();
  try {
    rep.cv = cross_validate(feat, train_idx, classes, opt);
  } catch (const UsageError& e) {
    throw UsageError(std::string("cross-validation: ") + e.what());
  } catch (const DataError& e) {
    throw DataError(std::string("cross-validation: ") + e.what());
  }
  auto t1 = Clock::now();
  rep.timings.emplace_back("cross_validation", seconds(t0, t1));
  rep.selected_kernel = rep.cv.best().kernel;
  rep.selected_C = rep.cv.best().C;

  try {
    const auto data = feat.fold(train_idx, test_idx);
    using Doc = typename Featurizer::DocType;
    std::span<const Doc> tr(data.train), te(data.eval);
    const auto train_gram = build_gram(tr, tr, rep.selected_kernel, opt.threads);
    const auto test_gram = build_gram(te, tr, rep.selected_kernel, opt.threads);
    auto t2 = Clock::now();
    rep.timings.emplace_back("final_grams", seconds(t1, t2));
    TrainConfig cfg;
    cfg.C = rep.selected_C;
    cfg.tolerance = opt.tolerance;
    cfg.shrinking = opt.shrinking;
    const auto ev = detail::train_and_score(data, train_gram, test_gram, classes, cfg);
    rep.timings.emplace_back("final_train_predict", seconds(t2, Clock::now()));
    rep.test_correct = ev.correct;
    rep.test_total = ev.total;
    rep.test_excluded = data.eval_excluded;
    rep.confusion.assign(classes.size(), std::vector<std::size_t>(classes.size(), 0));
    for (std::size_t r = 0; r < ev.total; ++r) ++rep.confusion[data.eval_labels[r]][ev.predicted[r]];
  } catch (const UsageError& e) {
    throw UsageError(std::string("final evaluation: ") + e.what());
  } catch (const DataError& e) {
    throw DataError(std::string("final evaluation: ") + e.what());
  }
  return rep;
}

// Median pairwise Euclidean distance between word-frequency vectors of (up to
// the first `limit`) documents; the centre of the default RBF bandwidth grid.
inline double median_frequency_distance(std::span<const Document> docs, std::size_t limit = 300) {
  const std::size_t n = std::min(limit, docs.size());
  std::vector<FrequencyVector> f;
  for (std::size_t i = 0; i < n; ++i) f.emplace_back(docs[i].counts);
  std::vector<double> d;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) d.push_back(std::sqrt(squared_distance(f[i], f[j])));
  if (d.empty()) return 1.0;
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2), d.end());
  const double med = d[d.size() / 2];
  return med > 0.0 ? med : 1.0;
}

// Default hyperparameter grid for a family: n and N in {50, 150, 500}; RBF
// bandwidths log-spaced (factor 2) around the median pairwise distance.
inline std::vector<KernelSpec> default_kernel_grid(KernelFamily family, std::span<const Document> docs,
                                                   std::uint64_t seed) {
  std::vector<KernelSpec> out;
  KernelSpec base;
  base.family = family;
  base.seed = seed;
  switch (family) {
    case KernelFamily::Sensing1:
      for (std::uint32_t n : {50u, 150u, 500u}) {
        base.n = n;
        out.push_back(base);
      }
      break;
    case KernelFamily::Sensing2:
      for (std::uint32_t n : {50u, 150u, 500u}) {
        base.resample_n = n;
        out.push_back(base);
      }
      break;
    case KernelFamily::Rbf: {
      const double med = median_frequency_distance(docs);
      for (double f : {0.25, 0.5, 1.0, 2.0, 4.0}) {
        base.sigma = med * f;
        out.push_back(base);
      }
      break;
    }
    default:
      out.push_back(base);
  }
  return out;
}

}  // namespace sensekern
