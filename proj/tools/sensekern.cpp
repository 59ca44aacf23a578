// sensekern: command-line front end.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "acceptance_suite.hpp"
#include "sensekern/sensekern.hpp"

namespace fs = std::filesystem;
using namespace sensekern;

namespace {

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + p.string());
  return os;
}

std::ifstream open_in(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw ConfigError("cannot open " + p.string());
  return is;
}

std::string first_line(const fs::path& p) {
  auto is = open_in(p);
  std::string line;
  std::getline(is, line);
  return line;
}

bool is_pyramid_corpus(const fs::path& p) { return first_line(p) == "sensekern-pyramid 1"; }

PyramidCorpus load_pyramid_corpus(const fs::path& p) {
  auto is = open_in(p);
  return read_pyramid_corpus(is);
}

// Kernel specs from --kernel strings. A Sensing 2 spec without its own
// "seed=" takes --seed, which is then mandatory.
std::vector<KernelSpec> parse_kernels(const std::vector<std::string>& texts, std::optional<std::uint64_t> seed) {
  std::vector<KernelSpec> out;
  for (const auto& t : texts) {
    auto spec = KernelSpec::parse(t);
    if (spec.family == KernelFamily::Sensing2 && t.find("seed=") == std::string::npos) {
      if (!seed) throw UsageError("kernel '" + t + "' is randomized: --seed is required");
      spec.seed = *seed;
    }
    out.push_back(spec);
  }
  return out;
}

std::vector<RawDocument> read_raw(const fs::path& p, const std::vector<std::string>& classes) {
  if (fs::is_directory(p)) return read_class_directory(p, classes);
  auto docs = read_tsv(p);
  if (!classes.empty()) {
    std::erase_if(docs, [&](const RawDocument& d) {
      return std::find(classes.begin(), classes.end(), d.label) == classes.end();
    });
  }
  return docs;
}

void write_report(const Report& rep, const fs::path& dir) {
  fs::create_directories(dir);
  {
    auto os = open_out(dir / "report.txt");
    os << rep.body() << rep.timings_text();
  }
  {
    auto os = open_out(dir / "report.kv");
    os << rep.key_values();
  }
  std::cout << rep.body();
  std::cout << "wrote " << (dir / "report.txt").string() << " and " << (dir / "report.kv").string() << '\n';
}

// Union of the two label sets, sorted.
std::vector<std::string> merge_labels(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  std::sort(a.begin(), a.end());
  a.erase(std::unique(a.begin(), a.end()), a.end());
  return a;
}

struct GridArgs {
  std::vector<std::string> kernels;
  std::string family;
  std::vector<double> c_grid;
  std::size_t folds = 5;
  std::optional<std::uint64_t> seed;
  std::size_t min_count = 1;
  double tolerance = 1e-3;
  unsigned threads = 0;
};

void add_grid_options(CLI::App* cmd, GridArgs& g) {
  cmd->add_option("--kernel", g.kernels, "kernel spec, repeatable (e.g. sensing1:n=150, rbf:sigma=0.1)");
  cmd->add_option("--family", g.family, "use the default grid of a family (sensing1, sensing2, rbf, ...)");
  cmd->add_option("--C", g.c_grid, "C grid (default 0.01 0.1 1 10 100)")->delimiter(',');
  cmd->add_option("--folds", g.folds, "cross-validation folds")->capture_default_str();
  cmd->add_option("--seed", g.seed, "seed for folds and randomized kernels")->required();
  cmd->add_option("--min-count", g.min_count, "per-fold vocabulary threshold")->capture_default_str();
  cmd->add_option("--tolerance", g.tolerance, "SMO stopping tolerance")->capture_default_str();
  cmd->add_option("--threads", g.threads, "Gram worker threads (0 = hardware)");
}

template <class DocSpan>
CvOptions grid_options(const GridArgs& g, const DocSpan& docs_for_defaults) {
  CvOptions opt;
  opt.seed = *g.seed;
  opt.folds = g.folds;
  opt.tolerance = g.tolerance;
  opt.threads = g.threads;
  if (!g.c_grid.empty()) opt.c_grid = g.c_grid;
  opt.kernels = parse_kernels(g.kernels, g.seed);
  if (!g.family.empty()) {
    auto family = KernelSpec::parse(g.family).family;
    for (const auto& k : docs_for_defaults(family)) opt.kernels.push_back(k);
  }
  if (opt.kernels.empty()) throw UsageError("give at least one --kernel or a --family");
  return opt;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sensing-aware kernels for bag-of-words classification"};
  app.require_subcommand(1);

  // prepare-text
  struct {
    std::string train, test, out, stoplist = "smart";
    std::vector<std::string> classes;
    bool strip_headers = false, drop_subject = false;
    std::size_t min_count = 1;
  } pt;
  auto* prep_text = app.add_subcommand("prepare-text", "tokenize text and write vocabulary and count corpora");
  prep_text->add_option("--train", pt.train, "training split: class directory tree or id<TAB>label<TAB>text file")
      ->required();
  prep_text->add_option("--test", pt.test, "test split, same forms as --train")->required();
  prep_text->add_option("--classes", pt.classes, "restrict to these classes")->delimiter(',');
  prep_text->add_option("--stoplist", pt.stoplist, "'smart' (built in), 'none', or a file")->capture_default_str();
  prep_text->add_flag("--strip-headers", pt.strip_headers, "drop the newsgroup header block");
  prep_text->add_flag("--drop-subject", pt.drop_subject, "with --strip-headers, also drop the Subject line");
  prep_text->add_option("--min-count", pt.min_count, "minimum training count for a vocabulary word")
      ->capture_default_str();
  prep_text->add_option("--out", pt.out, "output directory")->required();

  // prepare-bof
  struct {
    std::string train, test, out;
    BofOptions opt;
    std::optional<std::uint64_t> seed;
  } pb;
  auto* prep_bof = app.add_subcommand("prepare-bof", "fit a visual vocabulary and build spatial pyramids");
  prep_bof->add_option("--train", pb.train, "training descriptors: root/<class>/<file>")->required();
  prep_bof->add_option("--test", pb.test, "test descriptors, same layout")->required();
  prep_bof->add_option("--words", pb.opt.words, "visual vocabulary size")->capture_default_str();
  prep_bof->add_option("--sample", pb.opt.sample_size, "descriptors sampled for k-means")->capture_default_str();
  prep_bof->add_option("--levels", pb.opt.levels, "pyramid levels above the whole image")->capture_default_str();
  prep_bof->add_option("--max-iters", pb.opt.max_iters, "k-means iteration cap")->capture_default_str();
  prep_bof->add_option("--seed", pb.seed, "seed for sampling and k-means")->required();
  prep_bof->add_option("--out", pb.out, "output directory")->required();

  // gram
  struct {
    std::string rows, cols, kernel, out;
    std::optional<std::uint64_t> seed;
    bool text = false;
    unsigned threads = 0;
  } gr;
  auto* gram = app.add_subcommand("gram", "compute a Gram matrix");
  gram->add_option("--rows", gr.rows, "row corpus")->required();
  gram->add_option("--cols", gr.cols, "column corpus (default: same as rows)");
  gram->add_option("--kernel", gr.kernel, "kernel spec")->required();
  gram->add_option("--seed", gr.seed, "seed for Sensing 2 resampling");
  gram->add_option("--out", gr.out, "output file (an .ids sidecar is written next to it)")->required();
  gram->add_flag("--text", gr.text, "write text instead of binary");
  gram->add_option("--threads", gr.threads, "worker threads (0 = hardware)");

  // train
  struct {
    std::string gram, corpus, out;
    TrainConfig cfg;
    bool no_shrinking = false;
  } tr;
  auto* train = app.add_subcommand("train", "train one-vs-all SVMs on a precomputed Gram");
  train->add_option("--gram", tr.gram, "training Gram (rows = cols = training documents)")->required();
  train->add_option("--corpus", tr.corpus, "training corpus (labels)")->required();
  train->add_option("--C", tr.cfg.C, "box constraint")->capture_default_str();
  train->add_option("--tolerance", tr.cfg.tolerance, "stopping tolerance")->capture_default_str();
  train->add_flag("--no-shrinking", tr.no_shrinking, "disable shrinking");
  train->add_option("--out", tr.out, "model file")->required();

  // predict
  struct {
    std::string model, gram, corpus, out;
  } pr;
  auto* predict = app.add_subcommand("predict", "predict from a test-vs-train Gram");
  predict->add_option("--model", pr.model, "model file")->required();
  predict->add_option("--gram", pr.gram, "test-vs-train Gram")->required();
  predict->add_option("--corpus", pr.corpus, "test corpus; when given, CCR is reported");
  predict->add_option("--out", pr.out, "predictions file (id<TAB>class)");

  // cv
  GridArgs cvg;
  std::string cv_corpus, cv_out;
  auto* cv = app.add_subcommand("cv", "k-fold cross-validation over a kernel x C grid");
  cv->add_option("--corpus", cv_corpus, "training corpus")->required();
  add_grid_options(cv, cvg);
  cv->add_option("--out", cv_out, "write the CV table here");

  // experiment
  GridArgs exg;
  struct {
    std::string train, test, train_desc, test_desc, out, name = "experiment";
    BofOptions bof;
  } ex;
  auto* exp = app.add_subcommand("experiment", "cross-validate, retrain, evaluate, and write a report");
  exp->add_option("--train", ex.train, "training corpus");
  exp->add_option("--test", ex.test, "test corpus");
  exp->add_option("--train-descriptors", ex.train_desc, "training descriptor tree (per-fold visual vocabulary)");
  exp->add_option("--test-descriptors", ex.test_desc, "test descriptor tree");
  exp->add_option("--words", ex.bof.words, "visual vocabulary size")->capture_default_str();
  exp->add_option("--sample", ex.bof.sample_size, "descriptors sampled for k-means")->capture_default_str();
  exp->add_option("--levels", ex.bof.levels, "pyramid levels")->capture_default_str();
  exp->add_option("--name", ex.name, "experiment name in the report");
  add_grid_options(exp, exg);
  exp->add_option("--out", ex.out, "report directory")->required();

  // verify
  std::vector<int> only;
  auto* ver = app.add_subcommand("verify", "run the oracle and acceptance suites");
  ver->add_option("--only", only, "criterion numbers to run")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*prep_text) {
      Stoplist stop;
      if (pt.stoplist == "smart") stop = Stoplist::smart();
      else if (pt.stoplist != "none") stop = Stoplist::load(pt.stoplist);
      TextOptions opt;
      opt.strip_headers = pt.strip_headers;
      opt.keep_subject = !pt.drop_subject;
      opt.min_count = pt.min_count;
      const auto train_raw = read_raw(pt.train, pt.classes);
      const auto test_raw = read_raw(pt.test, pt.classes);
      const auto prepared = prepare_text(train_raw, test_raw, stop, opt);
      const fs::path out(pt.out);
      {
        auto os = open_out(out / "vocab.txt");
        write_vocabulary(os, prepared.vocab);
      }
      save_corpus((out / "train.corpus").string(), prepared.train);
      save_corpus((out / "test.corpus").string(), prepared.test);
      std::cout << "vocabulary " << prepared.vocab.size() << " words; train " << prepared.train.docs.size()
                << " docs, test " << prepared.test.docs.size() << " docs, " << prepared.excluded.size()
                << " empty documents excluded\n";
    } else if (*prep_bof) {
      pb.opt.seed = *pb.seed;
      const auto train_images = read_descriptor_directory(pb.train);
      const auto test_images = read_descriptor_directory(pb.test);
      const auto prepared = prepare_bof(train_images, test_images, pb.opt);
      const fs::path out(pb.out);
      {
        auto os = open_out(out / "visual_vocab.txt");
        write_visual_vocabulary(os, prepared.vocab);
      }
      {
        auto os = open_out(out / "train.pyramid");
        write_pyramid_corpus(os, prepared.train);
      }
      {
        auto os = open_out(out / "test.pyramid");
        write_pyramid_corpus(os, prepared.test);
      }
      std::cout << "visual vocabulary " << prepared.vocab.words() << " words (" << prepared.vocab.iterations
                << " iterations); train " << prepared.train.docs.size() << " images, test "
                << prepared.test.docs.size() << " images\n";
    } else if (*gram) {
      const auto spec = parse_kernels({gr.kernel}, gr.seed).front();
      const std::string cols = gr.cols.empty() ? gr.rows : gr.cols;
      GramMatrix g;
      if (is_pyramid_corpus(gr.rows)) {
        const auto r = load_pyramid_corpus(gr.rows).documents();
        if (cols == gr.rows) {
          g = build_gram(std::span<const PyramidDoc>(r), spec, gr.threads);
        } else {
          const auto c = load_pyramid_corpus(cols).documents();
          g = build_gram(std::span<const PyramidDoc>(r), std::span<const PyramidDoc>(c), spec, gr.threads);
        }
      } else {
        const auto rc = load_corpus(gr.rows);
        const auto r = rc.documents();
        if (cols == gr.rows) {
          g = build_gram(std::span<const Document>(r), spec, gr.threads);
        } else {
          const auto cc = load_corpus(cols);
          if (cc.vocab_fingerprint != rc.vocab_fingerprint)
            throw UsageError("row and column corpora use different vocabularies");
          const auto c = cc.documents();
          g = build_gram(std::span<const Document>(r), std::span<const Document>(c), spec, gr.threads);
        }
      }
      save_gram(gr.out, g, gr.text);
      std::cout << "wrote " << g.rows() << "x" << g.cols() << " Gram (" << spec.to_string() << ") to " << gr.out
                << '\n';
    } else if (*train) {
      tr.cfg.shrinking = !tr.no_shrinking;
      const auto g = load_gram(tr.gram);
      std::vector<std::string> ids;
      std::vector<std::string> labels;
      if (is_pyramid_corpus(tr.corpus)) {
        for (const auto& d : load_pyramid_corpus(tr.corpus).docs) {
          ids.push_back(d.doc.id);
          labels.push_back(d.label);
        }
      } else {
        for (const auto& d : load_corpus(tr.corpus).docs) {
          ids.push_back(d.doc.id);
          labels.push_back(d.label);
        }
      }
      if (ids != g.row_ids()) throw UsageError("Gram rows do not match the corpus documents");
      auto classes = labels;
      std::sort(classes.begin(), classes.end());
      classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
      std::vector<int> y;
      for (const auto& l : labels)
        y.push_back(static_cast<int>(std::lower_bound(classes.begin(), classes.end(), l) - classes.begin()));
      const auto model = train_one_vs_all(g, y, classes, tr.cfg);
      auto os = open_out(tr.out);
      write_multiclass_model(os, model);
      std::size_t sv = 0;
      for (const auto& m : model.models) sv += m.support.size();
      std::cout << "trained " << model.models.size() << " binary model(s) over " << classes.size() << " classes, "
                << sv << " support vectors\n";
    } else if (*predict) {
      auto ms = open_in(pr.model);
      const auto model = read_multiclass_model(ms);
      const auto g = load_gram(pr.gram);
      const auto pred = predict_multiclass(model, g);
      if (!pr.out.empty()) {
        auto os = open_out(pr.out);
        for (std::size_t i = 0; i < pred.size(); ++i) os << g.row_ids()[i] << '\t' << model.classes[pred[i]] << '\n';
      }
      if (!pr.corpus.empty()) {
        std::map<std::string, std::string> truth;
        if (is_pyramid_corpus(pr.corpus)) {
          for (const auto& d : load_pyramid_corpus(pr.corpus).docs) truth[d.doc.id] = d.label;
        } else {
          for (const auto& d : load_corpus(pr.corpus).docs) truth[d.doc.id] = d.label;
        }
        std::size_t correct = 0;
        for (std::size_t i = 0; i < pred.size(); ++i) {
          auto it = truth.find(g.row_ids()[i]);
          if (it == truth.end()) throw UsageError("no label for test document " + g.row_ids()[i]);
          if (it->second == model.classes[pred[i]]) ++correct;
        }
        std::cout << "CCR " << std::fixed << std::setprecision(4)
                  << 100.0 * static_cast<double>(correct) / static_cast<double>(pred.size()) << "% (" << correct << '/'
                  << pred.size() << ")\n";
      } else if (pr.out.empty()) {
        for (std::size_t i = 0; i < pred.size(); ++i)
          std::cout << g.row_ids()[i] << '\t' << model.classes[pred[i]] << '\n';
      }
    } else if (*cv) {
      CvReport rep;
      std::vector<std::string> classes;
      std::ostringstream table;
      auto print_rows = [&](const CvReport& r) {
        table << std::fixed << std::setprecision(4);
        for (std::size_t i = 0; i < r.rows.size(); ++i) {
          table << (i == r.selected ? "* " : "  ") << r.rows[i].kernel.to_string() << "\tC=" << std::defaultfloat
                << r.rows[i].C << std::fixed << "\tmean CCR " << 100.0 * r.rows[i].mean_ccr << "%\n";
        }
      };
      if (is_pyramid_corpus(cv_corpus)) {
        const auto corpus = load_pyramid_corpus(cv_corpus);
        classes = corpus.label_set();
        const auto opt = grid_options(cvg, [&](KernelFamily f) {
          auto grid = default_kernel_grid(f, {}, *cvg.seed);
          for (auto& k : grid) k.pyramid_weights = default_pyramid_weights(corpus.levels);
          return grid;
        });
        FixedFeaturizer<PyramidDoc> feat(corpus.documents(), corpus.class_ids(classes), corpus.vocab_fingerprint);
        rep = cross_validate(feat, classes, opt);
      } else {
        const auto corpus = load_corpus(cv_corpus);
        classes = corpus.label_set();
        const auto docs = corpus.documents();
        const auto opt =
            grid_options(cvg, [&](KernelFamily f) { return default_kernel_grid(f, docs, *cvg.seed); });
        const auto feat = CountFeaturizer::from_corpus(corpus, classes, cvg.min_count);
        rep = cross_validate(feat, classes, opt);
      }
      print_rows(rep);
      std::cout << table.str();
      if (!cv_out.empty()) {
        auto os = open_out(cv_out);
        os << table.str();
      }
    } else if (*exp) {
      Report rep;
      if (!ex.train_desc.empty() || !ex.test_desc.empty()) {
        if (ex.train_desc.empty() || ex.test_desc.empty())
          throw UsageError("give both --train-descriptors and --test-descriptors");
        ex.bof.seed = *exg.seed;
        auto images = read_descriptor_directory(ex.train_desc);
        const auto test_images = read_descriptor_directory(ex.test_desc);
        const std::size_t n_train = images.size();
        images.insert(images.end(), test_images.begin(), test_images.end());
        std::vector<std::string> train_labels, test_labels;
        for (std::size_t i = 0; i < images.size(); ++i) (i < n_train ? train_labels : test_labels).push_back(images[i].label);
        auto classes = merge_labels(train_labels, {});
        std::vector<int> y;
        for (const auto& im : images) {
          auto it = std::lower_bound(classes.begin(), classes.end(), im.label);
          if (it == classes.end() || *it != im.label)
            throw DataError("test label '" + im.label + "' does not occur in training");
          y.push_back(static_cast<int>(it - classes.begin()));
        }
        auto opt = grid_options(exg, [&](KernelFamily f) { return default_kernel_grid(f, {}, *exg.seed); });
        for (auto& k : opt.kernels)
          if (k.pyramid_weights.empty()) k.pyramid_weights = default_pyramid_weights(ex.bof.levels);
        std::vector<std::size_t> train_idx(n_train), test_idx(images.size() - n_train);
        std::iota(train_idx.begin(), train_idx.end(), std::size_t{0});
        std::iota(test_idx.begin(), test_idx.end(), n_train);
        const DescriptorFeaturizer feat(std::move(images), std::move(y), ex.bof);
        rep = run_experiment(feat, train_idx, test_idx, classes, opt, ex.name);
      } else {
        if (ex.train.empty() || ex.test.empty()) throw UsageError("give --train and --test corpora");
        if (is_pyramid_corpus(ex.train)) {
          const auto trc = load_pyramid_corpus(ex.train);
          const auto tec = load_pyramid_corpus(ex.test);
          if (trc.vocab_fingerprint != tec.vocab_fingerprint)
            throw UsageError("train and test pyramids use different visual vocabularies");
          const auto classes = trc.label_set();
          auto docs = trc.documents();
          auto y = trc.class_ids(classes);
          const auto tdocs = tec.documents();
          const auto ty = tec.class_ids(classes);
          std::vector<std::size_t> train_idx(docs.size()), test_idx(tdocs.size());
          std::iota(train_idx.begin(), train_idx.end(), std::size_t{0});
          std::iota(test_idx.begin(), test_idx.end(), docs.size());
          docs.insert(docs.end(), tdocs.begin(), tdocs.end());
          y.insert(y.end(), ty.begin(), ty.end());
          auto opt = grid_options(exg, [&](KernelFamily f) { return default_kernel_grid(f, {}, *exg.seed); });
          for (auto& k : opt.kernels)
            if (k.pyramid_weights.empty()) k.pyramid_weights = default_pyramid_weights(trc.levels);
          FixedFeaturizer<PyramidDoc> feat(std::move(docs), std::move(y), trc.vocab_fingerprint);
          rep = run_experiment(feat, train_idx, test_idx, classes, opt, ex.name);
        } else {
          const auto trc = load_corpus(ex.train);
          const auto tec = load_corpus(ex.test);
          if (trc.vocab_fingerprint != tec.vocab_fingerprint)
            throw UsageError("train and test corpora use different vocabularies");
          const auto classes = trc.label_set();
          auto docs = trc.documents();
          auto y = trc.class_ids(classes);
          const auto tdocs = tec.documents();
          const auto ty = tec.class_ids(classes);
          std::vector<std::size_t> train_idx(docs.size()), test_idx(tdocs.size());
          std::iota(train_idx.begin(), train_idx.end(), std::size_t{0});
          std::iota(test_idx.begin(), test_idx.end(), docs.size());
          const auto train_docs = docs;
          docs.insert(docs.end(), tdocs.begin(), tdocs.end());
          y.insert(y.end(), ty.begin(), ty.end());
          const auto opt =
              grid_options(exg, [&](KernelFamily f) { return default_kernel_grid(f, train_docs, *exg.seed); });
          const CountFeaturizer feat(std::move(docs), std::move(y), exg.min_count);
          rep = run_experiment(feat, train_idx, test_idx, classes, opt, ex.name);
        }
      }
      write_report(rep, ex.out);
    } else if (*ver) {
      return acceptance::run(std::cout, only) ? kExitOk : 1;
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}
