#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
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
#include "sensekern/random.hpp"
#include "sensekern/text.hpp"

namespace sensekern {

struct Point {
  float x = 0.f;
  float y = 0.f;
};

// Local descriptors of one image: positions in pixels plus a row-major
// count x dim matrix of descriptor values.
struct DescriptorSet {
  std::string image_id;
  std::string label;
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint32_t dim = 0;
  std::vector<Point> positions;
  std::vector<float> values;

  std::size_t count() const { return positions.size(); }
  std::span<const float> descriptor(std::size_t i) const { return {values.data() + i * dim, dim}; }

  void validate() const {
    if (width == 0 || height == 0) throw DataError(image_id + ": image dimensions must be positive");
    if (dim == 0) throw DataError(image_id + ": descriptor dimension must be positive");
    if (values.size() != positions.size() * dim) throw DataError(image_id + ": descriptor matrix has wrong size");
    for (const auto& p : positions) {
      if (!(p.x >= 0.f && p.x <= static_cast<float>(width) && p.y >= 0.f && p.y <= static_cast<float>(height))) {
        throw DataError(image_id + ": descriptor position outside the image");
      }
    }
  }
};

// Row-major matrix of training descriptors for vocabulary fitting.
struct SampleMatrix {
  std::size_t dim = 0;
  std::vector<double> values;

  std::size_t rows() const { return dim ? values.size() / dim : 0; }
  std::span<const double> row(std::size_t i) const { return {values.data() + i * dim, dim}; }
};

struct VisualVocabulary {
  std::size_t dim = 0;
  std::vector<double> centroids;  // words() x dim, row-major
  std::size_t iterations = 0;
  double inertia = 0.0;
  std::uint64_t seed = 0;

  std::size_t words() const { return dim ? centroids.size() / dim : 0; }
  std::span<const double> centroid(std::size_t w) const { return {centroids.data() + w * dim, dim}; }

  Fingerprint fingerprint() const {
    Hasher h;
    h.field("sensekern-visual-vocab-v1").field(std::to_string(dim));
    for (double c : centroids) {
      const auto bits = std::bit_cast<std::uint64_t>(c);
      char b[8];
      for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
      h.update(std::string_view(b, 8));
    }
    return h.finish();
  }
};

namespace detail {

template <class A, class B>
double squared_euclidean(std::span<const A> a, std::span<const B> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = static_cast<double>(a[k]) - static_cast<double>(b[k]);
    s += d * d;
  }
  return s;
}

// Nearest centroid by squared Euclidean distance; ties go to the lowest id.
template <class T>
std::pair<WordId, double> nearest_centroid(std::span<const T> x, const VisualVocabulary& vocab) {
  WordId best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t w = 0; w < vocab.words(); ++w) {
    const double d = squared_euclidean(x, vocab.centroid(w));
    if (d < best_d) {
      best_d = d;
      best = static_cast<WordId>(w);
    }
  }
  return {best, best_d};
}

}  // namespace detail

// Lloyd's algorithm with k-means++ seeding. Stops after max_iters rounds or
// when no centroid moves by tol or more. A cluster that loses all its points
// is re-seeded at the sample farthest from its assigned centroid.
inline VisualVocabulary kmeans_fit(const SampleMatrix& samples, std::size_t words, std::uint64_t seed,
                                   std::size_t max_iters = 100, double tol = 1e-6) {
  const std::size_t n = samples.rows();
  const std::size_t dim = samples.dim;
  if (words < 1) throw UsageError("kmeans: number of words must be positive");
  if (n < words) {
    throw UsageError("kmeans: " + std::to_string(n) + " samples cannot form " + std::to_string(words) + " clusters");
  }
  VisualVocabulary vocab;
  vocab.dim = dim;
  vocab.seed = seed;
  vocab.centroids.resize(words * dim);
  auto set_centroid = [&](std::size_t w, std::size_t sample) {
    auto r = samples.row(sample);
    std::copy(r.begin(), r.end(), vocab.centroids.begin() + static_cast<std::ptrdiff_t>(w * dim));
  };

  auto eng = make_engine(seed, 0x6b6d65616e73ULL);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::size_t first = uniform_below(eng, n);
  set_centroid(0, first);
  for (std::size_t w = 1; w < words; ++w) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], detail::squared_euclidean(samples.row(i), vocab.centroid(w - 1)));
      total += d2[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      const double target = uniform01(eng) * total;
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc > target && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
      while (d2[pick] == 0.0 && pick > 0) --pick;
    }
    set_centroid(w, pick);
  }

  std::vector<WordId> assign(n, 0);
  std::vector<double> dist(n, 0.0);
  auto assign_all = [&] {
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      auto [w, d] = detail::nearest_centroid(samples.row(i), vocab);
      assign[i] = w;
      dist[i] = d;
      inertia += d;
    }
    return inertia;
  };

  std::size_t iter = 0;
  for (; iter < max_iters; ++iter) {
    assign_all();
    std::vector<double> sums(words * dim, 0.0);
    std::vector<std::size_t> sizes(words, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++sizes[assign[i]];
      auto r = samples.row(i);
      for (std::size_t k = 0; k < dim; ++k) sums[assign[i] * dim + k] += r[k];
    }
    double shift = 0.0;
    for (std::size_t w = 0; w < words; ++w) {
      std::vector<double> next(dim);
      if (sizes[w] == 0) {
        const auto far = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
        auto r = samples.row(far);
        std::copy(r.begin(), r.end(), next.begin());
        dist[far] = 0.0;
      } else {
        for (std::size_t k = 0; k < dim; ++k) next[k] = sums[w * dim + k] / static_cast<double>(sizes[w]);
      }
      shift = std::max(shift, std::sqrt(detail::squared_euclidean(std::span<const double>(next), vocab.centroid(w))));
      std::copy(next.begin(), next.end(), vocab.centroids.begin() + static_cast<std::ptrdiff_t>(w * dim));
    }
    if (shift < tol) {
      ++iter;
      break;
    }
  }
  vocab.iterations = iter;
  vocab.inertia = assign_all();
  return vocab;
}

// Uniformly samples up to `count` descriptors (without replacement) from a
// set of images.
inline SampleMatrix sample_descriptors(std::span<const DescriptorSet> images, std::size_t count, std::uint64_t seed) {
  SampleMatrix out;
  std::vector<std::pair<std::size_t, std::size_t>> refs;
  for (std::size_t im = 0; im < images.size(); ++im) {
    if (out.dim == 0) out.dim = images[im].dim;
    if (images[im].dim != out.dim) throw UsageError("descriptor dimensions differ across images");
    for (std::size_t p = 0; p < images[im].count(); ++p) refs.emplace_back(im, p);
  }
  auto eng = make_engine(seed, 0x73616d706c65ULL);
  const std::size_t take = std::min(count, refs.size());
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(uniform_below(eng, refs.size() - i));
    std::swap(refs[i], refs[j]);
  }
  refs.resize(take);
  std::sort(refs.begin(), refs.end());
  out.values.reserve(take * out.dim);
  for (auto [im, p] : refs) {
    auto d = images[im].descriptor(p);
    out.values.insert(out.values.end(), d.begin(), d.end());
  }
  return out;
}

struct QuantizedPatch {
  float x = 0.f;
  float y = 0.f;
  WordId word = 0;
};

inline std::vector<QuantizedPatch> quantize(const DescriptorSet& descs, const VisualVocabulary& vocab) {
  if (descs.dim != vocab.dim) {
    throw UsageError("quantize: descriptor dimension " + std::to_string(descs.dim) +
                     " does not match vocabulary dimension " + std::to_string(vocab.dim));
  }
  std::vector<QuantizedPatch> out(descs.count());
  for (std::size_t i = 0; i < descs.count(); ++i) {
    out[i] = {descs.positions[i].x, descs.positions[i].y, detail::nearest_centroid(descs.descriptor(i), vocab).first};
  }
  return out;
}

// Per-level, per-cell word counts of one image. Level l has 2^l x 2^l cells
// stored row-major (cell index = row * 2^l + col).
struct PyramidDoc {
  std::string id;
  std::size_t vocab_size = 1;
  std::vector<std::vector<CountVector>> levels;

  std::size_t max_level() const { return levels.empty() ? 0 : levels.size() - 1; }
  const CountVector& cell(std::size_t level, std::size_t index) const { return levels.at(level).at(index); }
};

inline const std::string& row_id(const PyramidDoc& d) { return d.id; }

// Cell of a point at a given level: floor(coord * 2^l / extent), with points
// on the right/bottom image edge assigned to the last cell.
inline std::size_t pyramid_cell(float x, float y, std::uint32_t width, std::uint32_t height, std::size_t level) {
  const std::size_t side = std::size_t{1} << level;
  auto bin = [side](double v, double extent) {
    const auto b = static_cast<std::size_t>(std::floor(v * static_cast<double>(side) / extent));
    return std::min(b, side - 1);
  };
  return bin(y, height) * side + bin(x, width);
}

inline PyramidDoc build_pyramid(std::string id, std::span<const QuantizedPatch> patches, std::uint32_t width,
                                std::uint32_t height, std::size_t levels, std::size_t vocab_size) {
  if (width == 0 || height == 0) throw DataError(id + ": image dimensions must be positive");
  if (levels > 15) throw UsageError("build_pyramid: too many levels");
  PyramidDoc doc;
  doc.id = std::move(id);
  doc.vocab_size = vocab_size;
  for (const auto& p : patches) {
    if (!(p.x >= 0.f && p.x <= static_cast<float>(width) && p.y >= 0.f && p.y <= static_cast<float>(height))) {
      throw DataError(doc.id + ": patch position outside the image");
    }
    if (p.word >= vocab_size) throw DataError(doc.id + ": word id outside the vocabulary");
  }
  for (std::size_t l = 0; l <= levels; ++l) {
    const std::size_t cells = std::size_t{1} << (2 * l);
    std::vector<std::vector<WordId>> words(cells);
    for (const auto& p : patches) words[pyramid_cell(p.x, p.y, width, height, l)].push_back(p.word);
    std::vector<CountVector> level;
    level.reserve(cells);
    for (const auto& w : words) level.push_back(CountVector::from_words(vocab_size, w));
    doc.levels.push_back(std::move(level));
  }
  return doc;
}

// Weighted sum over levels of summed per-cell base-kernel values. A cell pair
// where either side is empty contributes 0 for every base family.
class PyramidKernel {
 public:
  PyramidKernel(const KernelSpec& spec) : spec_(spec), base_(without_pyramid(spec)) {
    if (!spec.is_pyramid()) throw UsageError("pyramid documents need a kernel spec with pyramid weights");
  }

  const KernelSpec& spec() const { return spec_; }

  PyramidDoc prepare(const PyramidDoc& doc) const {
    check_shape(doc);
    if (spec_.family != KernelFamily::Sensing2) return doc;
    PyramidDoc out = doc;
    for (std::size_t l = 0; l < out.levels.size(); ++l) {
      for (std::size_t c = 0; c < out.levels[l].size(); ++c) {
        auto& cell = out.levels[l][c];
        if (!cell.empty()) cell = base_.prepare(cell, doc.id + "#" + std::to_string(l) + "." + std::to_string(c));
      }
    }
    return out;
  }

  double evaluate(const PyramidDoc& a, const PyramidDoc& b) const {
    check_shape(a);
    check_shape(b);
    if (a.vocab_size != b.vocab_size) throw UsageError("pyramid kernel: vocabulary size mismatch");
    double total = 0.0;
    for (std::size_t l = 0; l < spec_.pyramid_weights.size(); ++l) {
      const double weight = spec_.pyramid_weights[l];
      if (weight == 0.0) continue;
      double level = 0.0;
      for (std::size_t c = 0; c < a.levels[l].size(); ++c) {
        const auto& ca = a.levels[l][c];
        const auto& cb = b.levels[l][c];
        if (ca.empty() || cb.empty()) continue;
        level += base_.evaluate(ca, cb);
      }
      total += weight * level;
    }
    return total;
  }

  double operator()(const PyramidDoc& a, const PyramidDoc& b) const { return evaluate(prepare(a), prepare(b)); }

 private:
  static KernelSpec without_pyramid(KernelSpec s) {
    s.pyramid_weights.clear();
    return s;
  }

  void check_shape(const PyramidDoc& d) const {
    if (d.levels.size() != spec_.pyramid_weights.size()) {
      throw UsageError("pyramid kernel: document " + d.id + " has " + std::to_string(d.levels.size()) +
                       " levels, weights expect " + std::to_string(spec_.pyramid_weights.size()));
    }
    for (std::size_t l = 0; l < d.levels.size(); ++l) {
      if (d.levels[l].size() != (std::size_t{1} << (2 * l))) {
        throw UsageError("pyramid kernel: document " + d.id + " has a malformed level " + std::to_string(l));
      }
    }
  }

  KernelSpec spec_;
  BaseKernel base_;
};

inline double pyramid_kernel(const PyramidDoc& a, const PyramidDoc& b, KernelSpec base, std::vector<double> weights) {
  base.pyramid_weights = std::move(weights);
  return PyramidKernel(base)(a, b);
}

inline GramMatrix build_gram(std::span<const PyramidDoc> rows, std::span<const PyramidDoc> cols,
                             const KernelSpec& spec, unsigned threads = 0) {
  return build_gram(PyramidKernel(spec), rows, cols, threads);
}

inline GramMatrix build_gram(std::span<const PyramidDoc> docs, const KernelSpec& spec, unsigned threads = 0) {
  return build_gram(PyramidKernel(spec), docs, docs, threads);
}

// Standard spatial-pyramid level weights: 1/2^L for level 0 and
// 1/2^(L-l+1) for levels l >= 1; (1/4, 1/4, 1/2) for L = 2.
inline std::vector<double> default_pyramid_weights(std::size_t levels) {
  std::vector<double> w(levels + 1);
  for (std::size_t l = 0; l <= levels; ++l) {
    w[l] = l == 0 ? std::ldexp(1.0, -static_cast<int>(levels)) : std::ldexp(1.0, -static_cast<int>(levels - l + 1));
  }
  return w;
}

// ---------------------------------------------------------------------------
// Descriptor files.
//
// Text:   "<image_id> <width> <height> <dim> <count>", then one row per
//         descriptor: "x y v_1 ... v_dim".
// Binary: "SDSC" | u32 version=1 | u32 id_len | id bytes | u32 width |
//         u32 height | u32 dim | u64 count | count x (f32 x, f32 y, dim x f32),
//         all little-endian.

inline void write_descriptors_text(std::ostream& os, const DescriptorSet& d) {
  os << std::setprecision(9);
  os << d.image_id << ' ' << d.width << ' ' << d.height << ' ' << d.dim << ' ' << d.count() << '\n';
  for (std::size_t i = 0; i < d.count(); ++i) {
    os << d.positions[i].x << ' ' << d.positions[i].y;
    for (float v : d.descriptor(i)) os << ' ' << v;
    os << '\n';
  }
}

inline DescriptorSet read_descriptors_text(std::istream& is) {
  DescriptorSet d;
  std::size_t count = 0;
  if (!(is >> d.image_id >> d.width >> d.height >> d.dim >> count)) throw DataError("descriptor file: bad header");
  d.positions.resize(count);
  d.values.resize(count * d.dim);
  for (std::size_t i = 0; i < count; ++i) {
    if (!(is >> d.positions[i].x >> d.positions[i].y)) throw DataError("descriptor file: truncated");
    for (std::size_t k = 0; k < d.dim; ++k)
      if (!(is >> d.values[i * d.dim + k])) throw DataError("descriptor file: truncated");
  }
  d.validate();
  return d;
}

inline void write_descriptors_binary(std::ostream& os, const DescriptorSet& d) {
  os.write("SDSC", 4);
  detail::put_u32(os, 1);
  detail::put_u32(os, static_cast<std::uint32_t>(d.image_id.size()));
  os.write(d.image_id.data(), static_cast<std::streamsize>(d.image_id.size()));
  detail::put_u32(os, d.width);
  detail::put_u32(os, d.height);
  detail::put_u32(os, d.dim);
  detail::put_u64(os, d.count());
  for (std::size_t i = 0; i < d.count(); ++i) {
    detail::put_f32(os, d.positions[i].x);
    detail::put_f32(os, d.positions[i].y);
    for (float v : d.descriptor(i)) detail::put_f32(os, v);
  }
}

inline DescriptorSet read_descriptors_binary(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "SDSC", 4) != 0) throw DataError("not a binary descriptor file");
  if (detail::get_u32(is) != 1) throw DataError("unsupported descriptor file version");
  DescriptorSet d;
  d.image_id.resize(detail::get_u32(is));
  if (!is.read(d.image_id.data(), static_cast<std::streamsize>(d.image_id.size()))) throw DataError("truncated id");
  d.width = detail::get_u32(is);
  d.height = detail::get_u32(is);
  d.dim = detail::get_u32(is);
  const auto count = detail::get_u64(is);
  d.positions.resize(count);
  d.values.resize(count * d.dim);
  for (std::size_t i = 0; i < count; ++i) {
    d.positions[i].x = detail::get_f32(is);
    d.positions[i].y = detail::get_f32(is);
    for (std::size_t k = 0; k < d.dim; ++k) d.values[i * d.dim + k] = detail::get_f32(is);
  }
  d.validate();
  return d;
}

// Detects the binary form by its magic bytes.
inline DescriptorSet load_descriptors(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw ConfigError("cannot open " + p.string());
  char magic[4] = {};
  is.read(magic, 4);
  is.clear();
  is.seekg(0);
  if (std::memcmp(magic, "SDSC", 4) == 0) return read_descriptors_binary(is);
  return read_descriptors_text(is);
}

// root/<class>/<descriptor file>; labels come from the class directory.
inline std::vector<DescriptorSet> read_descriptor_directory(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw ConfigError("not a directory: " + root.string());
  std::vector<fs::path> class_dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) class_dirs.push_back(e.path());
  std::sort(class_dirs.begin(), class_dirs.end());
  std::vector<DescriptorSet> out;
  for (const auto& dir : class_dirs) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      auto d = load_descriptors(f);
      d.label = dir.filename().string();
      out.push_back(std::move(d));
    }
  }
  return out;
}

// Visual vocabulary file: one centroid per line, 17 significant digits.
inline void write_visual_vocabulary(std::ostream& os, const VisualVocabulary& v) {
  os << std::setprecision(17);
  for (std::size_t w = 0; w < v.words(); ++w) {
    auto c = v.centroid(w);
    for (std::size_t k = 0; k < c.size(); ++k) os << (k ? " " : "") << c[k];
    os << '\n';
  }
}

inline VisualVocabulary read_visual_vocabulary(std::istream& is) {
  VisualVocabulary v;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::vector<double> row;
    double x;
    while (ls >> x) row.push_back(x);
    if (v.dim == 0) v.dim = row.size();
    if (row.size() != v.dim || row.empty()) throw DataError("visual vocabulary: ragged rows");
    v.centroids.insert(v.centroids.end(), row.begin(), row.end());
  }
  if (v.words() < 2) throw DataError("visual vocabulary needs at least two words");
  return v;
}

// ---------------------------------------------------------------------------
// Pyramid corpora: "sensekern-pyramid 1", "W <W>", "L <L>", "vocab <hex>",
// "M <M>", "split <tag>", then "<id>\t<label>\t<cells>" per image where cells
// are level-major, row-major, separated by '|', each "word:count ...".

struct LabeledPyramid {
  PyramidDoc doc;
  std::string label;
};

struct PyramidCorpus {
  std::size_t vocab_size = 1;
  std::size_t levels = 0;
  Fingerprint vocab_fingerprint;
  std::string split = "train";
  std::vector<LabeledPyramid> docs;

  std::vector<PyramidDoc> documents() const {
    std::vector<PyramidDoc> out;
    for (const auto& d : docs) out.push_back(d.doc);
    return out;
  }
  std::vector<std::string> label_set() const {
    std::vector<std::string> out;
    for (const auto& d : docs) out.push_back(d.label);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }
  std::vector<int> class_ids(const std::vector<std::string>& classes) const {
    std::vector<int> out;
    for (const auto& d : docs) {
      auto it = std::lower_bound(classes.begin(), classes.end(), d.label);
      if (it == classes.end() || *it != d.label) throw DataError("label '" + d.label + "' not in the label set");
      out.push_back(static_cast<int>(it - classes.begin()));
    }
    return out;
  }
};

inline void write_pyramid_corpus(std::ostream& os, const PyramidCorpus& c) {
  os << "sensekern-pyramid 1\n";
  os << "W " << c.vocab_size << '\n';
  os << "L " << c.levels << '\n';
  os << "vocab " << c.vocab_fingerprint.hex() << '\n';
  os << "M " << c.docs.size() << '\n';
  os << "split " << c.split << '\n';
  for (const auto& d : c.docs) {
    os << d.doc.id << '\t' << d.label << '\t';
    bool first_cell = true;
    for (const auto& level : d.doc.levels) {
      for (const auto& cell : level) {
        if (!first_cell) os << '|';
        first_cell = false;
        bool first = true;
        for (const auto& e : cell.entries()) {
          if (!first) os << ' ';
          os << e.word << ':' << e.count;
          first = false;
        }
      }
    }
    os << '\n';
  }
}

inline PyramidCorpus read_pyramid_corpus(std::istream& is) {
  std::string header;
  if (!std::getline(is, header) || header != "sensekern-pyramid 1") throw DataError("not a pyramid corpus file");
  PyramidCorpus c;
  c.vocab_size = std::stoull(detail::corpus_key(is, "W"));
  c.levels = std::stoull(detail::corpus_key(is, "L"));
  c.vocab_fingerprint = Fingerprint::from_hex(detail::corpus_key(is, "vocab"));
  const auto m = std::stoull(detail::corpus_key(is, "M"));
  c.split = detail::corpus_key(is, "split");
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) throw DataError("pyramid corpus: malformed line");
    PyramidDoc doc;
    doc.id = line.substr(0, t1);
    doc.vocab_size = c.vocab_size;
    std::vector<CountVector> cells;
    std::string_view rest = std::string_view(line).substr(t2 + 1);
    while (true) {
      const auto bar = rest.find('|');
      cells.push_back(detail::parse_counts(rest.substr(0, bar), c.vocab_size));
      if (bar == std::string_view::npos) break;
      rest = rest.substr(bar + 1);
    }
    std::size_t pos = 0;
    for (std::size_t l = 0; l <= c.levels; ++l) {
      const std::size_t n = std::size_t{1} << (2 * l);
      if (pos + n > cells.size()) throw DataError("pyramid corpus: too few cells for " + doc.id);
      doc.levels.emplace_back(cells.begin() + static_cast<std::ptrdiff_t>(pos),
                              cells.begin() + static_cast<std::ptrdiff_t>(pos + n));
      pos += n;
    }
    if (pos != cells.size()) throw DataError("pyramid corpus: too many cells for " + doc.id);
    c.docs.push_back({std::move(doc), line.substr(t1 + 1, t2 - t1 - 1)});
  }
  if (c.docs.size() != m) throw DataError("pyramid corpus: document count does not match header");
  return c;
}

struct BofOptions {
  std::size_t words = 400;
  std::size_t sample_size = 100000;
  std::size_t levels = 2;
  std::uint64_t seed = 0;
  std::size_t max_iters = 100;
  double tol = 1e-6;
};

inline PyramidCorpus pyramids_for(std::span<const DescriptorSet> images, const VisualVocabulary& vocab,
                                  const BofOptions& opt, std::string split) {
  PyramidCorpus c;
  c.vocab_size = vocab.words();
  c.levels = opt.levels;
  c.vocab_fingerprint = vocab.fingerprint();
  c.split = std::move(split);
  for (const auto& im : images) {
    im.validate();
    const auto patches = quantize(im, vocab);
    c.docs.push_back({build_pyramid(im.image_id, patches, im.width, im.height, opt.levels, vocab.words()), im.label});
  }
  return c;
}

struct PreparedBof {
  VisualVocabulary vocab;
  PyramidCorpus train;
  PyramidCorpus test;
};

// Fits the visual vocabulary on descriptors sampled from the training images
// only, then builds pyramids for both splits.
inline PreparedBof prepare_bof(std::span<const DescriptorSet> train, std::span<const DescriptorSet> test,
                               const BofOptions& opt) {
  PreparedBof out;
  const auto samples = sample_descriptors(train, opt.sample_size, opt.seed);
  out.vocab = kmeans_fit(samples, opt.words, opt.seed, opt.max_iters, opt.tol);
  out.train = pyramids_for(train, out.vocab, opt, "train");
  out.test = pyramids_for(test, out.vocab, opt, "test");
  return out;
}

}  // namespace sensekern
