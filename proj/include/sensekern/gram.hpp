#pragma once

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "sensekern/count_vector.hpp"
#include "sensekern/error.hpp"
#include "sensekern/fingerprint.hpp"
#include "sensekern/kernels.hpp"

namespace sensekern {

// Dense matrix of kernel values between a row set and a column set of
// documents. Square Grams over a single set are exactly symmetric.
class GramMatrix {
 public:
  GramMatrix() = default;

  GramMatrix(std::size_t rows, std::size_t cols, std::vector<double> values, std::vector<std::string> row_ids,
             std::vector<std::string> col_ids, Fingerprint spec)
      : rows_(rows),
        cols_(cols),
        values_(std::move(values)),
        row_ids_(std::move(row_ids)),
        col_ids_(std::move(col_ids)),
        spec_(spec) {
    if (values_.size() != rows_ * cols_) throw UsageError("GramMatrix: value count does not match shape");
    if (row_ids_.size() != rows_ || col_ids_.size() != cols_) {
      throw UsageError("GramMatrix: identifier count does not match shape");
    }
  }

  // Square matrix without identifiers (ids default to "0", "1", ...).
  static GramMatrix from_values(std::size_t m, std::vector<double> values, Fingerprint spec = {}) {
    std::vector<std::string> ids(m);
    for (std::size_t i = 0; i < m; ++i) ids[i] = std::to_string(i);
    return GramMatrix(m, m, std::move(values), ids, ids, spec);
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool is_square() const { return rows_ == cols_; }

  double operator()(std::size_t i, std::size_t j) const { return values_[i * cols_ + j]; }
  std::span<const double> row(std::size_t i) const { return {values_.data() + i * cols_, cols_}; }
  std::span<const double> values() const { return values_; }

  const std::vector<std::string>& row_ids() const { return row_ids_; }
  const std::vector<std::string>& col_ids() const { return col_ids_; }
  const Fingerprint& spec() const { return spec_; }

  bool is_symmetric() const {
    if (!is_square()) return false;
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = i + 1; j < cols_; ++j)
        if ((*this)(i, j) != (*this)(j, i)) return false;
    return true;
  }

  bool all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
  }

  double trace() const {
    double t = 0.0;
    for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) t += (*this)(i, i);
    return t;
  }

  // Sub-matrix selecting the given rows and columns.
  GramMatrix select(std::span<const std::size_t> rows, std::span<const std::size_t> cols) const {
    std::vector<double> v;
    v.reserve(rows.size() * cols.size());
    std::vector<std::string> rids, cids;
    for (auto i : rows) {
      rids.push_back(row_ids_.at(i));
      for (auto j : cols) v.push_back(values_[i * cols_ + j]);
    }
    for (auto j : cols) cids.push_back(col_ids_.at(j));
    return GramMatrix(rows.size(), cols.size(), std::move(v), std::move(rids), std::move(cids), spec_);
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
  std::vector<std::string> row_ids_;
  std::vector<std::string> col_ids_;
  Fingerprint spec_;
};

inline const std::string& row_id(const Document& d) { return d.id; }

// Adapts a KernelSpec over plain documents to the prepare/evaluate protocol
// used by build_gram.
class DocumentKernel {
 public:
  explicit DocumentKernel(const KernelSpec& spec) : base_(spec) {
    if (spec.is_pyramid()) throw UsageError("pyramid kernels require pyramid documents");
  }
  const KernelSpec& spec() const { return base_.spec(); }
  CountVector prepare(const Document& d) const { return base_.prepare(d.counts, d.id); }
  double evaluate(const CountVector& a, const CountVector& b) const { return base_.evaluate(a, b); }

 private:
  BaseKernel base_;
};

namespace detail {

struct PairError {
  std::size_t i = 0, j = 0;
  std::string message;
  bool data = false;
};

}  // namespace detail

// Evaluates kernel(rows[i], cols[j]) for all pairs. When rows and cols are
// the same span, only the upper triangle is evaluated and mirrored. Pairs are
// distributed over `threads` workers (0 = hardware concurrency); kernels are
// pure, so the result does not depend on the schedule.
template <class Kernel, class Row>
GramMatrix build_gram(const Kernel& kernel, std::span<const Row> rows, std::span<const Row> cols,
                      unsigned threads = 0) {
  const bool same = rows.data() == cols.data() && rows.size() == cols.size();
  using Prepared = decltype(kernel.prepare(rows[0]));

  auto prepare_all = [&](std::span<const Row> docs, std::vector<Prepared>& out) {
    out.reserve(docs.size());
    for (std::size_t i = 0; i < docs.size(); ++i) {
      try {
        out.push_back(kernel.prepare(docs[i]));
      } catch (const UsageError& e) {
        throw UsageError("document " + row_id(docs[i]) + ": " + e.what());
      }
    }
  };
  std::vector<Prepared> prow, pcol;
  prepare_all(rows, prow);
  if (!same) prepare_all(cols, pcol);
  const auto& pc = same ? prow : pcol;

  const std::size_t m = rows.size(), n = cols.size();
  std::vector<double> values(m * n, 0.0);
  std::optional<detail::PairError> first_error;
  std::mutex error_mutex;
  std::atomic<std::size_t> next_row{0};

  auto record = [&](std::size_t i, std::size_t j, const std::string& msg, bool data) {
    std::lock_guard lock(error_mutex);
    if (!first_error || std::pair(i, j) < std::pair(first_error->i, first_error->j)) {
      first_error = detail::PairError{i, j, msg, data};
    }
  };

  auto worker = [&] {
    for (std::size_t i = next_row++; i < m; i = next_row++) {
      for (std::size_t j = same ? i : 0; j < n; ++j) {
        double v;
        try {
          v = kernel.evaluate(prow[i], pc[j]);
        } catch (const UsageError& e) {
          record(i, j, e.what(), false);
          continue;
        }
        if (!std::isfinite(v)) {
          record(i, j, "non-finite kernel value", true);
          continue;
        }
        values[i * n + j] = v;
        if (same) values[j * n + i] = v;
      }
    }
  };

  unsigned workers = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(m, 1)));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < workers; ++t) pool.emplace_back(worker);
  }

  if (first_error) {
    const auto& e = *first_error;
    std::string msg = "kernel(" + row_id(rows[e.i]) + ", " + row_id(cols[e.j]) + ") at pair (" +
                      std::to_string(e.i) + ", " + std::to_string(e.j) + "): " + e.message;
    if (e.data) throw DataError(msg);
    throw UsageError(msg);
  }

  std::vector<std::string> rids, cids;
  rids.reserve(m);
  cids.reserve(n);
  for (const auto& r : rows) rids.push_back(row_id(r));
  for (const auto& c : cols) cids.push_back(row_id(c));
  return GramMatrix(m, n, std::move(values), std::move(rids), std::move(cids), kernel.spec().fingerprint());
}

inline GramMatrix build_gram(std::span<const Document> rows, std::span<const Document> cols, const KernelSpec& spec,
                             unsigned threads = 0) {
  return build_gram(DocumentKernel(spec), rows, cols, threads);
}

inline GramMatrix build_gram(std::span<const Document> docs, const KernelSpec& spec, unsigned threads = 0) {
  return build_gram(DocumentKernel(spec), docs, docs, threads);
}

// ---------------------------------------------------------------------------
// Serialization.
//
// Binary layout (little-endian):
//   "SGRM" | u32 version | u64 M | 32-byte spec fingerprint | M*M f64, row-major
// Version 1 is the square layout above. Version 2 stores rectangular blocks:
//   "SGRM" | u32 2 | u64 rows | u64 cols | fingerprint | rows*cols f64
// Row/column identifiers go to a sidecar "<path>.ids" text file.

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(b, 4);
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(b, 8);
}

inline std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw DataError("truncated binary file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

inline std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw DataError("truncated binary file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline void put_f64(std::ostream& os, double d) { put_u64(os, std::bit_cast<std::uint64_t>(d)); }
inline double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

inline void put_f32(std::ostream& os, float f) { put_u32(os, std::bit_cast<std::uint32_t>(f)); }
inline float get_f32(std::istream& is) { return std::bit_cast<float>(get_u32(is)); }

}  // namespace detail

inline void write_gram_binary(std::ostream& os, const GramMatrix& g) {
  os.write("SGRM", 4);
  if (g.is_square()) {
    detail::put_u32(os, 1);
    detail::put_u64(os, g.rows());
  } else {
    detail::put_u32(os, 2);
    detail::put_u64(os, g.rows());
    detail::put_u64(os, g.cols());
  }
  const auto& fp = g.spec().bytes();
  os.write(reinterpret_cast<const char*>(fp.data()), static_cast<std::streamsize>(fp.size()));
  for (double v : g.values()) detail::put_f64(os, v);
}

// Reads values and fingerprint; identifiers are "0", "1", ... unless supplied.
inline GramMatrix read_gram_binary(std::istream& is, std::optional<std::pair<std::vector<std::string>,
                                                                          std::vector<std::string>>> ids = {}) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "SGRM", 4) != 0) throw DataError("not a Gram file (bad magic)");
  const auto version = detail::get_u32(is);
  std::uint64_t rows = 0, cols = 0;
  if (version == 1) {
    rows = cols = detail::get_u64(is);
  } else if (version == 2) {
    rows = detail::get_u64(is);
    cols = detail::get_u64(is);
  } else {
    throw DataError("unsupported Gram file version " + std::to_string(version));
  }
  Fingerprint::Bytes fp;
  if (!is.read(reinterpret_cast<char*>(fp.data()), 32)) throw DataError("truncated Gram header");
  std::vector<double> values(rows * cols);
  for (auto& v : values) v = detail::get_f64(is);
  std::vector<std::string> rids(rows), cids(cols);
  if (ids) {
    rids = std::move(ids->first);
    cids = std::move(ids->second);
    if (rids.size() != rows || cids.size() != cols) throw DataError("Gram identifier file does not match shape");
  } else {
    for (std::size_t i = 0; i < rows; ++i) rids[i] = std::to_string(i);
    for (std::size_t j = 0; j < cols; ++j) cids[j] = std::to_string(j);
  }
  return GramMatrix(rows, cols, std::move(values), std::move(rids), std::move(cids), Fingerprint(fp));
}

// One row per line, space separated, 17 significant digits.
inline void write_gram_text(std::ostream& os, const GramMatrix& g) {
  std::ostringstream line;
  line << std::setprecision(17);
  for (std::size_t i = 0; i < g.rows(); ++i) {
    line.str("");
    for (std::size_t j = 0; j < g.cols(); ++j) {
      if (j) line << ' ';
      line << g(i, j);
    }
    os << line.str() << '\n';
  }
}

inline GramMatrix read_gram_text(std::istream& is) {
  std::vector<double> values;
  std::size_t rows = 0, cols = 0;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::size_t count = 0;
    double v;
    while (ls >> v) {
      values.push_back(v);
      ++count;
    }
    if (!ls.eof()) throw DataError("Gram text: unparsable value in row " + std::to_string(rows));
    if (rows == 0) cols = count;
    else if (count != cols) throw DataError("Gram text: ragged rows");
    ++rows;
  }
  std::vector<std::string> rids(rows), cids(cols);
  for (std::size_t i = 0; i < rows; ++i) rids[i] = std::to_string(i);
  for (std::size_t j = 0; j < cols; ++j) cids[j] = std::to_string(j);
  return GramMatrix(rows, cols, std::move(values), std::move(rids), std::move(cids), Fingerprint{});
}

inline void write_gram_ids(std::ostream& os, const GramMatrix& g) {
  os << "rows " << g.rows() << '\n';
  for (const auto& id : g.row_ids()) os << id << '\n';
  os << "cols " << g.cols() << '\n';
  for (const auto& id : g.col_ids()) os << id << '\n';
}

inline std::pair<std::vector<std::string>, std::vector<std::string>> read_gram_ids(std::istream& is) {
  auto read_block = [&](std::string_view tag) {
    std::string word;
    std::size_t count = 0;
    if (!(is >> word >> count) || word != tag) throw DataError("Gram id file: expected '" + std::string(tag) + "'");
    std::string rest;
    std::getline(is, rest);
    std::vector<std::string> ids(count);
    for (auto& id : ids)
      if (!std::getline(is, id)) throw DataError("Gram id file truncated");
    return ids;
  };
  auto rows = read_block("rows");
  auto cols = read_block("cols");
  return {std::move(rows), std::move(cols)};
}

inline void save_gram(const std::string& path, const GramMatrix& g, bool text = false) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + path);
  if (text) write_gram_text(os, g);
  else write_gram_binary(os, g);
  std::ofstream ids(path + ".ids");
  if (!ids) throw ConfigError("cannot write " + path + ".ids");
  write_gram_ids(ids, g);
}

inline GramMatrix load_gram(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open " + path);
  std::optional<std::pair<std::vector<std::string>, std::vector<std::string>>> ids;
  if (std::ifstream ids_file(path + ".ids"); ids_file) ids = read_gram_ids(ids_file);
  char magic[4] = {};
  is.read(magic, 4);
  const bool binary = is.gcount() == 4 && std::memcmp(magic, "SGRM", 4) == 0;
  is.clear();
  is.seekg(0);
  if (binary) return read_gram_binary(is, std::move(ids));
  auto g = read_gram_text(is);
  if (!ids) return g;
  if (ids->first.size() != g.rows() || ids->second.size() != g.cols())
    throw DataError("Gram id file does not match " + path);
  return GramMatrix(g.rows(), g.cols(), std::vector<double>(g.values().begin(), g.values().end()),
                    std::move(ids->first), std::move(ids->second), Fingerprint{});
}

}  // namespace sensekern
