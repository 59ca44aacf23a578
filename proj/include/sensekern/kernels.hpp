#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "sensekern/count_vector.hpp"
#include "sensekern/error.hpp"
#include "sensekern/fingerprint.hpp"
#include "sensekern/log_gamma.hpp"
#include "sensekern/random.hpp"

namespace sensekern {

enum class KernelFamily { SensingExact, Sensing0, Sensing1, Sensing2, Rbf, Ppk };

inline std::string_view family_name(KernelFamily f) {
  switch (f) {
    case KernelFamily::SensingExact: return "exact";
    case KernelFamily::Sensing0: return "sensing0";
    case KernelFamily::Sensing1: return "sensing1";
    case KernelFamily::Sensing2: return "sensing2";
    case KernelFamily::Rbf: return "rbf";
    case KernelFamily::Ppk: return "ppk";
  }
  return "?";
}

// Kernel family plus hyperparameters. Only the parameters of the chosen
// family are read; the rest are ignored (and excluded from the fingerprint).
// A non-empty pyramid_weights turns the spec into a spatial-pyramid kernel
// with L = pyramid_weights.size() - 1 over the base family.
struct KernelSpec {
  KernelFamily family = KernelFamily::SensingExact;
  std::uint32_t n = 150;           // Sensing 1 frequency scale
  std::uint32_t resample_n = 150;  // Sensing 2 resampled document length
  std::uint64_t seed = 0;          // Sensing 2 resampling seed
  double sigma = 1.0;              // RBF bandwidth
  double ppk_rho = 1.0;            // PPK power
  std::vector<double> pyramid_weights;

  bool is_pyramid() const { return !pyramid_weights.empty(); }
  std::size_t pyramid_levels() const { return pyramid_weights.empty() ? 0 : pyramid_weights.size() - 1; }

  void validate() const {
    switch (family) {
      case KernelFamily::Sensing1:
        if (n == 0) throw UsageError("sensing1: n must be positive");
        break;
      case KernelFamily::Sensing2:
        if (resample_n == 0) throw UsageError("sensing2: N must be positive");
        break;
      case KernelFamily::Rbf:
        if (!(sigma > 0.0) || !std::isfinite(sigma)) throw UsageError("rbf: sigma must be positive");
        break;
      case KernelFamily::Ppk:
        if (!(ppk_rho > 0.0) || !std::isfinite(ppk_rho)) throw UsageError("ppk: rho must be positive");
        break;
      default:
        break;
    }
    for (double w : pyramid_weights) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw UsageError("pyramid weights must be non-negative");
    }
  }

  // Canonical text form; parse(to_string()) round-trips.
  std::string to_string() const {
    std::ostringstream os;
    os.precision(17);
    os << family_name(family);
    switch (family) {
      case KernelFamily::Sensing1: os << ":n=" << n; break;
      case KernelFamily::Sensing2: os << ":N=" << resample_n << ",seed=" << seed; break;
      case KernelFamily::Rbf: os << ":sigma=" << sigma; break;
      case KernelFamily::Ppk: os << ":rho=" << ppk_rho; break;
      default: break;
    }
    if (is_pyramid()) {
      os << (family == KernelFamily::SensingExact || family == KernelFamily::Sensing0 ? ":" : ",")
         << "pyramid=";
      for (std::size_t i = 0; i < pyramid_weights.size(); ++i) {
        if (i) os << '/';
        os << pyramid_weights[i];
      }
    }
    return os.str();
  }

  Fingerprint fingerprint() const { return Hasher().field("sensekern-kernel-v1").field(to_string()).finish(); }

  // Parses "family[:key=value,...]", e.g. "sensing1:n=150",
  // "sensing2:N=500,seed=7", "rbf:sigma=0.1", "ppk:rho=0.5",
  // "sensing0:pyramid=0.25/0.25/0.5".
  static KernelSpec parse(std::string_view text) {
    KernelSpec spec;
    const auto colon = text.find(':');
    const auto name = text.substr(0, colon);
    if (name == "exact") spec.family = KernelFamily::SensingExact;
    else if (name == "sensing0") spec.family = KernelFamily::Sensing0;
    else if (name == "sensing1") spec.family = KernelFamily::Sensing1;
    else if (name == "sensing2") spec.family = KernelFamily::Sensing2;
    else if (name == "rbf") spec.family = KernelFamily::Rbf;
    else if (name == "ppk") spec.family = KernelFamily::Ppk;
    else throw UsageError("unknown kernel family '" + std::string(name) + "'");

    if (colon != std::string_view::npos) {
      std::string_view rest = text.substr(colon + 1);
      while (!rest.empty()) {
        const auto comma = rest.find(',');
        const auto item = rest.substr(0, comma);
        rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
        const auto eq = item.find('=');
        if (eq == std::string_view::npos) throw UsageError("kernel parameter without '=': " + std::string(item));
        const std::string key(item.substr(0, eq));
        const std::string value(item.substr(eq + 1));
        try {
          if (key == "n") spec.n = static_cast<std::uint32_t>(std::stoul(value));
          else if (key == "N") spec.resample_n = static_cast<std::uint32_t>(std::stoul(value));
          else if (key == "seed") spec.seed = std::stoull(value);
          else if (key == "sigma") spec.sigma = std::stod(value);
          else if (key == "rho") spec.ppk_rho = std::stod(value);
          else if (key == "pyramid") {
            spec.pyramid_weights.clear();
            std::string_view ws(value);
            while (!ws.empty()) {
              const auto slash = ws.find('/');
              spec.pyramid_weights.push_back(std::stod(std::string(ws.substr(0, slash))));
              ws = slash == std::string_view::npos ? std::string_view{} : ws.substr(slash + 1);
            }
          } else {
            throw UsageError("unknown kernel parameter '" + key + "'");
          }
        } catch (const std::logic_error& e) {
          if (dynamic_cast<const UsageError*>(&e)) throw;
          throw UsageError("bad value for kernel parameter '" + key + "': " + value);
        }
      }
    }
    spec.validate();
    return spec;
  }

  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

namespace detail {

inline void require_same_vocab(std::size_t wa, std::size_t wb) {
  if (wa != wb) {
    throw UsageError("vocabulary size mismatch: " + std::to_string(wa) + " vs " + std::to_string(wb));
  }
}

inline void require_nonempty(const CountVector& v, std::string_view kernel) {
  if (v.empty()) throw UsageError(std::string(kernel) + ": empty document");
}

// Calls fn(count_a, count_b) for every word present in both documents, in
// increasing word order. Words present in only one document contribute
// exactly zero to the log-Gamma sums below, so the intersection suffices.
template <class Fn>
void for_each_shared_word(const CountVector& a, const CountVector& b, Fn&& fn) {
  auto ea = a.entries();
  auto eb = b.entries();
  std::size_t i = 0, j = 0;
  while (i < ea.size() && j < eb.size()) {
    if (ea[i].word < eb[j].word) {
      ++i;
    } else if (eb[j].word < ea[i].word) {
      ++j;
    } else {
      fn(ea[i].count, eb[j].count);
      ++i;
      ++j;
    }
  }
}

}  // namespace detail

// log K(a, b) of the multinomial sensing kernel
//   K = prod_w Γ(a_w+b_w+1) / (Γ(a_w+1) Γ(b_w+1)) * Γ(N_a+1) Γ(N_b+1) / Γ(N_a+N_b+W),
// evaluated entirely in log space.
inline double log_kernel_exact(const CountVector& a, const CountVector& b) {
  detail::require_same_vocab(a.vocab_size(), b.vocab_size());
  double sum = 0.0;
  detail::for_each_shared_word(a, b, [&](Count ca, Count cb) {
    sum += log_factorial(ca + cb) - (log_factorial(ca) + log_factorial(cb));
  });
  const auto w = static_cast<double>(a.vocab_size());
  const auto total = static_cast<double>(a.total()) + static_cast<double>(b.total());
  return sum + (log_factorial(a.total()) + log_factorial(b.total())) - log_gamma(total + w);
}

inline double kernel_exact(const CountVector& a, const CountVector& b) {
  return std::exp(log_kernel_exact(a, b));
}

inline double kernel_sensing0(const CountVector& a, const CountVector& b) { return log_kernel_exact(a, b); }

// Sensing 1: the per-word log-Gamma ratio evaluated at n times the word
// frequencies (real arguments), without the document-length terms.
inline double kernel_sensing1(const CountVector& a, const CountVector& b, std::uint32_t n) {
  detail::require_same_vocab(a.vocab_size(), b.vocab_size());
  detail::require_nonempty(a, "sensing1");
  detail::require_nonempty(b, "sensing1");
  if (n == 0) throw UsageError("sensing1: n must be positive");
  const double scale = static_cast<double>(n);
  const auto na = static_cast<double>(a.total());
  const auto nb = static_cast<double>(b.total());
  double sum = 0.0;
  detail::for_each_shared_word(a, b, [&](Count ca, Count cb) {
    const double xa = scale * (static_cast<double>(ca) / na);
    const double xb = scale * (static_cast<double>(cb) / nb);
    sum += log_gamma(xa + xb + 1.0) - (log_gamma(xa + 1.0) + log_gamma(xb + 1.0));
  });
  return sum;
}

// Resamples a document to exactly `length` words by drawing word tokens
// uniformly with replacement. The random stream is keyed by (seed, key), so a
// document identified by `key` always yields the same resampled counts.
inline CountVector resample_document(const CountVector& doc, std::uint32_t length, std::uint64_t seed,
                                     std::uint64_t key) {
  detail::require_nonempty(doc, "sensing2");
  if (length == 0) throw UsageError("sensing2: N must be positive");
  auto entries = doc.entries();
  std::vector<Count> cumulative(entries.size());
  Count running = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    running += entries[i].count;
    cumulative[i] = running;
  }
  auto eng = make_engine(seed, key);
  std::vector<Count> drawn(entries.size(), 0);
  for (std::uint32_t t = 0; t < length; ++t) {
    const Count r = uniform_below(eng, running);
    const auto slot = static_cast<std::size_t>(
        std::upper_bound(cumulative.begin(), cumulative.end(), r) - cumulative.begin());
    ++drawn[slot];
  }
  std::vector<CountEntry> out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (drawn[i] > 0) out.push_back({entries[i].word, drawn[i]});
  }
  return CountVector(doc.vocab_size(), std::move(out));
}

inline CountVector resample_document(const Document& doc, std::uint32_t length, std::uint64_t seed) {
  return resample_document(doc.counts, length, seed, fnv1a64(doc.id));
}

// Sensing 2: log K on documents resampled to a common length N.
inline double kernel_sensing2(const Document& a, const Document& b, std::uint32_t length, std::uint64_t seed) {
  detail::require_same_vocab(a.counts.vocab_size(), b.counts.vocab_size());
  return log_kernel_exact(resample_document(a, length, seed), resample_document(b, length, seed));
}

// Squared Euclidean distance between two frequency vectors.
inline double squared_distance(const FrequencyVector& a, const FrequencyVector& b) {
  detail::require_same_vocab(a.vocab_size(), b.vocab_size());
  auto ea = a.entries();
  auto eb = b.entries();
  double dist2 = 0.0;
  std::size_t i = 0, j = 0;
  while (i < ea.size() || j < eb.size()) {
    double d;
    if (j == eb.size() || (i < ea.size() && ea[i].word < eb[j].word)) {
      d = ea[i++].frequency;
    } else if (i == ea.size() || eb[j].word < ea[i].word) {
      d = eb[j++].frequency;
    } else {
      d = ea[i++].frequency - eb[j++].frequency;
    }
    dist2 += d * d;
  }
  return dist2;
}

// Gaussian RBF on word frequencies: exp(-||a - b||^2 / (2 sigma^2)).
inline double kernel_rbf(const FrequencyVector& a, const FrequencyVector& b, double sigma) {
  if (!(sigma > 0.0)) throw UsageError("rbf: sigma must be positive");
  return std::exp(-squared_distance(a, b) / (2.0 * sigma * sigma));
}

// Probability product kernel with the maximum-likelihood plug-in estimate:
// sum_w (a_w / N_a)^rho (b_w / N_b)^rho.
inline double kernel_ppk(const CountVector& a, const CountVector& b, double rho) {
  detail::require_same_vocab(a.vocab_size(), b.vocab_size());
  detail::require_nonempty(a, "ppk");
  detail::require_nonempty(b, "ppk");
  if (!(rho > 0.0)) throw UsageError("ppk: rho must be positive");
  const auto na = static_cast<double>(a.total());
  const auto nb = static_cast<double>(b.total());
  double sum = 0.0;
  detail::for_each_shared_word(a, b, [&](Count ca, Count cb) {
    sum += std::pow(static_cast<double>(ca) / na, rho) * std::pow(static_cast<double>(cb) / nb, rho);
  });
  return sum;
}

// Evaluates the base (non-pyramid) kernel of a spec. prepare() applies the
// per-document transformation (Sensing 2 resampling) once so Gram assembly
// can reuse it across all pairs; evaluate() then works on prepared vectors.
class BaseKernel {
 public:
  explicit BaseKernel(KernelSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

  const KernelSpec& spec() const { return spec_; }

  CountVector prepare(const CountVector& doc, std::string_view key) const {
    if (spec_.family == KernelFamily::Sensing2) {
      return resample_document(doc, spec_.resample_n, spec_.seed, fnv1a64(key));
    }
    return doc;
  }

  double evaluate(const CountVector& a, const CountVector& b) const {
    switch (spec_.family) {
      case KernelFamily::SensingExact: return kernel_exact(a, b);
      case KernelFamily::Sensing0: return kernel_sensing0(a, b);
      case KernelFamily::Sensing1: return kernel_sensing1(a, b, spec_.n);
      case KernelFamily::Sensing2: return log_kernel_exact(a, b);
      case KernelFamily::Rbf: return kernel_rbf(FrequencyVector(a), FrequencyVector(b), spec_.sigma);
      case KernelFamily::Ppk: return kernel_ppk(a, b, spec_.ppk_rho);
    }
    throw UsageError("unknown kernel family");
  }

  double operator()(const Document& a, const Document& b) const {
    return evaluate(prepare(a.counts, a.id), prepare(b.counts, b.id));
  }

 private:
  KernelSpec spec_;
};

}  // namespace sensekern
