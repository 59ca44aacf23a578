#pragma once

// Brute-force reference computations used to check the fast paths: numeric
// integration over the probability simplex, a projected-gradient QP solver for
// the SVM dual, a Monte-Carlo estimate for resampled kernels, and a synthetic
// Dirichlet-mixture model with a known Bayes rule. None of these share code
// with the kernels or the SMO solver beyond the CountVector container.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "sensekern/count_vector.hpp"
#include "sensekern/error.hpp"
#include "sensekern/fingerprint.hpp"
#include "sensekern/random.hpp"
#include "sensekern/text.hpp"

namespace sensekern::verify {

// ---------------------------------------------------------------------------
// Simplex quadrature.

// Composite mid-point rule on the uniform barycentric grid with `resolution`
// points per edge: W = 2 uses interval midpoints, W = 3 uses the centroids of
// the resolution^2 sub-triangles. Integrates with respect to Lebesgue measure
// on (z_1, ..., z_{W-1}); W = 1 evaluates f at the single point z = (1).
template <class F>
double simplex_midpoint(std::size_t vocab_size, std::size_t resolution, F&& f) {
  if (vocab_size == 0 || vocab_size > 3) throw UsageError("simplex quadrature supports W in {1, 2, 3}");
  if (resolution == 0) throw UsageError("simplex quadrature: resolution must be positive");
  const double h = 1.0 / static_cast<double>(resolution);
  if (vocab_size == 1) return f(std::array<double, 3>{1.0, 0.0, 0.0});
  if (vocab_size == 2) {
    double sum = 0.0;
    for (std::size_t i = 0; i < resolution; ++i) {
      const double z = (static_cast<double>(i) + 0.5) * h;
      sum += f(std::array<double, 3>{z, 1.0 - z, 0.0});
    }
    return sum * h;
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < resolution; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; i + j < resolution; ++j) {
      const double z1 = (static_cast<double>(i) + 1.0 / 3.0) * h;
      const double z2 = (static_cast<double>(j) + 1.0 / 3.0) * h;
      row += f(std::array<double, 3>{z1, z2, std::max(0.0, 1.0 - z1 - z2)});
      if (i + j + 2 <= resolution) {
        const double u1 = (static_cast<double>(i) + 2.0 / 3.0) * h;
        const double u2 = (static_cast<double>(j) + 2.0 / 3.0) * h;
        row += f(std::array<double, 3>{u1, u2, std::max(0.0, 1.0 - u1 - u2)});
      }
    }
    sum += row;
  }
  return sum * h * h / 2.0;
}

// Mid-point rule at resolutions r and r/2 combined by one Richardson step,
// cancelling the O(h^2) error term of the composite rule.
template <class F>
double simplex_integral(std::size_t vocab_size, std::size_t resolution, F&& f) {
  if (vocab_size == 1) return simplex_midpoint(1, 1, f);
  const std::size_t coarse = resolution / 2;
  const double fine_v = simplex_midpoint(vocab_size, resolution, f);
  const double coarse_v = simplex_midpoint(vocab_size, coarse, f);
  const double r2 = static_cast<double>(resolution) * static_cast<double>(resolution);
  const double c2 = static_cast<double>(coarse) * static_cast<double>(coarse);
  return (r2 * fine_v - c2 * coarse_v) / (r2 - c2);
}

// N! / prod_w x_w! as a product of binomial coefficients (exact for small counts).
inline double multinomial_coefficient(std::span<const Count> counts) {
  double coef = 1.0;
  Count running = 0;
  for (Count c : counts) {
    for (Count k = 1; k <= c; ++k) {
      ++running;
      coef = coef * static_cast<double>(running) / static_cast<double>(k);
    }
  }
  return coef;
}

inline double ipow(double base, Count e) {
  double r = 1.0;
  while (e) {
    if (e & 1) r *= base;
    base *= base;
    e >>= 1;
  }
  return r;
}

// Multinomial likelihood p(x | z).
inline double multinomial_pmf(std::span<const Count> x, std::span<const double> z) {
  double p = multinomial_coefficient(x);
  for (std::size_t w = 0; w < x.size(); ++w) p *= ipow(z[w], x[w]);
  return p;
}

// Raw mid-point estimate of  integral p(a|z) p(b|z) dz  (no extrapolation).
inline double simplex_midpoint_kernel(const CountVector& a, const CountVector& b, std::size_t resolution) {
  if (a.vocab_size() != b.vocab_size()) throw UsageError("simplex oracle: vocabulary size mismatch");
  const auto da = a.dense();
  const auto db = b.dense();
  return simplex_midpoint(a.vocab_size(), resolution, [&](const std::array<double, 3>& z) {
    return multinomial_pmf(da, std::span<const double>(z.data(), da.size())) *
           multinomial_pmf(db, std::span<const double>(z.data(), db.size()));
  });
}

// Numeric value of the sensing kernel  integral p(a|z) p(b|z) dz  over the
// simplex, for W <= 3 and resolution >= 100 points per edge.
inline double simplex_integral_oracle(const CountVector& a, const CountVector& b, std::size_t resolution) {
  if (a.vocab_size() != b.vocab_size()) throw UsageError("simplex oracle: vocabulary size mismatch");
  if (a.vocab_size() > 3) throw UsageError("simplex oracle: only W <= 3 is supported");
  if (resolution < 100) throw UsageError("simplex oracle: resolution must be >= 100");
  const auto da = a.dense();
  const auto db = b.dense();
  return simplex_integral(a.vocab_size(), resolution, [&](const std::array<double, 3>& z) {
    return multinomial_pmf(da, std::span<const double>(z.data(), da.size())) *
           multinomial_pmf(db, std::span<const double>(z.data(), db.size()));
  });
}

// ---------------------------------------------------------------------------
// Dense QP reference for the C-SVC dual:
//   min 1/2 a^T Q a - e^T a,  y^T a = 0,  0 <= a <= C,  Q_ij = y_i y_j K_ij.

struct QpResult {
  std::vector<double> alphas;
  double objective = 0.0;
  std::size_t iterations = 0;
};

namespace detail {

// Euclidean projection onto {0 <= a <= C, y^T a = 0} by bisection on the
// multiplier of the equality constraint.
inline void project_box_hyperplane(std::vector<double>& v, std::span<const int> y, double c) {
  auto clip = [c](double x) { return std::min(c, std::max(0.0, x)); };
  auto residual = [&](double lambda) {
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) s += y[i] * clip(v[i] - lambda * y[i]);
    return s;
  };
  double lo = -1.0, hi = 1.0;
  while (residual(lo) < 0.0) lo *= 2.0;
  while (residual(hi) > 0.0) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (residual(mid) > 0.0) lo = mid;
    else hi = mid;
  }
  const double lambda = 0.5 * (lo + hi);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = clip(v[i] - lambda * y[i]);
}

}  // namespace detail

// Accelerated projected gradient (FISTA with gradient-based restart), step
// 1 / lambda_max(Q). Stops when an iteration moves no coordinate by more than
// tol. Intended for M <= 50.
inline QpResult qp_oracle(std::span<const double> gram, std::span<const int> y, double c, double tol = 1e-10,
                          std::size_t max_iterations = 2'000'000) {
  const std::size_t m = y.size();
  if (m > 50) throw UsageError("qp_oracle: at most 50 variables");
  if (gram.size() != m * m) throw UsageError("qp_oracle: Gram shape does not match labels");
  if (!(c > 0.0)) throw UsageError("qp_oracle: C must be positive");
  bool pos = false, neg = false;
  for (int v : y) {
    if (v == 1) pos = true;
    else if (v == -1) neg = true;
    else throw UsageError("qp_oracle: labels must be +1 or -1");
  }
  if (!pos || !neg) throw UsageError("qp_oracle: single-class labels");
  for (double v : gram)
    if (!std::isfinite(v)) throw DataError("qp_oracle: non-finite Gram");

  std::vector<double> q(m * m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) q[i * m + j] = y[i] * y[j] * gram[i * m + j];

  auto matvec = [&](const std::vector<double>& x, std::vector<double>& out) {
    for (std::size_t i = 0; i < m; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < m; ++j) s += q[i * m + j] * x[j];
      out[i] = s;
    }
  };

  // Largest eigenvalue by power iteration, padded for safety.
  std::vector<double> v(m, 1.0), qv(m);
  double lmax = 0.0;
  for (int it = 0; it < 500; ++it) {
    matvec(v, qv);
    double norm = 0.0;
    for (double x : qv) norm += x * x;
    norm = std::sqrt(norm);
    if (norm == 0.0) break;
    for (std::size_t i = 0; i < m; ++i) v[i] = qv[i] / norm;
    lmax = norm;
  }
  double trace = 0.0;
  for (std::size_t i = 0; i < m; ++i) trace += std::abs(q[i * m + i]);
  const double lipschitz = std::max(lmax * 1.01, 1e-12 * std::max(1.0, trace));
  const double step = 1.0 / lipschitz;

  std::vector<double> x(m, 0.0), x_prev(m, 0.0), yk(m, 0.0), grad(m);
  double t = 1.0;
  QpResult res;
  for (res.iterations = 0; res.iterations < max_iterations; ++res.iterations) {
    matvec(yk, grad);
    std::vector<double> next(m);
    for (std::size_t i = 0; i < m; ++i) next[i] = yk[i] - step * (grad[i] - 1.0);
    detail::project_box_hyperplane(next, y, c);
    double move = 0.0, restart = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      move = std::max(move, std::abs(next[i] - x[i]));
      restart += (yk[i] - next[i]) * (next[i] - x[i]);
    }
    x_prev = x;
    x = next;
    if (move <= tol) break;
    if (restart > 0.0) {
      t = 1.0;
      yk = x;
      continue;
    }
    const double t_next = (1.0 + std::sqrt(1.0 + 4.0 * t * t)) / 2.0;
    for (std::size_t i = 0; i < m; ++i) yk[i] = x[i] + ((t - 1.0) / t_next) * (x[i] - x_prev[i]);
    t = t_next;
  }
  matvec(x, grad);
  double obj = 0.0;
  for (std::size_t i = 0; i < m; ++i) obj += 0.5 * x[i] * grad[i] - x[i];
  res.alphas = std::move(x);
  res.objective = obj;
  return res;
}

// ---------------------------------------------------------------------------
// Monte-Carlo reference for the resampled kernel.

// log n! by direct summation of logarithms.
inline double log_factorial_by_sum(Count n) {
  double s = 0.0;
  for (Count k = 2; k <= n; ++k) s += std::log(static_cast<double>(k));
  return s;
}

inline double log_kernel_by_sums(std::span<const Count> a, std::span<const Count> b) {
  Count na = 0, nb = 0;
  double s = 0.0;
  for (std::size_t w = 0; w < a.size(); ++w) {
    s += log_factorial_by_sum(a[w] + b[w]) - log_factorial_by_sum(a[w]) - log_factorial_by_sum(b[w]);
    na += a[w];
    nb += b[w];
  }
  return s + log_factorial_by_sum(na) + log_factorial_by_sum(nb) -
         log_factorial_by_sum(na + nb + a.size() - 1);
}

struct MonteCarloEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

// E[log K(xa, xb)] where xa, xb are independent length-N multinomial draws
// from the two documents' word frequencies.
inline MonteCarloEstimate mc_expected_log_kernel(const CountVector& a, const CountVector& b, std::uint32_t length,
                                                 std::size_t samples, std::uint64_t seed) {
  if (a.vocab_size() != b.vocab_size()) throw UsageError("mc oracle: vocabulary size mismatch");
  if (a.empty() || b.empty()) throw UsageError("mc oracle: empty document");
  std::mt19937_64 eng(seed);
  auto weights = [](const CountVector& v) {
    std::vector<double> w;
    for (Count c : v.dense()) w.push_back(static_cast<double>(c));
    return w;
  };
  const auto wa = weights(a), wb = weights(b);
  std::discrete_distribution<std::size_t> da(wa.begin(), wa.end()), db(wb.begin(), wb.end());
  const std::size_t vocab = a.vocab_size();
  double mean = 0.0, m2 = 0.0;  // Welford
  std::vector<Count> xa(vocab), xb(vocab);
  for (std::size_t s = 0; s < samples; ++s) {
    std::fill(xa.begin(), xa.end(), 0);
    std::fill(xb.begin(), xb.end(), 0);
    for (std::uint32_t t = 0; t < length; ++t) {
      ++xa[da(eng)];
      ++xb[db(eng)];
    }
    const double v = log_kernel_by_sums(xa, xb);
    const double delta = v - mean;
    mean += delta / static_cast<double>(s + 1);
    m2 += delta * (v - mean);
  }
  const double n = static_cast<double>(samples);
  MonteCarloEstimate est;
  est.mean = mean;
  const double var = samples > 1 ? m2 / (n - 1.0) : 0.0;
  est.std_error = std::sqrt(var / n);
  return est;
}

// ---------------------------------------------------------------------------
// Synthetic generative model: y ~ priors, z | y ~ Dirichlet mixture,
// x | z ~ Multinomial(N, z).

struct DirichletComponent {
  double weight = 1.0;
  std::vector<double> alpha;
};

struct SyntheticModel {
  std::size_t vocab_size = 3;
  double prior_positive = 0.5;  // p(y = +1); p(y = -1) = 1 - prior_positive
  std::vector<DirichletComponent> positive;
  std::vector<DirichletComponent> negative;
  std::uint32_t length = 20;
  std::uint64_t seed = 0;

  void validate() const {
    if (vocab_size < 1) throw UsageError("synthetic model: W must be positive");
    if (!(prior_positive >= 0.0 && prior_positive <= 1.0)) throw UsageError("synthetic model: bad prior");
    for (const auto* mix : {&positive, &negative}) {
      if (mix->empty()) throw UsageError("synthetic model: each class needs a component");
      double total = 0.0;
      for (const auto& c : *mix) {
        if (c.alpha.size() != vocab_size) throw UsageError("synthetic model: alpha length must equal W");
        for (double a : c.alpha)
          if (!(a > 0.0)) throw UsageError("synthetic model: Dirichlet parameters must be positive");
        if (!(c.weight >= 0.0)) throw UsageError("synthetic model: negative mixture weight");
        total += c.weight;
      }
      if (std::abs(total - 1.0) > 1e-12) throw UsageError("synthetic model: mixture weights must sum to 1");
    }
  }
};

// log of the Dirichlet-multinomial pmf  integral Mult(x | N, z) Dir(z | alpha) dz.
inline double dirichlet_multinomial_log_pmf(std::span<const Count> x, std::span<const double> alpha) {
  double a_sum = 0.0;
  Count n = 0;
  double s = 0.0;
  for (std::size_t w = 0; w < x.size(); ++w) {
    a_sum += alpha[w];
    n += x[w];
    s += std::lgamma(static_cast<double>(x[w]) + alpha[w]) - std::lgamma(alpha[w]) -
         std::lgamma(static_cast<double>(x[w]) + 1.0);
  }
  return s + std::lgamma(static_cast<double>(n) + 1.0) + std::lgamma(a_sum) -
         std::lgamma(static_cast<double>(n) + a_sum);
}

struct BayesDecision {
  double positive = 0.0;  // p(x, y = +1)
  double negative = 0.0;  // p(x, y = -1)
  double value() const { return positive - negative; }
  int label() const {
    const double scale = positive + negative;
    return value() >= -1e-9 * scale ? +1 : -1;
  }
};

// <p(x|z), w(z)> with w(z) = p(z, y=+1) - p(z, y=-1), in closed form.
inline BayesDecision bayes_decision_closed_form(const SyntheticModel& model, const CountVector& x) {
  const auto dx = x.dense();
  auto mix = [&](const std::vector<DirichletComponent>& comps) {
    double s = 0.0;
    for (const auto& c : comps) s += c.weight * std::exp(dirichlet_multinomial_log_pmf(dx, c.alpha));
    return s;
  };
  return {model.prior_positive * mix(model.positive), (1.0 - model.prior_positive) * mix(model.negative)};
}

inline double dirichlet_density(std::span<const double> z, std::span<const double> alpha) {
  double a_sum = 0.0, log_norm = 0.0, log_kernel = 0.0;
  for (std::size_t w = 0; w < alpha.size(); ++w) {
    a_sum += alpha[w];
    log_norm -= std::lgamma(alpha[w]);
    if (alpha[w] != 1.0) {
      if (z[w] <= 0.0) return alpha[w] > 1.0 ? 0.0 : std::numeric_limits<double>::infinity();
      log_kernel += (alpha[w] - 1.0) * std::log(z[w]);
    }
  }
  return std::exp(log_norm + std::lgamma(a_sum) + log_kernel);
}

// The same inner product by numeric integration over the simplex (W <= 3).
inline BayesDecision bayes_decision_quadrature(const SyntheticModel& model, const CountVector& x,
                                               std::size_t resolution = 400) {
  if (model.vocab_size > 3) throw UsageError("bayes quadrature: W <= 3 only");
  const auto dx = x.dense();
  auto integrate = [&](const std::vector<DirichletComponent>& comps) {
    return simplex_integral(model.vocab_size, resolution, [&](const std::array<double, 3>& z) {
      std::span<const double> zs(z.data(), model.vocab_size);
      double dens = 0.0;
      for (const auto& c : comps) dens += c.weight * dirichlet_density(zs, c.alpha);
      return multinomial_pmf(dx, zs) * dens;
    });
  };
  return {model.prior_positive * integrate(model.positive),
          (1.0 - model.prior_positive) * integrate(model.negative)};
}

// Bayes-optimal label for x (ties go to +1).
inline int bayes_rule_numeric(const SyntheticModel& model, const CountVector& x, std::size_t resolution = 400) {
  return bayes_decision_quadrature(model, x, resolution).label();
}

// Draws M labelled documents. Labels are "+1" and "-1".
inline Corpus generate_corpus(const SyntheticModel& model, std::size_t m) {
  model.validate();
  if (m == 0) throw UsageError("generate_corpus: M must be positive");
  Engine eng = make_engine(model.seed, 0x73796e746865ULL);
  Corpus c;
  c.vocab_size = model.vocab_size;
  c.vocab_fingerprint = Hasher().field("synthetic").field(std::to_string(model.vocab_size)).finish();
  c.split = "synthetic";
  auto pick = [&](const std::vector<DirichletComponent>& comps) -> const DirichletComponent& {
    const double u = uniform01(eng);
    double acc = 0.0;
    for (const auto& comp : comps) {
      acc += comp.weight;
      if (u < acc) return comp;
    }
    return comps.back();
  };
  std::vector<double> z(model.vocab_size);
  std::vector<WordId> words(model.length);
  for (std::size_t i = 0; i < m; ++i) {
    const bool positive = uniform01(eng) < model.prior_positive;
    const auto& comp = pick(positive ? model.positive : model.negative);
    double total = 0.0;
    for (std::size_t w = 0; w < model.vocab_size; ++w) {
      std::gamma_distribution<double> g(comp.alpha[w], 1.0);
      z[w] = g(eng);
      total += z[w];
    }
    for (auto& v : z) v /= total;
    for (auto& word : words) {
      const double u = uniform01(eng);
      double acc = 0.0;
      WordId chosen = static_cast<WordId>(model.vocab_size - 1);
      for (std::size_t w = 0; w < model.vocab_size; ++w) {
        acc += z[w];
        if (u < acc) {
          chosen = static_cast<WordId>(w);
          break;
        }
      }
      word = chosen;
    }
    std::ostringstream id;
    id << "syn" << model.seed << '-' << std::setw(6) << std::setfill('0') << i;
    c.docs.push_back({Document{id.str(), CountVector::from_words(model.vocab_size, words)}, positive ? "+1" : "-1"});
  }
  return c;
}

}  // namespace sensekern::verify
