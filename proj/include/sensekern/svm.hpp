#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "sensekern/error.hpp"
#include "sensekern/fingerprint.hpp"
#include "sensekern/gram.hpp"

namespace sensekern {

struct TrainConfig {
  double C = 1.0;
  double tolerance = 1e-3;  // stop when the maximal KKT violation drops below this
  std::size_t max_iterations = 10'000'000;
  bool shrinking = true;

  void validate() const {
    if (!(C > 0.0) || !std::isfinite(C)) throw UsageError("TrainConfig: C must be positive");
    if (!(tolerance > 0.0)) throw UsageError("TrainConfig: tolerance must be positive");
    if (max_iterations == 0) throw UsageError("TrainConfig: max_iterations must be positive");
  }
};

struct SupportVector {
  std::size_t index = 0;  // position in the training set
  std::string id;
  double coef = 0.0;  // alpha_i * y_i
};

// Binary soft-margin SVM: f(x) = sum_i coef_i K(x, x_i) + bias.
struct SvmModel {
  std::vector<SupportVector> support;
  double bias = 0.0;
  double C = 1.0;
  Fingerprint spec;
  std::vector<std::string> train_ids;
  std::string label = "+1";  // class treated as positive

  // Solver diagnostics (not serialized).
  std::vector<double> alphas;
  double objective = 0.0;
  std::size_t iterations = 0;
  bool converged = true;
};

namespace detail {

// Sequential minimal optimisation for
//   min_a 1/2 a^T Q a - e^T a   s.t.  y^T a = 0,  0 <= a_i <= C,
// with Q_ij = y_i y_j K_ij, using maximal-violating-pair selection with
// second-order gain, optional shrinking, and a floor on non-positive
// curvature so indefinite Grams still make progress.
class SmoSolver {
 public:
  static constexpr double kTau = 1e-12;

  SmoSolver(const GramMatrix& gram, std::span<const int> y, const TrainConfig& cfg)
      : gram_(gram), y_(y.begin(), y.end()), cfg_(cfg), l_(y.size()) {
    alpha_.assign(l_, 0.0);
    status_.assign(l_, Status::Lower);
    grad_.assign(l_, -1.0);
    grad_bar_.assign(l_, 0.0);
    order_.resize(l_);
    for (std::size_t t = 0; t < l_; ++t) order_[t] = t;
    active_size_ = l_;
  }

  void solve() {
    std::size_t counter = std::min<std::size_t>(l_, 1000) + 1;
    while (iterations_ < cfg_.max_iterations) {
      if (cfg_.shrinking && --counter == 0) {
        counter = std::min<std::size_t>(l_, 1000);
        shrink();
      }
      std::size_t i = 0, j = 0;
      if (!select_working_set(i, j)) {
        reconstruct_gradient();
        active_size_ = l_;
        if (!select_working_set(i, j)) break;
        counter = 1;
      }
      ++iterations_;
      update_pair(i, j);
    }
    if (iterations_ >= cfg_.max_iterations) {
      converged_ = false;
      reconstruct_gradient();
      active_size_ = l_;
    }
  }

  const std::vector<double>& alphas() const { return alpha_; }
  std::size_t iterations() const { return iterations_; }
  bool converged() const { return converged_; }

  double objective() const {
    double v = 0.0;
    for (std::size_t i = 0; i < l_; ++i) v += alpha_[i] * (grad_[i] - 1.0);
    return v / 2.0;
  }

  // Offset rho of the decision function sum_i y_i a_i K(x, x_i) - rho: mean of
  // y_i G_i over free variables, or the midpoint of the bound-implied interval.
  double rho() const {
    double ub = std::numeric_limits<double>::infinity();
    double lb = -std::numeric_limits<double>::infinity();
    double sum_free = 0.0;
    std::size_t nr_free = 0;
    for (std::size_t i = 0; i < l_; ++i) {
      const double yg = y_[i] * grad_[i];
      if (status_[i] == Status::Upper) {
        if (y_[i] == -1) ub = std::min(ub, yg);
        else lb = std::max(lb, yg);
      } else if (status_[i] == Status::Lower) {
        if (y_[i] == +1) ub = std::min(ub, yg);
        else lb = std::max(lb, yg);
      } else {
        ++nr_free;
        sum_free += yg;
      }
    }
    if (nr_free > 0) return sum_free / static_cast<double>(nr_free);
    if (!std::isfinite(ub) || !std::isfinite(lb)) return std::isfinite(ub) ? ub : (std::isfinite(lb) ? lb : 0.0);
    return (ub + lb) / 2.0;
  }

 private:
  enum class Status : std::uint8_t { Lower, Upper, Free };

  double q(std::size_t i, std::size_t j) const { return y_[i] * y_[j] * gram_(i, j); }
  bool is_upper(std::size_t i) const { return status_[i] == Status::Upper; }
  bool is_lower(std::size_t i) const { return status_[i] == Status::Lower; }
  bool is_free(std::size_t i) const { return status_[i] == Status::Free; }

  void update_status(std::size_t i) {
    if (alpha_[i] >= cfg_.C) status_[i] = Status::Upper;
    else if (alpha_[i] <= 0.0) status_[i] = Status::Lower;
    else status_[i] = Status::Free;
  }

  // Candidate comparison: larger score wins, equal scores go to the lower index.
  static bool better(double score, std::size_t idx, double best, std::size_t best_idx, bool have) {
    return !have || score > best || (score == best && idx < best_idx);
  }

  bool select_working_set(std::size_t& out_i, std::size_t& out_j) const {
    double gmax = -std::numeric_limits<double>::infinity();
    std::size_t gmax_idx = 0;
    bool have_i = false;
    for (std::size_t t = 0; t < active_size_; ++t) {
      const std::size_t k = order_[t];
      double score;
      if (y_[k] == +1) {
        if (is_upper(k)) continue;
        score = -grad_[k];
      } else {
        if (is_lower(k)) continue;
        score = grad_[k];
      }
      if (better(score, k, gmax, gmax_idx, have_i)) {
        gmax = score;
        gmax_idx = k;
        have_i = true;
      }
    }

    double gmax2 = -std::numeric_limits<double>::infinity();
    double best_gain = 0.0;
    std::size_t gmin_idx = 0;
    bool have_j = false;
    const std::size_t i = gmax_idx;
    for (std::size_t t = 0; t < active_size_; ++t) {
      const std::size_t k = order_[t];
      double grad_diff;
      double quad;
      if (y_[k] == +1) {
        if (is_lower(k)) continue;
        gmax2 = std::max(gmax2, grad_[k]);
        if (!have_i) continue;
        grad_diff = gmax + grad_[k];
        quad = gram_(i, i) + gram_(k, k) - 2.0 * y_[i] * q(i, k);
      } else {
        if (is_upper(k)) continue;
        gmax2 = std::max(gmax2, -grad_[k]);
        if (!have_i) continue;
        grad_diff = gmax - grad_[k];
        quad = gram_(i, i) + gram_(k, k) + 2.0 * y_[i] * q(i, k);
      }
      if (grad_diff > 0.0) {
        const double gain = grad_diff * grad_diff / (quad > 0.0 ? quad : kTau);
        if (better(gain, k, best_gain, gmin_idx, have_j)) {
          best_gain = gain;
          gmin_idx = k;
          have_j = true;
        }
      }
    }
    if (!have_i || !have_j || gmax + gmax2 < cfg_.tolerance) return false;
    out_i = gmax_idx;
    out_j = gmin_idx;
    return true;
  }

  void update_pair(std::size_t i, std::size_t j) {
    const double c = cfg_.C;
    const double old_ai = alpha_[i];
    const double old_aj = alpha_[j];
    double ai = old_ai, aj = old_aj;
    const double qij = q(i, j);
    if (y_[i] != y_[j]) {
      double quad = gram_(i, i) + gram_(j, j) + 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad_[i] - grad_[j]) / quad;
      const double diff = ai - aj;
      ai += delta;
      aj += delta;
      if (diff > 0.0) {
        if (aj < 0.0) {
          aj = 0.0;
          ai = diff;
        }
      } else if (ai < 0.0) {
        ai = 0.0;
        aj = -diff;
      }
      if (diff > 0.0) {
        if (ai > c) {
          ai = c;
          aj = c - diff;
        }
      } else if (aj > c) {
        aj = c;
        ai = c + diff;
      }
    } else {
      double quad = gram_(i, i) + gram_(j, j) - 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad_[i] - grad_[j]) / quad;
      const double sum = ai + aj;
      ai -= delta;
      aj += delta;
      if (sum > c) {
        if (ai > c) {
          ai = c;
          aj = sum - c;
        }
      } else if (aj < 0.0) {
        aj = 0.0;
        ai = sum;
      }
      if (sum > c) {
        if (aj > c) {
          aj = c;
          ai = sum - c;
        }
      } else if (ai < 0.0) {
        ai = 0.0;
        aj = sum;
      }
    }
    alpha_[i] = ai;
    alpha_[j] = aj;

    const double dai = ai - old_ai;
    const double daj = aj - old_aj;
    for (std::size_t t = 0; t < active_size_; ++t) {
      const std::size_t k = order_[t];
      grad_[k] += q(i, k) * dai + q(j, k) * daj;
    }

    for (std::size_t idx : {i, j}) {
      const bool was_upper = is_upper(idx);
      update_status(idx);
      if (was_upper != is_upper(idx)) {
        const double sign = was_upper ? -1.0 : 1.0;
        for (std::size_t k = 0; k < l_; ++k) grad_bar_[k] += sign * c * q(idx, k);
      }
    }
  }

  bool be_shrunk(std::size_t k, double gmax1, double gmax2) const {
    if (is_upper(k)) return y_[k] == +1 ? -grad_[k] > gmax1 : -grad_[k] > gmax2;
    if (is_lower(k)) return y_[k] == +1 ? grad_[k] > gmax2 : grad_[k] > gmax1;
    return false;
  }

  void shrink() {
    double gmax1 = -std::numeric_limits<double>::infinity();
    double gmax2 = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < active_size_; ++t) {
      const std::size_t k = order_[t];
      if (y_[k] == +1) {
        if (!is_upper(k)) gmax1 = std::max(gmax1, -grad_[k]);
        if (!is_lower(k)) gmax2 = std::max(gmax2, grad_[k]);
      } else {
        if (!is_upper(k)) gmax2 = std::max(gmax2, -grad_[k]);
        if (!is_lower(k)) gmax1 = std::max(gmax1, grad_[k]);
      }
    }
    if (!unshrink_ && gmax1 + gmax2 <= cfg_.tolerance * 10.0) {
      unshrink_ = true;
      reconstruct_gradient();
      active_size_ = l_;
    }
    for (std::size_t t = 0; t < active_size_; ++t) {
      if (!be_shrunk(order_[t], gmax1, gmax2)) continue;
      --active_size_;
      while (active_size_ > t) {
        if (!be_shrunk(order_[active_size_], gmax1, gmax2)) {
          std::swap(order_[t], order_[active_size_]);
          break;
        }
        --active_size_;
      }
    }
  }

  void reconstruct_gradient() {
    if (active_size_ == l_) return;
    for (std::size_t t = active_size_; t < l_; ++t) {
      const std::size_t k = order_[t];
      grad_[k] = grad_bar_[k] - 1.0;
    }
    for (std::size_t t = active_size_; t < l_; ++t) {
      const std::size_t k = order_[t];
      for (std::size_t s = 0; s < active_size_; ++s) {
        const std::size_t f = order_[s];
        if (is_free(f)) grad_[k] += alpha_[f] * q(k, f);
      }
    }
  }

  const GramMatrix& gram_;
  std::vector<int> y_;
  TrainConfig cfg_;
  std::size_t l_;
  std::vector<double> alpha_;
  std::vector<Status> status_;
  std::vector<double> grad_;
  std::vector<double> grad_bar_;
  std::vector<std::size_t> order_;
  std::size_t active_size_ = 0;
  std::size_t iterations_ = 0;
  bool unshrink_ = false;
  bool converged_ = true;
};

inline void check_training_gram(const GramMatrix& gram, std::size_t labels) {
  if (!gram.is_square()) throw UsageError("training Gram must be square");
  if (gram.rows() != labels) {
    throw UsageError("label count " + std::to_string(labels) + " does not match Gram size " +
                     std::to_string(gram.rows()));
  }
  if (!gram.all_finite()) throw DataError("training Gram contains non-finite values");
  if (!gram.is_symmetric()) throw UsageError("training Gram must be symmetric");
}

}  // namespace detail

// Trains a C-SVC on a precomputed Gram. Labels must be +1/-1 with both present.
inline SvmModel train_binary(const GramMatrix& gram, std::span<const int> labels, const TrainConfig& cfg) {
  cfg.validate();
  detail::check_training_gram(gram, labels.size());
  bool pos = false, neg = false;
  for (int y : labels) {
    if (y == 1) pos = true;
    else if (y == -1) neg = true;
    else throw UsageError("binary labels must be +1 or -1");
  }
  if (!pos || !neg) throw UsageError("training labels contain a single class");

  detail::SmoSolver solver(gram, labels, cfg);
  solver.solve();

  SvmModel model;
  model.C = cfg.C;
  model.spec = gram.spec();
  model.train_ids = gram.row_ids();
  model.alphas = solver.alphas();
  model.objective = solver.objective();
  model.iterations = solver.iterations();
  model.converged = solver.converged();
  model.bias = -solver.rho();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (model.alphas[i] > 0.0) {
      model.support.push_back({i, gram.row_ids()[i], model.alphas[i] * labels[i]});
    }
  }
  return model;
}

// Decision values f(x) = sum_i coef_i K(x, x_i) + bias for each row of a
// test-vs-train Gram. Support vectors are matched to columns by identifier.
inline std::vector<double> decision_values(const SvmModel& model, const GramMatrix& test_vs_train) {
  static const Fingerprint kUnset{};
  if (model.spec != kUnset && test_vs_train.spec() != kUnset && model.spec != test_vs_train.spec()) {
    throw UsageError("Gram kernel fingerprint does not match the model's kernel");
  }
  std::vector<std::size_t> column(model.support.size());
  const auto& cols = test_vs_train.col_ids();
  if (cols == model.train_ids) {
    for (std::size_t s = 0; s < model.support.size(); ++s) column[s] = model.support[s].index;
  } else {
    std::unordered_map<std::string, std::size_t> by_id;
    for (std::size_t j = 0; j < cols.size(); ++j) by_id.emplace(cols[j], j);
    for (std::size_t s = 0; s < model.support.size(); ++s) {
      auto it = by_id.find(model.support[s].id);
      if (it == by_id.end()) {
        throw UsageError("Gram columns do not contain support vector '" + model.support[s].id + "'");
      }
      column[s] = it->second;
    }
  }
  std::vector<double> out(test_vs_train.rows());
  for (std::size_t r = 0; r < out.size(); ++r) {
    const auto row = test_vs_train.row(r);
    double f = 0.0;
    for (std::size_t s = 0; s < column.size(); ++s) f += model.support[s].coef * row[column[s]];
    out[r] = f + model.bias;
  }
  return out;
}

// One-vs-all ensemble. With exactly two classes a single model is trained
// (class 0 positive) and class 1 scores its negation, so predictions agree
// with the binary decision sign.
struct MulticlassModel {
  std::vector<std::string> classes;
  std::vector<SvmModel> models;

  std::size_t num_classes() const { return classes.size(); }
};

inline MulticlassModel train_one_vs_all(const GramMatrix& gram, std::span<const int> labels,
                                        std::vector<std::string> classes, const TrainConfig& cfg) {
  const std::size_t k = classes.size();
  if (k < 2) throw UsageError("one-vs-all needs at least two classes");
  std::vector<std::size_t> counts(k, 0);
  for (int c : labels) {
    if (c < 0 || static_cast<std::size_t>(c) >= k) throw UsageError("class id out of range");
    ++counts[c];
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] == 0) throw UsageError("class '" + classes[c] + "' has no training examples");
  }
  MulticlassModel out;
  out.classes = std::move(classes);
  const std::size_t trained = k == 2 ? 1 : k;
  std::vector<int> y(labels.size());
  for (std::size_t c = 0; c < trained; ++c) {
    for (std::size_t i = 0; i < labels.size(); ++i) y[i] = labels[i] == static_cast<int>(c) ? 1 : -1;
    auto model = train_binary(gram, y, cfg);
    model.label = out.classes[c];
    out.models.push_back(std::move(model));
  }
  return out;
}

// Per-class scores, one row per test document.
inline std::vector<std::vector<double>> class_scores(const MulticlassModel& model, const GramMatrix& test_vs_train) {
  std::vector<std::vector<double>> scores(test_vs_train.rows(), std::vector<double>(model.num_classes()));
  if (model.num_classes() == 2 && model.models.size() == 1) {
    const auto d = decision_values(model.models[0], test_vs_train);
    for (std::size_t r = 0; r < d.size(); ++r) {
      scores[r][0] = d[r];
      scores[r][1] = -d[r];
    }
    return scores;
  }
  if (model.models.size() != model.num_classes()) throw UsageError("multiclass model is incomplete");
  for (std::size_t c = 0; c < model.models.size(); ++c) {
    const auto d = decision_values(model.models[c], test_vs_train);
    for (std::size_t r = 0; r < d.size(); ++r) scores[r][c] = d[r];
  }
  return scores;
}

// Argmax of per-class decision values; ties go to the lowest class id.
inline std::vector<int> predict_multiclass(const MulticlassModel& model, const GramMatrix& test_vs_train) {
  const auto scores = class_scores(model, test_vs_train);
  std::vector<int> out(scores.size());
  for (std::size_t r = 0; r < scores.size(); ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < scores[r].size(); ++c)
      if (scores[r][c] > scores[r][best]) best = c;
    out[r] = static_cast<int>(best);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model files: header lines, then "<training-doc-id>\t<coef>" per support vector.

inline void write_model(std::ostream& os, const SvmModel& m) {
  os << std::setprecision(17);
  os << "sensekern-svm 1\n";
  os << "kernel " << m.spec.hex() << '\n';
  os << "C " << m.C << '\n';
  os << "bias " << m.bias << '\n';
  os << "label " << m.label << '\n';
  os << "train_size " << m.train_ids.size() << '\n';
  os << "support " << m.support.size() << '\n';
  for (const auto& sv : m.support) os << sv.id << '\t' << sv.coef << '\n';
}

namespace detail {

inline std::string expect_key(std::istream& is, std::string_view key) {
  std::string line;
  if (!std::getline(is, line)) throw DataError("model file truncated before '" + std::string(key) + "'");
  if (line.rfind(std::string(key) + " ", 0) != 0) {
    throw DataError("model file: expected '" + std::string(key) + "', got '" + line + "'");
  }
  return line.substr(key.size() + 1);
}

inline double parse_double(const std::string& s) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw DataError("trailing characters in number '" + s + "'");
    return v;
  } catch (const std::logic_error&) {
    throw DataError("invalid number '" + s + "'");
  }
}

}  // namespace detail

// Support vectors are re-indexed by their order in the file; decision_values
// aligns them to Gram columns by identifier.
inline SvmModel read_model(std::istream& is) {
  std::string header;
  if (!std::getline(is, header) || header != "sensekern-svm 1") throw DataError("not a model file");
  SvmModel m;
  m.spec = Fingerprint::from_hex(detail::expect_key(is, "kernel"));
  m.C = detail::parse_double(detail::expect_key(is, "C"));
  m.bias = detail::parse_double(detail::expect_key(is, "bias"));
  m.label = detail::expect_key(is, "label");
  detail::expect_key(is, "train_size");
  const auto count = std::stoull(detail::expect_key(is, "support"));
  for (std::size_t s = 0; s < count; ++s) {
    std::string line;
    if (!std::getline(is, line)) throw DataError("model file truncated in support vectors");
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw DataError("model file: malformed support vector line");
    m.support.push_back({s, line.substr(0, tab), detail::parse_double(line.substr(tab + 1))});
  }
  return m;
}

inline void write_multiclass_model(std::ostream& os, const MulticlassModel& m) {
  os << "sensekern-ova 1\n";
  os << "classes " << m.classes.size() << '\n';
  for (const auto& c : m.classes) os << c << '\n';
  os << "models " << m.models.size() << '\n';
  for (const auto& b : m.models) write_model(os, b);
}

inline MulticlassModel read_multiclass_model(std::istream& is) {
  std::string header;
  if (!std::getline(is, header) || header != "sensekern-ova 1") throw DataError("not a multiclass model file");
  MulticlassModel m;
  const auto k = std::stoull(detail::expect_key(is, "classes"));
  for (std::size_t c = 0; c < k; ++c) {
    std::string name;
    if (!std::getline(is, name)) throw DataError("multiclass model truncated");
    m.classes.push_back(name);
  }
  const auto n = std::stoull(detail::expect_key(is, "models"));
  for (std::size_t i = 0; i < n; ++i) m.models.push_back(read_model(is));
  return m;
}

}  // namespace sensekern
