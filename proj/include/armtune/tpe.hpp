#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "armtune/errors.hpp"
#include "armtune/hyperparams.hpp"
#include "armtune/rng.hpp"

namespace armtune {

enum class DomainKind : std::uint8_t {
  kUniform = 0,
  kLogUniform = 1,
  kIntUniform = 2,
  kIntLogUniform = 3,
  kCategorical = 4,
};

inline bool is_log_kind(DomainKind k) { return k == DomainKind::kLogUniform || k == DomainKind::kIntLogUniform; }
inline bool is_int_kind(DomainKind k) { return k == DomainKind::kIntUniform || k == DomainKind::kIntLogUniform; }

struct ParamDomain {
  std::string name;
  DomainKind kind = DomainKind::kUniform;
  double low = 0.0;
  double high = 1.0;
  std::vector<std::string> categories;

  void validate() const {
    if (name.empty()) throw UsageError("ParamDomain: empty name");
    if (kind == DomainKind::kCategorical) {
      if (categories.empty()) throw UsageError("ParamDomain " + name + ": empty category list");
      for (std::size_t i = 0; i < categories.size(); ++i) {
        for (std::size_t j = i + 1; j < categories.size(); ++j) {
          if (categories[i] == categories[j]) throw UsageError("ParamDomain " + name + ": duplicate category");
        }
      }
      return;
    }
    if (!(low < high)) throw UsageError("ParamDomain " + name + ": low must be < high");
    if (is_log_kind(kind) && !(low > 0.0)) throw UsageError("ParamDomain " + name + ": log kinds need low > 0");
  }

  bool contains(const ParamValue& v) const {
    switch (kind) {
      case DomainKind::kUniform:
      case DomainKind::kLogUniform: {
        if (!std::holds_alternative<double>(v)) return false;
        const double x = std::get<double>(v);
        return x >= low && x <= high;
      }
      case DomainKind::kIntUniform:
      case DomainKind::kIntLogUniform: {
        if (!std::holds_alternative<std::int64_t>(v)) return false;
        const double x = static_cast<double>(std::get<std::int64_t>(v));
        return x >= low && x <= high;
      }
      case DomainKind::kCategorical: {
        if (!std::holds_alternative<std::string>(v)) return false;
        return std::find(categories.begin(), categories.end(), std::get<std::string>(v)) != categories.end();
      }
    }
    return false;
  }

  double to_internal(double x) const { return is_log_kind(kind) ? std::log(x) : x; }
  double from_internal(double t) const { return is_log_kind(kind) ? std::exp(t) : t; }

  ParamValue finalize(double t) const {
    double x = from_internal(t);
    if (is_int_kind(kind)) {
      const auto r = static_cast<std::int64_t>(std::llround(std::clamp(x, low, high)));
      return std::clamp(r, static_cast<std::int64_t>(std::ceil(low)), static_cast<std::int64_t>(std::floor(high)));
    }
    return std::clamp(x, low, high);
  }

  // Uniform draw on the domain's natural scale (log kinds uniform in log space).
  ParamValue sample_uniform(Rng& rng) const {
    if (kind == DomainKind::kCategorical) {
      return categories[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(categories.size()) - 1))];
    }
    if (kind == DomainKind::kIntUniform) {
      return rng.uniform_int(static_cast<std::int64_t>(std::ceil(low)), static_cast<std::int64_t>(std::floor(high)));
    }
    return finalize(rng.uniform(to_internal(low), to_internal(high)));
  }

  std::string kind_name() const {
    switch (kind) {
      case DomainKind::kUniform: return "uniform";
      case DomainKind::kLogUniform: return "log_uniform";
      case DomainKind::kIntUniform: return "int_uniform";
      case DomainKind::kIntLogUniform: return "int_log_uniform";
      case DomainKind::kCategorical: return "categorical";
    }
    return "?";
  }
};

struct SearchSpace {
  std::vector<ParamDomain> domains;

  void validate() const {
    for (const auto& d : domains) d.validate();
    for (std::size_t i = 0; i < domains.size(); ++i) {
      for (std::size_t j = i + 1; j < domains.size(); ++j) {
        if (domains[i].name == domains[j].name) throw UsageError("SearchSpace: duplicate name " + domains[i].name);
      }
    }
  }

  const ParamDomain* find(const std::string& name) const {
    for (const auto& d : domains) {
      if (d.name == name) return &d;
    }
    return nullptr;
  }

  // True when params carry exactly this space's names with in-domain values.
  bool matches(const ParamMap& params, std::string* why = nullptr) const {
    for (const auto& d : domains) {
      auto it = params.find(d.name);
      if (it == params.end()) {
        if (why) *why = "missing parameter '" + d.name + "'";
        return false;
      }
      if (!d.contains(it->second)) {
        if (why) *why = "parameter '" + d.name + "' outside domain " + d.kind_name();
        return false;
      }
    }
    for (const auto& [name, _] : params) {
      if (find(name) == nullptr) {
        if (why) *why = "unknown parameter '" + name + "'";
        return false;
      }
    }
    return true;
  }
};

enum class TrialState : std::uint8_t { kRunning = 0, kComplete = 1, kFailed = 2 };

inline std::string to_string(TrialState s) {
  switch (s) {
    case TrialState::kRunning: return "running";
    case TrialState::kComplete: return "complete";
    case TrialState::kFailed: return "failed";
  }
  return "?";
}

struct Trial {
  std::int64_t id = 0;
  ParamMap params;
  double value = std::numeric_limits<double>::quiet_NaN();  // higher is better
  TrialState state = TrialState::kRunning;
  std::uint64_t seed = 0;
  std::int64_t started_at = 0;   // logical clock ticks
  std::int64_t finished_at = 0;
};

struct TpeConfig {
  double gamma_fraction = 0.25;  // quantile of trials treated as "good"
  int good_cap = 25;
  int n_startup_trials = 10;
  int n_ei_candidates = 24;
};

// Sort by value descending, ties to the lower id; the top
// min(cap, max(1, ceil(gamma * n))) trials are "good".
inline std::pair<std::vector<Trial>, std::vector<Trial>> split_trials(std::vector<Trial> history,
                                                                      double gamma_fraction, int good_cap = 25) {
  if (history.empty()) throw UsageError("split_trials: empty history");
  std::sort(history.begin(), history.end(), [](const Trial& a, const Trial& b) {
    if (a.value != b.value) return a.value > b.value;
    return a.id < b.id;
  });
  const int n = static_cast<int>(history.size());
  const int n_good = std::min(good_cap, std::max(1, static_cast<int>(std::ceil(gamma_fraction * n))));
  std::vector<Trial> good(history.begin(), history.begin() + std::min(n_good, n));
  std::vector<Trial> bad(history.begin() + std::min(n_good, n), history.end());
  return {std::move(good), std::move(bad)};
}

namespace detail {

inline double norm_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }
inline double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace detail

// Mixture of one truncated Gaussian per observation plus a wide prior
// component, all equally weighted, in the domain's transformed space.
// Categorical domains hold smoothed category weights instead.
class ParzenEstimator {
 public:
  ParzenEstimator(const std::vector<ParamValue>& values, const ParamDomain& domain) : domain_(domain) {
    if (domain.kind == DomainKind::kCategorical) {
      std::vector<double> counts(domain.categories.size(), 0.0);
      for (const auto& v : values) {
        const auto it = std::find(domain.categories.begin(), domain.categories.end(), std::get<std::string>(v));
        if (it == domain.categories.end()) throw UsageError("parzen_fit: value outside categorical domain " + domain.name);
        counts[static_cast<std::size_t>(it - domain.categories.begin())] += 1.0;
      }
      double total = 0.0;
      category_weights_.resize(counts.size());
      for (std::size_t i = 0; i < counts.size(); ++i) total += 1.0 + counts[i];
      for (std::size_t i = 0; i < counts.size(); ++i) category_weights_[i] = (1.0 + counts[i]) / total;
      return;
    }

    low_ = domain.to_internal(domain.low);
    high_ = domain.to_internal(domain.high);
    const double width = high_ - low_;
    const double mid = 0.5 * (low_ + high_);

    std::vector<double> obs;
    obs.reserve(values.size());
    for (const auto& v : values) {
      if (!domain.contains(v)) throw UsageError("parzen_fit: value outside domain " + domain.name);
      obs.push_back(domain.to_internal(as_double(v)));
    }
    std::sort(obs.begin(), obs.end());

    centers_.push_back(mid);  // prior spans the whole domain
    bandwidths_.push_back(width);
    // Bandwidth floor follows the component count so sparse histories stay
    // smooth; for 99+ observations it coincides with width/100.
    const double floor = width / std::min(100.0, static_cast<double>(obs.size()) + 2.0);
    for (std::size_t i = 0; i < obs.size(); ++i) {
      double bw = width;
      const bool has_left = i > 0, has_right = i + 1 < obs.size();
      if (has_left || has_right) {
        const double dl = has_left ? obs[i] - obs[i - 1] : 0.0;
        const double dr = has_right ? obs[i + 1] - obs[i] : 0.0;
        bw = std::max(dl, dr);
      }
      centers_.push_back(obs[i]);
      bandwidths_.push_back(std::clamp(bw, floor, width));
    }
  }

  // Draws on the external scale (log kinds exponentiated, int kinds rounded).
  ParamValue sample(Rng& rng) const {
    if (domain_.kind == DomainKind::kCategorical) {
      double u = rng.uniform();
      for (std::size_t i = 0; i < category_weights_.size(); ++i) {
        u -= category_weights_[i];
        if (u < 0.0) return domain_.categories[i];
      }
      return domain_.categories.back();
    }
    const auto k = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(centers_.size()) - 1));
    const double c = centers_[k], b = bandwidths_[k];
    for (int tries = 0; tries < 10000; ++tries) {
      const double x = c + b * rng.normal();
      if (x >= low_ && x <= high_) return domain_.finalize(x);
    }
    return domain_.finalize(std::clamp(c, low_, high_));
  }

  // Log density of an external value; log kinds include the 1/x Jacobian so
  // the pdf integrates to one over [low, high] on the external scale.
  double log_density(const ParamValue& v) const {
    if (domain_.kind == DomainKind::kCategorical) {
      const auto it = std::find(domain_.categories.begin(), domain_.categories.end(), std::get<std::string>(v));
      if (it == domain_.categories.end()) throw UsageError("log_density: unknown category for " + domain_.name);
      return std::log(category_weights_[static_cast<std::size_t>(it - domain_.categories.begin())]);
    }
    const double x = as_double(v);
    const double t = domain_.to_internal(x);
    double density = 0.0;
    for (std::size_t k = 0; k < centers_.size(); ++k) {
      const double c = centers_[k], b = bandwidths_[k];
      const double z = detail::norm_cdf((high_ - c) / b) - detail::norm_cdf((low_ - c) / b);
      density += detail::norm_pdf((t - c) / b) / (b * std::max(z, 1e-300));
    }
    density /= static_cast<double>(centers_.size());
    double logd = std::log(std::max(density, 1e-300));
    if (is_log_kind(domain_.kind)) logd -= std::log(x);
    return logd;
  }

  const std::vector<double>& centers() const { return centers_; }
  const std::vector<double>& bandwidths() const { return bandwidths_; }
  const std::vector<double>& category_weights() const { return category_weights_; }

 private:
  ParamDomain domain_;
  std::vector<double> centers_;
  std::vector<double> bandwidths_;
  double low_ = 0.0, high_ = 1.0;
  std::vector<double> category_weights_;
};

inline ParzenEstimator parzen_fit(const std::vector<ParamValue>& values, const ParamDomain& domain) {
  return ParzenEstimator(values, domain);
}

// One TPE suggestion. Below n_startup completed trials this is an independent
// uniform draw per domain; afterwards each dimension maximizes the good/bad
// density ratio over n_ei_candidates draws from the good density. Failed
// trials join the bad side after the quantile split.
inline ParamMap tpe_suggest(const SearchSpace& space, const std::vector<Trial>& history, Rng& rng,
                            const TpeConfig& config) {
  space.validate();
  std::vector<Trial> complete;
  std::vector<const ParamMap*> failed;
  for (const auto& t : history) {
    if (t.state == TrialState::kComplete) complete.push_back(t);
    if (t.state == TrialState::kFailed) failed.push_back(&t.params);
  }

  ParamMap out;
  if (static_cast<int>(complete.size()) < config.n_startup_trials || complete.empty()) {
    for (const auto& d : space.domains) out[d.name] = d.sample_uniform(rng);
    return out;
  }

  auto [good, bad] = split_trials(std::move(complete), config.gamma_fraction, config.good_cap);
  for (const auto& d : space.domains) {
    std::vector<ParamValue> good_values, bad_values;
    good_values.reserve(good.size());
    for (const auto& t : good) good_values.push_back(t.params.at(d.name));
    bad_values.reserve(bad.size() + failed.size());
    for (const auto& t : bad) bad_values.push_back(t.params.at(d.name));
    for (const ParamMap* p : failed) {
      auto it = p->find(d.name);
      if (it != p->end() && d.contains(it->second)) bad_values.push_back(it->second);
    }
    const ParzenEstimator l(good_values, d);
    const ParzenEstimator g(bad_values, d);
    ParamValue best{};
    double best_score = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < config.n_ei_candidates; ++c) {
      const ParamValue candidate = l.sample(rng);
      const double score = l.log_density(candidate) - g.log_density(candidate);
      if (score > best_score) {  // ties keep the first drawn
        best_score = score;
        best = candidate;
      }
    }
    out[d.name] = best;
  }
  return out;
}

// Binned main-effect importance: per dimension, variance of per-bin mean
// objectives over q quantile bins, normalized to sum to one.
inline std::map<std::string, double> importance(const std::vector<Trial>& history, const SearchSpace& space) {
  std::vector<const Trial*> complete;
  for (const auto& t : history) {
    if (t.state == TrialState::kComplete) complete.push_back(&t);
  }
  const int n = static_cast<int>(complete.size());
  if (n < 20) throw UsageError("importance: needs at least 20 complete trials, have " + std::to_string(n));

  const int q = std::min(8, n / 5);
  std::map<std::string, double> raw;
  double total = 0.0;
  for (const auto& d : space.domains) {
    std::vector<double> bin_sum, bin_count;
    if (d.kind == DomainKind::kCategorical) {
      bin_sum.assign(d.categories.size(), 0.0);
      bin_count.assign(d.categories.size(), 0.0);
      for (const Trial* t : complete) {
        const auto& cat = std::get<std::string>(t->params.at(d.name));
        const auto it = std::find(d.categories.begin(), d.categories.end(), cat);
        const auto b = static_cast<std::size_t>(it - d.categories.begin());
        bin_sum[b] += t->value;
        bin_count[b] += 1.0;
      }
    } else {
      // Rank-based quantile bins; ties resolved by trial id for determinism.
      std::vector<const Trial*> sorted = complete;
      std::sort(sorted.begin(), sorted.end(), [&](const Trial* a, const Trial* b) {
        const double va = as_double(a->params.at(d.name));
        const double vb = as_double(b->params.at(d.name));
        if (va != vb) return va < vb;
        return a->id < b->id;
      });
      bin_sum.assign(q, 0.0);
      bin_count.assign(q, 0.0);
      for (int r = 0; r < n; ++r) {
        const int b = std::min(q - 1, r * q / n);
        bin_sum[b] += sorted[r]->value;
        bin_count[b] += 1.0;
      }
    }
    std::vector<double> means;
    for (std::size_t b = 0; b < bin_sum.size(); ++b) {
      if (bin_count[b] > 0.0) means.push_back(bin_sum[b] / bin_count[b]);
    }
    double var = 0.0;
    if (means.size() > 1) {
      double mean = 0.0;
      for (double m : means) mean += m;
      mean /= static_cast<double>(means.size());
      for (double m : means) var += (m - mean) * (m - mean);
      var /= static_cast<double>(means.size());
    }
    raw[d.name] = var;
    total += var;
  }

  std::map<std::string, double> scores;
  for (const auto& d : space.domains) {
    scores[d.name] = total > 0.0 ? raw[d.name] / total : 1.0 / static_cast<double>(space.domains.size());
  }
  return scores;
}

}  // namespace armtune
