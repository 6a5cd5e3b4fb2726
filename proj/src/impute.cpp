#include "etaknn/impute.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "etaknn/error.hpp"
#include "etaknn/log.hpp"
#include "etaknn/stats.hpp"
#include "parallel.hpp"

namespace etaknn {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

double periodic_raw(double dist, double period, double length) {
  const double s = std::sin(std::numbers::pi * dist / period);
  return std::exp(-2.0 * s * s / (length * length));
}

void check_range(const Range& r, const char* name) {
  if (!(r.lo > 0.0) || !(r.hi >= r.lo) || !std::isfinite(r.hi)) {
    fail(ErrorCode::parameter, std::string("GP range ") + name +
                                   " must satisfy 0 < lo <= hi");
  }
}

struct Factorization {
  Eigen::MatrixXd chol;
  double noise_used = 0.0;
  bool ok = false;
};

// Cholesky of K + noise I with jitter escalation (noise, 10x, 100x).
Factorization factorize(const Eigen::MatrixXd& k, double noise) {
  const double base = std::max(noise, 1e-12);
  const double levels[3] = {noise, 10.0 * base, 100.0 * base};
  Factorization f;
  for (double level : levels) {
    Eigen::MatrixXd sigma = k;
    sigma.diagonal().array() += level;
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) continue;
    const Eigen::MatrixXd& l = llt.matrixLLT();
    bool finite = true;
    for (Eigen::Index i = 0; i < l.rows(); ++i) {
      const double d = l(i, i);
      if (!(d > 0.0) || !std::isfinite(d)) {
        finite = false;
        break;
      }
    }
    if (!finite) continue;
    f.chol = l.triangularView<Eigen::Lower>();
    f.noise_used = level;
    f.ok = true;
    return f;
  }
  return f;
}

struct Standardized {
  Eigen::VectorXd y;
  double offset = 0.0;
  double scale = 1.0;
};

Standardized standardize(std::span<const double> y, bool normalize) {
  Standardized s;
  s.y.resize(static_cast<Eigen::Index>(y.size()));
  if (normalize) {
    s.offset = mean(y);
    const double sd = stddev(y);
    s.scale = sd > 1e-12 ? sd : 1.0;
  }
  for (std::size_t i = 0; i < y.size(); ++i) {
    s.y(static_cast<Eigen::Index>(i)) = (y[i] - s.offset) / s.scale;
  }
  return s;
}

// Pairwise kernel evaluation for repeated fits on one input set. Integer
// inputs (the common case: step indices) use a per-distance lookup table.
class GramBuilder {
 public:
  explicit GramBuilder(std::span<const double> x) : x_(x.begin(), x.end()) {
    integral_ = std::all_of(x_.begin(), x_.end(), [](double v) {
      return v == std::floor(v) && std::abs(v) < 1e9;
    });
    if (integral_ && !x_.empty()) {
      auto [lo, hi] = std::minmax_element(x_.begin(), x_.end());
      max_dist_ = static_cast<std::size_t>(*hi - *lo);
    }
  }

  Eigen::MatrixXd build(const KernelParams& p) const {
    const auto n = static_cast<Eigen::Index>(x_.size());
    Eigen::MatrixXd k(n, n);
    if (!integral_) {
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
          const double v = p(x_[static_cast<std::size_t>(i)],
                             x_[static_cast<std::size_t>(j)]);
          k(i, j) = v;
          k(j, i) = v;
        }
      }
      return k;
    }
    std::vector<double> t1(max_dist_ + 1, 0.0), t2(max_dist_ + 1);
    for (std::size_t d = 0; d <= max_dist_; ++d) {
      const auto dist = static_cast<double>(d);
      t2[d] = periodic_raw(dist, p.period2, p.l2);
      if (p.kind == KernelKind::composite) {
        t1[d] = periodic_raw(dist, p.period1, p.l1);
      }
    }
    const double inv_scale2 = 1.0 / (p.trend_scale * p.trend_scale);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double xi = x_[static_cast<std::size_t>(i)];
      for (Eigen::Index j = 0; j <= i; ++j) {
        const double xj = x_[static_cast<std::size_t>(j)];
        const auto d = static_cast<std::size_t>(std::abs(xi - xj));
        double v = t2[d];
        if (p.kind == KernelKind::composite) {
          v += t1[d] * xi * xj * inv_scale2;
        }
        k(i, j) = v;
        k(j, i) = v;
      }
    }
    return k;
  }

 private:
  std::vector<double> x_;
  bool integral_ = false;
  std::size_t max_dist_ = 0;
};

FittedGp condition_with(const GramBuilder& gram, std::span<const double> x,
                        std::span<const double> y, const KernelParams& params,
                        bool normalize) {
  if (x.size() != y.size() || x.empty()) {
    fail(ErrorCode::fit, "GP conditioning needs equal, non-empty x and y");
  }
  Standardized s = standardize(y, normalize);
  Factorization f = factorize(gram.build(params), params.noise);
  if (!f.ok) {
    fail(ErrorCode::fit,
         "Gram matrix is numerically singular after jitter escalation");
  }
  FittedGp m;
  m.params = params;
  m.x.assign(x.begin(), x.end());
  m.y.assign(y.begin(), y.end());
  m.y_offset = s.offset;
  m.y_scale = s.scale;
  m.noise_used = f.noise_used;
  auto l = f.chol.triangularView<Eigen::Lower>();
  m.alpha = l.transpose().solve(l.solve(s.y));
  const double n = static_cast<double>(x.size());
  m.log_likelihood = -0.5 * s.y.dot(m.alpha) -
                     f.chol.diagonal().array().log().sum() - 0.5 * n * kLog2Pi;
  m.chol = std::move(f.chol);
  return m;
}

// Log marginal likelihood only; -inf when the factorization fails.
double log_marginal(const GramBuilder& gram, const Eigen::VectorXd& y,
                    const KernelParams& params) {
  Eigen::MatrixXd sigma = gram.build(params);
  sigma.diagonal().array() += params.noise;
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) {
    return -std::numeric_limits<double>::infinity();
  }
  const Eigen::VectorXd half = llt.matrixL().solve(y);
  const auto diag = llt.matrixLLT().diagonal().array();
  if ((diag <= 0.0).any() || !diag.allFinite()) {
    return -std::numeric_limits<double>::infinity();
  }
  const double ll = -0.5 * half.squaredNorm() - diag.log().sum() -
                    0.5 * static_cast<double>(y.size()) * kLog2Pi;
  return std::isfinite(ll) ? ll : -std::numeric_limits<double>::infinity();
}

// exp(a cos t) = I0(a) + 2 sum_k Ik(a) cos(k t) turns each periodic factor
// into a short feature map once the Bessel tail drops below kTailTol. The
// log marginal likelihood is then evaluated through the Woodbury identity on
// a basis Gram matrix computed once per window, which makes the search cheap.
// Only the search uses it; the returned fit is always conditioned densely.
class SpectralLikelihood {
 public:
  static constexpr int kMaxHarmonics = 40;
  static constexpr double kTailTol = 1e-15;

  SpectralLikelihood(std::span<const double> x, const Eigen::VectorXd& y,
                     const GpConfig& cfg)
      : n_(static_cast<Eigen::Index>(x.size())) {
    k2_ = harmonics(1.0 / (cfg.l2_range.lo * cfg.l2_range.lo));
    k1_ = harmonics(1.0 / (cfg.l1_range.lo * cfg.l1_range.lo));
    if (k1_ < 0 || k2_ < 0) return;
    const Eigen::Index m1 = 2 * k1_ + 1, m2 = 2 * k2_ + 1;
    if (2 * (m1 + m2) > n_) return;

    Eigen::MatrixXd f(n_, m1 + m2);
    const double w1 = 2.0 * std::numbers::pi / cfg.period1;
    const double w2 = 2.0 * std::numbers::pi / cfg.period2;
    for (Eigen::Index i = 0; i < n_; ++i) {
      const double xi = x[static_cast<std::size_t>(i)];
      f(i, 0) = 1.0;
      for (int k = 1; k <= k2_; ++k) {
        f(i, 2 * k - 1) = std::cos(k * w2 * xi);
        f(i, 2 * k) = std::sin(k * w2 * xi);
      }
      const double trend = xi / cfg.trend_scale;
      f(i, m2) = trend;
      for (int k = 1; k <= k1_; ++k) {
        f(i, m2 + 2 * k - 1) = trend * std::cos(k * w1 * xi);
        f(i, m2 + 2 * k) = trend * std::sin(k * w1 * xi);
      }
    }
    gram_ = f.transpose() * f;
    fty_ = f.transpose() * y;
    yy_ = y.squaredNorm();
    m2_ = m2;
    usable_ = true;
  }

  bool usable() const { return usable_; }

  double operator()(const KernelParams& p) const {
    const double a1 = 1.0 / (p.l1 * p.l1), a2 = 1.0 / (p.l2 * p.l2);
    const int k1 = std::min(harmonics(a1), k1_);
    const int k2 = std::min(harmonics(a2), k2_);
    std::vector<Eigen::Index> cols;
    std::vector<double> w;
    for (int k = 0; k <= k2; ++k) push(cols, w, k, 0, a2);
    for (int k = 0; k <= k1; ++k) push(cols, w, k, m2_, a1);

    const auto r = static_cast<Eigen::Index>(cols.size());
    Eigen::MatrixXd a(r, r);
    Eigen::VectorXd b(r);
    for (Eigen::Index i = 0; i < r; ++i) {
      const auto wi = w[static_cast<std::size_t>(i)];
      b(i) = wi * fty_(cols[static_cast<std::size_t>(i)]);
      for (Eigen::Index j = 0; j <= i; ++j) {
        a(i, j) = wi * w[static_cast<std::size_t>(j)] *
                  gram_(cols[static_cast<std::size_t>(i)],
                        cols[static_cast<std::size_t>(j)]);
        a(j, i) = a(i, j);
      }
      a(i, i) += p.noise;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) {
      return -std::numeric_limits<double>::infinity();
    }
    const Eigen::VectorXd half = llt.matrixL().solve(b);
    const double quad = (yy_ - half.squaredNorm()) / p.noise;
    const double logdet =
        static_cast<double>(n_ - r) * std::log(p.noise) +
        2.0 * llt.matrixLLT().diagonal().array().log().sum();
    const double ll = -0.5 * quad - 0.5 * logdet -
                      0.5 * static_cast<double>(n_) * kLog2Pi;
    return std::isfinite(ll) ? ll : -std::numeric_limits<double>::infinity();
  }

  // Harmonics needed for e^{-a} exp(a cos t) at tolerance; -1 beyond the cap.
  static int harmonics(double a) {
    if (!(a <= 50.0)) return -1;
    for (int k = 1; k <= kMaxHarmonics + 1; ++k) {
      if (k > a && 2.0 * std::exp(-a) * std::cyl_bessel_i(k, a) < kTailTol) {
        return k - 1;
      }
    }
    return -1;
  }

 private:
  static void push(std::vector<Eigen::Index>& cols, std::vector<double>& w,
                   int k, Eigen::Index offset, double a) {
    const double c = std::exp(-a) * std::cyl_bessel_i(k, a) * (k == 0 ? 1.0 : 2.0);
    const double s = std::sqrt(c);
    if (k == 0) {
      cols.push_back(offset);
      w.push_back(s);
      return;
    }
    cols.push_back(offset + 2 * k - 1);
    w.push_back(s);
    cols.push_back(offset + 2 * k);
    w.push_back(s);
  }

  Eigen::Index n_ = 0;
  Eigen::Index m2_ = 0;
  int k1_ = -1, k2_ = -1;
  bool usable_ = false;
  Eigen::MatrixXd gram_;
  Eigen::VectorXd fty_;
  double yy_ = 0.0;
};

std::vector<double> log_grid(const Range& r, int points) {
  if (r.lo == r.hi || points <= 1) return {r.lo};
  std::vector<double> g(static_cast<std::size_t>(points));
  const double a = std::log(r.lo), b = std::log(r.hi);
  for (int i = 0; i < points; ++i) {
    g[static_cast<std::size_t>(i)] =
        std::exp(a + (b - a) * i / static_cast<double>(points - 1));
  }
  g.front() = r.lo;
  g.back() = r.hi;
  return g;
}

}  // namespace

void GpConfig::validate() const {
  if (!(period1 > 0.0) || !(period2 > 0.0)) {
    fail(ErrorCode::parameter, "GP periods must be positive");
  }
  check_range(l1_range, "l1");
  check_range(l2_range, "l2");
  check_range(noise_range, "noise");
  if (window_len < 2 || window_overlap >= window_len) {
    fail(ErrorCode::parameter, "GP window needs len >= 2 and overlap < len");
  }
  if (grid_points < 1 || max_opt_evals < 1) {
    fail(ErrorCode::parameter, "GP search budget must be positive");
  }
  if (!(trend_scale > 0.0)) {
    fail(ErrorCode::parameter, "GP trend scale must be positive");
  }
}

double periodic_kernel(double xi, double xj, double period, double length) {
  if (!(period > 0.0) || !(length > 0.0)) {
    fail(ErrorCode::parameter,
         "periodic kernel needs positive period and length scale");
  }
  return periodic_raw(std::abs(xi - xj), period, length);
}

double composite_kernel(double xi, double xj, const GpConfig& cfg, double l1,
                        double l2) {
  if (!(cfg.trend_scale > 0.0)) {
    fail(ErrorCode::parameter, "trend scale must be positive");
  }
  const double dot = (xi / cfg.trend_scale) * (xj / cfg.trend_scale);
  return periodic_kernel(xi, xj, cfg.period1, l1) * dot +
         periodic_kernel(xi, xj, cfg.period2, l2);
}

double KernelParams::operator()(double xi, double xj) const {
  const double d = std::abs(xi - xj);
  double v = periodic_raw(d, period2, l2);
  if (kind == KernelKind::composite) {
    v += periodic_raw(d, period1, l1) * (xi / trend_scale) * (xj / trend_scale);
  }
  return v;
}

FittedGp gp_condition(std::span<const double> x, std::span<const double> y,
                      const KernelParams& params, bool normalize) {
  if (!(params.period2 > 0.0) || !(params.l2 > 0.0) ||
      (params.kind == KernelKind::composite &&
       (!(params.period1 > 0.0) || !(params.l1 > 0.0) ||
        !(params.trend_scale > 0.0))) ||
      !(params.noise >= 0.0)) {
    fail(ErrorCode::parameter, "kernel parameters must be positive");
  }
  GramBuilder gram(x);
  return condition_with(gram, x, y, params, normalize);
}

double gp_log_marginal(std::span<const double> x, std::span<const double> y,
                       const KernelParams& params) {
  if (x.size() != y.size() || x.empty()) {
    fail(ErrorCode::fit, "x and y must be equal-length and non-empty");
  }
  const GramBuilder gram(x);
  return log_marginal(gram, standardize(y, false).y, params);
}

std::optional<double> gp_log_marginal_spectral(std::span<const double> x,
                                               std::span<const double> y,
                                               const KernelParams& params,
                                               const GpConfig& cfg) {
  if (x.size() != y.size() || x.empty()) {
    fail(ErrorCode::fit, "x and y must be equal-length and non-empty");
  }
  const SpectralLikelihood spectral(x, standardize(y, false).y, cfg);
  if (!spectral.usable()) return std::nullopt;
  return spectral(params);
}

FittedGp gp_fit_window(std::span<const double> x, std::span<const double> y,
                       const GpConfig& cfg) {
  cfg.validate();
  if (x.size() != y.size()) {
    fail(ErrorCode::fit, "x and y lengths differ");
  }
  if (x.size() < cfg.min_observations) {
    fail(ErrorCode::fit, "window has " + std::to_string(x.size()) +
                             " observations, needs " +
                             std::to_string(cfg.min_observations));
  }
  GramBuilder gram(x);
  const Standardized s = standardize(y, cfg.normalize_y);
  const SpectralLikelihood spectral(x, s.y, cfg);
  auto objective = [&](const KernelParams& q) {
    return spectral.usable() ? spectral(q) : log_marginal(gram, s.y, q);
  };

  KernelParams p;
  p.kind = KernelKind::composite;
  p.period1 = cfg.period1;
  p.period2 = cfg.period2;
  p.trend_scale = cfg.trend_scale;

  // Search in log space; axis order (l1, l2, noise).
  const Range ranges[3] = {cfg.l1_range, cfg.l2_range, cfg.noise_range};
  auto apply = [&](const double (&v)[3]) {
    KernelParams q = p;
    q.l1 = v[0];
    q.l2 = v[1];
    q.noise = v[2];
    return q;
  };

  int evals = 0;
  double best_ll = -std::numeric_limits<double>::infinity();
  double best[3] = {ranges[0].lo, ranges[1].lo, ranges[2].lo};

  const auto g1 = log_grid(ranges[0], cfg.grid_points);
  const auto g2 = log_grid(ranges[1], cfg.grid_points);
  const auto g3 = log_grid(ranges[2], cfg.grid_points);
  for (double a : g1) {
    for (double b : g2) {
      for (double c : g3) {
        if (evals >= cfg.max_opt_evals) break;
        const double v[3] = {a, b, c};
        const double ll = objective(apply(v));
        ++evals;
        if (ll > best_ll) {
          best_ll = ll;
          best[0] = a;
          best[1] = b;
          best[2] = c;
        }
      }
    }
  }

  // Coordinate refinement in log space, halving the step after a full pass
  // without improvement.
  double step[3];
  for (int a = 0; a < 3; ++a) {
    const double span = std::log(ranges[a].hi / ranges[a].lo);
    step[a] = span / std::max(1, cfg.grid_points - 1) * 0.5;
  }
  while (evals < cfg.max_opt_evals) {
    bool improved = false;
    bool any_step = false;
    for (int a = 0; a < 3 && evals < cfg.max_opt_evals; ++a) {
      if (step[a] < 1e-3) continue;
      any_step = true;
      for (double dir : {1.0, -1.0}) {
        if (evals >= cfg.max_opt_evals) break;
        double v[3] = {best[0], best[1], best[2]};
        v[a] = std::clamp(best[a] * std::exp(dir * step[a]), ranges[a].lo,
                          ranges[a].hi);
        if (v[a] == best[a]) continue;
        const double ll = objective(apply(v));
        ++evals;
        if (ll > best_ll) {
          best_ll = ll;
          best[a] = v[a];
          improved = true;
          break;
        }
      }
    }
    if (!any_step) break;
    if (!improved) {
      for (double& st : step) st *= 0.5;
    }
  }

  if (!std::isfinite(best_ll)) {
    fail(ErrorCode::fit,
         "no hyperparameter setting gave a positive-definite Gram matrix");
  }
  return condition_with(gram, x, y, apply(best), cfg.normalize_y);
}

GpPosterior gp_posterior(const FittedGp& model,
                         std::span<const double> x_star) {
  const auto n = static_cast<Eigen::Index>(model.x.size());
  const auto m = static_cast<Eigen::Index>(x_star.size());
  Eigen::MatrixXd k_star(n, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      k_star(i, j) = model.params(model.x[static_cast<std::size_t>(i)],
                                  x_star[static_cast<std::size_t>(j)]);
    }
  }
  const Eigen::MatrixXd v =
      model.chol.triangularView<Eigen::Lower>().solve(k_star);
  GpPosterior post;
  post.mean.resize(x_star.size());
  post.variance.resize(x_star.size());
  const double scale2 = model.y_scale * model.y_scale;
  for (Eigen::Index j = 0; j < m; ++j) {
    const auto js = static_cast<std::size_t>(j);
    post.mean[js] = model.y_offset + model.y_scale * k_star.col(j).dot(model.alpha);
    const double prior = model.params(x_star[js], x_star[js]);
    const double var = prior - v.col(j).squaredNorm();
    post.variance[js] = std::max(0.0, var) * scale2;
  }
  return post;
}

std::vector<std::pair<std::size_t, std::size_t>> impute_windows(
    std::size_t total, std::size_t window_len, std::size_t overlap) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  if (total == 0) return out;
  if (total <= window_len) {
    out.emplace_back(0, total);
    return out;
  }
  const std::size_t stride = window_len - overlap;
  for (std::size_t start = 0;; start += stride) {
    if (start + window_len >= total) {
      out.emplace_back(total - window_len, total);
      break;
    }
    out.emplace_back(start, start + window_len);
  }
  return out;
}

namespace {

struct CounterResult {
  std::vector<double> filled;  // per step in [0, n_steps); NaN = none
  std::vector<WindowFit> windows;
  std::vector<std::string> warnings;
};

CounterResult impute_counter(const FlowPanel& flows, std::size_t col,
                             std::size_t n_steps, const GpConfig& cfg) {
  CounterResult res;
  const NodeId id = flows.counter_ids.at(col);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  res.filled.assign(n_steps, nan);

  std::size_t observed = 0;
  for (std::size_t t = 0; t < n_steps; ++t) {
    observed += flows.data.valid(t, col) ? 1 : 0;
  }
  if (observed == n_steps) return res;
  if (observed == 0) {
    res.warnings.push_back("counter " + std::to_string(id) +
                           " has no observations; left missing");
    return res;
  }

  const auto windows =
      impute_windows(n_steps, cfg.window_len, cfg.window_overlap);
  std::vector<double> weighted(n_steps, 0.0), weight(n_steps, 0.0);

  for (std::size_t w = 0; w < windows.size(); ++w) {
    const auto [start, end] = windows[w];
    WindowFit info;
    info.counter = id;
    info.start = start;
    info.end = end;

    std::vector<double> x, y, x_star;
    std::vector<std::size_t> star_steps;
    for (std::size_t t = start; t < end; ++t) {
      const double rel = static_cast<double>(t - start);
      if (flows.data.valid(t, col)) {
        x.push_back(rel);
        y.push_back(flows.data.value(t, col));
      } else {
        x_star.push_back(rel);
        star_steps.push_back(t);
      }
    }
    info.n_observed = x.size();
    if (x_star.empty()) {
      info.note = "no gaps";
      res.windows.push_back(std::move(info));
      continue;
    }
    if (x.size() < cfg.min_observations) {
      info.note = "too few observations; gaps left missing";
      res.warnings.push_back("counter " + std::to_string(id) + " window [" +
                             std::to_string(start) + ", " +
                             std::to_string(end) + ") has " +
                             std::to_string(x.size()) +
                             " observations; gaps left missing");
      res.windows.push_back(std::move(info));
      continue;
    }
    FittedGp model;
    try {
      model = gp_fit_window(x, y, cfg);
    } catch (const Error& e) {
      info.note = e.what();
      res.warnings.push_back("counter " + std::to_string(id) + " window [" +
                             std::to_string(start) + ", " +
                             std::to_string(end) + "): " + e.what());
      res.windows.push_back(std::move(info));
      continue;
    }
    info.fitted = true;
    info.l1 = model.params.l1;
    info.l2 = model.params.l2;
    info.noise = model.params.noise;
    info.log_likelihood = model.log_likelihood;

    const GpPosterior post = gp_posterior(model, x_star);
    // Linear cross-fade across the overlap with neighbouring windows.
    const std::size_t ramp_in = w > 0 ? windows[w - 1].second - start : 0;
    const std::size_t ramp_out =
        w + 1 < windows.size() ? end - windows[w + 1].first : 0;
    for (std::size_t i = 0; i < star_steps.size(); ++i) {
      const std::size_t t = star_steps[i];
      double wt = 1.0;
      if (ramp_in > 0) {
        wt = std::min(wt, (static_cast<double>(t - start) + 0.5) /
                              static_cast<double>(ramp_in));
      }
      if (ramp_out > 0) {
        wt = std::min(wt, (static_cast<double>(end - t) - 0.5) /
                              static_cast<double>(ramp_out));
      }
      weighted[t] += wt * post.mean[i];
      weight[t] += wt;
    }
    res.windows.push_back(std::move(info));
  }

  for (std::size_t t = 0; t < n_steps; ++t) {
    if (weight[t] > 0.0) res.filled[t] = std::max(0.0, weighted[t] / weight[t]);
  }
  return res;
}

}  // namespace

FlowPanel impute_prefix(const FlowPanel& flows, std::size_t n_steps,
                        const GpConfig& cfg, ImputeReport* report) {
  cfg.validate();
  n_steps = std::min(n_steps, flows.data.rows());
  const std::size_t n_counters = flows.data.cols();
  std::vector<CounterResult> results(n_counters);
  detail::parallel_for(n_counters, detail::resolve_threads(cfg.threads),
                       [&](std::size_t c) {
                         results[c] = impute_counter(flows, c, n_steps, cfg);
                       });

  FlowPanel out = flows;
  std::size_t imputed = 0;
  for (std::size_t c = 0; c < n_counters; ++c) {
    const auto& r = results[c];
    for (std::size_t t = 0; t < n_steps; ++t) {
      if (flows.data.valid(t, c) || std::isnan(r.filled[t])) continue;
      out.data.set(t, c, r.filled[t], CellState::imputed);
      ++imputed;
    }
    for (const auto& w : r.warnings) log_warning(w);
    if (report != nullptr) {
      report->windows.insert(report->windows.end(), r.windows.begin(),
                             r.windows.end());
      report->warnings.insert(report->warnings.end(), r.warnings.begin(),
                              r.warnings.end());
    }
  }
  if (report != nullptr) report->cells_imputed += imputed;
  return out;
}

FlowPanel impute_panel(const FlowPanel& flows, const GpConfig& cfg,
                       ImputeReport* report) {
  return impute_prefix(flows, flows.data.rows(), cfg, report);
}

}  // namespace etaknn
