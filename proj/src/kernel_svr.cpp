#include "elmarket/kernel_svr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace elmarket::svr {

namespace {

constexpr double kTau = 1e-12;

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

double squared_distance(std::span<const double> x, std::span<const double> y) {
  double d = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double t = x[k] - y[k];
    d += t * t;
  }
  return d;
}

double gaussian(double sq_dist, double sigma) {
  return std::exp(-sq_dist / (2.0 * sigma * sigma));
}

bool at_bound(double beta_abs, double c) { return beta_abs >= c * (1.0 - 1e-12); }

// Pairwise dual ascent over the 2n variables a_t. Variable t < n is alpha_t
// (sign +1), t >= n is alpha*_{t-n} (sign -1). Q_tu = s_t s_u K(t mod n,
// u mod n); the linear term is epsilon - y for alpha and epsilon + y for
// alpha*.
class SmoSolver {
 public:
  SmoSolver(std::vector<FeatureVector> x, std::vector<double> y,
            const SvrHyperparams& hp)
      : x_(std::move(x)), y_(std::move(y)), hp_(hp), n_(y_.size()) {
    kernel_.resize(n_ * n_);
    for (std::size_t r = 0; r < n_; ++r) {
      kernel_[r * n_ + r] = 1.0;
      for (std::size_t s = r + 1; s < n_; ++s) {
        const double k = gaussian(squared_distance(x_[r], x_[s]), hp_.kernel.sigma);
        kernel_[r * n_ + s] = k;
        kernel_[s * n_ + r] = k;
      }
    }
    a_.assign(2 * n_, 0.0);
    grad_.resize(2 * n_);
    for (std::size_t r = 0; r < n_; ++r) {
      grad_[r] = hp_.epsilon - y_[r];
      grad_[r + n_] = hp_.epsilon + y_[r];
    }
  }

  // Runs until the maximal violation drops below `gap` or `budget`
  // iterations are spent. Returns the iterations used. Bound variables that
  // are far from violating are shrunk out of the working set; the full
  // gradient is rebuilt and every variable re-checked before stopping.
  long long run(double gap, long long budget) {
    long long it = 0;
    reset_active();
    const long long shrink_every = static_cast<long long>(std::min<std::size_t>(n_, 1000));
    long long counter = shrink_every;
    while (it < budget) {
      std::size_t i = 0, j = 0;
      if (!select_pair(gap, i, j)) {
        if (active_.size() == 2 * n_) break;
        reconstruct_gradient();
        reset_active();
        counter = shrink_every;
        continue;
      }
      update_pair(i, j);
      ++it;
      if (--counter == 0) {
        counter = shrink_every;
        shrink();
      }
    }
    if (active_.size() != 2 * n_) {
      reconstruct_gradient();
      reset_active();
    }
    return it;
  }

  std::vector<double> beta() const {
    std::vector<double> b(n_);
    for (std::size_t r = 0; r < n_; ++r) b[r] = a_[r] - a_[r + n_];
    return b;
  }

  // Bias from the free variables when any exist, otherwise the midpoint
  // of the interval left feasible by the bound variables.
  double bias() const {
    double ub = std::numeric_limits<double>::infinity();
    double lb = -std::numeric_limits<double>::infinity();
    double sum_free = 0.0;
    std::size_t nr_free = 0;
    for (std::size_t t = 0; t < 2 * n_; ++t) {
      const double s = sign(t);
      const double yg = s * grad_[t];
      if (a_[t] >= hp_.c) {
        if (s < 0) ub = std::min(ub, yg);
        else lb = std::max(lb, yg);
      } else if (a_[t] <= 0.0) {
        if (s > 0) ub = std::min(ub, yg);
        else lb = std::max(lb, yg);
      } else {
        ++nr_free;
        sum_free += yg;
      }
    }
    const double rho = nr_free > 0 ? sum_free / static_cast<double>(nr_free)
                                   : (ub + lb) / 2.0;
    return -rho;
  }

  std::size_t size() const { return n_; }

 private:
  double sign(std::size_t t) const { return t < n_ ? 1.0 : -1.0; }
  double k(std::size_t t, std::size_t u) const {
    return kernel_[(t % n_) * n_ + (u % n_)];
  }
  double q(std::size_t t, std::size_t u) const { return sign(t) * sign(u) * k(t, u); }
  bool in_up(std::size_t t) const { return t < n_ ? a_[t] < hp_.c : a_[t] > 0.0; }
  bool in_low(std::size_t t) const { return t < n_ ? a_[t] > 0.0 : a_[t] < hp_.c; }

  bool upper_bound(std::size_t t) const { return a_[t] >= hp_.c; }
  bool lower_bound(std::size_t t) const { return a_[t] <= 0.0; }

  void reset_active() {
    active_.resize(2 * n_);
    for (std::size_t t = 0; t < 2 * n_; ++t) active_[t] = t;
  }

  void reconstruct_gradient() {
    std::vector<double> beta(n_);
    for (std::size_t r = 0; r < n_; ++r) beta[r] = a_[r] - a_[r + n_];
    for (std::size_t r = 0; r < n_; ++r) {
      const double* krow = &kernel_[r * n_];
      double f = 0.0;
      for (std::size_t u = 0; u < n_; ++u) {
        if (beta[u] != 0.0) f += beta[u] * krow[u];
      }
      grad_[r] = f + hp_.epsilon - y_[r];
      grad_[r + n_] = -f + hp_.epsilon + y_[r];
    }
  }

  // Largest -s G over the up set and largest s G over the low set.
  void violation_bounds(double& gmax1, double& gmax2) const {
    gmax1 = -std::numeric_limits<double>::infinity();
    gmax2 = -std::numeric_limits<double>::infinity();
    for (std::size_t t : active_) {
      const double sg = sign(t) * grad_[t];
      if (in_up(t)) gmax1 = std::max(gmax1, -sg);
      if (in_low(t)) gmax2 = std::max(gmax2, sg);
    }
  }

  void shrink() {
    double gmax1 = 0.0, gmax2 = 0.0;
    violation_bounds(gmax1, gmax2);
    std::size_t keep = 0;
    for (std::size_t t : active_) {
      const double g = grad_[t];
      bool out = false;
      if (upper_bound(t)) out = t < n_ ? -g > gmax1 : -g > gmax2;
      else if (lower_bound(t)) out = t < n_ ? g > gmax2 : g > gmax1;
      if (!out) active_[keep++] = t;
    }
    active_.resize(keep);
  }

  bool select_pair(double gap, std::size_t& out_i, std::size_t& out_j) const {
    const std::size_t n = n_;
    const std::size_t none = 2 * n;
    double gmax = -std::numeric_limits<double>::infinity();
    std::size_t i = none;
    for (std::size_t t : active_) {
      if (!in_up(t)) continue;
      const double v = -sign(t) * grad_[t];
      if (v > gmax || (v == gmax && t < i)) {
        gmax = v;
        i = t;
      }
    }
    if (i == none) return false;

    // With a unit diagonal the second-order coefficient for any pair is
    // 2 - 2 K(i, t), whatever the signs.
    const double* krow = &kernel_[(i % n) * n];
    double gmin = std::numeric_limits<double>::infinity();
    double best = std::numeric_limits<double>::infinity();
    std::size_t j = none;
    for (std::size_t t : active_) {
      if (!in_low(t)) continue;
      const double v = -sign(t) * grad_[t];
      gmin = std::min(gmin, v);
      const double diff = gmax - v;
      if (diff <= 0.0) continue;
      double quad = 2.0 - 2.0 * krow[t < n ? t : t - n];
      if (quad <= 0.0) quad = kTau;
      const double obj = -(diff * diff) / quad;
      if (obj < best || (obj == best && t < j)) {
        best = obj;
        j = t;
      }
    }
    if (j == none || gmax - gmin < gap) return false;
    out_i = i;
    out_j = j;
    return true;
  }

  void update_pair(std::size_t i, std::size_t j) {
    const double c = hp_.c;
    const double old_i = a_[i];
    const double old_j = a_[j];
    const double qij = q(i, j);
    if (sign(i) != sign(j)) {
      double quad = 2.0 + 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad_[i] - grad_[j]) / quad;
      const double diff = a_[i] - a_[j];
      a_[i] += delta;
      a_[j] += delta;
      if (diff > 0.0) {
        if (a_[j] < 0.0) { a_[j] = 0.0; a_[i] = diff; }
      } else {
        if (a_[i] < 0.0) { a_[i] = 0.0; a_[j] = -diff; }
      }
      if (diff > 0.0) {
        if (a_[i] > c) { a_[i] = c; a_[j] = c - diff; }
      } else {
        if (a_[j] > c) { a_[j] = c; a_[i] = c + diff; }
      }
    } else {
      double quad = 2.0 - 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad_[i] - grad_[j]) / quad;
      const double sum = a_[i] + a_[j];
      a_[i] -= delta;
      a_[j] += delta;
      if (sum > c) {
        if (a_[i] > c) { a_[i] = c; a_[j] = sum - c; }
      } else {
        if (a_[j] < 0.0) { a_[j] = 0.0; a_[i] = sum; }
      }
      if (sum > c) {
        if (a_[j] > c) { a_[j] = c; a_[i] = sum - c; }
      } else {
        if (a_[i] < 0.0) { a_[i] = 0.0; a_[j] = sum; }
      }
    }

    const double di = sign(i) * (a_[i] - old_i);
    const double dj = sign(j) * (a_[j] - old_j);
    const std::size_t ri = i % n_;
    const std::size_t rj = j % n_;
    // The kernel matrix is symmetric, so rows stand in for columns.
    const double* ki = &kernel_[ri * n_];
    const double* kj = &kernel_[rj * n_];
    for (std::size_t t : active_) {
      const std::size_t r = t < n_ ? t : t - n_;
      const double d = di * ki[r] + dj * kj[r];
      grad_[t] += t < n_ ? d : -d;
    }
  }

  std::vector<FeatureVector> x_;
  std::vector<double> y_;
  SvrHyperparams hp_;
  std::size_t n_;
  std::vector<double> kernel_;
  std::vector<double> a_;
  std::vector<double> grad_;
  std::vector<std::size_t> active_;
};

// Coefficient for each training sample; zero for non-support samples.
std::vector<double> expand_beta(const SvrModel& m, std::size_t n) {
  std::vector<double> full(n, 0.0);
  for (std::size_t s = 0; s < m.support_indices.size(); ++s) {
    if (m.support_indices[s] >= n)
      throw std::invalid_argument("model support index outside training set");
    full[m.support_indices[s]] = m.beta[s];
  }
  return full;
}

SvrModel build_model(const std::vector<FeatureVector>& scaled,
                     const std::vector<double>& beta, double bias,
                     const SvrHyperparams& hp, const FeatureScaler& scaler) {
  SvrModel m;
  m.kernel = hp.kernel;
  m.feature_scaler = scaler;
  m.bias = bias;
  const double zero = 1e-12 * hp.c;
  for (std::size_t r = 0; r < beta.size(); ++r) {
    if (std::abs(beta[r]) <= zero) continue;
    m.support_vectors.push_back(scaled[r]);
    m.beta.push_back(beta[r]);
    m.support_indices.push_back(r);
  }
  return m;
}

}  // namespace

void KernelSpec::validate() const {
  require(kind == KernelKind::Gaussian, "unsupported kernel kind");
  require(std::isfinite(sigma) && sigma > 0.0, "kernel sigma must be positive");
}

void SvrHyperparams::validate() const {
  require(std::isfinite(c) && c > 0.0, "svr c must be positive");
  require(std::isfinite(epsilon) && epsilon >= 0.0, "svr epsilon must be nonnegative");
  require(std::isfinite(kkt_tolerance) && kkt_tolerance > 0.0,
          "svr kkt_tolerance must be positive");
  require(max_passes > 0, "svr max_passes must be positive");
  kernel.validate();
}

void TrainingSet::add(FeatureVector features, double target) {
  if (samples.empty() && feature_dim == 0) feature_dim = features.size();
  if (features.size() != feature_dim)
    throw std::invalid_argument("feature vector dimension mismatch");
  samples.push_back({std::move(features), target});
}

void TrainingSet::validate() const {
  require(feature_dim > 0, "training set feature_dim must be positive");
  for (const auto& s : samples) {
    require(s.features.size() == feature_dim, "feature vector dimension mismatch");
  }
}

FeatureScaler::FeatureScaler(std::vector<Range> ranges) : ranges_(std::move(ranges)) {
  for (const auto& r : ranges_) require(r.max >= r.min, "scaler range max < min");
}

FeatureScaler FeatureScaler::identity(std::size_t dim) {
  return FeatureScaler(std::vector<Range>(dim, Range{0.0, 1.0}));
}

FeatureVector FeatureScaler::scale(std::span<const double> x) const {
  require(x.size() == ranges_.size(), "feature vector dimension mismatch");
  FeatureVector out(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double width = ranges_[k].max - ranges_[k].min;
    out[k] = width > 0.0 ? (x[k] - ranges_[k].min) / width : 0.0;
  }
  return out;
}

FeatureScaler fit_scaler(const TrainingSet& ts) {
  require(!ts.empty(), "cannot fit scaler on empty training set");
  ts.validate();
  std::vector<FeatureScaler::Range> ranges(ts.feature_dim);
  for (std::size_t k = 0; k < ts.feature_dim; ++k) {
    ranges[k] = {ts.samples[0].features[k], ts.samples[0].features[k]};
  }
  for (const auto& s : ts.samples) {
    for (std::size_t k = 0; k < ts.feature_dim; ++k) {
      ranges[k].min = std::min(ranges[k].min, s.features[k]);
      ranges[k].max = std::max(ranges[k].max, s.features[k]);
    }
  }
  return FeatureScaler(std::move(ranges));
}

ConvergenceError::ConvergenceError(double residual, SvrModel model)
    : std::runtime_error([residual] {
        std::ostringstream os;
        os << "svr training did not converge: KKT residual " << residual;
        return os.str();
      }()),
      residual_(residual),
      model_(std::move(model)) {}

double kernel_eval(const KernelSpec& spec, std::span<const double> x,
                   std::span<const double> y) {
  require(x.size() == y.size(), "kernel arguments differ in dimension");
  spec.validate();
  return gaussian(squared_distance(x, y), spec.sigma);
}

SvrModel train(const TrainingSet& ts, const SvrHyperparams& hp,
               const FeatureScaler& scaler) {
  hp.validate();
  require(!ts.empty(), "cannot train on empty training set");
  ts.validate();
  require(scaler.dim() == ts.feature_dim, "scaler dimension mismatch");

  std::vector<FeatureVector> scaled;
  std::vector<double> targets;
  scaled.reserve(ts.size());
  targets.reserve(ts.size());
  for (const auto& s : ts.samples) {
    scaled.push_back(scaler.scale(s.features));
    targets.push_back(s.target);
  }

  SmoSolver solver(scaled, targets, hp);
  const long long epoch = static_cast<long long>(std::max<std::size_t>(ts.size(), 1));
  long long budget = epoch * hp.max_passes;
  // The pair gap starts an order of magnitude below the acceptance
  // tolerance so the dual objective is accurate too; much tighter gaps cost
  // millions of iterations on near-degenerate price histories.
  double gap = hp.kkt_tolerance * 1e-1;
  SvrModel model;
  double residual = 0.0;
  for (;;) {
    budget -= solver.run(gap, budget);
    model = build_model(scaled, solver.beta(), solver.bias(), hp, scaler);
    residual = kkt_residual(model, ts, hp);
    if (residual <= hp.kkt_tolerance) break;
    if (budget <= 0 || gap < 1e-14) throw ConvergenceError(residual, std::move(model));
    gap /= 10.0;
  }
  // Polish the dual objective with a short extra run; SMO steps never raise
  // the objective, and the accepted model is kept if the polish disturbs KKT.
  const long long polish = std::min(budget, 20 * epoch);
  if (polish > 0) {
    solver.run(hp.kkt_tolerance * 1e-5, polish);
    SvrModel polished = build_model(scaled, solver.beta(), solver.bias(), hp, scaler);
    if (kkt_residual(polished, ts, hp) <= hp.kkt_tolerance) return polished;
  }
  return model;
}

SvrModel train(const TrainingSet& ts, const SvrHyperparams& hp) {
  return train(ts, hp, fit_scaler(ts));
}

double predict(const SvrModel& m, std::span<const double> x) {
  const FeatureVector z = m.feature_scaler.scale(x);
  double f = m.bias;
  for (std::size_t s = 0; s < m.support_vectors.size(); ++s) {
    f += m.beta[s] * gaussian(squared_distance(m.support_vectors[s], z), m.kernel.sigma);
  }
  return f;
}

double kkt_residual(const SvrModel& m, const TrainingSet& ts,
                    const SvrHyperparams& hp) {
  const std::vector<double> beta = expand_beta(m, ts.size());
  const double c = hp.c;
  const double eps = hp.epsilon;
  double worst = 0.0;
  double sum = 0.0;
  for (std::size_t r = 0; r < ts.size(); ++r) {
    const double b = beta[r];
    sum += b;
    const double e = ts.samples[r].target - predict(m, ts.samples[r].features);
    double v = 0.0;
    if (b == 0.0) v = std::max(0.0, std::abs(e) - eps);
    else if (b > 0.0) v = at_bound(b, c) ? std::max(0.0, eps - e) : std::abs(e - eps);
    else v = at_bound(-b, c) ? std::max(0.0, e + eps) : std::abs(e + eps);
    v = std::max(v, std::abs(b) - c);
    worst = std::max(worst, v);
  }
  return std::max(worst, std::abs(sum));
}

double dual_objective(const SvrModel& m, const TrainingSet& ts,
                      const SvrHyperparams& hp) {
  double quad = 0.0;
  for (std::size_t s = 0; s < m.support_vectors.size(); ++s) {
    for (std::size_t t = 0; t < m.support_vectors.size(); ++t) {
      quad += m.beta[s] * m.beta[t] *
              gaussian(squared_distance(m.support_vectors[s], m.support_vectors[t]),
                       m.kernel.sigma);
    }
  }
  double linear = 0.0;
  for (std::size_t s = 0; s < m.support_indices.size(); ++s) {
    const std::size_t r = m.support_indices[s];
    if (r >= ts.size()) throw std::invalid_argument("model support index outside training set");
    linear += hp.epsilon * std::abs(m.beta[s]) - ts.samples[r].target * m.beta[s];
  }
  return 0.5 * quad + linear;
}

}  // namespace elmarket::svr
