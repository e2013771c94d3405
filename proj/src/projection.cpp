#include "cbpl/projection.hpp"

#include <cmath>
#include <stdexcept>

namespace cbpl {

void feasible_bounds(int n_assets, const ConstraintSpec& spec, Vec& lo, Vec& hi) {
  if (n_assets < 2) throw std::invalid_argument("need at least cash plus one stock");
  spec.validate(n_assets - 1);
  lo.resize(n_assets);
  hi.resize(n_assets);
  lo[0] = spec.cash_min;
  hi[0] = 1.0;
  lo.tail(n_assets - 1).setConstant(spec.box_low);
  hi.tail(n_assets - 1).setConstant(spec.box_high);
}

Vec project_feasible(const Vec& raw, const ConstraintSpec& spec) {
  const int n = static_cast<int>(raw.size());
  Vec lo, hi;
  feasible_bounds(n, spec, lo, hi);

  const auto mass = [&](double theta) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += std::min(hi[i], std::max(lo[i], raw[i] - theta));
    return s;
  };

  // mass(theta) is continuous and non-increasing; bracket then bisect.
  double t_lo = (raw - hi.cwiseAbs()).minCoeff() - 1.0;  // mass >= 1 here
  double t_hi = raw.maxCoeff() - lo.minCoeff() + 1.0;    // mass <= lo sum <= 1 here
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (t_lo + t_hi);
    if (mass(mid) >= 1.0)
      t_lo = mid;
    else
      t_hi = mid;
  }
  const double theta = 0.5 * (t_lo + t_hi);

  Vec w(n);
  for (int i = 0; i < n; ++i) w[i] = std::min(hi[i], std::max(lo[i], raw[i] - theta));
  // Spread the bisection residual across coordinates that are strictly inside
  // their bounds, so the simplex constraint holds to machine precision.
  double resid = 1.0 - w.sum();
  for (int pass = 0; pass < 4 && std::abs(resid) > 0.0; ++pass) {
    int free_count = 0;
    for (int i = 0; i < n; ++i)
      if (w[i] > lo[i] && w[i] < hi[i]) ++free_count;
    if (free_count == 0) break;
    const double bump = resid / free_count;
    for (int i = 0; i < n; ++i)
      if (w[i] > lo[i] && w[i] < hi[i]) w[i] = std::min(hi[i], std::max(lo[i], w[i] + bump));
    resid = 1.0 - w.sum();
  }
  return w;
}

Vec random_feasible(int n_assets, const ConstraintSpec& spec, std::mt19937_64& rng) {
  // Uniform simplex point via normalized exponentials.
  std::uniform_real_distribution<double> u(1e-12, 1.0);
  Vec e(n_assets);
  for (int i = 0; i < n_assets; ++i) e[i] = -std::log(u(rng));
  e /= e.sum();
  return project_feasible(e, spec);
}

}  // namespace cbpl
