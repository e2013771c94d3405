#pragma once

#include "cbpl/market.hpp"

#include <random>

namespace cbpl {

// Per-asset bounds implied by a ConstraintSpec: cash in [cash_min, 1],
// each stock in [box_low, box_high].
void feasible_bounds(int n_assets, const ConstraintSpec& spec, Vec& lo, Vec& hi);

// Euclidean projection of raw onto { w : lo <= w <= hi, sum w = 1 }.
// Solves w_i = clip(raw_i - theta, lo_i, hi_i) with theta found by bisection;
// the result always satisfies check_feasible's box and simplex clauses.
Vec project_feasible(const Vec& raw, const ConstraintSpec& spec);

// Random feasible point: a uniform simplex draw pushed through the projection.
// Used for search restarts, not for anything needing an exact distribution.
Vec random_feasible(int n_assets, const ConstraintSpec& spec, std::mt19937_64& rng);

}  // namespace cbpl
