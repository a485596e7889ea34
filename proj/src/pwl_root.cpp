#include "wgsef/pwl_root.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "wgsef/errors.hpp"

namespace wgsef {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Affine piece slope * eta + offset of a half term on one side of its breakpoint.
struct Affine {
  long double slope = 0.0L;
  long double offset = 0.0L;

  void add_side(const PwlTerm& t, bool right) {
    const long double hb = 0.5L * t.b;
    const long double ha = 0.5L * t.alpha;
    if (t.kind == TermKind::V) {
      slope += right ? hb : -hb;
      offset += right ? -ha : ha;
    } else {
      slope += right ? -hb : hb;
      offset += right ? 1.0L + ha : -ha;
    }
  }
};

std::size_t count_groups(std::span<const PwlTerm> terms) {
  return static_cast<std::size_t>(std::count_if(terms.begin(), terms.end(), [](const PwlTerm& t) {
    return t.kind == TermKind::W && t.b > 0.0;
  }));
}

void check_terms(std::span<const PwlTerm> terms, std::size_t k) {
  if (k == 0) throw Error(Errc::InvalidSpec, "k must be at least 1");
  for (const auto& t : terms) {
    if (!(t.b >= 0.0) || !(t.alpha >= 0.0)) {
      throw Error(Errc::InvalidSpec, "piecewise-linear term needs b >= 0 and alpha >= 0");
    }
  }
  if (count_groups(terms) < k) {
    throw Error(Errc::NoSignChange, "g stays negative: fewer than k groups have a nonzero norm");
  }
}

// g at eta >= 0 without the eta > 0 guard (eta == 0 is the left end of the
// value-mode bracket).
double g_at(std::span<const PwlTerm> terms, std::size_t k, double eta) {
  double sum = 0.0;
  for (const auto& t : terms) sum += t.half_value(eta);
  return sum - static_cast<double>(k);
}

// Values of g this close to zero count as reaching it, so plateaus at zero
// resolve to their left end despite rounding.
double zero_tol(std::span<const PwlTerm> terms, std::size_t k, double eta) {
  double scale = static_cast<double>(k);
  for (const auto& t : terms) scale += eta * t.b + t.alpha + 1.0;
  return 16.0 * std::numeric_limits<double>::epsilon() * scale;
}

}  // namespace

double PwlTerm::breakpoint() const noexcept {
  if (b <= 0.0) return kInf;
  return (kind == TermKind::V ? alpha : alpha + 1.0) / b;
}

double PwlTerm::half_value(double eta) const noexcept {
  const double x = eta * b;
  if (kind == TermKind::V) return 0.5 * std::abs(x - alpha);
  return 0.5 * (1.0 - std::abs(x - (alpha + 1.0)));
}

std::vector<PwlTerm> make_terms(std::span<const double> b, std::span<const double> alpha) {
  if (b.size() != alpha.size()) throw Error(Errc::DimensionMismatch, "b and alpha lengths differ");
  std::vector<PwlTerm> terms;
  terms.reserve(2 * b.size());
  for (std::size_t j = 0; j < b.size(); ++j) {
    if (b[j] <= 0.0) continue;
    terms.push_back({TermKind::V, b[j], alpha[j]});
    terms.push_back({TermKind::W, b[j], alpha[j]});
  }
  return terms;
}

double eval_g(std::span<const PwlTerm> terms, std::size_t k, double eta) {
  if (!(eta > 0.0)) throw Error(Errc::NonpositiveEta, "eta = " + std::to_string(eta));
  return g_at(terms, k, eta);
}

RootBracket root_bracket(std::span<const PwlTerm> terms, std::size_t k) {
  check_terms(terms, k);
  double min_alpha = kInf, max_alpha = 0.0, min_b = kInf, max_b = 0.0;
  for (const auto& t : terms) {
    if (t.b <= 0.0) continue;
    min_alpha = std::min(min_alpha, t.alpha);
    max_alpha = std::max(max_alpha, t.alpha);
    min_b = std::min(min_b, t.b);
    max_b = std::max(max_b, t.b);
  }
  RootBracket br{min_alpha / max_b, (max_alpha + 1.0) / min_b};
  if (!(g_at(terms, k, br.lo) < 0.0) || !(g_at(terms, k, br.hi) >= -zero_tol(terms, k, br.hi))) {
    throw Error(Errc::NoSignChange, "bracket endpoints do not straddle the root");
  }
  return br;
}

double find_root(std::span<const PwlTerm> terms, std::size_t k, std::uint64_t seed) {
  check_terms(terms, k);

  struct Pending {
    const PwlTerm* term;
    double bp;
  };
  std::vector<Pending> active;
  active.reserve(terms.size());
  for (const auto& t : terms) {
    if (t.b > 0.0) active.push_back({&t, t.breakpoint()});
  }

  // The smallest root lies in (lo, hi]; g(lo) < 0 throughout.
  double lo = 0.0;
  double hi = kInf;
  Affine resolved;
  std::mt19937_64 rng(seed);

  // Value-mode V terms break at eta = 0 and are already on their right piece.
  std::erase_if(active, [&](const Pending& p) {
    if (p.bp <= lo) {
      resolved.add_side(*p.term, true);
      return true;
    }
    return false;
  });

  while (!active.empty()) {
    std::uniform_int_distribution<std::size_t> pick(0, active.size() - 1);
    const double pivot = active[pick(rng)].bp;

    long double g = resolved.slope * pivot + resolved.offset - static_cast<long double>(k);
    for (const auto& p : active) g += p.term->half_value(pivot);

    if (g >= -static_cast<long double>(zero_tol(terms, k, pivot))) {
      hi = pivot;
      std::erase_if(active, [&](const Pending& p) {
        if (p.bp >= hi) {
          resolved.add_side(*p.term, false);
          return true;
        }
        return false;
      });
    } else {
      lo = pivot;
      std::erase_if(active, [&](const Pending& p) {
        if (p.bp <= lo) {
          resolved.add_side(*p.term, true);
          return true;
        }
        return false;
      });
    }
  }

  if (!(resolved.slope > 0.0L)) {
    // Flat final piece: g(lo) rounded just below zero on a plateau at zero.
    if (lo > 0.0) return lo;
    throw Error(Errc::NoSignChange, "g is flat on the final piece");
  }
  const double eta =
      static_cast<double>((static_cast<long double>(k) - resolved.offset) / resolved.slope);
  return std::clamp(eta, lo, hi);
}

double find_root_bisection(std::span<const PwlTerm> terms, std::size_t k, double abs_tol) {
  if (!(abs_tol > 0.0)) throw Error(Errc::InvalidSpec, "abs_tol must be positive");
  auto [lo, hi] = root_bracket(terms, k);

  for (int iter = 0; iter < 4096 && hi - lo > abs_tol; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (g_at(terms, k, mid) >= -zero_tol(terms, k, mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }

  // Split (lo, hi] at any breakpoints still inside and scan the pieces from the
  // left; the first piece whose right end reaches zero holds the smallest root.
  std::vector<double> cuts{lo};
  for (const auto& t : terms) {
    const double bp = t.breakpoint();
    if (bp > lo && bp < hi) cuts.push_back(bp);
  }
  std::sort(cuts.begin() + 1, cuts.end());
  cuts.push_back(hi);

  for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
    const double left = cuts[s];
    const double right = cuts[s + 1];
    if (right <= left) continue;
    if (g_at(terms, k, right) < -zero_tol(terms, k, right)) continue;

    const double mid = 0.5 * (left + right);
    long double slope = 0.0L, offset = 0.0L;
    for (const auto& t : terms) {
      if (t.b <= 0.0) continue;
      const bool right_side = t.breakpoint() < mid;
      const long double hb = 0.5L * t.b, ha = 0.5L * t.alpha;
      if (t.kind == TermKind::V) {
        slope += right_side ? hb : -hb;
        offset += right_side ? -ha : ha;
      } else {
        slope += right_side ? -hb : hb;
        offset += right_side ? 1.0L + ha : -ha;
      }
    }
    if (!(slope > 0.0L)) return left;  // flat piece at zero: keep its left end
    const double eta = static_cast<double>((static_cast<long double>(k) - offset) / slope);
    return std::clamp(eta, left, right);
  }
  throw Error(Errc::NoSignChange, "bisection lost the sign change");
}

}  // namespace wgsef
