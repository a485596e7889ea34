#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace wgsef {

/// One-breakpoint piecewise-linear pieces whose pairwise sums give the clamp
///   u(eta) = clamp(eta * b - alpha, 0, 1) = V(eta) / 2 + W(eta) / 2,
/// with V(eta) = |eta b - alpha| and W(eta) = 1 - |eta b - (alpha + 1)|.
enum class TermKind { V, W };

struct PwlTerm {
  TermKind kind;
  double b;      // >= 0
  double alpha;  // >= 0; zero only when evaluating the envelope value

  /// eta at which the inner absolute value changes sign (+inf when b == 0).
  [[nodiscard]] double breakpoint() const noexcept;
  /// Half the term, V/2 or W/2, so that a V/W pair sums to u(eta).
  [[nodiscard]] double half_value(double eta) const noexcept;
};

/// Ends of an interval with g(lo) < 0 <= g(hi).
struct RootBracket {
  double lo;
  double hi;
};

/// Builds the 2m V/W terms for per-group (b_j, alpha_j); groups with b_j == 0
/// are inert (u_j == 0 for every eta) and are omitted.
std::vector<PwlTerm> make_terms(std::span<const double> b, std::span<const double> alpha);

/// g(eta) = 1/2 sum V + 1/2 sum W - k. Throws NonpositiveEta for eta <= 0.
double eval_g(std::span<const PwlTerm> terms, std::size_t k, double eta);

/// lo = min alpha / max b and hi = (max alpha + 1) / min b over terms with b > 0.
/// Throws NoSignChange when fewer than k groups have b > 0.
RootBracket root_bracket(std::span<const PwlTerm> terms, std::size_t k);

/// Smallest root of g by randomized breakpoint pruning: a random unresolved
/// breakpoint is evaluated, every term whose side is then known is folded into
/// a running affine function, and the final affine piece is solved in closed
/// form. Expected O(#terms); deterministic for a given seed.
double find_root(std::span<const PwlTerm> terms, std::size_t k, std::uint64_t seed);

/// Bisection on root_bracket() until the interval is at most abs_tol wide,
/// then a closed-form solve on the piece that holds the smallest root.
double find_root_bisection(std::span<const PwlTerm> terms, std::size_t k, double abs_tol);

}  // namespace wgsef
