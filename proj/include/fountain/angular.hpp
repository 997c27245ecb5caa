#pragma once

// Angular-momentum algebra for the caesium D2 line: exact Wigner 3j/6j
// symbols, relative dipole strengths and spontaneous-decay branching.

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstdlib>
#include <stdexcept>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace fountain::angular {

using Integer = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

/// Angular momentum quantum number stored as 2j, so 7/2 is exact.
class HalfInt {
 public:
  constexpr HalfInt() = default;
  constexpr HalfInt(int j) : twice_(2 * j) {}  // NOLINT: integers convert

  static constexpr HalfInt from_twice(int twice) {
    HalfInt h;
    h.twice_ = twice;
    return h;
  }

  constexpr int twice() const { return twice_; }
  constexpr bool is_integer() const { return twice_ % 2 == 0; }
  constexpr double value() const { return twice_ / 2.0; }

  constexpr HalfInt operator-() const { return from_twice(-twice_); }
  friend constexpr HalfInt operator+(HalfInt a, HalfInt b) {
    return from_twice(a.twice_ + b.twice_);
  }
  friend constexpr HalfInt operator-(HalfInt a, HalfInt b) {
    return from_twice(a.twice_ - b.twice_);
  }
  friend constexpr auto operator<=>(HalfInt, HalfInt) = default;

 private:
  int twice_ = 0;
};

inline constexpr HalfInt half(int twice) { return HalfInt::from_twice(twice); }

/// Caesium 6S1/2 -> 6P3/2 angular momenta.
namespace cs {
inline constexpr HalfInt nuclear_spin = half(7);
inline constexpr HalfInt j_ground = half(1);
inline constexpr HalfInt j_excited = half(3);
inline constexpr std::array<int, 2> ground_f{3, 4};
inline constexpr std::array<int, 4> excited_f{2, 3, 4, 5};
}  // namespace cs

/// Ground hyperfine Zeeman sublevel |F, mF> with F in {3, 4}.
struct Sublevel {
  HalfInt f;
  HalfInt m;
  friend constexpr bool operator==(const Sublevel&, const Sublevel&) = default;
};

/// Excited 6P3/2 sublevel |F', mF'> with F' in {2..5}.
struct ExcitedSublevel {
  HalfInt f;
  HalfInt m;
  friend constexpr bool operator==(const ExcitedSublevel&,
                                   const ExcitedSublevel&) = default;
};

inline constexpr std::size_t kGroundCount = 16;

/// Index into the 16-entry ground manifold: F=3 (m=-3..3) then F=4 (m=-4..4).
constexpr std::size_t index_of(Sublevel s) {
  const int f = s.f.twice() / 2;
  const int m = s.m.twice() / 2;
  if (s.f.twice() % 2 != 0 || s.m.twice() % 2 != 0 || (f != 3 && f != 4) ||
      m < -f || m > f) {
    throw std::invalid_argument("not a caesium ground sublevel");
  }
  return f == 3 ? static_cast<std::size_t>(m + 3)
                : static_cast<std::size_t>(7 + m + 4);
}

constexpr Sublevel sublevel_at(std::size_t index) {
  if (index >= kGroundCount) throw std::out_of_range("ground index");
  const int i = static_cast<int>(index);
  return i < 7 ? Sublevel{3, i - 3} : Sublevel{4, i - 7 - 4};
}

constexpr std::array<Sublevel, kGroundCount> ground_sublevels() {
  std::array<Sublevel, kGroundCount> out{};
  for (std::size_t i = 0; i < kGroundCount; ++i) out[i] = sublevel_at(i);
  return out;
}

/// A value of the form coefficient * sqrt(radicand) with both rational;
/// every Wigner symbol has this form.
struct ExactRoot {
  Rational coefficient{0};
  Rational radicand{1};

  bool is_zero() const { return coefficient == 0 || radicand == 0; }
  Rational square() const { return coefficient * coefficient * radicand; }
  double value() const {
    return coefficient.convert_to<double>() *
           std::sqrt(radicand.convert_to<double>());
  }
};

namespace detail {

inline const Integer& factorial(int n) {
  static const std::vector<Integer> table = [] {
    std::vector<Integer> t(128);
    t[0] = 1;
    for (int i = 1; i < 128; ++i) t[i] = t[i - 1] * i;
    return t;
  }();
  if (n < 0 || n >= static_cast<int>(table.size())) {
    throw std::out_of_range("factorial argument");
  }
  return table[static_cast<std::size_t>(n)];
}

// Factorial of an integer given as twice its value.
inline const Integer& factorial_twice(int twice) {
  return factorial(twice / 2);
}

constexpr bool triad(int ta, int tb, int tc) {
  return ta >= 0 && tb >= 0 && tc >= 0 && (ta + tb + tc) % 2 == 0 &&
         tc <= ta + tb && tc >= std::abs(ta - tb);
}

// Triangle coefficient (a+b-c)!(a-b+c)!(-a+b+c)!/(a+b+c+1)!
inline Rational triangle_delta(int ta, int tb, int tc) {
  return Rational(factorial_twice(ta + tb - tc) * factorial_twice(ta - tb + tc) *
                      factorial_twice(-ta + tb + tc),
                  factorial_twice(ta + tb + tc + 2));
}

constexpr int sign_of_twice(int twice_exponent) {
  // (-1)^(twice/2); the exponent is always an integer here
  return (twice_exponent / 2) % 2 == 0 ? 1 : -1;
}

}  // namespace detail

/// Wigner 3j symbol (j1 j2 j3; m1 m2 m3) by the Racah single-sum formula
/// in exact rational arithmetic. Selection-rule failures give zero.
inline ExactRoot wigner3j_exact(HalfInt j1, HalfInt j2, HalfInt j3, HalfInt m1,
                                HalfInt m2, HalfInt m3) {
  const int a = j1.twice(), b = j2.twice(), c = j3.twice();
  const int x = m1.twice(), y = m2.twice(), z = m3.twice();
  if (x + y + z != 0) return {};
  if (!detail::triad(a, b, c)) return {};
  if (std::abs(x) > a || std::abs(y) > b || std::abs(z) > c) return {};
  if ((a + x) % 2 != 0 || (b + y) % 2 != 0 || (c + z) % 2 != 0) return {};

  using detail::factorial_twice;
  const Rational radicand =
      detail::triangle_delta(a, b, c) *
      Rational(factorial_twice(a + x) * factorial_twice(a - x) *
               factorial_twice(b + y) * factorial_twice(b - y) *
               factorial_twice(c + z) * factorial_twice(c - z));

  // Summation bounds, all in twice-units.
  const int k_min = std::max({0, b - c - x, a - c + y});
  const int k_max = std::min({a + b - c, a - x, b + y});
  Rational sum = 0;
  for (int k = k_min; k <= k_max; k += 2) {
    const Integer denom = factorial_twice(k) * factorial_twice(a + b - c - k) *
                          factorial_twice(a - x - k) * factorial_twice(b + y - k) *
                          factorial_twice(c - b + x + k) *
                          factorial_twice(c - a - y + k);
    const Rational term(Integer(1), denom);
    if ((k / 2) % 2 == 0) {
      sum += term;
    } else {
      sum -= term;
    }
  }
  const int phase = detail::sign_of_twice(a - b - z);
  return {sum * phase, radicand};
}

inline double wigner3j(HalfInt j1, HalfInt j2, HalfInt j3, HalfInt m1,
                       HalfInt m2, HalfInt m3) {
  return wigner3j_exact(j1, j2, j3, m1, m2, m3).value();
}

/// Wigner 6j symbol {j1 j2 j3; j4 j5 j6}, exact Racah sum.
inline ExactRoot wigner6j_exact(HalfInt j1, HalfInt j2, HalfInt j3, HalfInt j4,
                                HalfInt j5, HalfInt j6) {
  const int a = j1.twice(), b = j2.twice(), c = j3.twice();
  const int d = j4.twice(), e = j5.twice(), f = j6.twice();
  if (!detail::triad(a, b, c) || !detail::triad(a, e, f) ||
      !detail::triad(d, b, f) || !detail::triad(d, e, c)) {
    return {};
  }
  const Rational radicand =
      detail::triangle_delta(a, b, c) * detail::triangle_delta(a, e, f) *
      detail::triangle_delta(d, b, f) * detail::triangle_delta(d, e, c);

  const int s1 = a + b + c, s2 = a + e + f, s3 = d + b + f, s4 = d + e + c;
  const int p1 = a + b + d + e, p2 = b + c + e + f, p3 = c + a + f + d;
  const int t_min = std::max({s1, s2, s3, s4});
  const int t_max = std::min({p1, p2, p3});

  using detail::factorial_twice;
  Rational sum = 0;
  for (int t = t_min; t <= t_max; t += 2) {
    const Integer denom = factorial_twice(t - s1) * factorial_twice(t - s2) *
                          factorial_twice(t - s3) * factorial_twice(t - s4) *
                          factorial_twice(p1 - t) * factorial_twice(p2 - t) *
                          factorial_twice(p3 - t);
    const Rational term(factorial_twice(t + 2), denom);
    if ((t / 2) % 2 == 0) {
      sum += term;
    } else {
      sum -= term;
    }
  }
  return {sum, radicand};
}

inline double wigner6j(HalfInt j1, HalfInt j2, HalfInt j3, HalfInt j4,
                       HalfInt j5, HalfInt j6) {
  return wigner6j_exact(j1, j2, j3, j4, j5, j6).value();
}

inline bool is_ground(Sublevel g) {
  const int tf = g.f.twice();
  return (tf == 6 || tf == 8) && std::abs(g.m.twice()) <= tf &&
         g.m.twice() % 2 == 0;
}

inline bool is_excited(ExcitedSublevel e) {
  const int tf = e.f.twice();
  return tf >= 4 && tf <= 10 && tf % 2 == 0 && std::abs(e.m.twice()) <= tf &&
         e.m.twice() % 2 == 0;
}

/// Relative D2 absorption strength for ground g, polarisation q (-1, 0, +1;
/// drives mF' = mF + q) and excited e:
///   (2J+1)(2F+1)(2F'+1) {J J' 1; F' F I}^2 (F' 1 F; mF' -q -mF)^2.
/// Summed over all (q, e) this is exactly 1 for every ground sublevel.
inline Rational dipole_strength_exact(Sublevel g, int q, ExcitedSublevel e) {
  if (q < -1 || q > 1 || !is_ground(g) || !is_excited(e)) return 0;
  if (e.m.twice() != g.m.twice() + 2 * q) return 0;
  using namespace cs;
  const Rational six =
      wigner6j_exact(j_ground, j_excited, 1, e.f, g.f, nuclear_spin).square();
  const Rational three = wigner3j_exact(e.f, 1, g.f, e.m, -q, -g.m).square();
  const int weight = (j_ground.twice() + 1) * (g.f.twice() + 1) * (e.f.twice() + 1);
  return Rational(weight) * six * three;
}

inline double dipole_strength(Sublevel g, int q, ExcitedSublevel e) {
  return dipole_strength_exact(g, q, e).convert_to<double>();
}

/// Probability that e decays to g specifically (emitted polarisation fixed
/// by the m difference). Sums to 1 over all 16 ground sublevels.
inline Rational decay_probability_exact(ExcitedSublevel e, Sublevel g) {
  const int q2 = e.m.twice() - g.m.twice();
  if (q2 % 2 != 0 || std::abs(q2) > 2) return 0;
  const Rational ratio(cs::j_excited.twice() + 1, cs::j_ground.twice() + 1);
  return ratio * dipole_strength_exact(g, q2 / 2, e);
}

/// Probability that spontaneous decay from e lands in ground level
/// f_ground: (2J'+1)(2F+1){J J' 1; F' F I}^2. Independent of mF'.
inline Rational branching_fraction_exact(ExcitedSublevel e, HalfInt f_ground) {
  if (!is_excited(e)) return 0;
  if (f_ground.twice() != 6 && f_ground.twice() != 8) return 0;
  using namespace cs;
  const Rational six =
      wigner6j_exact(j_ground, j_excited, 1, e.f, f_ground, nuclear_spin).square();
  return Rational((j_excited.twice() + 1) * (f_ground.twice() + 1)) * six;
}

inline double branching_fraction(ExcitedSublevel e, HalfInt f_ground) {
  return branching_fraction_exact(e, f_ground).convert_to<double>();
}

struct StrengthRow {
  Sublevel ground;
  int q;
  ExcitedSublevel excited;
  Rational strength;
};

/// Every allowed (ground, q, excited) channel on the D2 line, ordered by
/// ground index, then q, then F'.
inline std::vector<StrengthRow> strength_table() {
  std::vector<StrengthRow> rows;
  for (const Sublevel g : ground_sublevels()) {
    for (int q = -1; q <= 1; ++q) {
      for (const int fe : cs::excited_f) {
        const HalfInt me = g.m + HalfInt(q);
        if (std::abs(me.twice()) > 2 * fe) continue;
        const ExcitedSublevel e{fe, me};
        rows.push_back({g, q, e, dipole_strength_exact(g, q, e)});
      }
    }
  }
  return rows;
}

}  // namespace fountain::angular
