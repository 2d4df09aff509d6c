// Forward and inverse strain-energy densities for a bar whose potential
// behaves like a Lennard-Jones bond: finite surface energy at infinite
// stretch and an infinite barrier under full compression.
//
// The forward density W(F) lives on stretches F > 0.  The inverse density
// W*(H) = H W(1/H) lives on inverse strains H >= 0, where H = 0 is an opened
// crack.  All evaluators are templates over the real type so the same code
// serves double-precision assembly and extended-precision test oracles.
#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>

namespace ifrac {

enum class LawKind { Cubic, GeneralLJ };

// W(F) = A F^{-m} - B F^{-n} + C.  The example law is A=1, B=2, m=2, n=1, C=1.
struct LJParameters {
  double A = 1.0;
  double B = 2.0;
  double C = 1.0;
  double m = 2.0;
  double n = 1.0;
};

class ConstitutiveModel {
 public:
  ConstitutiveModel() = default;

  static ConstitutiveModel cubic() { return ConstitutiveModel{}; }

  // Builds W(F) = A F^-m - B F^-n + C with C fixed by W(1) = 0.  Also requires
  // S(1) = 0 (n B = m A) so that F = 1 is the strict global minimum, and
  // n >= 1 so the inverse modulus stays finite at H = 0.
  static ConstitutiveModel general_lj(double A, double B, double m, double n) {
    if (!(A > 0.0) || !(B > 0.0)) throw std::invalid_argument("LJ law: A and B must be positive");
    if (!(m > n) || !(n >= 1.0)) throw std::invalid_argument("LJ law: exponents must satisfy m > n >= 1");
    const double balance = n * B - m * A;
    if (std::abs(balance) > 1e-12 * std::max(n * B, m * A))
      throw std::invalid_argument("LJ law: n*B must equal m*A so that F=1 is stress free");
    ConstitutiveModel model;
    model.kind_ = LawKind::GeneralLJ;
    model.p_ = LJParameters{A, B, B - A, m, n};
    return model;
  }

  LawKind kind() const { return kind_; }
  const LJParameters& parameters() const { return p_; }
  double gamma() const { return p_.C; }

  std::string describe() const {
    if (kind_ == LawKind::Cubic) return "cubic";
    return "lj(A=" + std::to_string(p_.A) + ",B=" + std::to_string(p_.B) + ",m=" + std::to_string(p_.m) +
           ",n=" + std::to_string(p_.n) + ")";
  }

 private:
  LawKind kind_ = LawKind::Cubic;
  LJParameters p_{};
};

template <class Real = double>
struct ForwardEval {
  Real W;
  Real S;
};

template <class Real = double>
struct InverseEval {
  Real Wstar;
  Real Sstar;
  Real Mstar;
};

template <class Real = double>
ForwardEval<Real> eval_forward(const ConstitutiveModel& model, Real F) {
  using std::pow;
  if (!(F > Real(0))) throw std::domain_error("eval_forward: stretch must be positive");
  if (model.kind() == LawKind::Cubic) {
    const Real g = Real(1) - Real(1) / F;
    return {g * g, Real(2) * g / (F * F)};
  }
  const auto& p = model.parameters();
  const Real A = p.A, B = p.B, C = p.C, m = p.m, n = p.n;
  const Real W = A * pow(F, -m) - B * pow(F, -n) + C;
  const Real S = -m * A * pow(F, -m - 1) + n * B * pow(F, -n - 1);
  return {W, S};
}

template <class Real = double>
InverseEval<Real> eval_inverse(const ConstitutiveModel& model, Real H) {
  using std::pow;
  if (H < Real(0)) throw std::domain_error("eval_inverse: inverse strain must be non-negative");
  if (model.kind() == LawKind::Cubic) {
    const Real g = Real(1) - H;
    return {H * g * g, g * (Real(1) - Real(3) * H), Real(6) * H - Real(4)};
  }
  const auto& p = model.parameters();
  const Real A = p.A, B = p.B, C = p.C, m = p.m, n = p.n;
  const Real Wst = A * pow(H, m + 1) - B * pow(H, n + 1) + C * H;
  const Real Sst = A * (m + 1) * pow(H, m) - B * (n + 1) * pow(H, n) + C;
  const Real Mst = A * (m + 1) * m * pow(H, m - 1) - B * (n + 1) * n * pow(H, n - 1);
  return {Wst, Sst, Mst};
}

// Inverse law continued to H < 0 by its second-order Taylor polynomial at 0.
// Newton iterates and the interior of elements adjacent to a crack face can
// dip marginally below zero; the continuation keeps assembly well defined
// there without changing anything on the admissible set.
template <class Real = double>
InverseEval<Real> eval_inverse_extended(const ConstitutiveModel& model, Real H) {
  if (H >= Real(0)) return eval_inverse<Real>(model, H);
  const auto at0 = eval_inverse<Real>(model, Real(0));
  return {at0.Wstar + at0.Sstar * H + Real(0.5) * at0.Mstar * H * H, at0.Sstar + at0.Mstar * H, at0.Mstar};
}

// Largest relative mismatch of W*(H) against H W(1/H) over the samples,
// computed in the requested precision.
template <class Real = double>
Real duality_check(const ConstitutiveModel& model, std::span<const Real> H_samples) {
  using std::abs;
  Real worst = 0;
  for (Real H : H_samples) {
    if (!(H > Real(0))) throw std::domain_error("duality_check: samples must be positive");
    const Real lhs = eval_inverse<Real>(model, H).Wstar;
    const Real rhs = H * eval_forward<Real>(model, Real(1) / H).W;
    worst = std::max(worst, abs(lhs - rhs) / (Real(1) + abs(lhs)));
  }
  return worst;
}

inline double duality_check(const ConstitutiveModel& model, std::span<const double> H_samples) {
  return duality_check<double>(model, H_samples);
}

}  // namespace ifrac
