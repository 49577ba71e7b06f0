#pragma once

#include <cstdint>
#include <vector>

#include "functional.hpp"

namespace srcfit {

// Signed measure on a discrete carrier: density times quadrature weights.
// The stored density omits the 1/mass normalisation, which enters through
// the averaged pairings and the total variation.
struct DiscreteMeasure {
  enum class Carrier { Measurement, Domain };
  Carrier carrier = Carrier::Domain;
  std::vector<int> nodes;       // grid node per carrier point
  std::vector<double> density;
  std::vector<double> weight;
  double mass = 0.0;            // sum of weights
  double p = 0.0;               // exponent used in the normalisation
  double soft_norm = 0.0;       // normalised p-norm in the denominator
};

// Residual concentration measure on the measurement set:
// density = |K[u]-k|_(p)^(p-2) (K[u]-k) / ||...||^(p-1).
DiscreteMeasure data_residual_measure(const ScalarField& u,
                                      const ProblemData& data, double p);

// Source concentration measure on the domain with F[u] in place of the
// data residual.
DiscreteMeasure source_residual_measure(const ScalarField& u,
                                        const ProblemData& data, double p);

// Normalised weighted absolute sum; at most 1 for the residual measures.
double total_variation(const DiscreteMeasure& m);

// Essential limsup of f at x over a weighted carrier: max of f over the
// positive-weight carrier points inside the smallest ladder ball that
// contains at least one such point.
double essential_limsup(std::span<const double> f,
                        std::span<const double> weight,
                        std::span<const std::array<double, 2>> coords,
                        std::array<double, 2> x,
                        std::span<const double> eps_ladder);

// |m|-mass fraction carried by carrier points with
// errfield >= (1-delta) * max(errfield).
double concentration_fraction(const DiscreteMeasure& m,
                              std::span<const double> errfield, double delta);

// Smooth test fields vanishing on a 2-node boundary collar: one polynomial
// bump plus seeded sine bumps.
std::vector<ScalarField> make_test_functions(GridPtr grid, int count,
                                             std::uint64_t seed);

// Max over the test functions of the absolute Euler-Lagrange pairing of
// (u, mu, nu), normalised by the nodal l1 norm of each test function (the
// dual norm of the sup-norm gradient tolerance). Rejects test functions
// that do not vanish on the collar.
double el_residual(const ScalarField& u, const DiscreteMeasure& mu,
                   const DiscreteMeasure& nu,
                   const RegularisationParams& params, const ProblemData& data,
                   std::span<const ScalarField> test_set);

// Single-test-function pairing used by el_residual, unnormalised.
double el_pairing(const ScalarField& u, const DiscreteMeasure& mu,
                  const DiscreteMeasure& nu, const RegularisationParams& params,
                  const ProblemData& data, const ScalarField& phi);

}  // namespace srcfit
