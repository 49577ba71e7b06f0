#include "verify.hpp"

#include <cmath>
#include <stdexcept>

namespace srcfit {

double bound_rhs_p(const ScalarField& u0, const RegularisationParams& params,
                   const ProblemData& data, double p) {
  const ScalarField f0 = eval_F(data.opF, u0);
  return 2.0 * params.gamma +
         params.alpha * normalized_lp_norm(f0.v, u0.grid->cell_weight, p) +
         0.5 * params.beta * highest_order_seminorm_sq(u0);
}

double bound_rhs_inf(const ScalarField& u0, const RegularisationParams& params,
                     const ProblemData& data) {
  const ScalarField f0 = eval_F(data.opF, u0);
  return 2.0 * params.gamma + params.alpha * sup_norm(f0.v) +
         0.5 * params.beta * highest_order_seminorm_sq(u0);
}

VerifyReport verify_bounds(std::span<const ScalarField> trajectory,
                           const ScalarField& u0,
                           const RegularisationParams& params,
                           const ProblemData& data, double tol_discr) {
  if (trajectory.size() > params.p_ladder.size())
    throw std::invalid_argument("verify_bounds: more iterates than ladder rungs");

  // The pairing of u0 with the measurements must be consistent: the clean
  // data K[u0] may differ from k_meas by at most the noise level.
  const std::vector<double> k0 = eval_K(data.opK, u0, data.mset);
  for (size_t j = 0; j < k0.size(); ++j) {
    if (std::abs(k0[j] - data.k_meas[j]) > params.gamma + 1e-12)
      throw std::invalid_argument(
          "verify_bounds: u0 is not consistent with the measured data at the "
          "stated noise level");
  }

  VerifyReport rep;
  rep.tol_discr = tol_discr;
  rep.all_pass = true;

  for (size_t k = 0; k < trajectory.size(); ++k) {
    const double p = params.p_ladder[k];
    const std::vector<double> kp = eval_K(data.opK, trajectory[k], data.mset);
    std::vector<double> diff(kp.size());
    for (size_t j = 0; j < kp.size(); ++j) diff[j] = kp[j] - k0[j];

    BoundCheck chk;
    chk.p = p;
    chk.lhs_lp = normalized_lp_norm(diff, data.mset.weight, p);
    chk.rhs_p = bound_rhs_p(u0, params, data, p);
    chk.pass = chk.lhs_lp <= chk.rhs_p * (1.0 + tol_discr);
    chk.energy_up = energy_p(trajectory[k], params, data, p);
    chk.energy_u0 = energy_p(u0, params, data, p);
    chk.minimal = chk.energy_up <= chk.energy_u0 * (1.0 + 1e-10) + 1e-300;
    rep.all_pass = rep.all_pass && chk.pass;
    rep.rungs.push_back(chk);

    if (k + 1 == trajectory.size()) {
      rep.lhs_sup_final = sup_norm(diff);
      rep.rhs_inf = bound_rhs_inf(u0, params, data);
      rep.pass_sup = rep.lhs_sup_final <= rep.rhs_inf * (1.0 + tol_discr);
      rep.all_pass = rep.all_pass && rep.pass_sup;
    }
  }
  return rep;
}

}  // namespace srcfit
