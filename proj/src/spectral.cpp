#include "hjblab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace hjb {

namespace {

constexpr int kEigenCap = 500;
constexpr int kMaxRestarts = 3;
constexpr double kRatioFloorRel = 1e-8;

void require_homogeneous(const DiscreteHJB& d, const char* who) {
    for (const auto& fa : d.f)
        if (fa.cwiseAbs().maxCoeff() != 0.0)
            throw std::invalid_argument(std::string(who) + ": operator is not homogeneous");
}

} // namespace

EigenPair principal_half_eigen(const DiscreteHJB& d, Sign sign, double tol,
                               const SolverParams& prm, const Eigen::VectorXd* start) {
    require_homogeneous(d, "principal_half_eigen");
    if (!(tol > 0.0)) throw std::invalid_argument("principal_half_eigen: tol must be positive");

    const int m = d.num_nodes();
    const Field dist = distance_field(d.grid);
    const double sgn = sign_value(sign);
    if (start && start->size() != m)
        throw std::invalid_argument("principal_half_eigen: start vector has wrong length");

    double sigma = -d.delta - 1.0;
    for (int restart = 0; restart <= kMaxRestarts; ++restart) {
        Eigen::VectorXd v = start ? *start : (sgn * dist.values).eval();
        v /= v.cwiseAbs().maxCoeff();

        bool wrong_sign = false;
        for (int it = 1; it <= kEigenCap; ++it) {
            // (F_h + sigma)[w] = -v, i.e. solve_proper with shift -sigma > delta
            const SolveReport inner = solve_proper(d, -v, -sigma, prm);
            if (!inner.ok())
                throw std::runtime_error("principal_half_eigen: inner proper solve failed");
            Eigen::VectorXd w = inner.solution;

            const double wnorm = w.cwiseAbs().maxCoeff();
            if (!(wnorm > 0.0))
                throw std::runtime_error("principal_half_eigen: iterate collapsed to zero");
            const double floor = kRatioFloorRel * wnorm;
            for (int k = 0; k < m; ++k) {
                if (sgn * w[k] < -floor) { wrong_sign = true; break; }
            }
            if (wrong_sign) break;
            w /= wnorm;

            const Eigen::VectorXd Fw = apply_Fh(d, w);
            double lo = std::numeric_limits<double>::infinity();
            double hi = -lo;
            for (int k = 0; k < m; ++k) {
                if (std::abs(w[k]) <= floor) continue;
                const double r = -Fw[k] / w[k];
                lo = std::min(lo, r);
                hi = std::max(hi, r);
            }
            if (hi - lo <= tol) {
                EigenPair pair;
                pair.lambda = 0.5 * (lo + hi);
                pair.phi = Field(d.grid, w);
                pair.sign = sign;
                pair.bracket_lo = lo;
                pair.bracket_hi = hi;
                pair.iterations = it;
                pair.residual = (Fw + pair.lambda * w).cwiseAbs().maxCoeff();
                const auto ratios = hopf_ratio(pair.phi, dist);
                pair.hopf_c0 = ratios.first;
                pair.hopf_C0 = ratios.second;
                return pair;
            }
            v = w;
        }
        if (!wrong_sign)
            throw std::runtime_error("principal_half_eigen: bracket failed to shrink within cap");
        sigma -= std::ldexp(1.0, restart);  // lower sigma, restart
    }
    throw std::runtime_error("principal_half_eigen: iterate kept changing sign");
}

std::optional<double> eigen_lower_bound_certificate(const DiscreteHJB& d, const Field& w,
                                                    const Field& eps, const SolverParams& prm) {
    const int m = d.num_nodes();
    if (w.size() != m || eps.size() != m)
        throw std::invalid_argument("eigen_lower_bound_certificate: size mismatch");
    if (eps.values.minCoeff() < -prm.tol) return std::nullopt;           // eps >= 0
    if ((apply_Fh(d, w.values) - eps.values).maxCoeff() > prm.tol) return std::nullopt;
    const double wnorm = w.sup_norm();
    if (!(wnorm > 0.0)) return std::nullopt;

    const double p = prm.lp_exponent;
    const double E = eps.lp_norm(p);
    const double wminus = w.negative_part().sup_norm();
    if (wminus > E + prm.tol) return std::nullopt;                       // ||w^-|| <= ||eps||_p

    if (E == 0.0) return 0.0;   // genuine supersolution: lambda_1^+ >= 0
    if (d.delta == 0.0) return 0.0;

    const double m0 = std::min(1.0, wnorm);
    const Eigen::VectorXd wn = w.values / m0;
    const double En = E / m0;

    // shifting w by the constant En costs delta*En on the right-hand side,
    // so the effective inhomogeneity is eps/m0 + delta*En
    const Eigen::VectorXd eps_shifted = (eps.values / m0).array() + d.delta * En;
    const Field eps_shifted_field(d.grid, eps_shifted);
    const double E_shifted = eps_shifted_field.lp_norm(p);

    // psi >= 0 solves the extremal problem M^+ + gamma|D.| = -eps~/||eps~||_p
    const ControlledOperator aux = pucci_plus_operator(d.lambda, d.Lambda, d.gamma, d.dim);
    const DiscreteHJB aux_d = discretize(aux, d.grid);
    const SolveReport psi_solve = solve_proper(aux_d, (-eps_shifted / E_shifted).eval(), 0.0, prm);
    if (!psi_solve.ok()) return std::nullopt;
    const Eigen::VectorXd& psi = psi_solve.solution;

    const Eigen::VectorXd wtilde = wn.array() + En;   // boundary value En
    if (wtilde.minCoeff() <= 0.0) return std::nullopt;
    const double C1 = (psi.array() / wtilde.array()).maxCoeff();
    const double bound = -C1 * d.delta * E_shifted;

    // nodewise chain: F_h[wn + E~ psi + En] <= C1*delta*E~*(wtilde + E~ psi)
    const Eigen::VectorXd u_cert = wn + E_shifted * psi;
    const Eigen::VectorXd lhs = apply_Fh_shifted(d, u_cert, En);
    const Eigen::VectorXd rhs = (C1 * d.delta * E_shifted) * (wtilde + E_shifted * psi);
    const double chain_slack = 1e-10 * (1.0 + rhs.cwiseAbs().maxCoeff());
    if ((lhs - rhs).maxCoeff() > chain_slack) return std::nullopt;
    if ((wtilde + E_shifted * psi).minCoeff() <= 0.0) return std::nullopt;
    return bound;
}

std::pair<EigenPair, EigenPair> domain_monotonicity_gap(const ControlledOperator& op,
                                                        const GridPtr& grid,
                                                        const HoleShape& gamma, double tol,
                                                        const SolverParams& prm) {
    const DiscreteHJB d_full = discretize(op, grid);
    require_homogeneous(d_full, "domain_monotonicity_gap");
    const GridPtr restricted = restrict_domain(grid, gamma);
    const DiscreteHJB d_rest = discretize(op, restricted);
    EigenPair full = principal_half_eigen(d_full, Sign::plus, tol, prm);
    EigenPair rest = principal_half_eigen(d_rest, Sign::plus, tol, prm);
    return {std::move(full), std::move(rest)};
}

std::pair<double, double> hopf_ratio(const Field& phi, const Field& dist) {
    if (phi.size() != dist.size())
        throw std::invalid_argument("hopf_ratio: size mismatch");
    const bool positive = phi.values.maxCoeff() > 0.0;
    const bool negative = phi.values.minCoeff() < 0.0;
    if (positive && negative)
        throw std::invalid_argument("hopf_ratio: field is not one-signed on the interior");
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (int k = 0; k < phi.size(); ++k) {
        const double r = std::abs(phi.values[k]) / dist.values[k];
        lo = std::min(lo, r);
        hi = std::max(hi, r);
    }
    return {lo, hi};
}

} // namespace hjb
