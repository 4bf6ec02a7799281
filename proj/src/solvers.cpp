#include "hjblab/solvers.hpp"

#include <Eigen/SparseLU>
#include <cmath>
#include <stdexcept>

namespace hjb {

std::string to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::converged: return "converged";
        case SolveStatus::diverged: return "diverged";
        case SolveStatus::iteration_cap: return "iteration_cap";
        case SolveStatus::policy_cycle: return "policy_cycle";
    }
    return "unknown";
}

Eigen::SparseMatrix<double> assemble_policy_matrix(const DiscreteHJB& d,
                                                   const std::vector<int>& policy, double shift) {
    const int m = d.num_nodes();
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<size_t>(m) * (2 * d.dim + 2));
    for (int k = 0; k < m; ++k) {
        const auto& La = d.L[policy[k]];
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(La, k); it; ++it)
            trips.emplace_back(k, static_cast<int>(it.col()), it.value());
        if (shift != 0.0) trips.emplace_back(k, k, -shift);
    }
    Eigen::SparseMatrix<double> A(m, m);
    A.setFromTriplets(trips.begin(), trips.end());
    A.makeCompressed();
    return A;
}

namespace {

Eigen::VectorXd policy_rhs(const DiscreteHJB& d, const std::vector<int>& policy,
                           const Eigen::VectorXd& g) {
    Eigen::VectorXd rhs = g - d.f_min;
    for (int k = 0; k < d.num_nodes(); ++k) rhs[k] += d.f[policy[k]][k];
    return rhs;
}

Eigen::VectorXd factor_and_solve(const Eigen::SparseMatrix<double>& A, const Eigen::VectorXd& rhs,
                                 const char* who) {
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success)
        throw std::runtime_error(std::string(who) + ": frozen-policy matrix is singular");
    Eigen::VectorXd u = lu.solve(rhs);
    if (lu.info() != Eigen::Success || !u.allFinite())
        throw std::runtime_error(std::string(who) + ": linear solve failed");
    return u;
}

} // namespace

SolveReport solve_proper(const DiscreteHJB& d, const Eigen::VectorXd& g, double shift,
                         const SolverParams& prm,
                         const std::optional<std::vector<int>>& initial_policy) {
    const int m = d.num_nodes();
    std::vector<int> policy =
        initial_policy ? *initial_policy : argmax_policy(d, Eigen::VectorXd::Zero(m));
    if (static_cast<int>(policy.size()) != m)
        throw std::invalid_argument("solve_proper: initial policy has wrong length");

    SolveReport rep;
    const double target = prm.residual_target(g.cwiseAbs().maxCoeff());
    for (int it = 1; it <= prm.howard_cap; ++it) {
        const Eigen::SparseMatrix<double> A = assemble_policy_matrix(d, policy, shift);
        const Eigen::VectorXd u = factor_and_solve(A, policy_rhs(d, policy, g), "solve_proper");

        rep.solution = u;
        rep.iterations = it;
        rep.final_residual = (apply_Fh(d, u) - shift * u - g).cwiseAbs().maxCoeff();

        const std::vector<int> next = argmax_policy(d, u);
        if (next == policy || rep.final_residual <= target) {
            rep.status = SolveStatus::converged;
            return rep;
        }
        policy = next;
    }
    rep.status = SolveStatus::policy_cycle;
    return rep;
}

namespace {

// Shared body of the two monotone hierarchies. direction = +1 demands a
// subsolution start and nondecreasing iterates, -1 the mirror image.
SolveReport monotone_hierarchy(const DiscreteHJB& d, const Eigen::VectorXd& g,
                               const Eigen::VectorXd& u0, double shift, int cap, double blowup,
                               const SolverParams& prm, int direction) {
    if (u0.size() != d.num_nodes())
        throw std::invalid_argument("perron_iterate: start field has wrong length");
    const double target = prm.residual_target(g.cwiseAbs().maxCoeff());
    const Eigen::VectorXd r0 = direction * (apply_Fh(d, u0) - g);
    if (r0.minCoeff() < -target)
        throw std::invalid_argument(direction > 0
                                        ? "perron_iterate: u0 is not a subsolution"
                                        : "perron_iterate: u0 is not a supersolution");

    SolveReport rep;
    rep.solution = u0;
    rep.final_residual = (apply_Fh(d, u0) - g).cwiseAbs().maxCoeff();
    rep.status = SolveStatus::iteration_cap;

    Eigen::VectorXd u = u0;
    for (int it = 1; it <= cap; ++it) {
        const SolveReport inner = solve_proper(d, g - shift * u, shift, prm);
        if (!inner.ok())
            throw std::runtime_error("perron_iterate: inner proper solve failed (" +
                                     to_string(inner.status) + ")");
        const Eigen::VectorXd& next = inner.solution;
        const double slack = 1e-9 * (1.0 + u.cwiseAbs().maxCoeff());
        if ((direction * (next - u)).minCoeff() < -slack)
            throw std::logic_error("perron_iterate: iterates are not monotone");
        u = next;

        rep.solution = u;
        rep.iterations = it;
        rep.final_residual = (apply_Fh(d, u) - g).cwiseAbs().maxCoeff();
        if (rep.final_residual <= target) {
            rep.status = SolveStatus::converged;
            return rep;
        }
        if (u.cwiseAbs().maxCoeff() > blowup) {
            rep.status = SolveStatus::diverged;
            return rep;
        }
    }
    return rep;
}

} // namespace

SolveReport perron_iterate(const DiscreteHJB& d, const Eigen::VectorXd& g,
                           const Eigen::VectorXd& u0, double shift, int cap, double blowup,
                           const SolverParams& prm) {
    return monotone_hierarchy(d, g, u0, shift, cap, blowup, prm, +1);
}

SolveReport perron_iterate_downward(const DiscreteHJB& d, const Eigen::VectorXd& g,
                                    const Eigen::VectorXd& u0, double shift, int cap,
                                    double blowup, const SolverParams& prm) {
    return monotone_hierarchy(d, g, u0, shift, cap, blowup, prm, -1);
}

SupersolutionResult build_supersolution(const DiscreteHJB& d, const Field& h, double t,
                                        const Field& phi, const SolverParams& prm) {
    const int m = d.num_nodes();
    SupersolutionResult res;

    Eigen::VectorXd hminus = (-h.values).cwiseMax(0.0);
    if (hminus.maxCoeff() > 0.0) {
        const ControlledOperator aux = pucci_plus_operator(d.lambda, d.Lambda, d.gamma, d.dim);
        const DiscreteHJB aux_d = discretize(aux, d.grid);
        // c == 0 keeps the frozen matrices irreducibly diagonally dominant, so
        // the shift can be zero without changing the equation
        const SolveReport solve = solve_proper(aux_d, -hminus, 0.0, prm);
        if (!solve.ok())
            throw std::runtime_error("build_supersolution: extremal solve failed");
        res.vbar = Field(d.grid, solve.solution);
    } else {
        res.vbar = Field(d.grid, Eigen::VectorXd::Zero(m));
    }

    const Field dist = distance_field(d.grid);
    res.sup_v_over_d = (res.vbar.values.array() / dist.values.array()).maxCoeff();

    const Eigen::VectorXd F_vbar = apply_Fh(d, res.vbar.values);
    res.min_admissible_t =
        ((F_vbar - h.values).array() / phi.values.array()).maxCoeff();
    res.valid = (F_vbar - h.values - t * phi.values).maxCoeff() <= prm.tol;
    return res;
}

Field build_subsolution(const DiscreteHJB& d, const Field& h, double t_lo, double t_hi,
                        double margin, double C1_bound, const Field& phi,
                        const SolverParams& prm) {
    if (!(margin > 0.0)) throw std::invalid_argument("build_subsolution: margin must be > 0");
    if (t_lo > t_hi) std::swap(t_lo, t_hi);
    const int m = d.num_nodes();

    const double t_amp = std::max(std::abs(t_lo), std::abs(t_hi)) * phi.sup_norm();
    const double M = d.a0 + t_amp + d.delta * C1_bound + margin;
    const Eigen::VectorXd rhs =
        Eigen::VectorXd::Constant(m, M) + h.values.cwiseMax(0.0);

    const DiscreteHJB d_inf = make_homogeneous(d);
    const double shift = prm.proper_shift(d);
    // auxiliary problem with guaranteed convergence (lambda_1^- > 0), so the
    // cap is floored rather than tied to the search budget
    const int cap = std::max(prm.perron_cap, 10000);
    const SolveReport run = perron_iterate_downward(d_inf, rhs, Eigen::VectorXd::Zero(m), shift,
                                                    cap, 1e12, prm);
    if (!run.ok())
        throw std::runtime_error("build_subsolution: hierarchy for F_inf[v] = M + h^+ did not "
                                 "converge (" + to_string(run.status) + ")");
    const Eigen::VectorXd& v = run.solution;
    if (v.maxCoeff() >= 0.0)
        throw std::logic_error("build_subsolution: v is not strictly negative in the interior");
    const double slack =
        (apply_Fh(d, v) - h.values - t_hi * phi.values).minCoeff();
    if (slack < margin - 10.0 * prm.tol)
        throw std::logic_error("build_subsolution: a-posteriori slack below margin");
    return Field(d.grid, v);
}

SolveReport semismooth_newton(const DiscreteHJB& d, const Eigen::VectorXd& g,
                              const Eigen::VectorXd& u0, double damping,
                              const SolverParams& prm) {
    if (!(damping > 0.0 && damping <= 1.0))
        throw std::invalid_argument("semismooth_newton: damping must lie in (0,1]");

    SolveReport rep;
    const double target = prm.residual_target(g.cwiseAbs().maxCoeff());
    Eigen::VectorXd u = u0;
    double res = (apply_Fh(d, u) - g).cwiseAbs().maxCoeff();
    rep.solution = u;
    rep.final_residual = res;
    if (res <= target) {
        rep.status = SolveStatus::converged;
        return rep;
    }

    for (int it = 1; it <= prm.newton_cap; ++it) {
        const std::vector<int> policy = argmax_policy(d, u);
        const Eigen::SparseMatrix<double> A = assemble_policy_matrix(d, policy, 0.0);
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        lu.compute(A);
        if (lu.info() != Eigen::Success)
            throw std::runtime_error("semismooth_newton: singular linearization");
        const Eigen::VectorXd r = apply_Fh(d, u) - g;
        const Eigen::VectorXd step = lu.solve(-r);
        if (lu.info() != Eigen::Success || !step.allFinite())
            throw std::runtime_error("semismooth_newton: singular linearization");

        double omega = damping;
        Eigen::VectorXd cand = u + omega * step;
        double cres = (apply_Fh(d, cand) - g).cwiseAbs().maxCoeff();
        while (cres > res && omega > prm.newton_damping_floor * (1.0 + 1e-12)) {
            omega *= 0.5;
            cand = u + omega * step;
            cres = (apply_Fh(d, cand) - g).cwiseAbs().maxCoeff();
        }
        u = std::move(cand);
        res = cres;

        rep.solution = u;
        rep.iterations = it;
        rep.final_residual = res;
        if (res <= target) {
            rep.status = SolveStatus::converged;
            return rep;
        }
        if (u.cwiseAbs().maxCoeff() > prm.newton_blowup) {
            rep.status = SolveStatus::diverged;
            return rep;
        }
    }
    rep.status = SolveStatus::iteration_cap;
    return rep;
}

} // namespace hjb
