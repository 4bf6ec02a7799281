#include "hjblab/ambrosetti.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace hjb {

namespace {

Eigen::VectorXd rhs_of(const APContext& ctx, double t) {
    return ctx.h.values + t * ctx.phi.values;
}

double interval_bound(const APContext& ctx, double t_lo, double t_hi) {
    const double p = ctx.prm.lp_exponent;
    const Field g_lo(ctx.d.grid, ctx.h.values + t_lo * ctx.phi.values);
    const Field g_hi(ctx.d.grid, ctx.h.values + t_hi * ctx.phi.values);
    const double gn = std::max(g_lo.lp_norm(p), g_hi.lp_norm(p));
    return apriori_bound(ctx.plus.lambda, ctx.minus.lambda, ctx.d.a0, gn, ctx.ap.C_cal);
}

} // namespace

double apriori_bound(double l1p, double l1m, double a0, double g_norm, double C_cal) {
    if (!(l1p < 0.0 && 0.0 < l1m))
        throw std::invalid_argument("apriori_bound requires lambda_1^+ < 0 < lambda_1^-");
    if (!(C_cal > 0.0)) throw std::invalid_argument("apriori_bound requires C_cal > 0");
    return C_cal * (1.0 - 1.0 / l1p) * (1.0 + 1.0 / l1m) * (a0 + g_norm);
}

APContext make_ap_context(const ControlledOperator& op, const GridPtr& grid, const Field& h,
                          const APParams& ap, const SolverParams& prm) {
    APContext ctx;
    ctx.ap = ap;
    ctx.prm = prm;
    ctx.d = discretize(op, grid);
    ctx.d_inf = make_homogeneous(ctx.d);
    ctx.plus = principal_half_eigen(ctx.d_inf, Sign::plus, ap.eigen_tol, prm);
    ctx.minus = principal_half_eigen(ctx.d_inf, Sign::minus, ap.eigen_tol, prm);
    ctx.phi = ctx.plus.phi;
    ctx.h = h.size() ? h : Field(grid);
    if (ctx.h.size() != ctx.d.num_nodes())
        throw std::invalid_argument("make_ap_context: h lives on a different grid");

    if (ctx.opposite_signs()) {
        // w* = -phi/lambda_1^+ solves F_inf[w] = phi on the positive cone
        ctx.w_upper = Field(grid, ctx.phi.values * (-1.0 / ctx.plus.lambda));
        // w_* is the minimal (nonpositive) solution of F_inf[w] = phi,
        // reached by the upward hierarchy from an interval subsolution
        const double bound =
            apriori_bound(ctx.plus.lambda, ctx.minus.lambda, 0.0,
                          Field(grid, ctx.phi.values).lp_norm(prm.lp_exponent), ap.C_cal);
        const Field sub = build_subsolution(ctx.d_inf, Field(grid), 1.0, 1.0, ap.subsol_margin,
                                            bound, ctx.phi, prm);
        const SolveReport low =
            perron_iterate(ctx.d_inf, ctx.phi.values, sub.values, prm.proper_shift(ctx.d_inf),
                           std::max(prm.perron_cap, 10000),
                           ap.blowup_safety * bound + sub.sup_norm() + 1.0, prm);
        if (!low.ok())
            throw std::runtime_error("make_ap_context: hierarchy for w_* did not converge");
        ctx.w_lower = Field(grid, low.solution);
    }
    return ctx;
}

APContext with_right_hand_side(const APContext& ctx, const Field& h) {
    APContext out = ctx;
    if (h.size() != ctx.d.num_nodes())
        throw std::invalid_argument("with_right_hand_side: h lives on a different grid");
    out.h = h;
    return out;
}

std::string to_string(Solvability s) {
    switch (s) {
        case Solvability::solvable: return "SOLVABLE";
        case Solvability::no_solution: return "NO_SOLUTION";
        case Solvability::inconclusive: return "INCONCLUSIVE";
    }
    return "unknown";
}

SolvabilityVerdict solvable(const APContext& ctx, double t) {
    if (!ctx.opposite_signs())
        throw std::invalid_argument("solvable: half-eigenvalues do not straddle zero");
    const Eigen::VectorXd g = rhs_of(ctx, t);
    const double bound = interval_bound(ctx, t, t);
    const Field sub = build_subsolution(ctx.d, ctx.h, t, t, ctx.ap.subsol_margin, bound, ctx.phi,
                                        ctx.prm);

    SolvabilityVerdict verdict;
    verdict.blowup_cutoff = ctx.ap.blowup_safety * bound + sub.sup_norm() + 1.0;
    const SolveReport run =
        perron_iterate(ctx.d, g, sub.values, ctx.prm.proper_shift(ctx.d), ctx.prm.perron_cap,
                       verdict.blowup_cutoff, ctx.prm);
    verdict.iterations = run.iterations;
    verdict.final_residual = run.final_residual;
    switch (run.status) {
        case SolveStatus::converged:
            verdict.status = Solvability::solvable;
            verdict.witness = Field(ctx.d.grid, run.solution);
            break;
        case SolveStatus::diverged:
            verdict.status = Solvability::no_solution;
            break;
        default:
            verdict.status = Solvability::inconclusive;
            break;
    }
    return verdict;
}

TStarResult find_tstar(const APContext& ctx, double tol) {
    if (!ctx.opposite_signs())
        throw std::invalid_argument("find_tstar: half-eigenvalues do not straddle zero");
    if (!(tol > 0.0)) throw std::invalid_argument("find_tstar: tol must be positive");

    TStarResult res;
    const double p = ctx.prm.lp_exponent;
    const double h_norm = ctx.h.lp_norm(p);
    const double hminus_norm = ctx.h.negative_part().lp_norm(p);

    double t_lo = -apriori_bound(ctx.plus.lambda, ctx.minus.lambda, ctx.d.a0, h_norm,
                                 ctx.ap.C_cal) -
                  10.0 * tol;
    double t_hi = ctx.ap.T0_cal * hminus_norm + 1.0;

    auto verdict_at = [&](double t) {
        const SolvabilityVerdict v = solvable(ctx, t);
        res.verdicts[t] = v.status;
        return v.status;
    };

    // endpoint validation with bounded widening
    int widen = 0;
    while (verdict_at(t_lo) != Solvability::no_solution) {
        if (++widen > 4)
            throw std::runtime_error("find_tstar: lower bracket endpoint never certifies "
                                     "non-existence (calibration failure)");
        t_lo = 2.0 * t_lo - 1.0;
    }
    widen = 0;
    while (verdict_at(t_hi) != Solvability::solvable) {
        if (++widen > 4)
            throw std::runtime_error("find_tstar: upper bracket endpoint never solvable "
                                     "(calibration failure)");
        t_hi = 2.0 * t_hi + 1.0;
    }
    res.initial_bracket = {t_lo, t_hi};
    res.bracket_history.emplace_back(t_lo, t_hi);

    while (t_hi - t_lo > tol) {
        const double mid = 0.5 * (t_lo + t_hi);
        const Solvability v = verdict_at(mid);
        if (v == Solvability::solvable) {
            t_hi = mid;
        } else {
            // inconclusive verdicts shrink the bracket conservatively from below
            if (v == Solvability::inconclusive) ++res.inconclusive_count;
            t_lo = mid;
        }
        res.bracket_history.emplace_back(t_lo, t_hi);
    }
    res.t_star = 0.5 * (t_lo + t_hi);

    // monotone solvability: no certified solvable t below a certified
    // non-existence t anywhere in the transcript
    double max_nosol = -std::numeric_limits<double>::infinity();
    double min_sol = std::numeric_limits<double>::infinity();
    for (const auto& [t, v] : res.verdicts) {
        if (v == Solvability::no_solution) max_nosol = std::max(max_nosol, t);
        if (v == Solvability::solvable) min_sol = std::min(min_sol, t);
    }
    if (max_nosol > min_sol)
        throw std::logic_error("find_tstar: solvability verdicts are not monotone in t");
    return res;
}

namespace {

// Distinct in the census sense: sup distance above the dedup radius.
bool is_distinct(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double radius) {
    return (a - b).cwiseAbs().maxCoeff() > radius;
}

struct UpperBranchSeeds {
    std::vector<Eigen::VectorXd> starts;
};

Field upper_branch_point(const APContext& ctx, double t, const Eigen::VectorXd& g,
                         const Field& u_low, const Eigen::VectorXd* continuation, bool* found) {
    std::vector<Eigen::VectorXd> starts;
    if (continuation) starts.push_back(*continuation);
    starts.push_back(t * ctx.w_upper.values);
    starts.push_back(1.5 * t * ctx.w_upper.values);
    starts.push_back(0.5 * t * ctx.w_upper.values);

    SolverParams polish = ctx.prm;
    polish.tol = ctx.prm.polish_tol;
    for (const auto& s : starts) {
        try {
            const SolveReport run = semismooth_newton(ctx.d, g, s, ctx.prm.newton_damping, polish);
            if (run.ok() && is_distinct(run.solution, u_low.values, ctx.ap.cluster_radius)) {
                *found = true;
                return Field(ctx.d.grid, run.solution);
            }
        } catch (const std::runtime_error&) {
            // singular linearization: try the next start
        }
    }
    *found = false;
    return Field(ctx.d.grid);
}

} // namespace

std::vector<BranchPoint> trace_branches(const APContext& ctx, std::vector<double> t_samples) {
    if (t_samples.empty()) return {};
    if (!ctx.opposite_signs())
        throw std::invalid_argument("trace_branches: half-eigenvalues do not straddle zero");
    std::sort(t_samples.begin(), t_samples.end());

    const double t_min = t_samples.front();
    const double t_max = t_samples.back();
    const double bound = interval_bound(ctx, t_min, t_max);
    const Field sub = build_subsolution(ctx.d, ctx.h, t_min, t_max, ctx.ap.subsol_margin, bound,
                                        ctx.phi, ctx.prm);
    const double cutoff = ctx.ap.blowup_safety * bound + sub.sup_norm() + 1.0;

    std::vector<BranchPoint> branch;
    const Eigen::VectorXd* continuation = nullptr;
    for (double t : t_samples) {
        const Eigen::VectorXd g = rhs_of(ctx, t);
        BranchPoint bp;
        bp.t = t;

        const SolveReport low = perron_iterate(ctx.d, g, sub.values, ctx.prm.proper_shift(ctx.d),
                                               ctx.prm.perron_cap, cutoff, ctx.prm);
        if (!low.ok())
            throw std::runtime_error("trace_branches: lower branch hierarchy failed at t = " +
                                     std::to_string(t));
        bp.u_low = Field(ctx.d.grid, low.solution);
        bp.residual_low = low.final_residual;

        bool found = false;
        bp.u_up = upper_branch_point(ctx, t, g, bp.u_low, continuation, &found);
        if (!found) {
            // census fallback: take the maximal cluster distinct from u_low
            const Census census = count_solutions(ctx, t, 16, 0x5eedu);
            for (auto it = census.solutions.rbegin(); it != census.solutions.rend(); ++it) {
                if (is_distinct(it->values, bp.u_low.values, ctx.ap.cluster_radius)) {
                    bp.u_up = *it;
                    found = true;
                    break;
                }
            }
        }
        bp.complete = found;
        if (found) {
            bp.residual_up = residual_norm(ctx.d, bp.u_up.values, g);
            const double order_slack = 1e-7 * (1.0 + bp.u_up.sup_norm());
            if ((bp.u_up.values - bp.u_low.values).minCoeff() < -order_slack)
                throw std::logic_error("trace_branches: branches are not ordered at t = " +
                                       std::to_string(t));
            branch.push_back(bp);
            continuation = &branch.back().u_up.values;
        } else {
            branch.push_back(bp);
            continuation = nullptr;
        }
    }
    return branch;
}

Census count_solutions(const APContext& ctx, double t, int n_starts, std::uint64_t seed) {
    if (n_starts < 8) throw std::invalid_argument("count_solutions: n_starts must be >= 8");
    const int m = ctx.d.num_nodes();
    const Eigen::VectorXd g = rhs_of(ctx, t);
    const double bound = ctx.opposite_signs() ? interval_bound(ctx, t, t) : 1.0;
    const double scale = std::max(1.0, bound);

    SolverParams polish = ctx.prm;
    polish.tol = ctx.prm.polish_tol;
    polish.newton_blowup = ctx.ap.blowup_safety * scale + 100.0;

    Census census;
    std::vector<Eigen::VectorXd> found;
    auto try_start = [&](const Eigen::VectorXd& s) {
        ++census.attempts;
        try {
            const SolveReport run = semismooth_newton(ctx.d, g, s, ctx.prm.newton_damping, polish);
            if (!run.ok()) return;
            ++census.converged_runs;
            for (const auto& u : found)
                if (!is_distinct(u, run.solution, ctx.ap.cluster_radius)) return;
            found.push_back(run.solution);
        } catch (const std::runtime_error&) {
            // singular linearization or solve failure: discard this start
        }
    };

    // deterministic roster
    try_start(Eigen::VectorXd::Zero(m));
    if (ctx.opposite_signs()) {
        try {
            const Field sub = build_subsolution(ctx.d, ctx.h, t, t, ctx.ap.subsol_margin, bound,
                                                ctx.phi, ctx.prm);
            try_start(sub.values);
        } catch (const std::exception&) {
        }
        const SupersolutionResult super = build_supersolution(ctx.d, ctx.h, t, ctx.phi, ctx.prm);
        if (super.valid) try_start(super.vbar.values);
        if (t != 0.0) {
            for (double s : {1.0, 1.5, 0.5}) {
                try_start(s * t * ctx.w_upper.values);
                try_start(s * t * ctx.w_lower.values);
            }
        }
    }
    // eigenfunction-ray ladder
    for (double c : {1.0 / 64.0, 1.0 / 16.0, 0.25, 1.0, 2.0, 4.0}) {
        try_start(c * scale * ctx.phi.values);
        try_start(-c * scale * ctx.phi.values);
    }
    // seeded random smooth fields up to the requested budget
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> amp(-scale, scale);
    const Grid& grid = *ctx.d.grid;
    while (census.attempts < n_starts + 16) {
        Eigen::VectorXd s(m);
        const double a1 = amp(rng), a2 = amp(rng), a3 = amp(rng);
        const double Lx = grid.hi[0] - grid.lo[0];
        const double Ly = grid.dim == 2 ? grid.hi[1] - grid.lo[1] : 1.0;
        for (int k = 0; k < m; ++k) {
            const Point p = grid.coord(k);
            const double sx = (p.x - grid.lo[0]) / Lx;
            const double sy = grid.dim == 2 ? (p.y - grid.lo[1]) / Ly : 0.5;
            double v = a1 * std::sin(M_PI * sx) + a2 * std::sin(2.0 * M_PI * sx) +
                       a3 * std::sin(3.0 * M_PI * sx);
            if (grid.dim == 2) v *= std::sin(M_PI * sy);
            s[k] = v;
        }
        try_start(s);
    }
    // midpoints of found pairs (two refinement rounds)
    for (int round = 0; round < 2; ++round) {
        const std::vector<Eigen::VectorXd> snapshot = found;
        int budget = 12;
        for (size_t i = 0; i < snapshot.size() && budget > 0; ++i)
            for (size_t j = i + 1; j < snapshot.size() && budget > 0; ++j) {
                try_start(0.5 * (snapshot[i] + snapshot[j]));
                --budget;
            }
        if (snapshot.size() == found.size()) break;
    }

    std::sort(found.begin(), found.end(),
              [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return a.sum() < b.sum(); });

    census.ordered = true;
    const double order_slack = 1e-7 * (1.0 + scale);
    census.min_pair_gap = found.size() > 1 ? std::numeric_limits<double>::infinity() : 0.0;
    for (size_t i = 0; i + 1 < found.size(); ++i) {
        census.min_pair_gap = std::min(
            census.min_pair_gap, (found[i + 1] - found[i]).cwiseAbs().maxCoeff());
        for (size_t j = i + 1; j < found.size(); ++j)
            if ((found[j] - found[i]).minCoeff() < -order_slack) census.ordered = false;
    }

    if (found.size() >= 3) {
        const Eigen::VectorXd base = found.front();
        const Eigen::VectorXd span = found.back() - base;
        const double denom = span.squaredNorm();
        double max_dev = 0.0;
        for (size_t i = 1; i + 1 < found.size(); ++i) {
            const Eigen::VectorXd diff = found[i] - base;
            const double k = diff.dot(span) / denom;
            max_dev = std::max(max_dev, (diff - k * span).cwiseAbs().maxCoeff());
        }
        census.max_colinear_dev = max_dev;
        census.colinear_segment = max_dev <= ctx.ap.colinear_tol;
    }

    for (auto& u : found) census.solutions.emplace_back(ctx.d.grid, std::move(u));
    return census;
}

std::pair<double, double> asymptotic_slopes(const APContext& ctx, double t_large) {
    const std::vector<BranchPoint> pts = trace_branches(ctx, {t_large});
    if (pts.empty() || !pts.front().complete)
        throw std::runtime_error("asymptotic_slopes: branch solve failed at t = " +
                                 std::to_string(t_large));
    const BranchPoint& bp = pts.front();
    const double dev_low =
        (bp.u_low.values / t_large - ctx.w_lower.values).cwiseAbs().maxCoeff();
    const double dev_up =
        (bp.u_up.values / t_large - ctx.w_upper.values).cwiseAbs().maxCoeff();
    return {dev_low, dev_up};
}

std::vector<std::pair<double, double>> tstar_continuity_probe(
    const APContext& ctx, const std::vector<Field>& perturbations) {
    const double base = find_tstar(ctx, ctx.ap.tstar_tol).t_star;
    std::vector<std::pair<double, double>> rows;
    for (const Field& p : perturbations) {
        const APContext shifted =
            with_right_hand_side(ctx, Field(ctx.d.grid, ctx.h.values + p.values));
        const double ts = find_tstar(shifted, ctx.ap.tstar_tol).t_star;
        rows.emplace_back(p.lp_norm(ctx.prm.lp_exponent), std::abs(ts - base));
    }
    return rows;
}

CalibrationReport calibrate_constants(const std::vector<CalibrationProblem>& suite,
                                      const APParams& ap, const SolverParams& prm,
                                      double margin) {
    CalibrationReport rep;
    for (const auto& problem : suite) {
        const APContext ctx = make_ap_context(problem.op, problem.grid, problem.h, ap, prm);
        const TStarResult ts = find_tstar(ctx, ap.tstar_tol);

        const double p = prm.lp_exponent;
        const double hminus = ctx.h.negative_part().lp_norm(p);
        if (hminus > 1e-12 && ts.t_star > 0.0)
            rep.tstar_ratios.push_back(ts.t_star / hminus);
        // supersolution-chain measurement delta*C1/c0 is an alternative T0
        const SupersolutionResult super =
            build_supersolution(ctx.d, ctx.h, std::abs(ts.t_star) + 1.0, ctx.phi, prm);
        if (ctx.d.delta > 0.0 && ctx.plus.hopf_c0 > 0.0)
            rep.tstar_ratios.push_back(ctx.d.delta * super.sup_v_over_d / ctx.plus.hopf_c0);

        std::vector<double> samples;
        for (double off : problem.t_offsets) samples.push_back(ts.t_star + off);
        const std::vector<BranchPoint> branch = trace_branches(ctx, samples);
        for (const auto& bp : branch) {
            if (!bp.complete) continue;
            const Field g(ctx.d.grid, ctx.h.values + bp.t * ctx.phi.values);
            const double denom = (1.0 - 1.0 / ctx.plus.lambda) * (1.0 + 1.0 / ctx.minus.lambda) *
                                 (ctx.d.a0 + g.lp_norm(p));
            rep.solution_ratios.push_back(bp.u_low.sup_norm() / denom);
            rep.solution_ratios.push_back(bp.u_up.sup_norm() / denom);
        }
    }
    rep.C0_raw = rep.solution_ratios.empty()
                     ? 0.0
                     : *std::max_element(rep.solution_ratios.begin(), rep.solution_ratios.end());
    rep.T0_raw = rep.tstar_ratios.empty()
                     ? 0.0
                     : *std::max_element(rep.tstar_ratios.begin(), rep.tstar_ratios.end());
    rep.C0 = rep.C0_raw * margin;
    rep.T0 = std::max(rep.T0_raw * margin, 1.0);
    return rep;
}

} // namespace hjb
