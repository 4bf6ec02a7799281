// Acceptance suite: runs every advertised guarantee of the laboratory at
// desk scale (1D n = 200, 2D 50x50) and prints one pass/fail line per
// criterion. Exit status 0 iff all criteria hold.

#include "hjblab/ambrosetti.hpp"

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

using namespace hjb;

namespace {

int g_failures = 0;

void report(int number, const std::string& name, bool passed, const std::string& detail) {
    std::printf("[%s] criterion %2d: %s (%s)\n", passed ? "PASS" : "FAIL", number, name.c_str(),
                detail.c_str());
    if (!passed) ++g_failures;
}

void run(int number, const std::string& name,
         const std::function<std::pair<bool, std::string>()>& body) {
    try {
        const auto [ok, detail] = body();
        report(number, name, ok, detail);
    } catch (const std::exception& e) {
        report(number, name, false, std::string("exception: ") + e.what());
    }
}

GridPtr interval_grid(int n) {
    GridSpec spec;
    spec.dim = 1;
    spec.lo = {0.0, 0.0};
    spec.hi = {M_PI, 0.0};
    spec.n = {n, 1};
    return build_grid(spec);
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

} // namespace

int main() {
    const SolverParams prm;
    APParams ap;
    ap.eigen_tol = 1e-8;
    const GridPtr g200 = interval_grid(200);

    // 1. Fucik half-eigenvalues at the analytic offsets lambda_1 -+ b/a
    run(1, "Fucik eigenvalues -0.5 / +0.5 within 1e-3", [&] {
        const DiscreteHJB d = discretize(fucik_operator(0.5, 1.5), g200);
        const EigenPair plus = principal_half_eigen(d, Sign::plus, 1e-8, prm);
        const EigenPair minus = principal_half_eigen(d, Sign::minus, 1e-8, prm);
        const bool ok = std::abs(plus.lambda + 0.5) <= 1e-3 && std::abs(minus.lambda - 0.5) <= 1e-3;
        return std::pair{ok, "lambda+ = " + fmt(plus.lambda) + ", lambda- = " + fmt(minus.lambda)};
    });

    // 2. Pucci extremal eigenvalues lambda*lambda_1 and Lambda*lambda_1
    run(2, "Pucci eigenvalues 1.0 / 2.0 within 1e-3", [&] {
        const DiscreteHJB d = discretize(pucci_plus_operator(1.0, 2.0, 0.0, 1), g200);
        const EigenPair plus = principal_half_eigen(d, Sign::plus, 1e-8, prm);
        const EigenPair minus = principal_half_eigen(d, Sign::minus, 1e-8, prm);
        const bool ok = std::abs(plus.lambda - 1.0) <= 1e-3 && std::abs(minus.lambda - 2.0) <= 1e-3;
        return std::pair{ok, "lambda+ = " + fmt(plus.lambda) + ", lambda- = " + fmt(minus.lambda)};
    });

    // 3. linear operator: both half-eigenvalues equal the matrix eigenvalue
    run(3, "linear consistency against a dense eigensolve to 1e-8", [&] {
        const DiscreteHJB d = discretize(linear_operator(1.0, 0.0), g200);
        const EigenPair plus = principal_half_eigen(d, Sign::plus, 1e-9, prm);
        const EigenPair minus = principal_half_eigen(d, Sign::minus, 1e-9, prm);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(-Eigen::MatrixXd(d.L[0]));
        const double lambda1 = es.eigenvalues().minCoeff();
        const bool ok = std::abs(plus.lambda - lambda1) <= 1e-8 &&
                        std::abs(minus.lambda - lambda1) <= 1e-8;
        return std::pair{ok, "deviations " + fmt(std::abs(plus.lambda - lambda1)) + ", " +
                                 fmt(std::abs(minus.lambda - lambda1))};
    });

    // 4. t*(0) = 0 for every suite operator with sign-straddling eigenvalues
    run(4, "t*(0) = 0 within 2e-3 across the suite", [&] {
        std::string detail;
        bool ok = true;
        for (auto [a, b] : {std::pair{0.5, 1.5}, std::pair{0.3, 1.7}, std::pair{0.7, 1.3}}) {
            const APContext ctx = make_ap_context(fucik_operator(a, b), g200, Field(g200), ap, prm);
            const TStarResult res = find_tstar(ctx, 1e-3);
            ok = ok && std::abs(res.t_star) <= 2e-3;
            detail += fmt(res.t_star) + " ";
        }
        return std::pair{ok, "t* = " + detail};
    });

    const APContext fucik = make_ap_context(fucik_operator(0.5, 1.5), g200, Field(g200), ap, prm);

    // 5. exact multiplicity: two ordered clusters above t*, none below,
    //    within the five-minute budget for the whole sweep
    run(5, "census counts 2/2/2 above and 0/0 below t*", [&] {
        const auto start = std::chrono::steady_clock::now();
        std::string detail;
        bool ok = true;
        for (double t : {0.2, 1.0, 5.0}) {
            const Census census = count_solutions(fucik, t, 24, 42);
            ok = ok && census.solutions.size() == 2 && census.ordered;
            detail += std::to_string(census.solutions.size());
        }
        detail += "/";
        for (double t : {-0.5, -0.1}) {
            const Census census = count_solutions(fucik, t, 24, 42);
            ok = ok && census.solutions.empty();
            detail += std::to_string(census.solutions.size());
        }
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        ok = ok && seconds <= 300.0;
        return std::pair{ok, "clusters " + detail + ", sweep " + fmt(seconds) + " s"};
    });

    // 6. branch monotonicity and the measure condition
    run(6, "lower branch decreasing, upper branch measure condition", [&] {
        const auto branch = trace_branches(fucik, {0.2, 0.5, 1.0, 2.0, 5.0});
        bool ok = branch.size() == 5;
        for (const auto& bp : branch) ok = ok && bp.complete;
        for (size_t i = 0; ok && i < branch.size(); ++i)
            for (size_t j = i + 1; ok && j < branch.size(); ++j) {
                ok = (branch[j].u_low.values.array() < branch[i].u_low.values.array()).all();
                const int grow = static_cast<int>(
                    (branch[j].u_up.values.array() > branch[i].u_up.values.array()).count());
                ok = ok && 2 * grow > branch[i].u_up.size();
            }
        return std::pair{ok, std::to_string(branch.size()) + " samples, all pairs checked"};
    });

    // 7. asymptotic slopes against the analytic profiles +-2 sin
    run(7, "asymptotic slopes at t = 200 within 0.04 of +-2 sin", [&] {
        const auto branch = trace_branches(fucik, {200.0});
        if (branch.empty() || !branch.front().complete)
            return std::pair{false, std::string("branch solve failed")};
        double dev_up = 0.0, dev_low = 0.0;
        for (int k = 0; k < branch.front().u_up.size(); ++k) {
            const double s = 2.0 * std::sin(g200->coord(k).x);
            dev_up = std::max(dev_up, std::abs(branch.front().u_up.values[k] / 200.0 - s));
            dev_low = std::max(dev_low, std::abs(branch.front().u_low.values[k] / 200.0 + s));
        }
        const bool ok = dev_up <= 0.04 && dev_low <= 0.04;
        return std::pair{ok, "deviations " + fmt(dev_up) + ", " + fmt(dev_low)};
    });

    // 8. calibrated a-priori bound and t* bracket on a disjoint verification suite
    run(8, "calibrated bound and t* bracket hold on verification problems", [&] {
        std::vector<CalibrationProblem> cal_suite;
        const std::vector<std::tuple<double, double, ScalarField>> cal_defs = {
            {0.5, 1.5, constant_field(0.0)},
            {0.7, 1.3, compile_expression("0.3*sin(2*x)")},
            {0.3, 1.7, compile_expression("-0.4*sin(x)")},
        };
        for (const auto& [a, b, h] : cal_defs) {
            CalibrationProblem problem;
            problem.op = fucik_operator(a, b);
            problem.grid = g200;
            problem.h = sample_field(g200, h);
            problem.t_offsets = {0.5, 1.0, 2.0};
            cal_suite.push_back(std::move(problem));
        }
        const CalibrationReport rep = calibrate_constants(cal_suite, ap, prm, 1.5);

        APParams verified = ap;
        verified.C_cal = rep.C0;
        verified.T0_cal = rep.T0;
        const std::vector<std::tuple<double, double, ScalarField>> ver_defs = {
            {0.6, 1.4, compile_expression("0.2*sin(3*x)")},
            {0.45, 1.55, compile_expression("0.25*sin(2*x) - 0.1*sin(x)")},
        };
        bool ok = true;
        double worst_ratio = 0.0;
        for (const auto& [a, b, h] : ver_defs) {
            const APContext ctx = make_ap_context(fucik_operator(a, b), g200,
                                                  sample_field(g200, h), verified, prm);
            const TStarResult ts = find_tstar(ctx, 1e-3);
            const double p = prm.lp_exponent;
            const double lower = -apriori_bound(ctx.plus.lambda, ctx.minus.lambda, ctx.d.a0,
                                                ctx.h.lp_norm(p), rep.C0);
            const double upper = rep.T0 * ctx.h.negative_part().lp_norm(p);
            ok = ok && ts.t_star >= lower - 2e-3 && ts.t_star <= upper + 2e-3;
            const auto branch = trace_branches(ctx, {ts.t_star + 0.5, ts.t_star + 2.0});
            for (const auto& bp : branch) {
                const Field gf(g200, (ctx.h.values + bp.t * ctx.phi.values).eval());
                const double bound = apriori_bound(ctx.plus.lambda, ctx.minus.lambda, ctx.d.a0,
                                                   gf.lp_norm(p), rep.C0);
                worst_ratio = std::max({worst_ratio, bp.u_low.sup_norm() / bound,
                                        bp.u_up.sup_norm() / bound});
            }
        }
        ok = ok && worst_ratio <= 1.0;
        return std::pair{ok, "C0 = " + fmt(rep.C0) + ", T0 = " + fmt(rep.T0) +
                                 ", worst bound ratio " + fmt(worst_ratio)};
    });

    // 9. certificate soundness on perturbed supersolutions plus degenerate zeros
    run(9, "eigenvalue certificate sound on 20 instances, zero degenerates", [&] {
        const DiscreteHJB& d_inf = fucik.d_inf;
        const EigenPair plus = principal_half_eigen(d_inf, Sign::plus, 1e-9, prm);
        std::mt19937_64 rng(2024);
        std::uniform_real_distribution<double> mag(0.2, 1.0);
        int produced = 0;
        bool sound = true;
        for (int i = 0; i < 20; ++i) {
            const double eps_scale = mag(rng) * std::pow(2.0, -(i % 5));
            Eigen::VectorXd w = plus.phi.values;
            for (int k = 0; k < w.size(); ++k) {
                const double sx = g200->coord(k).x / M_PI;
                w[k] *= 1.0 + eps_scale * 0.5 * std::cos(3.0 * M_PI * sx);
            }
            const Field wf(g200, w);
            const Field eps(g200, apply_Fh(d_inf, w).cwiseMax(0.0));
            const auto bound = eigen_lower_bound_certificate(d_inf, wf, eps, prm);
            if (bound) {
                ++produced;
                sound = sound && *bound <= plus.bracket_lo + 1e-12;
            }
        }
        // degenerate branches: delta = 0 and eps = 0 must return exactly zero
        const DiscreteHJB d0 = discretize(pucci_plus_operator(1.0, 2.0, 0.3, 1), g200);
        const SolveReport w0 = solve_proper(d0, Eigen::VectorXd::Constant(d0.num_nodes(), -1.0),
                                            0.0, prm);
        const Field wpos(g200, w0.solution);
        const auto eps0 = eigen_lower_bound_certificate(
            d0, wpos, Field(g200, Eigen::VectorXd::Zero(d0.num_nodes())), prm);
        const auto delta0 = eigen_lower_bound_certificate(
            d0, wpos, Field(g200, Eigen::VectorXd::Constant(d0.num_nodes(), 0.01)), prm);
        const bool degenerate_ok = eps0 && *eps0 == 0.0 && delta0 && *delta0 == 0.0;
        const bool ok = produced >= 20 && sound && degenerate_ok;
        return std::pair{ok, std::to_string(produced) + " certificates, sound = " +
                                 (sound ? "yes" : "no") + ", degenerates zero = " +
                                 (degenerate_ok ? "yes" : "no")};
    });

    // 10. domain monotonicity: middle-third excision in 1D, 10% hole in 2D
    run(10, "domain monotonicity (1D 9.0 vs 1.0, 2D positive gap)", [&] {
        HoleShape third;
        third.kind = HoleShape::Kind::box;
        third.lo = {M_PI / 3.0, 0.0};
        third.hi = {2.0 * M_PI / 3.0, 0.0};
        const auto [full1, rest1] =
            domain_monotonicity_gap(linear_operator(1.0, 0.0), g200, third, 1e-8, prm);
        bool ok = std::abs(full1.lambda - 1.0) <= 2e-2 && std::abs(rest1.lambda - 9.0) <= 2e-2;

        GridSpec spec;
        spec.dim = 2;
        spec.lo = {0.0, 0.0};
        spec.hi = {1.0, 1.0};
        spec.n = {50, 50};
        const GridPtr g2 = build_grid(spec);
        HoleShape hole;
        hole.kind = HoleShape::Kind::box;
        hole.lo = {0.342, 0.342};
        hole.hi = {0.658, 0.658};
        const auto [full2, rest2] =
            domain_monotonicity_gap(pucci_plus_operator(1.0, 2.0, 0.0, 2), g2, hole, 1e-6, prm);
        ok = ok && rest2.lambda > full2.lambda;
        return std::pair{ok, "1D " + fmt(full1.lambda) + " -> " + fmt(rest1.lambda) + "; 2D " +
                                 fmt(full2.lambda) + " -> " + fmt(rest2.lambda)};
    });

    // 11. segment case: plateau slope pinned to the discrete eigenvalue
    run(11, "plateau census yields >= 3 colinear solutions (dev <= 1e-6)", [&] {
        APParams seg_ap = ap;
        seg_ap.eigen_tol = 1e-11;
        const DiscreteHJB d_tmp = make_homogeneous(discretize(fucik_operator(0.5, 1.5), g200));
        const EigenPair tmp = principal_half_eigen(d_tmp, Sign::plus, seg_ap.eigen_tol, prm);
        const ControlledOperator op = plateau_operator(0.5, 1.5 + tmp.lambda, 1.5, 1.0);
        const APContext ctx = make_ap_context(op, g200, Field(g200), seg_ap, prm);
        const Census census = count_solutions(ctx, 0.0, 24, 42);
        const bool ok = census.solutions.size() >= 3 && census.ordered &&
                        census.colinear_segment && census.max_colinear_dev <= 1e-6;
        return std::pair{ok, std::to_string(census.solutions.size()) + " clusters, max dev " +
                                 fmt(census.max_colinear_dev)};
    });

    // 12. property suites: structure hypotheses, Pucci duality, Perron
    //     monotonicity, convex combinations
    run(12, "property suites at 1e-12 over 1000 seeded samples", [&] {
        const ControlledOperator op = fucik_operator(0.5, 1.5);
        const StructureReport rep =
            check_structure(op, Point{0.0, 0.0}, Point{M_PI, 0.0}, 1000, 20240901ull);
        bool ok = rep.max_violation() <= 1e-12;

        // g(t) monotone and Pucci duality, sampled
        std::mt19937_64 rng(20240902ull);
        std::uniform_real_distribution<double> unit(-1.0, 1.0);
        double mono = 0.0, duality = 0.0;
        for (int i = 0; i < 1000; ++i) {
            PointState s;
            s.M = SymMat::diag(unit(rng));
            s.p = Vec{1, unit(rng), 0.0};
            s.u = unit(rng);
            s.pos = Point{1.0, 0.0};
            double prev = -1e300;
            for (double t : {0.25, 1.0, 4.0, 16.0}) {
                const double gt = eval_F(op, s.scaled(t)) / t;
                mono = std::max(mono, prev - gt);
                prev = gt;
            }
            const SymMat M{2, unit(rng), unit(rng), unit(rng)};
            duality = std::max(duality,
                               std::abs(pucci_extremal(1.0, 2.0, Sign::plus, M) +
                                        pucci_extremal(1.0, 2.0, Sign::minus, -M)));
        }
        ok = ok && mono <= 1e-12 && duality == 0.0;

        // Perron monotonicity is hard-asserted inside the hierarchy; a full
        // run throwing no std::logic_error certifies it step by step
        const SolvabilityVerdict verdict = solvable(fucik, 1.0);
        ok = ok && verdict.status == Solvability::solvable;

        // convex combinations of the two census solutions stay on the right
        // side of the equation
        const Census census = count_solutions(fucik, 1.0, 16, 43);
        bool convex_ok = census.solutions.size() == 2;
        if (convex_ok) {
            const Eigen::VectorXd& u = census.solutions[0].values;
            const Eigen::VectorXd& v = census.solutions[1].values;
            const Eigen::VectorXd gvec = fucik.phi.values;
            const double slack = 1e-9;
            for (double al : {0.25, 0.5, 0.75})
                convex_ok = convex_ok &&
                            (apply_Fh(fucik.d, (u + al * (v - u)).eval()) - gvec).maxCoeff() <=
                                slack;
            for (double al : {-0.5, 1.5})
                convex_ok = convex_ok &&
                            (apply_Fh(fucik.d, (u + al * (v - u)).eval()) - gvec).minCoeff() >=
                                -slack;
        }
        ok = ok && convex_ok;
        return std::pair{ok, "max structure violation " + fmt(rep.max_violation()) +
                                 ", duality " + fmt(duality)};
    });

    std::printf("%d of 12 criteria passed\n", 12 - g_failures);
    return g_failures == 0 ? 0 : 1;
}
