#include "hjblab/discretize.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace hjb {

namespace {

constexpr double kEllipticitySlack = 1e-12;

} // namespace

DiscreteHJB discretize(const ControlledOperator& op, const GridPtr& grid) {
    op.validate();
    if (op.dim != grid->dim)
        throw std::invalid_argument("operator and grid dimensions differ");

    DiscreteHJB d;
    d.grid = grid;
    d.dim = op.dim;
    d.lambda = op.lambda;
    d.Lambda = op.Lambda;
    d.gamma = op.gamma;
    d.delta = op.delta;

    const int m = grid->num_active();
    const int naxes = op.dim;
    double fabs_max = 0.0;

    d.f_min = Eigen::VectorXd::Constant(m, std::numeric_limits<double>::infinity());
    for (const auto& ctrl : op.controls) {
        Eigen::SparseMatrix<double, Eigen::RowMajor> La(m, m);
        std::vector<Eigen::Triplet<double>> trips;
        trips.reserve(static_cast<size_t>(m) * (2 * naxes + 1));
        Eigen::VectorXd fa(m), ca(m);

        for (int k = 0; k < m; ++k) {
            const int flat = grid->flat_of_active[k];
            const Point p = grid->coord(k);

            const SymMat A = ctrl.diffusion(op.dim, p);
            if (op.dim == 2 && A.m12 != 0.0)
                throw std::invalid_argument("2D assembly supports diagonal diffusion only");
            const Vec b = ctrl.drift(op.dim, p);
            const double c = ctrl.c(p.x, p.y);
            fa[k] = ctrl.f(p.x, p.y);
            ca[k] = c;
            fabs_max = std::max(fabs_max, std::abs(fa[k]));
            d.f_min[k] = std::min(d.f_min[k], fa[k]);

            double diag = c;
            const double adiff[2] = {A.m11, A.m22};
            const double bdrift[2] = {b.x, b.y};
            for (int ax = 0; ax < naxes; ++ax) {
                const double a = adiff[ax];
                if (a < op.lambda - kEllipticitySlack || a > op.Lambda + kEllipticitySlack)
                    throw std::invalid_argument("diffusion outside [lambda, Lambda] at a node");
                const double h = grid->h[ax];
                const double w2 = a / (h * h);
                const double bval = bdrift[ax];
                // upwind split: forward difference for b >= 0, backward for b < 0,
                // keeping both off-diagonal weights nonnegative
                const double wplus = w2 + std::max(bval, 0.0) / h;
                const double wminus = w2 + std::max(-bval, 0.0) / h;
                diag -= wplus + wminus;

                const int di = ax == 0 ? 1 : 0;
                const int dj = ax == 0 ? 0 : 1;
                const int right = grid->neighbor(flat, di, dj);
                const int left = grid->neighbor(flat, -di, -dj);
                if (right >= 0) trips.emplace_back(k, right, wplus);
                if (left >= 0) trips.emplace_back(k, left, wminus);
                // boundary / excised neighbors carry value 0 and drop out
            }
            trips.emplace_back(k, k, diag);
        }
        La.setFromTriplets(trips.begin(), trips.end());
        La.makeCompressed();
        d.L.push_back(std::move(La));
        d.f.push_back(std::move(fa));
        d.cvals.push_back(std::move(ca));
    }
    d.a0 = op.a0 >= 0.0 ? op.a0 : 2.0 * fabs_max;
    return d;
}

Eigen::VectorXd apply_Fh(const DiscreteHJB& d, const Eigen::VectorXd& u) {
    Eigen::VectorXd out = d.L[0] * u - d.f[0];
    for (int a = 1; a < d.num_controls(); ++a)
        out = out.cwiseMax(d.L[a] * u - d.f[a]);
    return out + d.f_min;
}

Field apply_Fh(const DiscreteHJB& d, const Field& u) {
    if (u.grid.get() != d.grid.get())
        throw std::invalid_argument("field lives on a different grid");
    return Field(d.grid, apply_Fh(d, u.values));
}

Eigen::VectorXd apply_Fh_shifted(const DiscreteHJB& d, const Eigen::VectorXd& u, double shift) {
    Eigen::VectorXd out = d.L[0] * u + shift * d.cvals[0] - d.f[0];
    for (int a = 1; a < d.num_controls(); ++a)
        out = out.cwiseMax(d.L[a] * u + shift * d.cvals[a] - d.f[a]);
    return out + d.f_min;
}

std::vector<int> argmax_policy(const DiscreteHJB& d, const Eigen::VectorXd& u) {
    const int m = d.num_nodes();
    std::vector<int> policy(m, 0);
    Eigen::VectorXd best = d.L[0] * u - d.f[0];
    for (int a = 1; a < d.num_controls(); ++a) {
        const Eigen::VectorXd cand = d.L[a] * u - d.f[a];
        for (int k = 0; k < m; ++k)
            if (cand[k] > best[k]) { best[k] = cand[k]; policy[k] = a; }
    }
    return policy;
}

DiscreteHJB make_homogeneous(const DiscreteHJB& d) {
    DiscreteHJB out = d;
    for (auto& fa : out.f) fa.setZero();
    out.f_min.setZero();
    out.a0 = 0.0;
    return out;
}

double residual_norm(const DiscreteHJB& d, const Eigen::VectorXd& u, const Eigen::VectorXd& g) {
    return (apply_Fh(d, u) - g).cwiseAbs().maxCoeff();
}

double residual_norm(const DiscreteHJB& d, const Field& u, const Field& g) {
    return residual_norm(d, u.values, g.values);
}

} // namespace hjb
