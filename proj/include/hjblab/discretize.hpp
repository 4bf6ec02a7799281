#pragma once

#include "hjblab/grid.hpp"
#include "hjblab/operator_model.hpp"

#include <Eigen/Sparse>
#include <vector>

namespace hjb {

/// Monotone upwind finite-difference form of a ControlledOperator on a grid:
/// one sparse matrix per control (central second differences, upwind first
/// differences, Dirichlet values eliminated into the stencil) plus sampled
/// sources. Off-diagonal entries of every L_alpha are nonnegative, and the
/// diagonal is dominated up to the c contribution, so L_alpha - s I is a
/// (negated) strict M-matrix for any s > delta.
struct DiscreteHJB {
    GridPtr grid;
    int dim = 1;
    std::vector<Eigen::SparseMatrix<double, Eigen::RowMajor>> L;  // per control
    std::vector<Eigen::VectorXd> f;        // per control, sampled f_alpha
    std::vector<Eigen::VectorXd> cvals;    // per control, sampled c_alpha (full stencil row sum)
    Eigen::VectorXd f_min;                 // min_alpha f_alpha per node
    double lambda = 1.0, Lambda = 1.0, gamma = 0.0, delta = 0.0, a0 = 0.0;

    int num_controls() const { return static_cast<int>(L.size()); }
    int num_nodes() const { return grid->num_active(); }
};

/// Assembles the scheme. Throws on dimension mismatch, non-diagonal
/// diffusion in 2D, or axis diffusion outside [lambda, Lambda] at a node.
/// If op.a0 < 0 the bound a0 = 2 max_alpha max_nodes |f_alpha| is measured
/// from the samples.
DiscreteHJB discretize(const ControlledOperator& op, const GridPtr& grid);

/// Nodewise max_alpha (L_alpha u - f_alpha) + f_min, the discrete operator
/// with the same normalization as eval_F (so apply_Fh(0) = 0).
Field apply_Fh(const DiscreteHJB& d, const Field& u);
Eigen::VectorXd apply_Fh(const DiscreteHJB& d, const Eigen::VectorXd& u);

/// apply_Fh evaluated at u + shift (constant added on interior AND boundary,
/// so the shifted function does not vanish on the boundary). The full
/// stencil annihilates constants except through the zeroth-order term, so
/// this costs one extra axpy per control.
Eigen::VectorXd apply_Fh_shifted(const DiscreteHJB& d, const Eigen::VectorXd& u, double shift);

/// Greedy argmax control per node at state u, lowest index winning ties.
std::vector<int> argmax_policy(const DiscreteHJB& d, const Eigen::VectorXd& u);

/// Same scheme with all sources zeroed: the discrete asymptotic operator.
DiscreteHJB make_homogeneous(const DiscreteHJB& d);

/// sup-norm of apply_Fh(u) - g over interior nodes.
double residual_norm(const DiscreteHJB& d, const Eigen::VectorXd& u, const Eigen::VectorXd& g);
double residual_norm(const DiscreteHJB& d, const Field& u, const Field& g);

} // namespace hjb
