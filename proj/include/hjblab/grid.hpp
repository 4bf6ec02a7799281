#pragma once

#include "hjblab/types.hpp"

#include <Eigen/Dense>
#include <array>
#include <memory>
#include <string>
#include <vector>

namespace hjb {

/// Excised closed subset: an axis-aligned box or a disk, strictly inside
/// the domain. Nodes falling inside (closed test) are removed from the
/// unknown set and act as zero-Dirichlet boundary.
struct HoleShape {
    enum class Kind { box, disk } kind = Kind::box;
    // box
    std::array<double, 2> lo{0.0, 0.0};
    std::array<double, 2> hi{0.0, 0.0};
    // disk
    Point center;
    double radius = 0.0;

    bool contains(int dim, const Point& p) const;
    /// Euclidean distance from an exterior point to the shape.
    double distance(int dim, const Point& p) const;
};

/// Uniform tensor grid on an interval (dim 1) or rectangle (dim 2) with
/// zero Dirichlet boundary, optionally with excised holes. Interior nodes
/// surviving excision carry compact indices 0..num_active()-1.
struct Grid {
    int dim = 1;
    std::array<double, 2> lo{0.0, 0.0};
    std::array<double, 2> hi{1.0, 0.0};
    std::array<int, 2> n{1, 1};      // interior node counts per axis
    std::array<double, 2> h{1.0, 1.0};
    std::vector<HoleShape> holes;

    std::vector<int> active_of_flat;  // flat (i + nx*j) -> active index or -1
    std::vector<int> flat_of_active;  // active index -> flat
    bool connected_to_boundary = true;  // reported, not required

    int nx() const { return n[0]; }
    int ny() const { return dim == 2 ? n[1] : 1; }
    int num_flat() const { return nx() * ny(); }
    int num_active() const { return static_cast<int>(flat_of_active.size()); }
    double cell_volume() const { return dim == 1 ? h[0] : h[0] * h[1]; }

    Point coord_of_flat(int flat) const {
        const int i = flat % nx();
        const int j = flat / nx();
        Point p;
        p.x = lo[0] + (i + 1) * h[0];
        p.y = dim == 2 ? lo[1] + (j + 1) * h[1] : 0.0;
        return p;
    }
    Point coord(int active) const { return coord_of_flat(flat_of_active[active]); }

    /// Active index of neighbor at (i+di, j+dj); -1 if boundary or excised.
    int neighbor(int flat, int di, int dj) const {
        const int i = flat % nx() + di;
        const int j = flat / nx() + dj;
        if (i < 0 || i >= nx() || j < 0 || j >= ny()) return -1;
        return active_of_flat[i + nx() * j];
    }
};

using GridPtr = std::shared_ptr<const Grid>;

struct GridSpec {
    int dim = 1;
    std::array<double, 2> lo{0.0, 0.0};
    std::array<double, 2> hi{1.0, 1.0};
    std::array<int, 2> n{3, 3};
    std::vector<HoleShape> holes;
};

/// Builds the grid; h = (hi-lo)/(n+1) per axis exactly. Throws on degenerate
/// extents, n < 3, or a hole mask that excises every interior node.
GridPtr build_grid(const GridSpec& spec);

/// Same grid with an extra excised subset; throws if nothing remains.
GridPtr restrict_domain(const GridPtr& grid, const HoleShape& gamma);

/// Scalar values on active interior nodes; boundary values are implicitly 0.
struct Field {
    GridPtr grid;
    Eigen::VectorXd values;

    Field() = default;
    explicit Field(GridPtr g) : grid(std::move(g)), values(Eigen::VectorXd::Zero(grid->num_active())) {}
    Field(GridPtr g, Eigen::VectorXd v) : grid(std::move(g)), values(std::move(v)) {}

    int size() const { return static_cast<int>(values.size()); }
    double sup_norm() const { return size() == 0 ? 0.0 : values.cwiseAbs().maxCoeff(); }
    double max() const { return values.maxCoeff(); }
    double min() const { return values.minCoeff(); }

    /// Discrete L^p norm, (sum |v|^p * cell_volume)^(1/p).
    double lp_norm(double p) const;

    Field positive_part() const { return Field(grid, values.cwiseMax(0.0)); }
    /// u^- = max(-u, 0), so u = u^+ - u^-.
    Field negative_part() const { return Field(grid, (-values).cwiseMax(0.0)); }
};

/// Samples a callable field(x, y) at the active nodes.
template <typename Fn>
Field sample_field(const GridPtr& grid, Fn&& fn) {
    Field out(grid);
    for (int k = 0; k < grid->num_active(); ++k) {
        const Point p = grid->coord(k);
        out.values[k] = fn(p.x, p.y);
    }
    return out;
}

/// Exact distance from each active node to the nearest boundary point of
/// the excised domain (outer box faces and hole boundaries).
Field distance_field(const GridPtr& grid);

/// Wraps per-node tabulated values as a coefficient field via nearest-node
/// lookup, the alternative to closed-form expressions for coefficients that
/// exist only as data.
std::function<double(double, double)> table_coefficient(const Field& table);

/// Writes "x[,y],value" rows (header included) for plotting.
void write_field_csv(const Field& field, const std::string& path);

} // namespace hjb
