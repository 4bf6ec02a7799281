#include "hjblab/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <stdexcept>

namespace hjb {

bool HoleShape::contains(int dim, const Point& p) const {
    if (kind == Kind::box) {
        if (p.x < lo[0] || p.x > hi[0]) return false;
        if (dim == 2 && (p.y < lo[1] || p.y > hi[1])) return false;
        return true;
    }
    const double dx = p.x - center.x;
    const double dy = dim == 2 ? p.y - center.y : 0.0;
    return dx * dx + dy * dy <= radius * radius;
}

double HoleShape::distance(int dim, const Point& p) const {
    if (kind == Kind::box) {
        const double dx = std::max({lo[0] - p.x, p.x - hi[0], 0.0});
        const double dy = dim == 2 ? std::max({lo[1] - p.y, p.y - hi[1], 0.0}) : 0.0;
        return std::hypot(dx, dy);
    }
    const double dx = p.x - center.x;
    const double dy = dim == 2 ? p.y - center.y : 0.0;
    return std::max(std::hypot(dx, dy) - radius, 0.0);
}

namespace {

void index_active_nodes(Grid& g) {
    g.active_of_flat.assign(g.num_flat(), -1);
    g.flat_of_active.clear();
    for (int flat = 0; flat < g.num_flat(); ++flat) {
        const Point p = g.coord_of_flat(flat);
        bool excised = false;
        for (const auto& hole : g.holes)
            if (hole.contains(g.dim, p)) { excised = true; break; }
        if (!excised) {
            g.active_of_flat[flat] = static_cast<int>(g.flat_of_active.size());
            g.flat_of_active.push_back(flat);
        }
    }
}

// BFS from boundary-adjacent nodes; every active node should be reachable
// through active neighbors for the Dirichlet problem to be well-posed on
// each component. Reported, not enforced.
bool check_boundary_connectivity(const Grid& g) {
    const int m = g.num_active();
    if (m == 0) return false;
    std::vector<char> seen(m, 0);
    std::deque<int> queue;
    for (int k = 0; k < m; ++k) {
        const int flat = g.flat_of_active[k];
        const int i = flat % g.nx();
        const int j = flat / g.nx();
        const bool touches = i == 0 || i == g.nx() - 1 ||
                             (g.dim == 2 && (j == 0 || j == g.ny() - 1));
        if (touches) { seen[k] = 1; queue.push_back(k); }
    }
    while (!queue.empty()) {
        const int k = queue.front();
        queue.pop_front();
        const int flat = g.flat_of_active[k];
        const int offs[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
        const int nn = g.dim == 2 ? 4 : 2;
        for (int q = 0; q < nn; ++q) {
            const int nb = g.neighbor(flat, offs[q][0], offs[q][1]);
            if (nb >= 0 && !seen[nb]) { seen[nb] = 1; queue.push_back(nb); }
        }
    }
    return std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
}

} // namespace

GridPtr build_grid(const GridSpec& spec) {
    if (spec.dim != 1 && spec.dim != 2)
        throw std::invalid_argument("grid dimension must be 1 or 2");
    auto g = std::make_shared<Grid>();
    g->dim = spec.dim;
    g->lo = spec.lo;
    g->hi = spec.hi;
    g->n = spec.n;
    if (spec.dim == 1) { g->n[1] = 1; g->hi[1] = g->lo[1]; }
    for (int ax = 0; ax < spec.dim; ++ax) {
        if (!(spec.hi[ax] > spec.lo[ax]))
            throw std::invalid_argument("grid extents must be increasing on axis " +
                                        std::to_string(ax));
        if (spec.n[ax] < 3)
            throw std::invalid_argument("grid needs at least 3 interior nodes per axis");
        g->h[ax] = (spec.hi[ax] - spec.lo[ax]) / (spec.n[ax] + 1);
    }
    if (spec.dim == 1) g->h[1] = 1.0;
    g->holes = spec.holes;
    index_active_nodes(*g);
    if (g->num_active() == 0)
        throw std::invalid_argument("hole mask excises every interior node");
    g->connected_to_boundary = check_boundary_connectivity(*g);
    return g;
}

GridPtr restrict_domain(const GridPtr& grid, const HoleShape& gamma) {
    auto g = std::make_shared<Grid>(*grid);
    g->holes.push_back(gamma);
    index_active_nodes(*g);
    if (g->num_active() == 0)
        throw std::invalid_argument("restrict_domain leaves no interior nodes");
    g->connected_to_boundary = check_boundary_connectivity(*g);
    return g;
}

double Field::lp_norm(double p) const {
    if (size() == 0) return 0.0;
    const double vol = grid->cell_volume();
    double acc = 0.0;
    for (int k = 0; k < size(); ++k) acc += std::pow(std::abs(values[k]), p) * vol;
    return std::pow(acc, 1.0 / p);
}

Field distance_field(const GridPtr& grid) {
    Field d(grid);
    for (int k = 0; k < grid->num_active(); ++k) {
        const Point p = grid->coord(k);
        double best = std::min(p.x - grid->lo[0], grid->hi[0] - p.x);
        if (grid->dim == 2)
            best = std::min({best, p.y - grid->lo[1], grid->hi[1] - p.y});
        for (const auto& hole : grid->holes)
            best = std::min(best, hole.distance(grid->dim, p));
        d.values[k] = best;
    }
    return d;
}

std::function<double(double, double)> table_coefficient(const Field& table) {
    const GridPtr grid = table.grid;
    const Eigen::VectorXd values = table.values;
    return [grid, values](double x, double y) {
        const Grid& g = *grid;
        auto clamp_index = [](int i, int n) { return std::max(0, std::min(i, n - 1)); };
        const int i = clamp_index(
            static_cast<int>(std::lround((x - g.lo[0]) / g.h[0])) - 1, g.nx());
        const int j = g.dim == 2 ? clamp_index(
            static_cast<int>(std::lround((y - g.lo[1]) / g.h[1])) - 1, g.ny()) : 0;
        const int active = g.active_of_flat[i + g.nx() * j];
        if (active < 0)
            throw std::invalid_argument("table_coefficient: lookup hit an excised node");
        return values[active];
    };
}

void write_field_csv(const Field& field, const std::string& path) {
    std::FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw std::runtime_error("cannot open " + path + " for writing");
    const Grid& g = *field.grid;
    std::fprintf(fp, g.dim == 2 ? "x,y,value\n" : "x,value\n");
    for (int k = 0; k < field.size(); ++k) {
        const Point p = g.coord(k);
        if (g.dim == 2)
            std::fprintf(fp, "%.17g,%.17g,%.17g\n", p.x, p.y, field.values[k]);
        else
            std::fprintf(fp, "%.17g,%.17g\n", p.x, field.values[k]);
    }
    std::fclose(fp);
}

} // namespace hjb
