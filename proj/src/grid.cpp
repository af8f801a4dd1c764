#include "bubblecluster/grid.hpp"

#include "bubblecluster/errors.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

namespace bubblecluster {

std::vector<int> DomainGrid::multi_index(std::int64_t full) const {
    std::vector<int> idx(n_);
    for (int a = 0; a < n_; ++a) {
        idx[a] = static_cast<int>(full / strides_[a]);
        full %= strides_[a];
    }
    return idx;
}

std::int64_t DomainGrid::full_from_multi(const std::vector<int>& idx) const {
    std::int64_t f = 0;
    for (int a = 0; a < n_; ++a) {
        f += idx[a] * strides_[a];
    }
    return f;
}

Point DomainGrid::coords_full(std::int64_t full) const {
    Point x(n_);
    for (int a = 0; a < n_; ++a) {
        const auto i = full / strides_[a];
        full %= strides_[a];
        x[a] = lower_[a] + static_cast<double>(i) * h_[a];
    }
    return x;
}

double DomainGrid::cell_volume() const {
    double v = 1.0;
    for (double s : h_) {
        v *= s;
    }
    return v;
}

double DomainGrid::max_spacing() const {
    return *std::max_element(h_.begin(), h_.end());
}

double DomainGrid::min_half_width() const {
    double m = std::numeric_limits<double>::infinity();
    for (int a = 0; a < n_; ++a) {
        m = std::min(m, 0.5 * (upper_[a] - lower_[a]));
    }
    if (mask_ == MaskKind::Ball) {
        m = std::min(m, ball_radius_);
    }
    return m;
}

double DomainGrid::distance_to_boundary(const Point& x) const {
    double d = std::numeric_limits<double>::infinity();
    for (int a = 0; a < n_; ++a) {
        d = std::min({d, x[a] - lower_[a], upper_[a] - x[a]});
    }
    if (mask_ == MaskKind::Ball) {
        d = std::min(d, ball_radius_ - (x - ball_center_).norm());
    }
    return d;
}

bool DomainGrid::contains(const Point& x) const {
    return x.size() == n_ && distance_to_boundary(x) > 0.0;
}

std::string DomainGrid::mask_id() const {
    std::ostringstream os;
    os << std::setprecision(17) << (mask_ == MaskKind::Ball ? "ball" : "box");
    for (int a = 0; a < n_; ++a) {
        os << ":" << lower_[a] << "," << upper_[a] << "," << nodes_[a];
    }
    if (mask_ == MaskKind::Ball) {
        os << ":c";
        for (int a = 0; a < n_; ++a) {
            os << "," << ball_center_[a];
        }
        os << ":r" << ball_radius_;
    }
    return os.str();
}

nlohmann::json DomainGrid::header() const {
    return {{"n", n_},
            {"lower", lower_},
            {"upper", upper_},
            {"h", h_},
            {"nodes", nodes_},
            {"mask", mask_ == MaskKind::Ball ? "ball" : "box"},
            {"mask_id", mask_id()},
            {"active", active_count()}};
}

DomainGrid build_grid(const GridSpec& spec) {
    const int n = spec.n;
    if (n < 1 || n > 6) {
        throw DomainError("grid dimension must lie in 1..6");
    }
    if (static_cast<int>(spec.lower.size()) != n || static_cast<int>(spec.upper.size()) != n) {
        throw DomainError("grid bounds need one entry per axis");
    }
    if (spec.h.size() != 1 && static_cast<int>(spec.h.size()) != n) {
        throw DomainError("grid spacing needs one entry or one per axis");
    }
    DomainGrid g;
    g.n_ = n;
    g.lower_ = spec.lower;
    g.upper_ = spec.upper;
    g.mask_ = spec.mask;
    g.h_.resize(n);
    g.nodes_.resize(n);
    double total = 1.0;
    for (int a = 0; a < n; ++a) {
        const double len = spec.upper[a] - spec.lower[a];
        const double h = spec.h.size() == 1 ? spec.h[0] : spec.h[a];
        if (!(len > 0.0) || !std::isfinite(len)) {
            throw DomainError("grid bounds are degenerate on axis " + std::to_string(a));
        }
        if (!(h > 0.0)) {
            throw DomainError("grid spacing must be positive");
        }
        const double cells = len / h;
        const double rounded = std::round(cells);
        if (rounded < 1.0 || std::abs(cells - rounded) > 1e-9 * std::max(1.0, cells)) {
            throw DomainError("spacing does not divide the length of axis " + std::to_string(a));
        }
        g.nodes_[a] = static_cast<int>(rounded) + 1;
        g.h_[a] = len / rounded;
        total *= g.nodes_[a];
    }
    if (total > static_cast<double>(spec.node_cap)) {
        throw PreconditionError("grid has " + std::to_string(static_cast<std::int64_t>(total)) +
                                " nodes, above the cap of " + std::to_string(spec.node_cap));
    }
    if (spec.mask == MaskKind::Ball) {
        if (spec.ball_center.size() != n || !(spec.ball_radius > 0.0)) {
            throw DomainError("ball mask needs a center and a positive radius");
        }
        g.ball_center_ = spec.ball_center;
        g.ball_radius_ = spec.ball_radius;
    }
    g.total_ = static_cast<std::int64_t>(total);
    g.strides_.assign(n, 1);
    for (int a = n - 2; a >= 0; --a) {
        g.strides_[a] = g.strides_[a + 1] * g.nodes_[a + 1];
    }

    g.active_of_.assign(g.total_, -1);
    std::vector<int> idx(n, 0);
    for (std::int64_t f = 0; f < g.total_; ++f) {
        bool active = true;
        for (int a = 0; a < n && active; ++a) {
            active = idx[a] > 0 && idx[a] < g.nodes_[a] - 1;
        }
        if (active && spec.mask == MaskKind::Ball) {
            active = (g.coords_full(f) - g.ball_center_).norm() < g.ball_radius_;
        }
        if (active) {
            if (g.full_index_.size() >= static_cast<std::size_t>(std::numeric_limits<std::int32_t>::max())) {
                throw PreconditionError("too many active nodes");
            }
            g.active_of_[f] = static_cast<std::int32_t>(g.full_index_.size());
            g.full_index_.push_back(f);
        }
        for (int a = n - 1; a >= 0; --a) {
            if (++idx[a] < g.nodes_[a]) {
                break;
            }
            idx[a] = 0;
        }
    }

    g.neighbors_.resize(g.full_index_.size() * 2 * n);
    for (std::size_t k = 0; k < g.full_index_.size(); ++k) {
        const std::int64_t f = g.full_index_[k];
        for (int a = 0; a < n; ++a) {
            g.neighbors_[k * 2 * n + 2 * a] = g.active_of_[f - g.strides_[a]];
            g.neighbors_[k * 2 * n + 2 * a + 1] = g.active_of_[f + g.strides_[a]];
        }
    }
    return g;
}

GridSpec cube_spec(int n, double half, int nodes) {
    if (nodes < 3) {
        throw DomainError("need at least three nodes per axis");
    }
    GridSpec s;
    s.n = n;
    s.lower.assign(n, -half);
    s.upper.assign(n, half);
    s.h = {2.0 * half / (nodes - 1)};
    return s;
}

GridSpec box_spec(const Point& center, const std::vector<double>& half_widths, int nodes) {
    const int n = static_cast<int>(center.size());
    if (static_cast<int>(half_widths.size()) != n) {
        throw DomainError("box_spec: one half-width per axis");
    }
    if (nodes < 3) {
        throw DomainError("need at least three nodes per axis");
    }
    GridSpec s;
    s.n = n;
    for (int a = 0; a < n; ++a) {
        s.lower.push_back(center[a] - half_widths[a]);
        s.upper.push_back(center[a] + half_widths[a]);
        s.h.push_back(2.0 * half_widths[a] / (nodes - 1));
    }
    return s;
}

} // namespace bubblecluster
