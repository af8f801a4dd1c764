#pragma once

#include "bubblecluster/analytic.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace bubblecluster {

enum class MaskKind { Box, Ball };

struct GridSpec {
    int n = 0;
    std::vector<double> lower;
    std::vector<double> upper;
    std::vector<double> h;  ///< one entry, or one per axis
    MaskKind mask = MaskKind::Box;
    /// Ball mask only: nodes with |x - ball_center| < ball_radius are active.
    Point ball_center;
    double ball_radius = 0.0;
    std::int64_t node_cap = 3'000'000;
};

/// Tensor grid over a box with a Dirichlet mask. Unknowns live on the
/// active nodes: box-interior nodes, further restricted to the open ball
/// for MaskKind::Ball. All other nodes carry the zero boundary value.
class DomainGrid {
public:
    int dim() const { return n_; }
    const std::vector<double>& lower() const { return lower_; }
    const std::vector<double>& upper() const { return upper_; }
    const std::vector<double>& spacing() const { return h_; }
    const std::vector<int>& nodes_per_axis() const { return nodes_; }
    MaskKind mask() const { return mask_; }

    std::int64_t total_nodes() const { return total_; }
    std::int32_t active_count() const { return static_cast<std::int32_t>(full_index_.size()); }

    /// Full (row-major, axis 0 slowest) index of an active node.
    std::int64_t full_index(std::int32_t k) const { return full_index_[k]; }
    /// Active index of a full index, or -1 for a boundary node.
    std::int32_t active_index(std::int64_t full) const { return active_of_[full]; }

    std::vector<int> multi_index(std::int64_t full) const;
    std::int64_t full_from_multi(const std::vector<int>& idx) const;
    Point coords_full(std::int64_t full) const;
    Point coords(std::int32_t k) const { return coords_full(full_index_[k]); }

    /// Neighbor of active node k along `axis` in direction dir (+1 / -1);
    /// -1 if that neighbor is a boundary node.
    std::int32_t neighbor(std::int32_t k, int axis, int dir) const {
        return neighbors_[static_cast<std::size_t>(k) * 2 * n_ + 2 * axis + (dir > 0 ? 1 : 0)];
    }

    double cell_volume() const;
    double max_spacing() const;
    double min_half_width() const;
    /// Distance from x to the boundary of the masked domain.
    double distance_to_boundary(const Point& x) const;
    bool contains(const Point& x) const;
    /// Short description of the domain and mask, stable across runs.
    std::string mask_id() const;
    nlohmann::json header() const;

private:
    friend DomainGrid build_grid(const GridSpec& spec);

    int n_ = 0;
    std::vector<double> lower_, upper_, h_;
    std::vector<int> nodes_;
    std::vector<std::int64_t> strides_;
    MaskKind mask_ = MaskKind::Box;
    Point ball_center_;
    double ball_radius_ = 0.0;
    std::int64_t total_ = 0;
    std::vector<std::int64_t> full_index_;
    std::vector<std::int32_t> active_of_;
    std::vector<std::int32_t> neighbors_;
};

/// Validates the spec (h divides every axis length, node count below the
/// cap) and builds the masks and neighbor table.
DomainGrid build_grid(const GridSpec& spec);

/// Convenience: cube [-half, half]^n with `nodes` nodes per axis
/// (boundary included).
GridSpec cube_spec(int n, double half, int nodes);

/// Box with per-axis half-widths around `center`, `nodes` per axis.
GridSpec box_spec(const Point& center, const std::vector<double>& half_widths, int nodes);

} // namespace bubblecluster
