#pragma once

#include "bubblecluster/grid.hpp"
#include "bubblecluster/pde.hpp"

#include <string>
#include <vector>

namespace bubblecluster {

/// Writes `stem`.json (grid header) and `stem`.bin (active-node values as
/// little-endian float64, in active-index order).
void write_field(const DomainGrid& grid, const GridField& u, const std::string& stem);

/// Reads a field written by write_field; the header must match `grid`.
GridField read_field(const DomainGrid& grid, const std::string& stem);

/// CSV of a 1-D or 2-D slice through the node nearest to `through`.
/// `axes` holds one or two axis indices; columns are the slice coordinates
/// followed by the value (zero on boundary nodes).
void write_slice_csv(const DomainGrid& grid, const GridField& u, const std::vector<int>& axes,
                     const Point& through, const std::string& path);

} // namespace bubblecluster
