#include "bubblecluster/field_io.hpp"

#include "bubblecluster/errors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iomanip>

namespace bubblecluster {

static_assert(std::endian::native == std::endian::little, "field files are little-endian");

void write_field(const DomainGrid& grid, const GridField& u, const std::string& stem) {
    if (u.size() != grid.active_count()) {
        throw DomainError("field size does not match the grid");
    }
    auto header = grid.header();
    header["dtype"] = "float64-le";
    header["values"] = "active nodes in increasing full index";
    std::ofstream js(stem + ".json");
    js << header.dump(2) << "\n";
    std::ofstream bin(stem + ".bin", std::ios::binary);
    bin.write(reinterpret_cast<const char*>(u.data()), static_cast<std::streamsize>(u.size() * sizeof(double)));
    if (!js || !bin) {
        throw std::runtime_error("failed to write field " + stem);
    }
}

GridField read_field(const DomainGrid& grid, const std::string& stem) {
    std::ifstream js(stem + ".json");
    if (!js) {
        throw std::runtime_error("cannot open " + stem + ".json");
    }
    const auto header = nlohmann::json::parse(js);
    if (header.at("mask_id").get<std::string>() != grid.mask_id()) {
        throw DomainError("field header does not match the grid");
    }
    GridField u(grid.active_count());
    std::ifstream bin(stem + ".bin", std::ios::binary);
    bin.read(reinterpret_cast<char*>(u.data()), static_cast<std::streamsize>(u.size() * sizeof(double)));
    if (bin.gcount() != static_cast<std::streamsize>(u.size() * sizeof(double))) {
        throw std::runtime_error("field file " + stem + ".bin is truncated");
    }
    return u;
}

void write_slice_csv(const DomainGrid& grid, const GridField& u, const std::vector<int>& axes,
                     const Point& through, const std::string& path) {
    const int n = grid.dim();
    if (axes.empty() || axes.size() > 2 || through.size() != n) {
        throw DomainError("slice needs one or two axes and a point of the grid dimension");
    }
    for (int a : axes) {
        if (a < 0 || a >= n) {
            throw DomainError("slice axis out of range");
        }
    }
    std::vector<int> base(n);
    for (int a = 0; a < n; ++a) {
        const double t = (through[a] - grid.lower()[a]) / grid.spacing()[a];
        base[a] = std::clamp(static_cast<int>(std::lround(t)), 0, grid.nodes_per_axis()[a] - 1);
    }
    std::ofstream os(path);
    os << std::setprecision(17);
    for (int a : axes) {
        os << "x" << a << ",";
    }
    os << "value\n";
    const int n0 = grid.nodes_per_axis()[axes[0]];
    const int n1 = axes.size() == 2 ? grid.nodes_per_axis()[axes[1]] : 1;
    for (int i = 0; i < n0; ++i) {
        for (int j = 0; j < n1; ++j) {
            std::vector<int> idx = base;
            idx[axes[0]] = i;
            if (axes.size() == 2) {
                idx[axes[1]] = j;
            }
            const auto full = grid.full_from_multi(idx);
            const auto k = grid.active_index(full);
            const Point x = grid.coords_full(full);
            for (int a : axes) {
                os << x[a] << ",";
            }
            os << (k >= 0 ? u[k] : 0.0) << "\n";
        }
    }
    if (!os) {
        throw std::runtime_error("failed to write " + path);
    }
}

} // namespace bubblecluster
