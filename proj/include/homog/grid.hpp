#pragma once

// Uniform periodic grid over the unit cell Y = (0,1)^N crossed with n_s time
// slices over the unit period S. Node i sits at y = i*h with periodic index
// wrapping; there are exactly n_y unknowns per dimension.

#include <cstddef>
#include <stdexcept>

namespace homog {

struct CellGrid {
    int dim = 1;    // N: 1 or 2
    int n_y = 128;  // nodes per spatial dimension
    int n_s = 128;  // time slices per period

    CellGrid() = default;
    CellGrid(int dim_, int n_y_, int n_s_) : dim(dim_), n_y(n_y_), n_s(n_s_) {
        if (dim < 1 || dim > 2) throw std::invalid_argument("cell grid dim must be 1 or 2");
        if (n_y < 4) throw std::invalid_argument("cell grid needs n_y >= 4");
        if (n_s < 2) throw std::invalid_argument("cell grid needs n_s >= 2");
    }

    double h() const { return 1.0 / n_y; }
    double ds() const { return 1.0 / n_s; }

    // unknowns in one s-slice
    std::size_t slice_size() const {
        std::size_t n = static_cast<std::size_t>(n_y);
        return dim == 1 ? n : n * n;
    }

    int wrap(int i) const {
        i %= n_y;
        return i < 0 ? i + n_y : i;
    }

    // row-major node index for dim == 2
    std::size_t at(int i1, int i2) const {
        return static_cast<std::size_t>(wrap(i1)) * n_y + wrap(i2);
    }
};

}  // namespace homog
