#include "ctlab/grid.hpp"

namespace ctlab {

GridField centered_derivative(const GridField& f) {
    GridField d = f;
    const double inv2h = 1.0 / (2.0 * f.h());
    for (int i = 0; i < f.n; ++i)
        d[i] = (f.at(i + 1) - f.at(i - 1)) * inv2h;
    if (f.domain == Domain::Line) {
        d.far_left = 0.0;
        d.far_right = 0.0;
    }
    return d;
}

}  // namespace ctlab
