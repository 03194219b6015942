#pragma once

#include <array>

namespace nlos {

/// Oriented surface element: ground-truth scene primitive.
/// Position is (x, y, z) with the wall at z = 0 and the scene at z > 0;
/// the normal is unit length and typically points toward the wall
/// (negative z component) for visible surfaces.
struct Surfel {
    std::array<double, 3> position{0.0, 0.0, 0.0};
    std::array<double, 3> normal{0.0, 0.0, -1.0};
    double albedo = 1.0;
};

}  // namespace nlos
