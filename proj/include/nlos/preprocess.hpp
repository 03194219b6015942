#pragma once

#include "nlos/volume.hpp"

namespace nlos {

/// Block-averages a transient cube by integer factors in space and time.
///
/// Each output bin is the arithmetic mean of the spatial_factor^2 *
/// temporal_factor input block. Grid fields rescale accordingly
/// (scan_res / spatial_factor, num_bins / temporal_factor, bin_width *
/// temporal_factor); depth_res is kept. Factors must divide the
/// corresponding dimensions exactly.
TransientVolume downsample_transient(const TransientVolume& tau, int spatial_factor,
                                     int temporal_factor);

}  // namespace nlos
