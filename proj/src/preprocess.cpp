#include "nlos/preprocess.hpp"

#include <stdexcept>

#include "nlos/parallel.hpp"

namespace nlos {

TransientVolume downsample_transient(const TransientVolume& tau, int spatial_factor,
                                     int temporal_factor) {
    const ScanGrid& g = tau.grid();
    if (spatial_factor < 1 || temporal_factor < 1)
        throw std::invalid_argument("downsample_transient: factors must be >= 1");
    if (g.scan_res % spatial_factor != 0)
        throw std::invalid_argument("downsample_transient: spatial factor does not divide scan_res");
    if (g.num_bins % temporal_factor != 0)
        throw std::invalid_argument("downsample_transient: temporal factor does not divide num_bins");

    ScanGrid out_grid = g;
    out_grid.scan_res = g.scan_res / spatial_factor;
    out_grid.num_bins = g.num_bins / temporal_factor;
    out_grid.bin_width = g.bin_width * temporal_factor;
    out_grid.validate();

    TransientVolume out(out_grid);
    const double inv_block = 1.0 / (static_cast<double>(spatial_factor) * spatial_factor * temporal_factor);
    parallel_for(0, out_grid.scan_res, [&](int ox) {
        for (int oy = 0; oy < out_grid.scan_res; ++oy) {
            for (int ot = 0; ot < out_grid.num_bins; ++ot) {
                double acc = 0.0;
                for (int dx = 0; dx < spatial_factor; ++dx)
                    for (int dy = 0; dy < spatial_factor; ++dy)
                        for (int dt = 0; dt < temporal_factor; ++dt)
                            acc += tau.at(ox * spatial_factor + dx, oy * spatial_factor + dy,
                                          ot * temporal_factor + dt);
                out.at(ox, oy, ot) = acc * inv_block;
            }
        }
    });
    return out;
}

}  // namespace nlos
