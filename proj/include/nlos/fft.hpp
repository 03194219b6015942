#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <vector>

namespace nlos {

/// Real-to-complex 3D FFT pair for one fixed shape, backed by FFTW.
///
/// Plans are created with FFTW_ESTIMATE so the chosen algorithm (and thus
/// the exact floating-point result) is reproducible run to run. execute()
/// calls are thread safe on distinct buffers; planning is serialized
/// internally.
class Fft3D {
  public:
    explicit Fft3D(std::array<int, 3> shape);
    ~Fft3D();
    Fft3D(const Fft3D&) = delete;
    Fft3D& operator=(const Fft3D&) = delete;

    const std::array<int, 3>& shape() const { return shape_; }
    /// Number of real samples.
    std::size_t real_size() const;
    /// Number of complex bins in the half spectrum (last axis truncated).
    std::size_t complex_size() const;

    /// in: real_size() doubles, out: complex_size() bins. Unnormalized.
    void forward(const double* in, std::complex<double>* out) const;
    /// Inverse transform; divides by the element count so
    /// inverse(forward(x)) == x up to rounding. Destroys `in`.
    void inverse(std::complex<double>* in, double* out) const;

    /// Smallest size >= n whose factors are all in {2, 3, 5, 7}.
    static int good_size(int n);

  private:
    std::array<int, 3> shape_;
    void* plan_fwd_;
    void* plan_inv_;
};

}  // namespace nlos
