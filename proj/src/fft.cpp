#include "nlos/fft.hpp"

#include <fftw3.h>

#include <mutex>
#include <stdexcept>

namespace nlos {

namespace {
// The FFTW planner is not thread safe; executing plans is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace

Fft3D::Fft3D(std::array<int, 3> shape) : shape_(shape), plan_fwd_(nullptr), plan_inv_(nullptr) {
    for (int n : shape_)
        if (n < 1) throw std::invalid_argument("Fft3D: shape entries must be >= 1");
    std::lock_guard<std::mutex> lock(planner_mutex());
    std::vector<double> rbuf(real_size());
    std::vector<std::complex<double>> cbuf(complex_size());
    // FFTW_UNALIGNED lets the plans run on plain vector storage later.
    plan_fwd_ = fftw_plan_dft_r2c_3d(shape_[0], shape_[1], shape_[2], rbuf.data(),
                                     reinterpret_cast<fftw_complex*>(cbuf.data()),
                                     FFTW_ESTIMATE | FFTW_UNALIGNED);
    plan_inv_ = fftw_plan_dft_c2r_3d(shape_[0], shape_[1], shape_[2],
                                     reinterpret_cast<fftw_complex*>(cbuf.data()), rbuf.data(),
                                     FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (!plan_fwd_ || !plan_inv_) throw std::runtime_error("Fft3D: FFTW plan creation failed");
}

Fft3D::~Fft3D() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    if (plan_fwd_) fftw_destroy_plan(static_cast<fftw_plan>(plan_fwd_));
    if (plan_inv_) fftw_destroy_plan(static_cast<fftw_plan>(plan_inv_));
}

std::size_t Fft3D::real_size() const {
    return static_cast<std::size_t>(shape_[0]) * shape_[1] * shape_[2];
}

std::size_t Fft3D::complex_size() const {
    return static_cast<std::size_t>(shape_[0]) * shape_[1] * (shape_[2] / 2 + 1);
}

void Fft3D::forward(const double* in, std::complex<double>* out) const {
    fftw_execute_dft_r2c(static_cast<fftw_plan>(plan_fwd_), const_cast<double*>(in),
                         reinterpret_cast<fftw_complex*>(out));
}

void Fft3D::inverse(std::complex<double>* in, double* out) const {
    fftw_execute_dft_c2r(static_cast<fftw_plan>(plan_inv_), reinterpret_cast<fftw_complex*>(in), out);
    const double scale = 1.0 / static_cast<double>(real_size());
    const std::size_t n = real_size();
    for (std::size_t i = 0; i < n; ++i) out[i] *= scale;
}

int Fft3D::good_size(int n) {
    if (n <= 1) return 1;
    for (int candidate = n;; ++candidate) {
        int r = candidate;
        for (int f : {2, 3, 5, 7})
            while (r % f == 0) r /= f;
        if (r == 1) return candidate;
    }
}

}  // namespace nlos
