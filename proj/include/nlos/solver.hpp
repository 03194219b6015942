#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nlos/lct_operator.hpp"
#include "nlos/regularizer.hpp"
#include "nlos/volume.hpp"

namespace nlos {

enum class SolveMethod { ss, local_ss, l1, wiener };

SolveMethod parse_method(const std::string& name);
std::string method_name(SolveMethod m);

struct SolverConfig {
    SolveMethod method = SolveMethod::ss;
    double lambda = 0.0;        ///< fidelity/prior trade-off
    int max_iters = 100;
    double rel_tol = 1e-4;      ///< relative iterate-change stop threshold
    WindowSpec window{};        ///< SS window (L = 27, sigma = 0.5 defaults)
    double wiener_alpha = 0.1;  ///< Wiener signal-to-noise weight
    int lipschitz_iters = 30;   ///< power-iteration budget for the step size
    bool monotone_restart = true;
    bool nonneg_z = false;      ///< clamp the z component to >= 0 after each prox

    void validate() const;
};

/// Per-iteration objective trace of one solve. Row 0 is the initial iterate.
struct SolveReport {
    std::vector<double> fidelity;
    std::vector<double> penalty;
    std::vector<double> total;
    int iterations = 0;
    std::string stop_reason;
    double wall_time_s = 0.0;

    std::string to_csv() const;
};

/// Raised when a solve produces a non-finite objective.
struct SolveDivergedError : std::runtime_error {
    explicit SolveDivergedError(int iteration)
        : std::runtime_error("solver diverged at iteration " + std::to_string(iteration)),
          iteration(iteration) {}
    int iteration;
};

struct ObjectiveValue {
    double fidelity = 0.0;
    double penalty = 0.0;
    double total = 0.0;
};

/// Momentum sequence t_{k+1} = (1 + sqrt(1 + 4 t_k^2)) / 2, t_1 = 1.
inline double fista_momentum_next(double t) { return 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t)); }

/// Raw-measurement objective: 0.5 |H(rho) - tau|^2 plus the method's
/// weighted penalty. Evaluation utility only; see solve_objective for the
/// function the iterative solvers actually minimize.
ObjectiveValue objective(const DlctOperator& op, const DirectionalAlbedoVolume& rho,
                         const TransientVolume& tau, const SolverConfig& config);

/// Objective minimized by fista_reconstruct: the fidelity lives in the
/// attenuation-compensated domain, 0.5 |conv_forward(rho) -
/// compensated_measurement(tau)|^2, where the model is the plain cone
/// convolution and gradient steps are well conditioned. SolveReport rows
/// hold these values.
ObjectiveValue solve_objective(const DlctOperator& op, const DirectionalAlbedoVolume& rho,
                               const TransientVolume& tau, const SolverConfig& config);

/// Accelerated proximal-gradient solve of the regularized inverse problem
/// with the method's prox. Step size 1/L from the operator's cached power
/// iteration. With monotone_restart the objective trace is non-increasing:
/// a step that would raise it is rejected and the momentum restarted.
std::pair<DirectionalAlbedoVolume, SolveReport> fista_reconstruct(const DlctOperator& op,
                                                                  const TransientVolume& tau,
                                                                  const SolverConfig& config);

/// Closed-form Wiener-filtered baseline (no iterations).
std::pair<DirectionalAlbedoVolume, SolveReport> wiener_dlct_reconstruct(const DlctOperator& op,
                                                                        const TransientVolume& tau,
                                                                        const SolverConfig& config);

/// Dispatches on config.method.
std::pair<DirectionalAlbedoVolume, SolveReport> reconstruct(const DlctOperator& op,
                                                            const TransientVolume& tau,
                                                            const SolverConfig& config);

}  // namespace nlos
