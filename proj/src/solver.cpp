#include "nlos/solver.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

namespace nlos {

SolveMethod parse_method(const std::string& name) {
    if (name == "ss") return SolveMethod::ss;
    if (name == "local-ss") return SolveMethod::local_ss;
    if (name == "l1") return SolveMethod::l1;
    if (name == "wiener") return SolveMethod::wiener;
    throw std::invalid_argument("unknown method '" + name + "' (expected ss, local-ss, l1, wiener)");
}

std::string method_name(SolveMethod m) {
    switch (m) {
        case SolveMethod::ss: return "ss";
        case SolveMethod::local_ss: return "local-ss";
        case SolveMethod::l1: return "l1";
        case SolveMethod::wiener: return "wiener";
    }
    return "?";
}

void SolverConfig::validate() const {
    if (lambda < 0.0) throw std::invalid_argument("SolverConfig: lambda must be >= 0");
    if (max_iters < 1) throw std::invalid_argument("SolverConfig: max_iters must be >= 1");
    if (rel_tol < 0.0) throw std::invalid_argument("SolverConfig: rel_tol must be >= 0");
    if (!(wiener_alpha > 0.0)) throw std::invalid_argument("SolverConfig: wiener_alpha must be > 0");
    if (lipschitz_iters < 1) throw std::invalid_argument("SolverConfig: lipschitz_iters must be >= 1");
    window.validate();
}

std::string SolveReport::to_csv() const {
    std::string out = "iteration,fidelity,penalty,total\n";
    char buf[160];
    for (std::size_t i = 0; i < total.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g\n", i, fidelity[i], penalty[i],
                      total[i]);
        out += buf;
    }
    return out;
}

namespace {

double penalty_value(const DirectionalAlbedoVolume& rho, const SolverConfig& config) {
    if (config.lambda == 0.0) return 0.0;
    switch (config.method) {
        case SolveMethod::ss: return config.lambda * ss_value(rho, config.window);
        case SolveMethod::local_ss: return config.lambda * local_ss_value(rho);
        case SolveMethod::l1: return config.lambda * l1_value(rho);
        case SolveMethod::wiener: return 0.0;
    }
    return 0.0;
}

DirectionalAlbedoVolume apply_prox(const DirectionalAlbedoVolume& rho, double theta,
                                   const SolverConfig& config) {
    switch (config.method) {
        case SolveMethod::ss: return prox_ss(rho, theta, config.window);
        case SolveMethod::local_ss: return prox_local_ss(rho, theta);
        case SolveMethod::l1: return prox_l1(rho, theta);
        case SolveMethod::wiener: break;
    }
    throw std::logic_error("apply_prox: wiener has no prox");
}

double half_sq_norm_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return 0.5 * acc;
}

bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace

ObjectiveValue objective(const DlctOperator& op, const DirectionalAlbedoVolume& rho,
                         const TransientVolume& tau, const SolverConfig& config) {
    if (rho.grid() != op.grid() || tau.grid() != op.grid())
        throw std::invalid_argument("objective: grid mismatch");
    TransientVolume model = op.forward(rho);
    ObjectiveValue v;
    v.fidelity = half_sq_norm_diff(model.data(), tau.data());
    v.penalty = penalty_value(rho, config);
    v.total = v.fidelity + v.penalty;
    return v;
}

ObjectiveValue solve_objective(const DlctOperator& op, const DirectionalAlbedoVolume& rho,
                               const TransientVolume& tau, const SolverConfig& config) {
    if (rho.grid() != op.grid() || tau.grid() != op.grid())
        throw std::invalid_argument("solve_objective: grid mismatch");
    const std::vector<double> model = op.conv_forward(rho);
    const std::vector<double> data = op.compensated_measurement(tau);
    ObjectiveValue v;
    v.fidelity = half_sq_norm_diff(model, data);
    v.penalty = penalty_value(rho, config);
    v.total = v.fidelity + v.penalty;
    return v;
}

std::pair<DirectionalAlbedoVolume, SolveReport> fista_reconstruct(const DlctOperator& op,
                                                                  const TransientVolume& tau,
                                                                  const SolverConfig& config) {
    config.validate();
    if (config.method == SolveMethod::wiener)
        throw std::invalid_argument("fista_reconstruct: method wiener is closed form");
    if (tau.grid() != op.grid()) throw std::invalid_argument("fista_reconstruct: grid mismatch");

    const auto t_start = std::chrono::steady_clock::now();
    const double lip = op.conv_lipschitz(config.lipschitz_iters);
    const double step = lip > 0.0 ? 1.0 / lip : 1.0;
    const double theta = config.lambda * step;

    const std::size_t dn = op.domain_size();
    const std::size_t rn = op.conv_range_size();
    const ScanGrid& grid = op.grid();
    const std::vector<double> data = op.compensated_measurement(tau);

    // Accepted iterate x with its model B(x); the model of the momentum
    // point y is formed by linear combination, so each iteration costs one
    // forward and one adjoint apply plus the objective forward.
    DirectionalAlbedoVolume x(grid);
    std::vector<double> x_prev(dn, 0.0);
    std::vector<double> bx(rn, 0.0), bx_prev(rn, 0.0);
    std::vector<double> y(dn, 0.0), by(rn, 0.0);

    SolveReport report;
    ObjectiveValue obj;
    obj.fidelity = half_sq_norm_diff(bx, data);
    obj.penalty = penalty_value(x, config);
    obj.total = obj.fidelity + obj.penalty;
    report.fidelity.push_back(obj.fidelity);
    report.penalty.push_back(obj.penalty);
    report.total.push_back(obj.total);

    double t_momentum = 1.0;
    int iterations = 0;
    std::string stop_reason = "max_iters";

    std::vector<double> resid(rn);
    for (int k = 1; k <= config.max_iters; ++k) {
        iterations = k;
        // gradient of the fidelity term at y
        for (std::size_t i = 0; i < rn; ++i) resid[i] = by[i] - data[i];
        if (!all_finite(resid)) throw SolveDivergedError(k);
        DirectionalAlbedoVolume grad = op.conv_adjoint(resid);

        std::vector<double> z(dn);
        const auto& yv = y;
        const auto& gv = grad.data();
        for (std::size_t i = 0; i < dn; ++i) z[i] = yv[i] - step * gv[i];
        if (!all_finite(z)) throw SolveDivergedError(k);
        DirectionalAlbedoVolume zvol =
            apply_prox(DirectionalAlbedoVolume(grid, std::move(z)), theta, config);
        if (config.nonneg_z) {
            for (int ix = 0; ix < grid.scan_res; ++ix)
                for (int iy = 0; iy < grid.scan_res; ++iy)
                    for (int iz = 0; iz < grid.depth_res; ++iz)
                        zvol.at(2, ix, iy, iz) = std::max(0.0, zvol.at(2, ix, iy, iz));
        }

        const std::vector<double> bz = op.conv_forward(zvol);
        ObjectiveValue obj_z;
        obj_z.fidelity = half_sq_norm_diff(bz, data);
        obj_z.penalty = penalty_value(zvol, config);
        obj_z.total = obj_z.fidelity + obj_z.penalty;
        if (!std::isfinite(obj_z.total)) throw SolveDivergedError(k);

        if (config.monotone_restart && obj_z.total > obj.total) {
            // Reject the step and restart the momentum from the current
            // iterate; the next step is a plain proximal-gradient descent.
            t_momentum = 1.0;
            y = x.data();
            by = bx;
            report.fidelity.push_back(obj.fidelity);
            report.penalty.push_back(obj.penalty);
            report.total.push_back(obj.total);
            continue;
        }

        // relative iterate change against the previous accepted iterate
        double diff2 = 0.0, base2 = 0.0;
        for (std::size_t i = 0; i < dn; ++i) {
            const double d = zvol.data()[i] - x.data()[i];
            diff2 += d * d;
            base2 += x.data()[i] * x.data()[i];
        }

        x_prev = x.data();
        bx_prev = bx;
        x = std::move(zvol);
        bx = bz;
        obj = obj_z;
        report.fidelity.push_back(obj.fidelity);
        report.penalty.push_back(obj.penalty);
        report.total.push_back(obj.total);

        const double t_next = fista_momentum_next(t_momentum);
        const double beta = (t_momentum - 1.0) / t_next;
        t_momentum = t_next;
        for (std::size_t i = 0; i < dn; ++i)
            y[i] = x.data()[i] + beta * (x.data()[i] - x_prev[i]);
        for (std::size_t i = 0; i < rn; ++i) by[i] = bx[i] + beta * (bx[i] - bx_prev[i]);

        const double rel_change = std::sqrt(diff2) / std::max(std::sqrt(base2), 1e-300);
        if (rel_change < config.rel_tol) {
            stop_reason = "converged";
            break;
        }
    }

    report.iterations = iterations;
    report.stop_reason = stop_reason;
    report.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return {std::move(x), std::move(report)};
}

std::pair<DirectionalAlbedoVolume, SolveReport> wiener_dlct_reconstruct(const DlctOperator& op,
                                                                        const TransientVolume& tau,
                                                                        const SolverConfig& config) {
    config.validate();
    const auto t_start = std::chrono::steady_clock::now();
    DirectionalAlbedoVolume rho = op.wiener_inverse(tau, config.wiener_alpha);
    SolveReport report;
    report.iterations = 0;
    report.stop_reason = "closed-form";
    report.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return {std::move(rho), std::move(report)};
}

std::pair<DirectionalAlbedoVolume, SolveReport> reconstruct(const DlctOperator& op,
                                                            const TransientVolume& tau,
                                                            const SolverConfig& config) {
    if (config.method == SolveMethod::wiener) return wiener_dlct_reconstruct(op, tau, config);
    return fista_reconstruct(op, tau, config);
}

}  // namespace nlos
