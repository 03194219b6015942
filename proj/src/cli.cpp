#include "nlos/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>

#include "nlos/image_io.hpp"
#include "nlos/lct_operator.hpp"
#include "nlos/metrics.hpp"
#include "nlos/parallel.hpp"
#include "nlos/preprocess.hpp"
#include "nlos/regularizer.hpp"
#include "nlos/rng.hpp"
#include "nlos/scene.hpp"
#include "nlos/solver.hpp"
#include "nlos/volume_io.hpp"

namespace nlos::cli {

namespace fs = std::filesystem;

namespace {

std::string fmt_g(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_short(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

void write_run_config(const fs::path& dir, const std::map<std::string, std::string>& config) {
    std::ofstream os(dir / "run_config.txt", std::ios::binary);
    if (!os) throw std::runtime_error("cannot write run config in " + dir.string());
    for (const auto& [k, v] : config) os << k << "=" << v << "\n";
}

// --- grid flags -----------------------------------------------------------

struct GridFlags {
    double wall = 0.6;
    int res = 32;
    int bins = 64;
    double bin_width = 0.025;
    int depth_res = 0;  // 0 = auto
    double light_speed = 1.0;

    ScanGrid to_grid() const {
        const int z = depth_res > 0 ? depth_res : std::min(bins, 128);
        return ScanGrid(wall, res, bin_width, bins, z, light_speed);
    }
    void add_to(CLI::App* app) {
        app->add_option("--wall", wall, "scan wall side, meters")->capture_default_str();
        app->add_option("--res", res, "scan points per side")->capture_default_str();
        app->add_option("--bins", bins, "time bins")->capture_default_str();
        app->add_option("--bin-width", bin_width, "time bin as optical path length, meters")
            ->capture_default_str();
        app->add_option("--depth-res", depth_res, "depth voxels (0 = min(bins, 128))")
            ->capture_default_str();
        app->add_option("--light-speed", light_speed, "meters per second")->capture_default_str();
    }
    void record(std::map<std::string, std::string>& cfg) const {
        const ScanGrid g = to_grid();
        cfg["grid.wall_width_m"] = fmt_g(g.wall_width_m);
        cfg["grid.scan_res"] = std::to_string(g.scan_res);
        cfg["grid.num_bins"] = std::to_string(g.num_bins);
        cfg["grid.bin_width"] = fmt_g(g.bin_width);
        cfg["grid.depth_res"] = std::to_string(g.depth_res);
        cfg["grid.light_speed"] = fmt_g(g.light_speed);
    }
};

// --- noise flag -----------------------------------------------------------

struct NoiseFlags {
    std::string spec_text = "none";
    std::uint64_t seed = 0;

    bool enabled() const { return spec_text != "none"; }

    NoiseSpec parse() const {
        NoiseSpec spec;
        spec.seed = seed;
        std::string rest = spec_text;
        while (!rest.empty()) {
            const auto comma = rest.find(',');
            const std::string part = rest.substr(0, comma);
            rest = comma == std::string::npos ? "" : rest.substr(comma + 1);
            if (part == "poisson" || part == "gauss") continue;
            const auto eq = part.find('=');
            if (eq == std::string::npos)
                throw CLI::ValidationError("--noise", "bad component '" + part + "'");
            const std::string key = part.substr(0, eq);
            const double value = std::stod(part.substr(eq + 1));
            if (key == "poisson:eta" || key == "eta")
                spec.peak_photons = value;
            else if (key == "gauss:sigma" || key == "sigma")
                spec.gaussian_sigma = value;
            else
                throw CLI::ValidationError("--noise", "unknown key '" + key + "'");
        }
        spec.validate();
        return spec;
    }
};

// --- solver flags ---------------------------------------------------------

struct SolverFlags {
    std::string method = "ss";
    double lambda = 1e-2;
    int iters = 100;
    double rel_tol = 1e-4;
    int window = 27;
    double sigma = 0.5;
    double alpha = 0.1;
    int lip_iters = 30;
    bool no_restart = false;
    bool nonneg_z = false;
    int attenuation_p = 4;
    int shell_half_width = 1;
    bool record_timing = false;

    void add_to(CLI::App* app) {
        app->add_option("--method", method, "ss | local-ss | l1 | wiener")->capture_default_str();
        app->add_option("--lambda", lambda, "regularization weight")->capture_default_str();
        app->add_option("--iters", iters, "iteration budget")->capture_default_str();
        app->add_option("--rel-tol", rel_tol, "relative change stop threshold")
            ->capture_default_str();
        app->add_option("--window", window, "SS window voxels L (odd cube)")->capture_default_str();
        app->add_option("--sigma", sigma, "SS window Gaussian width, voxels")->capture_default_str();
        app->add_option("--alpha", alpha, "Wiener signal-to-noise weight")->capture_default_str();
        app->add_option("--lip-iters", lip_iters, "power iterations for the step size")
            ->capture_default_str();
        app->add_flag("--no-restart", no_restart, "disable the monotone restart");
        app->add_flag("--nonneg-z", nonneg_z, "clamp the z component to >= 0 after each prox");
        app->add_option("--attenuation-p", attenuation_p, "attenuation exponent p in v^(p/2)")
            ->capture_default_str();
        app->add_option("--shell-half-width", shell_half_width, "cone shell footprint, u bins")
            ->capture_default_str();
        app->add_flag("--record-timing", record_timing,
                      "store the solve wall time in the volume metadata");
    }

    SolverConfig to_config() const {
        SolverConfig cfg;
        cfg.method = parse_method(method);
        cfg.lambda = lambda;
        cfg.max_iters = iters;
        cfg.rel_tol = rel_tol;
        cfg.window = WindowSpec{window, sigma};
        cfg.wiener_alpha = alpha;
        cfg.lipschitz_iters = lip_iters;
        cfg.monotone_restart = !no_restart;
        cfg.nonneg_z = nonneg_z;
        cfg.validate();
        return cfg;
    }
    OperatorOptions to_operator_options() const { return {attenuation_p, shell_half_width}; }

    void record(std::map<std::string, std::string>& cfg) const {
        cfg["solver.method"] = method;
        cfg["solver.lambda"] = fmt_g(lambda);
        cfg["solver.iters"] = std::to_string(iters);
        cfg["solver.rel_tol"] = fmt_g(rel_tol);
        cfg["solver.window"] = std::to_string(window);
        cfg["solver.sigma"] = fmt_g(sigma);
        cfg["solver.alpha"] = fmt_g(alpha);
        cfg["solver.lip_iters"] = std::to_string(lip_iters);
        cfg["solver.monotone_restart"] = no_restart ? "0" : "1";
        cfg["solver.nonneg_z"] = nonneg_z ? "1" : "0";
        cfg["operator.attenuation_p"] = std::to_string(attenuation_p);
        cfg["operator.shell_half_width"] = std::to_string(shell_half_width);
    }
};

// --- evaluation helpers ----------------------------------------------------

struct EvalRow {
    std::string scene = "?";
    std::string method = "?";
    double lambda = 0.0;
    double psnr_db = 0.0;
    double ssim_val = 0.0;
    double normal_median_deg = std::nan("");
    double depth_rmse_m = std::nan("");
    double runtime_s = 0.0;
    std::optional<double> vol_psnr;
};

EvalRow evaluate_pair(const DirectionalAlbedoVolume& recon, const DirectionalAlbedoVolume& truth,
                      double mask_threshold, bool with_volume_psnr) {
    if (recon.grid().scan_res != truth.grid().scan_res ||
        recon.grid().depth_res != truth.grid().depth_res)
        throw std::invalid_argument("evaluate: recon and truth shapes differ");
    const ReconMaps rm = extract_maps(recon, mask_threshold);
    const ReconMaps tm = extract_maps(truth, mask_threshold);
    EvalRow row;
    row.psnr_db = psnr(rm.albedo, tm.albedo);
    row.ssim_val = ssim(rm.albedo, tm.albedo, rm.side());
    try {
        row.normal_median_deg = normal_angle_error(rm, tm).median_deg;
        row.depth_rmse_m = depth_rmse(rm, tm);
    } catch (const std::runtime_error&) {
        // empty intersection mask: keep NaN markers
    }
    if (with_volume_psnr) row.vol_psnr = volume_psnr(recon, truth);
    return row;
}

std::string eval_header(bool with_volume_psnr) {
    std::string h = "scene,method,lambda,psnr,ssim,normal_median_deg,depth_rmse_m,runtime_s";
    if (with_volume_psnr) h += ",volume_psnr";
    return h + "\n";
}

std::string eval_row_csv(const EvalRow& r) {
    std::string line = r.scene + "," + r.method + "," + fmt_g(r.lambda) + "," + fmt_g(r.psnr_db) +
                       "," + fmt_g(r.ssim_val) + "," + fmt_g(r.normal_median_deg) + "," +
                       fmt_g(r.depth_rmse_m) + "," + fmt_g(r.runtime_s);
    if (r.vol_psnr) line += "," + fmt_g(*r.vol_psnr);
    return line + "\n";
}

// --- presets ---------------------------------------------------------------

struct Preset {
    GridFlags grid;
    std::string scene;
    SceneParams params;
    std::string noise;
};

std::optional<Preset> lookup_preset(const std::string& name) {
    // Desk-scale analogs of the published experiment geometries.
    if (name == "t-paper") {
        Preset p;
        p.grid = {0.6, 64, 512, 0.0025, 128, 1.0};
        p.scene = "t-plane";
        p.params.depth = 0.5;
        p.params.size = 0.6;
        p.noise = "none";
        return p;
    }
    if (name == "t-desk") {
        Preset p;
        p.grid = {0.6, 32, 64, 0.025, 64, 1.0};
        p.scene = "t-plane";
        p.params.depth = 0.4;
        p.params.size = 0.55;
        p.noise = "none";
        return p;
    }
    if (name == "bunny-desk") {
        Preset p;
        p.grid = {0.6, 32, 64, 0.025, 64, 1.0};
        p.scene = "sphere-cap";
        p.params.depth = 0.35;
        p.params.size = 0.5;
        p.params.radius = 0.3;
        p.noise = "none";
        return p;
    }
    if (name == "dragon-hi" || name == "dragon-lo") {
        // 30:1 exposure ratio between the two variants
        Preset p;
        p.grid = {0.6, 32, 64, 0.025, 64, 1.0};
        p.scene = "sphere-cap";
        p.params.depth = 0.35;
        p.params.size = 0.5;
        p.params.radius = 0.3;
        p.noise = name == "dragon-hi" ? "poisson:eta=150,gauss:sigma=1" : "poisson:eta=5,gauss:sigma=1";
        return p;
    }
    return std::nullopt;
}

// --- subcommands ------------------------------------------------------------

int cmd_simulate(CLI::App* app, const GridFlags& grid_flags_in, const std::string& preset_name,
                 const std::string& scene_name_in, const SceneParams& params_in,
                 const NoiseFlags& noise_in, const std::string& out_dir, int downsample_spatial,
                 int downsample_temporal, const std::string& downsample_order, bool no_clamp) {
    GridFlags grid_flags = grid_flags_in;
    std::string scene_name = scene_name_in;
    SceneParams params = params_in;
    NoiseFlags noise = noise_in;

    if (!preset_name.empty()) {
        auto preset = lookup_preset(preset_name);
        if (!preset) throw CLI::ValidationError("--preset", "unknown preset '" + preset_name + "'");
        // explicit flags win over the preset bundle
        auto keep = [&](const char* flag) { return app->count(flag) > 0; };
        if (!keep("--wall")) grid_flags.wall = preset->grid.wall;
        if (!keep("--res")) grid_flags.res = preset->grid.res;
        if (!keep("--bins")) grid_flags.bins = preset->grid.bins;
        if (!keep("--bin-width")) grid_flags.bin_width = preset->grid.bin_width;
        if (!keep("--depth-res")) grid_flags.depth_res = preset->grid.depth_res;
        if (!keep("--scene")) scene_name = preset->scene;
        if (!keep("--depth")) params.depth = preset->params.depth;
        if (!keep("--size")) params.size = preset->params.size;
        if (!keep("--radius")) params.radius = preset->params.radius;
        if (!keep("--noise")) noise.spec_text = preset->noise;
    }

    const ScanGrid grid = grid_flags.to_grid();
    const SurfelScene scene = build_scene(scene_name, grid, params);

    fs::create_directories(out_dir);
    TransientVolume clean = render_transients(scene, grid, !no_clamp);

    TransientVolume meas = clean;
    const bool downsampling = downsample_spatial > 1 || downsample_temporal > 1;
    if (noise.enabled() && downsample_order == "after-noise") meas = apply_noise(meas, noise.parse());
    if (downsampling) meas = downsample_transient(meas, downsample_spatial, downsample_temporal);
    if (noise.enabled() && downsample_order == "before-noise") meas = apply_noise(meas, noise.parse());

    const ScanGrid out_grid = meas.grid();
    DirectionalAlbedoVolume truth = rasterize_scene(scene, out_grid);

    VolumeMeta meas_meta = VolumeMeta::for_grid(out_grid, "nlos simulate " + scene_name);
    meas_meta.set("scene", scene_name);
    if (noise.enabled()) {
        const NoiseSpec spec = noise.parse();
        meas_meta.set_double("noise_eta", spec.peak_photons);
        meas_meta.set_double("noise_gauss_sigma", spec.gaussian_sigma);
        meas_meta.set_int("seed", static_cast<long long>(spec.seed));
    }
    write_volume((fs::path(out_dir) / "meas.nlv").string(), meas, meas_meta);

    VolumeMeta truth_meta = VolumeMeta::for_grid(out_grid, "nlos simulate " + scene_name + " truth");
    truth_meta.set("scene", scene_name);
    write_volume((fs::path(out_dir) / "truth.nlv").string(), truth, truth_meta);

    std::ofstream scene_csv(fs::path(out_dir) / "scene.csv", std::ios::binary);
    scene_csv << scene.to_csv();

    std::map<std::string, std::string> cfg;
    grid_flags.record(cfg);
    cfg["scene.name"] = scene_name;
    cfg["scene.depth"] = fmt_g(params.depth);
    cfg["scene.size"] = fmt_g(params.size);
    cfg["scene.angle_deg"] = fmt_g(params.angle_deg);
    cfg["scene.radius"] = fmt_g(params.radius);
    cfg["scene.dots"] = std::to_string(params.dots);
    cfg["scene.albedo"] = fmt_g(params.albedo);
    cfg["noise.spec"] = noise.spec_text;
    cfg["noise.seed"] = std::to_string(noise.seed);
    cfg["render.clamp_cosine"] = no_clamp ? "0" : "1";
    cfg["downsample.spatial"] = std::to_string(downsample_spatial);
    cfg["downsample.temporal"] = std::to_string(downsample_temporal);
    cfg["downsample.order"] = downsample_order;
    if (!preset_name.empty()) cfg["preset"] = preset_name;
    write_run_config(out_dir, cfg);

    std::cout << "wrote " << out_dir << "/meas.nlv (" << out_grid.scan_res << "x"
              << out_grid.scan_res << "x" << out_grid.num_bins << "), truth.nlv, scene.csv\n";
    return 0;
}

int cmd_reconstruct(const std::string& in_path, const std::string& out_dir,
                    const SolverFlags& flags) {
    const TransientVolume meas = read_transient(in_path);
    const SolverConfig config = flags.to_config();
    DlctOperator op(meas.grid(), flags.to_operator_options());

    auto [rho, report] = reconstruct(op, meas, config);

    fs::create_directories(out_dir);
    VolumeMeta meta = VolumeMeta::for_grid(meas.grid(), "nlos reconstruct " + flags.method);
    meta.set("method", flags.method);
    meta.set_double("lambda", config.lambda);
    meta.set_double("wiener_alpha", config.wiener_alpha);
    meta.set_int("window", config.window.window_voxels);
    meta.set_double("sigma", config.window.sigma);
    meta.set_int("iterations", report.iterations);
    meta.set("stop_reason", report.stop_reason);
    if (flags.record_timing) meta.set_double("solve_runtime_s", report.wall_time_s);
    write_volume((fs::path(out_dir) / "recon.nlv").string(), rho, meta);

    std::ofstream report_csv(fs::path(out_dir) / "report.csv", std::ios::binary);
    report_csv << report.to_csv();

    std::map<std::string, std::string> cfg;
    flags.record(cfg);
    cfg["input"] = in_path;
    write_run_config(out_dir, cfg);

    std::cout << "wrote " << out_dir << "/recon.nlv (" << report.iterations << " iterations, "
              << report.stop_reason << ")\n";
    return 0;
}

int cmd_render(const std::string& in_path, const std::string& out_dir, double mask_threshold) {
    const DirectionalAlbedoVolume rho = read_directional(in_path);
    const ReconMaps maps = extract_maps(rho, mask_threshold);
    fs::create_directories(out_dir);
    write_map_images(maps, out_dir);
    std::map<std::string, std::string> cfg;
    cfg["input"] = in_path;
    cfg["render.mask_threshold"] = fmt_g(mask_threshold);
    write_run_config(out_dir, cfg);
    std::cout << "wrote " << out_dir << "/albedo.pgm, normal.ppm, depth.pgm\n";
    return 0;
}

int cmd_evaluate(const std::string& recon_path, const std::string& truth_path,
                 const std::string& out_csv, std::string scene_label, std::string method_label,
                 double lambda_label, bool have_lambda, double mask_threshold,
                 bool with_volume_psnr) {
    auto [recon_any, recon_meta] = read_volume(recon_path);
    if (!std::holds_alternative<DirectionalAlbedoVolume>(recon_any))
        throw std::invalid_argument("evaluate: recon must be a directional volume");
    const auto& recon = std::get<DirectionalAlbedoVolume>(recon_any);
    auto [truth_any, truth_meta] = read_volume(truth_path);
    if (!std::holds_alternative<DirectionalAlbedoVolume>(truth_any))
        throw std::invalid_argument("evaluate: truth must be a directional volume");
    const auto& truth = std::get<DirectionalAlbedoVolume>(truth_any);

    EvalRow row = evaluate_pair(recon, truth, mask_threshold, with_volume_psnr);
    row.scene = !scene_label.empty() ? scene_label
                : truth_meta.has("scene") ? truth_meta.get("scene")
                                          : "?";
    row.method = !method_label.empty() ? method_label
                 : recon_meta.has("method") ? recon_meta.get("method")
                                            : "?";
    row.lambda = have_lambda ? lambda_label
                 : recon_meta.has("lambda") ? recon_meta.get_double("lambda")
                                            : 0.0;
    row.runtime_s = recon_meta.has("solve_runtime_s") ? recon_meta.get_double("solve_runtime_s") : 0.0;

    const bool fresh = !fs::exists(out_csv);
    std::ofstream os(out_csv, std::ios::binary | std::ios::app);
    if (!os) throw std::runtime_error("cannot open for write: " + out_csv);
    if (fresh) os << eval_header(with_volume_psnr);
    os << eval_row_csv(row);

    std::cout << "psnr=" << fmt_short(row.psnr_db) << " dB, ssim=" << fmt_short(row.ssim_val)
              << ", normal_median=" << fmt_short(row.normal_median_deg)
              << " deg, depth_rmse=" << fmt_short(row.depth_rmse_m) << " m\n";
    return 0;
}

int cmd_sweep(const std::string& in_path, const std::string& truth_path, const std::string& out_dir,
              const SolverFlags& flags, double lambda_min, double lambda_max, int lambda_count,
              const std::string& lambdas_csv, double mask_threshold, bool keep_volumes) {
    std::vector<double> lambdas;
    if (!lambdas_csv.empty()) {
        std::string rest = lambdas_csv;
        while (!rest.empty()) {
            const auto comma = rest.find(',');
            lambdas.push_back(std::stod(rest.substr(0, comma)));
            rest = comma == std::string::npos ? "" : rest.substr(comma + 1);
        }
    } else {
        if (lambda_count < 1) throw CLI::ValidationError("--lambda-count", "must be >= 1");
        if (!(lambda_min > 0.0) || !(lambda_max >= lambda_min))
            throw CLI::ValidationError("--lambda-min/--lambda-max", "need 0 < min <= max");
        for (int i = 0; i < lambda_count; ++i) {
            const double f = lambda_count == 1
                                 ? 0.0
                                 : static_cast<double>(i) / (lambda_count - 1);
            lambdas.push_back(lambda_min * std::pow(lambda_max / lambda_min, f));
        }
    }

    const TransientVolume meas = read_transient(in_path);
    const DirectionalAlbedoVolume truth = read_directional(truth_path);
    DlctOperator op(meas.grid(), flags.to_operator_options());

    fs::create_directories(out_dir);
    std::string csv = eval_header(false);
    double best_psnr = -std::numeric_limits<double>::infinity();
    double best_lambda = lambdas.front();

    for (double lambda : lambdas) {
        SolverConfig config = flags.to_config();
        config.lambda = lambda;
        if (config.method == SolveMethod::wiener) config.wiener_alpha = lambda;
        auto [rho, report] = reconstruct(op, meas, config);
        EvalRow row = evaluate_pair(rho, truth, mask_threshold, false);
        row.scene = "sweep";
        row.method = flags.method;
        row.lambda = lambda;
        csv += eval_row_csv(row);
        if (row.psnr_db > best_psnr) {
            best_psnr = row.psnr_db;
            best_lambda = lambda;
        }
        if (keep_volumes) {
            VolumeMeta meta = VolumeMeta::for_grid(meas.grid(), "nlos sweep " + flags.method);
            meta.set("method", flags.method);
            meta.set_double("lambda", lambda);
            write_volume((fs::path(out_dir) / ("recon_lambda_" + fmt_short(lambda) + ".nlv")).string(),
                         rho, meta);
        }
        std::cout << "lambda=" << fmt_short(lambda) << " psnr=" << fmt_short(row.psnr_db)
                  << " ssim=" << fmt_short(row.ssim_val) << "\n";
    }

    std::ofstream os(fs::path(out_dir) / "sweep.csv", std::ios::binary);
    os << csv;
    std::map<std::string, std::string> cfg;
    flags.record(cfg);
    cfg["input"] = in_path;
    cfg["truth"] = truth_path;
    write_run_config(out_dir, cfg);
    std::cout << "best lambda " << fmt_short(best_lambda) << " (psnr " << fmt_short(best_psnr)
              << " dB); wrote " << out_dir << "/sweep.csv\n";
    return 0;
}

// One-sided Jacobi SVD of the 3-row patch matrix, used as the built-in
// check against the Gram-eigendecomposition route.
std::array<double, 3> onesided_jacobi_singular_values(const PatchMatrix& p) {
    // rows of p as three vectors of length cols
    std::array<std::vector<double>, 3> rows;
    for (int r = 0; r < 3; ++r) {
        rows[r].resize(p.cols);
        for (int l = 0; l < p.cols; ++l) rows[r][l] = p.at(r, l);
    }
    auto dot = [&](int i, int j) {
        double acc = 0.0;
        for (int l = 0; l < p.cols; ++l) acc += rows[i][l] * rows[j][l];
        return acc;
    };
    for (int sweep = 0; sweep < 60; ++sweep) {
        double off = 0.0;
        for (int i = 0; i < 3; ++i)
            for (int j = i + 1; j < 3; ++j) {
                const double aij = dot(i, j);
                off += aij * aij;
                if (aij == 0.0) continue;
                const double aii = dot(i, i), ajj = dot(j, j);
                const double zeta = (ajj - aii) / (2.0 * aij);
                const double t = (zeta >= 0 ? 1.0 : -1.0) /
                                 (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (int l = 0; l < p.cols; ++l) {
                    const double vi = rows[i][l], vj = rows[j][l];
                    rows[i][l] = c * vi - s * vj;
                    rows[j][l] = s * vi + c * vj;
                }
            }
        if (off < 1e-30) break;
    }
    std::array<double, 3> sv{std::sqrt(dot(0, 0)), std::sqrt(dot(1, 1)), std::sqrt(dot(2, 2))};
    std::sort(sv.begin(), sv.end(), std::greater<double>());
    return sv;
}

int cmd_selftest() {
    struct Check {
        std::string name;
        double measured;
        double tolerance;
        bool pass;
    };
    std::vector<Check> checks;
    auto add = [&](const std::string& name, double measured, double tol) {
        checks.push_back({name, measured, tol, measured <= tol});
    };

    // adjoint identity on a small grid
    {
        ScanGrid grid(0.6, 8, 0.05, 16, 8, 1.0);
        DlctOperator op(grid);
        CounterRng rng(0x5e1f7e57);
        double worst = 0.0;
        for (int trial = 0; trial < 5; ++trial) {
            DirectionalAlbedoVolume rho(grid);
            for (auto& v : rho.mutable_data()) v = rng.normal();
            TransientVolume tau(grid);
            for (auto& v : tau.mutable_data()) v = rng.normal();
            TransientVolume h_rho = op.forward(rho);
            DirectionalAlbedoVolume ht_tau = op.adjoint(tau);
            double lhs = 0.0, rhs = 0.0, na = 0.0, nb = 0.0, nc = 0.0, nd = 0.0;
            for (std::size_t i = 0; i < h_rho.size(); ++i) {
                lhs += h_rho.data()[i] * tau.data()[i];
                na += h_rho.data()[i] * h_rho.data()[i];
                nb += tau.data()[i] * tau.data()[i];
            }
            for (std::size_t i = 0; i < rho.size(); ++i) {
                rhs += rho.data()[i] * ht_tau.data()[i];
                nc += rho.data()[i] * rho.data()[i];
                nd += ht_tau.data()[i] * ht_tau.data()[i];
            }
            const double scale = std::sqrt(na * nb) + std::sqrt(nc * nd);
            worst = std::max(worst, std::fabs(lhs - rhs) / scale);
        }
        add("adjoint identity (8x8x16, 5 pairs)", worst, 1e-6);
    }

    // FFT path vs direct convolution
    {
        ScanGrid grid(0.6, 8, 0.05, 16, 8, 1.0);
        DlctOperator op(grid);
        CounterRng rng(0xc0ffee);
        double worst = 0.0;
        for (int trial = 0; trial < 3; ++trial) {
            DirectionalAlbedoVolume rho(grid);
            for (auto& v : rho.mutable_data()) v = rng.normal();
            TransientVolume fft_path = op.forward(rho);
            TransientVolume direct = discrete_conv_oracle(rho, op.kernels(), op.options());
            double diff = 0.0, base = 0.0;
            for (std::size_t i = 0; i < fft_path.size(); ++i) {
                const double d = fft_path.data()[i] - direct.data()[i];
                diff += d * d;
                base += direct.data()[i] * direct.data()[i];
            }
            worst = std::max(worst, std::sqrt(diff / std::max(base, 1e-300)));
        }
        add("fft vs direct convolution (8x8x16)", worst, 1e-10);
    }

    // SVT singular values vs the one-sided Jacobi SVD
    {
        CounterRng rng(0x51d5);
        double worst = 0.0;
        const double theta = 0.7;
        for (int trial = 0; trial < 200; ++trial) {
            PatchMatrix patch;
            patch.cols = 27;
            patch.m.resize(81);
            for (auto& v : patch.m) v = rng.normal();
            const auto sv = onesided_jacobi_singular_values(patch);
            const PatchMatrix shrunk = svt_patch(patch, theta);
            const auto sv_shrunk = onesided_jacobi_singular_values(shrunk);
            for (int i = 0; i < 3; ++i)
                worst = std::max(worst, std::fabs(sv_shrunk[i] - std::max(sv[i] - theta, 0.0)));
        }
        add("svt vs dense svd (200 random patches)", worst, 1e-8);
    }

    // prox identities
    {
        ScanGrid grid(0.6, 8, 0.05, 16, 8, 1.0);
        CounterRng rng(0x9a7c);
        DirectionalAlbedoVolume rho(grid);
        for (auto& v : rho.mutable_data()) v = rng.normal();
        const WindowSpec spec{27, 0.5};
        DirectionalAlbedoVolume same = prox_ss(rho, 0.0, spec);
        double worst = 0.0;
        for (std::size_t i = 0; i < rho.size(); ++i)
            worst = std::max(worst, std::fabs(same.data()[i] - rho.data()[i]));
        add("prox_ss theta=0 identity", worst, 1e-12);

        DirectionalAlbedoVolume a = prox_ss(rho, 0.3, WindowSpec{1, 0.5});
        DirectionalAlbedoVolume b = prox_local_ss(rho, 0.3);
        worst = 0.0;
        for (std::size_t i = 0; i < rho.size(); ++i)
            worst = std::max(worst, std::fabs(a.data()[i] - b.data()[i]));
        add("prox_ss L=1 equals prox_local_ss", worst, 1e-12);
    }

    bool all_pass = true;
    for (const auto& c : checks) {
        std::printf("[%s] %-45s measured=%.3g tol=%.3g\n", c.pass ? "ok" : "FAIL", c.name.c_str(),
                    c.measured, c.tolerance);
        all_pass = all_pass && c.pass;
    }
    std::printf("%s\n", all_pass ? "selftest passed" : "selftest FAILED");
    return all_pass ? 0 : 1;
}

}  // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"confocal non-line-of-sight reconstruction toolkit"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "worker threads (0 = hardware)")->capture_default_str();

    // simulate
    auto* sim = app.add_subcommand("simulate", "render a synthetic scene to transients");
    GridFlags grid_flags;
    grid_flags.add_to(sim);
    std::string preset_name;
    std::string scene_name = "t-plane";
    SceneParams params;
    NoiseFlags noise;
    std::string sim_out = "out";
    int ds_spatial = 1, ds_temporal = 1;
    std::string ds_order = "after-noise";
    bool no_clamp = false;
    sim->add_option("--preset", preset_name, "t-paper | t-desk | bunny-desk | dragon-hi | dragon-lo");
    sim->add_option("--scene", scene_name, "t-plane | inclined-plane | sphere-cap | single-surfel | dot-grid")
        ->capture_default_str();
    sim->add_option("--depth", params.depth, "scene depth, meters")->capture_default_str();
    sim->add_option("--size", params.size, "scene extent, fraction of the wall")->capture_default_str();
    sim->add_option("--angle", params.angle_deg, "inclined-plane angle, degrees")->capture_default_str();
    sim->add_option("--radius", params.radius, "sphere-cap radius, meters")->capture_default_str();
    sim->add_option("--dots", params.dots, "dot-grid dots per side")->capture_default_str();
    sim->add_option("--albedo", params.albedo, "surfel albedo")->capture_default_str();
    sim->add_option("--noise", noise.spec_text, "none or poisson:eta=<v>,gauss:sigma=<v>")
        ->capture_default_str();
    sim->add_option("--seed", noise.seed, "noise RNG seed")->capture_default_str();
    sim->add_option("--out", sim_out, "output directory")->capture_default_str();
    sim->add_option("--downsample-spatial", ds_spatial, "spatial averaging factor")->capture_default_str();
    sim->add_option("--downsample-temporal", ds_temporal, "temporal averaging factor")->capture_default_str();
    sim->add_option("--downsample-order", ds_order, "after-noise | before-noise")
        ->check(CLI::IsMember({"after-noise", "before-noise"}))
        ->capture_default_str();
    sim->add_flag("--no-clamp-cosine", no_clamp, "render without the clamped cosine");

    // reconstruct
    auto* rec = app.add_subcommand("reconstruct", "solve the inverse problem on a measurement");
    std::string rec_in, rec_out = "out";
    SolverFlags solver_flags;
    rec->add_option("--in", rec_in, "input measurement (.nlv)")->required();
    rec->add_option("--out", rec_out, "output directory")->capture_default_str();
    solver_flags.add_to(rec);

    // render
    auto* ren = app.add_subcommand("render", "emit albedo/normal/depth images from a volume");
    std::string ren_in, ren_out = "out";
    double mask_threshold = 0.1;
    ren->add_option("--in", ren_in, "input directional volume (.nlv)")->required();
    ren->add_option("--out", ren_out, "output directory")->capture_default_str();
    ren->add_option("--mask-threshold", mask_threshold, "albedo mask threshold")->capture_default_str();

    // evaluate
    auto* eva = app.add_subcommand("evaluate", "score a reconstruction against ground truth");
    std::string eva_recon, eva_truth, eva_out = "report.csv";
    std::string eva_scene, eva_method;
    double eva_lambda = 0.0;
    double eva_mask_threshold = 0.1;
    bool eva_volume_psnr = false;
    eva->add_option("--recon", eva_recon, "reconstructed volume (.nlv)")->required();
    eva->add_option("--truth", eva_truth, "ground-truth volume (.nlv)")->required();
    eva->add_option("--out", eva_out, "CSV report path (appends)")->capture_default_str();
    eva->add_option("--scene", eva_scene, "scene label (default: truth metadata)");
    eva->add_option("--method", eva_method, "method label (default: recon metadata)");
    auto* lam_opt = eva->add_option("--lambda", eva_lambda, "lambda label (default: recon metadata)");
    eva->add_option("--mask-threshold", eva_mask_threshold, "albedo mask threshold")
        ->capture_default_str();
    eva->add_flag("--volume-psnr", eva_volume_psnr, "append a volume-level PSNR column");

    // sweep
    auto* swp = app.add_subcommand("sweep", "reconstruct over a log-spaced lambda grid and score");
    std::string swp_in, swp_truth, swp_out = "sweep";
    SolverFlags sweep_flags;
    double lambda_min = 1e-3, lambda_max = 1e-1;
    int lambda_count = 5;
    std::string lambdas_csv;
    double swp_mask_threshold = 0.1;
    bool keep_volumes = false;
    swp->add_option("--in", swp_in, "input measurement (.nlv)")->required();
    swp->add_option("--truth", swp_truth, "ground-truth volume (.nlv)")->required();
    swp->add_option("--out", swp_out, "output directory")->capture_default_str();
    sweep_flags.add_to(swp);
    swp->add_option("--lambda-min", lambda_min, "grid lower end")->capture_default_str();
    swp->add_option("--lambda-max", lambda_max, "grid upper end")->capture_default_str();
    swp->add_option("--lambda-count", lambda_count, "grid points")->capture_default_str();
    swp->add_option("--lambdas", lambdas_csv, "explicit comma-separated lambda list");
    swp->add_option("--mask-threshold", swp_mask_threshold, "albedo mask threshold")
        ->capture_default_str();
    swp->add_flag("--keep-volumes", keep_volumes, "write each lambda's reconstruction");

    // selftest
    app.add_subcommand("selftest", "run the built-in oracle checks");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (threads != 0) set_num_threads(threads);
        if (app.got_subcommand("simulate"))
            return cmd_simulate(sim, grid_flags, preset_name, scene_name, params, noise, sim_out,
                                ds_spatial, ds_temporal, ds_order, no_clamp);
        if (app.got_subcommand("reconstruct")) return cmd_reconstruct(rec_in, rec_out, solver_flags);
        if (app.got_subcommand("render")) return cmd_render(ren_in, ren_out, mask_threshold);
        if (app.got_subcommand("evaluate"))
            return cmd_evaluate(eva_recon, eva_truth, eva_out, eva_scene, eva_method, eva_lambda,
                                lam_opt->count() > 0, eva_mask_threshold, eva_volume_psnr);
        if (app.got_subcommand("sweep"))
            return cmd_sweep(swp_in, swp_truth, swp_out, sweep_flags, lambda_min, lambda_max,
                             lambda_count, lambdas_csv, swp_mask_threshold, keep_volumes);
        if (app.got_subcommand("selftest")) return cmd_selftest();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cerr << "error: no subcommand\n";
    return 1;
}

}  // namespace nlos::cli
