#include "rssbreath/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "rssbreath/analysis.hpp"
#include "rssbreath/core.hpp"
#include "rssbreath/errors.hpp"
#include "rssbreath/filter.hpp"
#include "rssbreath/log.hpp"
#include "rssbreath/motion.hpp"
#include "rssbreath/pipeline.hpp"
#include "rssbreath/synth.hpp"

namespace rssbreath::cli {
namespace {

// Console summaries round away float dust; data files keep full precision.
double round_to(double v, int decimals) {
    const double scale = std::pow(10.0, decimals);
    return std::round(v * scale) / scale;
}

double median(std::vector<double> v) {
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) {
        m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
    }
    return m;
}

// Config for a run: file (or defaults) reconciled with the trace header.
// Keys the file sets explicitly must agree with the trace; everything the
// file leaves out is adopted from the trace.
PipelineConfig merged_config(const RssTrace& trace, const std::string& config_path) {
    PipelineConfig cfg;
    std::vector<std::string> keys;
    if (!config_path.empty()) cfg = load_config(config_path, &keys);
    const auto has = [&keys](const char* k) {
        return std::find(keys.begin(), keys.end(), k) != keys.end();
    };
    if (has("fs_hz") && std::abs(cfg.fs_hz - trace.fs_hz) > 1e-9) {
        throw ConfigError("config fs_hz=" + format_double(cfg.fs_hz)
                          + " contradicts the trace header (" + format_double(trace.fs_hz)
                          + " Hz)");
    }
    if (has("channels") && cfg.num_channels != trace.num_channels) {
        throw ConfigError("config channels=" + std::to_string(cfg.num_channels)
                          + " contradicts the trace header (" + std::to_string(trace.num_channels)
                          + " channels)");
    }
    cfg.fs_hz = trace.fs_hz;
    cfg.num_channels = trace.num_channels;
    return cfg;
}

struct SynthArgs {
    std::string scenario, out, truth;
    std::uint64_t seed = 0;
};

int cmd_synth(const SynthArgs& args, bool seed_given) {
    synth::SynthScenario scenario = synth::load_scenario(args.scenario);
    if (seed_given) scenario.seed = args.seed;
    const synth::SynthResult result = synth::generate(scenario);
    write_trace(result.trace, args.out);
    std::cout << "wrote " << result.trace.rows() << " cycles x " << result.trace.num_channels
              << " channels (" << format_double(scenario.duration_s()) << " s at "
              << format_double(result.trace.fs_hz) << " Hz, seed " << scenario.seed << ") to "
              << args.out << '\n';
    if (!args.truth.empty()) {
        synth::write_truth(result.truth, args.truth);
        std::cout << "wrote ground truth to " << args.truth << '\n';
    }
    return 0;
}

struct RunArgs {
    std::string trace, config, truth, out, taps_out;
    int peaks = 0;
    double grid_hz = 0.0;
    double window_s = 0.0;
    double stride_s = -1.0;
    int decimation = 0;
};

void print_truth_comparison(const RssTrace& trace, const pipeline::RunReport& report,
                            const std::string& truth_path) {
    const synth::GroundTruth truth = synth::read_truth(truth_path);
    if (truth.state.size() != trace.rows()) {
        throw DataError("truth file covers " + std::to_string(truth.state.size())
                        + " cycles but the trace has " + std::to_string(trace.rows()));
    }
    std::size_t agree = 0;
    for (std::size_t k = 0; k < truth.state.size(); ++k) {
        if (report.states[k] == truth.state[k]) ++agree;
    }
    std::vector<double> errors_bpm;
    std::size_t failures = 0;
    for (const pipeline::Estimate& est : report.estimates) {
        if (est.end_cycle >= truth.breath_hz.size() || truth.breath_hz[est.end_cycle].empty()) {
            continue;
        }
        const double err = 60.0 * std::abs(est.params.freq_hz - truth.breath_hz[est.end_cycle][0]);
        errors_bpm.push_back(err);
        if (err > 1.0) ++failures;
    }
    std::cout << "state accuracy: "
              << format_double(round_to(100.0 * static_cast<double>(agree)
                                            / static_cast<double>(truth.state.size()),
                                        2))
              << "% of " << truth.state.size() << " cycles\n";
    if (!errors_bpm.empty()) {
        double sum = 0.0;
        for (double e : errors_bpm) sum += e;
        std::cout << "error vs truth: mean |error| "
                  << format_double(round_to(sum / static_cast<double>(errors_bpm.size()), 4))
                  << " bpm over " << errors_bpm.size() << " estimates, failure rate (>1 bpm) "
                  << format_double(round_to(static_cast<double>(failures)
                                                / static_cast<double>(errors_bpm.size()),
                                            4))
                  << '\n';
    }
}

int cmd_run(const RunArgs& args) {
    const RssTrace trace = read_trace(args.trace);
    PipelineConfig cfg = merged_config(trace, args.config);
    if (args.grid_hz > 0.0) cfg.freq_grid_hz = args.grid_hz;
    if (args.window_s > 0.0) cfg.est_window_s = args.window_s;
    if (args.stride_s >= 0.0) cfg.estimate_stride_s = args.stride_s;
    if (args.decimation > 0) cfg.decimation = args.decimation;

    pipeline::RunOptions options;
    options.peak_count = args.peaks;
    const pipeline::RunReport report = pipeline::run_trace(trace, cfg, options);

    std::cout << "rssbreath " << kVersion << ": " << trace.rows() << " cycles, "
              << trace.num_channels << " channels at " << format_double(trace.fs_hz) << " Hz\n";
    std::cout << "config: band " << format_double(cfg.f_min_hz) << "-"
              << format_double(cfg.f_max_hz) << " Hz, mean window "
              << cfg.resolved_mean_window() << ", decimation " << cfg.decimation << ", window "
              << report.window_length << " samples, " << report.filter_taps
              << " taps (group delay " << format_double(report.group_delay_s) << " s)\n";
    std::size_t still = 0;
    for (MotionState s : report.states) still += s == MotionState::kStill ? 1 : 0;
    std::cout << "states: " << still << " still / " << (report.states.size() - still)
              << " motion, " << report.gate_flushes << " gate flushes\n";
    if (report.estimates.empty()) {
        std::cout << "no estimates: no still span reached one full estimation window\n";
    } else {
        std::vector<double> freqs, r2s;
        for (const pipeline::Estimate& est : report.estimates) {
            freqs.push_back(est.params.freq_hz);
            r2s.push_back(est.r2);
        }
        const double f_med = median(freqs);
        std::cout << "estimates: " << report.estimates.size() << ", median "
                  << format_double(f_med) << " Hz (" << format_double(60.0 * f_med)
                  << " bpm), median phase concentration " << format_double(round_to(median(r2s), 3))
                  << '\n';
        for (int slot = 0; slot < args.peaks; ++slot) {
            std::vector<double> fs;
            for (const pipeline::Estimate& est : report.estimates) {
                if (static_cast<std::size_t>(slot) < est.peaks.size()) {
                    fs.push_back(est.peaks[static_cast<std::size_t>(slot)].freq_hz);
                }
            }
            if (fs.empty()) continue;
            const double m = median(fs);
            std::cout << "peak " << slot + 1 << ": median " << format_double(m) << " Hz ("
                      << format_double(60.0 * m) << " bpm) in " << fs.size() << "/"
                      << report.estimates.size() << " estimates\n";
        }
    }
    if (!args.truth.empty()) print_truth_comparison(trace, report, args.truth);
    if (!args.taps_out.empty()) {
        filter::FirSpec spec;
        spec.fs_hz = cfg.fs_hz;
        spec.passband_hz = cfg.resolved_passband_hz();
        spec.stopband_hz = cfg.resolved_stopband_hz();
        spec.ripple_db = cfg.filter_ripple_db;
        spec.atten_db = cfg.filter_atten_db;
        filter::write_taps(filter::design_lowpass(spec), args.taps_out);
        std::cout << "wrote filter taps to " << args.taps_out << '\n';
    }
    if (!args.out.empty()) {
        pipeline::write_estimates(report, args.out);
        std::cout << "wrote estimates to " << args.out << '\n';
    }
    return 0;
}

struct SweepArgs {
    std::string scenario, axis, out;
    std::vector<double> values;
};

int cmd_sweep(const SweepArgs& args) {
    const synth::SynthScenario scenario = synth::load_scenario(args.scenario);
    const analysis::SweepAxis axis = analysis::parse_axis(args.axis);
    const std::vector<analysis::SweepPoint> points =
        analysis::run_sweep(scenario, axis, args.values);
    analysis::write_sweep_csv(args.out, points);
    std::cout << "wrote " << points.size() << " sweep points to " << args.out << '\n';
    for (const analysis::SweepPoint& p : points) {
        std::cout << "  " << args.axis << "=" << format_double(p.value) << ": mean |error| "
                  << format_double(round_to(p.mean_error_bpm, 4)) << " bpm, failure rate "
                  << format_double(round_to(p.failure_rate, 4)) << " over " << p.estimates
                  << " estimates\n";
    }
    return 0;
}

struct FitArgs {
    std::string still, motion, config, out;
};

int cmd_fit_density(const FitArgs& args) {
    const RssTrace still_trace = read_trace(args.still);
    const RssTrace motion_trace = read_trace(args.motion);
    PipelineConfig cfg;
    if (!args.config.empty()) cfg = load_config(args.config);
    const motion::DensityFit fit = motion::fit_densities(still_trace, motion_trace, cfg);
    const auto report = [](const char* label, double sigma, std::size_t n,
                           const analysis::KsResult& ks) {
        std::cout << label << ": sigma " << format_double(sigma) << " dB over " << n
                  << " observations, KS D=" << format_double(ks.d) << " (critical "
                  << format_double(ks.critical) << ", n=" << ks.n << ") "
                  << (ks.accepted ? "accepted" : "rejected") << '\n';
    };
    report("still", fit.params.sigma[0], fit.n_still, fit.ks_still);
    report("motion", fit.params.sigma[1], fit.n_motion, fit.ks_motion);
    const double hi = std::max(fit.params.sigma[0], fit.params.sigma[1]);
    if (std::abs(fit.params.sigma[0] - fit.params.sigma[1]) <= 0.05 * hi) {
        log::warnf("fitted densities are nearly identical (%.4g vs %.4g dB); the detector "
                   "cannot separate the states from these traces",
                   fit.params.sigma[0], fit.params.sigma[1]);
    }
    if (!args.out.empty()) {
        PipelineConfig out_cfg = cfg;
        out_cfg.fs_hz = still_trace.fs_hz;
        out_cfg.num_channels = still_trace.num_channels;
        fit.params.apply_to_config(&out_cfg);
        save_config(out_cfg, args.out);
        std::cout << "wrote fitted config to " << args.out << '\n';
    }
    return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"Respiration-rate estimation from multi-channel RSS traces"};
    app.set_version_flag("--version", std::string("rssbreath ") + kVersion);
    app.require_subcommand(1);

    SynthArgs synth_args;
    CLI::App* synth_cmd =
        app.add_subcommand("synth", "Generate a synthetic trace from a scenario file");
    synth_cmd->add_option("--scenario", synth_args.scenario, "Scenario file")->required();
    synth_cmd->add_option("--out", synth_args.out, "Trace CSV to write")->required();
    synth_cmd->add_option("--truth", synth_args.truth, "Ground-truth sidecar CSV to write");
    CLI::Option* seed_opt =
        synth_cmd->add_option("--seed", synth_args.seed, "Override the scenario seed");

    RunArgs run_args;
    CLI::App* run_cmd = app.add_subcommand("run", "Process a trace through the full chain");
    run_cmd->add_option("--trace", run_args.trace, "Trace CSV")->required();
    run_cmd->add_option("--config", run_args.config, "Config file (defaults if omitted)");
    run_cmd->add_option("--truth", run_args.truth, "Ground-truth sidecar for scoring");
    run_cmd->add_option("--out", run_args.out, "Estimates CSV to write");
    run_cmd->add_option("--taps-out", run_args.taps_out, "Write the designed filter taps");
    run_cmd->add_option("--peaks", run_args.peaks, "Record the N strongest spectral peaks")
        ->check(CLI::NonNegativeNumber);
    run_cmd->add_option("--grid-hz", run_args.grid_hz, "Frequency grid spacing override")
        ->check(CLI::PositiveNumber);
    run_cmd->add_option("--window-s", run_args.window_s, "Estimation window override")
        ->check(CLI::PositiveNumber);
    run_cmd->add_option("--stride-s", run_args.stride_s,
                        "Estimate cadence override (0 = every decimated sample)")
        ->check(CLI::NonNegativeNumber);
    run_cmd->add_option("--decimation", run_args.decimation, "Decimation factor override")
        ->check(CLI::PositiveNumber);

    SweepArgs sweep_args;
    CLI::App* sweep_cmd =
        app.add_subcommand("sweep", "Sweep a pipeline parameter over a scenario");
    sweep_cmd->add_option("--scenario", sweep_args.scenario, "Scenario file")->required();
    sweep_cmd->add_option("--axis", sweep_args.axis, "M | delta | channel_count")->required();
    sweep_cmd->add_option("--values", sweep_args.values, "Comma-separated axis values")
        ->required()
        ->delimiter(',');
    sweep_cmd->add_option("--out", sweep_args.out, "Sweep CSV to write")->required();

    FitArgs fit_args;
    CLI::App* fit_cmd = app.add_subcommand(
        "fit-density", "Fit the motion detector densities from labelled calibration traces");
    fit_cmd->add_option("--still", fit_args.still, "Trace recorded while still")->required();
    fit_cmd->add_option("--motion", fit_args.motion, "Trace recorded while moving")->required();
    fit_cmd->add_option("--config", fit_args.config, "Defaults for the non-fitted parameters");
    fit_cmd->add_option("--out", fit_args.out, "Config file to write with fitted sigmas");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);  // prints help or the parse error
        return code == 0 ? 0 : 2;
    }

    try {
        if (*synth_cmd) return cmd_synth(synth_args, seed_opt->count() > 0);
        if (*run_cmd) return cmd_run(run_args);
        if (*sweep_cmd) return cmd_sweep(sweep_args);
        if (*fit_cmd) return cmd_fit_density(fit_args);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}

}  // namespace rssbreath::cli
