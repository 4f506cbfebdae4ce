// Command-line front end: Monte-Carlo sweeps, ablations and single-instance detection.

#include <cmath>
#include <iostream>
#include <limits>
#include <sstream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mimo/baselines.hpp"
#include "mimo/channel.hpp"
#include "mimo/errors.hpp"
#include "mimo/harness.hpp"
#include "mimo/langevin.hpp"

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

struct GlobalFlags {
    std::optional<std::uint64_t> seed;
    std::size_t threads = 0;
    std::string output;
};

std::vector<double> parse_values(const std::string& text) {
    std::vector<double> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        const std::string item = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        char* end = nullptr;
        const double v = std::strtod(item.c_str(), &end);
        if (item.empty() || *end != '\0') throw mimo::ConfigError("values", "cannot parse '" + item + "'");
        out.push_back(v);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

void emit(const mimo::SweepResult& result, const std::string& output) {
    if (output.empty() || output == "-") {
        std::cout << mimo::to_csv(result);
    } else {
        mimo::write_csv(result, output);
    }
}

mimo::ExperimentConfig load(const std::string& path, const GlobalFlags& flags) {
    mimo::ExperimentConfig cfg = mimo::load_config(path);
    if (flags.seed) cfg.seed = *flags.seed;
    if (!flags.output.empty()) cfg.output_path = flags.output;
    return cfg;
}

Eigen::VectorXd read_observation(const std::string& path, std::size_t n_rx) {
    const Eigen::MatrixXcd m = mimo::read_complex_csv(path);
    if (static_cast<std::size_t>(m.size()) != n_rx || (m.rows() != 1 && m.cols() != 1)) {
        throw mimo::ContractError(path + ": observation must hold " + std::to_string(n_rx) +
                                  " complex entries in a single row or column");
    }
    std::vector<mimo::Complex> y(n_rx);
    for (Eigen::Index i = 0; i < m.size(); ++i) y[static_cast<std::size_t>(i)] = m.data()[i];
    return mimo::embed(y);
}

// Reuses the config grammar so `--modulation` accepts the same lists as config files.
mimo::ModulationPlan detect_plan(const mimo::ComplexChannel& hc, const std::string& modulation) {
    std::istringstream in("n_rx = " + std::to_string(hc.n_rx()) + "\nn_users = " + std::to_string(hc.n_users()) +
                          "\nmodulation = " + modulation + "\ndetectors = mmse\n");
    try {
        return mimo::parse_config(in, "--modulation").plan();
    } catch (const mimo::ConfigError& e) {
        throw mimo::ConfigError("--modulation", e.what());
    }
}

double parse_snr(const std::string& text) {
    if (text == "inf" || text == "+inf") return std::numeric_limits<double>::infinity();
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (text.empty() || *end != '\0' || !std::isfinite(v)) throw mimo::ConfigError("--snr-db", "cannot parse '" + text + "'");
    return v;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Annealed Langevin MIMO detection simulator"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalFlags flags;
    std::uint64_t seed_value = 0;
    auto* seed_opt = app.add_option("--seed", seed_value, "Root random seed (overrides the config)");
    app.add_option("--threads", flags.threads, "Worker threads (default: available cores)");
    app.add_option("--output", flags.output, "Output CSV path ('-' for stdout)");

    auto* simulate = app.add_subcommand("simulate", "Run an SNR sweep described by a config file");
    std::string sim_config;
    bool no_timing = false;
    simulate->add_option("--config", sim_config, "Experiment config file")->required();
    simulate->add_flag("--no-timing", no_timing, "Write 0 in the wall-time column");

    auto* ablate = app.add_subcommand("ablate", "Sweep one Langevin hyperparameter");
    std::string abl_config;
    std::string axis_name;
    std::string values_text;
    ablate->add_option("--config", abl_config, "Experiment config file")->required();
    ablate->add_option("--axis", axis_name, "levels | trajectories | tau")->required();
    ablate->add_option("--values", values_text, "Comma-separated axis values")->required();
    ablate->add_flag("--no-timing", no_timing, "Write 0 in the wall-time column");

    auto* detect = app.add_subcommand("detect", "Detect one observation and print the symbols");
    std::string channel_path;
    std::string observation_path;
    std::string snr_text;
    std::string detector_text = "langevin";
    std::string modulation_text = "4";
    mimo::LangevinConfig langevin;
    detect->add_option("--channel", channel_path, "Channel CSV (rows: antennas, columns: users)")
        ->required()
        ->check(CLI::ExistingFile);
    detect->add_option("--observation", observation_path, "Observation CSV (N_r complex entries)")
        ->required()
        ->check(CLI::ExistingFile);
    detect->add_option("--snr-db", snr_text, "SNR in dB used to set the noise level ('inf' for noiseless)")->required();
    detect->add_option("--detector", detector_text, "zf | mmse | ml | langevin");
    detect->add_option("--modulation", modulation_text, "QAM order, or one order per user (comma-separated)");
    detect->add_option("--levels", langevin.levels, "Langevin noise levels");
    detect->add_option("--iterations", langevin.iterations, "Langevin iterations per level");
    detect->add_option("--trajectories", langevin.trajectories, "Langevin trajectories");
    detect->add_option("--tau", langevin.tau, "Langevin temperature");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }
    if (*seed_opt) flags.seed = seed_value;

    try {
        if (*simulate) {
            mimo::ExperimentConfig cfg = load(sim_config, flags);
            if (no_timing) cfg.record_wall_time = false;
            const auto result = mimo::run_sweep(cfg, {flags.threads, {}});
            emit(result, cfg.output_path);
        } else if (*ablate) {
            mimo::ExperimentConfig cfg = load(abl_config, flags);
            if (no_timing) cfg.record_wall_time = false;
            const auto axis = mimo::parse_ablation_axis(axis_name);
            const auto values = parse_values(values_text);
            const auto result = mimo::run_ablation(cfg, axis, values, {flags.threads, {}});
            emit(result, cfg.output_path);
        } else if (*detect) {
            const auto hc = mimo::read_channel_csv(channel_path);
            const mimo::ModulationPlan plan = detect_plan(hc, modulation_text);
            langevin.validate();
            const auto kind = mimo::parse_detector_kind(detector_text);
            if (kind == mimo::DetectorKind::ML && plan.product_size() > mimo::kMaxExhaustiveCandidates) {
                throw mimo::ConfigError("detector", "ml needs a product alphabet of at most 2^20 candidates");
            }
            const double snr_db = parse_snr(snr_text);
            const double sigma0 = mimo::sigma0_from_snr(mimo::snr_db_to_linear(snr_db), hc.n_rx(), hc.n_users());
            const Eigen::VectorXd y = read_observation(observation_path, hc.n_rx());
            const mimo::RealSystem system = mimo::build_real_system(hc, y, sigma0);
            const auto est = mimo::run_detector(kind, langevin, system, plan, mimo::StreamKey(flags.seed.value_or(0)));
            for (const auto& z : est.symbols) std::cout << mimo::format_complex(z) << '\n';
        }
    } catch (const mimo::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const mimo::ContractError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return 0;
}
