#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mimo/channel.hpp"
#include "mimo/constellation.hpp"
#include "mimo/langevin.hpp"
#include "mimo/rng.hpp"

namespace mimo {

enum class DetectorKind { ZF, MMSE, ML, Langevin };

// Config names: zf, mmse, ml, langevin.
std::string_view detector_name(DetectorKind kind) noexcept;
DetectorKind parse_detector_kind(std::string_view name);

enum class ChannelModel { Rayleigh, Kronecker };

struct ExperimentConfig {
    std::size_t n_rx = 64;
    std::size_t n_users = 32;
    ChannelModel channel = ChannelModel::Rayleigh;
    double rho = 0.6;             // Kronecker only
    std::vector<int> modulation{16}; // one order for all users, or one per user
    std::vector<double> snr_db{10.0};
    std::size_t trials = 5000;    // channel realizations per SNR point
    std::size_t vectors_per_channel = 1;
    std::vector<DetectorKind> detectors{DetectorKind::MMSE, DetectorKind::Langevin};
    LangevinConfig langevin;
    std::uint64_t seed = 0;
    std::string output_path;
    bool record_wall_time = true;

    // Throws ConfigError naming the offending field.
    void validate() const;
    ModulationPlan plan() const;
};

// Flat `key = value` text (a TOML subset): `#` comments, optional `[langevin]`
// section or dotted `langevin.*` keys, lists as `[a, b]` or `a, b`, and
// `order*count` repetition inside modulation lists. Unknown keys are errors.
ExperimentConfig parse_config(std::istream& in, const std::string& source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

struct SweepRow {
    double snr_db = 0.0;
    std::string detector;
    std::string params_digest;
    std::size_t num_symbols = 0;
    std::size_t num_errors = 0;
    double ser = 0.0;
    double wall_time_seconds = 0.0;
};

// Rows are ordered by SNR point, then detector. With a mixed modulation plan
// every detector row is followed by one row per alphabet, named
// `<detector>:<alphabet>` (e.g. `mmse:qam64`), counting only those users.
struct SweepResult {
    std::vector<SweepRow> rows;

    const SweepRow* find(double snr_db, std::string_view detector, std::string_view digest = {}) const;
};

// Hash of the (H, y, sigma0) a detector receives.
std::uint64_t instance_hash(const RealSystem& system);

using InstanceObserver =
    std::function<void(std::size_t snr_index, std::size_t trial, std::string_view detector, std::uint64_t hash)>;

using ErrorObserver =
    std::function<void(std::size_t snr_index, std::size_t trial, std::string_view detector, std::size_t errors)>;

struct SweepOptions {
    std::size_t threads = 0; // 0: hardware concurrency
    // Invoked (possibly concurrently) right before each detector call.
    InstanceObserver observer;
    // Invoked (possibly concurrently) with the symbol errors of each detector call.
    ErrorObserver on_errors;
};

// Runs one detector on a prepared instance. Langevin trajectories use
// streams trajectory_key.child(m).
SymbolVector run_detector(DetectorKind kind, const LangevinConfig& langevin, const RealSystem& system,
                          const ModulationPlan& plan, const StreamKey& trajectory_key);

std::string params_digest(DetectorKind kind, const LangevinConfig& langevin);

// Paired Monte-Carlo sweep: every detector sees the same (H, y, sigma0) in
// each trial. A detector that fails on an instance (rank-deficient channel
// for ZF, all Langevin trajectories diverged) is charged every symbol of that
// instance as an error.
SweepResult run_sweep(const ExperimentConfig& cfg, const SweepOptions& options = {});

enum class AblationAxis { Levels, Trajectories, Temperature };
AblationAxis parse_ablation_axis(std::string_view name);

// One Langevin-only sweep per value of the axis, everything else held at cfg.
// Identical seeds give every value the same channels, symbols and noise.
SweepResult run_ablation(const ExperimentConfig& cfg, AblationAxis axis, std::span<const double> values,
                         const SweepOptions& options = {});

inline constexpr std::string_view kCsvHeader = "snr_db,detector,params_digest,num_symbols,num_errors,ser,wall_time_seconds";

std::string to_csv(const SweepResult& result);
SweepResult parse_csv(std::string_view text);
void write_csv(const SweepResult& result, const std::filesystem::path& path);

} // namespace mimo
