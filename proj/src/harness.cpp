#include "mimo/harness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include "mimo/baselines.hpp"
#include "mimo/errors.hpp"

namespace mimo {

namespace {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Alphabets present in the plan, in order of first appearance, with the users using each.
struct UserGroups {
    std::vector<std::string> names;
    std::vector<std::vector<std::size_t>> users;

    explicit UserGroups(const ModulationPlan& plan) {
        for (std::size_t j = 0; j < plan.n_users(); ++j) {
            const auto& name = plan.user(j).name();
            std::size_t g = 0;
            while (g < names.size() && names[g] != name) ++g;
            if (g == names.size()) {
                names.push_back(name);
                users.emplace_back();
            }
            users[g].push_back(j);
        }
    }
};

struct TrialOutcome {
    // errors[d * (1 + groups) + 0] overall, [.. + 1 + g] per group
    std::vector<std::size_t> errors;
    std::vector<double> seconds;
};

class TrialRunner {
public:
    TrialRunner(const ExperimentConfig& cfg, const SweepOptions& options)
        : cfg_(cfg), options_(options), plan_(cfg.plan()), groups_(plan_), root_(cfg.seed) {
        if (cfg.channel == ChannelModel::Kronecker) roots_ = KroneckerRoots::make(cfg.n_rx, cfg.n_users, cfg.rho);
    }

    const ModulationPlan& plan() const { return plan_; }
    const UserGroups& groups() const { return groups_; }
    std::size_t stride() const { return 1 + (plan_.is_mixed() ? groups_.names.size() : 0); }

    TrialOutcome run(std::size_t snr_index, std::size_t trial) const {
        const StreamKey key = root_.child(snr_index).child(trial);
        RandomStream channel_rng = child(key, StreamPurpose::Channel).stream();
        const ComplexChannel hc = roots_ ? kronecker_channel(*roots_, channel_rng)
                                         : rayleigh_channel(cfg_.n_rx, cfg_.n_users, channel_rng);
        const double sigma0 = sigma0_from_snr(snr_db_to_linear(cfg_.snr_db[snr_index]), cfg_.n_rx, cfg_.n_users);
        const Eigen::MatrixXd h = real_embedding(hc);

        TrialOutcome out;
        out.errors.assign(cfg_.detectors.size() * stride(), 0);
        out.seconds.assign(cfg_.detectors.size(), 0.0);

        std::optional<RealSystem> system;
        for (std::size_t v = 0; v < cfg_.vectors_per_channel; ++v) {
            RandomStream sym_rng = child(key, StreamPurpose::Symbols).child(v).stream();
            RandomStream noise_rng = child(key, StreamPurpose::Noise).child(v).stream();
            const SymbolVector truth = sample_symbols(plan_, sym_rng);
            const Eigen::VectorXd y = transmit(h, truth, sigma0, noise_rng);
            if (!system) {
                system = build_real_system(hc, y, sigma0);
            } else {
                system->y = y;
                system->eta = system->U.transpose() * y;
            }
            const StreamKey trajectory_key = child(key, StreamPurpose::Trajectory).child(v);

            for (std::size_t d = 0; d < cfg_.detectors.size(); ++d) {
                const DetectorKind kind = cfg_.detectors[d];
                if (options_.observer) options_.observer(snr_index, trial, detector_name(kind), instance_hash(*system));
                const auto t0 = std::chrono::steady_clock::now();
                std::optional<SymbolVector> est;
                try {
                    est = run_detector(kind, cfg_.langevin, *system, plan_, trajectory_key);
                } catch (const DetectorError&) {
                    est.reset();
                }
                const auto t1 = std::chrono::steady_clock::now();
                if (cfg_.record_wall_time) out.seconds[d] += std::chrono::duration<double>(t1 - t0).count();
                const std::size_t before = out.errors[d * stride()];
                count_errors(est, truth, out.errors.data() + d * stride());
                if (options_.on_errors)
                    options_.on_errors(snr_index, trial, detector_name(kind), out.errors[d * stride()] - before);
            }
        }
        return out;
    }

private:
    void count_errors(const std::optional<SymbolVector>& est, const SymbolVector& truth, std::size_t* slot) const {
        const bool mixed = stride() > 1;
        for (std::size_t j = 0; j < truth.n_users(); ++j) {
            if (est && est->symbols[j] == truth.symbols[j]) continue;
            ++slot[0];
        }
        if (!mixed) return;
        for (std::size_t g = 0; g < groups_.names.size(); ++g) {
            for (std::size_t j : groups_.users[g]) {
                if (!est || est->symbols[j] != truth.symbols[j]) ++slot[1 + g];
            }
        }
    }

    const ExperimentConfig& cfg_;
    const SweepOptions& options_;
    ModulationPlan plan_;
    UserGroups groups_;
    StreamKey root_;
    std::optional<KroneckerRoots> roots_;
};

std::size_t resolve_threads(std::size_t requested, std::size_t work) {
    std::size_t n = requested;
    if (n == 0) n = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    return std::max<std::size_t>(1, std::min(n, work));
}

} // namespace

const SweepRow* SweepResult::find(double snr_db, std::string_view detector, std::string_view digest) const {
    for (const auto& r : rows) {
        if (r.snr_db == snr_db && r.detector == detector && (digest.empty() || r.params_digest == digest)) return &r;
    }
    return nullptr;
}

std::uint64_t instance_hash(const RealSystem& system) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    h = fnv1a(h, system.H.data(), sizeof(double) * static_cast<std::size_t>(system.H.size()));
    h = fnv1a(h, system.y.data(), sizeof(double) * static_cast<std::size_t>(system.y.size()));
    h = fnv1a(h, &system.sigma0, sizeof system.sigma0);
    return h;
}

SymbolVector run_detector(DetectorKind kind, const LangevinConfig& langevin, const RealSystem& system,
                          const ModulationPlan& plan, const StreamKey& trajectory_key) {
    switch (kind) {
    case DetectorKind::ZF: return zf_detect(system, plan);
    case DetectorKind::MMSE: return mmse_detect(system, plan);
    case DetectorKind::ML: return ml_exhaustive(system.y, system.H, plan);
    case DetectorKind::Langevin: return detect_langevin(system, langevin, plan, trajectory_key).estimate;
    }
    throw ContractError("unknown detector kind");
}

std::string params_digest(DetectorKind kind, const LangevinConfig& langevin) {
    return kind == DetectorKind::Langevin ? langevin.digest() : std::string("none");
}

SweepResult run_sweep(const ExperimentConfig& cfg, const SweepOptions& options) {
    cfg.validate();
    const TrialRunner runner(cfg, options);
    const std::size_t n_snr = cfg.snr_db.size();
    const std::size_t total = n_snr * cfg.trials;

    std::vector<TrialOutcome> outcomes(total);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= total) return;
            try {
                outcomes[i] = runner.run(i / cfg.trials, i % cfg.trials);
            } catch (...) {
                const std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(total);
                return;
            }
        }
    };

    const std::size_t threads = resolve_threads(options.threads, total);
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);

    const std::size_t stride = runner.stride();
    const auto& groups = runner.groups();
    const std::size_t per_trial_symbols = cfg.vectors_per_channel * cfg.n_users;

    SweepResult result;
    for (std::size_t s = 0; s < n_snr; ++s) {
        for (std::size_t d = 0; d < cfg.detectors.size(); ++d) {
            std::vector<std::size_t> errors(stride, 0);
            double seconds = 0.0;
            for (std::size_t t = 0; t < cfg.trials; ++t) {
                const auto& o = outcomes[s * cfg.trials + t];
                for (std::size_t k = 0; k < stride; ++k) errors[k] += o.errors[d * stride + k];
                seconds += o.seconds[d];
            }
            const std::string name(detector_name(cfg.detectors[d]));
            const std::string digest = params_digest(cfg.detectors[d], cfg.langevin);
            auto add_row = [&](std::string detector, std::size_t symbols, std::size_t errs) {
                SweepRow row;
                row.snr_db = cfg.snr_db[s];
                row.detector = std::move(detector);
                row.params_digest = digest;
                row.num_symbols = symbols;
                row.num_errors = errs;
                row.ser = static_cast<double>(errs) / static_cast<double>(symbols);
                row.wall_time_seconds = seconds;
                result.rows.push_back(std::move(row));
            };
            add_row(name, cfg.trials * per_trial_symbols, errors[0]);
            for (std::size_t g = 0; g + 1 < stride; ++g) {
                add_row(name + ":" + groups.names[g], cfg.trials * cfg.vectors_per_channel * groups.users[g].size(),
                        errors[1 + g]);
            }
        }
    }
    return result;
}

SweepResult run_ablation(const ExperimentConfig& cfg, AblationAxis axis, std::span<const double> values,
                         const SweepOptions& options) {
    if (values.empty()) throw ConfigError("values", "ablation needs at least one value");
    std::vector<SweepResult> sweeps;
    for (double v : values) {
        ExperimentConfig c = cfg;
        c.detectors = {DetectorKind::Langevin};
        auto as_count = [&](const char* field) {
            if (!(v >= 1.0) || v != std::floor(v)) throw ConfigError(field, "ablation values must be positive integers");
            return static_cast<std::size_t>(v);
        };
        switch (axis) {
        case AblationAxis::Levels: c.langevin.levels = as_count("langevin.levels"); break;
        case AblationAxis::Trajectories: c.langevin.trajectories = as_count("langevin.trajectories"); break;
        case AblationAxis::Temperature: c.langevin.tau = v; break;
        }
        sweeps.push_back(run_sweep(c, options));
    }
    SweepResult merged;
    const std::size_t rows_per_snr = sweeps.front().rows.size() / cfg.snr_db.size();
    for (std::size_t s = 0; s < cfg.snr_db.size(); ++s) {
        for (const auto& sweep : sweeps) {
            for (std::size_t k = 0; k < rows_per_snr; ++k) merged.rows.push_back(sweep.rows[s * rows_per_snr + k]);
        }
    }
    return merged;
}

std::string to_csv(const SweepResult& result) {
    std::string out(kCsvHeader);
    out += '\n';
    for (const auto& r : result.rows) {
        out += format_double(r.snr_db);
        out += ',';
        out += r.detector;
        out += ',';
        out += r.params_digest;
        out += ',';
        out += std::to_string(r.num_symbols);
        out += ',';
        out += std::to_string(r.num_errors);
        out += ',';
        out += format_double(r.ser);
        out += ',';
        out += format_double(r.wall_time_seconds);
        out += '\n';
    }
    return out;
}

SweepResult parse_csv(std::string_view text) {
    SweepResult result;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < text.size()) {
        const auto nl = text.find('\n', pos);
        const std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() : nl + 1;
        ++line_no;
        if (line_no == 1) {
            if (line != kCsvHeader) throw ContractError("parse_csv: unexpected header");
            continue;
        }
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::size_t start = 0;
        for (;;) {
            const auto comma = line.find(',', start);
            cells.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (cells.size() != 7) throw ContractError("parse_csv: line " + std::to_string(line_no) + " has " +
                                                   std::to_string(cells.size()) + " columns");
        SweepRow r;
        r.snr_db = std::strtod(cells[0].c_str(), nullptr);
        r.detector = cells[1];
        r.params_digest = cells[2];
        r.num_symbols = std::stoull(cells[3]);
        r.num_errors = std::stoull(cells[4]);
        r.ser = std::strtod(cells[5].c_str(), nullptr);
        r.wall_time_seconds = std::strtod(cells[6].c_str(), nullptr);
        result.rows.push_back(std::move(r));
    }
    return result;
}

void write_csv(const SweepResult& result, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    const std::string text = to_csv(result);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

} // namespace mimo
