#include "mimo/langevin.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <random>

#include "mimo/errors.hpp"

namespace mimo {

namespace {

std::string shortest(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, res.ptr};
}

// Per-level, per-entry constants of the spectral score.
struct LevelTerms {
    Eigen::VectorXd lik_coef;  // s_j / |sigma0^2 - sigma_l^2 s_j^2|, or 0 under the pseudo-inverse cut
    Eigen::VectorXd use_lik;   // 1 where the likelihood term enters
    Eigen::VectorXd use_prior; // 1 where the prior term enters

    LevelTerms(const RealSystem& sys, double sigma_l) {
        const Eigen::Index n = sys.dim();
        lik_coef.resize(n);
        use_lik.resize(n);
        use_prior.resize(n);
        const double v0 = sys.sigma0 * sys.sigma0;
        for (Eigen::Index j = 0; j < n; ++j) {
            const double s = sys.s(j);
            const double denom = std::abs(v0 - sigma_l * sigma_l * s * s);
            lik_coef(j) = denom < kPseudoInverseThreshold ? 0.0 : s / denom;
            if (s == 0.0) {
                use_lik(j) = 0.0;
                use_prior(j) = 1.0;
            } else if (sys.sigma0 >= sigma_l * s) {
                use_lik(j) = 1.0;
                use_prior(j) = 1.0;
            } else {
                use_lik(j) = 1.0;
                use_prior(j) = 0.0;
            }
        }
    }
};

void check_system(const RealSystem& sys, const ModulationPlan& plan) {
    if (sys.dim() != static_cast<Eigen::Index>(2 * plan.n_users())) {
        throw ContractError("system has " + std::to_string(sys.dim()) + " real unknowns but the plan has " +
                            std::to_string(plan.n_users()) + " users");
    }
}

} // namespace

NoiseSchedule::NoiseSchedule(std::vector<double> sigmas) : sigmas_(std::move(sigmas)) {
    if (sigmas_.empty()) throw ContractError("noise schedule is empty");
    for (std::size_t l = 0; l < sigmas_.size(); ++l) {
        if (!(sigmas_[l] > 0.0) || !std::isfinite(sigmas_[l])) {
            throw ContractError("noise level " + std::to_string(l) + " must be positive and finite");
        }
        if (l > 0 && !(sigmas_[l] < sigmas_[l - 1])) throw ContractError("noise schedule must be strictly decreasing");
    }
}

NoiseSchedule NoiseSchedule::geometric(double sigma_first, double sigma_last, std::size_t levels) {
    if (levels < 2) throw ContractError("geometric schedule needs at least 2 levels");
    if (!(sigma_first > sigma_last && sigma_last > 0.0)) {
        throw ContractError("geometric schedule needs sigma_first > sigma_last > 0");
    }
    std::vector<double> s(levels);
    const double ratio = sigma_last / sigma_first;
    for (std::size_t l = 0; l < levels; ++l) {
        s[l] = sigma_first * std::pow(ratio, static_cast<double>(l) / static_cast<double>(levels - 1));
    }
    s.front() = sigma_first;
    s.back() = sigma_last;
    return NoiseSchedule(std::move(s));
}

NoiseSchedule NoiseSchedule::linear(double sigma_first, double sigma_last, std::size_t levels) {
    if (levels < 2) throw ContractError("linear schedule needs at least 2 levels");
    if (!(sigma_first > sigma_last && sigma_last > 0.0)) {
        throw ContractError("linear schedule needs sigma_first > sigma_last > 0");
    }
    std::vector<double> s(levels);
    for (std::size_t l = 0; l < levels; ++l) {
        const double f = static_cast<double>(l) / static_cast<double>(levels - 1);
        s[l] = sigma_first + (sigma_last - sigma_first) * f;
    }
    s.back() = sigma_last;
    return NoiseSchedule(std::move(s));
}

NoiseSchedule geometric_schedule(double sigma_first, double sigma_last, std::size_t levels) {
    return NoiseSchedule::geometric(sigma_first, sigma_last, levels);
}

void LangevinConfig::validate() const {
    if (levels < 1) throw ConfigError("langevin.levels", "must be >= 1");
    if (iterations < 1) throw ConfigError("langevin.iterations", "must be >= 1");
    if (trajectories < 1) throw ConfigError("langevin.trajectories", "must be >= 1");
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ConfigError("langevin.epsilon", "must be positive");
    if (!(tau >= 0.0) || !std::isfinite(tau)) throw ConfigError("langevin.tau", "must be nonnegative");
    if (!(sigma_last > 0.0) || !std::isfinite(sigma_last)) throw ConfigError("langevin.sigma_last", "must be positive");
    if (levels > 1 && !(sigma_first > sigma_last) ) {
        throw ConfigError("langevin.sigma_first", "must exceed sigma_last");
    }
    if (!std::isfinite(sigma_first)) throw ConfigError("langevin.sigma_first", "must be finite");
}

NoiseSchedule LangevinConfig::schedule() const {
    validate();
    if (levels == 1) return NoiseSchedule({sigma_last});
    return spacing == ScheduleSpacing::Geometric ? NoiseSchedule::geometric(sigma_first, sigma_last, levels)
                                                 : NoiseSchedule::linear(sigma_first, sigma_last, levels);
}

std::string LangevinConfig::digest() const {
    return "L=" + std::to_string(levels) + ";T=" + std::to_string(iterations) + ";eps=" + shortest(epsilon) +
           ";tau=" + shortest(tau) + ";M=" + std::to_string(trajectories) + ";sigma=" + shortest(sigma_first) + ":" +
           shortest(sigma_last) + ";" + (spacing == ScheduleSpacing::Geometric ? "geometric" : "linear");
}

namespace detail {

double step_below_crossover(double sigma_l, double sigma_last, double s, double sigma0, double epsilon) noexcept {
    const double ratio = s == 0.0 ? 0.0 : (sigma_l * sigma_l * s * s) / (sigma0 * sigma0);
    return epsilon * sigma_l * sigma_l / (sigma_last * sigma_last) * (1.0 - ratio);
}

double step_above_crossover(double sigma_l, double sigma_last, double s, double sigma0, double epsilon) noexcept {
    return epsilon / (sigma_last * sigma_last) * (sigma_l * sigma_l - sigma0 * sigma0 / (s * s));
}

} // namespace detail

Eigen::VectorXd step_matrix(const NoiseSchedule& schedule, std::size_t level,
                            const Eigen::Ref<const Eigen::VectorXd>& s, double sigma0, double epsilon) {
    const double sigma_l = schedule[level];
    const double sigma_last = schedule.last();
    Eigen::VectorXd lambda(s.size());
    for (Eigen::Index j = 0; j < s.size(); ++j) {
        const double v = sigma_l * s(j) <= sigma0
                             ? detail::step_below_crossover(sigma_l, sigma_last, s(j), sigma0, epsilon)
                             : detail::step_above_crossover(sigma_l, sigma_last, s(j), sigma0, epsilon);
        // Rounding at the crossover can leave a value a few ulps below zero.
        lambda(j) = v < 0.0 ? 0.0 : v;
    }
    return lambda;
}

Eigen::VectorXd likelihood_score(const Eigen::Ref<const Eigen::VectorXd>& chi, const RealSystem& system,
                                 double sigma_l) {
    if (chi.size() != system.dim()) throw ContractError("likelihood_score: dimension mismatch");
    const LevelTerms terms(system, sigma_l);
    return terms.lik_coef.cwiseProduct(system.eta - system.s.cwiseProduct(chi));
}

Eigen::VectorXd posterior_score(const Eigen::Ref<const Eigen::VectorXd>& chi, const RealSystem& system,
                                double sigma_l, const ModulationPlan& plan) {
    check_system(system, plan);
    if (chi.size() != system.dim()) throw ContractError("posterior_score: dimension mismatch");
    const LevelTerms terms(system, sigma_l);
    const Eigen::VectorXd x_tilde = system.V * chi;
    const Eigen::VectorXd prior = system.V.transpose() * prior_score(x_tilde, sigma_l, plan);
    const Eigen::VectorXd lik = terms.lik_coef.cwiseProduct(system.eta - system.s.cwiseProduct(chi));
    return terms.use_lik.cwiseProduct(lik) + terms.use_prior.cwiseProduct(prior);
}

std::vector<TrajectoryResult> run_trajectories(const RealSystem& system, const LangevinConfig& config,
                                               const ModulationPlan& plan, std::span<RandomStream> streams,
                                               const TrajectoryObserver& observer) {
    check_system(system, plan);
    const NoiseSchedule schedule = config.schedule();
    const Eigen::Index n = system.dim();
    const auto batch = static_cast<Eigen::Index>(streams.size());

    Eigen::MatrixXd chi(n, batch);
    Eigen::MatrixXd x(n, batch);
    Eigen::MatrixXd mean(n, batch);
    Eigen::MatrixXd prior(n, batch);
    Eigen::MatrixXd drift(n, batch);
    Eigen::MatrixXd noise(n, batch);

    std::vector<TrajectoryResult> results(streams.size());
    std::vector<std::normal_distribution<double>> gauss(streams.size());
    std::vector<bool> alive(streams.size(), true);

    std::uniform_real_distribution<double> init(-1.0, 1.0);
    for (Eigen::Index m = 0; m < batch; ++m) {
        for (Eigen::Index j = 0; j < n; ++j) chi(j, m) = init(streams[static_cast<std::size_t>(m)]);
    }

    for (std::size_t l = 0; l < schedule.size(); ++l) {
        const double sigma_l = schedule[l];
        const double inv_var = 1.0 / (sigma_l * sigma_l);
        const LevelTerms terms(system, sigma_l);
        const Eigen::VectorXd lambda = step_matrix(schedule, l, system.s, system.sigma0, config.epsilon);
        const Eigen::VectorXd noise_scale = (2.0 * config.tau * lambda).cwiseSqrt();

        for (std::size_t t = 0; t < config.iterations; ++t) {
            for (Eigen::Index m = 0; m < batch; ++m) {
                const auto mi = static_cast<std::size_t>(m);
                if (!alive[mi]) {
                    noise.col(m).setZero();
                    continue;
                }
                for (Eigen::Index j = 0; j < n; ++j) noise(j, m) = noise_scale(j) * gauss[mi](streams[mi]);
            }

            x.noalias() = system.V * chi;
            conditional_mean_batch(x, sigma_l, plan, mean);
            mean -= x;
            mean *= inv_var;
            prior.noalias() = system.V.transpose() * mean;

            for (Eigen::Index m = 0; m < batch; ++m) {
                if (!alive[static_cast<std::size_t>(m)]) {
                    drift.col(m).setZero();
                    continue;
                }
                for (Eigen::Index j = 0; j < n; ++j) {
                    const double lik = terms.lik_coef(j) * (system.eta(j) - system.s(j) * chi(j, m));
                    const double score = terms.use_lik(j) * lik + terms.use_prior(j) * prior(j, m);
                    drift(j, m) = lambda(j) * score;
                }
            }

            if (observer) observer(IterationTrace{l, t, chi, drift, noise});

            chi += drift;
            chi += noise;

            for (Eigen::Index m = 0; m < batch; ++m) {
                const auto mi = static_cast<std::size_t>(m);
                if (!alive[mi]) continue;
                const auto col = chi.col(m);
                if (!col.allFinite() || col.cwiseAbs().maxCoeff() > kDivergenceBound) {
                    alive[mi] = false;
                    results[mi].diverged = true;
                    results[mi].failed_level = l;
                    results[mi].failed_iteration = t;
                    chi.col(m).setZero();
                }
            }
        }
    }

    for (Eigen::Index m = 0; m < batch; ++m) {
        auto& r = results[static_cast<std::size_t>(m)];
        r.chi = chi.col(m);
        if (!r.diverged) r.candidate = project(system.V * r.chi, plan);
    }
    return results;
}

SymbolVector run_trajectory(const RealSystem& system, const LangevinConfig& config, const ModulationPlan& plan,
                            RandomStream& rng, const TrajectoryObserver& observer) {
    auto results = run_trajectories(system, config, plan, std::span<RandomStream>(&rng, 1), observer);
    auto& r = results.front();
    if (r.diverged) throw DivergenceError(r.failed_level, r.failed_iteration);
    return std::move(r.candidate);
}

Detection detect_langevin(const RealSystem& system, const LangevinConfig& config, const ModulationPlan& plan,
                          const StreamKey& key) {
    config.validate();
    std::vector<RandomStream> streams;
    streams.reserve(config.trajectories);
    for (std::size_t m = 0; m < config.trajectories; ++m) streams.push_back(key.child(m).stream());

    auto results = run_trajectories(system, config, plan, streams);

    Detection best;
    best.residual = std::numeric_limits<double>::infinity();
    bool found = false;
    std::size_t first_failure = 0;
    for (std::size_t m = 0; m < results.size(); ++m) {
        if (results[m].diverged) {
            if (best.diverged++ == 0) first_failure = m;
            continue;
        }
        const double r = residual_norm2(system.H, system.y, results[m].candidate);
        if (!found || r < best.residual) {
            best.estimate = results[m].candidate;
            best.residual = r;
            best.chosen = m;
            found = true;
        }
    }
    if (!found) {
        throw DivergenceError(results[first_failure].failed_level, results[first_failure].failed_iteration);
    }
    return best;
}

SymbolVector detect(const Eigen::Ref<const Eigen::VectorXd>& y, const ComplexChannel& hc, double sigma0,
                    const LangevinConfig& config, const ModulationPlan& plan, const StreamKey& key) {
    const RealSystem system = build_real_system(hc, y, sigma0);
    return detect_langevin(system, config, plan, key).estimate;
}

} // namespace mimo
