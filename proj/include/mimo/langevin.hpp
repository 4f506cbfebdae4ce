#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mimo/channel.hpp"
#include "mimo/constellation.hpp"
#include "mimo/rng.hpp"

namespace mimo {

enum class ScheduleSpacing { Geometric, Linear };

// Annealing ladder sigma_1 > sigma_2 > ... > sigma_L > 0.
class NoiseSchedule {
public:
    explicit NoiseSchedule(std::vector<double> sigmas);

    static NoiseSchedule geometric(double sigma_first, double sigma_last, std::size_t levels);
    static NoiseSchedule linear(double sigma_first, double sigma_last, std::size_t levels);

    std::size_t size() const noexcept { return sigmas_.size(); }
    double operator[](std::size_t l) const { return sigmas_.at(l); }
    double first() const noexcept { return sigmas_.front(); }
    double last() const noexcept { return sigmas_.back(); }
    std::span<const double> sigmas() const noexcept { return sigmas_; }

private:
    std::vector<double> sigmas_;
};

NoiseSchedule geometric_schedule(double sigma_first, double sigma_last, std::size_t levels);

struct LangevinConfig {
    std::size_t levels = 20;       // L
    std::size_t iterations = 70;   // T, per level
    double epsilon = 3e-5;
    double tau = 0.5;              // temperature
    std::size_t trajectories = 20; // M
    double sigma_first = 1.0;
    double sigma_last = 0.01;
    ScheduleSpacing spacing = ScheduleSpacing::Geometric;

    // Throws ConfigError naming the offending field.
    void validate() const;
    NoiseSchedule schedule() const;
    // Canonical `key=value;...` summary, free of commas.
    std::string digest() const;
};

namespace detail {
// The two printed branches of the step-size rule, each valid on its own side
// of the crossover sigma_l * s_j = sigma0.
double step_below_crossover(double sigma_l, double sigma_last, double s, double sigma0, double epsilon) noexcept;
double step_above_crossover(double sigma_l, double sigma_last, double s, double sigma0, double epsilon) noexcept;
} // namespace detail

// Diagonal of the per-level step matrix: first branch when sigma_l s_j <= sigma0
// (including s_j = 0), second branch otherwise. `level` is 0-based.
Eigen::VectorXd step_matrix(const NoiseSchedule& schedule, std::size_t level,
                            const Eigen::Ref<const Eigen::VectorXd>& s, double sigma0, double epsilon);

// Below this, |sigma0^2 - sigma_l^2 s_j^2| is treated as zero by the pseudo-inverse.
inline constexpr double kPseudoInverseThreshold = 1e-12;

// Spectral likelihood score s_j (eta_j - s_j chi_j) / |sigma0^2 - sigma_l^2 s_j^2|.
Eigen::VectorXd likelihood_score(const Eigen::Ref<const Eigen::VectorXd>& chi, const RealSystem& system,
                                 double sigma_l);

// Case-wise posterior score: likelihood plus rotated prior where sigma0 >= sigma_l s_j,
// likelihood alone where sigma0 < sigma_l s_j, prior alone where s_j = 0.
Eigen::VectorXd posterior_score(const Eigen::Ref<const Eigen::VectorXd>& chi, const RealSystem& system,
                                double sigma_l, const ModulationPlan& plan);

// Iterate magnitude beyond which a trajectory is abandoned.
inline constexpr double kDivergenceBound = 1e3;

// Snapshot handed to an observer before each update of a batch of
// trajectories (one column each): chi_next = chi + drift + noise.
struct IterationTrace {
    std::size_t level;
    std::size_t iteration;
    const Eigen::MatrixXd& chi;
    const Eigen::MatrixXd& drift;
    const Eigen::MatrixXd& noise;
};
using TrajectoryObserver = std::function<void(const IterationTrace&)>;

struct TrajectoryResult {
    SymbolVector candidate;  // empty if diverged
    Eigen::VectorXd chi;     // final spectral iterate
    bool diverged = false;
    std::size_t failed_level = 0;
    std::size_t failed_iteration = 0;
};

// Runs one trajectory per stream, advancing the whole batch together. Each
// column draws its initial point and its noise only from its own stream, so
// the random inputs of a trajectory do not depend on the batch it runs in.
std::vector<TrajectoryResult> run_trajectories(const RealSystem& system, const LangevinConfig& config,
                                               const ModulationPlan& plan, std::span<RandomStream> streams,
                                               const TrajectoryObserver& observer = {});

// Single trajectory; throws DivergenceError on divergence.
SymbolVector run_trajectory(const RealSystem& system, const LangevinConfig& config, const ModulationPlan& plan,
                            RandomStream& rng, const TrajectoryObserver& observer = {});

struct Detection {
    SymbolVector estimate;
    double residual = 0.0;
    std::size_t chosen = 0;     // winning trajectory index
    std::size_t diverged = 0;   // dropped trajectories
};

// M trajectories with streams key.child(m); returns the candidate with the
// smallest ||y - H x||^2 (lowest index on ties).
Detection detect_langevin(const RealSystem& system, const LangevinConfig& config, const ModulationPlan& plan,
                          const StreamKey& key);

SymbolVector detect(const Eigen::Ref<const Eigen::VectorXd>& y, const ComplexChannel& hc, double sigma0,
                    const LangevinConfig& config, const ModulationPlan& plan, const StreamKey& key);

} // namespace mimo
