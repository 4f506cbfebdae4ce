#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mimo/rng.hpp"

namespace mimo {

using Complex = std::complex<double>;

// Finite symbol alphabet with unit average power.
//
// Square QAM alphabets are stored real-major: point k sits at
// (levels[k / m], levels[k % m]) with m = sqrt(K) and levels ascending, so
// index 0 is the most negative corner. That ordering is what "lowest index"
// tie-breaks refer to.
class Constellation {
public:
    // Arbitrary alphabet, rescaled to unit mean power. Points must be distinct.
    static Constellation from_points(std::vector<Complex> points, std::string name = "custom");
    static Constellation qam(int order);

    std::size_t order() const noexcept { return points_.size(); }
    std::span<const Complex> points() const noexcept { return points_; }
    const Complex& point(std::size_t k) const { return points_.at(k); }
    const std::string& name() const noexcept { return name_; }

    double mean_power() const noexcept;

    // Per-axis amplitude levels when the alphabet is a product grid levels x levels.
    bool is_square_grid() const noexcept { return !axis_levels_.empty(); }
    std::span<const double> axis_levels() const noexcept { return axis_levels_; }

    // Index of the nearest point in the complex plane; ties go to the lowest index.
    std::size_t nearest(Complex z) const noexcept;

    bool contains(Complex z) const noexcept;

private:
    Constellation() = default;

    std::vector<Complex> points_;
    std::vector<double> axis_levels_;
    std::string name_;
};

Constellation make_qam(int order);

// Per-user alphabets. Users may mix modulation orders.
class ModulationPlan {
public:
    explicit ModulationPlan(std::vector<std::shared_ptr<const Constellation>> per_user);
    static ModulationPlan uniform(std::shared_ptr<const Constellation> c, std::size_t n_users);
    static ModulationPlan uniform_qam(int order, std::size_t n_users);
    // One entry per user; equal orders share a single Constellation instance.
    static ModulationPlan from_orders(std::span<const int> orders);

    std::size_t n_users() const noexcept { return per_user_.size(); }
    const Constellation& user(std::size_t j) const { return *per_user_.at(j); }
    std::shared_ptr<const Constellation> user_ptr(std::size_t j) const { return per_user_.at(j); }

    // Product of the per-user alphabet sizes, saturating at max double.
    double product_size() const noexcept;
    bool is_mixed() const noexcept;

private:
    std::vector<std::shared_ptr<const Constellation>> per_user_;
};

// One transmitted (or detected) vector: complex per-user symbols together with
// the real embedding [Re(x); Im(x)].
struct SymbolVector {
    std::vector<Complex> symbols;
    Eigen::VectorXd real;

    static SymbolVector from_complex(std::vector<Complex> symbols);
    std::size_t n_users() const noexcept { return symbols.size(); }
    bool operator==(const SymbolVector& other) const { return symbols == other.symbols; }
};

Eigen::VectorXd embed(std::span<const Complex> x);
std::vector<Complex> unembed(const Eigen::Ref<const Eigen::VectorXd>& x);

SymbolVector sample_symbols(const ModulationPlan& plan, RandomStream& rng);

// Per-user nearest-point quantizer on a real-embedded vector of length 2*N_u.
SymbolVector project(const Eigen::Ref<const Eigen::VectorXd>& x_cont, const ModulationPlan& plan);

// Posterior mean of the clean symbol given x_tilde = x + N(0, sigma^2 I), with x
// uniform on each user's alphabet. Computed per complex user as a 2-D mixture.
Eigen::VectorXd conditional_mean(const Eigen::Ref<const Eigen::VectorXd>& x_tilde, double sigma,
                                 const ModulationPlan& plan);

// Column-wise conditional_mean over a 2N_u x M batch. `out` must be preallocated.
// Square-grid alphabets take a separable per-axis path; results agree with the
// joint evaluation to rounding.
void conditional_mean_batch(const Eigen::Ref<const Eigen::MatrixXd>& x_tilde, double sigma,
                            const ModulationPlan& plan, Eigen::Ref<Eigen::MatrixXd> out);

// Joint 2-D evaluation only; reference path for the batch routine.
Eigen::VectorXd conditional_mean_joint(const Eigen::Ref<const Eigen::VectorXd>& x_tilde, double sigma,
                                       const ModulationPlan& plan);

// Score of the Gaussian-smoothed prior via Tweedie: (E[x | x_tilde] - x_tilde) / sigma^2.
Eigen::VectorXd prior_score(const Eigen::Ref<const Eigen::VectorXd>& x_tilde, double sigma,
                            const ModulationPlan& plan);

struct ErrorCount {
    std::size_t errors = 0;
    std::size_t symbols = 0;

    double rate() const noexcept {
        return symbols == 0 ? 0.0 : static_cast<double>(errors) / static_cast<double>(symbols);
    }
    ErrorCount& operator+=(const ErrorCount& o) noexcept {
        errors += o.errors;
        symbols += o.symbols;
        return *this;
    }
};

ErrorCount symbol_errors(const SymbolVector& est, const SymbolVector& truth);
ErrorCount symbol_error_rate(std::span<const SymbolVector> est, std::span<const SymbolVector> truth);

} // namespace mimo
