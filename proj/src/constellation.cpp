#include "mimo/constellation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "mimo/errors.hpp"

namespace mimo {

namespace {

constexpr double kWeightFloor = 1e-300;

void check_sigma(double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw ContractError("sigma must be positive and finite, got " + std::to_string(sigma));
    }
}

void check_length(Eigen::Index rows, const ModulationPlan& plan) {
    if (rows != static_cast<Eigen::Index>(2 * plan.n_users())) {
        throw ContractError("expected real vector of length " + std::to_string(2 * plan.n_users()) +
                            ", got " + std::to_string(rows));
    }
}

// Softmax-weighted mean of evenly spaced ascending `levels` under exponents
// -(u - a_k)^2 / (2 sigma^2). Weights are walked outward from the nearest level
// by their ratio, which itself shrinks by the constant factor `decay`.
double axis_mean(double u, std::span<const double> levels, double inv_two_var, double decay) {
    const auto k_max = static_cast<std::ptrdiff_t>(levels.size()) - 1;
    const double delta = levels[1] - levels[0];
    const auto k0 = std::clamp(static_cast<std::ptrdiff_t>(std::lround((u - levels[0]) / delta)), std::ptrdiff_t{0}, k_max);
    const double d = u - levels[static_cast<std::size_t>(k0)];
    double num = levels[static_cast<std::size_t>(k0)];
    double den = 1.0;

    double w = 1.0;
    double ratio = std::exp(inv_two_var * delta * (2.0 * d - delta));
    const double up = ratio;
    for (auto k = k0 + 1; k <= k_max; ++k) {
        w *= ratio;
        if (w < kWeightFloor) break;
        num += w * levels[static_cast<std::size_t>(k)];
        den += w;
        ratio *= decay;
    }
    w = 1.0;
    // The two starting ratios multiply to `decay`.
    ratio = up > 0.0 && decay > 0.0 ? decay / up : std::exp(inv_two_var * delta * (-2.0 * d - delta));
    for (auto k = k0 - 1; k >= 0; --k) {
        w *= ratio;
        if (w < kWeightFloor) break;
        num += w * levels[static_cast<std::size_t>(k)];
        den += w;
        ratio *= decay;
    }
    return num / den;
}

Complex joint_mean(Complex z, const Constellation& c, double inv_two_var) {
    const auto pts = c.points();
    double max_e = -std::numeric_limits<double>::infinity();
    for (const auto& p : pts) max_e = std::max(max_e, -std::norm(z - p) * inv_two_var);
    Complex num{0.0, 0.0};
    double den = 0.0;
    for (const auto& p : pts) {
        double w = std::exp(-std::norm(z - p) * inv_two_var - max_e);
        if (w < kWeightFloor) w = 0.0;
        num += w * p;
        den += w;
    }
    return num / den;
}

} // namespace

Constellation Constellation::from_points(std::vector<Complex> points, std::string name) {
    if (points.empty()) throw ContractError("constellation needs at least one point");
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (!std::isfinite(points[i].real()) || !std::isfinite(points[i].imag())) {
            throw ContractError("constellation point " + std::to_string(i) + " is not finite");
        }
        for (std::size_t k = 0; k < i; ++k) {
            if (points[i] == points[k]) {
                throw ContractError("constellation points " + std::to_string(k) + " and " + std::to_string(i) +
                                    " coincide");
            }
        }
    }
    double power = 0.0;
    for (const auto& p : points) power += std::norm(p);
    power /= static_cast<double>(points.size());
    if (!(power > 0.0)) throw ContractError("constellation has zero power");
    const double g = 1.0 / std::sqrt(power);
    for (auto& p : points) p *= g;

    Constellation c;
    c.points_ = std::move(points);
    c.name_ = std::move(name);
    return c;
}

Constellation Constellation::qam(int order) {
    int m = 0;
    switch (order) {
    case 4: m = 2; break;
    case 16: m = 4; break;
    case 64: m = 8; break;
    default:
        throw ConfigError("modulation", "unsupported QAM order " + std::to_string(order) + " (expected 4, 16 or 64)");
    }
    // Mean power of the odd-integer grid {±1, ±3, ..., ±(m-1)}^2 is 2(m^2 - 1)/3.
    const double scale = 1.0 / std::sqrt(2.0 * (m * m - 1) / 3.0);
    std::vector<double> levels(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) levels[static_cast<std::size_t>(i)] = (2 * i - (m - 1)) * scale;

    Constellation c;
    c.points_.reserve(static_cast<std::size_t>(order));
    for (double re : levels) {
        for (double im : levels) c.points_.emplace_back(re, im);
    }
    c.axis_levels_ = std::move(levels);
    c.name_ = "qam" + std::to_string(order);
    return c;
}

Constellation make_qam(int order) { return Constellation::qam(order); }

double Constellation::mean_power() const noexcept {
    double s = 0.0;
    for (const auto& p : points_) s += std::norm(p);
    return s / static_cast<double>(points_.size());
}

std::size_t Constellation::nearest(Complex z) const noexcept {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < points_.size(); ++k) {
        const double d = std::norm(z - points_[k]);
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    return best;
}

bool Constellation::contains(Complex z) const noexcept {
    return std::find(points_.begin(), points_.end(), z) != points_.end();
}

ModulationPlan::ModulationPlan(std::vector<std::shared_ptr<const Constellation>> per_user)
    : per_user_(std::move(per_user)) {
    if (per_user_.empty()) throw ContractError("modulation plan needs at least one user");
    for (std::size_t j = 0; j < per_user_.size(); ++j) {
        if (!per_user_[j]) throw ContractError("modulation plan entry " + std::to_string(j) + " is null");
    }
}

ModulationPlan ModulationPlan::uniform(std::shared_ptr<const Constellation> c, std::size_t n_users) {
    return ModulationPlan(std::vector<std::shared_ptr<const Constellation>>(n_users, std::move(c)));
}

ModulationPlan ModulationPlan::uniform_qam(int order, std::size_t n_users) {
    return uniform(std::make_shared<const Constellation>(Constellation::qam(order)), n_users);
}

ModulationPlan ModulationPlan::from_orders(std::span<const int> orders) {
    std::map<int, std::shared_ptr<const Constellation>> cache;
    std::vector<std::shared_ptr<const Constellation>> per_user;
    per_user.reserve(orders.size());
    for (int order : orders) {
        auto& slot = cache[order];
        if (!slot) slot = std::make_shared<const Constellation>(Constellation::qam(order));
        per_user.push_back(slot);
    }
    return ModulationPlan(std::move(per_user));
}

double ModulationPlan::product_size() const noexcept {
    double n = 1.0;
    for (const auto& c : per_user_) n *= static_cast<double>(c->order());
    return n;
}

bool ModulationPlan::is_mixed() const noexcept {
    return std::any_of(per_user_.begin(), per_user_.end(),
                       [&](const auto& c) { return c->name() != per_user_.front()->name(); });
}

Eigen::VectorXd embed(std::span<const Complex> x) {
    const auto n = static_cast<Eigen::Index>(x.size());
    Eigen::VectorXd r(2 * n);
    for (Eigen::Index j = 0; j < n; ++j) {
        r(j) = x[static_cast<std::size_t>(j)].real();
        r(j + n) = x[static_cast<std::size_t>(j)].imag();
    }
    return r;
}

std::vector<Complex> unembed(const Eigen::Ref<const Eigen::VectorXd>& x) {
    if (x.size() % 2 != 0) throw ContractError("real embedding must have even length");
    const Eigen::Index n = x.size() / 2;
    std::vector<Complex> out(static_cast<std::size_t>(n));
    for (Eigen::Index j = 0; j < n; ++j) out[static_cast<std::size_t>(j)] = {x(j), x(j + n)};
    return out;
}

SymbolVector SymbolVector::from_complex(std::vector<Complex> symbols) {
    SymbolVector v;
    v.real = embed(symbols);
    v.symbols = std::move(symbols);
    return v;
}

SymbolVector sample_symbols(const ModulationPlan& plan, RandomStream& rng) {
    std::vector<Complex> x(plan.n_users());
    for (std::size_t j = 0; j < plan.n_users(); ++j) {
        const auto& c = plan.user(j);
        std::uniform_int_distribution<std::size_t> pick(0, c.order() - 1);
        x[j] = c.point(pick(rng));
    }
    return SymbolVector::from_complex(std::move(x));
}

SymbolVector project(const Eigen::Ref<const Eigen::VectorXd>& x_cont, const ModulationPlan& plan) {
    check_length(x_cont.size(), plan);
    const auto n = static_cast<Eigen::Index>(plan.n_users());
    std::vector<Complex> x(plan.n_users());
    for (Eigen::Index j = 0; j < n; ++j) {
        const auto& c = plan.user(static_cast<std::size_t>(j));
        x[static_cast<std::size_t>(j)] = c.point(c.nearest({x_cont(j), x_cont(j + n)}));
    }
    return SymbolVector::from_complex(std::move(x));
}

void conditional_mean_batch(const Eigen::Ref<const Eigen::MatrixXd>& x_tilde, double sigma,
                            const ModulationPlan& plan, Eigen::Ref<Eigen::MatrixXd> out) {
    check_sigma(sigma);
    check_length(x_tilde.rows(), plan);
    if (out.rows() != x_tilde.rows() || out.cols() != x_tilde.cols()) {
        throw ContractError("conditional_mean_batch: output shape mismatch");
    }
    const double inv_two_var = 1.0 / (2.0 * sigma * sigma);
    const auto n = static_cast<Eigen::Index>(plan.n_users());
    for (Eigen::Index j = 0; j < n; ++j) {
        const auto& c = plan.user(static_cast<std::size_t>(j));
        if (c.is_square_grid()) {
            const auto levels = c.axis_levels();
            const double delta = levels[1] - levels[0];
            const double decay = std::exp(-2.0 * inv_two_var * delta * delta);
            for (Eigen::Index m = 0; m < x_tilde.cols(); ++m) {
                out(j, m) = axis_mean(x_tilde(j, m), levels, inv_two_var, decay);
                out(j + n, m) = axis_mean(x_tilde(j + n, m), levels, inv_two_var, decay);
            }
        } else {
            for (Eigen::Index m = 0; m < x_tilde.cols(); ++m) {
                const Complex mean = joint_mean({x_tilde(j, m), x_tilde(j + n, m)}, c, inv_two_var);
                out(j, m) = mean.real();
                out(j + n, m) = mean.imag();
            }
        }
    }
}

Eigen::VectorXd conditional_mean(const Eigen::Ref<const Eigen::VectorXd>& x_tilde, double sigma,
                                 const ModulationPlan& plan) {
    Eigen::VectorXd out(x_tilde.size());
    conditional_mean_batch(x_tilde, sigma, plan, out);
    return out;
}

Eigen::VectorXd conditional_mean_joint(const Eigen::Ref<const Eigen::VectorXd>& x_tilde, double sigma,
                                       const ModulationPlan& plan) {
    check_sigma(sigma);
    check_length(x_tilde.size(), plan);
    const double inv_two_var = 1.0 / (2.0 * sigma * sigma);
    const auto n = static_cast<Eigen::Index>(plan.n_users());
    Eigen::VectorXd out(x_tilde.size());
    for (Eigen::Index j = 0; j < n; ++j) {
        const Complex mean = joint_mean({x_tilde(j), x_tilde(j + n)}, plan.user(static_cast<std::size_t>(j)),
                                        inv_two_var);
        out(j) = mean.real();
        out(j + n) = mean.imag();
    }
    return out;
}

Eigen::VectorXd prior_score(const Eigen::Ref<const Eigen::VectorXd>& x_tilde, double sigma,
                            const ModulationPlan& plan) {
    return (conditional_mean(x_tilde, sigma, plan) - x_tilde) / (sigma * sigma);
}

ErrorCount symbol_errors(const SymbolVector& est, const SymbolVector& truth) {
    if (est.n_users() != truth.n_users()) {
        throw ContractError("symbol_errors: estimate has " + std::to_string(est.n_users()) +
                            " users, truth has " + std::to_string(truth.n_users()));
    }
    ErrorCount c;
    c.symbols = truth.n_users();
    for (std::size_t j = 0; j < truth.n_users(); ++j) {
        if (est.symbols[j] != truth.symbols[j]) ++c.errors;
    }
    return c;
}

ErrorCount symbol_error_rate(std::span<const SymbolVector> est, std::span<const SymbolVector> truth) {
    if (est.size() != truth.size()) {
        throw ContractError("symbol_error_rate: batch sizes differ (" + std::to_string(est.size()) + " vs " +
                            std::to_string(truth.size()) + ")");
    }
    ErrorCount total;
    for (std::size_t i = 0; i < est.size(); ++i) total += symbol_errors(est[i], truth[i]);
    return total;
}

} // namespace mimo
