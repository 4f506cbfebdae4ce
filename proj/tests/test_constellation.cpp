#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <random>
#include <vector>

#include "mimo/constellation.hpp"
#include "mimo/errors.hpp"

using namespace mimo;

namespace {

// log of (1/K) sum_k N(z; x_k, sigma^2 I_2), one complex user, via log-sum-exp.
double mixture_logpdf(Complex z, std::span<const Complex> pts, double sigma) {
    std::vector<double> e;
    for (const auto& p : pts) e.push_back(-std::norm(z - p) / (2.0 * sigma * sigma));
    const double mx = *std::max_element(e.begin(), e.end());
    double acc = 0.0;
    for (double v : e) acc += std::exp(v - mx);
    return mx + std::log(acc / static_cast<double>(pts.size())) - std::log(2.0 * M_PI * sigma * sigma);
}

double plan_logpdf(const Eigen::VectorXd& x, const ModulationPlan& plan, double sigma) {
    const auto n = static_cast<Eigen::Index>(plan.n_users());
    double total = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        total += mixture_logpdf({x(j), x(j + n)}, plan.user(static_cast<std::size_t>(j)).points(), sigma);
    }
    return total;
}

} // namespace

TEST_CASE("qpsk points and scaling") {
    const auto c = make_qam(4);
    REQUIRE(c.order() == 4);
    for (const auto& p : c.points()) {
        CHECK(std::abs(std::abs(p.real()) - 1.0 / std::sqrt(2.0)) < 1e-15);
        CHECK(std::abs(std::abs(p.imag()) - 1.0 / std::sqrt(2.0)) < 1e-15);
    }
    CHECK(c.is_square_grid());
    CHECK(c.name() == "qam4");
}

TEST_CASE("16-qam and 64-qam scale factors by enumeration") {
    for (int order : {16, 64}) {
        const int m = static_cast<int>(std::lround(std::sqrt(order)));
        double power = 0.0;
        for (int a = -(m - 1); a <= m - 1; a += 2)
            for (int b = -(m - 1); b <= m - 1; b += 2) power += a * a + b * b;
        power /= order;
        const double scale = 1.0 / std::sqrt(power);
        if (order == 16) CHECK(power == doctest::Approx(10.0));
        if (order == 64) CHECK(power == doctest::Approx(42.0));

        const auto c = make_qam(order);
        REQUIRE(c.order() == static_cast<std::size_t>(order));
        for (int a = -(m - 1); a <= m - 1; a += 2)
            for (int b = -(m - 1); b <= m - 1; b += 2) CHECK(c.contains(Complex(a * scale, b * scale)));
    }
}

TEST_CASE("unit mean power for every supported order") {
    for (int order : {4, 16, 64}) CHECK(std::abs(make_qam(order).mean_power() - 1.0) < 1e-12);
}

TEST_CASE("unsupported order is a configuration error") {
    for (int order : {0, 2, 8, 32, 256}) CHECK_THROWS_AS(make_qam(order), ConfigError);
}

TEST_CASE("custom alphabets are normalized and must be distinct") {
    const auto c = Constellation::from_points({{2, 0}, {-2, 0}});
    CHECK(std::abs(c.mean_power() - 1.0) < 1e-12);
    CHECK_FALSE(c.is_square_grid());
    CHECK_THROWS_AS(Constellation::from_points({{1, 0}, {1, 0}}), ContractError);
}

TEST_CASE("uniform sampling frequencies") {
    const auto plan = ModulationPlan::uniform_qam(4, 1);
    RandomStream rng(StreamKey(11).stream());
    std::map<std::size_t, int> counts;
    const int n = 100000;
    for (int i = 0; i < n; ++i) counts[plan.user(0).nearest(sample_symbols(plan, rng).symbols[0])]++;
    REQUIRE(counts.size() == 4);
    for (const auto& [k, v] : counts) CHECK(std::abs(v / double(n) - 0.25) <= 0.01);
}

TEST_CASE("mixed plan samples stay on each user's alphabet") {
    const std::vector<int> orders{16, 64, 16, 64, 4};
    const auto plan = ModulationPlan::from_orders(orders);
    CHECK(plan.is_mixed());
    CHECK(plan.user_ptr(0) == plan.user_ptr(2));
    RandomStream rng(StreamKey(3).stream());
    for (int i = 0; i < 2000; ++i) {
        const auto x = sample_symbols(plan, rng);
        for (std::size_t j = 0; j < orders.size(); ++j) REQUIRE(plan.user(j).contains(x.symbols[j]));
        REQUIRE(x.real == embed(x.symbols));
    }
}

TEST_CASE("sampling is deterministic under a fixed seed") {
    const auto plan = ModulationPlan::uniform_qam(16, 8);
    RandomStream a(StreamKey(5).stream());
    RandomStream b(StreamKey(5).stream());
    for (int i = 0; i < 100; ++i) CHECK(sample_symbols(plan, a) == sample_symbols(plan, b));
}

TEST_CASE("embedding layout") {
    const std::vector<Complex> x{{1, 2}, {3, -4}};
    const Eigen::VectorXd r = embed(x);
    CHECK(r(0) == 1);
    CHECK(r(1) == 3);
    CHECK(r(2) == 2);
    CHECK(r(3) == -4);
    CHECK(unembed(r) == x);
}

TEST_CASE("projection examples") {
    const auto qpsk = ModulationPlan::uniform_qam(4, 1);
    const double h = 1.0 / std::sqrt(2.0);
    Eigen::VectorXd v(2);
    v << 0.9 * h, 0.6 * h;
    CHECK(project(v, qpsk).symbols[0] == Complex(h, h));

    const auto plan = ModulationPlan::uniform_qam(16, 1);
    for (const auto& p : plan.user(0).points()) {
        v << p.real(), p.imag();
        CHECK(project(v, plan).symbols[0] == p);
    }

    // Midpoint between two horizontally adjacent points: lower index wins.
    const auto& c = plan.user(0);
    const Complex a = c.point(0);
    const Complex b = c.point(4);
    REQUIRE(a.imag() == b.imag());
    v << 0.5 * (a.real() + b.real()), a.imag();
    CHECK(project(v, plan).symbols[0] == a);

    Eigen::VectorXd wrong(3);
    CHECK_THROWS_AS(project(wrong, plan), ContractError);
}

TEST_CASE("projection is idempotent and lands on the alphabet") {
    const std::vector<int> orders{4, 16, 64, 16};
    const auto plan = ModulationPlan::from_orders(orders);
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int i = 0; i < 500; ++i) {
        Eigen::VectorXd v(8);
        for (auto& e : v) e = u(rng);
        const auto once = project(v, plan);
        for (std::size_t j = 0; j < orders.size(); ++j) REQUIRE(plan.user(j).contains(once.symbols[j]));
        CHECK(project(once.real, plan) == once);
    }
}

TEST_CASE("conditional mean limits") {
    const auto plan = ModulationPlan::uniform_qam(16, 2);
    Eigen::VectorXd x(4);
    x << 0.3, -1.2, 0.05, 0.7;
    CHECK(conditional_mean(x, 1e6, plan).cwiseAbs().maxCoeff() < 1e-6);

    const Complex p0 = plan.user(0).point(5);
    const Complex p1 = plan.user(1).point(10);
    x << p0.real() + 1e-5, p1.real() - 2e-5, p0.imag() - 1e-5, p1.imag();
    const Eigen::VectorXd m = conditional_mean(x, 1e-4, plan);
    CHECK(std::abs(m(0) - p0.real()) < 1e-8);
    CHECK(std::abs(m(1) - p1.real()) < 1e-8);
    CHECK(std::abs(m(2) - p0.imag()) < 1e-8);
    CHECK(std::abs(m(3) - p1.imag()) < 1e-8);

    CHECK_THROWS_AS(conditional_mean(x, 0.0, plan), ContractError);
    CHECK_THROWS_AS(conditional_mean(x, -1.0, plan), ContractError);
}

TEST_CASE("conditional mean of qpsk by direct summation") {
    const double h = 1.0 / std::sqrt(2.0);
    const std::array<Complex, 4> pts{Complex(h, h), Complex(h, -h), Complex(-h, h), Complex(-h, -h)};
    const double sigma = 0.5;
    const Complex z(0.3, 0.1);
    Complex num(0, 0);
    double den = 0;
    for (const auto& p : pts) {
        const double w = std::exp(-std::norm(z - p) / (2 * sigma * sigma));
        num += w * p;
        den += w;
    }
    const Complex expected = num / den;

    const auto plan = ModulationPlan::uniform_qam(4, 1);
    Eigen::VectorXd x(2);
    x << z.real(), z.imag();
    const Eigen::VectorXd m = conditional_mean(x, sigma, plan);
    CHECK(std::abs(m(0) - expected.real()) < 1e-14);
    CHECK(std::abs(m(1) - expected.imag()) < 1e-14);
}

TEST_CASE("separable and joint conditional means agree") {
    const std::vector<int> orders{4, 16, 64, 64, 16};
    const auto plan = ModulationPlan::from_orders(orders);
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(-1.8, 1.8);
    std::uniform_real_distribution<double> lg(std::log(1e-3), std::log(3.0));
    for (int i = 0; i < 2000; ++i) {
        Eigen::VectorXd x(10);
        for (auto& e : x) e = u(rng);
        const double sigma = std::exp(lg(rng));
        const Eigen::VectorXd a = conditional_mean(x, sigma, plan);
        const Eigen::VectorXd b = conditional_mean_joint(x, sigma, plan);
        REQUIRE((a - b).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("prior score at a constellation point is near zero") {
    const auto plan = ModulationPlan::uniform_qam(64, 3);
    std::vector<Complex> x{plan.user(0).point(0), plan.user(1).point(37), plan.user(2).point(63)};
    const Eigen::VectorXd score = prior_score(embed(x), 0.01, plan);
    CHECK(score.cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("prior score matches finite differences of the mixture log-density") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    std::uniform_real_distribution<double> lg(std::log(0.01), std::log(1.0));
    std::uniform_int_distribution<int> pick(0, 2);
    const std::array<int, 3> choices{4, 16, 64};
    const double h = 1e-5;
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::vector<int> orders{choices[pick(rng)], choices[pick(rng)]};
        const auto plan = ModulationPlan::from_orders(orders);
        Eigen::VectorXd x(4);
        for (auto& e : x) e = u(rng);
        const double sigma = std::exp(lg(rng));

        Eigen::VectorXd fd(4);
        for (Eigen::Index i = 0; i < 4; ++i) {
            Eigen::VectorXd xp = x, xm = x;
            xp(i) += h;
            xm(i) -= h;
            fd(i) = (plan_logpdf(xp, plan, sigma) - plan_logpdf(xm, plan, sigma)) / (2 * h);
        }
        const Eigen::VectorXd score = prior_score(x, sigma, plan);
        const double rel = (score - fd).norm() / std::max(fd.norm(), 1e-12);
        worst = std::max(worst, rel);
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("prior score is a pure function") {
    const auto plan = ModulationPlan::uniform_qam(16, 4);
    Eigen::VectorXd x(8);
    x << 0.1, -0.2, 0.3, 0.9, -1.1, 0.0, 0.25, 0.6;
    const Eigen::VectorXd a = prior_score(x, 0.2, plan);
    const Eigen::VectorXd b = prior_score(x, 0.2, plan);
    CHECK(a == b);
}

TEST_CASE("conditional mean stays inside the alphabet's bounding box") {
    const std::vector<int> orders{4, 16, 64};
    const auto plan = ModulationPlan::from_orders(orders);
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    std::uniform_real_distribution<double> lg(std::log(1e-3), std::log(10.0));
    for (int i = 0; i < 1000; ++i) {
        Eigen::VectorXd x(6);
        for (auto& e : x) e = u(rng);
        const Eigen::VectorXd m = conditional_mean(x, std::exp(lg(rng)), plan);
        for (std::size_t j = 0; j < 3; ++j) {
            double lo_re = 1e9, hi_re = -1e9, lo_im = 1e9, hi_im = -1e9;
            for (const auto& p : plan.user(j).points()) {
                lo_re = std::min(lo_re, p.real());
                hi_re = std::max(hi_re, p.real());
                lo_im = std::min(lo_im, p.imag());
                hi_im = std::max(hi_im, p.imag());
            }
            const auto jj = static_cast<Eigen::Index>(j);
            REQUIRE(m(jj) >= lo_re - 1e-12);
            REQUIRE(m(jj) <= hi_re + 1e-12);
            REQUIRE(m(jj + 3) >= lo_im - 1e-12);
            REQUIRE(m(jj + 3) <= hi_im + 1e-12);
        }
    }
}

namespace {

// Offset of up to `frac` of the half-spacing, pointing toward the origin on each axis.
double inward(double coord, double frac, double half_spacing) {
    return coord - std::copysign(frac * half_spacing, coord);
}

std::vector<double> sigma_ladder() {
    std::vector<double> ladder;
    for (int i = 0; i < 40; ++i) ladder.push_back(std::pow(0.01, i / 39.0));
    return ladder;
}

} // namespace

TEST_CASE("conditional mean approaches the nearest point monotonically as sigma shrinks") {
    const std::vector<int> orders{16, 64, 4};
    const auto plan = ModulationPlan::from_orders(orders);
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> frac(0.0, 0.95);
    const std::array<double, 3> half{1.0 / std::sqrt(10.0), 1.0 / std::sqrt(42.0), 1.0 / std::sqrt(2.0)};

    for (int trial = 0; trial < 300; ++trial) {
        std::vector<Complex> pts, x;
        for (std::size_t j = 0; j < orders.size(); ++j) {
            std::uniform_int_distribution<std::size_t> k(0, plan.user(j).order() - 1);
            const Complex p = plan.user(j).point(k(rng));
            pts.push_back(p);
            // trial 0 sits exactly on the points
            const double fr = trial == 0 ? 0.0 : frac(rng), fi = trial == 0 ? 0.0 : frac(rng);
            x.emplace_back(inward(p.real(), fr, half[j]), inward(p.imag(), fi, half[j]));
        }
        const Eigen::VectorXd xt = embed(x);
        const Eigen::VectorXd target = embed(pts);
        double prev = std::numeric_limits<double>::infinity();
        for (double sigma : sigma_ladder()) {
            const double dist = (conditional_mean(xt, sigma, plan) - target).norm();
            REQUIRE(dist <= prev + 1e-15);
            prev = dist;
        }
        // residual neighbour weight at sigma = 0.01 is at most about exp(-24)
        CHECK(prev < 1e-9);
    }
}

// Pushed away from the origin, the mean first sweeps past the point toward x_tilde
// and only then settles back, so the distance is not monotone there.
TEST_CASE("outward offsets can make the approach non-monotone") {
    const auto plan = ModulationPlan::uniform_qam(64, 1);
    const double half = 1.0 / std::sqrt(42.0);
    const Complex p = plan.user(0).point(54); // (5, 5) / sqrt(42)
    REQUIRE(p.real() == doctest::Approx(5.0 / std::sqrt(42.0)));
    const Eigen::VectorXd xt = embed(std::vector<Complex>{p + Complex(0.4 * half, 0.4 * half)});
    const Eigen::VectorXd target = embed(std::vector<Complex>{p});
    bool increased = false;
    double prev = std::numeric_limits<double>::infinity();
    for (double sigma : sigma_ladder()) {
        const double dist = (conditional_mean(xt, sigma, plan) - target).norm();
        if (dist > prev + 1e-12) increased = true;
        prev = dist;
    }
    CHECK(increased);
    CHECK(prev < 1e-12);
}

TEST_CASE("symbol error counting") {
    const auto plan = ModulationPlan::uniform_qam(16, 16);
    RandomStream rng(StreamKey(1).stream());
    const auto a = sample_symbols(plan, rng);
    const auto b = sample_symbols(plan, rng);
    const std::vector<SymbolVector> truth{a, b};

    CHECK(symbol_error_rate(truth, truth).rate() == 0.0);

    auto flip = [&](SymbolVector v, std::vector<std::size_t> idx) {
        for (auto j : idx) {
            const auto k = plan.user(j).nearest(v.symbols[j]);
            v.symbols[j] = plan.user(j).point((k + 1) % 16);
        }
        return SymbolVector::from_complex(v.symbols);
    };
    std::vector<std::size_t> all(16);
    for (std::size_t j = 0; j < 16; ++j) all[j] = j;
    const std::vector<SymbolVector> wrong{flip(a, all), flip(b, all)};
    CHECK(symbol_error_rate(wrong, truth).rate() == 1.0);

    const std::vector<SymbolVector> three{flip(a, {0, 5}), flip(b, {15})};
    const auto c = symbol_error_rate(three, truth);
    CHECK(c.errors == 3);
    CHECK(c.symbols == 32);
    CHECK(c.rate() == 3.0 / 32.0);

    const std::vector<SymbolVector> short_batch{a};
    CHECK_THROWS_AS(symbol_error_rate(short_batch, truth), ContractError);
}
