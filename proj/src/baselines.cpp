#include "mimo/baselines.hpp"

#include <limits>
#include <vector>

#include "mimo/errors.hpp"

namespace mimo {

namespace {

struct Svd {
    Eigen::MatrixXd U;
    Eigen::VectorXd s;
    Eigen::MatrixXd V;
};

Svd thin_svd(const Eigen::Ref<const Eigen::MatrixXd>& h) {
    if (!h.allFinite()) throw DetectorError("channel has non-finite entries");
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(h, Eigen::ComputeThinU | Eigen::ComputeThinV);
    return {svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

Eigen::VectorXd zf_from_svd(const Eigen::MatrixXd& V, const Eigen::VectorXd& s, const Eigen::VectorXd& eta) {
    if (s.size() == 0 || s.minCoeff() <= kRankTolerance) {
        throw DetectorError("zero forcing needs a full-column-rank channel");
    }
    return V * eta.cwiseQuotient(s);
}

Eigen::VectorXd mmse_from_svd(const Eigen::MatrixXd& V, const Eigen::VectorXd& s, const Eigen::VectorXd& eta,
                              double sigma0) {
    if (!(sigma0 >= 0.0)) throw ContractError("mmse: sigma0 must be nonnegative");
    if (sigma0 == 0.0) {
        if (s.size() == 0 || s.minCoeff() <= kRankTolerance) {
            throw DetectorError("mmse: normal matrix is singular (sigma0 = 0 and rank-deficient channel)");
        }
        return zf_from_svd(V, s, eta);
    }
    const double v0 = sigma0 * sigma0;
    Eigen::VectorXd gain(s.size());
    for (Eigen::Index j = 0; j < s.size(); ++j) gain(j) = s(j) / (s(j) * s(j) + v0);
    return V * gain.cwiseProduct(eta);
}

void check_dims(const Eigen::Ref<const Eigen::VectorXd>& y, const Eigen::Ref<const Eigen::MatrixXd>& h,
                const ModulationPlan& plan) {
    if (h.rows() != y.size() || h.cols() != static_cast<Eigen::Index>(2 * plan.n_users())) {
        throw ContractError("detector input dimensions do not match the modulation plan");
    }
}

} // namespace

Eigen::VectorXd zf_estimate(const RealSystem& system) { return zf_from_svd(system.V, system.s, system.eta); }

Eigen::VectorXd mmse_estimate(const RealSystem& system) {
    return mmse_from_svd(system.V, system.s, system.eta, system.sigma0);
}

SymbolVector zf_detect(const RealSystem& system, const ModulationPlan& plan) {
    return project(zf_estimate(system), plan);
}

SymbolVector zf_detect(const Eigen::Ref<const Eigen::VectorXd>& y, const Eigen::Ref<const Eigen::MatrixXd>& h,
                       const ModulationPlan& plan) {
    check_dims(y, h, plan);
    const Svd svd = thin_svd(h);
    return project(zf_from_svd(svd.V, svd.s, svd.U.transpose() * y), plan);
}

SymbolVector mmse_detect(const RealSystem& system, const ModulationPlan& plan) {
    return project(mmse_estimate(system), plan);
}

SymbolVector mmse_detect(const Eigen::Ref<const Eigen::VectorXd>& y, const Eigen::Ref<const Eigen::MatrixXd>& h,
                         double sigma0, const ModulationPlan& plan) {
    check_dims(y, h, plan);
    const Svd svd = thin_svd(h);
    return project(mmse_from_svd(svd.V, svd.s, svd.U.transpose() * y, sigma0), plan);
}

SymbolVector ml_exhaustive(const Eigen::Ref<const Eigen::VectorXd>& y, const Eigen::Ref<const Eigen::MatrixXd>& h,
                           const ModulationPlan& plan) {
    check_dims(y, h, plan);
    if (plan.product_size() > kMaxExhaustiveCandidates) {
        throw DetectorError("exhaustive ML: product alphabet of " + std::to_string(plan.product_size()) +
                            " candidates exceeds the cap of 2^20");
    }
    const std::size_t n = plan.n_users();
    const auto nu = static_cast<Eigen::Index>(n);

    // contrib[j][k] = H * embed(point k at user j)
    std::vector<std::vector<Eigen::VectorXd>> contrib(n);
    for (std::size_t j = 0; j < n; ++j) {
        const auto& c = plan.user(j);
        const auto jj = static_cast<Eigen::Index>(j);
        contrib[j].reserve(c.order());
        for (const auto& p : c.points()) contrib[j].push_back(h.col(jj) * p.real() + h.col(jj + nu) * p.imag());
    }

    std::vector<std::size_t> digit(n, 0);
    std::vector<Eigen::VectorXd> prefix(n, Eigen::VectorXd::Zero(y.size()));
    auto rebuild = [&](std::size_t from) {
        for (std::size_t j = from; j < n; ++j) {
            prefix[j] = (j == 0 ? Eigen::VectorXd::Zero(y.size()) : prefix[j - 1]) + contrib[j][digit[j]];
        }
    };
    rebuild(0);

    double best = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> best_digit = digit;
    while (true) {
        const double r = (y - prefix[n - 1]).squaredNorm();
        if (r < best) {
            best = r;
            best_digit = digit;
        }
        std::size_t p = n;
        while (p > 0) {
            --p;
            if (++digit[p] < plan.user(p).order()) break;
            digit[p] = 0;
            if (p == 0) {
                p = n;
                break;
            }
        }
        if (p == n) break;
        rebuild(p);
    }

    std::vector<Complex> x(n);
    for (std::size_t j = 0; j < n; ++j) x[j] = plan.user(j).point(best_digit[j]);
    return SymbolVector::from_complex(std::move(x));
}

} // namespace mimo
