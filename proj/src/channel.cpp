#include "mimo/channel.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include "mimo/errors.hpp"

namespace mimo {

namespace {

bool all_finite(const Eigen::MatrixXcd& m) {
    return m.real().allFinite() && m.imag().allFinite();
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

} // namespace

Eigen::MatrixXd real_embedding(const ComplexChannel& hc) {
    if (!all_finite(hc.gains)) throw ContractError("real_embedding: channel has non-finite entries");
    const Eigen::Index r = hc.gains.rows();
    const Eigen::Index c = hc.gains.cols();
    Eigen::MatrixXd h(2 * r, 2 * c);
    h.topLeftCorner(r, c) = hc.gains.real();
    h.topRightCorner(r, c) = -hc.gains.imag();
    h.bottomLeftCorner(r, c) = hc.gains.imag();
    h.bottomRightCorner(r, c) = hc.gains.real();
    return h;
}

ComplexChannel rayleigh_channel(std::size_t n_rx, std::size_t n_users, RandomStream& rng) {
    if (n_users < 1 || n_rx < n_users) {
        throw ContractError("rayleigh_channel: need n_rx >= n_users >= 1 (got " + std::to_string(n_rx) + "x" +
                            std::to_string(n_users) + ")");
    }
    std::normal_distribution<double> gauss(0.0, std::sqrt(0.5 / static_cast<double>(n_rx)));
    ComplexChannel hc{Eigen::MatrixXcd(static_cast<Eigen::Index>(n_rx), static_cast<Eigen::Index>(n_users))};
    for (Eigen::Index i = 0; i < hc.gains.rows(); ++i) {
        for (Eigen::Index j = 0; j < hc.gains.cols(); ++j) {
            const double re = gauss(rng);
            const double im = gauss(rng);
            hc.gains(i, j) = {re, im};
        }
    }
    return hc;
}

Eigen::MatrixXd exp_correlation(std::size_t n, double rho) {
    if (!(rho >= 0.0 && rho < 1.0)) {
        throw ContractError("exp_correlation: rho must lie in [0, 1), got " + std::to_string(rho));
    }
    const auto N = static_cast<Eigen::Index>(n);
    Eigen::MatrixXd r(N, N);
    for (Eigen::Index i = 0; i < N; ++i) {
        for (Eigen::Index j = 0; j < N; ++j) r(i, j) = std::pow(rho, static_cast<double>(std::abs(i - j)));
    }
    return r;
}

Eigen::MatrixXd matrix_sqrt_psd(const Eigen::Ref<const Eigen::MatrixXd>& r) {
    if (r.rows() != r.cols()) throw ContractError("matrix_sqrt_psd: matrix is not square");
    if (!r.allFinite()) throw ContractError("matrix_sqrt_psd: matrix has non-finite entries");
    const double scale = std::max(1.0, r.cwiseAbs().maxCoeff());
    if ((r - r.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
        throw ContractError("matrix_sqrt_psd: matrix is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(r);
    if (eig.info() != Eigen::Success) throw ContractError("matrix_sqrt_psd: eigendecomposition failed");
    Eigen::VectorXd lambda = eig.eigenvalues();
    for (Eigen::Index i = 0; i < lambda.size(); ++i) {
        if (lambda(i) < -1e-10) {
            throw ContractError("matrix_sqrt_psd: matrix is indefinite (eigenvalue " + std::to_string(lambda(i)) + ")");
        }
        lambda(i) = lambda(i) < 0.0 ? 0.0 : std::sqrt(lambda(i));
    }
    const Eigen::MatrixXd& q = eig.eigenvectors();
    Eigen::MatrixXd s = q * lambda.asDiagonal() * q.transpose();
    return 0.5 * (s + s.transpose());
}

KroneckerRoots KroneckerRoots::make(std::size_t n_rx, std::size_t n_users, double rho) {
    return {matrix_sqrt_psd(exp_correlation(n_rx, rho)), matrix_sqrt_psd(exp_correlation(n_users, rho)), rho};
}

ComplexChannel kronecker_channel(const KroneckerRoots& roots, RandomStream& rng) {
    const auto n_rx = static_cast<std::size_t>(roots.rx.rows());
    const auto n_users = static_cast<std::size_t>(roots.users.rows());
    ComplexChannel he = rayleigh_channel(n_rx, n_users, rng);
    if (roots.rho == 0.0) return he;
    return {roots.rx.cast<Complex>() * he.gains * roots.users.cast<Complex>()};
}

ComplexChannel kronecker_channel(std::size_t n_rx, std::size_t n_users, double rho, RandomStream& rng) {
    return kronecker_channel(KroneckerRoots::make(n_rx, n_users, rho), rng);
}

double sigma0_from_snr(double snr_linear, std::size_t n_rx, std::size_t n_users) {
    if (!(snr_linear > 0.0)) throw ContractError("sigma0_from_snr: SNR must be positive");
    if (n_rx == 0 || n_users == 0) throw ContractError("sigma0_from_snr: empty system");
    if (std::isinf(snr_linear)) return 0.0;
    return std::sqrt(static_cast<double>(n_users) / (2.0 * static_cast<double>(n_rx) * snr_linear));
}

double snr_db_to_linear(double snr_db) {
    if (std::isinf(snr_db) && snr_db > 0) return std::numeric_limits<double>::infinity();
    return std::pow(10.0, snr_db / 10.0);
}

Eigen::VectorXd transmit(const Eigen::Ref<const Eigen::MatrixXd>& h, const SymbolVector& x, double sigma0,
                         RandomStream& rng) {
    if (h.cols() != x.real.size()) {
        throw ContractError("transmit: channel has " + std::to_string(h.cols()) + " real columns, symbol vector has " +
                            std::to_string(x.real.size()) + " entries");
    }
    if (!(sigma0 >= 0.0)) throw ContractError("transmit: sigma0 must be nonnegative");
    Eigen::VectorXd y = h * x.real;
    if (sigma0 > 0.0) {
        std::normal_distribution<double> gauss(0.0, sigma0);
        for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += gauss(rng);
    }
    return y;
}

RealSystem build_real_system(const ComplexChannel& hc, const Eigen::Ref<const Eigen::VectorXd>& y, double sigma0) {
    if (!all_finite(hc.gains)) throw ContractError("build_real_system: channel has non-finite entries");
    if (y.size() != 2 * hc.gains.rows()) {
        throw ContractError("build_real_system: observation length " + std::to_string(y.size()) + " does not match " +
                            std::to_string(2 * hc.gains.rows()));
    }
    if (hc.gains.rows() < hc.gains.cols()) throw ContractError("build_real_system: need n_rx >= n_users");
    if (!(sigma0 >= 0.0) || !std::isfinite(sigma0)) throw ContractError("build_real_system: invalid sigma0");

    RealSystem sys;
    sys.H = real_embedding(hc);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(sys.H, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success) throw ContractError("build_real_system: SVD failed");
    sys.U = svd.matrixU();
    sys.s = svd.singularValues();
    sys.V = svd.matrixV();
    sys.y = y;
    sys.eta = sys.U.transpose() * sys.y;
    sys.sigma0 = sigma0;
    return sys;
}

RealSystem build_real_system(const ComplexChannel& hc, const SymbolVector& x, double sigma0, RandomStream& rng) {
    const Eigen::VectorXd y = transmit(real_embedding(hc), x, sigma0, rng);
    return build_real_system(hc, y, sigma0);
}

AnnealedNoiseModel AnnealedNoiseModel::make(const Eigen::Ref<const Eigen::VectorXd>& s, double sigma0,
                                            std::span<const double> sigmas) {
    AnnealedNoiseModel m;
    m.stddev.resize(s.size(), static_cast<Eigen::Index>(sigmas.size()));
    const double v0 = sigma0 * sigma0;
    for (Eigen::Index l = 0; l < m.stddev.cols(); ++l) {
        const double sl = sigmas[static_cast<std::size_t>(l)];
        for (Eigen::Index j = 0; j < s.size(); ++j) {
            m.stddev(j, l) = std::sqrt(std::abs(v0 - sl * sl * s(j) * s(j)));
        }
    }
    return m;
}

double residual_norm2(const Eigen::Ref<const Eigen::MatrixXd>& h, const Eigen::Ref<const Eigen::VectorXd>& y,
                      const SymbolVector& x) {
    if (h.cols() != x.real.size() || h.rows() != y.size()) throw ContractError("residual_norm2: dimension mismatch");
    return (y - h * x.real).squaredNorm();
}

std::string format_complex(Complex z) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%.17g%+.17gi", z.real(), z.imag());
    return buf;
}

Complex parse_complex(const std::string& text) {
    const std::string t = trim(text);
    if (t.empty()) throw ContractError("empty complex entry");
    const char* begin = t.c_str();
    char* end = nullptr;
    errno = 0;
    const double re = std::strtod(begin, &end);
    if (end == begin) throw ContractError("malformed complex entry '" + t + "'");
    if (*end == '\0') return {re, 0.0};
    if (*end != '+' && *end != '-') throw ContractError("malformed complex entry '" + t + "'");
    const char* im_begin = end;
    const double im = std::strtod(im_begin, &end);
    if (end == im_begin || *end != 'i' || *(end + 1) != '\0') {
        throw ContractError("malformed complex entry '" + t + "'");
    }
    return {re, im};
}

Eigen::MatrixXcd read_complex_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<std::vector<Complex>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        std::vector<Complex> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(parse_complex(cell));
            } catch (const ContractError& e) {
                throw ContractError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
            }
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw ContractError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                                std::to_string(rows.front().size()) + " columns, got " + std::to_string(row.size()));
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ContractError(path.string() + ": no data");
    Eigen::MatrixXcd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        }
    }
    return m;
}

void write_complex_csv(const std::filesystem::path& path, const Eigen::MatrixXcd& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j) out << ',';
            out << format_complex(m(i, j));
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

ComplexChannel read_channel_csv(const std::filesystem::path& path) {
    ComplexChannel hc{read_complex_csv(path)};
    if (!all_finite(hc.gains)) throw ContractError(path.string() + ": channel has non-finite entries");
    return hc;
}

void write_channel_csv(const std::filesystem::path& path, const ComplexChannel& hc) {
    write_complex_csv(path, hc.gains);
}

} // namespace mimo
