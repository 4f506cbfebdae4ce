#pragma once

#include <cstddef>
#include <filesystem>
#include <string>

#include <Eigen/Dense>

#include "mimo/constellation.hpp"
#include "mimo/rng.hpp"

namespace mimo {

// Complex N_r x N_u channel (rows: receive antennas, columns: users).
struct ComplexChannel {
    Eigen::MatrixXcd gains;

    std::size_t n_rx() const noexcept { return static_cast<std::size_t>(gains.rows()); }
    std::size_t n_users() const noexcept { return static_cast<std::size_t>(gains.cols()); }
};

// Real-embedded system together with its economy SVD H = U diag(s) V^T and the
// spectral observation eta = U^T y. Immutable once built.
struct RealSystem {
    Eigen::MatrixXd H;  // 2N_r x 2N_u
    Eigen::MatrixXd U;  // 2N_r x 2N_u
    Eigen::VectorXd s;  // 2N_u, nonincreasing
    Eigen::MatrixXd V;  // 2N_u x 2N_u
    Eigen::VectorXd y;  // 2N_r
    Eigen::VectorXd eta;
    double sigma0 = 0.0;

    Eigen::Index dim() const noexcept { return s.size(); }
};

// [[Re, -Im], [Im, Re]].
Eigen::MatrixXd real_embedding(const ComplexChannel& hc);

// i.i.d. CN(0, 1/N_r) entries.
ComplexChannel rayleigh_channel(std::size_t n_rx, std::size_t n_users, RandomStream& rng);

// R_ij = rho^|i-j|.
Eigen::MatrixXd exp_correlation(std::size_t n, double rho);

// Symmetric square root of a symmetric PSD matrix via eigendecomposition.
// Eigenvalues in [-1e-10, 0) are clamped to zero; anything more negative throws.
Eigen::MatrixXd matrix_sqrt_psd(const Eigen::Ref<const Eigen::MatrixXd>& r);

// H = R_r^{1/2} H_e R_u^{1/2} with exponential correlation on both sides,
// applied to the complex channel. Precompute the roots once per sweep with
// KroneckerRoots when drawing many channels.
struct KroneckerRoots {
    Eigen::MatrixXd rx;
    Eigen::MatrixXd users;
    double rho = 0.0;

    static KroneckerRoots make(std::size_t n_rx, std::size_t n_users, double rho);
};

ComplexChannel kronecker_channel(std::size_t n_rx, std::size_t n_users, double rho, RandomStream& rng);
ComplexChannel kronecker_channel(const KroneckerRoots& roots, RandomStream& rng);

// Per-real-component noise standard deviation for a linear SNR, using the
// analytic E||Hx||^2 = N_u of a unit-power, 1/N_r-variance channel and
// E||z||^2 = 2 N_r sigma0^2. An infinite SNR yields zero.
double sigma0_from_snr(double snr_linear, std::size_t n_rx, std::size_t n_users);
double snr_db_to_linear(double snr_db);

// y = H x + z, z ~ N(0, sigma0^2 I) per real component.
Eigen::VectorXd transmit(const Eigen::Ref<const Eigen::MatrixXd>& h, const SymbolVector& x, double sigma0,
                         RandomStream& rng);

RealSystem build_real_system(const ComplexChannel& hc, const Eigen::Ref<const Eigen::VectorXd>& y, double sigma0);
RealSystem build_real_system(const ComplexChannel& hc, const SymbolVector& x, double sigma0, RandomStream& rng);

// Per-entry standard deviation of the annealed spectral noise,
// d_j(l) = sqrt(|sigma0^2 - sigma_l^2 s_j^2|). Column l holds level l.
struct AnnealedNoiseModel {
    Eigen::MatrixXd stddev; // 2N_u x L

    static AnnealedNoiseModel make(const Eigen::Ref<const Eigen::VectorXd>& s, double sigma0,
                                   std::span<const double> sigmas);
};

// ||y - H x||^2.
double residual_norm2(const Eigen::Ref<const Eigen::MatrixXd>& h, const Eigen::Ref<const Eigen::VectorXd>& y,
                      const SymbolVector& x);

// Complex text I/O: one matrix row per line, comma-separated entries written
// as `a+bi` / `a-bi` with 17 significant digits.
std::string format_complex(Complex z);
Complex parse_complex(const std::string& text);
Eigen::MatrixXcd read_complex_csv(const std::filesystem::path& path);
void write_complex_csv(const std::filesystem::path& path, const Eigen::MatrixXcd& m);

ComplexChannel read_channel_csv(const std::filesystem::path& path);
void write_channel_csv(const std::filesystem::path& path, const ComplexChannel& hc);

} // namespace mimo
