#pragma once

#include <Eigen/Dense>

#include "mimo/channel.hpp"
#include "mimo/constellation.hpp"

namespace mimo {

// Largest product alphabet the exhaustive search accepts.
inline constexpr double kMaxExhaustiveCandidates = 1 << 20;

// Smallest singular value ZF accepts.
inline constexpr double kRankTolerance = 1e-10;

// Unquantized linear estimates.
Eigen::VectorXd zf_estimate(const RealSystem& system);
Eigen::VectorXd mmse_estimate(const RealSystem& system);

// Zero forcing: project(H^+ y).
SymbolVector zf_detect(const RealSystem& system, const ModulationPlan& plan);
SymbolVector zf_detect(const Eigen::Ref<const Eigen::VectorXd>& y, const Eigen::Ref<const Eigen::MatrixXd>& h,
                       const ModulationPlan& plan);

// MMSE: project((H^T H + sigma0^2 I)^{-1} H^T y). Uses the system's SVD.
SymbolVector mmse_detect(const RealSystem& system, const ModulationPlan& plan);
SymbolVector mmse_detect(const Eigen::Ref<const Eigen::VectorXd>& y, const Eigen::Ref<const Eigen::MatrixXd>& h,
                         double sigma0, const ModulationPlan& plan);

// Exact argmin of ||y - H x||^2 over the product alphabet by enumeration.
// Candidates are visited in lexicographic order of per-user point indices
// (user 0 most significant); the first minimum wins.
SymbolVector ml_exhaustive(const Eigen::Ref<const Eigen::VectorXd>& y, const Eigen::Ref<const Eigen::MatrixXd>& h,
                           const ModulationPlan& plan);

} // namespace mimo
