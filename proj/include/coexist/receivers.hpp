// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef COEXIST_RECEIVERS_HPP
#define COEXIST_RECEIVERS_HPP

#include "coexist/numerics.hpp"
#include "coexist/uplink_signal.hpp"

#include <optional>
#include <string>
#include <vector>

namespace coexist
{

enum class Estimator
{
    Perfect,
    PM,
    MMSE
};

enum class Detector
{
    CM,
    ZF,
    LMMSE,
    FZF,
    BZF,
    AEZF
};

Estimator parse_estimator(const std::string &name);
Detector parse_detector(const std::string &name);
std::string to_string(Estimator e);
std::string to_string(Detector d);

// ---- channel estimation ---------------------------------------------------

// r_{q,k} = Y_q conj(P~_k)
CVector build_r_qk(const CMatrix &Y_q, const PilotBook &book, int k, int q);

// r_{q,k} / sqrt(p_{p,k})
CVector pm_estimate(const CMatrix &Y_q, const PilotBook &book, int k, int q);

// R_{q,k} = a I + G G^H with a = sum_j p_{p,j} beta_j^2 |P_j^T conj(P~_k)|^2 + sigma2_w ||P~_k||^2
// and G G^H the training clutter covariance; D_{q,k} = gain * R^{-1}, gain = sqrt(p_{p,k}) beta_k^2.
struct MmseMatrices
{
    double gain = 0.0;
    ScaledIdentityPlusLowRank R;

    CMatrix R_dense() const { return R.dense(); }
    CMatrix D_dense() const { return gain * R.inverse_dense(); }
    CVector apply_D(const CVector &r) const { return gain * R.solve(r); }
    double trace_D() const { return gain * R.trace_inverse(); }
    double trace_R() const { return R.trace(); }
};

// The scalar a of R_{q,k} alone.
double r_qk_scale(const PilotBook &book, const std::vector<double> &betas, double sigma2_w, int q, int k);
MmseMatrices mmse_matrices(const PilotBook &book, const std::vector<double> &betas, const LowRankPsd &training_clutter,
                           double sigma2_w, int q, int k);

inline CVector mmse_estimate(const CVector &r, const MmseMatrices &mm) { return mm.apply_D(r); }

// ---- combiners --------------------------------------------------------------

struct Combiner
{
    Detector detector = Detector::CM;
    CVector v;
    CMatrix basis; // orthonormal basis of the nulled subspace, empty for CM/LMMSE
};

// Symbol estimate v^H y / (sqrt(p) v^H h_hat); for CM this is h^H y / (sqrt(p) ||h||^2).
cplx soft_symbol(const CVector &v, const CVector &y, const CVector &h_hat, double p);

Combiner cm_combiner(const CVector &h_hat);

// Orthonormal basis for the nonzero-eigenvalue eigenvectors of F F^H.
CMatrix clutter_subspace(const LowRankPsd &K);
// Same from an explicit Hermitian matrix through the eigendecomposition.
CMatrix clutter_subspace_dense(const CMatrix &K);

Combiner projection_combiner(Detector tag, const CVector &h_hat, const CMatrix &basis);

inline Combiner zf_combiner(const CVector &h_hat, const CMatrix &clutter_basis)
{
    return projection_combiner(Detector::ZF, h_hat, clutter_basis);
}

// All users' LMMSE vectors v_k = sqrt(p_k) K_y^{-1} h_hat_k, as columns of an M x K matrix.
CMatrix lmmse_combiners(const CMatrix &H_hat, const std::vector<double> &powers, double sigma2_w,
                        const LowRankPsd &K_C);
Combiner lmmse_combiner(const CMatrix &H_hat, const std::vector<double> &powers, double sigma2_w,
                        const LowRankPsd &K_C, int k);

// FZF via the literal subspace of K_y - sigma2 I - p_k h_k h_k^H.
Combiner fzf_combiner_dense(const CMatrix &H_hat, const std::vector<double> &powers, const CMatrix &K_C, int k);

// All users' FZF vectors from the dual basis of A = [H_hat, U_c], one Gram solve.
CMatrix fzf_combiners(const CMatrix &H_hat, const CMatrix &clutter_basis);
Combiner fzf_combiner(const CMatrix &H_hat, const CMatrix &clutter_basis, int k);

// [B]_{l,m} = J0(2 pi spacing (l - m))
RMatrix bessel_matrix(int M, double spacing_ratio);

struct BesselBasis
{
    RVector eigenvalues; // descending
    CMatrix basis;       // P dominant eigenvectors
};

BesselBasis bessel_basis(int M, double spacing_ratio, int P);
// Smallest P whose dominant eigenvalues carry at least the given fraction of tr(B).
int bessel_rank_for_energy(const RVector &eigenvalues_desc, double fraction);

inline Combiner bzf_combiner(const CVector &h_hat, const BesselBasis &b)
{
    return projection_combiner(Detector::BZF, h_hat, b.basis);
}

struct AoaEstimate
{
    std::vector<double> grid;       // theta^{(r)}
    RVector score;                  // f(theta^{(r)})
    double mean = 0.0;
    double variance = 0.0;
    double threshold = 0.0;
    std::vector<int> selected;      // grid indices at or above threshold
    std::vector<double> angles() const;
};

struct AoaGrid
{
    std::vector<double> theta;
    CMatrix steering; // M x R

    AoaGrid(int M, int R, double spacing_ratio);
};

// f(theta) = sum_n |b(theta)^H y^{(n)}| over the grid, thresholded at mean + multiplier * stddev.
AoaEstimate estimate_clutter_aoas(const CMatrix &Y, const AoaGrid &grid, double multiplier);
AoaEstimate estimate_clutter_aoas(const CMatrix &Y, int R, double spacing_ratio, double multiplier);

// Orthonormal basis of span{b(theta)}; errors when the set has M or more angles.
CMatrix aezf_basis(const std::vector<double> &angles, int M, double spacing_ratio);

inline Combiner aezf_combiner(const CVector &h_hat, const CMatrix &basis)
{
    return projection_combiner(Detector::AEZF, h_hat, basis);
}

} // namespace coexist

#endif
