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

#include "coexist/receivers.hpp"
#include "coexist/channel_model.hpp"

#include <algorithm>

namespace coexist
{

Estimator parse_estimator(const std::string &name)
{
    if (name == "perfect")
        return Estimator::Perfect;
    if (name == "pm")
        return Estimator::PM;
    if (name == "mmse")
        return Estimator::MMSE;
    throw Error("unknown estimator '" + name + "' (expected perfect|pm|mmse)");
}

Detector parse_detector(const std::string &name)
{
    static const std::pair<const char *, Detector> table[] = {{"cm", Detector::CM},       {"zf", Detector::ZF},
                                                              {"lmmse", Detector::LMMSE}, {"fzf", Detector::FZF},
                                                              {"bzf", Detector::BZF},     {"aezf", Detector::AEZF}};
    for (const auto &[s, d] : table)
        if (name == s)
            return d;
    throw Error("unknown detector '" + name + "' (expected cm|zf|lmmse|fzf|bzf|aezf)");
}

std::string to_string(Estimator e)
{
    switch (e)
    {
    case Estimator::Perfect:
        return "perfect";
    case Estimator::PM:
        return "pm";
    case Estimator::MMSE:
        return "mmse";
    }
    return "?";
}

std::string to_string(Detector d)
{
    switch (d)
    {
    case Detector::CM:
        return "cm";
    case Detector::ZF:
        return "zf";
    case Detector::LMMSE:
        return "lmmse";
    case Detector::FZF:
        return "fzf";
    case Detector::BZF:
        return "bzf";
    case Detector::AEZF:
        return "aezf";
    }
    return "?";
}

CVector build_r_qk(const CMatrix &Y_q, const PilotBook &book, int k, int q)
{
    const CVector &pt = book.normalized(k, q);
    if (Y_q.cols() != pt.size())
        throw DimensionError("build_r_qk: observable has " + std::to_string(Y_q.cols()) + " columns, pilot length " +
                             std::to_string(pt.size()));
    return Y_q * pt.conjugate();
}

CVector pm_estimate(const CMatrix &Y_q, const PilotBook &book, int k, int q)
{
    const double pp = book.power.at(k);
    if (!(pp > 0.0) || book.pilot(k, q).squaredNorm() == 0.0)
        throw Error("pm_estimate: zero pilot power or zero-norm pilot for user " + std::to_string(k));
    return build_r_qk(Y_q, book, k, q) / std::sqrt(pp);
}

double r_qk_scale(const PilotBook &book, const std::vector<double> &betas, double sigma2_w, int q, int k)
{
    if (static_cast<int>(betas.size()) != book.users())
        throw DimensionError("mmse_matrices: betas and pilot book disagree on K");
    double a = sigma2_w * book.normalized(k, q).squaredNorm();
    for (int j = 0; j < book.users(); ++j)
        a += book.power[j] * betas[j] * betas[j] * std::norm(book.cross(j, k, q));
    if (!(a > 0.0))
        throw SingularMatrixError("mmse_matrices: R is not positive definite (zero noise and pilot power)");
    return a;
}

MmseMatrices mmse_matrices(const PilotBook &book, const std::vector<double> &betas, const LowRankPsd &training_clutter,
                           double sigma2_w, int q, int k)
{
    const double a = r_qk_scale(book, betas, sigma2_w, q, k);
    const auto M = static_cast<std::size_t>(training_clutter.dim());
    return MmseMatrices{std::sqrt(book.power[k]) * betas[k] * betas[k],
                        ScaledIdentityPlusLowRank(M, a, training_clutter.factor)};
}

cplx soft_symbol(const CVector &v, const CVector &y, const CVector &h_hat, double p)
{
    return v.dot(y) / (std::sqrt(p) * v.dot(h_hat));
}

Combiner cm_combiner(const CVector &h_hat)
{
    if (h_hat.squaredNorm() == 0.0)
        throw DegenerateCombinerError("cm_combiner: zero channel estimate");
    return {Detector::CM, h_hat, CMatrix(h_hat.size(), 0)};
}

CMatrix clutter_subspace(const LowRankPsd &K) { return range_basis(K.factor); }

CMatrix clutter_subspace_dense(const CMatrix &K)
{
    const auto eig = hermitian_eig(K, true);
    const double lmax = eig.eigenvalues(0);
    if (!(lmax > 0.0))
        return CMatrix(K.rows(), 0);
    Eigen::Index keep = 0;
    while (keep < eig.eigenvalues.size() && eig.eigenvalues(keep) >= tol::rank_cutoff * lmax)
        ++keep;
    return eig.eigenvectors.leftCols(keep);
}

Combiner projection_combiner(Detector tag, const CVector &h_hat, const CMatrix &basis)
{
    const double hn = h_hat.norm();
    if (hn == 0.0)
        throw DegenerateCombinerError("projection combiner: zero channel estimate");
    CVector v = pinv_project(basis, h_hat);
    if (v.norm() < tol::degenerate_projection * hn)
        throw DegenerateCombinerError("projection combiner (" + to_string(tag) +
                                      "): estimate lies inside the nulled subspace");
    return {tag, std::move(v), basis};
}

CMatrix lmmse_combiners(const CMatrix &H_hat, const std::vector<double> &powers, double sigma2_w,
                        const LowRankPsd &K_C)
{
    const auto M = H_hat.rows();
    const auto K = H_hat.cols();
    if (static_cast<Eigen::Index>(powers.size()) != K)
        throw DimensionError("lmmse_combiners: one power per user required");
    const auto r = K_C.factor.cols();
    CMatrix F(M, K + r);
    for (Eigen::Index j = 0; j < K; ++j)
        F.col(j) = std::sqrt(powers[j]) * H_hat.col(j);
    if (r)
        F.rightCols(r) = K_C.factor;
    const ScaledIdentityPlusLowRank Ky(static_cast<std::size_t>(M), sigma2_w, std::move(F));
    CMatrix V = Ky.solve(H_hat);
    for (Eigen::Index j = 0; j < K; ++j)
        V.col(j) *= std::sqrt(powers[j]);
    return V;
}

Combiner lmmse_combiner(const CMatrix &H_hat, const std::vector<double> &powers, double sigma2_w,
                        const LowRankPsd &K_C, int k)
{
    CVector v = lmmse_combiners(H_hat, powers, sigma2_w, K_C).col(k);
    if (v.squaredNorm() == 0.0)
        throw DegenerateCombinerError("lmmse_combiner: zero combiner");
    return {Detector::LMMSE, std::move(v), CMatrix(H_hat.rows(), 0)};
}

Combiner fzf_combiner_dense(const CMatrix &H_hat, const std::vector<double> &powers, const CMatrix &K_C, int k)
{
    CMatrix S = K_C;
    for (Eigen::Index j = 0; j < H_hat.cols(); ++j)
        if (j != k)
            S += powers[j] * H_hat.col(j) * H_hat.col(j).adjoint();
    const CMatrix U = clutter_subspace_dense(S);
    return projection_combiner(Detector::FZF, H_hat.col(k), U);
}

CMatrix fzf_combiners(const CMatrix &H_hat, const CMatrix &clutter_basis)
{
    const auto M = H_hat.rows();
    const auto K = H_hat.cols();
    const auto r = clutter_basis.cols();
    if (K + r > M)
        throw DegenerateCombinerError("fzf: users plus clutter rank exceed the array size");
    // Channel columns are normalized first; their norms can sit many orders of
    // magnitude below the unit basis columns.
    RVector hn(K);
    CMatrix A(M, K + r);
    for (Eigen::Index k = 0; k < K; ++k)
    {
        hn(k) = H_hat.col(k).norm();
        if (hn(k) == 0.0)
            throw DegenerateCombinerError("fzf: zero channel estimate for user " + std::to_string(k));
        A.col(k) = H_hat.col(k) / hn(k);
    }
    if (r)
        A.rightCols(r) = clutter_basis;
    // Column k of A (A^H A)^{-1} is orthogonal to every other column of A and
    // has unit inner product with column k, so it is the projection residual
    // of the normalized h_k scaled by 1/||residual||^2.
    const CMatrix gram = A.adjoint() * A;
    Eigen::LDLT<CMatrix> ldlt(gram);
    if (ldlt.info() != Eigen::Success)
        throw DegenerateCombinerError("fzf: Gram matrix factorization failed");
    const CMatrix E = CMatrix::Identity(K + r, K);
    const CMatrix G = A * ldlt.solve(E);
    CMatrix V(M, K);
    for (Eigen::Index k = 0; k < K; ++k)
    {
        const double g2 = G.col(k).squaredNorm();
        if (!std::isfinite(g2) || g2 == 0.0 || 1.0 / std::sqrt(g2) < tol::degenerate_projection)
            throw DegenerateCombinerError("fzf: estimate of user " + std::to_string(k) +
                                          " lies inside the interference-plus-clutter subspace");
        V.col(k) = (hn(k) / g2) * G.col(k);
    }
    return V;
}

Combiner fzf_combiner(const CMatrix &H_hat, const CMatrix &clutter_basis, int k)
{
    return {Detector::FZF, fzf_combiners(H_hat, clutter_basis).col(k), CMatrix(H_hat.rows(), 0)};
}

RMatrix bessel_matrix(int M, double spacing_ratio)
{
    if (M < 1)
        throw DimensionError("bessel_matrix: M must be positive");
    RVector first(M);
    for (int d = 0; d < M; ++d)
        first(d) = bessel_j0(2.0 * kPi * spacing_ratio * d);
    RMatrix B(M, M);
    for (int l = 0; l < M; ++l)
        for (int m = 0; m < M; ++m)
            B(l, m) = first(std::abs(l - m));
    return B;
}

BesselBasis bessel_basis(int M, double spacing_ratio, int P)
{
    if (P < 0 || P >= M)
        throw Error("bessel_basis: need 0 <= P < M (P=" + std::to_string(P) + ", M=" + std::to_string(M) + ")");
    const CMatrix B = bessel_matrix(M, spacing_ratio).cast<cplx>();
    const auto eig = hermitian_eig(B, true);
    return {eig.eigenvalues, eig.eigenvectors.leftCols(P)};
}

int bessel_rank_for_energy(const RVector &eigenvalues_desc, double fraction)
{
    const double total = eigenvalues_desc.sum();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < eigenvalues_desc.size(); ++i)
    {
        acc += eigenvalues_desc(i);
        if (acc >= fraction * total)
            return static_cast<int>(i + 1);
    }
    return static_cast<int>(eigenvalues_desc.size());
}

std::vector<double> AoaEstimate::angles() const
{
    std::vector<double> out;
    out.reserve(selected.size());
    for (int r : selected)
        out.push_back(grid[r]);
    return out;
}

AoaGrid::AoaGrid(int M, int R, double spacing_ratio)
{
    if (R < 2)
        throw Error("AoaGrid: need at least 2 grid points");
    theta.resize(R);
    steering.resize(M, R);
    for (int r = 0; r < R; ++r)
    {
        theta[r] = -kPi / 2 + kPi * r / R;
        steering.col(r) = steering_vector(theta[r], M, spacing_ratio);
    }
}

AoaEstimate estimate_clutter_aoas(const CMatrix &Y, const AoaGrid &grid, double multiplier)
{
    if (Y.rows() != grid.steering.rows())
        throw DimensionError("estimate_clutter_aoas: observable rows do not match the grid array size");
    AoaEstimate out;
    out.grid = grid.theta;
    const CMatrix S = grid.steering.adjoint() * Y;
    out.score = S.cwiseAbs().rowwise().sum();
    const auto R = static_cast<double>(out.score.size());
    out.mean = out.score.sum() / R;
    out.variance = (out.score.array() - out.mean).square().sum() / R;
    out.threshold = out.mean + multiplier * std::sqrt(out.variance);
    for (Eigen::Index r = 0; r < out.score.size(); ++r)
        if (out.score(r) >= out.threshold)
            out.selected.push_back(static_cast<int>(r));
    return out;
}

AoaEstimate estimate_clutter_aoas(const CMatrix &Y, int R, double spacing_ratio, double multiplier)
{
    return estimate_clutter_aoas(Y, AoaGrid(static_cast<int>(Y.rows()), R, spacing_ratio), multiplier);
}

CMatrix aezf_basis(const std::vector<double> &angles, int M, double spacing_ratio)
{
    if (static_cast<int>(angles.size()) >= M)
        throw DegenerateCombinerError("aezf: " + std::to_string(angles.size()) +
                                      " selected angles leave no room in an array of " + std::to_string(M));
    CMatrix S(M, static_cast<Eigen::Index>(angles.size()));
    for (std::size_t i = 0; i < angles.size(); ++i)
        S.col(static_cast<Eigen::Index>(i)) = steering_vector(angles[i], M, spacing_ratio);
    return orthonormalize_columns(S, tol::aezf_collinear);
}

} // namespace coexist
