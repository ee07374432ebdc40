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

#include "coexist/numerics.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <sstream>

namespace coexist
{

double hermitian_defect(const CMatrix &A)
{
    if (A.rows() != A.cols())
        throw DimensionError("hermitian_defect: matrix is not square");
    const double scale = A.norm();
    if (scale == 0.0)
        return 0.0;
    return (A - A.adjoint()).norm() / scale;
}

EigDecomposition hermitian_eig(const CMatrix &A, bool psd)
{
    if (A.rows() == 0 || A.rows() != A.cols())
        throw DimensionError("hermitian_eig: matrix must be square and non-empty");
    if (!A.allFinite())
        throw Error("hermitian_eig: non-finite entries");
    if (hermitian_defect(A) > tol::hermitian)
        throw Error("hermitian_eig: input is not Hermitian");

    // Symmetrize so the solver sees an exactly Hermitian matrix.
    const CMatrix H = 0.5 * (A + A.adjoint());
    Eigen::SelfAdjointEigenSolver<CMatrix> solver(H);
    if (solver.info() != Eigen::Success)
    {
        Eigen::JacobiSVD<CMatrix> svd(H);
        const auto &s = svd.singularValues();
        const double smax = s(0);
        const double smin = s(s.size() - 1);
        std::ostringstream msg;
        msg << "hermitian_eig: eigen solver did not converge (n=" << H.rows() << ", sigma_max=" << smax
            << ", sigma_min=" << smin << ", cond=" << (smin > 0 ? smax / smin : std::numeric_limits<double>::infinity())
            << ")";
        throw Error(msg.str());
    }

    // Eigen returns ascending order.
    const Eigen::Index n = H.rows();
    EigDecomposition out;
    out.eigenvalues = solver.eigenvalues().reverse();
    out.eigenvectors = solver.eigenvectors().rowwise().reverse();

    if (psd)
    {
        const double floor = -tol::psd_negative * A.norm();
        if (out.eigenvalues(n - 1) < floor)
            throw Error("hermitian_eig: matrix flagged PSD has a negative eigenvalue");
    }
    return out;
}

double logdet_psd(const CMatrix &A)
{
    if (A.rows() == 0 || A.rows() != A.cols())
        throw DimensionError("logdet_psd: matrix must be square and non-empty");
    Eigen::LLT<CMatrix> llt(0.5 * (A + A.adjoint()));
    if (llt.info() != Eigen::Success)
        throw SingularMatrixError("logdet_psd: non-positive pivot in Cholesky factorization");
    const CMatrix &L = llt.matrixLLT();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < L.rows(); ++i)
    {
        const double d = L(i, i).real();
        if (!(d > 0.0))
            throw SingularMatrixError("logdet_psd: non-positive pivot in Cholesky factorization");
        acc += std::log(d);
    }
    return 2.0 * acc;
}

namespace
{

// Power series, evaluated in extended precision to contain cancellation.
double j0_series(double x)
{
    const long double q = static_cast<long double>(x) * x / 4.0L;
    long double term = 1.0L;
    long double sum = 1.0L;
    for (int k = 1; k < 200; ++k)
    {
        term *= -q / (static_cast<long double>(k) * k);
        sum += term;
        if (std::fabs(term) < 1e-22L * std::fabs(sum) && k > 2 * static_cast<int>(std::sqrt(q)))
            break;
    }
    return static_cast<double>(sum);
}

// Hankel asymptotic expansion, truncated at the smallest term.
double j0_asymptotic(double x)
{
    const double ax = std::fabs(x);
    const double inv8x = 1.0 / (8.0 * ax);
    double p = 0.0;
    double q = 0.0;
    // |a_k| = prod_{i=1..k} (2i-1)^2 / (k! 8^k); term_k = |a_k| / x^k
    double term = 1.0;
    double last = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 200; ++k)
    {
        if (k > 0)
        {
            const double odd = 2.0 * k - 1.0;
            term *= odd * odd * inv8x / k;
        }
        if (term > last)
            break;
        last = term;
        // k even -> P, k odd -> Q, alternating signs within each series
        const int half = k / 2;
        const double sign = (half % 2 == 0) ? 1.0 : -1.0;
        if (k % 2 == 0)
            p += sign * term;
        else
            q += sign * term;
        if (term < 1e-18)
            break;
    }
    const double chi = ax - 0.25 * kPi;
    return std::sqrt(2.0 / (kPi * ax)) * (p * std::cos(chi) + q * std::sin(chi));
}

} // namespace

double bessel_j0(double x)
{
    const double ax = std::fabs(x);
    // Beyond ~20 the asymptotic series reaches double precision; below it the
    // extended-precision power series still has enough headroom.
    if (ax < 20.0)
        return j0_series(ax);
    return j0_asymptotic(ax);
}

CVector pinv_project(const CMatrix &U, const CVector &v)
{
    if (U.cols() == 0)
        return v;
    if (U.rows() != v.size())
        throw DimensionError("pinv_project: basis rows do not match vector length");
    return v - U * (U.adjoint() * v);
}

CMatrix range_basis(const CMatrix &F, double cutoff)
{
    if (F.cols() == 0 || F.rows() == 0)
        return CMatrix(F.rows(), 0);
    Eigen::JacobiSVD<CMatrix> svd(F, Eigen::ComputeThinU);
    const RVector &s = svd.singularValues();
    if (s(0) == 0.0)
        return CMatrix(F.rows(), 0);
    Eigen::Index keep = 0;
    while (keep < s.size() && s(keep) >= cutoff * s(0))
        ++keep;
    return svd.matrixU().leftCols(keep);
}

CMatrix orthonormalize_columns(const CMatrix &A, double drop_tol)
{
    CMatrix Q(A.rows(), A.cols());
    Eigen::Index kept = 0;
    for (Eigen::Index j = 0; j < A.cols(); ++j)
    {
        CVector v = A.col(j);
        const double n0 = v.norm();
        if (n0 == 0.0)
            continue;
        for (int pass = 0; pass < 2; ++pass)
            for (Eigen::Index i = 0; i < kept; ++i)
                v -= Q.col(i) * Q.col(i).dot(v);
        const double n1 = v.norm();
        if (n1 < drop_tol * n0)
            continue;
        Q.col(kept++) = v / n1;
    }
    return Q.leftCols(kept);
}

ScaledIdentityPlusLowRank::ScaledIdentityPlusLowRank(std::size_t dim, double scale, CMatrix factor)
    : dim_(dim), scale_(scale), factor_(std::move(factor))
{
    if (!(scale_ > 0.0))
        throw SingularMatrixError("ScaledIdentityPlusLowRank: scale must be positive");
    if (factor_.cols() > 0 && static_cast<std::size_t>(factor_.rows()) != dim_)
        throw DimensionError("ScaledIdentityPlusLowRank: factor rows do not match dimension");
    if (factor_.cols() == 0)
        factor_.resize(static_cast<Eigen::Index>(dim_), 0);
    CMatrix core = factor_.adjoint() * factor_;
    core.diagonal().array() += scale_;
    core_.compute(core);
    if (factor_.cols() > 0 && core_.info() != Eigen::Success)
        throw SingularMatrixError("ScaledIdentityPlusLowRank: core factorization failed");
}

CMatrix ScaledIdentityPlusLowRank::dense() const
{
    CMatrix out = factor_ * factor_.adjoint();
    out.diagonal().array() += scale_;
    return out;
}

CMatrix ScaledIdentityPlusLowRank::apply(const CMatrix &X) const
{
    return scale_ * X + factor_ * (factor_.adjoint() * X);
}

CMatrix ScaledIdentityPlusLowRank::solve(const CMatrix &X) const
{
    if (factor_.cols() == 0)
        return X / scale_;
    const CMatrix inner = core_.solve(factor_.adjoint() * X);
    return (X - factor_ * inner) / scale_;
}

CMatrix ScaledIdentityPlusLowRank::inverse_dense() const
{
    return solve(CMatrix::Identity(static_cast<Eigen::Index>(dim_), static_cast<Eigen::Index>(dim_)));
}

double ScaledIdentityPlusLowRank::trace() const
{
    return scale_ * static_cast<double>(dim_) + factor_.squaredNorm();
}

double ScaledIdentityPlusLowRank::trace_inverse() const
{
    double t = static_cast<double>(dim_);
    if (factor_.cols() > 0)
    {
        const CMatrix gram = factor_.adjoint() * factor_;
        t -= core_.solve(gram).trace().real();
    }
    return t / scale_;
}

double ScaledIdentityPlusLowRank::logdet() const
{
    const auto r = static_cast<double>(factor_.cols());
    double out = (static_cast<double>(dim_) - r) * std::log(scale_);
    const CMatrix &L = core_.matrixLLT();
    for (Eigen::Index i = 0; i < factor_.cols(); ++i)
        out += 2.0 * std::log(L(i, i).real());
    return out;
}

void CompensatedSum::add(double x)
{
    const double t = sum_ + x;
    if (std::fabs(sum_) >= std::fabs(x))
        comp_ += (sum_ - t) + x;
    else
        comp_ += (x - t) + sum_;
    sum_ = t;
}

double compensated_sum(std::span<const double> xs)
{
    CompensatedSum s;
    for (double x : xs)
        s.add(x);
    return s.value();
}

} // namespace coexist

namespace coexist
{

namespace
{

bool is_pow2(Eigen::Index n) { return n > 0 && (n & (n - 1)) == 0; }

CVector dft_impl(const CVector &x, double sign)
{
    const Eigen::Index N = x.size();
    if (N == 0)
        return x;
    CVector out(N);
    if (is_pow2(N))
    {
        out = x;
        for (Eigen::Index i = 1, j = 0; i < N; ++i)
        {
            Eigen::Index bit = N >> 1;
            for (; j & bit; bit >>= 1)
                j ^= bit;
            j ^= bit;
            if (i < j)
                std::swap(out(i), out(j));
        }
        for (Eigen::Index len = 2; len <= N; len <<= 1)
        {
            const double ang = sign * 2.0 * kPi / static_cast<double>(len);
            for (Eigen::Index i = 0; i < N; i += len)
                for (Eigen::Index k = 0; k < len / 2; ++k)
                {
                    const cplx w = std::polar(1.0, ang * static_cast<double>(k));
                    const cplx u = out(i + k);
                    const cplx v = out(i + k + len / 2) * w;
                    out(i + k) = u + v;
                    out(i + k + len / 2) = u - v;
                }
        }
    }
    else
    {
        for (Eigen::Index n = 0; n < N; ++n)
        {
            cplx acc = 0.0;
            for (Eigen::Index i = 0; i < N; ++i)
                acc += x(i) * std::polar(1.0, sign * 2.0 * kPi * static_cast<double>((i * n) % N) / static_cast<double>(N));
            out(n) = acc;
        }
    }
    return out / std::sqrt(static_cast<double>(N));
}

} // namespace

CVector isometric_dft(const CVector &x) { return dft_impl(x, -1.0); }
CVector isometric_idft(const CVector &X) { return dft_impl(X, 1.0); }

} // namespace coexist
