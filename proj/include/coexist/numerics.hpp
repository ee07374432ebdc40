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

#ifndef COEXIST_NUMERICS_HPP
#define COEXIST_NUMERICS_HPP

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace coexist
{

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kSpeedOfLight = 299792458.0;

// Library error type. Every precondition violation surfaces as one of these.
class Error : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error
{
  public:
    using Error::Error;
};

class SingularMatrixError : public Error
{
  public:
    using Error::Error;
};

class DegenerateCombinerError : public Error
{
  public:
    using Error::Error;
};

// Tolerance table shared by production code and tests.
namespace tol
{
inline constexpr double hermitian = 1e-12;          // relative asymmetry accepted as Hermitian
inline constexpr double psd_negative = 1e-9;        // eigenvalues above -psd_negative * ||A||_F count as PSD
inline constexpr double eig_reconstruction = 1e-9;  // ||A - U L U^H||_F / ||A||_F
inline constexpr double eig_orthonormal = 1e-10;
inline constexpr double orthonormal_basis = 1e-10;  // U^H U = I for projector bases
inline constexpr double rank_cutoff = 1e-9;         // eigenvalue >= rank_cutoff * lambda_max is "nonzero"
inline constexpr double range_singular = 1e-13;     // singular value >= range_singular * s_max spans the range
inline constexpr double degenerate_projection = 1e-12;
inline constexpr double aezf_collinear = 1e-11;     // residual norm below which a steering vector is dropped
inline constexpr double bessel_abs = 1e-10;
inline constexpr double clutter_nulling = 1e-10;    // |v^H c| / (||v|| ||c||) after a clutter projector
inline constexpr double unit_energy = 1e-12;
} // namespace tol

// Eigen-decomposition of a Hermitian matrix, eigenvalues in descending order.
struct EigDecomposition
{
    RVector eigenvalues;
    CMatrix eigenvectors; // columns orthonormal, column i pairs with eigenvalues(i)
};

double hermitian_defect(const CMatrix &A);

// Throws Error when A is not Hermitian within tol::hermitian. When psd is set,
// eigenvalues below -tol::psd_negative * ||A||_F are rejected; tiny negatives are kept as computed.
EigDecomposition hermitian_eig(const CMatrix &A, bool psd = false);

// Natural log-determinant of a Hermitian positive-definite matrix via Cholesky.
double logdet_psd(const CMatrix &A);

// Bessel function of the first kind, order zero.
double bessel_j0(double x);

// (I - U U^H) v for U with orthonormal columns. U may have zero columns.
CVector pinv_project(const CMatrix &U, const CVector &v);

// Orthonormal basis of the column space of F: left singular vectors with
// singular value >= cutoff * s_max. The SVD resolves singular values to about
// eps * s_max, so the cutoff can sit near that floor; a dropped direction leaves
// at most cutoff of any column of F outside the basis.
CMatrix range_basis(const CMatrix &F, double cutoff = tol::range_singular);

// Orthonormalize columns with two-pass modified Gram-Schmidt; columns whose
// residual norm (relative to their own norm) drops below drop_tol are discarded.
CMatrix orthonormalize_columns(const CMatrix &A, double drop_tol = tol::aezf_collinear);

// a*I + F F^H with a > 0, kept in factored form.
class ScaledIdentityPlusLowRank
{
  public:
    ScaledIdentityPlusLowRank(std::size_t dim, double scale, CMatrix factor);

    std::size_t dim() const { return dim_; }
    double scale() const { return scale_; }
    const CMatrix &factor() const { return factor_; }

    CMatrix dense() const;
    CMatrix apply(const CMatrix &X) const;
    // A^{-1} X through the matrix inversion lemma.
    CMatrix solve(const CMatrix &X) const;
    CMatrix inverse_dense() const;
    double trace() const;
    double trace_inverse() const;
    double logdet() const;

  private:
    std::size_t dim_;
    double scale_;
    CMatrix factor_;
    Eigen::LLT<CMatrix> core_; // factorization of a*I + F^H F
};

// Hermitian PSD matrix F F^H kept as its factor F (rows = ambient dimension).
struct LowRankPsd
{
    CMatrix factor;

    Eigen::Index dim() const { return factor.rows(); }
    Eigen::Index rank_bound() const { return factor.cols(); }
    CMatrix dense() const { return factor * factor.adjoint(); }
    double trace() const { return factor.squaredNorm(); }
    // v^H (F F^H) v
    double quadratic(const CVector &v) const { return (factor.adjoint() * v).squaredNorm(); }
};

// Unitary DFT, entry n = N^{-1/2} sum_i x_i exp(-j 2 pi i n / N). Radix-2 when N is a power of two.
CVector isometric_dft(const CVector &x);
CVector isometric_idft(const CVector &X);

// Neumaier-compensated running sum; order-dependent results are avoided by
// always accumulating in trial-index order.
class CompensatedSum
{
  public:
    void add(double x);
    double value() const { return sum_ + comp_; }

  private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

double compensated_sum(std::span<const double> xs);

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

} // namespace coexist

#endif
