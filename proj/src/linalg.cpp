#include "fppi/linalg.hpp"

#include <limits>
#include <string>

namespace fppi {

SpdFactor::SpdFactor(const SquareMatrix& a, double min_pivot) {
    if (a.rows() != a.cols()) throw DimensionError("SPD factorization needs a square matrix");
    if (a.rows() == 0) throw DimensionError("SPD factorization of an empty matrix");
    if (!a.allFinite()) throw SingularMatrixError("matrix has non-finite entries");
    llt_.compute(a);
    if (llt_.info() != Eigen::Success) throw SingularMatrixError("matrix is not positive definite");
    const Vector diag = llt_.matrixLLT().diagonal();
    min_pivot_ = diag.array().square().minCoeff();
    if (!(min_pivot_ >= min_pivot))
        throw SingularMatrixError("matrix is numerically singular (smallest pivot " + std::to_string(min_pivot_) +
                                  ")");
}

Vector SpdFactor::solve(const Vector& b) const { return llt_.solve(b); }

SquareMatrix SpdFactor::solve(const SquareMatrix& b) const { return llt_.solve(b); }

SquareMatrix SpdFactor::inverse() const {
    const Index p = llt_.matrixLLT().rows();
    SquareMatrix inv = llt_.solve(SquareMatrix::Identity(p, p));
    return 0.5 * (inv + inv.transpose());
}

double max_abs(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

}  // namespace fppi
