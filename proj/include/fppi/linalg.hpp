#pragma once

#include "fppi/types.hpp"

#include <stdexcept>

namespace fppi {

class SingularMatrixError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Cholesky factorization of a symmetric positive-definite matrix. Construction
// throws SingularMatrixError when the matrix is not numerically SPD, i.e. when
// the factorization fails or a squared pivot falls below min_pivot.
class SpdFactor {
public:
    explicit SpdFactor(const SquareMatrix& a, double min_pivot = 1e-12);

    Vector solve(const Vector& b) const;
    SquareMatrix solve(const SquareMatrix& b) const;
    SquareMatrix inverse() const;
    double min_pivot() const noexcept { return min_pivot_; }

private:
    Eigen::LLT<SquareMatrix> llt_;
    double min_pivot_ = 0.0;
};

// Largest absolute entry; 0 for empty input.
double max_abs(const Vector& v);

}  // namespace fppi
