#pragma once

#include "fppi/types.hpp"

#include <span>

namespace fppi {

// Brute-force k-nearest-neighbor regressor with Euclidean distance. Distance
// ties are broken by ascending training-row index, so predictions are fully
// deterministic. With 0/1 responses the prediction is the neighborhood label
// mean, i.e. a class-1 probability.
class KnnModel {
public:
    static KnnModel fit(const LabeledDataset& data, Index k);

    Index k() const noexcept { return k_; }
    Index cols() const noexcept { return x_.cols(); }
    const Matrix& training_x() const noexcept { return x_; }
    const Vector& training_y() const noexcept { return y_; }

    Vector predict(const Matrix& query) const;
    // Training-row indices of the k nearest neighbors of one query row, nearest first.
    std::vector<Index> neighbors(const Eigen::Ref<const Eigen::RowVectorXd>& query) const;

private:
    KnnModel(Matrix x, Vector y, Index k) : x_(std::move(x)), y_(std::move(y)), k_(k) {}

    Matrix x_;
    Vector y_;
    Index k_;
};

// Least-squares fit through the normal equations. No intercept is added; supply
// a constant column for one.
class OlsModel {
public:
    static OlsModel fit(const LabeledDataset& data);

    const Vector& theta() const noexcept { return theta_; }
    Vector predict(const Matrix& query) const;

private:
    explicit OlsModel(Vector theta) : theta_(std::move(theta)) {}
    Vector theta_;
};

double sample_mean(std::span<const double> values);
double sample_mean(const Vector& values);

}  // namespace fppi
