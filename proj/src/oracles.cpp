#include "fppi/oracles.hpp"

#include "fppi/linalg.hpp"

#include <algorithm>
#include <utility>

namespace fppi {

KnnModel KnnModel::fit(const LabeledDataset& data, Index k) {
    if (k < 1) throw std::invalid_argument("knn: k must be positive");
    if (k > data.rows())
        throw std::invalid_argument("knn: k = " + std::to_string(k) + " exceeds the " +
                                    std::to_string(data.rows()) + " training rows");
    return KnnModel(data.x(), data.y(), k);
}

std::vector<Index> KnnModel::neighbors(const Eigen::Ref<const Eigen::RowVectorXd>& query) const {
    if (query.size() != x_.cols())
        throw DimensionError("knn: query has " + std::to_string(query.size()) + " columns, model expects " +
                             std::to_string(x_.cols()));
    const Index n = x_.rows();
    const Index p = x_.cols();
    std::vector<std::pair<double, Index>> dist(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        const double* row = x_.data() + i * p;
        double d = 0.0;
        for (Index j = 0; j < p; ++j) {
            const double diff = row[j] - query(j);
            d += diff * diff;
        }
        dist[static_cast<std::size_t>(i)] = {d, i};
    }
    const auto kk = static_cast<std::ptrdiff_t>(k_);
    // Lexicographic order on (distance, index) implements the index tie-break.
    std::nth_element(dist.begin(), dist.begin() + kk - 1, dist.end());
    std::sort(dist.begin(), dist.begin() + kk);
    std::vector<Index> out(static_cast<std::size_t>(k_));
    for (Index i = 0; i < k_; ++i) out[static_cast<std::size_t>(i)] = dist[static_cast<std::size_t>(i)].second;
    return out;
}

Vector KnnModel::predict(const Matrix& query) const {
    if (query.cols() != x_.cols())
        throw DimensionError("knn: query has " + std::to_string(query.cols()) + " columns, model expects " +
                             std::to_string(x_.cols()));
    const Index n = x_.rows();
    const Index p = x_.cols();
    const auto kk = static_cast<std::size_t>(k_);
    // k best (distance, index) pairs kept sorted; rows are scanned in index
    // order so an equal distance never displaces an earlier row.
    std::vector<std::pair<double, Index>> best;
    best.reserve(kk + 1);
    Vector out(query.rows());
    for (Index q = 0; q < query.rows(); ++q) {
        const double* qrow = query.data() + q * p;
        best.clear();
        for (Index i = 0; i < n; ++i) {
            const double* row = x_.data() + i * p;
            double d = 0.0;
            for (Index j = 0; j < p; ++j) {
                const double diff = row[j] - qrow[j];
                d += diff * diff;
            }
            if (best.size() == kk && !(d < best.back().first)) continue;
            auto pos = std::upper_bound(best.begin(), best.end(), std::make_pair(d, i));
            best.insert(pos, {d, i});
            if (best.size() > kk) best.pop_back();
        }
        double s = 0.0;
        for (const auto& b : best) s += y_(b.second);
        out(q) = s / static_cast<double>(k_);
    }
    return out;
}

OlsModel OlsModel::fit(const LabeledDataset& data) {
    if (data.cols() > data.rows()) throw SingularMatrixError("ols: more columns than rows");
    const double inv_n = 1.0 / static_cast<double>(data.rows());
    const SquareMatrix gram = inv_n * (data.x().transpose() * data.x());
    const Vector rhs = inv_n * (data.x().transpose() * data.y());
    return OlsModel(SpdFactor(gram).solve(rhs));
}

Vector OlsModel::predict(const Matrix& query) const {
    if (query.cols() != theta_.size())
        throw DimensionError("ols: query has " + std::to_string(query.cols()) + " columns, model expects " +
                             std::to_string(theta_.size()));
    return query * theta_;
}

double sample_mean(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("sample_mean of an empty input");
    double s = 0.0;
    for (double v : values) s += v;
    return s / static_cast<double>(values.size());
}

double sample_mean(const Vector& values) {
    return sample_mean(std::span<const double>(values.data(), static_cast<std::size_t>(values.size())));
}

}  // namespace fppi
