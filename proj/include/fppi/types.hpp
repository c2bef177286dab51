#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace fppi {

using Index = Eigen::Index;
// Row-major so that a covariate row is contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using SquareMatrix = Eigen::MatrixXd;
using BoolVector = std::vector<bool>;

// Thrown for shape mismatches between datasets, predictions and fitted components.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Thrown when a dataset violates its construction invariants.
class DataError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class LabeledDataset {
public:
    LabeledDataset(Matrix x, Vector y);

    const Matrix& x() const noexcept { return x_; }
    const Vector& y() const noexcept { return y_; }
    Index rows() const noexcept { return x_.rows(); }
    Index cols() const noexcept { return x_.cols(); }

    LabeledDataset subset(const std::vector<Index>& rows) const;

private:
    Matrix x_;
    Vector y_;
};

class UnlabeledDataset {
public:
    explicit UnlabeledDataset(Matrix x);

    const Matrix& x() const noexcept { return x_; }
    Index rows() const noexcept { return x_.rows(); }
    Index cols() const noexcept { return x_.cols(); }

private:
    Matrix x_;
};

// A prediction model f: either a column of precomputed values aligned with one
// dataset, or a deterministic function of the covariate rows.
class PredictionSource {
public:
    using Function = std::function<Vector(const Matrix&)>;

    static PredictionSource precomputed(Vector values);
    static PredictionSource functional(Function fn, std::string name = "f");

    bool is_precomputed() const noexcept { return std::holds_alternative<Vector>(source_); }
    // Values at the rows of x. Precomputed sources must have x.rows() entries.
    Vector evaluate(const Matrix& x) const;
    const std::string& name() const noexcept { return name_; }

private:
    std::variant<Vector, Function> source_;
    std::string name_;
};

// Prediction values for both samples, row-aligned.
struct Predictions {
    Vector labeled;
    Vector unlabeled;

    static Predictions evaluate(const PredictionSource& on_labeled, const PredictionSource& on_unlabeled,
                                const LabeledDataset& labeled, const UnlabeledDataset& unlabeled);
    static Predictions evaluate(const PredictionSource& f, const LabeledDataset& labeled,
                                const UnlabeledDataset& unlabeled) {
        return evaluate(f, f, labeled, unlabeled);
    }
    void check_aligned(const LabeledDataset& labeled, const UnlabeledDataset& unlabeled) const;
};

// Component of a sign-product region, evaluated on a batch of rows together with
// the prediction values at those rows.
struct RegionComponent {
    std::function<Vector(const Matrix&, const Vector&)> eval;
    // Expected covariate column count, or -1 when any width is accepted.
    Index cols = -1;
    std::string description;
};

class Region {
public:
    enum class Kind { All, Empty, DiscreteSet, SignProduct };

    static Region all();
    static Region empty();
    static Region discrete_set(std::vector<Vector> categories);
    // Membership is g(x, f) * h(x, f) > 0, strictly.
    static Region sign_product(RegionComponent g, RegionComponent h);

    Kind kind() const noexcept { return kind_; }
    const std::vector<Vector>& categories() const noexcept { return categories_; }
    std::string description() const;

    // Element i is true iff row i of x lies in the region; f holds the
    // prediction at each row.
    BoolVector membership(const Matrix& x, const Vector& f) const;

private:
    Kind kind_ = Kind::All;
    std::vector<Vector> categories_;
    std::shared_ptr<const RegionComponent> g_;
    std::shared_ptr<const RegionComponent> h_;
};

BoolVector membership_vector(const Region& region, const Matrix& x, const Vector& f);

// Region membership of both samples, evaluated once and reused.
struct RegionMasks {
    BoolVector labeled;
    BoolVector unlabeled;
};

RegionMasks region_masks(const Region& region, const LabeledDataset& labeled, const UnlabeledDataset& unlabeled,
                         const Predictions& f);

// Number of true entries.
Index count(const BoolVector& mask);

// f(x) * 1_S(x) for each row.
Vector filtered(const Vector& f, const BoolVector& mask);

struct IntervalEstimate {
    double point = 0.0;
    double std_error = 0.0;
    double level = 0.95;
    double lower = 0.0;
    double upper = 0.0;
    double lambda_used = 0.0;
    std::string region_summary;
};

IntervalEstimate make_interval(double point, double std_error, double level, double lambda_used,
                               std::string region_summary);

}  // namespace fppi
