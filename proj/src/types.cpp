#include "fppi/types.hpp"

#include "fppi/normal.hpp"

#include <cmath>
#include <sstream>

namespace fppi {

namespace {

template <class Derived>
void require_finite(const Eigen::DenseBase<Derived>& m, const char* what) {
    if (!m.allFinite()) throw DataError(std::string(what) + " contains non-finite entries");
}

}  // namespace

LabeledDataset::LabeledDataset(Matrix x, Vector y) : x_(std::move(x)), y_(std::move(y)) {
    if (x_.rows() < 1) throw DataError("labeled dataset needs at least one row");
    if (x_.rows() != y_.size())
        throw DimensionError("labeled dataset: " + std::to_string(x_.rows()) + " covariate rows but " +
                             std::to_string(y_.size()) + " responses");
    require_finite(x_, "labeled covariates");
    require_finite(y_, "labeled responses");
}

LabeledDataset LabeledDataset::subset(const std::vector<Index>& rows) const {
    Matrix x(static_cast<Index>(rows.size()), x_.cols());
    Vector y(static_cast<Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] < 0 || rows[i] >= x_.rows()) throw DimensionError("subset row index out of range");
        x.row(static_cast<Index>(i)) = x_.row(rows[i]);
        y(static_cast<Index>(i)) = y_(rows[i]);
    }
    return LabeledDataset(std::move(x), std::move(y));
}

UnlabeledDataset::UnlabeledDataset(Matrix x) : x_(std::move(x)) {
    if (x_.rows() < 1) throw DataError("unlabeled dataset needs at least one row");
    require_finite(x_, "unlabeled covariates");
}

PredictionSource PredictionSource::precomputed(Vector values) {
    PredictionSource s;
    s.source_ = std::move(values);
    s.name_ = "precomputed";
    return s;
}

PredictionSource PredictionSource::functional(Function fn, std::string name) {
    PredictionSource s;
    s.source_ = std::move(fn);
    s.name_ = std::move(name);
    return s;
}

Vector PredictionSource::evaluate(const Matrix& x) const {
    if (const auto* v = std::get_if<Vector>(&source_)) {
        if (v->size() != x.rows())
            throw DimensionError("precomputed predictions have " + std::to_string(v->size()) +
                                 " entries for " + std::to_string(x.rows()) + " rows");
        return *v;
    }
    Vector out = std::get<Function>(source_)(x);
    if (out.size() != x.rows()) throw DimensionError("prediction function returned wrong length");
    return out;
}

Predictions Predictions::evaluate(const PredictionSource& on_labeled, const PredictionSource& on_unlabeled,
                                  const LabeledDataset& labeled, const UnlabeledDataset& unlabeled) {
    Predictions p{on_labeled.evaluate(labeled.x()), on_unlabeled.evaluate(unlabeled.x())};
    p.check_aligned(labeled, unlabeled);
    return p;
}

void Predictions::check_aligned(const LabeledDataset& labeled, const UnlabeledDataset& unlabeled) const {
    if (this->labeled.size() != labeled.rows())
        throw DimensionError("labeled predictions misaligned: " + std::to_string(this->labeled.size()) +
                             " values for " + std::to_string(labeled.rows()) + " rows");
    if (this->unlabeled.size() != unlabeled.rows())
        throw DimensionError("unlabeled predictions misaligned: " + std::to_string(this->unlabeled.size()) +
                             " values for " + std::to_string(unlabeled.rows()) + " rows");
    if (labeled.cols() != unlabeled.cols())
        throw DimensionError("labeled and unlabeled covariate widths differ");
    if (!this->labeled.allFinite() || !this->unlabeled.allFinite())
        throw DataError("predictions contain non-finite values");
}

Region Region::all() { return Region{}; }

Region Region::empty() {
    Region r;
    r.kind_ = Kind::Empty;
    return r;
}

Region Region::discrete_set(std::vector<Vector> categories) {
    Region r;
    r.kind_ = Kind::DiscreteSet;
    r.categories_ = std::move(categories);
    return r;
}

Region Region::sign_product(RegionComponent g, RegionComponent h) {
    Region r;
    r.kind_ = Kind::SignProduct;
    r.g_ = std::make_shared<const RegionComponent>(std::move(g));
    r.h_ = std::make_shared<const RegionComponent>(std::move(h));
    return r;
}

std::string Region::description() const {
    switch (kind_) {
        case Kind::All: return "all";
        case Kind::Empty: return "empty";
        case Kind::DiscreteSet: {
            std::ostringstream os;
            os << "discrete{";
            for (std::size_t i = 0; i < categories_.size(); ++i) {
                if (i) os << ';';
                const Vector& c = categories_[i];
                if (c.size() != 1) os << '(';
                for (Index j = 0; j < c.size(); ++j) os << (j ? "," : "") << c(j);
                if (c.size() != 1) os << ')';
            }
            os << '}';
            return os.str();
        }
        case Kind::SignProduct: return "sign[(" + g_->description + ")*(" + h_->description + ")>0]";
    }
    return "unknown";
}

BoolVector Region::membership(const Matrix& x, const Vector& f) const {
    if (f.size() != x.rows())
        throw DimensionError("region membership: " + std::to_string(f.size()) + " predictions for " +
                             std::to_string(x.rows()) + " rows");
    const auto n = static_cast<std::size_t>(x.rows());
    switch (kind_) {
        case Kind::All: return BoolVector(n, true);
        case Kind::Empty: return BoolVector(n, false);
        case Kind::DiscreteSet: {
            BoolVector out(n, false);
            for (const Vector& c : categories_)
                if (c.size() != x.cols()) throw DimensionError("discrete region category width differs from data");
            for (Index i = 0; i < x.rows(); ++i) {
                for (const Vector& c : categories_) {
                    if ((x.row(i).transpose().array() == c.array()).all()) {
                        out[static_cast<std::size_t>(i)] = true;
                        break;
                    }
                }
            }
            return out;
        }
        case Kind::SignProduct: {
            for (const auto* comp : {g_.get(), h_.get()})
                if (comp->cols >= 0 && comp->cols != x.cols())
                    throw DimensionError("region component expects " + std::to_string(comp->cols) +
                                         " columns, data has " + std::to_string(x.cols()));
            const Vector g = g_->eval(x, f);
            const Vector h = h_->eval(x, f);
            BoolVector out(n);
            for (Index i = 0; i < x.rows(); ++i) out[static_cast<std::size_t>(i)] = g(i) * h(i) > 0.0;
            return out;
        }
    }
    return BoolVector(n, false);
}

BoolVector membership_vector(const Region& region, const Matrix& x, const Vector& f) {
    return region.membership(x, f);
}

RegionMasks region_masks(const Region& region, const LabeledDataset& labeled, const UnlabeledDataset& unlabeled,
                         const Predictions& f) {
    f.check_aligned(labeled, unlabeled);
    return RegionMasks{region.membership(labeled.x(), f.labeled), region.membership(unlabeled.x(), f.unlabeled)};
}

Index count(const BoolVector& mask) {
    Index c = 0;
    for (bool b : mask) c += b ? 1 : 0;
    return c;
}

Vector filtered(const Vector& f, const BoolVector& mask) {
    Vector out(f.size());
    for (Index i = 0; i < f.size(); ++i) out(i) = mask[static_cast<std::size_t>(i)] ? f(i) : 0.0;
    return out;
}

IntervalEstimate make_interval(double point, double std_error, double level, double lambda_used,
                               std::string region_summary) {
    if (!(std_error >= 0.0)) throw std::invalid_argument("standard error must be non-negative");
    const double half = z_value(level) * std_error;
    return IntervalEstimate{point, std_error, level, point - half, point + half, lambda_used,
                            std::move(region_summary)};
}

}  // namespace fppi
