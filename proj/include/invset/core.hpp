#pragma once

// Domains, fields over domains, confidence bands and index subsets.
//
// All set logic is positional: two sets over the same domain are compared
// point by point. Coordinates and labels are carried for reporting only.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "invset/error.hpp"

namespace invset {

class Domain;
using DomainPtr = std::shared_ptr<const Domain>;

/// Finite ordered set of points. A point is either a coordinate vector of
/// fixed dimension or an opaque label (discrete coefficient domains).
class Domain {
public:
    /// Points given as a flat row-major coordinate array of `names.size()`
    /// columns.
    static DomainPtr from_coordinates(std::vector<std::string> names, std::vector<double> coords) {
        if (names.empty()) throw Error(ErrorCode::InvalidArgument, "domain needs at least one coordinate axis");
        const std::size_t dim = names.size();
        if (coords.empty() || coords.size() % dim != 0)
            throw Error(ErrorCode::InvalidArgument, "coordinate array does not match the axis count");
        for (double v : coords)
            if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "non-finite domain coordinate");
        auto d = std::shared_ptr<Domain>(new Domain());
        d->names_ = std::move(names);
        d->coords_ = std::move(coords);
        d->size_ = d->coords_.size() / dim;
        d->check_unique_coordinates();
        return d;
    }

    /// Cartesian product of axes; the first axis varies slowest.
    static DomainPtr grid(std::vector<std::string> names, const std::vector<std::vector<double>>& axes) {
        if (names.size() != axes.size()) throw Error(ErrorCode::InvalidArgument, "axis names and axes differ in count");
        std::size_t total = 1;
        for (const auto& a : axes) {
            if (a.empty()) throw Error(ErrorCode::InvalidArgument, "empty grid axis");
            total *= a.size();
        }
        const std::size_t dim = axes.size();
        std::vector<double> coords(total * dim);
        std::vector<std::size_t> idx(dim, 0);
        for (std::size_t p = 0; p < total; ++p) {
            for (std::size_t k = 0; k < dim; ++k) coords[p * dim + k] = axes[k][idx[k]];
            for (std::size_t k = dim; k-- > 0;) {
                if (++idx[k] < axes[k].size()) break;
                idx[k] = 0;
            }
        }
        return from_coordinates(std::move(names), std::move(coords));
    }

    static DomainPtr labeled(std::vector<std::string> labels, std::string axis_name = "label") {
        if (labels.empty()) throw Error(ErrorCode::InvalidArgument, "domain needs at least one point");
        std::unordered_set<std::string> seen;
        for (const auto& l : labels)
            if (!seen.insert(l).second) throw Error(ErrorCode::InvalidArgument, "duplicate domain label '" + l + "'");
        auto d = std::shared_ptr<Domain>(new Domain());
        d->names_ = {std::move(axis_name)};
        d->labels_ = std::move(labels);
        d->size_ = d->labels_.size();
        return d;
    }

    std::size_t size() const noexcept { return size_; }
    bool is_labeled() const noexcept { return !labels_.empty(); }
    /// Number of coordinate axes; labeled domains report 0.
    std::size_t dim() const noexcept { return is_labeled() ? 0 : names_.size(); }
    const std::vector<std::string>& axis_names() const noexcept { return names_; }

    double coordinate(std::size_t point, std::size_t axis) const { return coords_.at(point * names_.size() + axis); }
    std::span<const double> point(std::size_t i) const {
        return std::span<const double>(coords_).subspan(i * names_.size(), names_.size());
    }
    const std::string& label(std::size_t i) const { return labels_.at(i); }

    bool operator==(const Domain& other) const {
        return size_ == other.size_ && names_ == other.names_ && coords_ == other.coords_ && labels_ == other.labels_;
    }

private:
    Domain() = default;

    void check_unique_coordinates() const {
        const std::size_t dim = names_.size();
        std::vector<std::size_t> order(size_);
        std::iota(order.begin(), order.end(), 0);
        auto row_less = [&](std::size_t a, std::size_t b) {
            return std::lexicographical_compare(coords_.begin() + a * dim, coords_.begin() + (a + 1) * dim,
                                                coords_.begin() + b * dim, coords_.begin() + (b + 1) * dim);
        };
        std::sort(order.begin(), order.end(), row_less);
        for (std::size_t i = 1; i < order.size(); ++i)
            if (!row_less(order[i - 1], order[i]))
                throw Error(ErrorCode::InvalidArgument, "duplicate domain point at index " + std::to_string(order[i]));
    }

    std::vector<std::string> names_;
    std::vector<double> coords_;
    std::vector<std::string> labels_;
    std::size_t size_ = 0;
};

inline bool same_domain(const DomainPtr& a, const DomainPtr& b) {
    return a == b || (a && b && *a == *b);
}

inline void require_same_domain(const DomainPtr& a, const DomainPtr& b, const char* what) {
    if (!same_domain(a, b)) throw Error(ErrorCode::DomainMismatch, what);
}

/// Real-valued function on a domain. Values are finite.
class Field {
public:
    Field(DomainPtr domain, std::vector<double> values) : domain_(std::move(domain)), values_(std::move(values)) {
        if (!domain_) throw Error(ErrorCode::InvalidArgument, "field without a domain");
        if (values_.size() != domain_->size())
            throw Error(ErrorCode::InvalidArgument, "field has " + std::to_string(values_.size()) +
                                                        " values for a domain of " + std::to_string(domain_->size()));
        for (std::size_t i = 0; i < values_.size(); ++i)
            if (!std::isfinite(values_[i]))
                throw Error(ErrorCode::InvalidArgument, "non-finite field value at point " + std::to_string(i));
    }

    const DomainPtr& domain() const noexcept { return domain_; }
    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }
    std::span<const double> values() const noexcept { return values_; }

    double min() const { return *std::min_element(values_.begin(), values_.end()); }
    double max() const { return *std::max_element(values_.begin(), values_.end()); }

private:
    DomainPtr domain_;
    std::vector<double> values_;
};

/// Pair of lower/upper functions with lower <= upper pointwise, at nominal
/// type-I rate alpha.
class Band {
public:
    Band(Field lower, Field upper, double alpha) : lower_(std::move(lower)), upper_(std::move(upper)), alpha_(alpha) {
        require_same_domain(lower_.domain(), upper_.domain(), "band lower and upper live on different domains");
        if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::InvalidArgument, "band alpha must lie in (0,1)");
        for (std::size_t i = 0; i < lower_.size(); ++i)
            if (lower_[i] > upper_[i])
                throw Error(ErrorCode::Validation, "band lower exceeds upper at point " + std::to_string(i));
    }

    const Field& lower() const noexcept { return lower_; }
    const Field& upper() const noexcept { return upper_; }
    double alpha() const noexcept { return alpha_; }
    const DomainPtr& domain() const noexcept { return lower_.domain(); }
    std::size_t size() const noexcept { return lower_.size(); }

private:
    Field lower_;
    Field upper_;
    double alpha_;
};

class IndexSet {
public:
    IndexSet(DomainPtr domain, std::vector<bool> membership)
        : domain_(std::move(domain)), membership_(std::move(membership)) {
        if (!domain_) throw Error(ErrorCode::InvalidArgument, "index set without a domain");
        if (membership_.size() != domain_->size())
            throw Error(ErrorCode::InvalidArgument, "membership length does not match the domain size");
    }

    static IndexSet empty(DomainPtr domain) {
        const auto n = domain->size();
        return IndexSet(std::move(domain), std::vector<bool>(n, false));
    }
    static IndexSet full(DomainPtr domain) {
        const auto n = domain->size();
        return IndexSet(std::move(domain), std::vector<bool>(n, true));
    }
    /// Builds a set from zero-based member positions.
    static IndexSet of(DomainPtr domain, std::initializer_list<std::size_t> members) {
        std::vector<bool> m(domain->size(), false);
        for (auto i : members) m.at(i) = true;
        return IndexSet(std::move(domain), std::move(m));
    }

    const DomainPtr& domain() const noexcept { return domain_; }
    std::size_t size() const noexcept { return membership_.size(); }
    bool contains(std::size_t i) const { return membership_[i]; }
    const std::vector<bool>& membership() const noexcept { return membership_; }

    std::size_t count() const { return static_cast<std::size_t>(std::count(membership_.begin(), membership_.end(), true)); }

    std::vector<std::size_t> members() const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < membership_.size(); ++i)
            if (membership_[i]) out.push_back(i);
        return out;
    }

    bool operator==(const IndexSet& other) const {
        return same_domain(domain_, other.domain_) && membership_ == other.membership_;
    }

private:
    DomainPtr domain_;
    std::vector<bool> membership_;
};

enum class Direction { at_least, at_most };

/// f^{-1}[c, inf) for at_least, f^{-1}(-inf, c] for at_most.
inline IndexSet threshold_set(const Field& f, double c, Direction direction) {
    std::vector<bool> m(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) m[i] = direction == Direction::at_least ? f[i] >= c : f[i] <= c;
    return IndexSet(f.domain(), std::move(m));
}

inline bool is_subset(const IndexSet& a, const IndexSet& b) {
    require_same_domain(a.domain(), b.domain(), "subset test across different domains");
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a.contains(i) && !b.contains(i)) return false;
    return true;
}

// Closure is the identity on a finite domain, so this is plain negation.
inline IndexSet complement(const IndexSet& a) {
    std::vector<bool> m(a.membership());
    m.flip();
    return IndexSet(a.domain(), std::move(m));
}

inline IndexSet set_intersection(const IndexSet& a, const IndexSet& b) {
    require_same_domain(a.domain(), b.domain(), "intersection across different domains");
    std::vector<bool> m(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) m[i] = a.contains(i) && b.contains(i);
    return IndexSet(a.domain(), std::move(m));
}

inline IndexSet set_union(const IndexSet& a, const IndexSet& b) {
    require_same_domain(a.domain(), b.domain(), "union across different domains");
    std::vector<bool> m(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) m[i] = a.contains(i) || b.contains(i);
    return IndexSet(a.domain(), std::move(m));
}

/// Equidistant points from lo to hi inclusive. The fraction i/(count-1) is
/// formed first so that grids whose counts nest (5 and 1001, say) share their
/// common points bit for bit.
inline std::vector<double> linspace(double lo, double hi, std::size_t count) {
    std::vector<double> out(count);
    if (count == 1) {
        out[0] = lo;
        return out;
    }
    for (std::size_t i = 0; i < count; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(count - 1);
        out[i] = i + 1 == count ? hi : lo + (hi - lo) * t;
    }
    return out;
}

}  // namespace invset
