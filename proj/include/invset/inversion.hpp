#pragma once

// Inversion of a simultaneous confidence band into inner/outer confidence
// sets for inverse upper excursion, lower excursion and interval sets, and
// the joint containment events those sets are guaranteed for.
//
// Given a band [lo, up] covering the truth mu at every point, for all levels c
//     lo^{-1}[c, inf) ⊆ mu^{-1}[c, inf) ⊆ up^{-1}[c, inf)
// and the converse holds when the statement is required for every real c.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "invset/core.hpp"

namespace invset {

struct ExcursionCS {
    double level;
    Direction direction;
    IndexSet inner;
    IndexSet outer;
};

struct IntervalCS {
    double a;
    double b;
    IndexSet inner;
    IndexSet outer;
};

/// Sorted, de-duplicated, finite threshold values.
class SortedLevels {
public:
    SortedLevels() = default;
    explicit SortedLevels(std::vector<double> levels) : values_(std::move(levels)) {
        for (double c : values_)
            if (!std::isfinite(c)) throw Error(ErrorCode::InvalidArgument, "non-finite level");
        std::sort(values_.begin(), values_.end());
        values_.erase(std::unique(values_.begin(), values_.end()), values_.end());
    }

    std::span<const double> values() const noexcept { return values_; }
    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }
    double front() const { return values_.front(); }
    double back() const { return values_.back(); }

    /// True when some level lies in (lo, hi].
    bool any_in_open_closed(double lo, double hi) const {
        auto it = std::upper_bound(values_.begin(), values_.end(), lo);
        return it != values_.end() && *it <= hi;
    }
    /// True when some level lies in [lo, hi).
    bool any_in_closed_open(double lo, double hi) const {
        auto it = std::lower_bound(values_.begin(), values_.end(), lo);
        return it != values_.end() && *it < hi;
    }

private:
    std::vector<double> values_;
};

inline ExcursionCS upper_excursion_cs(const Band& band, double c) {
    return {c, Direction::at_least, threshold_set(band.lower(), c, Direction::at_least),
            threshold_set(band.upper(), c, Direction::at_least)};
}

inline ExcursionCS lower_excursion_cs(const Band& band, double c) {
    return {c, Direction::at_most, threshold_set(band.upper(), c, Direction::at_most),
            threshold_set(band.lower(), c, Direction::at_most)};
}

inline IntervalCS interval_cs(const Band& band, double a, double b) {
    if (!(a < b)) throw Error(ErrorCode::InvalidArgument, "interval requires a < b");
    const auto& lo = band.lower();
    const auto& up = band.upper();
    std::vector<bool> inner(band.size()), outer(band.size());
    for (std::size_t i = 0; i < band.size(); ++i) {
        inner[i] = lo[i] >= a && up[i] <= b;
        outer[i] = up[i] >= a && lo[i] <= b;
    }
    return {a, b, IndexSet(band.domain(), std::move(inner)), IndexSet(band.domain(), std::move(outer))};
}

/// The simultaneous coverage event: lower <= truth <= upper at every point.
inline bool sci_event(const Band& band, const Field& truth) {
    require_same_domain(band.domain(), truth.domain(), "truth and band live on different domains");
    const auto& lo = band.lower();
    const auto& up = band.upper();
    for (std::size_t i = 0; i < truth.size(); ++i)
        if (!(lo[i] <= truth[i] && truth[i] <= up[i])) return false;
    return true;
}

namespace detail {

// A point witnesses a failure of the upper-excursion event iff some level c
// has lo >= c > mu (inner escapes the truth) or mu >= c > up (truth escapes
// the outer set).
inline bool upper_violated_at(double lo, double mu, double up, const SortedLevels& levels) {
    return levels.any_in_open_closed(mu, lo) || levels.any_in_open_closed(up, mu);
}

// Lower-excursion analogue: up <= c < mu or mu <= c < lo.
inline bool lower_violated_at(double lo, double mu, double up, const SortedLevels& levels) {
    return levels.any_in_closed_open(up, mu) || levels.any_in_closed_open(mu, lo);
}

// Interval event over every pair (g_i, g_j), i < j, of a sorted grid. Each
// branch picks the most permissive partner endpoint (g_0 or g_K).
inline bool interval_violated_at(double lo, double mu, double up, std::span<const double> g) {
    const std::size_t n = g.size();
    if (n < 2) return false;
    const double first = g.front();
    const double last = g.back();
    auto upper_idx = [&](double x) {
        return static_cast<std::size_t>(std::upper_bound(g.begin(), g.end(), x) - g.begin());
    };
    auto lower_idx = [&](double x) {
        return static_cast<std::size_t>(std::lower_bound(g.begin(), g.end(), x) - g.begin());
    };
    // inner point with mu < a: a in (mu, lo], b = last >= up
    if (std::size_t i = upper_idx(mu); i + 1 < n && g[i] <= lo && last >= up) return true;
    // inner point with mu > b: b in [up, mu), a = first <= lo
    if (std::size_t j = lower_idx(mu); j > 1) {
        if (g[j - 1] >= up && first <= lo) return true;
    }
    // truth point outside outer via up < a: a in (up, mu], b = last >= mu
    if (std::size_t i = upper_idx(up); i + 1 < n && g[i] <= mu && last >= mu) return true;
    // truth point outside outer via lo > b: b in [mu, lo), a = first <= mu
    if (std::size_t j = lower_idx(lo); j > 1) {
        if (g[j - 1] >= mu && first <= mu) return true;
    }
    return false;
}

inline void check_event_inputs(const Band& band, const Field& truth) {
    require_same_domain(band.domain(), truth.domain(), "truth and band live on different domains");
}

}  // namespace detail

/// For every c in `levels`: inner ⊆ mu^{-1}[c, inf) ⊆ outer.
inline bool containment_event_upper(const Band& band, const Field& truth, const SortedLevels& levels) {
    detail::check_event_inputs(band, truth);
    if (levels.empty()) throw Error(ErrorCode::InvalidArgument, "containment event needs at least one level");
    const auto& lo = band.lower();
    const auto& up = band.upper();
    for (std::size_t i = 0; i < truth.size(); ++i)
        if (detail::upper_violated_at(lo[i], truth[i], up[i], levels)) return false;
    return true;
}

inline bool containment_event_upper(const Band& band, const Field& truth, std::span<const double> levels) {
    return containment_event_upper(band, truth, SortedLevels({levels.begin(), levels.end()}));
}

/// For every c in `levels`: inner ⊆ mu^{-1}(-inf, c] ⊆ outer.
inline bool containment_event_lower(const Band& band, const Field& truth, const SortedLevels& levels) {
    detail::check_event_inputs(band, truth);
    if (levels.empty()) throw Error(ErrorCode::InvalidArgument, "containment event needs at least one level");
    const auto& lo = band.lower();
    const auto& up = band.upper();
    for (std::size_t i = 0; i < truth.size(); ++i)
        if (detail::lower_violated_at(lo[i], truth[i], up[i], levels)) return false;
    return true;
}

inline bool containment_event_lower(const Band& band, const Field& truth, std::span<const double> levels) {
    return containment_event_lower(band, truth, SortedLevels({levels.begin(), levels.end()}));
}

/// For every listed pair (a, b): inner ⊆ mu^{-1}[a, b] ⊆ outer.
inline bool containment_event_interval(const Band& band, const Field& truth,
                                       std::span<const std::pair<double, double>> pairs) {
    detail::check_event_inputs(band, truth);
    if (pairs.empty()) throw Error(ErrorCode::InvalidArgument, "containment event needs at least one interval");
    for (const auto& [a, b] : pairs)
        if (!(a < b)) throw Error(ErrorCode::InvalidArgument, "interval requires a < b");
    const auto& lo = band.lower();
    const auto& up = band.upper();
    for (const auto& [a, b] : pairs) {
        for (std::size_t i = 0; i < truth.size(); ++i) {
            const bool in_inner = lo[i] >= a && up[i] <= b;
            const bool in_truth = a <= truth[i] && truth[i] <= b;
            const bool in_outer = up[i] >= a && lo[i] <= b;
            if ((in_inner && !in_truth) || (in_truth && !in_outer)) return false;
        }
    }
    return true;
}

/// Interval event over all pairs a < b drawn from `grid`.
inline bool containment_event_interval_grid(const Band& band, const Field& truth, const SortedLevels& grid) {
    detail::check_event_inputs(band, truth);
    const auto& lo = band.lower();
    const auto& up = band.upper();
    for (std::size_t i = 0; i < truth.size(); ++i)
        if (detail::interval_violated_at(lo[i], truth[i], up[i], grid.values())) return false;
    return true;
}

/// All distinct values taken by lower, upper and truth. Deciding the upper or
/// lower containment event on these levels decides it for every real level.
inline SortedLevels breakpoint_levels(const Band& band, const Field& truth) {
    detail::check_event_inputs(band, truth);
    std::vector<double> v;
    v.reserve(3 * truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i) {
        v.push_back(band.lower()[i]);
        v.push_back(band.upper()[i]);
        v.push_back(truth[i]);
    }
    return SortedLevels(std::move(v));
}

/// Breakpoints plus one sentinel below and one above, so that every interval
/// violation over real a < b has a witness pair on the grid.
inline SortedLevels interval_breakpoint_grid(const Band& band, const Field& truth) {
    auto bp = breakpoint_levels(band, truth);
    std::vector<double> v(bp.values().begin(), bp.values().end());
    const double span = std::max(1.0, v.back() - v.front());
    v.push_back(v.front() - span);
    v.push_back(v.back() + span);
    return SortedLevels(std::move(v));
}

/// `count` equidistant levels from lo to hi; a single level sits at the
/// midpoint. A degenerate range yields the single level lo.
inline SortedLevels equidistant_levels(double lo, double hi, std::size_t count) {
    if (count == 0) throw Error(ErrorCode::InvalidArgument, "level count must be at least 1");
    if (count == 1) return SortedLevels({0.5 * (lo + hi)});
    return SortedLevels(linspace(lo, hi, count));
}

/// lo, lo + step, ... up to hi (inclusive up to rounding).
inline SortedLevels step_levels(double lo, double hi, double step) {
    if (!(step > 0.0)) throw Error(ErrorCode::InvalidArgument, "level step must be positive");
    std::vector<double> v;
    const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9));
    v.reserve(n + 1);
    for (std::size_t i = 0; i <= n; ++i) v.push_back(lo + static_cast<double>(i) * step);
    return SortedLevels(std::move(v));
}

}  // namespace invset
