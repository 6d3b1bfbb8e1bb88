#pragma once

#include "percept/error.hpp"
#include "percept/image.hpp"
#include "percept/rng.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

namespace percept {

/// Nonempty set of equal-length real vectors.
class SampleSet {
public:
    SampleSet() = default;

    explicit SampleSet(std::vector<std::vector<double>> vectors) : v_(std::move(vectors))
    {
        require(!v_.empty(), Errc::invalid_argument, "sample set is empty");
        for (const auto& x : v_)
            require(x.size() == v_.front().size() && !x.empty(), Errc::dimension_mismatch,
                    "sample vectors differ in dimension");
    }

    /// Flattened pixel vectors of a list of images.
    static SampleSet from_images(const std::vector<Image>& images)
    {
        std::vector<std::vector<double>> v;
        v.reserve(images.size());
        for (const auto& img : images)
            v.emplace_back(img.pixels().begin(), img.pixels().end());
        return SampleSet(std::move(v));
    }

    std::size_t size() const { return v_.size(); }
    std::size_t dim() const { return v_.empty() ? 0 : v_.front().size(); }
    const std::vector<double>& operator[](std::size_t i) const { return v_[i]; }
    const std::vector<std::vector<double>>& vectors() const { return v_; }

private:
    std::vector<std::vector<double>> v_;
};

struct MmdResult {
    double mmd2 = 0;
    double bandwidth = 1;
};

inline double squared_distance(const std::vector<double>& a, const std::vector<double>& b)
{
    require(a.size() == b.size(), Errc::dimension_mismatch, "vectors differ in dimension");
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

/// exp(-|a-b|^2 / (2 bandwidth^2))
inline double rbf_kernel(const std::vector<double>& a, const std::vector<double>& b, double bandwidth)
{
    require(bandwidth > 0, Errc::invalid_argument, "bandwidth must be positive");
    return std::exp(-squared_distance(a, b) / (2.0 * bandwidth * bandwidth));
}

/// Median pairwise distance over all pairs, or over `max_pairs` seeded
/// random pairs when there are more than that.
inline double median_bandwidth(const SampleSet& s, std::uint64_t seed, std::size_t max_pairs = 1000)
{
    require(s.size() >= 2, Errc::invalid_argument, "median heuristic needs at least two vectors");
    const std::size_t n = s.size();
    std::vector<double> d;
    if (n * (n - 1) / 2 <= max_pairs) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                d.push_back(std::sqrt(squared_distance(s[i], s[j])));
    } else {
        Rng rng(seed, "median-bandwidth");
        while (d.size() < max_pairs) {
            const auto i = rng.below(n), j = rng.below(n);
            if (i != j)
                d.push_back(std::sqrt(squared_distance(s[i], s[j])));
        }
    }
    std::sort(d.begin(), d.end());
    const std::size_t m = d.size();
    const double med = m % 2 ? d[m / 2] : 0.5 * (d[m / 2 - 1] + d[m / 2]);
    if (!(med > 0))
        fail(Errc::degenerate, "median pairwise distance is zero");
    return med;
}

/// Union of several sets (for a shared bandwidth).
inline SampleSet concat(const std::vector<const SampleSet*>& sets)
{
    std::vector<std::vector<double>> all;
    for (const SampleSet* s : sets)
        all.insert(all.end(), s->vectors().begin(), s->vectors().end());
    return SampleSet(std::move(all));
}

/// Unbiased squared MMD (diagonal terms excluded from the within-set sums).
inline MmdResult mmd2_unbiased(const SampleSet& A, const SampleSet& B, double bandwidth)
{
    require(A.size() >= 2 && B.size() >= 2, Errc::too_small, "each set needs at least two samples");
    require(A.dim() == B.dim(), Errc::dimension_mismatch, "sample sets differ in dimension");
    const double m = static_cast<double>(A.size()), n = static_cast<double>(B.size());
    auto within = [&](const SampleSet& S) {
        double s = 0;
        for (std::size_t i = 0; i < S.size(); ++i)
            for (std::size_t j = i + 1; j < S.size(); ++j)
                s += rbf_kernel(S[i], S[j], bandwidth);
        return 2.0 * s;
    };
    double cross = 0;
    for (std::size_t i = 0; i < A.size(); ++i)
        for (std::size_t j = 0; j < B.size(); ++j)
            cross += rbf_kernel(A[i], B[j], bandwidth);
    return {within(A) / (m * (m - 1)) + within(B) / (n * (n - 1)) - 2.0 * cross / (m * n), bandwidth};
}

/// mmd2(ref, A) - mmd2(ref, B). Negative when A is closer to the reference.
inline double relative_similarity(const SampleSet& ref, const SampleSet& A, const SampleSet& B, double bandwidth)
{
    return mmd2_unbiased(ref, A, bandwidth).mmd2 - mmd2_unbiased(ref, B, bandwidth).mmd2;
}

struct BandwidthPolicy {
    bool median = true;       ///< median heuristic over ref and all candidates
    double fixed = 1.0;       ///< used when median is false
    std::uint64_t seed = 0;
    std::size_t max_pairs = 1000;
};

struct TradeoffSelection {
    double chosen = 0;
    double bandwidth = 0;
    std::map<double, double> mmd2;                     ///< per candidate C
    std::map<std::pair<double, double>, double> pairwise; ///< relative_similarity(ref, C_a, C_b)
};

/// Pick the candidate whose samples minimize mmd2 to the reference under one
/// shared bandwidth. Ties resolve to the smaller C.
inline TradeoffSelection select_tradeoff(const SampleSet& ref, const std::map<double, SampleSet>& candidates,
                                         const BandwidthPolicy& policy = {})
{
    require(candidates.size() >= 2, Errc::invalid_argument, "need at least two candidates");
    TradeoffSelection out;
    if (policy.median) {
        std::vector<const SampleSet*> all{&ref};
        for (const auto& [c, s] : candidates)
            all.push_back(&s);
        out.bandwidth = median_bandwidth(concat(all), policy.seed, policy.max_pairs);
    } else {
        require(policy.fixed > 0, Errc::invalid_argument, "bandwidth must be positive");
        out.bandwidth = policy.fixed;
    }
    bool first = true;
    double best = 0;
    for (const auto& [c, s] : candidates) {
        const double v = mmd2_unbiased(ref, s, out.bandwidth).mmd2;
        out.mmd2[c] = v;
        if (first || v < best) {
            best = v;
            out.chosen = c;
            first = false;
        }
    }
    for (const auto& [a, va] : out.mmd2)
        for (const auto& [b, vb] : out.mmd2)
            if (a < b)
                out.pairwise[{a, b}] = va - vb;
    return out;
}

} // namespace percept
