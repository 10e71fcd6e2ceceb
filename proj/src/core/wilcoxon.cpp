#include "boal/error.hpp"
#include "boal/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace boal {

namespace {

/// Average ranks (1-based) of the values, ties sharing the mean rank.
/// Returns the ranks and the tie-group sizes.
std::pair<std::vector<double>, std::vector<int>> midranks(const std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
    std::vector<double> ranks(n);
    std::vector<int> ties;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]])
            ++j;
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k)
            ranks[order[k]] = rank;
        ties.push_back(static_cast<int>(j - i + 1));
        i = j + 1;
    }
    return {ranks, ties};
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Exact two-sided p-value. Midranks are multiples of 1/2, so doubled ranks are
// integers and the null distribution of 2*W+ is a subset-sum count over them.
double exact_p_value(const std::vector<double>& ranks, double w_plus) {
    std::vector<long> doubled;
    long total = 0;
    for (double r : ranks) {
        doubled.push_back(std::lround(2.0 * r));
        total += doubled.back();
    }
    std::vector<double> counts(static_cast<std::size_t>(total) + 1, 0.0);
    counts[0] = 1.0;
    long reach = 0;
    for (long r : doubled) {
        for (long s = reach; s >= 0; --s)
            counts[static_cast<std::size_t>(s + r)] += counts[static_cast<std::size_t>(s)];
        reach += r;
    }
    const long observed = std::lround(2.0 * w_plus);
    double lower = 0.0;
    double upper = 0.0;
    for (long s = 0; s <= total; ++s) {
        if (s <= observed) lower += counts[static_cast<std::size_t>(s)];
        if (s >= observed) upper += counts[static_cast<std::size_t>(s)];
    }
    const double all = std::ldexp(1.0, static_cast<int>(ranks.size()));
    return std::min(1.0, 2.0 * std::min(lower, upper) / all);
}

double normal_p_value(int n, const std::vector<int>& ties, double w_plus) {
    const double nn = n;
    const double mean = nn * (nn + 1.0) / 4.0;
    double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0;
    for (int t : ties)
        var -= (static_cast<double>(t) * t * t - t) / 48.0;
    if (!(var > 0.0))
        return 1.0;
    const double z = std::max(0.0, std::abs(w_plus - mean) - 0.5) / std::sqrt(var);
    return std::min(1.0, std::erfc(z / std::sqrt(2.0)));
}

} // namespace

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b, double alpha) {
    if (a.size() != b.size())
        throw ValidationError("wilcoxon: samples must be paired (equal length)");
    std::vector<double> diffs;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        if (!std::isfinite(d))
            throw ValidationError("wilcoxon: non-finite difference");
        if (d != 0.0)
            diffs.push_back(d);
    }
    if (diffs.empty())
        throw DegenerateInputError("wilcoxon: every paired difference is zero");
    if (diffs.size() < 5)
        throw ValidationError("wilcoxon: need at least 5 nonzero differences, have " +
                              std::to_string(diffs.size()));

    std::vector<double> magnitudes(diffs.size());
    std::transform(diffs.begin(), diffs.end(), magnitudes.begin(), [](double d) { return std::abs(d); });
    const auto [ranks, ties] = midranks(magnitudes);

    WilcoxonResult res;
    res.n = static_cast<int>(diffs.size());
    for (std::size_t i = 0; i < diffs.size(); ++i)
        (diffs[i] > 0 ? res.w_plus : res.w_minus) += ranks[i];
    res.statistic = std::min(res.w_plus, res.w_minus);
    res.exact = res.n <= kWilcoxonExactMax;
    res.p_value = res.exact ? exact_p_value(ranks, res.w_plus) : normal_p_value(res.n, ties, res.w_plus);
    res.significant = res.p_value < alpha;

    const double med = median(diffs);
    if (med != 0.0)
        res.direction = med > 0 ? 1 : -1;
    else if (res.w_plus != res.w_minus)
        res.direction = res.w_plus > res.w_minus ? 1 : -1;
    return res;
}

} // namespace boal
