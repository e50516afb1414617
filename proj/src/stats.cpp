#include "dmorse/stats.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/poisson.hpp>

#include "dmorse/errors.hpp"

namespace dmorse {

void RunningStats::add(double x) {
    ++n_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta * (x - mean_);
}

void RunningStats::merge(const RunningStats& o) {
    if (o.n_ == 0) return;
    if (n_ == 0) {
        *this = o;
        return;
    }
    const double na = static_cast<double>(n_);
    const double nb = static_cast<double>(o.n_);
    const double delta = o.mean_ - mean_;
    const double total = na + nb;
    mean_ += delta * nb / total;
    m2_ += o.m2_ + delta * delta * na * nb / total;
    n_ += o.n_;
}

double RunningStats::variance() const { return n_ < 2 ? 0.0 : m2_ / static_cast<double>(n_ - 1); }

double RunningStats::std_err() const { return n_ < 2 ? 0.0 : std::sqrt(variance() / static_cast<double>(n_)); }

Moments sample_moments(std::span<const double> xs) {
    Moments m;
    const double n = static_cast<double>(xs.size());
    if (xs.empty()) return m;
    for (double x : xs) m.mean += x;
    m.mean /= n;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double x : xs) {
        const double c = x - m.mean;
        m2 += c * c;
        m3 += c * c * c;
        m4 += c * c * c * c;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    m.variance = xs.size() > 1 ? m2 * n / (n - 1.0) : 0.0;
    if (m2 > 0.0) {
        m.skewness = m3 / std::pow(m2, 1.5);
        m.excess_kurtosis = m4 / (m2 * m2) - 3.0;
    }
    return m;
}

double poisson_pmf(std::uint64_t j, double mean) {
    if (mean <= 0.0) return j == 0 ? 1.0 : 0.0;
    const double x = static_cast<double>(j);
    return std::exp(x * std::log(mean) - mean - std::lgamma(x + 1.0));
}

double empirical_dtv_poisson(std::span<const std::uint64_t> samples, double mean) {
    if (!(mean > 0.0)) throw ConfigError("mean", "Poisson mean must be positive");
    if (samples.empty()) throw DegenerateInput("no samples");
    const std::uint64_t top = *std::max_element(samples.begin(), samples.end());
    std::vector<double> freq(top + 1, 0.0);
    for (auto s : samples) freq[s] += 1.0;
    const double n = static_cast<double>(samples.size());
    double sum = 0.0;
    for (std::uint64_t j = 0; j <= top; ++j) {
        const double p = poisson_pmf(j, mean);
        sum += std::abs(freq[j] / n - p);
    }
    const boost::math::poisson_distribution<double> pois(mean);
    sum += boost::math::cdf(boost::math::complement(pois, static_cast<double>(top)));
    return std::clamp(0.5 * sum, 0.0, 1.0);
}

double kolmogorov_q(double t) {
    if (t <= 0.0) return 1.0;
    if (t < 0.2) return 1.0;
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * t * t);
        sum += (k % 2 ? 1.0 : -1.0) * term;
        if (term < 1e-16) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

NormalityDiagnostics normality_diagnostics(std::span<const double> samples) {
    if (samples.size() < 200) throw DegenerateInput("normality diagnostics need at least 200 samples");
    const Moments m = sample_moments(samples);
    if (!(m.variance > 0.0)) throw DegenerateInput("samples are constant");
    NormalityDiagnostics out;
    out.skewness = m.skewness;
    out.excess_kurtosis = m.excess_kurtosis;
    std::vector<double> xs(samples.begin(), samples.end());
    std::sort(xs.begin(), xs.end());
    const boost::math::normal_distribution<double> fit(m.mean, std::sqrt(m.variance));
    const double n = static_cast<double>(xs.size());
    double ks = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = boost::math::cdf(fit, xs[i]);
        ks = std::max({ks, std::abs(static_cast<double>(i + 1) / n - f), std::abs(f - static_cast<double>(i) / n)});
    }
    out.ks_stat = ks;
    return out;
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw DegenerateInput("two-sample KS needs nonempty samples");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    const double ne = std::sqrt(na * nb / (na + nb));
    return {d, kolmogorov_q((ne + 0.12 + 0.11 / ne) * d)};
}

double chi_square_poisson(std::span<const std::uint64_t> samples, double mean, double min_expected) {
    if (samples.empty()) throw DegenerateInput("no samples");
    const double n = static_cast<double>(samples.size());
    const std::uint64_t top = *std::max_element(samples.begin(), samples.end());
    const boost::math::poisson_distribution<double> pois(mean);
    // Cells [lo_i, hi_i]; the first absorbs the left tail, the last the right tail.
    std::vector<std::pair<double, double>> cells;  // expected, observed
    std::vector<double> obs(top + 2, 0.0);
    for (auto s : samples) obs[s] += 1.0;
    double exp_acc = 0.0, obs_acc = 0.0;
    for (std::uint64_t j = 0; j <= top; ++j) {
        exp_acc += n * poisson_pmf(j, mean);
        obs_acc += obs[j];
        if (exp_acc >= min_expected) {
            cells.emplace_back(exp_acc, obs_acc);
            exp_acc = obs_acc = 0.0;
        }
    }
    exp_acc += n * boost::math::cdf(boost::math::complement(pois, static_cast<double>(top)));
    if (!cells.empty() && exp_acc < min_expected) {
        cells.back().first += exp_acc;
        cells.back().second += obs_acc;
    } else {
        cells.emplace_back(exp_acc, obs_acc);
    }
    if (cells.size() < 2) return 1.0;
    double stat = 0.0;
    for (auto [e, o] : cells) stat += (o - e) * (o - e) / e;
    const boost::math::chi_squared_distribution<double> chi2(static_cast<double>(cells.size() - 1));
    return boost::math::cdf(boost::math::complement(chi2, stat));
}

}  // namespace dmorse
