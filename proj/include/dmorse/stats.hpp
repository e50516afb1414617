#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace dmorse {

/// Streaming mean and variance (Welford), mergeable across batches.
class RunningStats {
public:
    void add(double x);
    void merge(const RunningStats& other);

    std::uint64_t count() const { return n_; }
    double mean() const { return mean_; }
    /// Unbiased sample variance; 0 with fewer than two samples.
    double variance() const;
    double std_err() const;

private:
    std::uint64_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

struct Moments {
    double mean = 0.0;
    double variance = 0.0;  // unbiased
    double skewness = 0.0;
    double excess_kurtosis = 0.0;
};

Moments sample_moments(std::span<const double> xs);

/// Total variation distance between the empirical law of `samples` and
/// Poisson(mean); the Poisson tail beyond the largest sample is added exactly.
double empirical_dtv_poisson(std::span<const std::uint64_t> samples, double mean);

struct NormalityDiagnostics {
    double skewness = 0.0;
    double excess_kurtosis = 0.0;
    /// Kolmogorov-Smirnov statistic against the normal with the sample mean and variance.
    double ks_stat = 0.0;
};

/// Requires at least 200 non-constant samples (DegenerateInput otherwise).
NormalityDiagnostics normality_diagnostics(std::span<const double> samples);

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

/// Kolmogorov survival function Q(t) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 t^2).
double kolmogorov_q(double t);

/// Chi-square goodness of fit of integer counts to Poisson(mean). Cells are
/// merged from the tails until each expects at least `min_expected`.
/// Returns the p-value.
double chi_square_poisson(std::span<const std::uint64_t> samples, double mean, double min_expected = 5.0);

double poisson_pmf(std::uint64_t j, double mean);

}  // namespace dmorse
