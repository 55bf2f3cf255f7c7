#pragma once

#include "gfts/domain.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace gfts {

/// Multiplies the latent rate of every age and sex in the listed prefectures
/// for one year.
struct Shock {
    int year = 0;
    std::vector<std::string> prefectures;
    double multiplier = 1.0;
};

/// Lee–Carter style generator: log m(z, t) = a(z) + b(z) k_t + sex offset +
/// prefecture effect + prefecture period walk, times any shock.
struct SimConfig {
    int first_year = 1975;
    int n_years = 39;
    std::vector<double> ages = default_ages();
    std::vector<int> prefectures_per_region{2, 2};
    std::uint64_t seed = 42;

    // a(z) = a0 + a1 z + a2 z^2, b(z) = b0 (b1 - b2 z / 100)
    double a0 = -4.0, a1 = -0.10, a2 = 0.0013;
    double b0 = 0.02, b1 = 1.3, b2 = 0.6;

    double drift = -1.0;         // of k_t
    double volatility = 0.5;     // of k_t increments
    double male_offset = 0.4;
    double prefecture_scale = 0.1;
    double period_scale = 0.01;  // per-prefecture random walk increments

    double exposure_scale = 20000.0;
    double exposure_size_sigma = 0.5;  // lognormal prefecture size
    double exposure_age_scale = 60.0;  // exposures decay as exp(-z / scale)
    double exposure_growth = 0.01;     // yearly growth at age 0, fading to 0 at the top age
    double growth_spread = 0.01;       // sd of the per-prefecture growth offset
    double male_growth_gap = 0.003;    // males grow slower at the top age by this much per year
    double exposure_noise = 0.005;     // sd of the multiplicative lognormal census jitter

    bool poisson_noise = true;
    std::vector<Shock> shocks;

    /// 0, 5, ..., 100.
    static std::vector<double> default_ages();
    /// 8 regions holding 47 prefectures.
    static SimConfig large_preset();

    /// Throws InvalidArgument on bad sizes or scales.
    void validate() const;
};

struct SimResult {
    GroupedDataset dataset;
    Eigen::VectorXd period_index;                     // k_t
    std::map<SeriesKey, Eigen::MatrixXd> latent_log;  // bottom keys, n_years x p
};

/// Grouping with levels Total, sex, region, region*sex, prefecture, prefecture*sex.
[[nodiscard]] GroupingScheme simulation_scheme(const SimConfig& config);
[[nodiscard]] std::string prefecture_name(std::size_t index);

/// Deterministic given config.seed.
[[nodiscard]] SimResult simulate(const SimConfig& config);

/// year,age,prefecture,sex,log_rate in bottom-key order.
void write_latent(std::ostream& out, const SimResult& result);

}  // namespace gfts
