#include "gfts/simulate.hpp"

#include "gfts/error.hpp"
#include "gfts/ingest.hpp"
#include "gfts/parallel.hpp"

#include <cmath>
#include <ostream>
#include <random>

namespace gfts {

namespace {

enum Stream : std::uint64_t {
    kPeriod = 1,
    kPrefectureEffect,
    kPrefectureWalk,
    kExposureSize,
    kDeaths,
    kExposureNoise,
};

std::string region_name(std::size_t index) { return "R" + std::to_string(index + 1); }

}  // namespace

std::vector<double> SimConfig::default_ages() {
    std::vector<double> ages;
    for (int z = 0; z <= 100; z += 5) ages.push_back(z);
    return ages;
}

SimConfig SimConfig::large_preset() {
    SimConfig c;
    c.prefectures_per_region = {1, 6, 7, 9, 7, 5, 4, 8};
    return c;
}

void SimConfig::validate() const {
    if (n_years < 2) fail(ErrorKind::InvalidArgument, "n_years must be at least 2");
    if (ages.size() < 2) fail(ErrorKind::InvalidArgument, "at least two ages are required");
    if (prefectures_per_region.empty()) fail(ErrorKind::InvalidArgument, "at least one region is required");
    for (int k : prefectures_per_region)
        if (k < 1) fail(ErrorKind::InvalidArgument, "every region needs at least one prefecture");
    for (double s : {volatility, prefecture_scale, period_scale, exposure_size_sigma, growth_spread, exposure_noise})
        if (!(s >= 0.0) || !std::isfinite(s)) fail(ErrorKind::InvalidArgument, "scales must be finite and non-negative");
    if (!(exposure_scale > 0.0) || !(exposure_age_scale > 0.0))
        fail(ErrorKind::InvalidArgument, "exposure scales must be positive");
    for (const auto& s : shocks)
        if (!(s.multiplier > 0.0)) fail(ErrorKind::InvalidArgument, "shock multipliers must be positive");
}

std::string prefecture_name(std::size_t index) {
    std::string digits = std::to_string(index + 1);
    return "P" + std::string(digits.size() < 2 ? 1 : 0, '0') + digits;
}

GroupingScheme simulation_scheme(const SimConfig& config) {
    GroupingScheme s;
    s.attribute_names = {"sex", "region", "prefecture"};
    s.bottom = {"prefecture", "sex"};
    s.levels = {{}, {"sex"}, {"region"}, {"region", "sex"}, {"prefecture"}, {"prefecture", "sex"}};
    Refinement r{"prefecture", "region", {}};
    std::size_t pref = 0;
    for (std::size_t g = 0; g < config.prefectures_per_region.size(); ++g)
        for (int i = 0; i < config.prefectures_per_region[g]; ++i) r.parent_of[prefecture_name(pref++)] = region_name(g);
    s.refinements.push_back(std::move(r));
    s.validate();
    return s;
}

SimResult simulate(const SimConfig& config) {
    config.validate();
    const auto n = static_cast<Eigen::Index>(config.n_years);
    const auto p = static_cast<Eigen::Index>(config.ages.size());
    std::size_t n_pref = 0;
    for (int k : config.prefectures_per_region) n_pref += static_cast<std::size_t>(k);

    SimResult out;
    std::normal_distribution<double> normal;

    out.period_index.resize(n);
    {
        std::mt19937_64 rng(derive_seed(config.seed, kPeriod, 0));
        double k = 0.0;
        for (Eigen::Index t = 0; t < n; ++t) {
            if (t > 0) k += config.drift + config.volatility * normal(rng);
            out.period_index[t] = k;
        }
    }

    Eigen::VectorXd a(p), b(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const double z = config.ages[static_cast<std::size_t>(j)];
        a[j] = config.a0 + config.a1 * z + config.a2 * z * z;
        b[j] = config.b0 * (config.b1 - config.b2 * z / 100.0);
    }
    const double top_age = config.ages.back();

    std::vector<int> years;
    for (int t = 0; t < config.n_years; ++t) years.push_back(config.first_year + t);

    std::map<SeriesKey, CellPanel> bottom;
    for (std::size_t i = 0; i < n_pref; ++i) {
        const std::string pref = prefecture_name(i);
        std::mt19937_64 effect_rng(derive_seed(config.seed, kPrefectureEffect, i));
        const double effect = config.prefecture_scale * normal(effect_rng);
        std::mt19937_64 walk_rng(derive_seed(config.seed, kPrefectureWalk, i));
        Eigen::VectorXd walk(n);
        double w = 0.0;
        for (Eigen::Index t = 0; t < n; ++t) {
            if (t > 0) w += config.period_scale * normal(walk_rng);
            walk[t] = w;
        }
        std::mt19937_64 size_rng(derive_seed(config.seed, kExposureSize, i));
        const double size = std::exp(config.exposure_size_sigma * normal(size_rng));
        const double growth_rate = config.exposure_growth + config.growth_spread * normal(size_rng);

        for (int sex = 0; sex < 2; ++sex) {
            const SeriesKey key{{"prefecture", pref}, {"sex", sex ? "M" : "F"}};
            Eigen::MatrixXd log_rate(n, p);
            CellPanel cells{Eigen::MatrixXd(n, p), Eigen::MatrixXd(n, p)};
            const std::size_t cell_stream = 2 * i + static_cast<std::size_t>(sex);
            std::mt19937_64 noise_rng(derive_seed(config.seed, kExposureNoise, cell_stream));
            for (Eigen::Index t = 0; t < n; ++t) {
                double shock = 1.0;
                for (const auto& s : config.shocks)
                    if (s.year == years[static_cast<std::size_t>(t)])
                        for (const auto& sp : s.prefectures)
                            if (sp == pref) shock *= s.multiplier;
                for (Eigen::Index j = 0; j < p; ++j) {
                    const double z = config.ages[static_cast<std::size_t>(j)];
                    log_rate(t, j) = a[j] + b[j] * out.period_index[t] + (sex ? config.male_offset : 0.0) + effect +
                                     walk[t] + std::log(shock);
                    // growth fades with age and differs by prefecture and sex, so exposure
                    // ratios drift over time
                    const double rate = growth_rate * (1.0 - z / top_age) - (sex ? config.male_growth_gap * z / top_age : 0.0);
                    const double growth = rate * static_cast<double>(t);
                    cells.exposure(t, j) = config.exposure_scale * size * std::exp(-z / config.exposure_age_scale) *
                                           std::exp(growth + config.exposure_noise * normal(noise_rng));
                }
            }
            std::mt19937_64 death_rng(derive_seed(config.seed, kDeaths, cell_stream));
            for (Eigen::Index t = 0; t < n; ++t)
                for (Eigen::Index j = 0; j < p; ++j) {
                    const double mean = std::exp(log_rate(t, j)) * cells.exposure(t, j);
                    cells.deaths(t, j) =
                        config.poisson_noise ? static_cast<double>(std::poisson_distribution<long>(mean)(death_rng)) : mean;
                }
            out.latent_log.emplace(key, std::move(log_rate));
            bottom.emplace(key, std::move(cells));
        }
    }
    out.dataset = GroupedDataset::build(AgeGrid(config.ages), simulation_scheme(config), years, std::move(bottom));
    return out;
}

void write_latent(std::ostream& out, const SimResult& result) {
    const auto& ds = result.dataset;
    out << "year,age,prefecture,sex,log_rate\n";
    for (const auto& [key, m] : result.latent_log)
        for (std::size_t t = 0; t < ds.n_years(); ++t)
            for (std::size_t j = 0; j < ds.grid().size(); ++j)
                out << ds.years()[t] << ',' << format_double(ds.grid()[j]) << ',' << key.attributes.at("prefecture") << ','
                    << key.attributes.at("sex") << ','
                    << format_double(m(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j))) << '\n';
}

}  // namespace gfts
