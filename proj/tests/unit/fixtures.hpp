#pragma once

#include "gfts/domain.hpp"
#include "gfts/ingest.hpp"

#include <random>
#include <sstream>
#include <string>

namespace gfts::testing {

inline GroupingScheme toy_scheme() {
    std::istringstream in(
        "attributes = sex,region,prefecture\n"
        "bottom = prefecture,sex\n"
        "level =\n"
        "level = sex\n"
        "level = region\n"
        "level = region,sex\n"
        "level = prefecture\n"
        "level = prefecture,sex\n"
        "refine prefecture -> region\n"
        "refine P1 -> R1\n"
        "refine P2 -> R1\n"
        "refine P3 -> R2\n");
    return parse_grouping_config(in);
}

/// Three prefectures x two sexes with random positive exposures and deaths.
inline GroupedDataset toy_dataset(std::size_t n_years = 4, std::size_t p = 5, unsigned seed = 7) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> exposure(50.0, 500.0);
    std::uniform_real_distribution<double> rate(0.001, 0.2);
    std::vector<double> ages;
    for (std::size_t j = 0; j < p; ++j) ages.push_back(static_cast<double>(10 * j));
    std::vector<int> years;
    for (std::size_t t = 0; t < n_years; ++t) years.push_back(2000 + static_cast<int>(t));
    std::map<SeriesKey, CellPanel> bottom;
    for (const char* pref : {"P1", "P2", "P3"})
        for (const char* sex : {"F", "M"}) {
            CellPanel c{Eigen::MatrixXd(n_years, p), Eigen::MatrixXd(n_years, p)};
            for (Eigen::Index t = 0; t < c.deaths.rows(); ++t)
                for (Eigen::Index j = 0; j < c.deaths.cols(); ++j) {
                    c.exposure(t, j) = std::round(exposure(rng) * 100.0) / 100.0;
                    c.deaths(t, j) = std::round(c.exposure(t, j) * rate(rng));
                }
            bottom.emplace(SeriesKey{{"prefecture", pref}, {"sex", sex}}, std::move(c));
        }
    return GroupedDataset::build(AgeGrid(ages), toy_scheme(), years, std::move(bottom));
}

}  // namespace gfts::testing
