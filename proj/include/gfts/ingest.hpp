#pragma once

#include "gfts/domain.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>

namespace gfts {

/// Grouping configuration, one directive per line:
///
///     attributes = sex,region,prefecture
///     bottom = prefecture,sex
///     level =                      # grand total
///     level = sex
///     refine prefecture -> region  # declares the refinement
///     refine P1 -> R1              # one line per child value
///
/// `#` starts a comment. Errors are ConfigError with the offending line.
[[nodiscard]] GroupingScheme parse_grouping_config(std::istream& in);
[[nodiscard]] GroupingScheme load_grouping_config(const std::filesystem::path& path);
void write_grouping_config(std::ostream& out, const GroupingScheme& scheme);

/// Panel CSV with header `year,age,<bottom attributes...>,deaths,exposure`.
/// Columns are matched by header name, so their order is free on input.
[[nodiscard]] GroupedDataset parse_panel(std::istream& in, const GroupingScheme& scheme);
[[nodiscard]] GroupedDataset load_panel(const std::filesystem::path& path,
                                        const std::filesystem::path& config);
void write_panel(std::ostream& out, const GroupedDataset& dataset);

/// Shortest decimal text that parses back to exactly `v`.
[[nodiscard]] std::string format_double(double v);

}  // namespace gfts
