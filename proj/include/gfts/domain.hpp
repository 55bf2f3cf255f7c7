#pragma once

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gfts {

/// Ordered age grid z_1 < ... < z_p shared by every series of a dataset.
class AgeGrid {
public:
    AgeGrid() = default;
    explicit AgeGrid(std::vector<double> ages);

    [[nodiscard]] const std::vector<double>& ages() const noexcept { return ages_; }
    [[nodiscard]] std::size_t size() const noexcept { return ages_.size(); }
    [[nodiscard]] double operator[](std::size_t j) const { return ages_[j]; }

    /// Trapezoidal quadrature weights; they sum to z_p - z_1.
    [[nodiscard]] Eigen::VectorXd trapezoid_weights() const;

    friend bool operator==(const AgeGrid& a, const AgeGrid& b) { return a.ages_ == b.ages_; }

private:
    std::vector<double> ages_;
};

enum class Scale { LogRate, Rate };

/// n years by p ages of curve values.
struct FunctionalSeries {
    AgeGrid grid;
    std::vector<int> years;
    Eigen::MatrixXd values;
    Scale scale = Scale::LogRate;

    [[nodiscard]] std::size_t n() const noexcept { return years.size(); }
    [[nodiscard]] std::size_t p() const noexcept { return grid.size(); }

    /// Throws InvalidArgument when shape, year order or value domain is off.
    void validate() const;
};

/// Attribute name -> value. The empty map is the grand total.
struct SeriesKey {
    std::map<std::string, std::string> attributes;

    SeriesKey() = default;
    SeriesKey(std::initializer_list<std::pair<const std::string, std::string>> init)
        : attributes(init) {}
    explicit SeriesKey(std::map<std::string, std::string> attrs) : attributes(std::move(attrs)) {}

    [[nodiscard]] bool is_total() const noexcept { return attributes.empty(); }
    /// "Total" for the grand total, otherwise values joined by '*' (e.g. "P1*F").
    [[nodiscard]] std::string label() const;
    /// "name=value;name=value", parseable by parse_key().
    [[nodiscard]] std::string spec() const;

    friend bool operator==(const SeriesKey& a, const SeriesKey& b) {
        return a.attributes == b.attributes;
    }
    friend bool operator<(const SeriesKey& a, const SeriesKey& b) {
        return a.attributes < b.attributes;
    }
};

/// Parses "name=value;name=value" (also accepts ','). "" or "Total" is the grand total.
[[nodiscard]] SeriesKey parse_key(const std::string& text);

/// Declares that every value of `child` maps to exactly one value of `parent`
/// (e.g. prefecture -> region).
struct Refinement {
    std::string child;
    std::string parent;
    std::map<std::string, std::string> parent_of;
};

struct GroupingScheme {
    std::vector<std::string> attribute_names;
    std::vector<std::string> bottom;
    std::vector<std::vector<std::string>> levels;
    std::vector<Refinement> refinements;

    /// Throws ConfigError when an invariant does not hold.
    void validate() const;

    /// Value of `attribute` for a bottom key, following refinements when the
    /// attribute is not stored on the key. nullopt when underivable.
    [[nodiscard]] std::optional<std::string> value_of(const SeriesKey& bottom_key,
                                                      const std::string& attribute) const;

    /// Projects a bottom key onto a level's attribute subset.
    [[nodiscard]] SeriesKey project(const SeriesKey& bottom_key,
                                    const std::vector<std::string>& level) const;

    /// Index of the level whose attribute set equals the key's, or nullopt.
    [[nodiscard]] std::optional<std::size_t> level_of(const SeriesKey& key) const;

    /// "Total" or attribute names joined by '*', in configured order.
    [[nodiscard]] std::string level_name(std::size_t level) const;
};

/// Bottom keys consistent with `key` (sorted). Throws UnknownKey when the key
/// matches no level or no bottom series.
[[nodiscard]] std::vector<SeriesKey> members(const GroupingScheme& scheme,
                                             std::span<const SeriesKey> bottom_keys,
                                             const SeriesKey& key);

/// Death counts and exposures for one series, n years by p ages.
struct CellPanel {
    Eigen::MatrixXd deaths;
    Eigen::MatrixXd exposure;
};

/// Deaths, exposures and the exact rate matrix of one series (any level).
struct DerivedSeries {
    CellPanel cells;
    FunctionalSeries rates;  // Rate scale
};

class GroupedDataset {
public:
    GroupedDataset() = default;

    /// Validates the bottom panels and derives every aggregate series.
    static GroupedDataset build(AgeGrid grid, GroupingScheme scheme, std::vector<int> years,
                                std::map<SeriesKey, CellPanel> bottom);

    [[nodiscard]] const AgeGrid& grid() const noexcept { return grid_; }
    [[nodiscard]] const GroupingScheme& scheme() const noexcept { return scheme_; }
    [[nodiscard]] const std::vector<int>& years() const noexcept { return years_; }
    [[nodiscard]] std::size_t n_years() const noexcept { return years_.size(); }

    [[nodiscard]] const std::map<SeriesKey, CellPanel>& bottom() const noexcept { return bottom_; }
    [[nodiscard]] const std::vector<SeriesKey>& bottom_keys() const noexcept { return bottom_keys_; }

    /// Canonical order: levels in scheme order, keys sorted within a level.
    [[nodiscard]] const std::vector<SeriesKey>& all_keys() const noexcept { return all_keys_; }
    [[nodiscard]] const std::vector<std::size_t>& key_levels() const noexcept { return key_levels_; }
    [[nodiscard]] std::vector<SeriesKey> level_keys(std::size_t level) const;

    [[nodiscard]] const DerivedSeries& series(const SeriesKey& key) const;
    [[nodiscard]] const std::vector<SeriesKey>& members_of(const SeriesKey& key) const;
    [[nodiscard]] bool contains(const SeriesKey& key) const { return derived_.count(key) > 0; }

    /// Restricts every series to the first `n` years.
    [[nodiscard]] GroupedDataset truncated(std::size_t n) const;

private:
    AgeGrid grid_;
    GroupingScheme scheme_;
    std::vector<int> years_;
    std::map<SeriesKey, CellPanel> bottom_;
    std::vector<SeriesKey> bottom_keys_;
    std::vector<SeriesKey> all_keys_;
    std::vector<std::size_t> key_levels_;
    std::map<SeriesKey, std::vector<SeriesKey>> members_;
    std::map<SeriesKey, DerivedSeries> derived_;
};

/// Rate-scale series of `key`: summed deaths over summed exposure of its
/// members, cell by cell. Throws UnknownKey or ZeroExposure.
[[nodiscard]] FunctionalSeries aggregate(const GroupedDataset& dataset, const SeriesKey& key);

}  // namespace gfts
