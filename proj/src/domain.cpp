#include "gfts/domain.hpp"

#include "gfts/error.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace gfts {

AgeGrid::AgeGrid(std::vector<double> ages) : ages_(std::move(ages)) {
    if (ages_.size() < 2) fail(ErrorKind::InvalidArgument, "age grid needs at least 2 points");
    for (std::size_t j = 0; j < ages_.size(); ++j) {
        if (!std::isfinite(ages_[j])) fail(ErrorKind::InvalidArgument, "age grid has a non-finite point");
        if (j > 0 && !(ages_[j] > ages_[j - 1]))
            fail(ErrorKind::InvalidArgument, "age grid must be strictly increasing");
    }
}

Eigen::VectorXd AgeGrid::trapezoid_weights() const {
    const auto p = static_cast<Eigen::Index>(ages_.size());
    Eigen::VectorXd w = Eigen::VectorXd::Zero(p);
    for (Eigen::Index j = 0; j + 1 < p; ++j) {
        const double half = 0.5 * (ages_[j + 1] - ages_[j]);
        w[j] += half;
        w[j + 1] += half;
    }
    return w;
}

void FunctionalSeries::validate() const {
    if (values.rows() != static_cast<Eigen::Index>(years.size()) ||
        values.cols() != static_cast<Eigen::Index>(grid.size()))
        fail(ErrorKind::ShapeMismatch, "series values do not match years x ages");
    for (std::size_t t = 1; t < years.size(); ++t)
        if (years[t] != years[t - 1] + 1)
            fail(ErrorKind::InvalidArgument, "series years must be consecutive");
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        const double v = values.data()[i];
        if (!std::isfinite(v)) fail(ErrorKind::InvalidArgument, "series contains a non-finite value");
        if (scale == Scale::Rate && v < 0.0) fail(ErrorKind::InvalidArgument, "negative rate");
    }
}

std::string SeriesKey::label() const {
    if (attributes.empty()) return "Total";
    std::string out;
    for (const auto& [name, value] : attributes) {
        if (!out.empty()) out += '*';
        out += value;
    }
    return out;
}

std::string SeriesKey::spec() const {
    std::string out;
    for (const auto& [name, value] : attributes) {
        if (!out.empty()) out += ';';
        out += name + "=" + value;
    }
    return out;
}

SeriesKey parse_key(const std::string& text) {
    SeriesKey key;
    if (text.empty() || text == "Total") return key;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, text.find(';') != std::string::npos ? ';' : ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0)
            fail(ErrorKind::ParseError, "malformed key component '" + item + "'");
        key.attributes[item.substr(0, eq)] = item.substr(eq + 1);
    }
    return key;
}

namespace {

std::set<std::string> as_set(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

}  // namespace

void GroupingScheme::validate() const {
    const auto declared = as_set(attribute_names);
    if (declared.size() != attribute_names.size()) fail(ErrorKind::ConfigError, "duplicate attribute name");
    if (bottom.empty()) fail(ErrorKind::ConfigError, "bottom attribute combination is empty");
    for (const auto& a : bottom)
        if (!declared.count(a)) fail(ErrorKind::ConfigError, "bottom attribute '" + a + "' is not declared");
    if (levels.empty()) fail(ErrorKind::ConfigError, "no levels declared");
    if (as_set(levels.back()) != as_set(bottom))
        fail(ErrorKind::ConfigError, "the last level must be the bottom combination");

    for (const auto& r : refinements) {
        if (!declared.count(r.child) || !declared.count(r.parent))
            fail(ErrorKind::ConfigError, "refinement " + r.child + " -> " + r.parent + " uses an undeclared attribute");
        if (r.child == r.parent) fail(ErrorKind::ConfigError, "attribute cannot refine itself");
    }

    // an attribute is derivable if it is bottom or is the parent of a derivable child
    std::set<std::string> derivable(bottom.begin(), bottom.end());
    for (bool grew = true; grew;) {
        grew = false;
        for (const auto& r : refinements)
            if (derivable.count(r.child) && derivable.insert(r.parent).second) grew = true;
    }

    std::set<std::set<std::string>> seen;
    for (const auto& level : levels) {
        const auto s = as_set(level);
        if (s.size() != level.size()) fail(ErrorKind::ConfigError, "level repeats an attribute");
        for (const auto& a : level) {
            if (!declared.count(a)) fail(ErrorKind::ConfigError, "level attribute '" + a + "' is not declared");
            if (!derivable.count(a))
                fail(ErrorKind::ConfigError, "level attribute '" + a + "' is neither bottom nor derivable");
        }
        if (!seen.insert(s).second) fail(ErrorKind::ConfigError, "duplicate level");
    }
}

std::optional<std::string> GroupingScheme::value_of(const SeriesKey& bottom_key,
                                                    const std::string& attribute) const {
    if (auto it = bottom_key.attributes.find(attribute); it != bottom_key.attributes.end())
        return it->second;
    for (const auto& r : refinements) {
        if (r.parent != attribute) continue;
        if (auto child = value_of(bottom_key, r.child)) {
            if (auto it = r.parent_of.find(*child); it != r.parent_of.end()) return it->second;
        }
    }
    return std::nullopt;
}

SeriesKey GroupingScheme::project(const SeriesKey& bottom_key, const std::vector<std::string>& level) const {
    SeriesKey out;
    for (const auto& a : level) {
        auto v = value_of(bottom_key, a);
        if (!v) fail(ErrorKind::ConfigError, "cannot derive '" + a + "' for series " + bottom_key.label());
        out.attributes[a] = *v;
    }
    return out;
}

std::optional<std::size_t> GroupingScheme::level_of(const SeriesKey& key) const {
    std::set<std::string> names;
    for (const auto& [name, value] : key.attributes) names.insert(name);
    for (std::size_t l = 0; l < levels.size(); ++l)
        if (as_set(levels[l]) == names) return l;
    return std::nullopt;
}

std::string GroupingScheme::level_name(std::size_t level) const {
    const auto& attrs = levels.at(level);
    if (attrs.empty()) return "Total";
    std::string out;
    for (const auto& a : attrs) {
        if (!out.empty()) out += '*';
        out += a;
    }
    return out;
}

std::vector<SeriesKey> members(const GroupingScheme& scheme, std::span<const SeriesKey> bottom_keys,
                               const SeriesKey& key) {
    const auto level = scheme.level_of(key);
    if (!level) fail(ErrorKind::UnknownKey, "key '" + key.spec() + "' matches no level");
    std::vector<SeriesKey> out;
    for (const auto& b : bottom_keys)
        if (scheme.project(b, scheme.levels[*level]) == key) out.push_back(b);
    if (out.empty()) fail(ErrorKind::UnknownKey, "key '" + key.spec() + "' has no bottom members");
    std::sort(out.begin(), out.end());
    return out;
}

namespace {

DerivedSeries derive(const AgeGrid& grid, const std::vector<int>& years,
                     const std::map<SeriesKey, CellPanel>& bottom, const std::vector<SeriesKey>& member_keys,
                     const SeriesKey& key) {
    const auto n = static_cast<Eigen::Index>(years.size());
    const auto p = static_cast<Eigen::Index>(grid.size());
    DerivedSeries out;
    out.cells.deaths = Eigen::MatrixXd::Zero(n, p);
    out.cells.exposure = Eigen::MatrixXd::Zero(n, p);
    for (const auto& b : member_keys) {
        const auto& cells = bottom.at(b);
        out.cells.deaths += cells.deaths;
        out.cells.exposure += cells.exposure;
    }
    if ((out.cells.exposure.array() <= 0.0).any())
        fail(ErrorKind::ZeroExposure, "series " + key.label() + " has a zero exposure cell");
    out.rates.grid = grid;
    out.rates.years = years;
    out.rates.scale = Scale::Rate;
    out.rates.values = out.cells.deaths.array() / out.cells.exposure.array();
    return out;
}

}  // namespace

GroupedDataset GroupedDataset::build(AgeGrid grid, GroupingScheme scheme, std::vector<int> years,
                                     std::map<SeriesKey, CellPanel> bottom) {
    scheme.validate();
    if (years.empty()) fail(ErrorKind::InvalidArgument, "dataset has no years");
    for (std::size_t t = 1; t < years.size(); ++t)
        if (years[t] != years[t - 1] + 1) fail(ErrorKind::IncompleteRectangle, "years are not consecutive");
    if (bottom.empty()) fail(ErrorKind::InvalidArgument, "dataset has no bottom series");

    const auto n = static_cast<Eigen::Index>(years.size());
    const auto p = static_cast<Eigen::Index>(grid.size());
    const std::set<std::string> bottom_names(scheme.bottom.begin(), scheme.bottom.end());
    for (const auto& [key, cells] : bottom) {
        std::set<std::string> names;
        for (const auto& [a, v] : key.attributes) names.insert(a);
        if (names != bottom_names)
            fail(ErrorKind::UnknownKey, "bottom key '" + key.spec() + "' does not match the bottom attributes");
        if (cells.deaths.rows() != n || cells.deaths.cols() != p || cells.exposure.rows() != n ||
            cells.exposure.cols() != p)
            fail(ErrorKind::ShapeMismatch, "bottom series " + key.label() + " has the wrong shape");
        for (Eigen::Index i = 0; i < cells.deaths.size(); ++i) {
            const double d = cells.deaths.data()[i];
            const double e = cells.exposure.data()[i];
            if (!std::isfinite(d) || d < 0.0)
                fail(ErrorKind::InvalidArgument, "series " + key.label() + " has an invalid death count");
            if (!std::isfinite(e) || e <= 0.0)
                fail(ErrorKind::NonPositiveExposure, "series " + key.label() + " has a non-positive exposure");
        }
    }

    GroupedDataset ds;
    ds.grid_ = std::move(grid);
    ds.scheme_ = std::move(scheme);
    ds.years_ = std::move(years);
    ds.bottom_ = std::move(bottom);
    for (const auto& [key, cells] : ds.bottom_) ds.bottom_keys_.push_back(key);

    for (std::size_t l = 0; l < ds.scheme_.levels.size(); ++l) {
        std::map<SeriesKey, std::vector<SeriesKey>> groups;
        for (const auto& b : ds.bottom_keys_) groups[ds.scheme_.project(b, ds.scheme_.levels[l])].push_back(b);
        for (auto& [key, mem] : groups) {
            ds.all_keys_.push_back(key);
            ds.key_levels_.push_back(l);
            ds.members_[key] = std::move(mem);
        }
    }
    for (const auto& key : ds.all_keys_)
        ds.derived_[key] = derive(ds.grid_, ds.years_, ds.bottom_, ds.members_.at(key), key);
    return ds;
}

std::vector<SeriesKey> GroupedDataset::level_keys(std::size_t level) const {
    std::vector<SeriesKey> out;
    for (std::size_t i = 0; i < all_keys_.size(); ++i)
        if (key_levels_[i] == level) out.push_back(all_keys_[i]);
    return out;
}

const DerivedSeries& GroupedDataset::series(const SeriesKey& key) const {
    auto it = derived_.find(key);
    if (it == derived_.end()) fail(ErrorKind::UnknownKey, "no series '" + key.spec() + "'");
    return it->second;
}

const std::vector<SeriesKey>& GroupedDataset::members_of(const SeriesKey& key) const {
    auto it = members_.find(key);
    if (it == members_.end()) fail(ErrorKind::UnknownKey, "no series '" + key.spec() + "'");
    return it->second;
}

GroupedDataset GroupedDataset::truncated(std::size_t n) const {
    if (n == 0 || n > years_.size()) fail(ErrorKind::InvalidArgument, "truncation length out of range");
    std::map<SeriesKey, CellPanel> bottom;
    const auto rows = static_cast<Eigen::Index>(n);
    for (const auto& [key, cells] : bottom_)
        bottom[key] = CellPanel{cells.deaths.topRows(rows), cells.exposure.topRows(rows)};
    return build(grid_, scheme_, std::vector<int>(years_.begin(), years_.begin() + rows), std::move(bottom));
}

FunctionalSeries aggregate(const GroupedDataset& dataset, const SeriesKey& key) {
    const auto mem = members(dataset.scheme(), dataset.bottom_keys(), key);
    return derive(dataset.grid(), dataset.years(), dataset.bottom(), mem, key).rates;
}

}  // namespace gfts
