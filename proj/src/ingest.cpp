#include "gfts/ingest.hpp"

#include "gfts/error.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

namespace gfts {

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::vector<std::string> split_list(const std::string& s) {
    if (trim(s).empty()) return {};
    return split(s, ',');
}

[[noreturn]] void config_error(std::size_t line, const std::string& msg) {
    fail(ErrorKind::ConfigError, "line " + std::to_string(line) + ": " + msg);
}

[[noreturn]] void parse_error(std::size_t line, const std::string& msg) {
    fail(ErrorKind::ParseError, "line " + std::to_string(line) + ": " + msg);
}

template <typename T>
bool parse_number(const std::string& text, T& out) {
    const char* first = text.data();
    const char* last = first + text.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

GroupingScheme parse_grouping_config(std::istream& in) {
    GroupingScheme scheme;
    bool have_attributes = false;
    bool have_bottom = false;
    Refinement* current = nullptr;
    std::string raw;
    std::size_t line_no = 0;
    std::size_t last_level_line = 0;

    while (std::getline(in, raw)) {
        ++line_no;
        if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
        const std::string line = trim(raw);
        if (line.empty()) continue;

        if (line.rfind("refine", 0) == 0 && (line.size() == 6 || line[6] == ' ' || line[6] == '\t')) {
            const auto arrow = line.find("->");
            if (arrow == std::string::npos) config_error(line_no, "refine line needs '->'");
            const auto lhs = trim(line.substr(6, arrow - 6));
            const auto rhs = trim(line.substr(arrow + 2));
            if (lhs.empty() || rhs.empty()) config_error(line_no, "refine line has an empty side");
            if (!have_attributes) config_error(line_no, "refine before attributes");
            const auto& names = scheme.attribute_names;
            const bool lhs_attr = std::find(names.begin(), names.end(), lhs) != names.end();
            const bool rhs_attr = std::find(names.begin(), names.end(), rhs) != names.end();
            if (lhs_attr && rhs_attr) {
                for (const auto& r : scheme.refinements)
                    if (r.child == lhs) config_error(line_no, "attribute '" + lhs + "' already refined");
                scheme.refinements.push_back(Refinement{lhs, rhs, {}});
                current = &scheme.refinements.back();
            } else {
                if (!current) config_error(line_no, "value mapping before a 'refine <child> -> <parent>' declaration");
                if (!current->parent_of.emplace(lhs, rhs).second)
                    config_error(line_no, "value '" + lhs + "' mapped twice");
            }
            continue;
        }

        const auto eq = line.find('=');
        if (eq == std::string::npos) config_error(line_no, "expected 'key = value'");
        const auto key = trim(line.substr(0, eq));
        const auto value = line.substr(eq + 1);
        if (key == "attributes") {
            if (have_attributes) config_error(line_no, "attributes declared twice");
            scheme.attribute_names = split_list(value);
            if (scheme.attribute_names.empty()) config_error(line_no, "empty attribute list");
            for (const auto& a : scheme.attribute_names)
                if (a.empty()) config_error(line_no, "empty attribute name");
            have_attributes = true;
        } else if (key == "bottom") {
            if (have_bottom) config_error(line_no, "bottom declared twice");
            scheme.bottom = split_list(value);
            have_bottom = true;
        } else if (key == "level") {
            auto level = split_list(value);
            for (const auto& a : level) {
                if (a.empty()) config_error(line_no, "empty attribute in level");
                if (have_attributes &&
                    std::find(scheme.attribute_names.begin(), scheme.attribute_names.end(), a) ==
                        scheme.attribute_names.end())
                    config_error(line_no, "level references undeclared attribute '" + a + "'");
            }
            scheme.levels.push_back(std::move(level));
            last_level_line = line_no;
        } else {
            config_error(line_no, "unknown directive '" + key + "'");
        }
        // refine value lines only follow their declaration directly
        current = nullptr;
    }

    if (!have_attributes) config_error(line_no, "missing 'attributes' line");
    if (!have_bottom) config_error(line_no, "missing 'bottom' line");
    if (scheme.levels.empty()) config_error(line_no, "no 'level' lines");
    try {
        scheme.validate();
    } catch (const Error& e) {
        config_error(last_level_line ? last_level_line : line_no, e.what());
    }
    return scheme;
}

GroupingScheme load_grouping_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::ConfigError, "cannot open config '" + path.string() + "'");
    return parse_grouping_config(in);
}

void write_grouping_config(std::ostream& out, const GroupingScheme& scheme) {
    auto join = [](const std::vector<std::string>& v) {
        std::string s;
        for (const auto& x : v) s += (s.empty() ? "" : ",") + x;
        return s;
    };
    out << "attributes = " << join(scheme.attribute_names) << '\n';
    out << "bottom = " << join(scheme.bottom) << '\n';
    for (const auto& level : scheme.levels) out << "level = " << join(level) << '\n';
    for (const auto& r : scheme.refinements) {
        out << "refine " << r.child << " -> " << r.parent << '\n';
        for (const auto& [child, parent] : r.parent_of) out << "refine " << child << " -> " << parent << '\n';
    }
}

GroupedDataset parse_panel(std::istream& in, const GroupingScheme& scheme) {
    scheme.validate();
    std::string raw;
    std::size_t line_no = 0;
    if (!std::getline(in, raw)) fail(ErrorKind::ParseError, "line 1: missing header row");
    ++line_no;
    const auto header = split(raw, ',');

    auto column = [&](const std::string& name) -> std::size_t {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) parse_error(1, "missing column '" + name + "'");
        if (std::find(it + 1, header.end(), name) != header.end()) parse_error(1, "duplicate column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    const auto c_year = column("year");
    const auto c_age = column("age");
    const auto c_deaths = column("deaths");
    const auto c_exposure = column("exposure");
    std::vector<std::size_t> c_attr;
    for (const auto& a : scheme.bottom) c_attr.push_back(column(a));
    if (header.size() != 4 + scheme.bottom.size()) parse_error(1, "unexpected extra columns in header");

    struct Row {
        double deaths;
        double exposure;
    };
    // (key, year, age) -> cell
    std::map<std::tuple<SeriesKey, int, int>, Row> cells;
    std::set<int> years, ages;
    std::set<SeriesKey> keys;
    std::vector<std::set<std::string>> attr_values(scheme.bottom.size());

    while (std::getline(in, raw)) {
        ++line_no;
        if (trim(raw).empty()) continue;
        const auto fields = split(raw, ',');
        if (fields.size() != header.size())
            parse_error(line_no, "expected " + std::to_string(header.size()) + " fields, got " +
                                     std::to_string(fields.size()));
        int year = 0, age = 0;
        double deaths = 0, exposure = 0;
        if (!parse_number(fields[c_year], year)) parse_error(line_no, "bad year '" + fields[c_year] + "'");
        if (!parse_number(fields[c_age], age) || age < 0) parse_error(line_no, "bad age '" + fields[c_age] + "'");
        if (!parse_number(fields[c_deaths], deaths) || !std::isfinite(deaths) || deaths < 0)
            parse_error(line_no, "bad deaths '" + fields[c_deaths] + "'");
        if (!parse_number(fields[c_exposure], exposure) || !std::isfinite(exposure))
            parse_error(line_no, "bad exposure '" + fields[c_exposure] + "'");
        if (exposure <= 0)
            fail(ErrorKind::NonPositiveExposure, "line " + std::to_string(line_no) + ": exposure must be positive");
        SeriesKey key;
        for (std::size_t a = 0; a < scheme.bottom.size(); ++a) {
            const auto& v = fields[c_attr[a]];
            if (v.empty()) parse_error(line_no, "empty value for '" + scheme.bottom[a] + "'");
            key.attributes[scheme.bottom[a]] = v;
            attr_values[a].insert(v);
        }
        if (!cells.emplace(std::make_tuple(key, year, age), Row{deaths, exposure}).second)
            fail(ErrorKind::DuplicateCell, "line " + std::to_string(line_no) + ": duplicate cell year " +
                                               std::to_string(year) + " age " + std::to_string(age) + " for " +
                                               key.label());
        years.insert(year);
        ages.insert(age);
        keys.insert(key);
    }
    if (cells.empty()) fail(ErrorKind::ParseError, "panel has no data rows");

    // every attribute combination must be present, each with a full year x age rectangle
    std::vector<SeriesKey> combos{SeriesKey{}};
    for (std::size_t a = 0; a < scheme.bottom.size(); ++a) {
        std::vector<SeriesKey> next;
        for (const auto& c : combos)
            for (const auto& v : attr_values[a]) {
                auto k = c;
                k.attributes[scheme.bottom[a]] = v;
                next.push_back(std::move(k));
            }
        combos = std::move(next);
    }
    std::sort(combos.begin(), combos.end());

    const int first_year = *years.begin();
    const int last_year = *years.rbegin();
    std::vector<int> year_list;
    for (int y = first_year; y <= last_year; ++y) year_list.push_back(y);
    const std::vector<int> age_list(ages.begin(), ages.end());

    std::map<SeriesKey, CellPanel> bottom;
    const auto n = static_cast<Eigen::Index>(year_list.size());
    const auto p = static_cast<Eigen::Index>(age_list.size());
    for (const auto& key : combos) {
        CellPanel panel{Eigen::MatrixXd(n, p), Eigen::MatrixXd(n, p)};
        for (Eigen::Index t = 0; t < n; ++t)
            for (Eigen::Index j = 0; j < p; ++j) {
                auto it = cells.find(std::make_tuple(key, year_list[t], age_list[j]));
                if (it == cells.end())
                    fail(ErrorKind::IncompleteRectangle, "missing cell year " + std::to_string(year_list[t]) +
                                                             " age " + std::to_string(age_list[j]) + " for " +
                                                             key.spec());
                panel.deaths(t, j) = it->second.deaths;
                panel.exposure(t, j) = it->second.exposure;
            }
        bottom.emplace(key, std::move(panel));
    }

    std::vector<double> grid(age_list.begin(), age_list.end());
    if (grid.size() < 2) fail(ErrorKind::IncompleteRectangle, "panel needs at least two ages");
    return GroupedDataset::build(AgeGrid(std::move(grid)), scheme, std::move(year_list), std::move(bottom));
}

GroupedDataset load_panel(const std::filesystem::path& path, const std::filesystem::path& config) {
    const auto scheme = load_grouping_config(config);
    std::ifstream in(path);
    if (!in) fail(ErrorKind::ParseError, "cannot open panel '" + path.string() + "'");
    return parse_panel(in, scheme);
}

void write_panel(std::ostream& out, const GroupedDataset& dataset) {
    const auto& scheme = dataset.scheme();
    out << "year,age";
    for (const auto& a : scheme.bottom) out << ',' << a;
    out << ",deaths,exposure\n";
    const auto& ages = dataset.grid().ages();
    for (const auto& [key, cells] : dataset.bottom()) {
        for (std::size_t t = 0; t < dataset.n_years(); ++t)
            for (std::size_t j = 0; j < ages.size(); ++j) {
                out << dataset.years()[t] << ',' << format_double(ages[j]);
                for (const auto& a : scheme.bottom) out << ',' << key.attributes.at(a);
                const auto ti = static_cast<Eigen::Index>(t);
                const auto ji = static_cast<Eigen::Index>(j);
                out << ',' << format_double(cells.deaths(ti, ji)) << ',' << format_double(cells.exposure(ti, ji))
                    << '\n';
            }
    }
}

}  // namespace gfts
