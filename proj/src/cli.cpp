#include "gfts/cli.hpp"

#include "gfts/error.hpp"
#include "gfts/evaluate.hpp"
#include "gfts/ingest.hpp"
#include "gfts/simulate.hpp"

#include <CLI11.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

namespace gfts {

namespace fs = std::filesystem;

std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::ParseError, "cannot open '" + path + "' for hashing");
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
        fail(ErrorKind::InvalidArgument, "SHA-256 is unavailable");
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), md, &len);
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return hex.str();
}

namespace {

struct Options {
    std::string data, config, out_dir = ".", forecasts, variances;
    std::uint64_t seed = 1;
    double alpha = 0.2, delta = 0.9;
    int h_max = 10;
    std::vector<std::string> methods;
    unsigned threads = 1;
    std::string lambda = "1";
    std::string kind = "pointwise";
    std::string weighting = "wls";
    std::string median = "ranked";
    std::string score_scale = "smoothed";
    int replicates = 1000;
    bool no_intervals = false;
    int train_years = 0;
    // simulate
    int years = 39;
    std::string preset = "default";
    bool no_noise = false;
};

/// Collects what a run read, resolved and wrote, then writes manifest.txt.
class Manifest {
public:
    explicit Manifest(std::string subcommand)
        : subcommand_(std::move(subcommand)), start_(std::chrono::steady_clock::now()) {}
    void setting(const std::string& key, const std::string& value) { settings_.emplace_back(key, value); }
    void input(const std::string& path) { inputs_.emplace_back(path, sha256_file(path)); }
    void output(const fs::path& path) { outputs_.push_back(path); }

    void write(const fs::path& dir) const {
        std::ofstream m(dir / "manifest.txt");
        m << "subcommand: " << subcommand_ << "\ntool_version: " << kToolVersion << '\n';
        for (const auto& [k, v] : settings_) m << "setting " << k << ": " << v << '\n';
        for (const auto& [p, d] : inputs_) m << "input " << p << ": sha256 " << d << '\n';
        for (const auto& p : outputs_) m << "output " << p.filename().string() << ": sha256 " << sha256_file(p.string()) << '\n';
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        m << "wall_clock_seconds: " << format_double(secs) << '\n';
    }

private:
    std::string subcommand_;
    std::chrono::steady_clock::time_point start_;
    std::vector<std::pair<std::string, std::string>> settings_;
    std::vector<std::pair<std::string, std::string>> inputs_;
    std::vector<fs::path> outputs_;
};

std::ofstream open_output(const fs::path& path) {
    std::ofstream f(path);
    if (!f) fail(ErrorKind::InvalidArgument, "cannot write '" + path.string() + "'");
    return f;
}

fs::path prepare_out_dir(const Options& o) {
    const fs::path dir(o.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail(ErrorKind::InvalidArgument, "cannot create output directory '" + o.out_dir + "'");
    return dir;
}

GroupedDataset load_inputs(const Options& o, Manifest& manifest) {
    if (o.data.empty() || o.config.empty()) fail(ErrorKind::InvalidArgument, "--data and --config are required");
    auto ds = load_panel(o.data, o.config);
    manifest.input(o.data);
    manifest.input(o.config);
    return ds;
}

SmoothingConfig smoothing_of(const Options& o) {
    SmoothingConfig c;
    if (o.lambda == "auto") {
        c.lambda.reset();
    } else {
        try {
            std::size_t used = 0;
            c.lambda = std::stod(o.lambda, &used);
            if (used != o.lambda.size()) throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            fail(ErrorKind::InvalidArgument, "--lambda must be a number or 'auto'");
        }
    }
    return c;
}

ForecastSettings forecast_of(const Options& o) {
    ForecastSettings f;
    f.delta = o.delta;
    f.threads = o.threads;
    return f;
}

Weighting weighting_of(const Options& o) {
    if (o.weighting == "wls") return Weighting::WLS;
    if (o.weighting == "ols") return Weighting::OLS;
    fail(ErrorKind::InvalidArgument, "--weighting must be 'wls' or 'ols'");
}

IntervalKind kind_of(const Options& o) {
    if (o.kind == "pointwise") return IntervalKind::Pointwise;
    if (o.kind == "uniform") return IntervalKind::Uniform;
    fail(ErrorKind::InvalidArgument, "--kind must be 'pointwise' or 'uniform'");
}

std::vector<Method> methods_of(const Options& o, std::vector<Method> fallback) {
    if (o.methods.empty()) return fallback;
    std::vector<Method> out;
    for (const auto& m : o.methods) {
        std::stringstream ss(m);
        std::string item;
        while (std::getline(ss, item, ','))
            if (!item.empty()) out.push_back(parse_method(item));
    }
    return out;
}

void check_common(const Options& o) {
    if (!(o.alpha > 0.0 && o.alpha < 1.0)) fail(ErrorKind::InvalidArgument, "--alpha must lie in (0, 1)");
    if (!(o.delta > 0.0 && o.delta <= 1.0)) fail(ErrorKind::InvalidArgument, "--delta must lie in (0, 1]");
    if (o.h_max < 1) fail(ErrorKind::InvalidArgument, "--h-max must be at least 1");
    if (o.threads < 1) fail(ErrorKind::InvalidArgument, "--threads must be at least 1");
}

void common_settings(Manifest& m, const Options& o) {
    m.setting("seed", std::to_string(o.seed));
    m.setting("alpha", format_double(o.alpha));
    m.setting("delta", format_double(o.delta));
    m.setting("h_max", std::to_string(o.h_max));
    m.setting("lambda", o.lambda);
}

void report_warnings(std::ostream& err, const std::vector<std::string>& warnings, Manifest& manifest) {
    constexpr std::size_t kShown = 5;
    for (std::size_t i = 0; i < std::min(kShown, warnings.size()); ++i) err << "warning: " << warnings[i] << '\n';
    if (warnings.size() > kShown) err << "warning: ... and " << warnings.size() - kShown << " more\n";
    manifest.setting("warnings", std::to_string(warnings.size()));
}

// ---- CSV helpers for the forecast layout: series,horizon,year,age,log_rate ----

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double to_double(const std::string& s, std::size_t line) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    fail(ErrorKind::ParseError, "line " + std::to_string(line) + ": '" + s + "' is not a number");
}

std::map<std::string, SeriesKey> keys_by_label(const GroupedDataset& ds) {
    std::map<std::string, SeriesKey> out;
    for (const auto& k : ds.all_keys()) out.emplace(k.label(), k);
    return out;
}

BaseForecasts read_base_forecasts(const std::string& path, const GroupedDataset& ds, int h_max) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::ParseError, "cannot open forecasts '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line != "series,horizon,year,age,log_rate")
        fail(ErrorKind::ParseError, "line 1: expected header series,horizon,year,age,log_rate");
    const auto labels = keys_by_label(ds);
    const auto& ages = ds.grid().ages();
    BaseForecasts base;
    base.train_years = ds.n_years();
    base.horizons = h_max;
    for (const auto& k : ds.all_keys()) {
        base.curves.emplace(k, Eigen::MatrixXd::Constant(h_max, static_cast<Eigen::Index>(ages.size()), std::nan("")));
    }
    std::size_t n = 1;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        const auto f = split(line);
        if (f.size() != 5) fail(ErrorKind::ParseError, "line " + std::to_string(n) + ": expected 5 fields");
        const auto it = labels.find(f[0]);
        if (it == labels.end()) fail(ErrorKind::UnknownKey, "line " + std::to_string(n) + ": unknown series '" + f[0] + "'");
        const double h = to_double(f[1], n), age = to_double(f[3], n);
        if (h < 1 || h > h_max || h != std::floor(h)) continue;
        const auto pos = std::find(ages.begin(), ages.end(), age);
        if (pos == ages.end()) fail(ErrorKind::ParseError, "line " + std::to_string(n) + ": age not on the grid");
        base.curves.at(it->second)(static_cast<Eigen::Index>(h) - 1, pos - ages.begin()) = to_double(f[4], n);
    }
    for (const auto& [k, m] : base.curves)
        if (!m.allFinite()) fail(ErrorKind::IncompleteRectangle, "forecasts for " + k.label() + " do not cover every horizon and age");
    return base;
}

void read_variances(const std::string& path, const GroupedDataset& ds, BaseForecasts& base) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::ParseError, "cannot open variances '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line != "series,one_step_mse")
        fail(ErrorKind::ParseError, "line 1: expected header series,one_step_mse");
    const auto labels = keys_by_label(ds);
    std::size_t n = 1;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        const auto f = split(line);
        if (f.size() != 2) fail(ErrorKind::ParseError, "line " + std::to_string(n) + ": expected 2 fields");
        const auto it = labels.find(f[0]);
        if (it == labels.end()) fail(ErrorKind::UnknownKey, "line " + std::to_string(n) + ": unknown series '" + f[0] + "'");
        base.one_step_mse[it->second] = to_double(f[1], n);
    }
    for (const auto& k : ds.all_keys())
        if (!base.one_step_mse.count(k)) fail(ErrorKind::KeyMismatch, "no variance for series " + k.label());
}

void write_curves(std::ostream& out, const GroupedDataset& ds, const std::map<SeriesKey, Eigen::MatrixXd>& curves) {
    out << "series,horizon,year,age,log_rate\n";
    const int last = ds.years().back();
    for (const auto& key : ds.all_keys()) {
        const auto& m = curves.at(key);
        for (Eigen::Index h = 0; h < m.rows(); ++h)
            for (Eigen::Index j = 0; j < m.cols(); ++j)
                out << key.label() << ',' << h + 1 << ',' << last + h + 1 << ',' << format_double(ds.grid()[static_cast<std::size_t>(j)])
                    << ',' << format_double(m(h, j)) << '\n';
    }
}

// ---- subcommands ----

void cmd_simulate(const Options& o) {
    SimConfig c = o.preset == "large" ? SimConfig::large_preset() : SimConfig{};
    if (o.preset != "large" && o.preset != "default") fail(ErrorKind::InvalidArgument, "--preset must be 'default' or 'large'");
    c.seed = o.seed;
    c.n_years = o.years;
    c.poisson_noise = !o.no_noise;
    const auto result = simulate(c);
    const auto dir = prepare_out_dir(o);
    Manifest manifest("simulate");
    manifest.setting("seed", std::to_string(o.seed));
    manifest.setting("preset", o.preset);
    manifest.setting("years", std::to_string(o.years));
    manifest.setting("poisson_noise", o.no_noise ? "false" : "true");
    {
        auto f = open_output(dir / "panel.csv");
        write_panel(f, result.dataset);
    }
    {
        auto f = open_output(dir / "groups.cfg");
        write_grouping_config(f, result.dataset.scheme());
    }
    {
        auto f = open_output(dir / "latent.csv");
        write_latent(f, result);
    }
    for (const char* name : {"panel.csv", "groups.cfg", "latent.csv"}) manifest.output(dir / name);
    manifest.write(dir);
}

void cmd_smooth(const Options& o, std::ostream& err) {
    Manifest manifest("smooth");
    const auto ds = load_inputs(o, manifest);
    common_settings(manifest, o);
    const auto sm = smooth_dataset(ds, smoothing_of(o), o.threads);
    const auto dir = prepare_out_dir(o);
    {
        auto f = open_output(dir / "smoothed.csv");
        const auto& names = ds.scheme().attribute_names;
        f << "series,level";
        for (const auto& a : names) f << ',' << a;
        f << ",year,age,log_rate\n";
        for (std::size_t i = 0; i < ds.all_keys().size(); ++i) {
            const auto& key = ds.all_keys()[i];
            // attributes outside the key's level stay blank
            std::string prefix = key.label() + ',' + ds.scheme().level_name(ds.key_levels()[i]);
            for (const auto& a : names) {
                const auto it = key.attributes.find(a);
                prefix += ',' + (it == key.attributes.end() ? std::string() : it->second);
            }
            const auto& s = sm.series.at(key);
            for (std::size_t t = 0; t < s.n(); ++t)
                for (std::size_t j = 0; j < s.p(); ++j)
                    f << prefix << ',' << s.years[t] << ',' << format_double(s.grid[j]) << ','
                      << format_double(s.values(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j))) << '\n';
        }
    }
    report_warnings(err, sm.warnings, manifest);
    manifest.output(dir / "smoothed.csv");
    manifest.write(dir);
}

void cmd_fpca(const Options& o) {
    Manifest manifest("fpca");
    const auto ds = load_inputs(o, manifest);
    common_settings(manifest, o);
    const auto sm = smooth_dataset(ds, smoothing_of(o), o.threads);
    const auto dir = prepare_out_dir(o);
    {
        auto f = open_output(dir / "fpca.csv");
        auto g = open_output(dir / "fpca_scores.csv");
        f << "series,component,eigenvalue,variance_share,age,value\n";
        g << "series,year,component,score\n";
        for (const auto& key : ds.all_keys()) {
            const auto m = fit_fpca(sm.series.at(key), o.delta);
            for (std::size_t t = 0; t < m.n(); ++t)
                for (std::size_t k = 0; k < m.k(); ++k)
                    g << key.label() << ',' << m.years[t] << ',' << k + 1 << ','
                      << format_double(m.scores(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k))) << '\n';
            for (std::size_t j = 0; j < m.p(); ++j)
                f << key.label() << ",mean,,," << format_double(m.grid[j]) << ',' << format_double(m.mean[static_cast<Eigen::Index>(j)]) << '\n';
            for (std::size_t k = 0; k < m.k(); ++k) {
                const auto ki = static_cast<Eigen::Index>(k);
                const double share = m.total_variance > 0 ? m.eigenvalues[ki] / m.total_variance : 0.0;
                for (std::size_t j = 0; j < m.p(); ++j)
                    f << key.label() << ',' << k + 1 << ',' << format_double(m.eigenvalues[ki]) << ',' << format_double(share)
                      << ',' << format_double(m.grid[j]) << ',' << format_double(m.eigenfunctions(ki, static_cast<Eigen::Index>(j)))
                      << '\n';
            }
        }
    }
    manifest.output(dir / "fpca.csv");
    manifest.output(dir / "fpca_scores.csv");
    manifest.write(dir);
}

void cmd_forecast(const Options& o) {
    Manifest manifest("forecast");
    const auto ds = load_inputs(o, manifest);
    common_settings(manifest, o);
    const auto methods = methods_of(o, {Method::Independent});
    if (methods.size() != 1) fail(ErrorKind::InvalidArgument, "forecast takes exactly one --method");
    manifest.setting("method", std::string(method_name(methods[0])));
    manifest.setting("weighting", o.weighting);
    const auto sm = smooth_dataset(ds, smoothing_of(o), o.threads);
    const auto base = base_forecasts(sm, ds.n_years(), o.h_max, forecast_of(o));
    std::vector<std::vector<SummingMatrix>> s;
    if (methods[0] == Method::BottomUp || methods[0] == Method::OptimalCombination)
        s = forecast_summing_matrices(ds, o.h_max, o.threads);
    const auto curves = method_forecasts(sm, base, s, methods[0], weighting_of(o));
    const auto dir = prepare_out_dir(o);
    {
        auto f = open_output(dir / "forecasts.csv");
        write_curves(f, ds, curves);
    }
    {
        auto f = open_output(dir / "variances.csv");
        f << "series,one_step_mse\n";
        for (const auto& key : ds.all_keys()) f << key.label() << ',' << format_double(base.one_step_mse.at(key)) << '\n';
    }
    manifest.output(dir / "forecasts.csv");
    manifest.output(dir / "variances.csv");
    manifest.write(dir);
}

void cmd_reconcile(const Options& o) {
    Manifest manifest("reconcile");
    const auto ds = load_inputs(o, manifest);
    common_settings(manifest, o);
    if (o.forecasts.empty()) fail(ErrorKind::InvalidArgument, "--forecasts is required");
    const auto methods = methods_of(o, {Method::OptimalCombination});
    if (methods.size() != 1 || (methods[0] != Method::BottomUp && methods[0] != Method::OptimalCombination))
        fail(ErrorKind::InvalidArgument, "reconcile takes --method bottom_up or optimal_combination");
    const Weighting weighting = weighting_of(o);
    manifest.setting("method", std::string(method_name(methods[0])));
    manifest.setting("weighting", o.weighting);
    auto base = read_base_forecasts(o.forecasts, ds, o.h_max);
    manifest.input(o.forecasts);
    if (methods[0] == Method::OptimalCombination && weighting == Weighting::WLS) {
        if (o.variances.empty()) fail(ErrorKind::InvalidArgument, "WLS reconciliation needs --variances");
        read_variances(o.variances, ds, base);
        manifest.input(o.variances);
    } else {
        for (const auto& k : ds.all_keys()) base.one_step_mse[k] = 1.0;
    }
    const auto s = forecast_summing_matrices(ds, o.h_max, o.threads);
    const auto rec = reconcile_forecasts(base, s, methods[0], weighting);
    const auto dir = prepare_out_dir(o);
    {
        auto f = open_output(dir / "reconciled.csv");
        write_curves(f, ds, rec);
    }
    {
        auto f = open_output(dir / "residuals.csv");
        f << "horizon,age,max_abs_residual\n";
        for (int h = 0; h < o.h_max; ++h)
            for (std::size_t z = 0; z < ds.grid().size(); ++z) {
                const auto& S = s[static_cast<std::size_t>(h)][z];
                Eigen::VectorXd v(S.rows());
                for (Eigen::Index r = 0; r < S.rows(); ++r)
                    v[r] = std::exp(rec.at(S.row_keys[static_cast<std::size_t>(r)])(h, static_cast<Eigen::Index>(z)));
                f << h + 1 << ',' << format_double(ds.grid()[z]) << ',' << format_double(aggregation_residual(S, v)) << '\n';
            }
    }
    manifest.output(dir / "reconciled.csv");
    manifest.output(dir / "residuals.csv");
    manifest.write(dir);
}

void cmd_intervals(const Options& o, std::ostream& err) {
    Manifest manifest("intervals");
    const auto ds = load_inputs(o, manifest);
    common_settings(manifest, o);
    const auto methods = methods_of(o, {Method::Independent});
    if (methods.size() != 1 || methods[0] == Method::FMedian)
        fail(ErrorKind::InvalidArgument, "intervals takes --method independent, bottom_up or optimal_combination");
    IntervalSettings iv;
    iv.alpha = o.alpha;
    iv.kind = kind_of(o);
    iv.replicates = o.replicates;
    iv.seed = o.seed;
    manifest.setting("method", std::string(method_name(methods[0])));
    manifest.setting("kind", o.kind);
    manifest.setting("replicates", std::to_string(o.replicates));
    manifest.setting("weighting", o.weighting);
    const auto sm = smooth_dataset(ds, smoothing_of(o), o.threads);
    const auto fs_ = forecast_of(o);
    const auto base = base_forecasts(sm, ds.n_years(), o.h_max, fs_);
    std::vector<std::vector<SummingMatrix>> s;
    if (methods[0] != Method::Independent) s = forecast_summing_matrices(ds, o.h_max, o.threads);
    const auto points = method_forecasts(sm, base, s, methods[0], weighting_of(o));
    std::vector<std::string> warnings;
    const auto bands = method_intervals(base, s, points, methods[0], iv, fs_, weighting_of(o), &warnings);
    report_warnings(err, warnings, manifest);
    const auto dir = prepare_out_dir(o);
    {
        auto f = open_output(dir / "intervals.csv");
        f << "series,horizon,year,age,lower,point,upper\n";
        const int last = ds.years().back();
        for (const auto& key : ds.all_keys()) {
            const auto& p = points.at(key);
            const auto& b = bands.at(key);
            for (Eigen::Index h = 0; h < p.rows(); ++h)
                for (Eigen::Index j = 0; j < p.cols(); ++j)
                    f << key.label() << ',' << h + 1 << ',' << last + h + 1 << ',' << format_double(ds.grid()[static_cast<std::size_t>(j)])
                      << ',' << format_double(b.lower(h, j)) << ',' << format_double(p(h, j)) << ','
                      << format_double(b.upper(h, j)) << '\n';
        }
    }
    manifest.output(dir / "intervals.csv");
    manifest.write(dir);
}

void cmd_evaluate(const Options& o, std::ostream& err) {
    Manifest manifest("evaluate");
    const auto ds = load_inputs(o, manifest);
    common_settings(manifest, o);
    BacktestPlan plan;
    plan.h_max = o.h_max;
    if (o.train_years > 0) {
        plan.train_years = static_cast<std::size_t>(o.train_years);
    } else {
        if (ds.n_years() <= static_cast<std::size_t>(o.h_max)) fail(ErrorKind::SeriesTooShort, "fewer years than --h-max");
        plan.train_years = ds.n_years() - static_cast<std::size_t>(o.h_max);
    }
    plan.methods = methods_of(o, all_methods());
    plan.weighting = weighting_of(o);
    plan.forecast = forecast_of(o);
    plan.smoothing = smoothing_of(o);
    plan.with_intervals = !o.no_intervals;
    plan.intervals.alpha = o.alpha;
    plan.intervals.kind = kind_of(o);
    plan.intervals.replicates = o.replicates;
    plan.intervals.seed = o.seed;
    if (o.median != "ranked" && o.median != "horizon") fail(ErrorKind::InvalidArgument, "--median must be 'ranked' or 'horizon'");
    plan.horizon_indexed_median = o.median == "horizon";
    if (o.score_scale != "smoothed" && o.score_scale != "raw")
        fail(ErrorKind::InvalidArgument, "--score-scale must be 'smoothed' or 'raw'");
    plan.score_raw = o.score_scale == "raw";

    std::string method_list;
    for (Method m : plan.methods) method_list += (method_list.empty() ? "" : ",") + std::string(method_name(m));
    manifest.setting("methods", method_list);
    manifest.setting("train_years", std::to_string(plan.train_years));
    manifest.setting("weighting", o.weighting);
    manifest.setting("intervals", plan.with_intervals ? o.kind : "off");
    manifest.setting("replicates", std::to_string(o.replicates));
    manifest.setting("median", o.median);
    manifest.setting("score_scale", o.score_scale);

    const auto report = run_backtest(ds, plan);
    const auto dir = prepare_out_dir(o);
    {
        auto f = open_output(dir / "report.csv");
        write_report_csv(f, report);
    }
    {
        auto f = open_output(dir / "summary.csv");
        write_summary_csv(f, report);
    }
    {
        auto f = open_output(dir / "report.md");
        write_report_markdown(f, report,
                              {{"seed", std::to_string(o.seed)},
                               {"data sha256", sha256_file(o.data)},
                               {"config sha256", sha256_file(o.config)},
                               {"methods", method_list},
                               {"first training window", std::to_string(plan.train_years) + " years"},
                               {"alpha", format_double(o.alpha)},
                               {"delta", format_double(o.delta)}});
    }
    report_warnings(err, report.warnings, manifest);
    for (const char* name : {"report.csv", "summary.csv", "report.md"}) manifest.output(dir / name);
    manifest.write(dir);
}

void add_data_options(CLI::App* sub, Options& o) {
    sub->add_option("--data", o.data, "panel CSV (year,age,<bottom attributes>,deaths,exposure)");
    sub->add_option("--config", o.config, "grouping configuration");
    sub->add_option("--out-dir", o.out_dir, "output directory");
    sub->add_option("--threads", o.threads, "worker threads; never changes results");
    sub->add_option("--lambda", o.lambda, "smoothing penalty, or 'auto' for cross-validation");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"Grouped functional time series forecasting of age-specific mortality", "gfts"};
    app.require_subcommand(1, 1);
    app.set_version_flag("--version", kToolVersion);

    auto* sim = app.add_subcommand("simulate", "generate a synthetic grouped mortality panel");
    sim->add_option("--seed", o.seed);
    sim->add_option("--out-dir", o.out_dir);
    sim->add_option("--years", o.years, "number of years");
    sim->add_option("--preset", o.preset, "'default' (2 regions x 2 prefectures) or 'large' (47 prefectures)");
    sim->add_flag("--no-noise", o.no_noise, "deaths equal their expected counts");

    auto* smooth = app.add_subcommand("smooth", "smooth every series, year by year");
    add_data_options(smooth, o);

    auto* fpca = app.add_subcommand("fpca", "functional principal components of every smoothed series");
    add_data_options(fpca, o);
    fpca->add_option("--delta", o.delta, "share of variance the retained components must reach");

    auto* forecast = app.add_subcommand("forecast", "point forecasts of every series");
    auto* reconcile = app.add_subcommand("reconcile", "reconcile base forecasts from a CSV");
    auto* intervals = app.add_subcommand("intervals", "bootstrap prediction intervals");
    auto* evaluate = app.add_subcommand("evaluate", "expanding-window backtest");
    for (auto* sub : {forecast, reconcile, intervals, evaluate}) {
        add_data_options(sub, o);
        sub->add_option("--delta", o.delta);
        sub->add_option("--h-max", o.h_max, "largest forecast horizon");
        sub->add_option("--method", o.methods, "independent, bottom_up, optimal_combination or fmedian");
        sub->add_option("--weighting", o.weighting, "'wls' (default) or 'ols'");
    }
    reconcile->add_option("--forecasts", o.forecasts, "base forecasts CSV written by `forecast`");
    reconcile->add_option("--variances", o.variances, "one-step MSE CSV written by `forecast`");
    for (auto* sub : {intervals, evaluate}) {
        sub->add_option("--seed", o.seed);
        sub->add_option("--alpha", o.alpha, "nominal non-coverage, 0.2 gives 80% intervals");
        sub->add_option("--kind", o.kind, "'pointwise' or 'uniform'");
        sub->add_option("--replicates", o.replicates, "bootstrap replicates");
    }
    evaluate->add_flag("--no-intervals", o.no_intervals, "skip interval scores");
    evaluate->add_option("--train-years", o.train_years, "years in the first training window (default: all but h-max)");
    evaluate->add_option("--median", o.median, "'ranked' or 'horizon'");
    evaluate->add_option("--score-scale", o.score_scale, "'smoothed' or 'raw'");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << kToolVersion << '\n';
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n';
        const auto parsed = app.get_subcommands();
        err << (parsed.empty() ? app.help() : parsed.front()->help());
        return kExitUsage;
    }

    try {
        check_common(o);
        if (sim->parsed()) cmd_simulate(o);
        else if (smooth->parsed()) cmd_smooth(o, err);
        else if (fpca->parsed()) cmd_fpca(o);
        else if (forecast->parsed()) cmd_forecast(o);
        else if (reconcile->parsed()) cmd_reconcile(o);
        else if (intervals->parsed()) cmd_intervals(o, err);
        else if (evaluate->parsed()) cmd_evaluate(o, err);
        return kExitOk;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return e.category() == ErrorCategory::Numerical ? kExitNumerical : kExitValidation;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitValidation;
    }
}

}  // namespace gfts
