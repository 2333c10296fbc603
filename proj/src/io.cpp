#include "jmsched/io.hpp"

#include "jmsched/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <unordered_map>

namespace jms {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

bool parse_number(const std::string& text, double& out) {
    const std::string t = trim(text);
    if (t.empty()) return false;
    const char* first = t.data();
    if (*first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), out);
    return ec == std::errc() && ptr == t.data() + t.size();
}

bool parse_integer(const std::string& text, long long& out) {
    const std::string t = trim(text);
    if (t.empty()) return false;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
    return ec == std::errc() && ptr == t.data() + t.size();
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    if (trim(s).empty()) return out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) out.push_back(trim(item));
    return out;
}

// ---- CSV reading

struct CsvRow {
    std::vector<std::string> fields;
    long line = 0;
};

class CsvReader {
public:
    CsvReader(std::istream& in, std::string name, bool skip_comments = false)
        : in_(in), name_(std::move(name)), skip_comments_(skip_comments) {}

    const std::string& name() const { return name_; }

    /// False at end of input. Blank lines are skipped.
    bool next(CsvRow& row) {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_;
            if (line_ == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (trim(line).empty()) continue;
            if (skip_comments_ && line[0] == '#') {
                comments_.push_back(line);
                continue;
            }
            row.line = line_;
            row.fields = split(line);
            return true;
        }
        return false;
    }

    [[noreturn]] void fail(long line, std::size_t column, const std::string& what) const {
        throw ParseError(name_ + ":" + std::to_string(line) + ":" + std::to_string(column + 1) + ": " + what);
    }

    [[noreturn]] void fail(long line, const std::string& what) const {
        throw ParseError(name_ + ":" + std::to_string(line) + ": " + what);
    }

    double number(const CsvRow& row, std::size_t column, const std::string& label) const {
        double v = 0.0;
        if (!parse_number(row.fields[column], v) || !std::isfinite(v))
            fail(row.line, column, label + ": expected a finite number, got '" + row.fields[column] + "'");
        return v;
    }

    long long integer(const CsvRow& row, std::size_t column, const std::string& label) const {
        long long v = 0;
        if (!parse_integer(row.fields[column], v))
            fail(row.line, column, label + ": expected an integer, got '" + row.fields[column] + "'");
        return v;
    }

    void expect_width(const CsvRow& row, std::size_t width) const {
        if (row.fields.size() < width)
            fail(row.line, row.fields.size(), "missing field (expected " + std::to_string(width) + " columns)");
        if (row.fields.size() > width)
            fail(row.line, width, "unexpected extra field (expected " + std::to_string(width) + " columns)");
    }

    const std::vector<std::string>& comments() const { return comments_; }

private:
    std::vector<std::string> split(const std::string& line) const {
        std::vector<std::string> out;
        std::string cur;
        bool quoted = false, was_quoted = false;
        for (std::size_t k = 0; k < line.size(); ++k) {
            const char c = line[k];
            if (quoted) {
                if (c == '"') {
                    if (k + 1 < line.size() && line[k + 1] == '"') {
                        cur += '"';
                        ++k;
                    } else {
                        quoted = false;
                    }
                } else {
                    cur += c;
                }
            } else if (c == '"' && trim(cur).empty()) {
                quoted = was_quoted = true;
                cur.clear();
            } else if (c == ',') {
                out.push_back(was_quoted ? cur : trim(cur));
                cur.clear();
                was_quoted = false;
            } else {
                cur += c;
            }
        }
        if (quoted) fail(line_, out.size(), "unterminated quoted field");
        out.push_back(was_quoted ? cur : trim(cur));
        return out;
    }

    std::istream& in_;
    std::string name_;
    bool skip_comments_;
    long line_ = 0;
    std::vector<std::string> comments_;
};

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos && trim(s) == s) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

void expect_header(const CsvReader& r, const CsvRow& row, const std::vector<std::string>& fixed) {
    for (std::size_t k = 0; k < fixed.size(); ++k) {
        if (k >= row.fields.size()) r.fail(row.line, k, "header is missing column '" + fixed[k] + "'");
        if (row.fields[k] != fixed[k])
            r.fail(row.line, k, "expected header column '" + fixed[k] + "', found '" + row.fields[k] + "'");
    }
    for (std::size_t k = fixed.size(); k < row.fields.size(); ++k) {
        if (row.fields[k].empty()) r.fail(row.line, k, "empty covariate name in header");
        for (std::size_t j = 0; j < k; ++j)
            if (row.fields[j] == row.fields[k]) r.fail(row.line, k, "duplicate column '" + row.fields[k] + "'");
    }
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    return in;
}

void check_stream(const std::ostream& out, const std::string& what) {
    if (!out) throw IoError("write failed: " + what);
}

const char* kPlanHeader = "t,t_up_minus_t,u,EKL,EKL_lo,EKL_hi,pi,selected";

}  // namespace

// ---------------------------------------------------------------------------
// Config

Config Config::parse(std::istream& in, const std::string& source) {
    Config c;
    std::string line;
    long n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw ParseError(source + ":" + std::to_string(n) + ": expected key=value");
        const std::string key = trim(t.substr(0, eq));
        if (key.empty()) throw ParseError(source + ":" + std::to_string(n) + ": empty key");
        c.values_[key] = trim(t.substr(eq + 1));
        c.origin_[key] = source + ":" + std::to_string(n);
    }
    return c;
}

Config Config::parse_text(const std::string& text, const std::string& source) {
    std::istringstream in(text);
    return parse(in, source);
}

Config Config::load(const std::string& path) {
    auto in = open_in(path);
    return parse(in, path);
}

void Config::set(const std::string& key, const std::string& value) {
    values_[key] = value;
    origin_[key] = "set";
}

void Config::apply_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || trim(assignment.substr(0, eq)).empty())
        throw ConfigError("override '" + assignment + "' is not of the form key=value");
    const std::string key = trim(assignment.substr(0, eq));
    values_[key] = trim(assignment.substr(eq + 1));
    origin_[key] = "command line";
}

bool Config::has(const std::string& key) const { return values_.count(key) > 0; }

void Config::erase(const std::string& key) {
    values_.erase(key);
    origin_.erase(key);
}

const std::string* Config::find(const std::string& key) const {
    read_.insert(key);
    const auto it = values_.find(key);
    return it == values_.end() ? nullptr : &it->second;
}

std::string Config::where(const std::string& key) const {
    const auto it = origin_.find(key);
    return "'" + key + "'" + (it == origin_.end() ? std::string() : " (" + it->second + ")");
}

std::string Config::get(const std::string& key, const std::string& fallback) const {
    const auto* v = find(key);
    return v ? *v : fallback;
}

std::string Config::require(const std::string& key) const {
    const auto* v = find(key);
    if (!v || v->empty()) throw ConfigError("missing required setting '" + key + "'");
    return *v;
}

double Config::get_double(const std::string& key, double fallback) const {
    const auto* v = find(key);
    if (!v) return fallback;
    double out = 0.0;
    if (!parse_number(*v, out)) throw ConfigError(where(key) + ": expected a number, got '" + *v + "'");
    return out;
}

int Config::get_int(const std::string& key, int fallback) const {
    const auto* v = find(key);
    if (!v) return fallback;
    long long out = 0;
    if (!parse_integer(*v, out) || out < std::numeric_limits<int>::min() || out > std::numeric_limits<int>::max())
        throw ConfigError(where(key) + ": expected an integer, got '" + *v + "'");
    return static_cast<int>(out);
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    const auto* v = find(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    throw ConfigError(where(key) + ": expected true or false, got '" + *v + "'");
}

std::vector<double> Config::get_doubles(const std::string& key) const {
    const auto* v = find(key);
    std::vector<double> out;
    if (!v) return out;
    for (const auto& item : split_list(*v)) {
        double x = 0.0;
        if (!parse_number(item, x)) throw ConfigError(where(key) + ": expected numbers, got '" + item + "'");
        out.push_back(x);
    }
    return out;
}

std::vector<std::string> Config::get_strings(const std::string& key) const {
    const auto* v = find(key);
    return v ? split_list(*v) : std::vector<std::string>{};
}

std::uint64_t Config::require_seed(const std::string& key) const {
    const auto* v = find(key);
    if (!v) throw ConfigError("'" + key + "' is required for randomized commands (no default seed)");
    const std::string t = trim(*v);
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
        throw ConfigError(where(key) + ": expected a nonnegative integer seed, got '" + *v + "'");
    return out;
}

std::vector<std::string> Config::unread() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_)
        if (!read_.count(k)) out.push_back(k);
    return out;
}

std::string Config::to_text() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
    return out;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string join_doubles(const std::vector<double>& v) {
    std::string out;
    for (std::size_t k = 0; k < v.size(); ++k) out += (k ? "," : "") + format_double(v[k]);
    return out;
}

// ---------------------------------------------------------------------------
// Typed sections

ModelSpec model_spec_from(const Config& c, const std::string& p) {
    ModelSpec s;
    s.family = family_from_string(c.get(p + "family", to_string(s.family)));
    s.association = association_from_string(c.get(p + "association", to_string(s.association)));
    const std::string time = c.get(p + "time_basis", "polynomial");
    if (time == "polynomial") {
        s.natural_spline_time = false;
    } else if (time == "natural_spline") {
        s.natural_spline_time = true;
    } else {
        throw ConfigError("unknown " + p + "time_basis '" + time + "' (valid: polynomial, natural_spline)");
    }
    s.time_degree = c.get_int(p + "time_degree", s.time_degree);
    s.time_num_knots = c.get_int(p + "time_num_knots", s.time_num_knots);
    s.time_knots = c.get_doubles(p + "time_knots");
    s.time_lower = c.get_double(p + "time_lower", s.time_lower);
    s.time_upper = c.get_double(p + "time_upper", s.time_upper);
    s.random_time_terms = c.get_int(p + "random_time_terms", s.random_time_terms);
    s.long_covariates = c.get_strings(p + "long_covariates");
    s.surv_covariates = c.get_strings(p + "surv_covariates");
    s.baseline_basis = c.get_int(p + "baseline_basis", s.baseline_basis);
    s.baseline_degree = c.get_int(p + "baseline_degree", s.baseline_degree);
    s.baseline_knots = c.get_doubles(p + "baseline_knots");
    s.baseline_upper = c.get_double(p + "baseline_upper", s.baseline_upper);
    s.penalty_order = c.get_int(p + "penalty_order", s.penalty_order);
    if (s.time_degree < 1) throw ConfigError(p + "time_degree must be at least 1");
    if (s.time_num_knots < 0) throw ConfigError(p + "time_num_knots must be nonnegative");
    if (s.baseline_degree < 0) throw ConfigError(p + "baseline_degree must be nonnegative");
    if (s.baseline_basis < s.baseline_degree + 1) throw ConfigError(p + "baseline_basis must exceed baseline_degree");
    return s;
}

void write_model_spec(Config& c, const ModelSpec& s, const std::string& p) {
    auto join = [](const std::vector<std::string>& v) {
        std::string out;
        for (std::size_t k = 0; k < v.size(); ++k) out += (k ? "," : "") + v[k];
        return out;
    };
    c.set(p + "family", to_string(s.family));
    c.set(p + "association", to_string(s.association));
    c.set(p + "time_basis", s.natural_spline_time ? "natural_spline" : "polynomial");
    c.set(p + "time_degree", std::to_string(s.time_degree));
    c.set(p + "time_num_knots", std::to_string(s.time_num_knots));
    c.set(p + "time_knots", join_doubles(s.time_knots));
    c.set(p + "time_lower", format_double(s.time_lower));
    c.set(p + "time_upper", format_double(s.time_upper));
    c.set(p + "random_time_terms", std::to_string(s.random_time_terms));
    c.set(p + "long_covariates", join(s.long_covariates));
    c.set(p + "surv_covariates", join(s.surv_covariates));
    c.set(p + "baseline_basis", std::to_string(s.baseline_basis));
    c.set(p + "baseline_degree", std::to_string(s.baseline_degree));
    c.set(p + "baseline_knots", join_doubles(s.baseline_knots));
    c.set(p + "baseline_upper", format_double(s.baseline_upper));
    c.set(p + "penalty_order", std::to_string(s.penalty_order));
}

PriorSet priors_from(const Config& c, const std::string& p) {
    PriorSet s;
    s.beta_variance = c.get_double(p + "beta_variance", s.beta_variance);
    s.gamma_variance = c.get_double(p + "gamma_variance", s.gamma_variance);
    s.alpha_variance = c.get_double(p + "alpha_variance", s.alpha_variance);
    s.sigma2_shape = c.get_double(p + "sigma2_shape", s.sigma2_shape);
    s.sigma2_scale = c.get_double(p + "sigma2_scale", s.sigma2_scale);
    s.D_extra_df = c.get_double(p + "D_extra_df", s.D_extra_df);
    const auto scale = c.get_doubles(p + "D_scale");
    if (!scale.empty()) {
        const auto q = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(scale.size()))));
        if (q * q != static_cast<Eigen::Index>(scale.size()))
            throw ConfigError(p + "D_scale must list a square matrix row by row");
        s.D_scale = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            scale.data(), q, q);
    }
    s.tau_h_shape = c.get_double(p + "tau_h_shape", s.tau_h_shape);
    s.tau_h_delta_shape = c.get_double(p + "tau_h_delta_shape", s.tau_h_delta_shape);
    s.tau_h_delta_rate = c.get_double(p + "tau_h_delta_rate", s.tau_h_delta_rate);
    s.gamma_h0_variance = c.get_double(p + "gamma_h0_variance", s.gamma_h0_variance);
    s.validate();
    return s;
}

void write_priors(Config& c, const PriorSet& s, const std::string& p) {
    c.set(p + "beta_variance", format_double(s.beta_variance));
    c.set(p + "gamma_variance", format_double(s.gamma_variance));
    c.set(p + "alpha_variance", format_double(s.alpha_variance));
    c.set(p + "sigma2_shape", format_double(s.sigma2_shape));
    c.set(p + "sigma2_scale", format_double(s.sigma2_scale));
    c.set(p + "D_extra_df", format_double(s.D_extra_df));
    if (s.D_scale.size() > 0) {
        std::vector<double> v;
        for (Eigen::Index i = 0; i < s.D_scale.rows(); ++i)
            for (Eigen::Index j = 0; j < s.D_scale.cols(); ++j) v.push_back(s.D_scale(i, j));
        c.set(p + "D_scale", join_doubles(v));
    }
    c.set(p + "tau_h_shape", format_double(s.tau_h_shape));
    c.set(p + "tau_h_delta_shape", format_double(s.tau_h_delta_shape));
    c.set(p + "tau_h_delta_rate", format_double(s.tau_h_delta_rate));
    c.set(p + "gamma_h0_variance", format_double(s.gamma_h0_variance));
}

McmcConfig mcmc_config_from(const Config& c, const std::string& p) {
    McmcConfig m;
    m.chains = c.get_int(p + "chains", m.chains);
    m.iterations = c.get_int(p + "iterations", m.iterations);
    m.burn_in = c.get_int(p + "burn_in", m.burn_in);
    m.thin = c.get_int(p + "thin", m.thin);
    m.adapt_window = c.get_int(p + "adapt_window", m.adapt_window);
    m.include_survival = c.get_bool(p + "include_survival", m.include_survival);
    if (c.has(p + "fixed_tau_h")) m.fixed_tau_h = c.get_double(p + "fixed_tau_h", 1.0);
    m.seed = c.require_seed();
    m.validate();
    return m;
}

ScheduleConfig schedule_config_from(const Config& c, const std::string& p) {
    ScheduleConfig s;
    s.kappa = c.get_double(p + "kappa", s.kappa);
    s.t_max = c.get_double(p + "t_max", s.t_max);
    s.grid_size = c.get_int(p + "grid_size", s.grid_size);
    s.outer = c.get_int(p + "outer", s.outer);
    s.inner = c.get_int(p + "inner", s.inner);
    s.pi_draws = c.get_int(p + "pi_draws", s.pi_draws);
    s.chains.warmup = c.get_int(p + "warmup", s.chains.warmup);
    s.chains.inner_warmup = c.get_int(p + "inner_warmup", s.chains.inner_warmup);
    s.chains.steps_per_draw = c.get_int(p + "steps_per_draw", s.chains.steps_per_draw);
    s.seed = c.require_seed();
    s.validate();
    return s;
}

CvDclConfig cv_dcl_config_from(const Config& c, const std::string& p) {
    CvDclConfig s;
    s.re_draws = c.get_int(p + "re_draws", s.re_draws);
    s.max_draws = c.get_int(p + "max_draws", s.max_draws);
    s.reuse_fit_draws = c.get_bool(p + "reuse_fit_draws", s.reuse_fit_draws);
    s.chains.warmup = c.get_int(p + "warmup", s.chains.warmup);
    s.chains.steps_per_draw = c.get_int(p + "steps_per_draw", s.chains.steps_per_draw);
    s.seed = c.require_seed();
    if (s.re_draws < 1) throw ConfigError(p + "re_draws must be at least 1");
    if (s.max_draws < 0) throw ConfigError(p + "max_draws must be nonnegative");
    return s;
}

Parameters truth_from(const Config& c, const JointModel& model, const std::string& p) {
    auto vec = [&](const std::string& key, int size, const Eigen::VectorXd& fallback) {
        const auto v = c.get_doubles(p + key);
        if (v.empty()) return fallback;
        if (static_cast<int>(v.size()) != size)
            throw ConfigError(p + key + " needs " + std::to_string(size) + " values, got " +
                              std::to_string(v.size()));
        return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), size));
    };
    const int q = model.num_random();
    Parameters t;
    t.beta = vec("beta", model.num_fixed(), Eigen::VectorXd::Zero(model.num_fixed()));
    t.sigma2 = c.get_double(p + "sigma2", 1.0);
    t.D = Eigen::MatrixXd::Identity(q, q);
    const auto d = c.get_doubles(p + "D");
    if (!d.empty()) {
        if (static_cast<int>(d.size()) != q * q)
            throw ConfigError(p + "D needs " + std::to_string(q * q) + " values (row by row)");
        t.D = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(d.data(), q, q);
    }
    t.gamma = vec("gamma", model.num_gamma(), Eigen::VectorXd::Zero(model.num_gamma()));
    t.alpha = vec("alpha", model.num_alpha(), Eigen::VectorXd::Zero(model.num_alpha()));
    const double level = c.get_double(p + "log_baseline", -3.0);
    t.gamma_h0 = vec("gamma_h0", model.num_baseline(), Eigen::VectorXd::Constant(model.num_baseline(), level));
    t.tau_h = c.get_double(p + "tau_h", 1.0);
    t.tau_h_delta = c.get_double(p + "tau_h_delta", 1.0);
    if (model.longitudinal.family.family != Family::gaussian) t.sigma2 = 1.0;
    t.validate(model);
    return t;
}

SimulationDesign simulation_design_from(const Config& c) {
    SimulationDesign d;
    d.n_subjects = c.get_int("sim.n_subjects", d.n_subjects);
    const auto visits = c.get_doubles("sim.visits");
    if (c.has("sim.visits")) d.visits = visits;
    d.jitter = c.get_double("sim.jitter", d.jitter);
    const std::string admin = c.get("sim.admin_censoring", "");
    if (admin == "none" || admin == "inf") {
        d.admin_censoring = std::numeric_limits<double>::infinity();
    } else if (!admin.empty()) {
        d.admin_censoring = c.get_double("sim.admin_censoring", 0.0);
    }
    d.censoring_rate = c.get_double("sim.censoring_rate", d.censoring_rate);
    for (const auto& spec : c.get_strings("sim.covariates")) {
        // name:kind[:a[:b]]
        std::vector<std::string> parts;
        std::string item;
        std::istringstream in(spec);
        while (std::getline(in, item, ':')) parts.push_back(trim(item));
        if (parts.size() < 2 || parts.size() > 4)
            throw ConfigError("sim.covariates entry '" + spec + "' is not name:kind[:a[:b]]");
        CovariateGenerator g;
        g.name = parts[0];
        if (parts[1] == "bernoulli") {
            g.kind = CovariateGenerator::Kind::bernoulli;
        } else if (parts[1] == "normal") {
            g.kind = CovariateGenerator::Kind::normal;
            g.a = 0.0;
        } else if (parts[1] == "uniform") {
            g.kind = CovariateGenerator::Kind::uniform;
            g.a = 0.0;
        } else {
            throw ConfigError("unknown covariate kind '" + parts[1] + "' (valid: bernoulli, normal, uniform)");
        }
        double v = 0.0;
        if (parts.size() > 2) {
            if (!parse_number(parts[2], v)) throw ConfigError("bad number in sim.covariates entry '" + spec + "'");
            g.a = v;
        }
        if (parts.size() > 3) {
            if (!parse_number(parts[3], v)) throw ConfigError("bad number in sim.covariates entry '" + spec + "'");
            g.b = v;
        }
        d.covariates.push_back(g);
    }
    d.seed = c.require_seed();
    const double horizon = std::isfinite(d.admin_time()) ? d.admin_time()
                                                          : (d.visits.empty() ? 1.0 : d.visits.back());
    d.model = design_model(model_spec_from(c), horizon);
    d.theta = truth_from(c, d.model);
    d.validate();
    return d;
}

// ---------------------------------------------------------------------------
// Datasets

Dataset parse_dataset(std::istream& longitudinal, const std::string& longitudinal_name, std::istream& survival,
                      const std::string& survival_name) {
    Dataset data;
    std::unordered_map<std::string, std::size_t> index;

    CsvReader sr(survival, survival_name);
    CsvRow row;
    if (!sr.next(row)) throw ParseError(survival_name + ": empty file (expected a header)");
    expect_header(sr, row, {"subject_id", "event_time", "event_indicator"});
    const std::vector<std::string> surv_header = row.fields;
    data.survival_covariates.assign(surv_header.begin() + 3, surv_header.end());
    while (sr.next(row)) {
        sr.expect_width(row, surv_header.size());
        Subject s;
        s.id = row.fields[0];
        if (s.id.empty()) sr.fail(row.line, 0, "empty subject_id");
        if (index.count(s.id)) sr.fail(row.line, 0, "duplicate subject_id '" + s.id + "'");
        s.event_time = sr.number(row, 1, "event_time");
        if (!(s.event_time > 0.0)) sr.fail(row.line, 1, "event_time must be positive");
        const double ev = sr.number(row, 2, "event_indicator");
        if (ev != 0.0 && ev != 1.0) sr.fail(row.line, 2, "event_indicator must be 0 or 1, got '" + row.fields[2] + "'");
        s.event = static_cast<int>(ev);
        for (std::size_t k = 3; k < surv_header.size(); ++k) s.covariates[surv_header[k]] = sr.number(row, k, surv_header[k]);
        index[s.id] = data.subjects.size();
        data.subjects.push_back(std::move(s));
    }

    CsvReader lr(longitudinal, longitudinal_name);
    if (!lr.next(row)) return data;  // an empty longitudinal file is valid
    expect_header(lr, row, {"subject_id", "time", "value"});
    const std::vector<std::string> long_header = row.fields;
    data.longitudinal_covariates.assign(long_header.begin() + 3, long_header.end());
    while (lr.next(row)) {
        lr.expect_width(row, long_header.size());
        const auto it = index.find(row.fields[0]);
        if (it == index.end()) lr.fail(row.line, 0, "subject '" + row.fields[0] + "' is missing from the survival table");
        Subject& s = data.subjects[it->second];
        const double t = lr.number(row, 1, "time");
        const double y = lr.number(row, 2, "value");
        if (t < 0.0) lr.fail(row.line, 1, "measurement time must be nonnegative");
        if (t > s.event_time)
            lr.fail(row.line, 1, "measurement at time " + row.fields[1] + " is after the event/censoring time " +
                                     format_double(s.event_time) + " of subject '" + s.id + "'");
        if (!s.times.empty() && t < s.times.back())
            lr.fail(row.line, 1, "measurement times of subject '" + s.id + "' are not ascending");
        for (std::size_t k = 3; k < long_header.size(); ++k) {
            const std::string& name = long_header[k];
            const double v = lr.number(row, k, name);
            const auto c = s.covariates.find(name);
            if (c != s.covariates.end() && c->second != v)
                lr.fail(row.line, k, "covariate '" + name + "' of subject '" + s.id + "' is not constant");
            s.covariates[name] = v;
        }
        s.times.push_back(t);
        s.values.push_back(y);
    }
    for (const auto& s : data.subjects) s.validate();
    return data;
}

Dataset read_dataset(const std::string& longitudinal_path, const std::string& survival_path) {
    auto l = open_in(longitudinal_path);
    auto s = open_in(survival_path);
    return parse_dataset(l, longitudinal_path, s, survival_path);
}

void write_dataset(const Dataset& data, std::ostream& longitudinal, std::ostream& survival) {
    auto value = [](const Subject& s, const std::string& name) {
        const auto it = s.covariates.find(name);
        if (it == s.covariates.end()) throw DataError("subject '" + s.id + "' has no value for covariate '" + name + "'");
        return format_double(it->second);
    };
    longitudinal << "subject_id,time,value";
    for (const auto& c : data.longitudinal_covariates) longitudinal << ',' << csv_field(c);
    longitudinal << '\n';
    survival << "subject_id,event_time,event_indicator";
    for (const auto& c : data.survival_covariates) survival << ',' << csv_field(c);
    survival << '\n';
    for (const auto& s : data.subjects) {
        const std::string id = csv_field(s.id);
        for (std::size_t k = 0; k < s.times.size(); ++k) {
            longitudinal << id << ',' << format_double(s.times[k]) << ',' << format_double(s.values[k]);
            for (const auto& c : data.longitudinal_covariates) longitudinal << ',' << value(s, c);
            longitudinal << '\n';
        }
        survival << id << ',' << format_double(s.event_time) << ',' << s.event;
        for (const auto& c : data.survival_covariates) survival << ',' << value(s, c);
        survival << '\n';
    }
    check_stream(longitudinal, "longitudinal table");
    check_stream(survival, "survival table");
}

void write_dataset(const Dataset& data, const std::string& longitudinal_path, const std::string& survival_path) {
    std::ostringstream l, s;
    write_dataset(data, l, s);
    write_file(longitudinal_path, l.str());
    write_file(survival_path, s.str());
}

// ---------------------------------------------------------------------------
// Draws and manifests

void write_draws(std::ostream& out, const PosteriorSamples& samples) {
    out << "chain,iteration";
    for (const auto& n : parameter_names(samples.model)) out << ',' << csv_field(n);
    out << '\n';
    for (std::size_t g = 0; g < samples.size(); ++g) {
        out << (g < samples.chain.size() ? samples.chain[g] : 0) << ','
            << (g < samples.iteration.size() ? samples.iteration[g] : static_cast<int>(g));
        const Eigen::VectorXd v = flatten(samples.draws[g], samples.model);
        for (Eigen::Index k = 0; k < v.size(); ++k) out << ',' << format_double(v(k));
        out << '\n';
    }
    check_stream(out, "draws");
}

void read_draws(std::istream& in, const std::string& name, PosteriorSamples& samples) {
    const auto names = parameter_names(samples.model);
    CsvReader r(in, name);
    CsvRow row;
    if (!r.next(row)) throw ParseError(name + ": empty file (expected a header)");
    std::vector<std::string> expected{"chain", "iteration"};
    expected.insert(expected.end(), names.begin(), names.end());
    expect_header(r, row, expected);
    if (row.fields.size() != expected.size())
        r.fail(row.line, expected.size(), "unexpected extra column '" + row.fields[expected.size()] + "'");
    samples.draws.clear();
    samples.chain.clear();
    samples.iteration.clear();
    Eigen::VectorXd v(static_cast<Eigen::Index>(names.size()));
    while (r.next(row)) {
        r.expect_width(row, expected.size());
        const long long chain = r.integer(row, 0, "chain");
        const long long it = r.integer(row, 1, "iteration");
        for (std::size_t k = 0; k < names.size(); ++k) v(static_cast<Eigen::Index>(k)) = r.number(row, k + 2, names[k]);
        Parameters theta = unflatten(v, samples.model);
        try {
            theta.validate(samples.model);
        } catch (const Error& e) {
            r.fail(row.line, std::string("invalid draw: ") + e.what());
        }
        samples.draws.push_back(std::move(theta));
        samples.chain.push_back(static_cast<int>(chain));
        samples.iteration.push_back(static_cast<int>(it));
    }
    if (samples.draws.empty()) throw ParseError(name + ": no draws");
}

namespace {

std::vector<std::pair<std::string, double>> truth_entries(const Parameters& t, const JointModel& model) {
    std::vector<std::pair<std::string, double>> out;
    auto idx = [](const std::string& base, Eigen::Index k) { return base + "[" + std::to_string(k) + "]"; };
    for (Eigen::Index k = 0; k < t.beta.size(); ++k) out.emplace_back(idx("beta", k), t.beta(k));
    out.emplace_back("sigma2", t.sigma2);
    for (Eigen::Index i = 0; i < t.D.rows(); ++i)
        for (Eigen::Index j = 0; j <= i; ++j)
            out.emplace_back("D[" + std::to_string(i) + "," + std::to_string(j) + "]", t.D(i, j));
    for (Eigen::Index k = 0; k < t.gamma.size(); ++k) out.emplace_back(idx("gamma", k), t.gamma(k));
    for (Eigen::Index k = 0; k < t.alpha.size(); ++k) out.emplace_back(idx("alpha", k), t.alpha(k));
    for (Eigen::Index k = 0; k < t.gamma_h0.size(); ++k) out.emplace_back(idx("gamma_h0", k), t.gamma_h0(k));
    out.emplace_back("tau_h", t.tau_h);
    out.emplace_back("tau_h_delta", t.tau_h_delta);
    (void)model;
    return out;
}

}  // namespace

void write_truth(std::ostream& out, const Parameters& theta, const JointModel& model) {
    theta.validate(model);
    for (const auto& [k, v] : truth_entries(theta, model)) out << k << '=' << format_double(v) << '\n';
    check_stream(out, "truth manifest");
}

Parameters read_truth(std::istream& in, const std::string& name, const JointModel& model) {
    std::map<std::string, double> seen;
    std::string line;
    long n = 0;
    while (std::getline(in, line)) {
        ++n;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        const std::string here = name + ":" + std::to_string(n);
        if (eq == std::string::npos) throw ParseError(here + ": expected key=value");
        const std::string key = trim(t.substr(0, eq));
        double v = 0.0;
        if (!parse_number(t.substr(eq + 1), v)) throw ParseError(here + ": value of '" + key + "' is not a number");
        if (!seen.emplace(key, v).second) throw ParseError(here + ": '" + key + "' listed twice");
    }
    const int q = model.num_random();
    Parameters theta;
    theta.beta = Eigen::VectorXd::Zero(model.num_fixed());
    theta.D = Eigen::MatrixXd::Zero(q, q);
    theta.gamma = Eigen::VectorXd::Zero(model.num_gamma());
    theta.alpha = Eigen::VectorXd::Zero(model.num_alpha());
    theta.gamma_h0 = Eigen::VectorXd::Zero(model.num_baseline());
    auto entries = truth_entries(theta, model);
    std::size_t k = 0;
    auto take = [&](double& slot) {
        const auto& key = entries[k++].first;
        const auto it = seen.find(key);
        if (it == seen.end()) throw ParseError(name + ": missing '" + key + "'");
        slot = it->second;
        seen.erase(it);
    };
    for (Eigen::Index j = 0; j < theta.beta.size(); ++j) take(theta.beta(j));
    take(theta.sigma2);
    for (Eigen::Index i = 0; i < q; ++i)
        for (Eigen::Index j = 0; j <= i; ++j) {
            take(theta.D(i, j));
            theta.D(j, i) = theta.D(i, j);
        }
    for (Eigen::Index j = 0; j < theta.gamma.size(); ++j) take(theta.gamma(j));
    for (Eigen::Index j = 0; j < theta.alpha.size(); ++j) take(theta.alpha(j));
    for (Eigen::Index j = 0; j < theta.gamma_h0.size(); ++j) take(theta.gamma_h0(j));
    take(theta.tau_h);
    take(theta.tau_h_delta);
    if (!seen.empty()) throw ParseError(name + ": unknown key '" + seen.begin()->first + "'");
    theta.validate(model);
    return theta;
}

void write_diagnostics(std::ostream& out, const Diagnostics& d) {
    out << "converged=" << (d.converged ? "true" : "false") << '\n';
    out << "parameter,rhat,ess\n";
    for (std::size_t k = 0; k < d.names.size(); ++k)
        out << csv_field(d.names[k]) << ',' << format_double(d.rhat[k]) << ',' << format_double(d.ess[k]) << '\n';
    out << "block,acceptance\n";
    for (const auto& [k, v] : d.acceptance) out << k << ',' << format_double(v) << '\n';
    for (const auto& f : d.flags) out << "flag: " << f << '\n';
    check_stream(out, "diagnostics");
}

// ---------------------------------------------------------------------------
// Plans, curves, scores

void write_plan(std::ostream& out, const SchedulePlan& plan) {
    out << "# t=" << format_double(plan.t) << '\n';
    out << "# t_up=" << format_double(plan.t_up) << '\n';
    for (const auto& f : plan.flags) out << "# flag=" << f << '\n';
    out << kPlanHeader << '\n';
    for (std::size_t k = 0; k < plan.grid.size(); ++k) {
        const auto& e = plan.ekl[k];
        out << format_double(plan.t) << ',' << format_double(plan.t_up - plan.t) << ',' << format_double(plan.grid[k])
            << ',' << format_double(e.estimate) << ',' << format_double(e.lower) << ',' << format_double(e.upper)
            << ',' << format_double(plan.pi[k]) << ',' << (plan.selected && *plan.selected == k ? 1 : 0) << '\n';
    }
    check_stream(out, "plan");
}

SchedulePlan read_plan(std::istream& in, const std::string& name) {
    CsvReader r(in, name, true);
    CsvRow row;
    if (!r.next(row)) throw ParseError(name + ": missing header");
    std::vector<std::string> header;
    {
        std::istringstream h(kPlanHeader);
        std::string f;
        while (std::getline(h, f, ',')) header.push_back(f);
    }
    expect_header(r, row, header);
    SchedulePlan plan;
    bool have_t = false, have_up = false;
    auto meta = [&](const std::string& line) {
        const std::string body = trim(line.substr(1));
        const auto eq = body.find('=');
        if (eq == std::string::npos) return;
        const std::string key = body.substr(0, eq), val = body.substr(eq + 1);
        if (key == "flag") {
            plan.flags.push_back(val);
        } else if (key == "t" && parse_number(val, plan.t)) {
            have_t = true;
        } else if (key == "t_up" && parse_number(val, plan.t_up)) {
            have_up = true;
        }
    };
    for (const auto& c : r.comments()) meta(c);
    std::size_t k = 0;
    while (r.next(row)) {
        r.expect_width(row, header.size());
        EklEstimate e;
        const double t = r.number(row, 0, "t");
        const double span = r.number(row, 1, "t_up_minus_t");
        plan.grid.push_back(r.number(row, 2, "u"));
        e.estimate = r.number(row, 3, "EKL");
        e.lower = r.number(row, 4, "EKL_lo");
        e.upper = r.number(row, 5, "EKL_hi");
        plan.ekl.push_back(e);
        plan.pi.push_back(r.number(row, 6, "pi"));
        const long long sel = r.integer(row, 7, "selected");
        if (sel != 0 && sel != 1) r.fail(row.line, 7, "selected must be 0 or 1");
        if (sel == 1) {
            if (plan.selected) r.fail(row.line, 7, "more than one selected row");
            plan.selected = k;
        }
        if (!have_t) plan.t = t;
        if (!have_up) plan.t_up = t + span;
        ++k;
    }
    return plan;
}

void write_curve(std::ostream& out, const std::vector<double>& u, const std::vector<double>& pi) {
    out << "u,pi\n";
    for (std::size_t k = 0; k < u.size(); ++k) out << format_double(u[k]) << ',' << format_double(pi[k]) << '\n';
    check_stream(out, "curve");
}

void read_curve(std::istream& in, const std::string& name, std::vector<double>& u, std::vector<double>& pi) {
    CsvReader r(in, name, true);
    CsvRow row;
    if (!r.next(row)) throw ParseError(name + ": missing header");
    expect_header(r, row, {"u", "pi"});
    u.clear();
    pi.clear();
    while (r.next(row)) {
        r.expect_width(row, 2);
        u.push_back(r.number(row, 0, "u"));
        pi.push_back(r.number(row, 1, "pi"));
    }
}

void write_score_table(std::ostream& out, const std::vector<double>& landmarks, const std::vector<int>& n_at_risk,
                       const std::vector<ScoreRow>& rows) {
    auto label = [](double t) {
        std::ostringstream s;
        s << t;
        return s.str();
    };
    out << "model,DIC";
    for (double t : landmarks) out << ",cvDCL[t=" << label(t) << ']';
    for (double t : landmarks) out << ",n_t[t=" << label(t) << ']';
    out << '\n';
    for (const auto& r : rows) {
        out << csv_field(r.model) << ',' << format_double(r.dic);
        for (double v : r.cv_dcl) out << ',' << format_double(v);
        for (int n : n_at_risk) out << ',' << n;
        out << '\n';
    }
    check_stream(out, "score table");
}

// ---------------------------------------------------------------------------
// Fit directories

namespace fs = std::filesystem;

void save_fit(const std::string& dir, const PosteriorSamples& samples, const FitSummary& summary,
              const McmcConfig& mcmc) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
    Config c;
    write_model_spec(c, describe_model(samples.model));
    write_priors(c, samples.priors);
    c.set("mcmc.chains", std::to_string(mcmc.chains));
    c.set("mcmc.iterations", std::to_string(mcmc.iterations));
    c.set("mcmc.burn_in", std::to_string(mcmc.burn_in));
    c.set("mcmc.thin", std::to_string(mcmc.thin));
    c.set("mcmc.adapt_window", std::to_string(mcmc.adapt_window));
    c.set("mcmc.include_survival", mcmc.include_survival ? "true" : "false");
    if (mcmc.fixed_tau_h) c.set("mcmc.fixed_tau_h", format_double(*mcmc.fixed_tau_h));
    c.set("seed", std::to_string(mcmc.seed));
    write_file((fs::path(dir) / "model.cfg").string(), c.to_text());

    std::ostringstream draws, diag, sum;
    write_draws(draws, samples);
    write_file((fs::path(dir) / "draws.csv").string(), draws.str());
    write_diagnostics(diag, samples.diagnostics);
    write_file((fs::path(dir) / "diagnostics.txt").string(), diag.str());
    sum << "dic=" << format_double(summary.dic.dic) << '\n'
        << "pD=" << format_double(summary.dic.p_d) << '\n'
        << "Dbar=" << format_double(summary.dic.d_bar) << '\n'
        << "Dhat=" << format_double(summary.dic.d_hat) << '\n'
        << "converged=" << (summary.converged ? "true" : "false") << '\n'
        << "draws=" << summary.draws << '\n';
    write_file((fs::path(dir) / "summary.txt").string(), sum.str());
}

PosteriorSamples load_fit(const std::string& dir) {
    const std::string cfg_path = (fs::path(dir) / "model.cfg").string();
    const Config c = Config::load(cfg_path);
    PosteriorSamples samples;
    samples.model = build_model(model_spec_from(c), Dataset{});
    samples.priors = priors_from(c);
    const std::string draws_path = (fs::path(dir) / "draws.csv").string();
    auto in = open_in(draws_path);
    read_draws(in, draws_path, samples);
    return samples;
}

FitSummary load_fit_summary(const std::string& dir) {
    const Config c = Config::load((fs::path(dir) / "summary.txt").string());
    FitSummary s;
    s.dic.dic = c.get_double("dic", std::numeric_limits<double>::quiet_NaN());
    s.dic.p_d = c.get_double("pD", std::numeric_limits<double>::quiet_NaN());
    s.dic.d_bar = c.get_double("Dbar", std::numeric_limits<double>::quiet_NaN());
    s.dic.d_hat = c.get_double("Dhat", std::numeric_limits<double>::quiet_NaN());
    s.converged = c.get_bool("converged", true);
    s.draws = static_cast<std::size_t>(c.get_int("draws", 0));
    return s;
}

std::string read_file(const std::string& path) {
    auto in = open_in(path);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_file(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + tmp + "' for writing");
        out << content;
        out.flush();
        if (!out) throw IoError("write failed for '" + tmp + "'");
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move '" + tmp + "' to '" + path + "': " + ec.message());
}

}  // namespace jms
