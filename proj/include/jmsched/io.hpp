#pragma once

#include "jmsched/dynpred.hpp"
#include "jmsched/mcmc.hpp"
#include "jmsched/simulate.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace jms {

/// Flat key=value settings. Keys carry section prefixes ("mcmc.iterations");
/// '#' starts a comment line. Later assignments of a key win.
class Config {
public:
    static Config parse(std::istream& in, const std::string& source);
    static Config parse_text(const std::string& text, const std::string& source = "<text>");
    static Config load(const std::string& path);

    void set(const std::string& key, const std::string& value);
    /// "key=value", as given on a command line.
    void apply_override(const std::string& assignment);
    bool has(const std::string& key) const;
    void erase(const std::string& key);

    std::string get(const std::string& key, const std::string& fallback) const;
    std::string require(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_doubles(const std::string& key) const;  // comma separated; empty when absent
    std::vector<std::string> get_strings(const std::string& key) const;
    /// Randomized commands have no default seed.
    std::uint64_t require_seed(const std::string& key = "seed") const;

    /// Keys never read through a getter.
    std::vector<std::string> unread() const;
    const std::map<std::string, std::string>& entries() const noexcept { return values_; }
    std::string to_text() const;

private:
    const std::string* find(const std::string& key) const;
    std::string where(const std::string& key) const;

    std::map<std::string, std::string> values_;
    std::map<std::string, std::string> origin_;
    mutable std::set<std::string> read_;
};

std::string format_double(double v);
std::string join_doubles(const std::vector<double>& v);

ModelSpec model_spec_from(const Config& c, const std::string& prefix = "model.");
void write_model_spec(Config& c, const ModelSpec& spec, const std::string& prefix = "model.");
PriorSet priors_from(const Config& c, const std::string& prefix = "prior.");
void write_priors(Config& c, const PriorSet& p, const std::string& prefix = "prior.");
McmcConfig mcmc_config_from(const Config& c, const std::string& prefix = "mcmc.");
ScheduleConfig schedule_config_from(const Config& c, const std::string& prefix = "schedule.");
CvDclConfig cv_dcl_config_from(const Config& c, const std::string& prefix = "score.");
/// Parameters from `truth.*` keys sized against `model`.
Parameters truth_from(const Config& c, const JointModel& model, const std::string& prefix = "truth.");
/// Everything under `sim.*`, `truth.*` and `model.*` plus the seed.
SimulationDesign simulation_design_from(const Config& c);

// ---------------------------------------------------------------------------
// CSV

/// Joins the two tables on subject_id. Errors name file, line and column.
Dataset parse_dataset(std::istream& longitudinal, const std::string& longitudinal_name, std::istream& survival,
                      const std::string& survival_name);
Dataset read_dataset(const std::string& longitudinal_path, const std::string& survival_path);
void write_dataset(const Dataset& data, std::ostream& longitudinal, std::ostream& survival);
void write_dataset(const Dataset& data, const std::string& longitudinal_path, const std::string& survival_path);

/// Header: chain,iteration, then parameter_names(model).
void write_draws(std::ostream& out, const PosteriorSamples& samples);
/// Fills draws, chain and iteration of a samples object whose model is set.
void read_draws(std::istream& in, const std::string& name, PosteriorSamples& samples);

/// Every scalar of theta once, as key=value; sigma2 is listed for all families.
void write_truth(std::ostream& out, const Parameters& theta, const JointModel& model);
Parameters read_truth(std::istream& in, const std::string& name, const JointModel& model);

void write_diagnostics(std::ostream& out, const Diagnostics& d);

/// Header: t,t_up_minus_t,u,EKL,EKL_lo,EKL_hi,pi,selected. Flags are leading '#' lines.
void write_plan(std::ostream& out, const SchedulePlan& plan);
SchedulePlan read_plan(std::istream& in, const std::string& name);

void write_curve(std::ostream& out, const std::vector<double>& u, const std::vector<double>& pi);
void read_curve(std::istream& in, const std::string& name, std::vector<double>& u, std::vector<double>& pi);

struct ScoreRow {
    std::string model;
    double dic = 0.0;
    std::vector<double> cv_dcl;  // one per landmark
};

/// Columns: model, DIC, cvDCL[t=...] per landmark, n_t[t=...] per landmark.
void write_score_table(std::ostream& out, const std::vector<double>& landmarks, const std::vector<int>& n_at_risk,
                       const std::vector<ScoreRow>& rows);

// ---------------------------------------------------------------------------
// Fit directories: draws.csv, model.cfg, diagnostics.txt, summary.txt

struct FitSummary {
    DicResult dic;
    bool converged = true;
    std::size_t draws = 0;
};

void save_fit(const std::string& dir, const PosteriorSamples& samples, const FitSummary& summary,
              const McmcConfig& mcmc);
PosteriorSamples load_fit(const std::string& dir);
FitSummary load_fit_summary(const std::string& dir);

std::string read_file(const std::string& path);
/// Writes through a temporary file renamed into place.
void write_file(const std::string& path, const std::string& content);

}  // namespace jms
