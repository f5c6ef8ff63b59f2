#pragma once

#include "openphase/holonomy.hpp"
#include "openphase/oracle.hpp"
#include "openphase/stirap.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace openphase {

inline constexpr const char* kVersion = "0.3.0";

struct ConfigParse : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct UnknownFigure : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// One schedule entry with its curve name and abscissa (rate * tau).
struct SchedulePoint {
    std::string curve;
    double x = 0.0;
    DecayRates rates;
};

struct RunConfig {
    PulseParams pulse;
    DecayRates rates;                 // single point for propagate
    std::string figure;               // named schedule, empty for explicit points
    std::vector<SchedulePoint> schedule;
    GridSpec grid;
    LoopOptions loop;
    std::set<int> labels{1, 9};
    int propagateSteps = 4000;
    std::string outDir = "out";
    std::string name = "sweep";
    unsigned threads = 0;
    int seed = 0;
};

/// Abscissa grid shared by all figure sweeps.
inline std::vector<double> default_abscissa() {
    std::vector<double> x;
    for (int k = 1; k <= 20; ++k) x.push_back(0.1 * k);
    return x;
}

inline const std::vector<std::string>& figure_ids() {
    static const std::vector<std::string> ids{"emission", "reversed",      "collision", "pair-2g13",    "pair-g13/2",
                                              "pair-coll-2", "pair-coll-1/2", "combined", "adiabaticity", "restricted"};
    return ids;
}

inline std::string format_number(double v, int digits = 12) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

namespace detail {

inline std::vector<SchedulePoint> emission_curves(const std::vector<double>& xs) {
    std::vector<SchedulePoint> out;
    const std::vector<std::pair<std::string, double>> ratios{{"g23=g13", 1.0}, {"g23=2g13", 2.0}, {"g23=g13/2", 0.5}};
    for (const auto& [name, r] : ratios)
        for (double x : xs) out.push_back({name, x, {x / r, x, 0.0, 0.0}});
    return out;
}

inline std::vector<SchedulePoint> collision_curves(const std::vector<double>& xs) {
    std::vector<SchedulePoint> out;
    const std::vector<std::pair<std::string, double>> ratios{{"g12=g21", 1.0}, {"g12=2g21", 2.0}, {"g12=g21/2", 0.5}};
    for (const auto& [name, r] : ratios)
        for (double x : xs) out.push_back({name, x, {0.0, 0.0, x, x / r}});
    return out;
}

}  // namespace detail

/// Schedule, labels and pulse for a named figure.
inline void apply_figure(RunConfig& cfg, const std::string& id) {
    const auto xs = default_abscissa();
    cfg.figure = id;
    cfg.schedule.clear();
    if (id == "emission" || id == "restricted") {
        cfg.schedule = detail::emission_curves(xs);
        cfg.labels = id == "restricted" ? std::set<int>{1} : std::set<int>{1, 9};
    } else if (id == "reversed") {
        cfg.schedule = detail::emission_curves(xs);
        cfg.pulse.t0 = -std::abs(cfg.pulse.t0);
        cfg.labels = {1, 9};
    } else if (id == "collision") {
        cfg.schedule = detail::collision_curves(xs);
        cfg.labels = {1, 9};
    } else if (id == "pair-2g13" || id == "pair-g13/2") {
        const double r = id == "pair-2g13" ? 2.0 : 0.5;
        for (double x : xs) cfg.schedule.push_back({id == "pair-2g13" ? "g23=2g13" : "g23=g13/2", x, {x / r, x, 0.0, 0.0}});
        cfg.labels = {2, 3, 7, 8};
    } else if (id == "pair-coll-2" || id == "pair-coll-1/2") {
        const double r = id == "pair-coll-2" ? 2.0 : 0.5;
        for (double x : xs) cfg.schedule.push_back({id == "pair-coll-2" ? "g12=2g21" : "g12=g21/2", x, {0.0, 0.0, x, x / r}});
        cfg.labels = {2, 3, 7, 8};
    } else if (id == "combined") {
        const std::vector<std::pair<std::string, double>> ratios{
            {"g12=sqrt2*g21", std::sqrt(2.0)}, {"g12=g21/sqrt2", 1.0 / std::sqrt(2.0)}, {"g12=sqrt3*g21", std::sqrt(3.0)}};
        for (const auto& [name, r] : ratios)
            for (double x : xs) {
                const double g13 = x / std::numbers::e;
                cfg.schedule.push_back({name, x, {g13, x, r * g13, g13}});
            }
        cfg.labels = {1, 9};
    } else if (id == "adiabaticity") {
        cfg.labels = {1};
    } else {
        throw UnknownFigure("unknown figure id '" + id + "'");
    }
}

inline std::vector<double> parse_list(const std::string& s, const std::string& key) {
    std::vector<double> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) {
        if (item.find_first_not_of(" \t") == std::string::npos) continue;
        try {
            size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigParse(key + ": cannot read number '" + item + "'");
        }
    }
    return out;
}

/// Flat INI-style config: sections pulse, rates, schedule, grid, loop, output.
inline RunConfig parse_config(std::istream& in, const std::string& source = "<config>") {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigParse(source + ":" + std::to_string(e.line()) + ": " + e.message());
    }
    static const std::map<std::string, std::set<std::string>> allowed{
        {"pulse", {"g01", "g02", "t0", "tau", "phi"}},
        {"rates", {"gamma13", "gamma23", "gamma12", "gamma21"}},
        {"schedule", {"figure", "points", "model"}},
        {"grid", {"N", "tMin", "tMax", "labels", "steps"}},
        {"loop", {"kappa", "reference_factor", "closure_points", "cluster_tol"}},
        {"output", {"dir", "name", "threads", "seed"}}};
    RunConfig cfg;
    auto number = [&](const std::string& key, const std::string& text) {
        const auto v = parse_list(text, key);
        if (v.size() != 1) throw ConfigParse(source + ": " + key + ": expected one number");
        return v[0];
    };
    auto integer = [&](const std::string& key, const std::string& text) {
        const double v = number(key, text);
        if (v != std::floor(v)) throw ConfigParse(source + ": " + key + ": expected an integer");
        return static_cast<int>(v);
    };
    std::string figure;
    std::vector<SchedulePoint> points;
    for (const auto& [section, body] : tree) {
        const auto sec = allowed.find(section);
        if (sec == allowed.end()) {
            if (body.empty()) throw ConfigParse(source + ": key '" + section + "' outside a section");
            throw ConfigParse(source + ": unknown section [" + section + "]");
        }
        for (const auto& [key, node] : body) {
            const std::string full = section + "." + key;
            if (!sec->second.count(key)) throw ConfigParse(source + ": unknown key '" + full + "'");
            const std::string v = node.get_value<std::string>();
            if (section == "pulse") {
                double& slot = key == "g01" ? cfg.pulse.g01
                             : key == "g02" ? cfg.pulse.g02
                             : key == "t0"  ? cfg.pulse.t0
                             : key == "tau" ? cfg.pulse.tau
                                            : cfg.pulse.phi;
                slot = number(full, v);
            } else if (section == "rates") {
                double& slot = key == "gamma13" ? cfg.rates.gamma13
                             : key == "gamma23" ? cfg.rates.gamma23
                             : key == "gamma12" ? cfg.rates.gamma12
                                                : cfg.rates.gamma21;
                slot = number(full, v);
            } else if (section == "schedule") {
                if (key == "figure") {
                    figure = v;
                } else if (key == "model") {
                    if (v == "lindblad") cfg.loop.model = SuperoperatorModel::Lindblad;
                    else if (v == "printed") cfg.loop.model = SuperoperatorModel::Printed;
                    else throw ConfigParse(source + ": " + full + ": expected 'lindblad' or 'printed'");
                } else {
                    std::istringstream ps(v);
                    std::string entry;
                    while (std::getline(ps, entry, ';')) {
                        if (entry.find_first_not_of(" \t") == std::string::npos) continue;
                        const auto r = parse_list(entry, full);
                        if (r.size() != 4) throw ConfigParse(source + ": " + full + ": each point needs gamma13,gamma23,gamma12,gamma21");
                        points.push_back({"points", static_cast<double>(points.size()), {r[0], r[1], r[2], r[3]}});
                    }
                }
            } else if (section == "grid") {
                if (key == "N") cfg.grid.N = integer(full, v);
                else if (key == "tMin") cfg.grid.tMin = number(full, v);
                else if (key == "tMax") cfg.grid.tMax = number(full, v);
                else if (key == "steps") cfg.propagateSteps = integer(full, v);
                else {
                    cfg.labels.clear();
                    for (double l : parse_list(v, full)) {
                        if (l != std::floor(l) || l < 1 || l > 9) throw ConfigParse(source + ": " + full + ": labels must be integers 1..9");
                        cfg.labels.insert(static_cast<int>(l));
                    }
                }
            } else if (section == "loop") {
                if (key == "kappa") cfg.loop.kappa = number(full, v);
                else if (key == "reference_factor") cfg.loop.referenceFactor = number(full, v);
                else if (key == "closure_points") cfg.loop.closurePoints = integer(full, v);
                else cfg.loop.clusterTol = number(full, v);
            } else {
                if (key == "dir") cfg.outDir = v;
                else if (key == "name") cfg.name = v;
                else if (key == "threads") cfg.threads = static_cast<unsigned>(integer(full, v));
                else cfg.seed = integer(full, v);
            }
        }
    }
    if (!figure.empty()) {
        const std::set<int> keep = cfg.labels;
        const bool customLabels = tree.get_child_optional("grid.labels").has_value();
        try {
            apply_figure(cfg, figure);
        } catch (const UnknownFigure& e) {
            throw ConfigParse(source + ": schedule.figure: " + e.what());
        }
        if (customLabels) cfg.labels = keep;
        if (!points.empty()) throw ConfigParse(source + ": schedule.figure and schedule.points are exclusive");
    } else {
        cfg.schedule = points;
    }
    if (cfg.grid.N < 100) throw ConfigParse(source + ": grid.N must be at least 100");
    if (!(cfg.grid.tMin < 0.0 && 0.0 < cfg.grid.tMax)) throw ConfigParse(source + ": grid needs tMin < 0 < tMax");
    if (cfg.labels.empty()) throw ConfigParse(source + ": grid.labels is empty");
    try {
        cfg.pulse.validate();
        cfg.rates.validate();
        for (const auto& sp : cfg.schedule) sp.rates.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigParse(source + ": " + e.what());
    }
    return cfg;
}

inline RunConfig parse_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigParse("cannot open " + path);
    return parse_config(f, path);
}

/// Effective configuration as '#' lines, sufficient to rerun.
inline std::vector<std::string> config_echo(const RunConfig& c) {
    std::vector<std::string> out;
    auto line = [&](const std::string& k, const std::string& v) { out.push_back(k + " = " + v); };
    out.push_back("[pulse]");
    line("g01", format_number(c.pulse.g01, 17));
    line("g02", format_number(c.pulse.g02, 17));
    line("t0", format_number(c.pulse.t0, 17));
    line("tau", format_number(c.pulse.tau, 17));
    line("phi", format_number(c.pulse.phi, 17));
    out.push_back("[rates]");
    line("gamma13", format_number(c.rates.gamma13, 17));
    line("gamma23", format_number(c.rates.gamma23, 17));
    line("gamma12", format_number(c.rates.gamma12, 17));
    line("gamma21", format_number(c.rates.gamma21, 17));
    out.push_back("[schedule]");
    if (!c.figure.empty()) {
        line("figure", c.figure);
    } else {
        std::string pts;
        for (const auto& sp : c.schedule) {
            if (!pts.empty()) pts += "; ";
            pts += format_number(sp.rates.gamma13, 17) + "," + format_number(sp.rates.gamma23, 17) + "," +
                   format_number(sp.rates.gamma12, 17) + "," + format_number(sp.rates.gamma21, 17);
        }
        line("points", pts);
    }
    line("model", c.loop.model == SuperoperatorModel::Printed ? "printed" : "lindblad");
    out.push_back("[grid]");
    line("N", std::to_string(c.grid.N));
    line("tMin", format_number(c.grid.tMin, 17));
    line("tMax", format_number(c.grid.tMax, 17));
    std::string ls;
    for (int l : c.labels) ls += (ls.empty() ? "" : ",") + std::to_string(l);
    line("labels", ls);
    line("steps", std::to_string(c.propagateSteps));
    out.push_back("[loop]");
    line("kappa", format_number(c.loop.kappa, 17));
    line("reference_factor", format_number(c.loop.referenceFactor, 17));
    line("closure_points", std::to_string(c.loop.closurePoints));
    line("cluster_tol", format_number(c.loop.clusterTol, 17));
    out.push_back("[output]");
    line("dir", c.outDir);
    line("name", c.name);
    line("seed", std::to_string(c.seed));
    return out;
}

struct SweepTable {
    std::vector<std::string> metadata;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

inline void write_csv(std::ostream& out, const SweepTable& t) {
    for (const auto& m : t.metadata) out << "# " << m << '\n';
    for (size_t i = 0; i < t.header.size(); ++i) out << (i ? "," : "") << t.header[i];
    out << '\n';
    for (const auto& r : t.rows) {
        for (size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << r[i];
        out << '\n';
    }
}

inline std::string safe_name(std::string s) {
    for (char& c : s)
        if (c == '/' || c == '\\' || c == ' ') c = '_';
    return s;
}

namespace detail {

inline std::vector<DecayRates> rates_of(const std::vector<SchedulePoint>& sched) {
    std::vector<DecayRates> r;
    for (const auto& sp : sched) r.push_back(sp.rates);
    return r;
}

inline double twopi() { return 2.0 * std::numbers::pi; }

// max |beta(N) - beta(N/2)| over the requested labels at the first schedule entry, in units of 2 pi
inline std::string convergence_estimate(const RunConfig& c) {
    if (c.schedule.empty()) return "n/a";
    GridSpec half = c.grid;
    half.N = std::max(100, c.grid.N / 2);
    const auto full = geometric_phases(c.pulse, c.schedule.front().rates, c.grid, c.loop);
    const auto coarse = geometric_phases(c.pulse, c.schedule.front().rates, half, c.loop);
    double worst = 0.0;
    for (int l : c.labels) worst = std::max(worst, std::abs(full.at(l).beta - coarse.at(l).beta) / twopi());
    return format_number(worst, 3);
}

}  // namespace detail

inline std::vector<std::string> base_metadata(const RunConfig& c, const std::string& command) {
    std::vector<std::string> m{std::string("openphase ") + kVersion, "command: " + command,
                               "phases in units of 2*pi; rates as amplitude*tau"};
    for (const auto& e : config_echo(c)) m.push_back("config " + e);
    return m;
}

/// Phase table for the configured schedule.
inline SweepTable run_phase_sweep(const RunConfig& c, const std::string& command) {
    SweepTable t;
    t.metadata = base_metadata(c, command);
    t.metadata.push_back("grid convergence |beta(N)-beta(N/2)|/2pi at first entry: " + detail::convergence_estimate(c));
    t.header = {"schedule_index", "curve", "x",          "gamma13",   "gamma23",    "gamma12",        "gamma21", "label",
                "re_beta_2pi",    "im_beta_2pi", "band_size", "window_start", "window_end", "min_continuity", "min_gap"};
    const auto rows = phase_sweep(detail::rates_of(c.schedule), c.pulse, c.labels, c.grid, c.loop, c.threads);
    for (const auto& r : rows) {
        const auto& sp = c.schedule[r.scheduleIndex];
        const auto& pr = r.result;
        t.rows.push_back({std::to_string(r.scheduleIndex), sp.curve, format_number(sp.x), format_number(sp.rates.gamma13),
                          format_number(sp.rates.gamma23), format_number(sp.rates.gamma12), format_number(sp.rates.gamma21),
                          std::to_string(pr.label), format_number(pr.beta.real() / detail::twopi()),
                          format_number(pr.beta.imag() / detail::twopi()), std::to_string(pr.bandSize),
                          format_number(pr.windowStart), format_number(pr.windowEnd), format_number(pr.minContinuity),
                          format_number(pr.minRelativeGap)});
    }
    return t;
}

/// Adiabaticity diagnostic r(t) = ln(lhs) on the configured t grid.
inline SweepTable run_adiabaticity(const RunConfig& c) {
    SweepTable t;
    t.metadata = base_metadata(c, "figure adiabaticity");
    t.header = {"t", "lhs", "ln_lhs"};
    for (int k = 0; k < c.grid.N; ++k) {
        const double tt = c.grid.at(k);
        const double v = adiabaticity_lhs(tt, c.pulse);
        t.rows.push_back({format_number(tt), format_number(v), format_number(std::log(v))});
    }
    return t;
}

inline constexpr double kWindowStart = -3.06;
inline constexpr double kWindowEnd = 4.39;

/// beta_1 on the full grid against the adiabatic window only.
inline SweepTable run_restricted(const RunConfig& c) {
    SweepTable t;
    t.metadata = base_metadata(c, "figure restricted");
    t.metadata.push_back("restricted window [" + format_number(kWindowStart) + ", " + format_number(kWindowEnd) + "]");
    t.header = {"schedule_index", "curve", "x", "gamma13", "gamma23", "re_beta1_2pi", "re_beta1_restricted_2pi",
                "re_difference_2pi", "im_difference_2pi"};
    GridSpec win = c.grid;
    win.tMin = kWindowStart;
    win.tMax = kWindowEnd;
    const auto rates = detail::rates_of(c.schedule);
    const auto full = phase_sweep(rates, c.pulse, {1}, c.grid, c.loop, c.threads);
    const auto part = phase_sweep(rates, c.pulse, {1}, win, c.loop, c.threads);
    for (size_t i = 0; i < full.size(); ++i) {
        const auto& sp = c.schedule[i];
        const cd d = full[i].result.beta - part[i].result.beta;
        t.rows.push_back({std::to_string(i), sp.curve, format_number(sp.x), format_number(sp.rates.gamma13),
                          format_number(sp.rates.gamma23), format_number(full[i].result.beta.real() / detail::twopi()),
                          format_number(part[i].result.beta.real() / detail::twopi()), format_number(d.real() / detail::twopi()),
                          format_number(d.imag() / detail::twopi())});
    }
    return t;
}

/// Gnuplot commands drawing one curve per (curve, label) column pair.
inline std::string plot_script(const SweepTable& t, const std::string& csvName, const std::string& figure) {
    std::ostringstream g;
    g << "set datafile separator ','\nset key outside\n";
    if (figure == "adiabaticity") {
        g << "set xlabel 't/tau'\nset ylabel 'ln lhs'\nplot '" << csvName << "' using 1:3 with lines title 'r(t)'\n";
        return g.str();
    }
    if (figure == "propagate") {
        g << "set xlabel 't/tau'\nset ylabel 'population'\nplot '" << csvName << "' using 1:2 with lines title 'p1', '" << csvName
          << "' using 1:3 with lines title 'p2', '" << csvName << "' using 1:4 with lines title 'p3'\n";
        return g.str();
    }
    if (figure == "restricted") {
        g << "set xlabel 'gamma23*tau'\nset ylabel 'Re(beta1 - beta1p) / 2pi'\nplot ";
        std::set<std::string> curves;
        for (const auto& r : t.rows) curves.insert(r[1]);
        bool first = true;
        for (const auto& cname : curves) {
            g << (first ? "" : ", \\\n     ") << "'" << csvName << "' using ($2 eq '" << cname << "' ? $3 : 1/0):8 with linespoints title '"
              << cname << "'";
            first = false;
        }
        g << '\n';
        return g.str();
    }
    g << "set xlabel 'rate*tau'\nset ylabel 'Re(beta) / 2pi'\nplot ";
    std::set<std::pair<std::string, std::string>> series;
    for (const auto& r : t.rows) series.insert({r[1], r[7]});
    bool first = true;
    for (const auto& [cname, label] : series) {
        g << (first ? "" : ", \\\n     ") << "'" << csvName << "' using (strcol(2) eq '" << cname << "' && $8 == " << label
          << " ? $3 : 1/0):9 with linespoints title '" << cname << " beta" << label << "'";
        first = false;
    }
    g << '\n';
    return g.str();
}

/// Writes <dir>/<name>.csv and <dir>/<name>.gp; returns the csv path.
inline std::string write_outputs(const SweepTable& t, const std::string& dir, const std::string& name, const std::string& figure) {
    std::filesystem::create_directories(dir);
    const std::string base = safe_name(name);
    const auto csv = std::filesystem::path(dir) / (base + ".csv");
    const auto gp = std::filesystem::path(dir) / (base + ".gp");
    {
        std::ofstream f(csv);
        write_csv(f, t);
    }
    {
        std::ofstream f(gp);
        f << plot_script(t, base + ".csv", figure);
    }
    return csv.string();
}

/// Populations against time for a single parameter point.
inline SweepTable run_propagate(const RunConfig& c, int initialLevel) {
    if (initialLevel < 1 || initialLevel > 3) throw std::invalid_argument("initial level must be 1, 2 or 3");
    Mat3 rho = Mat3::Zero();
    rho(initialLevel - 1, initialLevel - 1) = 1.0;
    const auto res = propagate(density_to_coherence(rho), c.pulse, c.rates, c.grid.tMin, c.grid.tMax, c.propagateSteps, c.loop.model);
    SweepTable t;
    t.metadata = base_metadata(c, "propagate --initial-level " + std::to_string(initialLevel));
    t.header = {"t", "p1", "p2", "p3", "trace"};
    for (size_t k = 0; k < res.times.size(); ++k) {
        const auto& pop = res.populations[k];
        t.rows.push_back({format_number(res.times[k]), format_number(pop[0]), format_number(pop[1]), format_number(pop[2]),
                          format_number(3.0 * res.states[k](0))});
    }
    return t;
}

}  // namespace openphase

namespace openphase {

/// Table for whatever the config names: a figure id or explicit points.
inline SweepTable run_config(const RunConfig& c, const std::string& command) {
    if (c.figure == "adiabaticity") return run_adiabaticity(c);
    if (c.figure == "restricted") return run_restricted(c);
    return run_phase_sweep(c, command);
}

// imaginary parts below tol are dropped, so real eigenvalues print as plain numbers
inline std::string format_complex(cd z, double tol) {
    const double re = std::abs(z.real()) <= tol ? 0.0 : z.real();
    if (std::abs(z.imag()) <= tol) return format_number(re);
    return format_number(re) + (z.imag() < 0 ? "-" : "+") + format_number(std::abs(z.imag())) + "i";
}

/// Jordan report as printed by the CLI.
inline std::string jordan_report(const CMat& M, const JordanOptions& opt) {
    const JordanForm jf = jordan_form(M, opt);
    std::ostringstream out;
    out << jf.blocks.size() << (jf.blocks.size() == 1 ? " block" : " blocks") << ", sizes ";
    for (size_t i = 0; i < jf.blocks.size(); ++i) out << (i ? "," : "") << jf.blocks[i].size;
    out << '\n';
    for (const auto& b : jf.blocks)
        out << "  lambda=" << format_complex(b.lambda, jf.clusterTolerance) << " size=" << b.size << '\n';
    out << "cluster tolerance " << format_number(jf.clusterTolerance, 6) << '\n';
    out << "condition(S) " << format_number(jf.condition, 6) << '\n';
    out << "residual " << format_number(jf.residual, 6) << '\n';
    return out.str();
}

}  // namespace openphase
