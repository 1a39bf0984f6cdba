// Command-line driver: replay, calibrate, simulate, price, smile, synth.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "netdemand/calibration.hpp"
#include "netdemand/errors.hpp"
#include "netdemand/messages.hpp"
#include "netdemand/pricing.hpp"

using namespace netdemand;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

enum Exit : int {
    kOk = 0,
    kFailure = 1,
    kUsage = 2,
    kIo = 3,
    kNoUniqueMpr = 4,
    kAllPathsAborted = 5,
    kFit = 6,
    kModelBreakdown = 7,
};

struct Common {
    std::string config;
    std::string out;
    std::uint64_t seed = 1;
    bool seed_set = false;
    bool deterministic = false;
    bool verbose = false;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// FNV-1a, stable across platforms.
std::string fingerprint(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) h = (h ^ c) * 0x100000001b3ULL;
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

class Output {
public:
    explicit Output(const std::string& dir) : dir_(dir) {
        if (!dir_.empty()) fs::create_directories(dir_);
    }
    bool enabled() const { return !dir_.empty(); }
    void write(const std::string& name, const std::string& text) const {
        if (!enabled()) return;
        std::ofstream f(fs::path(dir_) / name, std::ios::binary);
        if (!f) throw IoError("cannot write " + (fs::path(dir_) / name).string());
        f << text;
    }

private:
    std::string dir_;
};

void write_manifest(const Output& out, const std::string& command, std::uint64_t seed, const std::string& inputs,
                    json extra = json::object()) {
    json m;
    m["command"] = command;
    m["version"] = NETDEMAND_VERSION;
    m["seed"] = seed;
    m["config_hash"] = fingerprint(inputs);
    for (auto& [k, v] : extra.items()) m[k] = v;
    out.write("manifest.json", m.dump(2) + "\n");
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// Model from the config file; the optional "pricing" section fills request defaults.
struct Loaded {
    ModelParams params;
    PricingRequest request;
    std::string bytes;
};

Loaded load_config(const Common& c) {
    Loaded l;
    if (c.config.empty()) {
        l.params = reference_params();
        l.bytes = params_to_json(l.params);
    } else {
        l.bytes = read_file(c.config);
        l.params = params_from_json(l.bytes);
        const json doc = json::parse(l.bytes);
        if (doc.contains("pricing")) {
            const json& p = doc["pricing"];
            l.request.paths = p.value("paths", l.request.paths);
            l.request.expiry_years = p.value("expiry_years", l.request.expiry_years);
            l.request.dt_years = p.value("dt_years", l.request.dt_years);
            l.request.seed = p.value("seed", l.request.seed);
            l.request.mpr_every = p.value("mpr_every", l.request.mpr_every);
            if (p.contains("strikes")) l.request.strikes = p["strikes"].get<std::vector<double>>();
            if (p.value("curvature", std::string("piecewise_linear")) == "smoothed")
                l.request.curvature = Curvature::Smoothed;
        }
    }
    if (c.seed_set) l.request.seed = c.seed;
    if (c.deterministic) l.request.threads = 1;
    return l;
}

struct PricingFlags {
    std::size_t paths = 0;
    double expiry = 0.0;
    double dt = 0.0;
    std::vector<double> strikes;
    unsigned threads = 0;
};

void apply_flags(PricingRequest& r, const PricingFlags& f, const Common& c) {
    if (f.paths) r.paths = f.paths;
    if (f.expiry > 0.0) r.expiry_years = f.expiry;
    if (f.dt > 0.0) r.dt_years = f.dt;
    if (!f.strikes.empty()) r.strikes = f.strikes;
    if (f.threads) r.threads = f.threads;
    if (c.deterministic) r.threads = 1;
}

std::string request_fingerprint_input(const Loaded& l, const PricingRequest& r) {
    std::ostringstream s;
    s << l.bytes << '|' << r.paths << '|' << r.expiry_years << '|' << r.dt_years << '|' << r.mpr_every;
    for (double k : r.strikes) s << '|' << k;
    return s.str();
}

void log_terminals(const Terminals& t, const Common& c) {
    if (!c.verbose) return;
    std::cerr << "completed " << t.values.size() << ", aborted " << t.aborted << " (lower " << t.breach_lower
              << ", upper " << t.breach_upper << "), max residual/|b| " << t.max_residual_ratio
              << ", max condition " << t.max_condition << "\n";
}

int run_replay(const std::string& log_path, double opening, const Common& c) {
    const std::string bytes = read_file(log_path);
    std::istringstream in(bytes);
    const ParseResult parsed = parse_messages(in);
    if (c.verbose)
        for (const auto& issue : parsed.issues) std::cerr << "line " << issue.line << ": " << issue.message << "\n";
    if (parsed.events.empty()) throw ArgumentError("no events in " + log_path);
    if (!(opening > 0.0)) opening = parsed.events.front().price;

    Replayer replay(opening);
    std::ostringstream series;
    series << "event,timestamp_ns,clearing_price\n";
    for (std::size_t i = 0; i < parsed.events.size(); ++i) {
        replay.apply(parsed.events[i]);
        series << i + 1 << ',' << parsed.events[i].timestamp_ns << ',' << replay.book().clearing_price() << '\n';
    }
    const BookSnapshot snap = replay.book().snapshot();
    std::ostringstream book;
    book << "side,price,quantity\n";
    for (const auto& l : snap.bids) book << "buy," << l.price << ',' << l.quantity << '\n';
    for (const auto& l : snap.asks) book << "sell," << l.price << ',' << l.quantity << '\n';

    const ReplayStats& st = replay.stats();
    std::cout << "clearing_price " << replay.book().clearing_price() << "\n"
              << "events " << parsed.events.size() << ", trades " << st.trades << ", orphans " << st.orphans
              << ", rejected " << st.rejected << "\n"
              << book.str();
    const Output out(c.out);
    out.write("clearing.csv", series.str());
    out.write("book.csv", book.str());
    write_manifest(out, "replay", c.seed, bytes, {{"input", log_path}});
    return kOk;
}

int run_calibrate(const std::string& log_path, const CalibrationOptions& opts, const Common& c) {
    const std::string bytes = read_file(log_path);
    std::istringstream in(bytes);
    const ParseResult parsed = parse_messages(in, opts.strict);
    const Calibration cal = calibrate(parsed.events, opts);
    const std::string report = format_report(cal.report, cal.panel.K);
    std::cout << report;
    const Output out(c.out);
    out.write("params.json", params_to_json(cal.params) + "\n");
    out.write("report.txt", report);
    write_manifest(out, "calibrate", c.seed, bytes,
                   {{"input", log_path}, {"p_min", opts.p_min}, {"p_max", opts.p_max}, {"pi0", opts.panel.pi0}});
    return kOk;
}

int run_simulate(const PricingFlags& f, const Common& c) {
    Loaded l = load_config(c);
    apply_flags(l.request, f, c);
    const Terminals t = simulate_terminals(l.params, l.request);
    log_terminals(t, c);
    const PriceEstimate m = call_price(t.values, 0.0);
    std::cout << "paths " << l.request.paths << ", completed " << t.values.size() << ", aborted " << t.aborted
              << "\nmean_terminal " << fmt("%.6f", m.price) << " std_error " << fmt("%.6f", m.std_error) << "\n";
    std::ostringstream table;
    table << "path,terminal_price\n";
    for (std::size_t i = 0; i < t.values.size(); ++i) table << i << ',' << fmt("%.10f", t.values[i]) << '\n';
    const Output out(c.out);
    out.write("terminals.csv", table.str());
    write_manifest(out, "simulate", l.request.seed, request_fingerprint_input(l, l.request),
                   {{"paths", l.request.paths}, {"steps", l.request.steps()}, {"aborted", t.aborted}});
    return kOk;
}

int run_quotes(const char* command, const PricingFlags& f, const Common& c, bool default_strikes) {
    Loaded l = load_config(c);
    apply_flags(l.request, f, c);
    if (l.request.strikes.empty() && default_strikes)
        for (int i = 0; i <= 14; ++i) l.request.strikes.push_back(19.8 + 0.05 * i);
    const Terminals t = simulate_terminals(l.params, l.request);
    log_terminals(t, c);
    const SmileTable s = quote_strikes(t, l.params, l.request);
    std::ostringstream table;
    table << "strike,price,std_error,implied_vol,n_aborted_paths\n";
    for (const auto& q : s.quotes)
        table << fmt("%.4f", q.strike) << ',' << fmt("%.8f", q.price) << ',' << fmt("%.8f", q.std_error) << ','
              << (q.implied_vol ? fmt("%.6f", *q.implied_vol) : std::string("NA")) << ',' << s.aborted << '\n';
    std::cout << table.str();
    const Output out(c.out);
    out.write("quotes.csv", table.str());
    write_manifest(out, command, l.request.seed, request_fingerprint_input(l, l.request),
                   {{"paths", l.request.paths}, {"steps", l.request.steps()}, {"aborted", s.aborted}});
    return kOk;
}

int run_synth(std::size_t bars, const Common& c) {
    Loaded l;
    l.params = c.config.empty() ? synthetic_params() : load_params(c.config);
    const SyntheticLog log = synthesize_log(l.params, bars, c.seed);
    std::ostringstream text;
    write_messages(text, log.events);
    const Output out(c.out);
    if (out.enabled()) {
        out.write("session.log", text.str());
        out.write("truth.json", params_to_json(l.params) + "\n");
        write_manifest(out, "synth", c.seed, params_to_json(l.params), {{"bars", bars}});
    } else {
        std::cout << text.str();
    }
    if (c.verbose) std::cerr << log.events.size() << " events over " << bars << " bars\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Net demand curve order book model: replay, calibrate, simulate and price"};
    app.set_version_flag("--version", std::string(NETDEMAND_VERSION));
    app.require_subcommand(1);

    Common common;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--out", common.out, "Directory for artifacts and the run manifest");
        sub->add_option("--seed", common.seed, "Random seed")->each([&](const std::string&) { common.seed_set = true; });
        sub->add_flag("--deterministic", common.deterministic, "Single worker thread");
        sub->add_flag("--verbose,-v", common.verbose, "Diagnostics on stderr");
    };

    std::string log_path;
    double opening = 0.0;
    auto* replay = app.add_subcommand("replay", "Replay a message log through the matching engine");
    replay->add_option("log", log_path, "Message log")->required()->check(CLI::ExistingFile);
    replay->add_option("--opening-price", opening, "Clearing price before the first trade (default: first event price)");
    add_common(replay);

    CalibrationOptions cal_opts;
    auto* calib = app.add_subcommand("calibrate", "Estimate model parameters from a message log");
    calib->add_option("log", log_path, "Message log")->required()->check(CLI::ExistingFile);
    calib->add_option("--p-min", cal_opts.p_min, "Lowest plausible price")->capture_default_str();
    calib->add_option("--p-max", cal_opts.p_max, "Highest plausible price")->capture_default_str();
    calib->add_option("--pi0", cal_opts.panel.pi0, "Opening clearing price")->capture_default_str();
    calib->add_option("--K", cal_opts.panel.K, "Buckets on each side of the clearing price")->capture_default_str();
    calib->add_option("--delta-p", cal_opts.panel.delta_p, "Bucket width")->capture_default_str();
    calib->add_flag("--strict", cal_opts.strict, "Reject malformed lines");
    add_common(calib);

    PricingFlags pf;
    auto add_pricing = [&](CLI::App* sub) {
        sub->add_option("--config", common.config, "Model config (JSON); default: reference parameters")
            ->check(CLI::ExistingFile);
        sub->add_option("--paths", pf.paths, "Monte Carlo paths");
        sub->add_option("--expiry", pf.expiry, "Expiry in years");
        sub->add_option("--dt", pf.dt, "Time step in years");
        sub->add_option("--threads", pf.threads, "Worker threads (0: all cores)");
        add_common(sub);
    };
    auto* simulate = app.add_subcommand("simulate", "Simulate terminal clearing prices under the martingale measure");
    add_pricing(simulate);
    auto* price = app.add_subcommand("price", "Price calls at the given strikes");
    add_pricing(price);
    price->add_option("--strikes", pf.strikes, "Strike prices")->delimiter(',');
    auto* smile = app.add_subcommand("smile", "Implied volatility smile (default strikes 19.80 to 20.50)");
    add_pricing(smile);
    smile->add_option("--strikes", pf.strikes, "Strike prices")->delimiter(',');

    std::size_t bars = 390;
    auto* synth = app.add_subcommand("synth", "Write a synthetic message log from known parameters");
    synth->add_option("--config", common.config, "Model config (JSON); default: built-in synthetic model")
        ->check(CLI::ExistingFile);
    synth->add_option("--bars", bars, "One-minute bars to generate")->capture_default_str();
    add_common(synth);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*replay) return run_replay(log_path, opening, common);
        if (*calib) return run_calibrate(log_path, cal_opts, common);
        if (*simulate) return run_simulate(pf, common);
        if (*price) {
            if (pf.strikes.empty()) throw ArgumentError("price: --strikes is required");
            return run_quotes("price", pf, common, false);
        }
        if (*smile) return run_quotes("smile", pf, common, true);
        if (*synth) return run_synth(bars, common);
    } catch (const NoUniqueMpr& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNoUniqueMpr;
    } catch (const SimulationFailure& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kAllPathsAborted;
    } catch (const FitError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFit;
    } catch (const LiquiditySingularity& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kModelBreakdown;
    } catch (const BoundaryBreach& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kModelBreakdown;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    } catch (const ArgumentError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const json::exception& e) {
        std::cerr << "error: malformed config: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailure;
    }
    return kFailure;
}
