#include "hypstab/scenario.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

namespace hypstab {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct Entry {
    std::string value;
    int line = 0;
    mutable bool used = false;
};

struct ConfigFile {
    std::string origin;
    std::map<std::string, std::map<std::string, Entry>> sections;
    std::vector<std::string> errors;

    void fail(int line, const std::string& msg) {
        std::ostringstream os;
        os << origin << ":" << line << ": " << msg;
        errors.push_back(os.str());
    }
    void fail(const std::string& msg) { errors.push_back(origin + ": " + msg); }

    const Entry* find(const std::string& sec, const std::string& key) const {
        auto s = sections.find(sec);
        if (s == sections.end()) return nullptr;
        auto k = s->second.find(key);
        if (k == s->second.end()) return nullptr;
        k->second.used = true;
        return &k->second;
    }

    std::vector<double> numbers(const Entry& e, const std::string& what) {
        std::vector<double> out;
        std::istringstream is(e.value);
        std::string tok;
        while (is >> tok) {
            try {
                std::size_t pos = 0;
                out.push_back(std::stod(tok, &pos));
                if (pos != tok.size()) throw std::invalid_argument(tok);
            } catch (const std::exception&) {
                fail(e.line, what + ": not a number: '" + tok + "'");
                return {};
            }
        }
        return out;
    }

    double number(const std::string& sec, const std::string& key, double fallback) {
        const Entry* e = find(sec, key);
        if (!e) return fallback;
        auto v = numbers(*e, sec + "." + key);
        if (v.size() != 1) {
            fail(e->line, sec + "." + key + ": expected a single number");
            return fallback;
        }
        return v[0];
    }

    long integer(const std::string& sec, const std::string& key, long fallback) {
        double v = number(sec, key, static_cast<double>(fallback));
        return static_cast<long>(v);
    }

    std::string text(const std::string& sec, const std::string& key,
                     const std::string& fallback) {
        const Entry* e = find(sec, key);
        return e ? e->value : fallback;
    }
};

ConfigFile read_config(std::istream& in, const std::string& origin) {
    ConfigFile cfg;
    cfg.origin = origin;
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                cfg.fail(lineno, "unterminated section header");
                continue;
            }
            section = trim(line.substr(1, line.size() - 2));
            cfg.sections[section];
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            cfg.fail(lineno, "expected key = value");
            continue;
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (section.empty()) {
            cfg.fail(lineno, "key '" + key + "' outside any section");
            continue;
        }
        if (cfg.sections[section].count(key))
            cfg.fail(lineno, "duplicate key '" + key + "' in [" + section + "]");
        cfg.sections[section][key] = Entry{value, lineno, false};
    }
    return cfg;
}

const char* const kKnownSections[] = {"system",   "speeds",   "boundary", "initial",
                                      "feedback", "numerics", "lyapunov", "run"};

Scenario build_scenario(ConfigFile& cfg) {
    Scenario s;

    for (const auto& [name, entries] : cfg.sections) {
        bool known = false;
        for (const char* sec : kKnownSections) known = known || name == sec;
        if (!known) {
            int line = entries.empty() ? 0 : entries.begin()->second.line;
            cfg.fail(line, "unknown section [" + name + "]");
        }
    }

    s.k = static_cast<int>(cfg.integer("system", "k", 0));
    s.m = static_cast<int>(cfg.integer("system", "m", 0));
    if (s.k < 1) cfg.fail("system.k: k >= 1 is required");
    if (s.m < 1) cfg.fail("system.m: m >= 1 is required");
    s.y_max = cfg.number("system", "y_max", 1.0);
    if (cfg.errors.empty() == false && (s.k < 1 || s.m < 1)) throw SchemaError(cfg.errors);
    const int n = s.k + s.m;

    // speeds
    for (int c = 1; c <= n; ++c) {
        std::ostringstream key;
        key << "lambda." << c;
        const Entry* e = cfg.find("speeds", key.str());
        SpeedProfile prof;
        if (!e) {
            cfg.fail("speeds." + key.str() + ": missing speed profile");
        } else {
            auto coeffs = cfg.numbers(*e, "speeds." + key.str());
            if (coeffs.size() > 4)
                cfg.fail(e->line, "speeds." + key.str() + ": cubic profiles allow at most 4 coefficients");
            prof.base = Polynomial(coeffs);
        }
        std::ostringstream ckey;
        ckey << "coupling." << c;
        if (const Entry* ce = cfg.find("speeds", ckey.str())) {
            auto coup = cfg.numbers(*ce, "speeds." + ckey.str());
            if (static_cast<int>(coup.size()) != n)
                cfg.fail(ce->line, "speeds." + ckey.str() + ": expected " + std::to_string(n) +
                                       " coupling coefficients");
            else
                prof.state_coupling = coup;
        }
        s.speeds.push_back(prof);
    }

    // boundary coupling
    std::string bmode = cfg.text("boundary", "mode", "linear");
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(s.k, s.m);
    for (int i = 1; i <= s.k; ++i) {
        std::ostringstream key;
        key << "row." << i;
        const Entry* e = cfg.find("boundary", key.str());
        if (!e) {
            cfg.fail("boundary." + key.str() + ": missing row (B must be k x m)");
            continue;
        }
        auto row = cfg.numbers(*e, "boundary." + key.str());
        if (static_cast<int>(row.size()) != s.m) {
            cfg.fail(e->line, "boundary." + key.str() + ": expected " + std::to_string(s.m) +
                                  " entries (B must be k x m)");
            continue;
        }
        for (int j = 0; j < s.m; ++j) B(i - 1, j) = row[static_cast<std::size_t>(j)];
    }
    if (bmode == "linear") {
        s.coupling = LinearCoupling{B};
    } else if (bmode == "nonlinear") {
        NonlinearCoupling nc;
        nc.linear = B;
        nc.quad.resize(static_cast<std::size_t>(s.k));
        for (int i = 1; i <= s.k; ++i) {
            std::ostringstream key;
            key << "quad." << i;
            const Entry* e = cfg.find("boundary", key.str());
            if (!e) continue;
            auto vals = cfg.numbers(*e, "boundary." + key.str());
            if (vals.size() % 3 != 0) {
                cfg.fail(e->line, "boundary." + key.str() + ": expected (j l coeff) triplets");
                continue;
            }
            for (std::size_t t = 0; t < vals.size(); t += 3) {
                int j = static_cast<int>(vals[t]), l = static_cast<int>(vals[t + 1]);
                if (j < 1 || j > s.m || l < 1 || l > s.m) {
                    cfg.fail(e->line, "boundary." + key.str() + ": index out of range");
                    continue;
                }
                nc.quad[static_cast<std::size_t>(i - 1)].push_back(
                    QuadraticTerm{j - 1, l - 1, vals[t + 2]});
            }
        }
        s.coupling = nc;
    } else {
        cfg.fail("boundary.mode: expected linear or nonlinear");
    }

    // initial data
    s.initial.components.resize(static_cast<std::size_t>(n));
    for (int c = 1; c <= n; ++c) {
        auto& comp = s.initial.components[static_cast<std::size_t>(c - 1)];
        std::ostringstream skey, pkey, rkey;
        skey << "sine." << c;
        pkey << "poly." << c;
        rkey << "raw." << c;
        if (const Entry* e = cfg.find("initial", skey.str()))
            comp.sine = cfg.numbers(*e, "initial." + skey.str());
        if (const Entry* e = cfg.find("initial", pkey.str()))
            comp.poly = Polynomial(cfg.numbers(*e, "initial." + pkey.str()));
        if (const Entry* e = cfg.find("initial", rkey.str())) {
            comp.raw = cfg.numbers(*e, "initial." + rkey.str());
            if (comp.raw.size() < 2) cfg.fail(e->line, "initial." + rkey.str() + ": need >= 2 samples");
        }
    }

    // feedback
    std::string fmode = cfg.text("feedback", "mode", "linear");
    if (fmode == "linear")
        s.feedback = FeedbackMode::Linear;
    else if (fmode == "nonlinear")
        s.feedback = FeedbackMode::Nonlinear;
    else
        cfg.fail("feedback.mode: expected linear or nonlinear");
    std::string sampling = cfg.text("feedback", "sampling", "local");
    if (sampling == "local")
        s.sampling = SamplingMode::LocalCauchy;
    else if (sampling == "frozen")
        s.sampling = SamplingMode::Frozen;
    else
        cfg.fail("feedback.sampling: expected local or frozen");
    s.delta = cfg.number("feedback", "delta", 0.0);
    if (s.feedback == FeedbackMode::Nonlinear && !(s.delta > 0.0))
        cfg.fail("feedback.delta: ramped feedback requires delta > 0");
    s.tol_compat = cfg.number("run", "tol_compat", 1e-8);

    // numerics
    s.nx = static_cast<int>(cfg.integer("numerics", "nx", 201));
    if (s.nx < 3) cfg.fail("numerics.nx: need at least 3 grid points");
    s.cfl = cfg.number("numerics", "cfl", 0.9);
    if (!(s.cfl > 0.0) || s.cfl > 1.0) cfg.fail("numerics.cfl: expected 0 < cfl <= 1");
    std::string solver = cfg.text("numerics", "solver", "upwind");
    if (solver == "upwind")
        s.solver = SolverMode::Upwind;
    else if (solver == "exact")
        s.solver = SolverMode::ExactAdvection;
    else
        cfg.fail("numerics.solver: expected upwind or exact");

    // lyapunov parameters
    if (const Entry* e = cfg.find("lyapunov", "q")) {
        s.lyapunov.q = cfg.numbers(*e, "lyapunov.q");
        for (double q : s.lyapunov.q)
            if (q < 1.0) cfg.fail(e->line, "lyapunov.q: exponents must be >= 1");
    }
    if (const Entry* e = cfg.find("lyapunov", "Lambda")) {
        s.lyapunov.rate = cfg.numbers(*e, "lyapunov.Lambda");
        for (double r : s.lyapunov.rate)
            if (r < 1.0) cfg.fail(e->line, "lyapunov.Lambda: rates must be >= 1");
    }
    std::string gamma = cfg.text("lyapunov", "Gamma", "auto");
    if (gamma == "auto") {
        s.lyapunov.gamma_auto = true;
    } else {
        s.lyapunov.gamma_auto = false;
        try {
            s.lyapunov.gamma = std::stod(gamma);
        } catch (const std::exception&) {
            cfg.fail("lyapunov.Gamma: expected a number or 'auto'");
        }
        if (s.lyapunov.gamma < 1.0) cfg.fail("lyapunov.Gamma: must be >= 1");
    }

    // run
    s.horizon = cfg.number("run", "horizon", 1.0);
    if (!(s.horizon > 0.0)) cfg.fail("run.horizon: must be positive");
    s.record_every = cfg.number("run", "cadence", 0.0);
    s.output_dir = cfg.text("run", "output", "out");
    s.seed = static_cast<std::uint64_t>(cfg.integer("run", "seed", 1));

    // reject unrecognized keys so typos do not silently fall back to defaults
    for (const auto& [name, entries] : cfg.sections)
        for (const auto& [key, entry] : entries)
            if (!entry.used) cfg.fail(entry.line, "unknown key '" + key + "' in [" + name + "]");

    if (!cfg.errors.empty()) throw SchemaError(cfg.errors);
    return s;
}

} // namespace

Scenario parse_scenario_text(const std::string& text, const std::string& origin) {
    std::istringstream is(text);
    ConfigFile cfg = read_config(is, origin);
    return build_scenario(cfg);
}

Scenario parse_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open scenario file: " + path);
    ConfigFile cfg = read_config(in, path);
    return build_scenario(cfg);
}

std::string serialize_scenario(const Scenario& s) {
    std::ostringstream os;
    const int n = s.k + s.m;
    os << "[system]\n";
    os << "k = " << s.k << "\n";
    os << "m = " << s.m << "\n";
    os << "y_max = " << fmt(s.y_max) << "\n";

    os << "\n[speeds]\n";
    for (int c = 0; c < n; ++c) {
        os << "lambda." << c + 1 << " =";
        const auto& coeffs = s.speeds[static_cast<std::size_t>(c)].base.coefficients();
        if (coeffs.empty()) os << " 0";
        for (double v : coeffs) os << " " << fmt(v);
        os << "\n";
    }
    for (int c = 0; c < n; ++c) {
        const auto& coup = s.speeds[static_cast<std::size_t>(c)].state_coupling;
        if (coup.empty()) continue;
        os << "coupling." << c + 1 << " =";
        for (double v : coup) os << " " << fmt(v);
        os << "\n";
    }

    os << "\n[boundary]\n";
    const Eigen::MatrixXd* B = nullptr;
    const NonlinearCoupling* nc = std::get_if<NonlinearCoupling>(&s.coupling);
    if (nc) {
        os << "mode = nonlinear\n";
        B = &nc->linear;
    } else {
        os << "mode = linear\n";
        B = &std::get<LinearCoupling>(s.coupling).B;
    }
    for (int i = 0; i < s.k; ++i) {
        os << "row." << i + 1 << " =";
        for (int j = 0; j < s.m; ++j) os << " " << fmt((*B)(i, j));
        os << "\n";
    }
    if (nc) {
        for (int i = 0; i < s.k; ++i) {
            if (i >= static_cast<int>(nc->quad.size()) || nc->quad[static_cast<std::size_t>(i)].empty())
                continue;
            os << "quad." << i + 1 << " =";
            for (const auto& t : nc->quad[static_cast<std::size_t>(i)])
                os << " " << t.j + 1 << " " << t.l + 1 << " " << fmt(t.coeff);
            os << "\n";
        }
    }

    os << "\n[initial]\n";
    for (int c = 0; c < n; ++c) {
        const auto& comp = s.initial.components[static_cast<std::size_t>(c)];
        if (!comp.sine.empty()) {
            os << "sine." << c + 1 << " =";
            for (double v : comp.sine) os << " " << fmt(v);
            os << "\n";
        }
        if (!comp.poly.is_zero()) {
            os << "poly." << c + 1 << " =";
            for (double v : comp.poly.coefficients()) os << " " << fmt(v);
            os << "\n";
        }
        if (!comp.raw.empty()) {
            os << "raw." << c + 1 << " =";
            for (double v : comp.raw) os << " " << fmt(v);
            os << "\n";
        }
    }

    os << "\n[feedback]\n";
    os << "mode = " << (s.feedback == FeedbackMode::Nonlinear ? "nonlinear" : "linear") << "\n";
    os << "sampling = " << (s.sampling == SamplingMode::Frozen ? "frozen" : "local") << "\n";
    if (s.delta > 0.0) os << "delta = " << fmt(s.delta) << "\n";

    os << "\n[numerics]\n";
    os << "nx = " << s.nx << "\n";
    os << "cfl = " << fmt(s.cfl) << "\n";
    os << "solver = " << (s.solver == SolverMode::ExactAdvection ? "exact" : "upwind") << "\n";

    os << "\n[lyapunov]\n";
    os << "q =";
    for (double q : s.lyapunov.q) os << " " << fmt(q);
    os << "\nLambda =";
    for (double r : s.lyapunov.rate) os << " " << fmt(r);
    os << "\nGamma = " << (s.lyapunov.gamma_auto ? std::string("auto") : fmt(s.lyapunov.gamma))
       << "\n";

    os << "\n[run]\n";
    os << "horizon = " << fmt(s.horizon) << "\n";
    os << "cadence = " << fmt(s.record_every) << "\n";
    os << "tol_compat = " << fmt(s.tol_compat) << "\n";
    os << "output = " << s.output_dir << "\n";
    os << "seed = " << s.seed << "\n";
    return os.str();
}

namespace {

bool coupling_equal(const BoundaryCoupling& a, const BoundaryCoupling& b) {
    const auto* la = std::get_if<LinearCoupling>(&a);
    const auto* lb = std::get_if<LinearCoupling>(&b);
    if (la && lb)
        return la->B.rows() == lb->B.rows() && la->B.cols() == lb->B.cols() &&
               (la->B.array() == lb->B.array()).all();
    const auto* na = std::get_if<NonlinearCoupling>(&a);
    const auto* nb = std::get_if<NonlinearCoupling>(&b);
    if (na && nb)
        return na->linear.rows() == nb->linear.rows() &&
               na->linear.cols() == nb->linear.cols() &&
               (na->linear.array() == nb->linear.array()).all() && na->quad == nb->quad;
    return false;
}

} // namespace

bool Scenario::operator==(const Scenario& o) const {
    return k == o.k && m == o.m && speeds == o.speeds && coupling_equal(coupling, o.coupling) &&
           initial == o.initial && feedback == o.feedback && sampling == o.sampling &&
           nx == o.nx && cfl == o.cfl && solver == o.solver && lyapunov == o.lyapunov &&
           horizon == o.horizon && delta == o.delta && y_max == o.y_max &&
           tol_compat == o.tol_compat && record_every == o.record_every &&
           output_dir == o.output_dir && seed == o.seed;
}

FeedbackLaw Scenario::make_law(const HyperbolicSystem& sys) const {
    FeedbackLaw law;
    if (sys.has_linear_coupling())
        law = synthesize_linear(sys.coupling_matrix_at_zero(), k, m);
    else
        law = synthesize_nonlinear(std::get<NonlinearCoupling>(sys.coupling()), k, m);
    law.mode = feedback;
    law.attach_sample_positions(sys);
    if (feedback == FeedbackMode::Nonlinear) {
        StateGrid g = initial.sample(nx);
        law.attach_ramps(build_ramps(g, sys, delta), delta);
    }
    return law;
}

SimOptions Scenario::sim_options() const {
    SimOptions o;
    o.nx = nx;
    o.cfl = cfl;
    o.mode = solver;
    o.sampling = sampling;
    o.q = lyapunov.q.empty() ? 2.0 : lyapunov.q.front();
    o.record_every = record_every;
    o.y_max = y_max;
    return o;
}

void write_trace_csv(const std::string& path, const SimulationTrace& trace) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write trace file: " + path);
    out << "t,l1,l2,lq,linf,lyapunov,vnorm\n";
    for (const auto& r : trace.rows)
        out << fmt(r.t) << "," << fmt(r.l1) << "," << fmt(r.l2) << "," << fmt(r.lq) << ","
            << fmt(r.linf) << "," << fmt(r.lyapunov) << "," << fmt(r.vnorm) << "\n";
}

void write_snapshot_csv(const std::string& path, const StateGrid& state) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write snapshot file: " + path);
    out << "x";
    for (int c = 0; c < state.n(); ++c) out << ",w" << c + 1;
    out << "\n";
    for (int p = 0; p < state.nx(); ++p) {
        out << fmt(state.x(p));
        for (int c = 0; c < state.n(); ++c) out << "," << fmt(state.values(c, p));
        out << "\n";
    }
}

std::string resolve_output_dir(const Scenario& s) {
    if (const char* env = std::getenv("HYPSTAB_OUTPUT_DIR")) return env;
    return s.output_dir;
}

SimulationTrace run_with_lyapunov(const HyperbolicSystem& sys, const FeedbackLaw& law,
                                  const Scenario& s, double q, double rate, double gamma,
                                  int nx, SolverMode mode,
                                  std::vector<double> snapshot_times) {
    SimOptions opts = s.sim_options();
    opts.q = q;
    opts.nx = nx;
    opts.mode = mode;
    opts.snapshot_times = std::move(snapshot_times);

    LyapunovWeights w = build_weights(sys, q, rate, gamma, nx);
    auto lyap = std::make_shared<LyapunovEvaluator>(sys, law, w, nx);

    LyapunovWeights unit;
    unit.q = q;
    unit.rate = rate;
    unit.gamma = 1.0;
    unit.p = Eigen::MatrixXd::Ones(sys.n(), nx);
    auto vn = std::make_shared<LyapunovEvaluator>(sys, law, unit, nx);

    bool quasi = sys.is_quasilinear();
    TraceHooks hooks;
    hooks.lyapunov = [lyap, quasi](const StateGrid& g) {
        return quasi ? lyap->total(g) : lyap->value(g);
    };
    hooks.vnorm = [vn, q](const StateGrid& g) { return std::pow(vn->value(g), 1.0 / q); };

    return simulate(sys, law, s.initial, s.horizon, opts, hooks);
}

} // namespace hypstab
