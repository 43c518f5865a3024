/**
 * @file cli.hpp
 * @brief Experiment configs, command dispatch and CSV output for the gexpect tool
 *
 * Exit codes: 0 ok, 1 invalid config or input, 2 numeric failure, 3 a property,
 * axiom or identity check failed.
 */

#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "gexpect/error.hpp"
#include "gexpect/expectation.hpp"
#include "gexpect/gdsl.hpp"
#include "gexpect/model.hpp"
#include "gexpect/parallel.hpp"
#include "gexpect/properties.hpp"
#include "gexpect/random.hpp"
#include "gexpect/representation.hpp"
#include "gexpect/risk.hpp"

namespace gexpect::cli {

using json = nlohmann::json;

enum ExitCode : int { ok = 0, invalid = 1, numeric = 2, check_failed = 3 };

// ---------------------------------------------------------------------------
// CSV

/// RFC-4180 fields, LF line endings, 17 significant digits. The last column is the config hash.
class Csv {
public:
    Csv(std::vector<std::string> header, std::string hash) : width_(header.size()), hash_(std::move(hash)) {
        header.emplace_back("config_hash");
        append(header);
    }

    Csv& row(std::vector<std::string> cells) {
        if (cells.size() != width_) throw PreconditionError("csv: row width does not match header");
        cells.push_back(hash_);
        append(cells);
        return *this;
    }

    const std::string& str() const noexcept { return text_; }

    static std::string num(double v) {
        if (std::isnan(v)) return "nan";
        if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return buf;
    }
    static std::string num(std::size_t v) { return std::to_string(v); }
    static std::string flag(bool b) { return b ? "true" : "false"; }

    static std::string field(const std::string& s) {
        if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
        std::string out = "\"";
        for (char c : s) {
            if (c == '"') out += '"';
            out += c;
        }
        return out + "\"";
    }

private:
    void append(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) text_ += ',';
            text_ += field(cells[i]);
        }
        text_ += '\n';
    }

    std::size_t width_;
    std::string hash_;
    std::string text_;
};

// ---------------------------------------------------------------------------
// Config

struct Point {
    double y = 0.0;
    std::vector<double> z;
};

struct ExperimentConfig {
    std::string command;
    std::string generator;
    std::size_t d = 1;
    double K = 0.0;
    std::vector<std::string> claims;
    double T = 1.0;
    std::size_t N = 0;
    Method method = Method::lattice;
    Mode mode = Mode::strict;
    std::size_t M = 100000;
    int degree = 3;
    int picard_iters = 3;
    std::uint64_t seed = 42;
    std::size_t assumption_samples = kDefaultAssumptionSamples;
    double tol_operator = 1e-9;
    double tol_generator = 1e-9;
    double tol_equivalence = 1e-6;
    double tol_recovery = 1e-3;
    std::string output = ".";

    std::vector<std::size_t> converge_n;
    std::optional<double> oracle;

    double recover_t = 0.0;
    std::vector<double> eps;
    std::size_t steps_per_eps = 64;
    std::vector<Point> points;
    std::size_t random_points = 0;
    double point_range = 2.0;

    std::vector<Equivalence> theorems;
    std::vector<double> constants;
    std::vector<double> alphas;
    std::vector<double> lambdas;
    std::size_t generator_samples = 10000;

    std::string expect;
};

namespace detail {

inline std::string join(const std::string& ptr, const std::string& key) { return ptr + "/" + key; }

inline void allow_only(const json& obj, const std::string& ptr, std::initializer_list<const char*> keys) {
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [k, v] : obj.items())
        if (!allowed.count(k)) throw ConfigError(join(ptr, k), "unknown field");
}

inline const json& object(const json& j, const std::string& ptr) {
    if (!j.is_object()) throw ConfigError(ptr.empty() ? "/" : ptr, "expected an object");
    return j;
}

inline double number(const json& j, const std::string& ptr) {
    if (!j.is_number()) throw ConfigError(ptr, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw ConfigError(ptr, "expected a finite number");
    return v;
}

inline std::uint64_t unsigned_int(const json& j, const std::string& ptr) {
    if (!j.is_number_integer() || (!j.is_number_unsigned() && j.get<std::int64_t>() < 0))
        throw ConfigError(ptr, "expected a non-negative integer");
    return j.get<std::uint64_t>();
}

inline std::string text(const json& j, const std::string& ptr) {
    if (!j.is_string()) throw ConfigError(ptr, "expected a string");
    return j.get<std::string>();
}

inline std::vector<double> numbers(const json& j, const std::string& ptr) {
    if (!j.is_array()) throw ConfigError(ptr, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], join(ptr, std::to_string(i))));
    return out;
}

template <class T>
T choice(const json& j, const std::string& ptr, const std::vector<std::pair<const char*, T>>& options) {
    const std::string s = text(j, ptr);
    for (const auto& [name, v] : options)
        if (s == name) return v;
    std::string list;
    for (const auto& [name, v] : options) list += (list.empty() ? "" : ", ") + std::string(name);
    throw ConfigError(ptr, "'" + s + "' is not one of: " + list);
}

inline void require(const json& obj, const std::string& ptr, const char* key) {
    if (!obj.contains(key)) throw ConfigError(join(ptr, key), "required field is missing");
}

inline void check_expression(const std::string& src, gdsl::Context ctx, std::size_t d, const std::string& ptr) {
    try {
        (void)gdsl::Expression::parse(src, ctx, d);
    } catch (const ParseError& e) {
        throw ConfigError(ptr, e.what());
    }
}

} // namespace detail

inline const std::vector<std::pair<const char*, Equivalence>>& theorem_names() {
    static const std::vector<std::pair<const char*, Equivalence>> names{
        {"translation_invariance", Equivalence::translation_invariance},
        {"convexity", Equivalence::convexity},
        {"subadditivity", Equivalence::subadditivity},
        {"positive_homogeneity", Equivalence::positive_homogeneity},
    };
    return names;
}

/// Validates `j` and fills an ExperimentConfig. Errors carry JSON-pointer paths.
inline ExperimentConfig parse_config(const json& j) {
    using namespace detail;
    object(j, "");
    allow_only(j, "", {"command", "generator", "claim", "claims", "grid", "method", "mode", "lsmc", "seed",
                       "assumption_samples", "tolerances", "output", "converge", "recover", "properties", "expect"});
    ExperimentConfig c;
    require(j, "", "command");
    c.command = choice<std::string>(j["command"], "/command",
                                    {{"price", "price"},
                                     {"recover", "recover"},
                                     {"check-properties", "check-properties"},
                                     {"classify-risk", "classify-risk"},
                                     {"converge", "converge"},
                                     {"equivalence", "equivalence"}});

    require(j, "", "generator");
    const json& gen = object(j["generator"], "/generator");
    allow_only(gen, "/generator", {"expression", "d", "K"});
    require(gen, "/generator", "expression");
    require(gen, "/generator", "K");
    c.generator = text(gen["expression"], "/generator/expression");
    if (gen.contains("d")) {
        c.d = unsigned_int(gen["d"], "/generator/d");
        if (c.d < 1 || c.d > 16) throw ConfigError("/generator/d", "must be between 1 and 16");
    }
    c.K = number(gen["K"], "/generator/K");
    if (c.K < 0.0) throw ConfigError("/generator/K", "must be >= 0");
    check_expression(c.generator, gdsl::Context::generator, c.d, "/generator/expression");

    if (j.contains("claim") && j.contains("claims")) throw ConfigError("/claim", "give either claim or claims");
    if (j.contains("claim")) c.claims.push_back(text(j["claim"], "/claim"));
    if (j.contains("claims")) {
        if (!j["claims"].is_array()) throw ConfigError("/claims", "expected an array of strings");
        for (std::size_t i = 0; i < j["claims"].size(); ++i)
            c.claims.push_back(text(j["claims"][i], "/claims/" + std::to_string(i)));
    }
    for (std::size_t i = 0; i < c.claims.size(); ++i)
        check_expression(c.claims[i], gdsl::Context::claim, c.d,
                         j.contains("claim") ? "/claim" : "/claims/" + std::to_string(i));

    if (j.contains("grid")) {
        const json& grid = object(j["grid"], "/grid");
        allow_only(grid, "/grid", {"T", "N"});
        if (grid.contains("T")) c.T = number(grid["T"], "/grid/T");
        if (!(c.T > 0.0)) throw ConfigError("/grid/T", "must be > 0");
        if (grid.contains("N")) {
            c.N = unsigned_int(grid["N"], "/grid/N");
            if (c.N < 1) throw ConfigError("/grid/N", "must be >= 1");
        }
    }
    if (j.contains("method"))
        c.method = choice<Method>(j["method"], "/method", {{"lattice", Method::lattice}, {"lsmc", Method::lsmc}});
    if (j.contains("mode")) c.mode = choice<Mode>(j["mode"], "/mode", {{"strict", Mode::strict}, {"raw", Mode::raw}});
    if (j.contains("lsmc")) {
        const json& l = object(j["lsmc"], "/lsmc");
        allow_only(l, "/lsmc", {"M", "degree", "picard_iters"});
        if (l.contains("M")) c.M = unsigned_int(l["M"], "/lsmc/M");
        if (c.M < 2) throw ConfigError("/lsmc/M", "must be >= 2");
        if (l.contains("degree")) c.degree = static_cast<int>(unsigned_int(l["degree"], "/lsmc/degree"));
        if (c.degree > 8) throw ConfigError("/lsmc/degree", "must be <= 8");
        if (l.contains("picard_iters"))
            c.picard_iters = static_cast<int>(unsigned_int(l["picard_iters"], "/lsmc/picard_iters"));
        if (c.picard_iters < 1) throw ConfigError("/lsmc/picard_iters", "must be >= 1");
    }
    if (j.contains("seed")) c.seed = unsigned_int(j["seed"], "/seed");
    if (j.contains("assumption_samples")) {
        c.assumption_samples = unsigned_int(j["assumption_samples"], "/assumption_samples");
        if (c.assumption_samples < 1) throw ConfigError("/assumption_samples", "must be >= 1");
    }
    if (c.method == Method::lsmc) c.tol_operator = -1.0;
    if (j.contains("tolerances")) {
        const json& t = object(j["tolerances"], "/tolerances");
        allow_only(t, "/tolerances", {"operator", "generator", "equivalence", "recovery"});
        if (t.contains("operator")) c.tol_operator = number(t["operator"], "/tolerances/operator");
        if (t.contains("generator")) c.tol_generator = number(t["generator"], "/tolerances/generator");
        if (t.contains("equivalence")) c.tol_equivalence = number(t["equivalence"], "/tolerances/equivalence");
        if (t.contains("recovery")) c.tol_recovery = number(t["recovery"], "/tolerances/recovery");
        for (const char* k : {"generator", "equivalence", "recovery"})
            if (t.contains(k) && !(t[k].get<double>() > 0.0))
                throw ConfigError(std::string("/tolerances/") + k, "must be > 0");
    }
    if (j.contains("output")) c.output = text(j["output"], "/output");

    if (j.contains("converge")) {
        const json& cv = object(j["converge"], "/converge");
        allow_only(cv, "/converge", {"N", "oracle"});
        if (cv.contains("N")) {
            if (!cv["N"].is_array()) throw ConfigError("/converge/N", "expected an array of step counts");
            for (std::size_t i = 0; i < cv["N"].size(); ++i) {
                const auto n = unsigned_int(cv["N"][i], "/converge/N/" + std::to_string(i));
                if (n < 1) throw ConfigError("/converge/N/" + std::to_string(i), "must be >= 1");
                c.converge_n.push_back(n);
            }
        }
        if (cv.contains("oracle")) c.oracle = number(cv["oracle"], "/converge/oracle");
    }
    if (j.contains("recover")) {
        const json& r = object(j["recover"], "/recover");
        allow_only(r, "/recover", {"t", "eps", "steps_per_eps", "points", "random_points", "range"});
        if (r.contains("t")) c.recover_t = number(r["t"], "/recover/t");
        if (r.contains("eps")) c.eps = numbers(r["eps"], "/recover/eps");
        if (r.contains("steps_per_eps")) c.steps_per_eps = unsigned_int(r["steps_per_eps"], "/recover/steps_per_eps");
        if (c.steps_per_eps < 1) throw ConfigError("/recover/steps_per_eps", "must be >= 1");
        if (r.contains("random_points")) c.random_points = unsigned_int(r["random_points"], "/recover/random_points");
        if (r.contains("range")) c.point_range = number(r["range"], "/recover/range");
        if (!(c.point_range > 0.0)) throw ConfigError("/recover/range", "must be > 0");
        if (r.contains("points")) {
            if (!r["points"].is_array()) throw ConfigError("/recover/points", "expected an array");
            for (std::size_t i = 0; i < r["points"].size(); ++i) {
                const std::string p = "/recover/points/" + std::to_string(i);
                const json& pt = object(r["points"][i], p);
                allow_only(pt, p, {"y", "z"});
                require(pt, p, "y");
                require(pt, p, "z");
                Point q;
                q.y = number(pt["y"], p + "/y");
                q.z = pt["z"].is_number() ? std::vector<double>{number(pt["z"], p + "/z")} : numbers(pt["z"], p + "/z");
                if (q.z.size() != c.d)
                    throw ConfigError(p + "/z", "expected " + std::to_string(c.d) + " component(s)");
                c.points.push_back(std::move(q));
            }
        }
    }
    if (j.contains("properties")) {
        const json& p = object(j["properties"], "/properties");
        allow_only(p, "/properties", {"theorems", "constants", "alphas", "lambdas", "generator_samples"});
        if (p.contains("theorems")) {
            if (!p["theorems"].is_array()) throw ConfigError("/properties/theorems", "expected an array");
            for (std::size_t i = 0; i < p["theorems"].size(); ++i)
                c.theorems.push_back(choice<Equivalence>(p["theorems"][i], "/properties/theorems/" + std::to_string(i),
                                                         theorem_names()));
        }
        if (p.contains("constants")) c.constants = numbers(p["constants"], "/properties/constants");
        if (p.contains("alphas")) c.alphas = numbers(p["alphas"], "/properties/alphas");
        if (p.contains("lambdas")) c.lambdas = numbers(p["lambdas"], "/properties/lambdas");
        for (std::size_t i = 0; i < c.alphas.size(); ++i)
            if (c.alphas[i] < 0.0 || c.alphas[i] > 1.0)
                throw ConfigError("/properties/alphas/" + std::to_string(i), "must lie in [0, 1]");
        for (std::size_t i = 0; i < c.lambdas.size(); ++i)
            if (c.lambdas[i] < 0.0) throw ConfigError("/properties/lambdas/" + std::to_string(i), "must be >= 0");
        if (p.contains("generator_samples"))
            c.generator_samples = unsigned_int(p["generator_samples"], "/properties/generator_samples");
        if (c.generator_samples < 1) throw ConfigError("/properties/generator_samples", "must be >= 1");
    }
    if (j.contains("expect")) {
        c.expect = choice<std::string>(j["expect"], "/expect",
                                       {{"coherent", "coherent"},
                                        {"convex, not coherent", "convex, not coherent"},
                                        {"monetary, not convex", "monetary, not convex"},
                                        {"not monetary", "not monetary"}});
    }

    // Command-specific requirements.
    const bool needs_claims = c.command == "price" || c.command == "converge";
    if (needs_claims && c.claims.empty()) throw ConfigError("/claims", "required for command '" + c.command + "'");
    const bool needs_n = c.command != "recover" && c.command != "equivalence" && c.command != "converge";
    if (needs_n && c.N == 0) throw ConfigError("/grid/N", "required for command '" + c.command + "'");
    if (c.command == "converge" && c.converge_n.size() < 2)
        throw ConfigError("/converge/N", "a convergence table needs at least two step counts");
    if ((c.command == "recover" || c.command == "equivalence") && c.points.empty() && c.random_points == 0)
        throw ConfigError("/recover/points", "give points or random_points");
    if (c.method == Method::lattice && c.d != 1)
        throw ConfigError("/generator/d", "the lattice method requires d = 1");
    return c;
}

/// FNV-1a (64 bit) of the canonical dump of `j` without the output path, as 16 hex digits.
inline std::string config_hash(json j) {
    if (j.is_object()) j.erase("output");
    const std::string canon = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : canon) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------
// Convergence table

struct ConvergencePoint {
    std::size_t N = 0;
    double value = 0.0;
};

/// Columns N, value, abs_error, ratio = error(N) / error(2N); error columns are empty without an oracle.
inline Csv emit_convergence_table(const std::string& claim, const std::vector<ConvergencePoint>& results,
                                  std::optional<double> oracle, const std::string& hash) {
    if (results.size() < 2) throw PreconditionError("convergence table: need at least two step counts");
    Csv csv({"claim", "N [steps]", "value [payoff units]", "abs_error [payoff units]", "ratio [1]"}, hash);
    for (const auto& r : results) {
        std::string err, ratio;
        if (oracle) {
            const double e = std::fabs(r.value - *oracle);
            err = Csv::num(e);
            for (const auto& q : results)
                if (q.N == 2 * r.N) ratio = Csv::num(e / std::fabs(q.value - *oracle));
        }
        csv.row({claim, Csv::num(r.N), Csv::num(r.value), err, ratio});
    }
    return csv;
}

// ---------------------------------------------------------------------------
// Commands

struct RunOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<unsigned> threads;
};

namespace detail {

struct Context {
    ExperimentConfig cfg;
    std::string hash;
    std::filesystem::path out;
    unsigned threads = 1;
    std::ostream& log;
};

inline GeneratorSpec make_generator(const ExperimentConfig& c) { return gdsl::parse_generator(c.generator, c.d, c.K); }

inline ExpectationOptions expectation_options(const Context& ctx) {
    ExpectationOptions o;
    o.method = ctx.cfg.method;
    o.mode = ctx.cfg.mode;
    o.paths = ctx.cfg.M;
    o.seed = ctx.cfg.seed;
    o.assumption_samples = ctx.cfg.assumption_samples;
    o.lsmc.degree = ctx.cfg.degree;
    o.lsmc.picard_iters = ctx.cfg.picard_iters;
    o.lsmc.threads = ctx.threads;
    return o;
}

inline void write(const Context& ctx, const std::string& name, const Csv& csv) {
    std::filesystem::create_directories(ctx.out);
    const auto path = ctx.out / name;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ResourceError("cannot open " + path.string() + " for writing");
    f << csv.str();
    if (!f) throw ResourceError("failed writing " + path.string());
    ctx.log << "wrote " << path.string() << "\n";
}

inline std::vector<std::string> z_header(std::size_t d) {
    std::vector<std::string> h;
    for (std::size_t k = 1; k <= d; ++k) h.push_back("z" + std::to_string(k) + " [1/sqrt(time)]");
    return h;
}

inline int run_price(Context& ctx) {
    const auto& c = ctx.cfg;
    const GExpectation op(make_generator(c), TimeGrid(c.T, c.N), expectation_options(ctx));
    for (const auto& w : op.warnings()) ctx.log << "warning: " << w << "\n";
    Csv csv({"claim", "method", "T [time]", "N [steps]", "value [payoff units]", "std_error [payoff units]"},
            ctx.hash);
    for (const auto& src : c.claims) {
        const auto r = op.evaluate(gdsl::parse_claim(src, c.d));
        csv.row({src, c.method == Method::lattice ? "lattice" : "lsmc", Csv::num(c.T), Csv::num(c.N),
                 Csv::num(r.value), Csv::num(r.error_estimate)});
        ctx.log << "E_g[" << src << "] = " << Csv::num(r.value) << "\n";
    }
    write(ctx, "price.csv", csv);
    return ok;
}

inline int run_converge(Context& ctx) {
    const auto& c = ctx.cfg;
    const auto g = make_generator(c);
    std::string text;
    for (const auto& src : c.claims) {
        const auto xi = gdsl::parse_claim(src, c.d);
        std::vector<ConvergencePoint> pts;
        for (std::size_t n : c.converge_n) {
            const GExpectation op(g, TimeGrid(c.T, n), expectation_options(ctx));
            pts.push_back({n, op.evaluate(xi).value});
            ctx.log << "N = " << n << ": " << Csv::num(pts.back().value) << "\n";
        }
        const std::string table = emit_convergence_table(src, pts, c.oracle, ctx.hash).str();
        // One header across claims.
        text += text.empty() ? table : table.substr(table.find('\n') + 1);
    }
    std::filesystem::create_directories(ctx.out);
    const auto path = ctx.out / "converge.csv";
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ResourceError("cannot open " + path.string() + " for writing");
    f << text;
    ctx.log << "wrote " << path.string() << "\n";
    return ok;
}

inline std::vector<Point> recovery_points(const ExperimentConfig& c) {
    std::vector<Point> pts = c.points;
    const random::CounterStream stream(c.seed, random::Domain::test_targets);
    for (std::size_t i = 0; i < c.random_points; ++i) {
        Point p;
        p.y = stream.uniform(i, 0, 0, -c.point_range, c.point_range);
        for (std::size_t k = 0; k < c.d; ++k)
            p.z.push_back(stream.uniform(i, 1, static_cast<std::uint32_t>(k), -c.point_range, c.point_range));
        pts.push_back(std::move(p));
    }
    return pts;
}

inline RecoveryOptions recovery_options(const Context& ctx) {
    RecoveryOptions o;
    o.horizon = ctx.cfg.T;
    o.steps_per_eps = ctx.cfg.steps_per_eps;
    o.method = ctx.cfg.method;
    o.paths = ctx.cfg.M;
    o.seed = ctx.cfg.seed;
    o.lsmc.degree = ctx.cfg.degree;
    o.lsmc.picard_iters = ctx.cfg.picard_iters;
    o.lsmc.threads = ctx.threads;
    return o;
}

inline void validate_generator(const Context& ctx, const GeneratorSpec& g) {
    const auto& c = ctx.cfg;
    const auto rep = validate_assumptions(g, SampleBox::for_grid(TimeGrid(c.T, 1)), c.assumption_samples, 1e-9, c.seed);
    if (!rep.lipschitz_pass) throw AssumptionError("Lipschitz bound falsified at " + rep.lipschitz_witness);
    if (!rep.zero_z_pass) {
        if (c.mode == Mode::strict) throw AssumptionError("g(t,y,0) = 0 falsified at " + rep.zero_z_witness);
        ctx.log << "warning: g(t,y,0) = 0 falsified at " << rep.zero_z_witness << "\n";
    }
}

inline int run_recover(Context& ctx) {
    const auto& c = ctx.cfg;
    const auto g = make_generator(c);
    validate_generator(ctx, g);
    const auto eps = c.eps.empty() ? default_eps_schedule(c.T) : c.eps;
    const auto opts = recovery_options(ctx);

    std::vector<std::string> head{"point", "t [time]", "y [payoff units]"};
    for (auto& h : z_header(c.d)) head.push_back(h);
    for (const char* h : {"g [payoff units/time]", "extrapolated [payoff units/time]", "abs_error [payoff units/time]",
                          "residual [payoff units/time]"})
        head.push_back(h);
    Csv summary(head, ctx.hash);
    Csv slopes({"point", "eps [time]", "slope [payoff units/time]", "node_l1_gap [payoff units/time]"}, ctx.hash);

    double worst = 0.0;
    const auto pts = recovery_points(c);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto& p = pts[i];
        const auto r = recover_generator(g, p.y, p.z, c.recover_t, eps, opts);
        const double truth = g.checked(c.recover_t, p.y, p.z);
        const double err = std::fabs(r.extrapolated - truth);
        worst = std::max(worst, err);
        std::vector<std::string> row{Csv::num(i), Csv::num(c.recover_t), Csv::num(p.y)};
        for (double zk : p.z) row.push_back(Csv::num(zk));
        for (double v : {truth, r.extrapolated, err, r.residual}) row.push_back(Csv::num(v));
        summary.row(row);
        for (std::size_t k = 0; k < eps.size(); ++k)
            slopes.row({Csv::num(i), Csv::num(eps[k]), Csv::num(r.raw_slopes[k]),
                        r.node_l1_gap.empty() ? "" : Csv::num(r.node_l1_gap[k])});
    }
    write(ctx, "recover.csv", summary);
    write(ctx, "recover_slopes.csv", slopes);
    ctx.log << "max |extrapolated - g| = " << Csv::num(worst) << " (tol " << Csv::num(c.tol_recovery) << ")\n";
    return worst <= c.tol_recovery ? ok : check_failed;
}

inline int run_equivalence(Context& ctx) {
    const auto& c = ctx.cfg;
    const auto g = make_generator(c);
    validate_generator(ctx, g);
    const auto eps = c.eps.empty() ? default_eps_schedule(c.T) : c.eps;
    const auto opts = recovery_options(ctx);
    Csv csv({"point", "eps [time]", "slope [payoff units/time]", "local_average [payoff units/time]",
             "gap [payoff units/time]"},
            ctx.hash);
    double worst = 0.0;
    const auto pts = recovery_points(c);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto r = limit_equivalence_check(g, pts[i].y, pts[i].z, c.recover_t, eps, opts);
        for (std::size_t k = 0; k < eps.size(); ++k)
            csv.row({Csv::num(i), Csv::num(eps[k]), Csv::num(r.slopes[k]), Csv::num(r.averages[k]),
                     Csv::num(r.gaps[k])});
        worst = std::max(worst, r.max_gap);
    }
    write(ctx, "equivalence.csv", csv);
    ctx.log << "max gap = " << Csv::num(worst) << " (tol " << Csv::num(c.tol_equivalence) << ")\n";
    return worst <= c.tol_equivalence ? ok : check_failed;
}

inline PropertyConfig property_config(const Context& ctx) {
    const auto& c = ctx.cfg;
    PropertyConfig p;
    if (!c.claims.empty()) p.claims = c.claims;
    if (!c.constants.empty()) p.constants = c.constants;
    if (!c.alphas.empty()) p.alphas = c.alphas;
    if (!c.lambdas.empty()) p.lambdas = c.lambdas;
    p.tol = c.tol_operator;
    p.generator_tol = c.tol_generator;
    p.generator_samples = c.generator_samples;
    p.seed = c.seed;
    p.expectation = expectation_options(ctx);
    return p;
}

inline void report_rows(Csv& csv, const PropertyReport& r, bool witness_only) {
    if (witness_only || r.level == Level::generator) {
        if (r.instances_tested > 0)
            csv.row({to_string(r.property), to_string(r.level), r.witness, Csv::num(r.max_violation)});
        return;
    }
    for (const auto& i : r.instances) csv.row({to_string(r.property), to_string(r.level), i.instance, Csv::num(i.violation)});
}

inline int run_check_properties(Context& ctx) {
    const auto& c = ctx.cfg;
    const auto g = make_generator(c);
    const TimeGrid grid(c.T, c.N);
    validate_generator(ctx, g);
    const auto pc = property_config(ctx);
    std::vector<Equivalence> theorems = c.theorems;
    if (theorems.empty())
        for (const auto& [name, e] : theorem_names()) theorems.push_back(e);

    Csv rows({"property", "level", "instance", "violation [payoff units]"}, ctx.hash);
    Csv verdicts({"theorem", "generator_violation", "generator_pass", "operator_max_violation", "operator_pass",
                  "operator_witness", "status"},
                 ctx.hash);
    bool failed = false, errored = false;
    for (Equivalence th : theorems) {
        const auto v = theorem_verdict(th, g, grid, pc);
        if (v.operator_side.empty()) {
            // A constituent solve failed; the verdict is inconclusive.
            for (const auto& n : v.notes) ctx.log << "error: " << n << "\n";
            errored = true;
        }
        report_rows(rows, v.generator_side, true);
        double op_max = 0.0;
        bool op_pass = true;
        std::string witness;
        for (const auto& r : v.operator_side) {
            report_rows(rows, r, false);
            if (r.max_violation >= op_max) {
                op_max = r.max_violation;
                witness = r.witness;
            }
            op_pass = op_pass && r.pass;
        }
        verdicts.row({to_string(th), Csv::num(v.generator_side.max_violation), Csv::flag(v.generator_side.pass),
                      Csv::num(op_max), Csv::flag(op_pass), witness, to_string(v.status)});
        ctx.log << to_string(th) << ": generator " << (v.generator_side.pass ? "pass" : "fail") << ", operator "
                << (op_pass ? "pass" : "fail") << " (max " << Csv::num(op_max) << " at " << witness << "), "
                << to_string(v.status) << "\n";
        failed = failed || !v.generator_side.pass || !op_pass || v.status != Consistency::consistent;
    }
    write(ctx, "properties.csv", rows);
    write(ctx, "theorems.csv", verdicts);
    if (errored) return numeric;
    return failed ? check_failed : ok;
}

inline void write_classification(Context& ctx, const RiskClassification& rc) {
    Csv verdict({"route", "monetary", "convex", "coherent", "verdict"}, ctx.hash);
    verdict.row({"operator_tested", Csv::flag(rc.operator_route.monetary), Csv::flag(rc.operator_route.convex),
                 Csv::flag(rc.operator_route.coherent), describe(rc.operator_route)});
    verdict.row({"generator_implied", Csv::flag(rc.generator_route.monetary), Csv::flag(rc.generator_route.convex),
                 Csv::flag(rc.generator_route.coherent), describe(rc.generator_route)});
    Csv axioms({"axiom", "level", "instances", "max_violation [payoff units]", "tol", "pass", "witness"}, ctx.hash);
    for (const auto& r : rc.axiom_reports)
        axioms.row({to_string(r.property), to_string(r.level), Csv::num(r.instances_tested), Csv::num(r.max_violation),
                    Csv::num(r.tol), Csv::flag(r.pass), r.witness});
    const auto& gr = rc.generator_reports;
    for (const auto* r : {&gr.y_independence, &gr.convexity, &gr.subadditivity, &gr.homogeneity})
        axioms.row({to_string(r->property), to_string(r->level), Csv::num(r->instances_tested),
                    Csv::num(r->max_violation), Csv::num(r->tol), Csv::flag(r->pass), r->witness});
    write(ctx, "classification.csv", verdict);
    write(ctx, "risk_axioms.csv", axioms);
}

inline int run_classify_risk(Context& ctx) {
    const auto& c = ctx.cfg;
    const auto g = make_generator(c);
    validate_generator(ctx, g);
    try {
        const auto rc = classify(g, TimeGrid(c.T, c.N), property_config(ctx));
        write_classification(ctx, rc);
        const std::string verdict = describe(rc.operator_route);
        ctx.log << "rho^g: " << verdict << "\n";
        bool failed = !rc.dynamic_follows_static || !rc.terminal_identity.pass;
        if (!c.expect.empty() && c.expect != verdict) {
            ctx.log << "expected '" << c.expect << "'\n";
            failed = true;
        }
        return failed ? check_failed : ok;
    } catch (const ClassificationError& e) {
        write_classification(ctx, e.classification());
        ctx.log << "error: " << e.what() << "\n";
        return check_failed;
    }
}

} // namespace detail

/// Loads, validates and runs one experiment. Messages go to `log`.
inline int run(const RunOptions& ro, std::ostream& log) {
    try {
        std::ifstream in(ro.config_path, std::ios::binary);
        if (!in) throw ConfigError("/", "cannot read config file '" + ro.config_path + "'");
        json j;
        try {
            j = json::parse(in);
        } catch (const json::parse_error& e) {
            throw ConfigError("/", std::string("malformed JSON: ") + e.what());
        }
        if (ro.seed && j.is_object()) j["seed"] = *ro.seed;
        detail::Context ctx{parse_config(j), config_hash(j), {}, 1, log};
        ctx.out = ro.out_dir ? *ro.out_dir : ctx.cfg.output;
        ctx.threads = ro.threads ? *ro.threads : parallel::threads_from_env();
        if (ctx.threads < 1) throw ConfigError("--threads", "must be >= 1");

        const std::string& cmd = ctx.cfg.command;
        if (cmd == "price") return detail::run_price(ctx);
        if (cmd == "converge") return detail::run_converge(ctx);
        if (cmd == "recover") return detail::run_recover(ctx);
        if (cmd == "equivalence") return detail::run_equivalence(ctx);
        if (cmd == "check-properties") return detail::run_check_properties(ctx);
        return detail::run_classify_risk(ctx);
    } catch (const ConfigError& e) {
        log << "error: invalid config: " << e.what() << "\n";
        return invalid;
    } catch (const ParseError& e) {
        log << "error: " << e.what() << "\n";
        return invalid;
    } catch (const PreconditionError& e) {
        log << "error: " << e.what() << "\n";
        return invalid;
    } catch (const AssumptionError& e) {
        log << "error: " << e.what() << "\n";
        return invalid;
    } catch (const Error& e) {
        log << "error: " << e.what() << "\n";
        return numeric;
    } catch (const std::exception& e) {
        log << "error: " << e.what() << "\n";
        return numeric;
    }
}

} // namespace gexpect::cli
