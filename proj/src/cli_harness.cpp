#include "perciso/cli_harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "perciso/cheeger.hpp"
#include "perciso/coarse_grain.hpp"
#include "perciso/errors.hpp"
#include "perciso/parallel.hpp"
#include "perciso/rng.hpp"
#include "perciso/surface_tension.hpp"
#include "perciso/wulff_geometry.hpp"

namespace perciso {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::map<std::string, std::set<std::string>>& known_keys() {
    static const std::map<std::string, std::set<std::string>> keys = {
        {"sample", {"p", "d", "n", "pad"}},
        {"beta", {"p", "d", "scales", "samples", "directions", "half_width", "height", "policy"}},
        {"wulff", {"d", "norm", "table", "directions", "theta", "deficit_trials"}},
        {"cheeger",
         {"p", "d", "n", "pad", "method", "cap", "restarts", "proposals", "t0", "cooling", "cooling_steps",
          "translate_rate", "bfs_budget", "norm", "table", "directions", "carve_h", "eps", "witness"}},
        {"coarse", {"p", "d", "ks", "samples", "zhang_instances", "zhang_k", "zhang_radius", "zhang_half"}},
        {"converge",
         {"p", "d", "ns", "seeds", "table", "pad_fraction", "restarts", "proposals", "t0", "cooling",
          "cooling_steps", "translate_rate", "carve_h", "eps", "K", "coarse_step"}},
    };
    return keys;
}

const std::set<std::string> kCommonKeys = {"seed", "threads", "out"};

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorCode::ConfigError, msg); }

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool valid_name(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
    return true;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

double to_real(const std::string& key, const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        config_error("`" + key + "` is not a number: '" + s + "'");
    }
    if (used != s.size() || !std::isfinite(v)) config_error("`" + key + "` is not a finite number: '" + s + "'");
    return v;
}

std::int64_t to_integer(const std::string& key, const std::string& s) {
    std::size_t used = 0;
    long long v = 0;
    try {
        v = std::stoll(s, &used);
    } catch (const std::exception&) {
        config_error("`" + key + "` is not an integer: '" + s + "'");
    }
    if (used != s.size()) config_error("`" + key + "` is not an integer: '" + s + "'");
    return v;
}

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string hex64(std::uint64_t x) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
    return buf;
}

}  // namespace

ExperimentConfig ExperimentConfig::parse(const std::string& text, const std::string& kind) {
    auto kinds = known_keys();
    if (!kinds.count(kind)) config_error("unknown subcommand '" + kind + "'");
    ExperimentConfig cfg;
    cfg.kind_ = kind;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        std::string where = "line " + std::to_string(lineno) + ": ";
        if (t.front() == '[') {
            if (t.back() != ']') config_error(where + "unterminated section header");
            section = trim(t.substr(1, t.size() - 2));
            if (!kinds.count(section)) config_error(where + "unknown section [" + section + "]");
            continue;
        }
        auto eq = t.find('=');
        if (eq == std::string::npos) config_error(where + "expected key = value");
        std::string key = trim(t.substr(0, eq)), value = trim(t.substr(eq + 1));
        if (!valid_name(key)) config_error(where + "bad key '" + key + "'");
        if (value.empty()) config_error(where + "empty value for `" + key + "`");
        if (section.empty()) {
            bool known = kCommonKeys.count(key) > 0;
            for (const auto& [k, keys] : kinds) known = known || keys.count(key);
            if (!known) config_error(where + "unknown key `" + key + "`");
            if (!cfg.global_.emplace(key, value).second) config_error(where + "duplicate key `" + key + "`");
        } else {
            if (!kinds.at(section).count(key) && !kCommonKeys.count(key))
                config_error(where + "key `" + key + "` is not valid in [" + section + "]");
            if (section != kind) continue;
            if (!cfg.section_.emplace(key, value).second) config_error(where + "duplicate key `" + key + "`");
        }
    }
    return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path, const std::string& kind) {
    std::ifstream in(path, std::ios::binary);
    if (!in) config_error("cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), kind);
}

std::optional<std::string> ExperimentConfig::lookup(const std::string& key) const {
    if (auto it = section_.find(key); it != section_.end()) return it->second;
    if (auto it = global_.find(key); it != global_.end()) return it->second;
    return std::nullopt;
}

bool ExperimentConfig::has(const std::string& key) const { return lookup(key).has_value(); }

std::string ExperimentConfig::text(const std::string& key, const std::string& fallback) const {
    return lookup(key).value_or(fallback);
}

std::string ExperimentConfig::required_text(const std::string& key) const {
    auto v = lookup(key);
    if (!v) config_error("missing required key `" + key + "` for " + kind_);
    return *v;
}

double ExperimentConfig::real(const std::string& key, double fallback) const {
    auto v = lookup(key);
    return v ? to_real(key, *v) : fallback;
}

double ExperimentConfig::required_real(const std::string& key) const { return to_real(key, required_text(key)); }

std::int64_t ExperimentConfig::integer(const std::string& key, std::int64_t fallback) const {
    auto v = lookup(key);
    return v ? to_integer(key, *v) : fallback;
}

bool ExperimentConfig::flag(const std::string& key, bool fallback) const {
    auto v = lookup(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    config_error("`" + key + "` must be true or false");
}

std::vector<double> ExperimentConfig::reals(const std::string& key, const std::vector<double>& fallback) const {
    auto v = lookup(key);
    if (!v) return fallback;
    std::vector<double> out;
    for (const auto& s : split_list(*v)) out.push_back(to_real(key, s));
    return out;
}

std::vector<std::int64_t> ExperimentConfig::integers(const std::string& key,
                                                     const std::vector<std::int64_t>& fallback) const {
    auto v = lookup(key);
    if (!v) return fallback;
    std::vector<std::int64_t> out;
    for (const auto& s : split_list(*v)) out.push_back(to_integer(key, s));
    return out;
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
    section_.erase(key);
    global_[key] = value;
}

std::uint64_t ExperimentConfig::hash() const {
    std::map<std::string, std::string> eff(global_);
    for (const auto& [k, v] : section_) eff[k] = v;
    std::string canon = "kind=" + kind_ + "\n";
    for (const auto& [k, v] : eff)
        if (!kCommonKeys.count(k)) canon += k + "=" + v + "\n";
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canon) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string ExperimentConfig::hash_hex() const { return hex64(hash()); }

std::uint64_t ExperimentConfig::seed() const {
    auto v = lookup("seed");
    if (!v) return 1;
    std::size_t used = 0;
    unsigned long long s = 0;
    try {
        s = std::stoull(*v, &used);
    } catch (const std::exception&) {
        config_error("`seed` is not an unsigned integer");
    }
    if (used != v->size() || (*v)[0] == '-') config_error("`seed` is not an unsigned integer");
    return s;
}

int ExperimentConfig::threads() const {
    auto t = integer("threads", 0);
    if (t < 0 || t > 4096) config_error("`threads` must be in [0, 4096]");
    if (t == 0) t = std::max(1u, std::thread::hardware_concurrency());
    return static_cast<int>(t);
}

const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> names = {"sample", "beta", "wulff", "cheeger", "coarse", "converge"};
    return names;
}

namespace {

json meta(const ExperimentConfig& cfg) {
    return json{{"version", kArtifactVersion}, {"config_hash", cfg.hash_hex()}, {"seed", cfg.seed()},
                {"kind", cfg.kind()}};
}

std::string meta_line(const ExperimentConfig& cfg) {
    return std::string("perciso ") + kArtifactVersion + " kind=" + cfg.kind() + " config=" + cfg.hash_hex() +
           " seed=" + std::to_string(cfg.seed());
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

double probability(const ExperimentConfig& cfg, double fallback = -1.0) {
    double p = fallback < 0.0 ? cfg.required_real("p") : cfg.real("p", fallback);
    if (!(p >= 0.0 && p <= 1.0)) config_error("`p` must lie in [0, 1]");
    return p;
}

int dimension(const ExperimentConfig& cfg) {
    auto d = cfg.integer("d", 2);
    if (d != 2 && d != 3) config_error("`d` must be 2 or 3");
    return static_cast<int>(d);
}

std::int64_t positive(const ExperimentConfig& cfg, const std::string& key, std::int64_t fallback,
                      std::int64_t hi = 1 << 30) {
    auto v = cfg.integer(key, fallback);
    if (v < 1 || v > hi) config_error("`" + key + "` must be in [1, " + std::to_string(hi) + "]");
    return v;
}

std::vector<Vec> directions(const ExperimentConfig& cfg, int d, const std::string& fallback) {
    std::string s = cfg.text("directions", fallback);
    if (s == "default") return default_directions(d);
    if (s == "axes_diagonals") return axis_diagonal_directions(d);
    if (s.rfind("ring:", 0) == 0) {
        if (d != 2) config_error("`directions = ring:N` needs d = 2");
        auto m = to_integer("directions", s.substr(5));
        if (m < 3 || m > 100000) config_error("ring size must be in [3, 100000]");
        std::vector<Vec> out;
        for (std::int64_t i = 0; i < m; ++i) {
            double a = 2.0 * M_PI * static_cast<double>(i) / static_cast<double>(m);
            out.push_back({std::cos(a), std::sin(a)});
        }
        return out;
    }
    config_error("`directions` must be default, axes_diagonals or ring:N");
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot read '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// norm = l1 | euclidean | table
NormTable norm_from(const ExperimentConfig& cfg, int d, const std::string& fallback) {
    std::string norm = cfg.text("norm", cfg.has("table") ? "table" : fallback);
    if (norm == "l1") return exact_norm_table(d, directions(cfg, d, "axes_diagonals"), l1_norm, "l1");
    if (norm == "euclidean") return exact_norm_table(d, directions(cfg, d, "ring:360"), euclidean_norm, "euclidean");
    if (norm != "table") config_error("`norm` must be l1, euclidean or table");
    std::string path = cfg.required_text("table");
    NormTable t;
    try {
        t = parse_norm_table_csv(read_file(path));
    } catch (const Error& e) {
        config_error("norm table '" + path + "' unusable (" + e.what() + "); produce one with run_beta");
    }
    if (t.d != d) config_error("norm table dimension does not match `d`");
    return t;
}

json parsed(const std::string& s) { return json::parse(s); }

}  // namespace

RunResult run_sample(const ExperimentConfig& cfg) {
    const double p = probability(cfg);
    const int d = dimension(cfg);
    const int n = static_cast<int>(positive(cfg, "n", 16, d == 2 ? 4096 : 256));
    const auto pad = cfg.integer("pad", 0);
    if (pad < 0 || pad > 4096) config_error("`pad` must be in [0, 4096]");
    BoxSpec box(d, n, static_cast<int>(pad));
    Configuration c = sample_configuration(p, box, cfg.seed());
    ClusterLabeling lab = clusters(c);
    Subgraph cn = giant_cluster_in_box(c, lab);

    std::ostringstream bin;
    write_configuration(bin, c);
    bin << "\n# " << meta_line(cfg) << "\n";

    json j;
    j["meta"] = meta(cfg);
    j["configuration"] = parsed(configuration_json(c));
    j["giant_size"] = lab.giant_label == ClusterLabeling::kIsolated ? 0 : lab.size_of(lab.giant_label);
    j["cn_size"] = cn.size();
    j["theta_hat"] = static_cast<double>(cn.size()) / std::pow(2.0 * n + 1.0, d);

    RunResult r;
    r.files = {{"configuration.pcfg", bin.str()}, {"sample.json", dump(j)}};
    r.message = "sampled " + std::to_string(box.edge_count()) + " edges";
    return r;
}

RunResult run_beta(const ExperimentConfig& cfg) {
    const double p = probability(cfg);
    const int d = dimension(cfg);
    auto scales = cfg.reals("scales", {});
    if (scales.empty()) config_error("missing required key `scales` for beta");
    for (double s : scales)
        if (!(s >= 1.0 && s <= 4096.0)) config_error("`scales` entries must be in [1, 4096]");
    const int samples = static_cast<int>(positive(cfg, "samples", 20, 1000000));
    auto dirs = directions(cfg, d, "default");
    BetaOptions opts;
    opts.half_width = cfg.real("half_width", 1.0);
    opts.height = cfg.real("height", 1.0);
    if (!(opts.half_width > 0.0) || !(opts.height > 0.0)) config_error("`half_width` and `height` must be positive");
    std::string policy = cfg.text("policy", "desk");
    if (policy == "desk")
        opts.policy = SuitabilityPolicy::Desk;
    else if (policy == "literal")
        opts.policy = SuitabilityPolicy::Literal;
    else
        config_error("`policy` must be desk or literal");

    NormTable table;
    table.d = d;
    table.p = p;
    table.scales = scales;
    table.samples = samples;
    table.seed = cfg.seed();
    table.provenance = "monte-carlo";
    json detail = json::array();
    for (const Vec& v : dirs) {
        BetaEstimate est = estimate_beta(v, p, d, scales, samples, cfg.seed(), opts);
        json row{{"v", v}, {"suitable", est.suitable}, {"beta", est.beta}, {"ci", est.ci}, {"r_max", est.r_max}};
        json sc = json::array();
        for (const auto& s : est.scales)
            sc.push_back({{"r", s.r}, {"mean", s.mean}, {"stderr", s.stderr_}, {"suitable", s.suitable},
                          {"reason", s.reason}});
        row["scales"] = sc;
        detail.push_back(row);
        if (est.suitable) table.entries.push_back({v, est.beta, est.ci, est.r_max, samples});
    }
    RunResult r;
    if (table.entries.empty()) {
        r.exit_code = kExitUnsuitable;
        r.message = "every direction is unsuitable at every scale";
        return r;
    }
    table.finalize();
    SymmetryReport sym = symmetry_audit(table);
    json j = parsed(norm_table_json(table));
    j["meta"] = meta(cfg);
    j["directions"] = detail;
    j["symmetry"] = {{"violations", sym.violations}, {"missing_images", sym.missing_images},
                     {"max_diff", sym.max_diff}};
    r.files = {{"beta.csv", norm_table_csv(table, meta_line(cfg))}, {"beta.json", dump(j)}};
    r.message = std::to_string(table.entries.size()) + " of " + std::to_string(dirs.size()) + " directions suitable";
    return r;
}

RunResult run_wulff(const ExperimentConfig& cfg) {
    const int d = dimension(cfg);
    NormTable table = norm_from(cfg, d, "l1");
    const double theta = cfg.real("theta", 1.0);
    if (!(theta > 0.0 && theta <= 1.0)) config_error("`theta` must lie in (0, 1]");
    const auto trials = cfg.integer("deficit_trials", 0);
    if (trials < 0 || trials > 100000) config_error("`deficit_trials` must be in [0, 100000]");

    Polytope unit = wulff_crystal(table);
    Polytope W = dilate_to_volume(unit, wulff_volume_target(d));
    json j;
    j["meta"] = meta(cfg);
    j["unit_crystal"] = parsed(polytope_json(unit));
    j["crystal"] = parsed(polytope_json(W));
    j["energy"] = parsed(energy_report_json(energy_report(W, table, theta)));
    if (trials > 0) {
        DeficitReport rep = isoperimetric_deficit_test(table, static_cast<int>(trials), cfg.seed());
        j["deficit"] = {{"trials", rep.trials}, {"violations", rep.violations}, {"min_deficit", rep.min_deficit}};
    }
    std::string off = polytope_off(unit);
    off.insert(off.find('\n') + 1, "# " + meta_line(cfg) + "\n");
    std::string off_w = polytope_off(W);
    off_w.insert(off_w.find('\n') + 1, "# " + meta_line(cfg) + "\n");
    RunResult r;
    r.files = {{"unit_crystal.off", off}, {"crystal.off", off_w}, {"wulff.json", dump(j)}};
    r.message = std::to_string(unit.vertices.size()) + " vertices";
    return r;
}

namespace {

AnnealParams anneal_params(const ExperimentConfig& cfg, double t0_fallback) {
    AnnealParams ap;
    ap.restarts = static_cast<int>(positive(cfg, "restarts", ap.restarts, 4096));
    ap.proposals = cfg.integer("proposals", ap.proposals);
    if (ap.proposals < 0) config_error("`proposals` must be non-negative");
    ap.t0 = cfg.real("t0", t0_fallback);
    ap.cooling = cfg.real("cooling", ap.cooling);
    ap.cooling_steps = static_cast<int>(positive(cfg, "cooling_steps", ap.cooling_steps));
    ap.translate_rate = cfg.real("translate_rate", ap.translate_rate);
    ap.bfs_budget = static_cast<int>(positive(cfg, "bfs_budget", ap.bfs_budget));
    if (!(ap.t0 > 0.0)) config_error("`t0` must be positive");
    if (!(ap.cooling > 0.0 && ap.cooling <= 1.0)) config_error("`cooling` must lie in (0, 1]");
    if (!(ap.translate_rate >= 0.0 && ap.translate_rate <= 1.0)) config_error("`translate_rate` must lie in [0, 1]");
    return ap;
}

CarveParams carve_params(const ExperimentConfig& cfg, double& h) {
    CarveParams cp;
    cp.eps = cfg.real("eps", cp.eps);
    h = cfg.real("carve_h", 0.1);
    if (!(cp.eps > 0.0 && cp.eps < 0.5)) config_error("`eps` must lie in (0, 0.5)");
    if (!(h > 0.0 && h < 1.0)) config_error("`carve_h` must lie in (0, 1)");
    return cp;
}

}  // namespace

RunResult run_cheeger(const ExperimentConfig& cfg) {
    const double p = probability(cfg);
    const int d = dimension(cfg);
    const int n = static_cast<int>(positive(cfg, "n", 8, d == 2 ? 1024 : 128));
    const auto pad = cfg.integer("pad", std::max(1, n / 4));
    if (pad < 1 || pad > 4096) config_error("`pad` must be in [1, 4096]");
    std::string method = cfg.text("method", "anneal");
    if (method != "exact" && method != "anneal" && method != "carve")
        config_error("`method` must be exact, anneal or carve");
    const auto cap = cfg.integer("cap", -1);
    AnnealParams ap = anneal_params(cfg, 1.0);
    double h = 0.1;
    CarveParams cp = carve_params(cfg, h);
    const bool witness = cfg.flag("witness", true);
    std::optional<NormTable> table;
    if (method == "carve" || cfg.has("norm") || cfg.has("table")) table = norm_from(cfg, d, "l1");

    BoxSpec box(d, n, static_cast<int>(pad));
    auto prob = CheegerProblem::from_configuration(sample_configuration(p, box, cfg.seed()), cap);
    std::optional<Polytope> W;
    if (table) W = dilate_to_volume(wulff_crystal(*table), wulff_volume_target(d));

    CheegerSolution sol;
    if (method == "exact") {
        sol = cheeger_exact(prob);
    } else if (method == "carve") {
        sol = carve_polytope(prob, *W, h, cp);
    } else {
        if (W) {
            try {
                ap.seeds.push_back(carve_polytope(prob, *W, h, cp).witness);
            } catch (const Error&) {
            }
        }
        sol = cheeger_anneal(prob, ap, cfg.seed());
    }
    json j;
    j["meta"] = meta(cfg);
    j["solution"] = parsed(solution_json(sol, witness));
    j["problem"] = {{"p", p}, {"d", d}, {"n", n}, {"pad", pad}, {"cn_size", prob.cn.size()}, {"cap", prob.cap}};
    j["audit"] = audit_solution(prob, sol);
    j["n_phi"] = n * sol.value();
    RunResult r;
    r.files = {{"cheeger.json", dump(j)}};
    r.message = "phi = " + std::to_string(sol.num) + "/" + std::to_string(sol.den);
    return r;
}

RunResult run_coarse(const ExperimentConfig& cfg) {
    const double p = probability(cfg);
    const int d = dimension(cfg);
    auto ks64 = cfg.integers("ks", {});
    if (ks64.empty()) config_error("missing required key `ks` for coarse");
    std::vector<int> ks;
    for (auto k : ks64) {
        if (k < 1 || k > (d == 2 ? 256 : 32)) config_error("`ks` entries out of range");
        ks.push_back(static_cast<int>(k));
    }
    const int samples = static_cast<int>(positive(cfg, "samples", 100, 1000000));
    const auto zn = cfg.integer("zhang_instances", 0);
    if (zn < 0 || zn > 10000) config_error("`zhang_instances` must be in [0, 10000]");
    const int zk = static_cast<int>(positive(cfg, "zhang_k", 3, 64));
    const int zr = static_cast<int>(positive(cfg, "zhang_radius", 10, 1024));
    const int zh = static_cast<int>(positive(cfg, "zhang_half", 24, 2048));
    if (zn > 0 && zr + 1 + 3 * zk > zh) config_error("`zhang_half` too small for `zhang_radius` and `zhang_k`");

    auto rows = type_rate(p, d, ks, samples, cfg.seed());
    std::string csv = "# " + meta_line(cfg) + "\nk,samples,bad,rate,stderr\n";
    json jr = json::array();
    for (const auto& row : rows) {
        csv += std::to_string(row.k) + "," + std::to_string(row.samples) + "," + std::to_string(row.bad) + "," +
               fmt(row.rate) + "," + fmt(row.stderr_) + "\n";
        jr.push_back({{"k", row.k}, {"samples", row.samples}, {"bad", row.bad}, {"rate", row.rate},
                      {"stderr", row.stderr_}});
    }
    json j;
    j["meta"] = meta(cfg);
    j["p"] = p;
    j["d"] = d;
    j["type_rates"] = jr;
    if (zn > 0) {
        json zs = json::array();
        const std::uint64_t zseed = derive_seed(cfg.seed(), 0x7a68616e67ULL);
        for (std::int64_t i = 0; i < zn; ++i) {
            json z{{"instance", i}};
            try {
                BoxSpec box(d, zh / 2, zh - zh / 2);
                auto c = sample_configuration(p, box, derive_seed(zseed, static_cast<std::uint64_t>(i)));
                Subgraph G = giant_blob(c, zr);
                CubeGrid grid(d, zk);
                auto dec = zhang_decompose(c, G, grid);
                bool all_bad = std::all_of(dec.gamma_types.begin(), dec.gamma_types.end(), is_bad);
                bool within = std::includes(dec.a_cubes.begin(), dec.a_cubes.end(), dec.gamma_cubes.begin(),
                                            dec.gamma_cubes.end());
                z["status"] = "ok";
                z["g_size"] = G.size();
                z["separates"] = separates_from_hull(c, G, dec.gamma);
                z["gamma_within_a"] = within;
                z["gamma_star_connected"] = star_connected(dec.gamma_cubes, d);
                z["gamma_all_bad"] = all_bad;
                z["gamma_cubes"] = dec.gamma_cubes.size();
                z["gamma_edges"] = dec.gamma.size();
                z["ponds"] = dec.ponds.size();
            } catch (const Error& e) {
                z["status"] = error_name(e.code());
                z["error"] = e.what();
            }
            zs.push_back(z);
        }
        j["zhang"] = zs;
    }
    RunResult r;
    r.files = {{"type_rates.csv", csv}, {"coarse.json", dump(j)}};
    r.message = std::to_string(rows.size()) + " scales";
    return r;
}

RunResult run_converge(const ExperimentConfig& cfg, const std::string& table_root) {
    const double p = probability(cfg, 0.7);
    const int d = dimension(cfg);
    auto ns = cfg.integers("ns", {});
    if (ns.empty()) config_error("missing required key `ns` for converge");
    for (auto n : ns)
        if (n < 1 || n > (d == 2 ? 512 : 64)) config_error("`ns` entries out of range");
    const int seeds = static_cast<int>(positive(cfg, "seeds", 5, 10000));
    const double pad_fraction = cfg.real("pad_fraction", 0.25);
    if (!(pad_fraction >= 0.0 && pad_fraction <= 4.0)) config_error("`pad_fraction` must lie in [0, 4]");
    // t0 is given in units of 1 / cap, the size of a single-vertex change of phi
    AnnealParams ap = anneal_params(cfg, 0.1);
    double h = 0.1;
    CarveParams cp = carve_params(cfg, h);
    const int K = static_cast<int>(positive(cfg, "K", 5, 12));
    TranslationGrid grid;
    grid.coarse_step = static_cast<int>(positive(cfg, "coarse_step", grid.coarse_step, 1024));

    std::string path = cfg.text("table", (fs::path(table_root) / "beta" / "beta.csv").string());
    if (!fs::exists(path)) config_error("norm table '" + path + "' not found; produce it with run_beta (subcommand beta)");
    NormTable table;
    try {
        table = parse_norm_table_csv(read_file(path));
    } catch (const Error& e) {
        config_error("norm table '" + path + "' unusable (" + e.what() + "); produce it with run_beta");
    }
    if (table.d != d) config_error("norm table dimension does not match `d`");
    Polytope W;
    try {
        W = dilate_to_volume(wulff_crystal(table), wulff_volume_target(d));
    } catch (const Error& e) {
        config_error(std::string("norm table does not define a crystal: ") + e.what());
    }

    std::string csv = "# " + meta_line(cfg) +
                      "\nn,seed_index,status,cn_size,cap,phi_num,phi_den,n_phi,theta_hat,predicted,ratio,"
                      "l1_distance,d_distance,carve_seeded\n";
    json rows = json::array();
    std::map<std::int64_t, std::vector<double>> ratios, l1s, dds;
    int failures = 0, total = 0;
    for (auto n : ns) {
        for (int s = 0; s < seeds; ++s) {
            ++total;
            const std::uint64_t inst = derive_seed(derive_seed(cfg.seed(), static_cast<std::uint64_t>(n)), s);
            json row{{"n", n}, {"seed_index", s}};
            std::string line;
            try {
                BoxSpec box(d, static_cast<int>(n), std::max(1, static_cast<int>(std::lround(pad_fraction * n))));
                auto prob = CheegerProblem::from_configuration(sample_configuration(p, box, inst));
                const double theta = static_cast<double>(prob.cn.size()) / std::pow(2.0 * n + 1.0, d);
                const double predicted = continuum_conductance(W, table, theta);
                AnnealParams run = ap;
                run.t0 = ap.t0 / static_cast<double>(std::max<std::int64_t>(1, prob.cap));
                bool seeded = false;
                try {
                    run.seeds.push_back(carve_polytope(prob, W, h, cp).witness);
                    seeded = true;
                } catch (const Error&) {
                }
                CheegerSolution sol = cheeger_anneal(prob, run, inst);
                const double n_phi = static_cast<double>(n) * sol.value();
                const double ratio = n_phi / predicted;
                const double l1 = l1_shape_distance(sol.witness, prob, W, grid).value;
                const double dd = distance_to_wulff_set(empirical_measure(sol.witness, K), W, theta,
                                                        static_cast<int>(n), grid)
                                      .value;
                ratios[n].push_back(ratio);
                l1s[n].push_back(l1);
                dds[n].push_back(dd);
                row.update({{"status", "ok"}, {"cn_size", prob.cn.size()}, {"cap", prob.cap},
                            {"phi_num", sol.num}, {"phi_den", sol.den}, {"n_phi", n_phi}, {"theta_hat", theta},
                            {"predicted", predicted}, {"ratio", ratio}, {"l1_distance", l1}, {"d_distance", dd},
                            {"carve_seeded", seeded}});
                line = std::to_string(n) + "," + std::to_string(s) + ",ok," + std::to_string(prob.cn.size()) + "," +
                       std::to_string(prob.cap) + "," + std::to_string(sol.num) + "," + std::to_string(sol.den) +
                       "," + fmt(n_phi) + "," + fmt(theta) + "," + fmt(predicted) + "," + fmt(ratio) + "," +
                       fmt(l1) + "," + fmt(dd) + "," + (seeded ? "1" : "0");
            } catch (const Error& e) {
                ++failures;
                row.update({{"status", error_name(e.code())}, {"error", e.what()}});
                line = std::to_string(n) + "," + std::to_string(s) + "," + error_name(e.code()) + ",,,,,,,,,,,";
            }
            csv += line + "\n";
            rows.push_back(row);
        }
    }
    auto median = [](std::vector<double> v) {
        if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
        std::sort(v.begin(), v.end());
        std::size_t m = v.size() / 2;
        return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
    };
    json summary = json::array();
    for (auto n : ns) {
        json s{{"n", n}, {"runs", ratios[n].size()}};
        if (!ratios[n].empty()) {
            s["median_ratio"] = median(ratios[n]);
            s["min_ratio"] = *std::min_element(ratios[n].begin(), ratios[n].end());
            s["max_ratio"] = *std::max_element(ratios[n].begin(), ratios[n].end());
            s["median_l1_distance"] = median(l1s[n]);
            s["median_d_distance"] = median(dds[n]);
        }
        summary.push_back(s);
    }
    json j;
    j["meta"] = meta(cfg);
    j["p"] = p;
    j["d"] = d;
    j["table"] = {{"entries", table.entries.size()}, {"provenance", table.provenance}};
    j["crystal_energy"] = surface_energy(W, table);
    j["rows"] = rows;
    j["summary"] = summary;
    RunResult r;
    r.files = {{"converge.csv", csv}, {"converge.json", dump(j)}};
    r.message = std::to_string(total - failures) + " of " + std::to_string(total) + " runs succeeded";
    if (failures == total) r.exit_code = kExitAllFailed;
    return r;
}

std::string resolve_out_root(const std::string& flag, const ExperimentConfig& cfg) {
    if (!flag.empty()) return flag;
    if (cfg.has("out")) return cfg.text("out", "");
    if (const char* env = std::getenv("PERCISO_OUT"); env && *env) return env;
    return "perciso_out";
}

namespace {

void write_outputs(const fs::path& dir, const std::vector<OutputFile>& files) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create '" + dir.string() + "': " + ec.message());
    std::vector<fs::path> staged;
    for (const auto& f : files) {
        fs::path tmp = dir / (f.name + ".tmp");
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(f.content.data(), static_cast<std::streamsize>(f.content.size()));
        out.close();
        if (!out) {
            for (const auto& s : staged) fs::remove(s, ec);
            fs::remove(tmp, ec);
            throw Error(ErrorCode::IoError, "cannot write '" + tmp.string() + "'");
        }
        staged.push_back(tmp);
    }
    for (std::size_t i = 0; i < files.size(); ++i) fs::rename(staged[i], dir / files[i].name);
}

}  // namespace

RunResult execute(const Invocation& inv) {
    RunResult r;
    auto fail = [&](int code, const std::string& msg) {
        r.exit_code = code;
        r.message = msg;
        r.files.clear();
        return r;
    };
    if (std::find(subcommands().begin(), subcommands().end(), inv.kind) == subcommands().end())
        return fail(kExitConfig, "unknown subcommand '" + inv.kind + "'");
    std::string root;
    try {
        ExperimentConfig cfg = inv.config_path.empty() ? ExperimentConfig::parse("", inv.kind)
                                                       : ExperimentConfig::load(inv.config_path, inv.kind);
        if (inv.seed) cfg.set("seed", std::to_string(*inv.seed));
        if (inv.threads) cfg.set("threads", std::to_string(*inv.threads));
        cfg.seed();
        set_thread_count(cfg.threads());
        root = resolve_out_root(inv.out_root, cfg);
        if (inv.kind == "sample") r = run_sample(cfg);
        else if (inv.kind == "beta") r = run_beta(cfg);
        else if (inv.kind == "wulff") r = run_wulff(cfg);
        else if (inv.kind == "cheeger") r = run_cheeger(cfg);
        else if (inv.kind == "coarse") r = run_coarse(cfg);
        else r = run_converge(cfg, root);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ConfigError) return fail(kExitConfig, e.what());
        if (e.code() == ErrorCode::Unsuitable) return fail(kExitUnsuitable, e.what());
        return fail(kExitFailure, e.what());
    } catch (const std::exception& e) {
        return fail(kExitFailure, e.what());
    }
    if (r.exit_code == kExitConfig || r.files.empty()) return r;
    try {
        write_outputs(fs::path(root) / inv.kind, r.files);
    } catch (const std::exception& e) {
        return fail(kExitFailure, e.what());
    }
    return r;
}

}  // namespace perciso
