#include "eqforward/run_config.hpp"

#include <fstream>
#include <sstream>

#include "eqforward/errors.hpp"
#include "eqforward/util.hpp"
#include "eqforward/version.hpp"

namespace eqf {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& field, const std::string& why) {
    throw ConfigError(field + ": " + why);
}

double require_number(const json& j, const std::string& field) {
    if (!j.is_number()) fail(field, "expected a number");
    return j.get<double>();
}

std::string require_string(const json& j, const std::string& field) {
    if (!j.is_string()) fail(field, "expected a string");
    return j.get<std::string>();
}

}  // namespace

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string raw = buffer.str();

    json j;
    try {
        j = json::parse(raw);
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": invalid JSON: " + e.what());
    }

    RunConfig cfg;
    cfg.config_path = path;
    cfg.config_hash = fnv1a_hex(raw);

    if (!j.contains("scenarios")) fail("scenarios", "missing (path to the scenario file)");
    cfg.scenarios = require_string(j["scenarios"], "scenarios");
    cfg.allow_negative_spot = j.value("allow_negative_spot", false);

    if (j.contains("alpha")) {
        cfg.alpha_default = require_number(j["alpha"], "alpha");
        if (!(cfg.alpha_default >= 0.0 && cfg.alpha_default < 1.0))
            fail("alpha", "must lie in [0, 1), got " + format_sig12(cfg.alpha_default));
    }

    if (!j.contains("agents") || !j["agents"].is_array() || j["agents"].empty())
        fail("agents", "missing or empty agent list");
    int idx = 0;
    for (const json& ja : j["agents"]) {
        const std::string where = "agents[" + std::to_string(idx) + "]";
        AgentConfig a;
        if (!ja.contains("id")) fail(where + ".id", "missing");
        a.id = require_string(ja["id"], where + ".id");
        if (!ja.contains("kind")) fail(where + ".kind", "missing");
        a.kind = require_string(ja["kind"], where + ".kind");
        if (a.kind != "generator" && a.kind != "load" && a.kind != "trader")
            fail(where + ".kind", "must be generator|load|trader, got '" + a.kind + "'");
        if (ja.contains("lambda")) a.lambda = require_number(ja["lambda"], where + ".lambda");
        if (!(a.lambda >= 0.0 && a.lambda <= 1.0))
            fail(where + ".lambda", "must lie in [0, 1], got " + format_sig12(a.lambda));
        if (ja.contains("alpha")) {
            a.alpha = require_number(ja["alpha"], where + ".alpha");
            if (!(*a.alpha >= 0.0 && *a.alpha < 1.0))
                fail(where + ".alpha", "must lie in [0, 1), got " + format_sig12(*a.alpha));
        }
        if (ja.contains("profile")) a.profile = require_string(ja["profile"], where + ".profile");
        if (ja.contains("q_max")) {
            a.q_max = require_number(ja["q_max"], where + ".q_max");
            if (!(*a.q_max > 0.0)) fail(where + ".q_max", "must be > 0");
        }
        if ((a.kind == "generator" || a.kind == "load") && !a.profile)
            fail(where + ".profile", "missing (required for " + a.kind + ")");
        if (a.kind == "trader" && a.profile)
            fail(where + ".profile", "traders must not carry a profile");
        for (const AgentConfig& other : cfg.agents)
            if (other.id == a.id) fail(where + ".id", "duplicate agent id '" + a.id + "'");
        cfg.agents.push_back(std::move(a));
        ++idx;
    }

    if (!j.contains("contract") || !j["contract"].is_object())
        fail("contract", "missing object with delivery_periods and shape");
    const json& jc = j["contract"];
    if (!jc.contains("delivery_periods") || !jc["delivery_periods"].is_array())
        fail("contract.delivery_periods", "missing array");
    for (const json& v : jc["delivery_periods"]) {
        if (!v.is_number_integer()) fail("contract.delivery_periods", "expected integers");
        cfg.delivery_periods.push_back(v.get<int>());
    }
    if (jc.contains("shape")) {
        if (!jc["shape"].is_array()) fail("contract.shape", "expected array");
        for (const json& v : jc["shape"])
            cfg.shape.push_back(require_number(v, "contract.shape"));
    } else {
        cfg.shape.assign(cfg.delivery_periods.size(), 1.0);
    }

    if (j.contains("tree")) {
        const json& jt = j["tree"];
        TreeConfig tc;
        tc.cluster_stat = jt.value("cluster_stat", std::string("mean_spot"));
        if (tc.cluster_stat != "mean_spot" && tc.cluster_stat != "sum_spot")
            fail("tree.cluster_stat", "must be mean_spot|sum_spot");
        if (!jt.contains("stages") || !jt["stages"].is_array() || jt["stages"].empty())
            fail("tree.stages", "missing or empty");
        int sidx = 0;
        for (const json& js : jt["stages"]) {
            const std::string where = "tree.stages[" + std::to_string(sidx) + "]";
            TreeStageSpec st;
            if (!js.contains("periods") || !js["periods"].is_array() || js["periods"].empty())
                fail(where + ".periods", "missing or empty");
            for (const json& v : js["periods"]) {
                if (!v.is_number_integer()) fail(where + ".periods", "expected integers");
                st.periods.push_back(v.get<int>());
            }
            if (!js.contains("branching")) fail(where + ".branching", "missing");
            if (!js["branching"].is_number_integer() || js["branching"].get<int>() < 1)
                fail(where + ".branching", "must be an integer >= 1");
            st.branching = js["branching"].get<int>();
            tc.stages.push_back(std::move(st));
            ++sidx;
        }
        cfg.tree = std::move(tc);
    }

    if (j.contains("oracle")) {
        const json& jo = j["oracle"];
        if (jo.contains("p_lo")) cfg.oracle.p_lo = require_number(jo["p_lo"], "oracle.p_lo");
        if (jo.contains("p_hi")) cfg.oracle.p_hi = require_number(jo["p_hi"], "oracle.p_hi");
        if (jo.contains("tol")) cfg.oracle.tol = require_number(jo["tol"], "oracle.tol");
        if (!(cfg.oracle.tol > 0.0)) fail("oracle.tol", "must be > 0");
        if (!(cfg.oracle.p_hi >= cfg.oracle.p_lo)) fail("oracle", "needs p_lo <= p_hi");
    }

    if (j.contains("out_dir")) cfg.out_dir = require_string(j["out_dir"], "out_dir");
    return cfg;
}

std::filesystem::path RunConfig::resolve(const std::string& rel) const {
    const std::filesystem::path p(rel);
    if (p.is_absolute()) return p;
    return config_path.parent_path() / p;
}

MarketConfig RunConfig::build_market() const {
    const std::filesystem::path spath = resolve(scenarios);
    if (!std::filesystem::exists(spath))
        throw ConfigError("scenarios: file not found: " + spath.string());
    const FileFormat fmt =
        spath.extension() == ".json" ? FileFormat::Json : FileFormat::Csv;
    MarketConfig m{load_scenarios(spath, fmt, allow_negative_spot),
                   ContractSpec{delivery_periods, shape},
                   {}};
    for (const AgentConfig& a : agents) {
        AgentSpec spec;
        spec.id = a.id;
        spec.kind = agent_kind_from_string(a.kind);
        spec.risk = RiskParams{a.lambda, a.alpha.value_or(alpha_default)};
        spec.q_max = a.q_max;
        if (a.profile) {
            const std::filesystem::path ppath = resolve(*a.profile);
            if (!std::filesystem::exists(ppath))
                throw ConfigError("agent " + a.id + ": profile not found: " + ppath.string());
            spec.profile = load_profile(ppath, a.id);
        }
        m.agents.push_back(std::move(spec));
    }
    m.validate();
    return m;
}

TreeTopologySpec RunConfig::build_tree_spec() const {
    if (!tree) throw ConfigError("tree: missing tree topology in config");
    TreeTopologySpec spec;
    spec.stat = cluster_stat_from_string(tree->cluster_stat);
    spec.stages = tree->stages;
    return spec;
}

nlohmann::json build_manifest(const RunConfig& cfg, const std::string& command,
                              const EquilibriumOptions& eq_opts, double kkt_threshold) {
    nlohmann::json agents = nlohmann::json::array();
    for (const AgentConfig& a : cfg.agents)
        agents.push_back({{"id", a.id},
                          {"kind", a.kind},
                          {"lambda", a.lambda},
                          {"alpha", a.alpha.value_or(cfg.alpha_default)}});
    return nlohmann::json{
        {"tool", kToolName},
        {"version", kVersion},
        {"command", command},
        {"config_path", cfg.config_path.string()},
        {"config_hash", cfg.config_hash},
        {"alpha_default", cfg.alpha_default},
        {"agents", std::move(agents)},
        {"threads", thread_budget()},
        {"tolerances",
         {{"lp_feasibility", eq_opts.lp.feasibility_tol},
          {"lp_optimality", eq_opts.lp.optimality_tol},
          {"lp_duality_gap_rel", eq_opts.lp.duality_gap_rel_tol},
          {"bracket_eps_scale", eq_opts.eps_scale},
          {"degenerate_width", eq_opts.degenerate_width},
          {"kkt_threshold", kkt_threshold},
          {"oracle_tol", cfg.oracle.tol}}}};
}

}  // namespace eqf
