// Command-line front end: price, curves, tree, value and check subcommands
// over a JSON run configuration.
//
// Exit codes: 0 solved (optimal/degenerate/no_trade), 2 configuration or
// input errors, 3 unbounded/infeasible markets, 5 failed verification
// (check), 1 internal errors.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "eqforward/equilibrium.hpp"
#include "eqforward/errors.hpp"
#include "eqforward/run_config.hpp"
#include "eqforward/scenario_tree.hpp"
#include "eqforward/util.hpp"
#include "eqforward/version.hpp"

namespace {

constexpr double kKktThreshold = 1e-6;

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNoSolution = 3;
constexpr int kExitCheckFailed = 5;

struct CommonArgs {
    std::string config_path;
    std::string out_dir_override;
};

std::filesystem::path prepare_out_dir(const eqf::RunConfig& cfg, const CommonArgs& args) {
    std::filesystem::path out = args.out_dir_override.empty()
                                    ? cfg.config_path.parent_path() / cfg.out_dir
                                    : std::filesystem::path(args.out_dir_override);
    std::filesystem::create_directories(out);
    return out;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw eqf::Error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

void emit_manifest(const eqf::RunConfig& cfg, const std::string& command,
                   const std::filesystem::path& out_dir) {
    write_json(out_dir / "manifest.json",
               eqf::build_manifest(cfg, command, eqf::EquilibriumOptions{}, kKktThreshold));
}

int status_exit_code(eqf::EqStatus s) {
    switch (s) {
        case eqf::EqStatus::Optimal:
        case eqf::EqStatus::Degenerate:
        case eqf::EqStatus::NoTrade:
            return kExitOk;
        case eqf::EqStatus::Unbounded:
        case eqf::EqStatus::Infeasible:
            return kExitNoSolution;
    }
    return kExitInternal;
}

int cmd_price(const eqf::RunConfig& cfg, const CommonArgs& args) {
    const eqf::MarketConfig market = cfg.build_market();
    const auto out_dir = prepare_out_dir(cfg, args);
    emit_manifest(cfg, "price", out_dir);

    const eqf::EquilibriumResult res = eqf::solve_equilibrium(market);
    nlohmann::json j;
    if (res.status == eqf::EqStatus::Unbounded || res.status == eqf::EqStatus::Infeasible) {
        j = eqf::result_to_json(res);
    } else {
        const eqf::KktReport kkt = eqf::check_kkt(market, res);
        j = eqf::result_to_json(res, &kkt);
    }
    write_json(out_dir / "result.json", j);
    std::cout << "status: " << eqf::to_string(res.status) << "  price: "
              << eqf::format_sig12(res.price) << "  quantity: " << eqf::format_sig12(res.quantity)
              << '\n';
    return status_exit_code(res.status);
}

int cmd_curves(const eqf::RunConfig& cfg, const CommonArgs& args, const std::string& grid_spec) {
    const eqf::MarketConfig market = cfg.build_market();

    double lo = cfg.oracle.p_lo, hi = cfg.oracle.p_hi;
    int steps = 21;
    if (!grid_spec.empty()) {
        double glo, ghi;
        int gsteps;
        if (std::sscanf(grid_spec.c_str(), "%lf:%lf:%d", &glo, &ghi, &gsteps) != 3 ||
            gsteps < 1 || !(ghi >= glo))
            throw eqf::ConfigError("grid: expected lo:hi:steps with lo <= hi and steps >= 1, got '" +
                                   grid_spec + "'");
        lo = glo;
        hi = ghi;
        steps = gsteps;
    }
    std::vector<double> grid;
    if (steps == 1 || hi == lo) {
        grid.push_back(lo);
    } else {
        for (int i = 0; i < steps; ++i)
            grid.push_back(lo + (hi - lo) * static_cast<double>(i) / (steps - 1));
    }

    const auto out_dir = prepare_out_dir(cfg, args);
    emit_manifest(cfg, "curves", out_dir);
    const auto curve = eqf::supply_demand_curves(market.agents, market.scenarios, market.contract,
                                                 grid);
    std::ofstream out(out_dir / "curves.csv");
    eqf::write_curves_csv(curve, out);
    std::cout << "wrote " << (out_dir / "curves.csv").string() << " (" << curve.size()
              << " grid points)\n";
    return kExitOk;
}

eqf::ForwardPriceLattice build_lattice(const eqf::RunConfig& cfg, const eqf::MarketConfig& market) {
    const eqf::ScenarioTree tree = eqf::build_tree(market.scenarios, cfg.build_tree_spec());
    return eqf::forward_price_lattice(tree, market, market.contract);
}

int cmd_tree(const eqf::RunConfig& cfg, const CommonArgs& args) {
    const eqf::MarketConfig market = cfg.build_market();
    const auto out_dir = prepare_out_dir(cfg, args);
    emit_manifest(cfg, "tree", out_dir);
    const eqf::ForwardPriceLattice lattice = build_lattice(cfg, market);
    write_json(out_dir / "lattice.json", eqf::lattice_to_json(lattice));
    std::cout << "wrote " << (out_dir / "lattice.json").string() << " ("
              << lattice.tree.nodes.size() << " nodes)\n";
    return kExitOk;
}

int cmd_value(const eqf::RunConfig& cfg, const CommonArgs& args, double established,
              const std::string& side_str, int stage) {
    if (side_str != "sell" && side_str != "buy")
        throw eqf::ConfigError("side: must be sell|buy, got '" + side_str + "'");
    const eqf::ContractSide side =
        side_str == "sell" ? eqf::ContractSide::Sell : eqf::ContractSide::Buy;

    const eqf::MarketConfig market = cfg.build_market();
    const auto out_dir = prepare_out_dir(cfg, args);
    emit_manifest(cfg, "value", out_dir);
    const eqf::ForwardPriceLattice lattice = build_lattice(cfg, market);
    if (stage < 0 || stage >= lattice.tree.num_stages())
        throw eqf::ConfigError("stage: " + std::to_string(stage) + " outside the tree (stages 0.." +
                               std::to_string(lattice.tree.num_stages() - 1) + ")");
    const auto values = eqf::contract_value_distribution(lattice, established, side, stage);
    std::ofstream out(out_dir / "value_distribution.csv");
    eqf::write_distribution_csv(stage, values, out);
    std::cout << "wrote " << (out_dir / "value_distribution.csv").string() << '\n';
    return kExitOk;
}

int cmd_check(const eqf::RunConfig& cfg, const CommonArgs& args) {
    const eqf::MarketConfig market = cfg.build_market();
    const auto out_dir = prepare_out_dir(cfg, args);
    emit_manifest(cfg, "check", out_dir);
    const eqf::EquilibriumResult res = eqf::solve_equilibrium(market);
    if (res.status == eqf::EqStatus::Unbounded || res.status == eqf::EqStatus::Infeasible) {
        std::cerr << "market not solvable: " << eqf::to_string(res.status) << '\n';
        return kExitNoSolution;
    }
    const eqf::KktReport kkt = eqf::check_kkt(market, res);
    write_json(out_dir / "kkt.json", eqf::result_to_json(res, &kkt));
    const bool ok = kkt.all_within(kKktThreshold);
    std::cout << "kkt worst residual: " << eqf::format_sig12(kkt.worst())
              << (ok ? "  (pass)" : "  (FAIL)") << '\n';
    return ok ? kExitOk : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Forward contract equilibrium pricing over spot scenarios"};
    app.set_version_flag("--version", std::string(eqf::kVersion));
    app.require_subcommand(1);

    CommonArgs args;
    std::string grid_spec, side = "sell";
    double established = 0.0;
    int stage = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", args.config_path, "JSON run configuration")->required();
        sub->add_option("--out", args.out_dir_override, "output directory override");
    };
    CLI::App* price = app.add_subcommand("price", "equilibrium price for the configured contract");
    add_common(price);
    CLI::App* curves = app.add_subcommand("curves", "supply/demand curves over a price grid");
    add_common(curves);
    curves->add_option("--grid", grid_spec, "price grid as lo:hi:steps");
    CLI::App* tree = app.add_subcommand("tree", "scenario tree with per-node forward prices");
    add_common(tree);
    CLI::App* value = app.add_subcommand("value", "mark-to-market distribution of a contract");
    add_common(value);
    value->add_option("--established", established, "established contract price")->required();
    value->add_option("--side", side, "sell|buy");
    value->add_option("--stage", stage, "tree stage of the valuation");
    CLI::App* check = app.add_subcommand("check", "verify optimality residuals at the solution");
    add_common(check);

    CLI11_PARSE(app, argc, argv);

    try {
        const eqf::RunConfig cfg = eqf::RunConfig::load(args.config_path);
        if (price->parsed()) return cmd_price(cfg, args);
        if (curves->parsed()) return cmd_curves(cfg, args, grid_spec);
        if (tree->parsed()) return cmd_tree(cfg, args);
        if (value->parsed()) return cmd_value(cfg, args, established, side, stage);
        if (check->parsed()) return cmd_check(cfg, args);
        std::cerr << "no subcommand\n";
        return kExitConfig;
    } catch (const eqf::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const eqf::ParseError& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const eqf::DimensionError& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const eqf::ValueError& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const eqf::TopologyError& e) {
        std::cerr << "tree error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInternal;
    }
}
