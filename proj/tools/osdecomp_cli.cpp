// Command-line front end: ingest a prepared CSV, run the support
// partition and decompositions, and emit curve/share tables plus a run
// manifest. Subcommands: decompose, simulate, inspect-support.

#include <array>
#include <chrono>
#include <filesystem>
#include <set>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "osdecomp/osdecomp.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

struct RunConfig {
    std::string input;
    std::string outcome_column = "outcome";
    std::string group_column = "group";
    std::string weight_column;
    std::vector<std::string> covariates;  // "name:continuous" / "name:discrete"
    std::string support = "auto";         // auto|range1d|cellrange|explicit
    std::string bounds_path;
    int transform_degree = 3;
    bool saturated = false;
    std::string link = "logit";
    std::string grid_policy = "default";  // default|unique|quantiles|explicit
    std::vector<double> grid_points;
    std::size_t max_unique = 200;
    std::size_t quantile_count = 199;
    std::string modes = "relaxed,shares";
    std::string out_dir = ".";
    int threads = 1;
    std::uint64_t seed = 0;  // replication hook, echoed in the manifest
    std::string config_path;
};

std::vector<osdecomp::CovariateSpec> parse_covariates(const std::vector<std::string>& specs) {
    std::vector<osdecomp::CovariateSpec> out;
    for (const auto& s : specs) {
        auto pos = s.rfind(':');
        if (pos == std::string::npos)
            throw osdecomp::InvalidSpec("covariate '" + s + "' must be name:kind");
        osdecomp::CovariateSpec cv;
        cv.name = s.substr(0, pos);
        std::string kind = s.substr(pos + 1);
        if (kind == "continuous")
            cv.kind = osdecomp::CovariateKind::Continuous;
        else if (kind == "discrete")
            cv.kind = osdecomp::CovariateKind::Discrete;
        else
            throw osdecomp::InvalidSpec("covariate kind '" + kind +
                                        "' must be continuous or discrete");
        out.push_back(cv);
    }
    return out;
}

// --config JSON overrides flags; unknown keys are rejected.
void apply_config_file(RunConfig& cfg) {
    if (cfg.config_path.empty()) return;
    std::ifstream in(cfg.config_path);
    if (!in) throw osdecomp::InvalidSpec("cannot open config '" + cfg.config_path + "'");
    json j = json::parse(in);
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& k = it.key();
        if (k == "input") cfg.input = it->get<std::string>();
        else if (k == "outcome") cfg.outcome_column = it->get<std::string>();
        else if (k == "group") cfg.group_column = it->get<std::string>();
        else if (k == "weight") cfg.weight_column = it->get<std::string>();
        else if (k == "covariates") cfg.covariates = it->get<std::vector<std::string>>();
        else if (k == "support") cfg.support = it->get<std::string>();
        else if (k == "bounds") cfg.bounds_path = it->get<std::string>();
        else if (k == "transform_degree") cfg.transform_degree = it->get<int>();
        else if (k == "saturated") cfg.saturated = it->get<bool>();
        else if (k == "link") cfg.link = it->get<std::string>();
        else if (k == "grid_policy") cfg.grid_policy = it->get<std::string>();
        else if (k == "grid_points") cfg.grid_points = it->get<std::vector<double>>();
        else if (k == "max_unique") cfg.max_unique = it->get<std::size_t>();
        else if (k == "quantile_count") cfg.quantile_count = it->get<std::size_t>();
        else if (k == "modes") cfg.modes = it->get<std::string>();
        else if (k == "out") cfg.out_dir = it->get<std::string>();
        else if (k == "threads") cfg.threads = it->get<int>();
        else if (k == "seed") cfg.seed = it->get<std::uint64_t>();
        else throw osdecomp::InvalidSpec("unknown config key '" + k + "'");
    }
}

json config_echo(const RunConfig& cfg) {
    return json{{"input", cfg.input},
                {"outcome", cfg.outcome_column},
                {"group", cfg.group_column},
                {"weight", cfg.weight_column},
                {"covariates", cfg.covariates},
                {"support", cfg.support},
                {"bounds", cfg.bounds_path},
                {"transform_degree", cfg.transform_degree},
                {"saturated", cfg.saturated},
                {"link", cfg.link},
                {"grid_policy", cfg.grid_policy},
                {"grid_points", cfg.grid_points},
                {"max_unique", cfg.max_unique},
                {"quantile_count", cfg.quantile_count},
                {"modes", cfg.modes},
                {"out", cfg.out_dir},
                {"threads", cfg.threads},
                {"seed", cfg.seed}};
}

// Tracks files written by a run so failures leave no partial outputs.
class OutputSet {
public:
    explicit OutputSet(fs::path dir) : dir_(std::move(dir)) {
        fs::create_directories(dir_);
    }
    std::ofstream open(const std::string& name) {
        fs::path p = dir_ / name;
        written_.push_back(p);
        std::ofstream out(p);
        if (!out) throw osdecomp::InvalidSpec("cannot write '" + p.string() + "'");
        return out;
    }
    fs::path path(const std::string& name) const { return dir_ / name; }
    void discard_all() {
        for (const auto& p : written_) {
            std::error_code ec;
            fs::remove(p, ec);
        }
    }

private:
    fs::path dir_;
    std::vector<fs::path> written_;
};

osdecomp::ExplicitBounds load_bounds(const std::string& path,
                                     const std::array<std::string, 2>& labels) {
    std::ifstream in(path);
    if (!in) throw osdecomp::InvalidSpec("cannot open bounds '" + path + "'");
    json j = json::parse(in);
    osdecomp::ExplicitBounds b;
    for (int g = 0; g < 2; ++g) {
        if (!j.contains(labels[g])) continue;
        for (auto it = j[labels[g]].begin(); it != j[labels[g]].end(); ++it) {
            osdecomp::ExplicitBounds::CovariateBounds cb;
            if (it->is_array()) {
                cb.low = (*it)[0].get<double>();
                cb.high = (*it)[1].get<double>();
            } else if (it->is_object() && it->contains("values")) {
                for (double v : (*it)["values"]) cb.values.insert(v);
            } else {
                throw osdecomp::InvalidSpec("bounds for '" + it.key() +
                                            "' must be [low,high] or {\"values\":[...]}");
            }
            b.group[g][it.key()] = cb;
        }
    }
    return b;
}

struct Prepared {
    osdecomp::ObservationTable table;
    osdecomp::EvaluationGrid grid;
    osdecomp::SupportPartition partition;
};

Prepared prepare(const RunConfig& cfg) {
    osdecomp::SchemaConfig schema;
    schema.outcome_column = cfg.outcome_column;
    schema.group_column = cfg.group_column;
    schema.weight_column = cfg.weight_column;
    schema.covariates = parse_covariates(cfg.covariates);
    auto table = osdecomp::load_table(cfg.input, schema);

    osdecomp::GridPolicy policy;
    policy.max_unique = cfg.max_unique;
    policy.quantile_count = cfg.quantile_count;
    if (cfg.grid_policy == "unique") policy.kind = osdecomp::GridPolicy::Unique;
    else if (cfg.grid_policy == "quantiles") policy.kind = osdecomp::GridPolicy::Quantiles;
    else if (cfg.grid_policy == "explicit") {
        policy.kind = osdecomp::GridPolicy::Explicit;
        policy.explicit_points = cfg.grid_points;
    } else if (cfg.grid_policy != "default") {
        throw osdecomp::InvalidSpec("unknown grid policy '" + cfg.grid_policy + "'");
    }
    auto grid = osdecomp::make_grid(table, policy);

    osdecomp::SupportStrategy strategy;
    osdecomp::ExplicitBounds bounds;
    const osdecomp::ExplicitBounds* bounds_ptr = nullptr;
    if (cfg.support == "auto") strategy = osdecomp::default_strategy(table);
    else if (cfg.support == "range1d") strategy = osdecomp::SupportStrategy::Range1D;
    else if (cfg.support == "cellrange") strategy = osdecomp::SupportStrategy::CellRange;
    else if (cfg.support == "explicit") {
        strategy = osdecomp::SupportStrategy::Explicit;
        bounds = load_bounds(cfg.bounds_path, table.group_labels());
        bounds_ptr = &bounds;
    } else {
        throw osdecomp::InvalidSpec("unknown support strategy '" + cfg.support + "'");
    }
    auto partition = osdecomp::estimate_partition(table, strategy, bounds_ptr);
    return Prepared{std::move(table), std::move(grid), std::move(partition)};
}

json masses_json(const osdecomp::ObservationTable& table,
                 const osdecomp::SupportPartition& part) {
    std::size_t counts[3] = {0, 0, 0};
    for (auto tag : part.region_of) counts[static_cast<int>(tag)]++;
    return json{{"strategy", part.strategy},
                {"mass_W_in", part.mass_W_in},
                {"mass_W_out", part.mass_W_out},
                {"mass_B_in", part.mass_B_in},
                {"mass_B_out", part.mass_B_out},
                {"rows_common", counts[0]},
                {"rows_w_only", counts[1]},
                {"rows_b_only", counts[2]},
                {"group_labels", {table.group_labels()[0], table.group_labels()[1]}}};
}

int cmd_decompose(const RunConfig& cfg) {
    auto t0 = std::chrono::steady_clock::now();
    OutputSet out(cfg.out_dir);
    try {
        auto prep = prepare(cfg);
        const auto& table = prep.table;
        const auto& labels = table.group_labels();

        std::set<std::string> modes;
        {
            std::stringstream ss(cfg.modes);
            std::string item;
            while (std::getline(ss, item, ',')) modes.insert(item);
        }
        for (const auto& m : modes)
            if (m != "relaxed" && m != "conventional" && m != "dfl" && m != "shares")
                throw osdecomp::InvalidSpec("unknown mode '" + m + "'");

        osdecomp::SolverConfig solver;
        solver.threads = cfg.threads;
        osdecomp::Link link = osdecomp::link_from_string(cfg.link);
        auto transform = cfg.saturated
                             ? osdecomp::CovariateTransform::saturated(table)
                             : osdecomp::CovariateTransform::polynomial(table, cfg.transform_degree);

        auto model_W = osdecomp::fit_conditional_cdf(table, labels[0], prep.grid, transform,
                                                     link, solver);
        auto model_B = osdecomp::fit_conditional_cdf(table, labels[1], prep.grid, transform,
                                                     link, solver);
        {
            auto f = out.open("model_W.json");
            f << model_W.to_json().dump(2) << '\n';
        }
        {
            auto f = out.open("model_B.json");
            f << model_B.to_json().dump(2) << '\n';
        }
        {
            auto f = out.open("masses.json");
            f << masses_json(table, prep.partition).dump(2) << '\n';
        }

        if (modes.count("relaxed") || modes.count("shares")) {
            auto curves = osdecomp::decompose_relaxed(table, prep.partition, model_W, model_B);
            auto f = out.open("curves.csv");
            osdecomp::write_curves_csv(f, curves);
            auto fj = out.open("curves.json");
            fj << osdecomp::curves_to_json(curves).dump(2) << '\n';
            if (modes.count("shares")) {
                auto shares = osdecomp::contribution_shares(curves);
                auto fs_ = out.open("shares.csv");
                osdecomp::write_shares_csv(fs_, shares);
            }
        }
        if (modes.count("conventional")) {
            auto trimmed = osdecomp::trimmed_table(table, prep.partition);
            auto transform_t = cfg.saturated
                                   ? osdecomp::CovariateTransform::saturated(trimmed)
                                   : osdecomp::CovariateTransform::polynomial(trimmed,
                                                                              cfg.transform_degree);
            auto mW = osdecomp::fit_conditional_cdf(trimmed, labels[0], prep.grid, transform_t,
                                                    link, solver);
            auto mB = osdecomp::fit_conditional_cdf(trimmed, labels[1], prep.grid, transform_t,
                                                    link, solver);
            auto conv = osdecomp::decompose_conventional(table, prep.partition, mW, mB);
            auto f = out.open("curves_conventional.csv");
            osdecomp::write_curves_csv(f, conv);
        }
        if (modes.count("dfl")) {
            osdecomp::PropensityConfig pcfg;
            pcfg.saturated = cfg.saturated;
            pcfg.link = link;
            pcfg.solver = solver;
            if (!cfg.saturated)
                pcfg.transform = osdecomp::CovariateTransform::polynomial(table,
                                                                          cfg.transform_degree);
            auto dfl = osdecomp::dfl_counterfactual(table, prep.grid, pcfg);
            auto f = out.open("dfl.csv");
            f << "y,series,value\n";
            for (std::size_t m = 0; m < prep.grid.size(); ++m)
                f << osdecomp::detail::format_double(prep.grid[m]) << ",h0_dfl,"
                  << osdecomp::detail::format_double(dfl.counterfactual[m]) << '\n';
            auto fw = out.open("dfl_weights.csv");
            fw << "row,psi,capped\n";
            for (std::size_t k = 0; k < dfl.weights.psi.size(); ++k)
                fw << dfl.weights.row_index[k] << ','
                   << osdecomp::detail::format_double(dfl.weights.psi[k]) << ','
                   << (dfl.weights.capped[k] ? 1 : 0) << '\n';
        }

        auto t1 = std::chrono::steady_clock::now();
        json manifest;
        manifest["command"] = "decompose";
        manifest["version"] = kVersion;
        manifest["config"] = config_echo(cfg);
        manifest["elapsed_ms"] =
            std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count();
        auto f = out.open("manifest.json");
        f << manifest.dump(2) << '\n';
        return 0;
    } catch (...) {
        out.discard_all();
        throw;
    }
}

int cmd_inspect_support(const RunConfig& cfg) {
    OutputSet out(cfg.out_dir);
    try {
        auto prep = prepare(cfg);
        auto f = out.open("regions.csv");
        std::ostringstream table_csv;
        osdecomp::save_table(table_csv, prep.table, cfg.outcome_column, cfg.group_column,
                             cfg.weight_column.empty() ? "weight" : cfg.weight_column);
        std::istringstream lines(table_csv.str());
        std::string line;
        std::getline(lines, line);
        f << line << ",region\n";
        std::size_t i = 0;
        while (std::getline(lines, line))
            f << line << ',' << osdecomp::to_string(prep.partition.region_of[i++]) << '\n';
        auto fm = out.open("masses.json");
        fm << masses_json(prep.table, prep.partition).dump(2) << '\n';
        return 0;
    } catch (...) {
        out.discard_all();
        throw;
    }
}

int cmd_simulate(const std::string& spec_path, const std::string& out_dir) {
    OutputSet out(out_dir);
    try {
        std::ifstream in(spec_path);
        if (!in) throw osdecomp::InvalidSpec("cannot open spec '" + spec_path + "'");
        auto spec = osdecomp::DgpSpec::from_json(json::parse(in));
        auto table = osdecomp::generate(spec);
        {
            auto f = out.open("data.csv");
            osdecomp::save_table(f, table);
        }
        json manifest;
        manifest["command"] = "simulate";
        manifest["version"] = kVersion;
        manifest["spec"] = spec.to_json();
        if (spec.kind == osdecomp::DgpSpec::DiscreteCells) {
            auto grid = osdecomp::atom_grid(spec);
            auto curves = osdecomp::oracle_decompose(spec, grid);
            auto f = out.open("oracle_curves.csv");
            osdecomp::write_curves_csv(f, curves);
            manifest["oracle"] = "oracle_curves.csv";
        } else {
            manifest["oracle"] = nullptr;
            manifest["note"] = "oracle available only for discrete_cells specs";
        }
        auto f = out.open("manifest.json");
        f << manifest.dump(2) << '\n';
        return 0;
    } catch (...) {
        out.discard_all();
        throw;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Distributional gap decomposition with relaxed overlapping support"};
    app.require_subcommand(1);

    RunConfig cfg;
    std::string spec_path, sim_out;

    auto add_data_flags = [&](CLI::App* sub) {
        sub->add_option("--input", cfg.input, "input CSV path")->required();
        sub->add_option("--outcome", cfg.outcome_column, "outcome column name");
        sub->add_option("--group", cfg.group_column, "group column name");
        sub->add_option("--weight", cfg.weight_column, "weight column (empty: weights 1)");
        sub->add_option("--covariate", cfg.covariates,
                        "covariate as name:continuous or name:discrete (repeatable)");
        sub->add_option("--support", cfg.support, "auto|range1d|cellrange|explicit");
        sub->add_option("--bounds", cfg.bounds_path, "explicit bounds JSON");
        sub->add_option("--grid-policy", cfg.grid_policy, "default|unique|quantiles|explicit");
        sub->add_option("--grid-points", cfg.grid_points, "explicit grid points");
        sub->add_option("--max-unique", cfg.max_unique, "unique-value grid cap");
        sub->add_option("--quantile-count", cfg.quantile_count, "quantile grid size");
        sub->add_option("--out", cfg.out_dir, "output directory");
        sub->add_option("--config", cfg.config_path, "JSON config overriding flags");
    };

    auto* dec = app.add_subcommand("decompose", "run the gap decomposition");
    add_data_flags(dec);
    dec->add_option("--transform-degree", cfg.transform_degree, "polynomial degree");
    dec->add_flag("--saturated", cfg.saturated, "saturated (cell) models");
    dec->add_option("--link", cfg.link, "logit|probit");
    dec->add_option("--mode", cfg.modes, "comma list of relaxed,conventional,dfl,shares");
    dec->add_option("--threads", cfg.threads, "parallel threshold fits");
    dec->add_option("--seed", cfg.seed, "replication seed (echoed in manifest)");

    auto* ins = app.add_subcommand("inspect-support", "emit per-row regions and masses");
    add_data_flags(ins);

    auto* sim = app.add_subcommand("simulate", "generate a synthetic dataset");
    sim->add_option("--spec", spec_path, "DgpSpec JSON path")->required();
    sim->add_option("--out", sim_out, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (dec->parsed()) {
            apply_config_file(cfg);
            return cmd_decompose(cfg);
        }
        if (ins->parsed()) {
            apply_config_file(cfg);
            return cmd_inspect_support(cfg);
        }
        return cmd_simulate(spec_path, sim_out);
    } catch (const osdecomp::Error& e) {
        std::cerr << json{{"error", e.code()}, {"message", e.what()}}.dump() << std::endl;
        return 1;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", "Internal"}, {"message", e.what()}}.dump() << std::endl;
        return 1;
    }
}
