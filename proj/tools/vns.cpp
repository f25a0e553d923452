// vns: command-line driver for the coupled particle / Navier-Stokes solver.
//
//   vns run --config cfg.toml [--preset name] [--time.dt 1e-4 ...]
//   vns fit --input timeseries.csv --column H --model exp --window 2:10
//   vns compare-oracle --config cfg.toml

#include <iostream>

#include <CLI11.hpp>

#include <vns/simulation.hpp>

namespace {

constexpr int kOk = 0, kConfig = 2, kNumerical = 3, kIo = 4;

// Remaining "--a.b value" / "--a.b=value" arguments become config overrides.
vns::FlatConfig parse_overrides(const std::vector<std::string>& extras) {
    vns::FlatConfig out;
    for (std::size_t i = 0; i < extras.size(); ++i) {
        std::string a = extras[i];
        if (a.rfind("--", 0) != 0) throw vns::ConfigError("unexpected argument '" + a + "'");
        a = a.substr(2);
        std::string key, value;
        if (const auto eq = a.find('='); eq != std::string::npos) {
            key = a.substr(0, eq);
            value = a.substr(eq + 1);
        } else {
            if (i + 1 >= extras.size()) throw vns::ConfigError("missing value for --" + a);
            key = a;
            value = extras[++i];
        }
        out[key] = vns::toml::parse_value(value, "--" + key);
    }
    return out;
}

vns::SimConfig load(const std::string& path, const std::string& preset, const std::vector<std::string>& extras) {
    std::vector<vns::FlatConfig> layers;
    if (!path.empty()) {
        try {
            layers.push_back(vns::toml::parse_file(path));
        } catch (const std::ios_base::failure& e) {
            throw vns::IoError(e.what());
        }
    }
    layers.push_back(parse_overrides(extras));
    if (path.empty() && preset.empty()) throw vns::ConfigError("either --config or --preset is required");
    return vns::make_config(layers, preset);
}

std::pair<double, double> parse_window(const std::string& w) {
    const auto c = w.find(':');
    if (c == std::string::npos) throw vns::ConfigError("--window must look like a:b");
    return {vns::toml::parse_number(w.substr(0, c), "--window"), vns::toml::parse_number(w.substr(c + 1), "--window")};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Vlasov-Navier-Stokes particle/spectral solver"};
    app.require_subcommand(1);

    std::string config_path, preset;
    auto* run = app.add_subcommand("run", "run a simulation");
    run->add_option("--config", config_path, "TOML configuration file");
    run->add_option("--preset", preset, "scenario preset");
    run->allow_extras();

    std::string input, column = "H", model = "exp", window;
    auto* fit = app.add_subcommand("fit", "fit a decay law to a time-series column");
    fit->add_option("--input", input, "CSV time series")->required();
    fit->add_option("--column", column, "column name");
    fit->add_option("--model", model, "exp or alg")->check(CLI::IsMember({"exp", "alg", "exponential", "algebraic"}));
    fit->add_option("--window", window, "time window a:b")->required();

    std::string oracle_config, oracle_preset;
    auto* cmp = app.add_subcommand("compare-oracle", "compare particle and phase-space grid moments");
    cmp->add_option("--config", oracle_config, "TOML configuration file");
    cmp->add_option("--preset", oracle_preset, "scenario preset");
    cmp->allow_extras();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }

    try {
        if (*run) {
            const auto cfg = load(config_path, preset, run->remaining());
            const auto res = vns::run(cfg);
            if (!res.error.empty()) std::cerr << "vns: " << res.error << "\n";
            if (res.exit_code == kOk) {
                const auto& b = res.summary["balance"];
                std::cout << "t_end " << res.summary["t_end"] << "  H " << res.summary["H0"] << " -> "
                          << res.summary["H_final"] << "  energy residual " << b["max_energy_residual"]
                          << "  output " << cfg.out_dir << "\n";
            }
            return res.exit_code;
        }
        if (*fit) {
            const auto data = vns::read_csv(input);
            const auto tc = data.find("t"), vc = data.find(column);
            if (tc == data.end() || vc == data.end()) throw vns::ConfigError("column '" + column + "' not found");
            const auto [a, b] = parse_window(window);
            const auto m = (model == "exp" || model == "exponential") ? vns::DecayModel::exponential
                                                                      : vns::DecayModel::algebraic;
            const auto f = vns::fit_decay(tc->second, vc->second, m, a, b);
            vns::json out = {{"column", column}, {"model", m == vns::DecayModel::exponential ? "exponential" : "algebraic"},
                             {"window", {a, b}}, {"slope", f.slope}, {"rate", f.rate}, {"r2", f.r2},
                             {"points", f.points}, {"floored", f.floored}};
            std::cout << out.dump(2) << "\n";
            return kOk;
        }
        if (*cmp) {
            const auto cfg = load(oracle_config, oracle_preset, cmp->remaining());
            const auto r = vns::compare_with_oracle(cfg);
            std::cout << r.report.dump(2) << "\n";
            return kOk;
        }
    } catch (const vns::ConfigError& e) {
        std::cerr << "vns: configuration error: " << e.what() << "\n";
        return kConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "vns: invalid input: " << e.what() << "\n";
        return kConfig;
    } catch (const vns::NumericalError& e) {
        std::cerr << "vns: numerical failure: " << e.what() << "\n";
        return kNumerical;
    } catch (const vns::IoError& e) {
        std::cerr << "vns: I/O error: " << e.what() << "\n";
        return kIo;
    }
    return kOk;
}
