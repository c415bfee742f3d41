// lcan: simulate, fit, summarize and diagnose community-dependent network
// regressions.
#include "lcan/io.hpp"
#include "lcan/postprocess.hpp"
#include "lcan/sampler.hpp"
#include "lcan/simulate.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <thread>

using namespace lcan;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

enum Exit { kOk = 0, kUsage = 2, kData = 3, kNumerical = 4 };

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::uint64_t derived_seed(std::uint64_t seed, int chain) {
    if (chain == 0) return seed;
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(chain);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// -- simulate ----------------------------------------------------------------------

struct SimulateArgs {
    std::string preset = "binary-k3";
    std::uint64_t seed = 1;
    Index n = 0;
    int censor_cap = -1;
    bool export_z = false;
    fs::path out;
};

int cmd_simulate(const SimulateArgs& args) {
    ScenarioSpec spec;
    try {
        spec = scenario_preset(args.preset);
    } catch (const std::out_of_range& e) {
        throw UsageError(e.what());
    }
    spec.seed = args.seed;
    if (args.n > 0) spec.n = args.n;
    if (args.censor_cap >= 0) spec.censor_cap = args.censor_cap;
    const bool censored = spec.censor_cap.has_value();
    const auto sim = censored ? generate_censored_network(spec) : generate_network(spec);

    fs::create_directories(args.out);
    io::write_adjacency(args.out / "adjacency.csv", sim.y);
    io::write_covariates(args.out, sim.covs);
    json truth = io::state_to_json(sim.truth);
    truth["density"] = sim.density;
    if (censored) {
        truth["censor_cap"] = *spec.censor_cap;
        truth["censored_fraction"] = sim.censored_fraction;
        truth["exceeded"] = sim.exceeded;
    }
    io::write_json(args.out / "truth.json", truth);
    if (args.export_z) io::write_matrix_csv(args.out / "latent_z.csv", sim.truth.latent.z);

    json manifest = {{"command", "simulate"}, {"preset", spec.name}, {"seed", spec.seed}, {"n", spec.n},
                     {"K", spec.K}, {"version", kVersion}, {"digests", json::object()}};
    for (const auto& entry : fs::directory_iterator(args.out))
        if (entry.is_regular_file() && entry.path().filename() != "manifest.json")
            manifest["digests"][entry.path().filename().string()] = io::file_digest(entry.path());
    io::write_json(args.out / "manifest.json", manifest);
    std::cout << spec.name << ": n = " << spec.n << ", density " << sim.density;
    if (censored) std::cout << ", censored fraction " << sim.censored_fraction;
    std::cout << " -> " << args.out.string() << '\n';
    return kOk;
}

// -- fit ---------------------------------------------------------------------------

struct FitArgs {
    fs::path data;
    fs::path out;
    std::uint64_t seed = 1;
    int K = 3;
    int iter = 150000;
    int burnin = 0;
    int thin = 1;
    std::string init = "spectral";
    fs::path init_labels;
    bool censored = false;
    int censor_cap = -1;
    fs::path dep_flags;
    int chains = 1;
    bool resume = false;
    int checkpoint_every = 1000;
};

InitMethod parse_init(const std::string& name) {
    if (name == "spectral") return InitMethod::Spectral;
    if (name == "residual") return InitMethod::Residual;
    if (name == "random") return InitMethod::Random;
    if (name == "file") return InitMethod::Provided;
    throw UsageError("unknown --init '" + name + "'");
}

/// One label per line, communities numbered 1..K.
std::vector<int> read_labels(const fs::path& path, Index n, int K) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::vector<int> labels;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        int k = 0;
        try {
            k = std::stoi(line);
        } catch (const std::exception&) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": not an integer");
        }
        if (k < 1 || k > K)
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": label outside 1.." + std::to_string(K));
        labels.push_back(k - 1);
    }
    if (static_cast<Index>(labels.size()) != n)
        throw DataError(path.string() + ": expected " + std::to_string(n) + " labels");
    return labels;
}

json fit_config_json(const FitConfig& cfg, const PriorSpec& priors, const ChainOutput& shape,
                     std::optional<int> cap) {
    json j = {{"n_iter", cfg.n_iter},
              {"burn_in", cfg.burn_in},
              {"thin", cfg.thin},
              {"seed", cfg.seed},
              {"K", cfg.K},
              {"init", static_cast<int>(cfg.init_method)},
              {"censored", cfg.censored_mode},
              {"dependence_flags", cfg.dependence_flags},
              {"initial_labels", cfg.initial_labels},
              {"config_hash", config_fingerprint(cfg, priors)},
              {"n", shape.n},
              {"columns", io::columns_to_json(shape.columns)}};
    if (cap) j["censor_cap"] = *cap;
    return j;
}

FitConfig fit_config_from_json(const json& j) {
    FitConfig cfg;
    cfg.n_iter = j.at("n_iter");
    cfg.burn_in = j.at("burn_in");
    cfg.thin = j.at("thin");
    cfg.seed = j.at("seed");
    cfg.K = j.at("K");
    cfg.init_method = static_cast<InitMethod>(j.at("init").get<int>());
    cfg.censored_mode = j.at("censored");
    cfg.dependence_flags = j.at("dependence_flags").get<std::map<std::string, bool>>();
    cfg.initial_labels = j.at("initial_labels").get<std::vector<int>>();
    return cfg;
}

/// Drops draws recorded after the checkpoint, so a resumed chain appends cleanly.
void truncate_draws(const fs::path& path, int last_iteration) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::vector<std::string> keep;
    std::string line;
    while (std::getline(in, line)) {
        if (!keep.empty() && std::stoi(line.substr(0, line.find(','))) > last_iteration) continue;
        keep.push_back(line);
    }
    in.close();
    std::ofstream out(path, std::ios::trunc);
    for (const auto& l : keep) out << l << '\n';
}

struct ChainJob {
    FitConfig cfg;
    fs::path dir;
    std::optional<ChainCheckpoint> resume;
    int status = kOk;
    std::string error;
};

void run_job(ChainJob& job, const Sociomatrix& y, const CovariateSet& covs, const PriorSpec& priors,
             const json& inputs, int checkpoint_every, std::optional<int> cap) {
    const fs::path draws_path = job.dir / "draws.csv";
    std::size_t written = 0;
    std::ofstream draws;
    if (job.resume) {
        truncate_draws(draws_path, job.resume->iteration);
        draws.open(draws_path, std::ios::app);
    } else {
        draws.open(draws_path, std::ios::trunc);
        io::write_draws_header(draws);
    }
    if (!draws) throw std::runtime_error("cannot write " + draws_path.string());

    ChainHooks hooks;
    hooks.checkpoint_every = checkpoint_every;
    hooks.on_checkpoint = [&](const ChainCheckpoint& cp, const ChainOutput& out) {
        if (written == 0 && !job.resume) io::write_json(job.dir / "config.json", fit_config_json(job.cfg, priors, out, cap));
        io::write_draws(draws, out.draws, written, out.columns, out.censored_mode);
        draws.flush();
        written = out.draws.size();
        io::write_json(job.dir / "checkpoint.json", io::checkpoint_to_json(cp));
    };

    const auto t0 = std::chrono::steady_clock::now();
    ChainOutput out;
    try {
        out = run_chain(y, covs, job.cfg, priors, hooks, job.resume ? &*job.resume : nullptr);
    } catch (const ChainFailure& e) {
        io::write_json(job.dir / "failure_state.json",
                       {{"iteration", e.iteration()}, {"error", e.what()}, {"state", io::state_to_json(e.snapshot())}});
        throw;
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    io::write_draws(draws, out.draws, written, out.columns, out.censored_mode);
    draws.close();
    if (!job.resume) io::write_json(job.dir / "config.json", fit_config_json(job.cfg, priors, out, cap));

    json manifest = {{"command", "fit"},
                     {"version", kVersion},
                     {"config_hash", out.config_hash},
                     {"seed", job.cfg.seed},
                     {"inputs", inputs},
                     {"resumed_from", job.resume ? json(job.resume->iteration) : json(nullptr)},
                     {"complete", true},
                     {"wall_seconds", seconds},
                     {"step_seconds", out.step_seconds},
                     {"membership_acceptance", out.membership_acceptance},
                     {"rho_acceptance", out.rho_acceptance},
                     {"initial_labels", out.initial_labels}};
    io::write_json(job.dir / "manifest.json", manifest);
}

int cmd_fit(const FitArgs& args) {
    if (args.chains < 1) throw UsageError("--chains must be >= 1");
    const std::optional<int> cap = args.censor_cap >= 0 ? std::optional<int>(args.censor_cap) : std::nullopt;
    const fs::path adjacency = args.data / "adjacency.csv", csv = args.data / "covariates.csv",
                   meta = args.data / "covariates.meta";
    const auto y = io::read_adjacency(adjacency, cap);
    const auto covs = io::read_covariates(csv, meta, y.size());
    json inputs = {{"adjacency.csv", io::file_digest(adjacency)},
                   {"covariates.csv", io::file_digest(csv)},
                   {"covariates.meta", io::file_digest(meta)}};
    for (const auto& d : covs.dyadic)
        if (fs::exists(args.data / ("dyadic_" + d.name() + ".csv")))
            inputs["dyadic_" + d.name() + ".csv"] = io::file_digest(args.data / ("dyadic_" + d.name() + ".csv"));

    FitConfig base;
    base.n_iter = args.iter;
    base.burn_in = args.burnin;
    base.thin = args.thin;
    base.seed = args.seed;
    base.K = args.K;
    base.init_method = parse_init(args.init);
    base.censored_mode = args.censored;
    if (!args.dep_flags.empty()) base.dependence_flags = io::read_dependence_flags(args.dep_flags);
    if (base.init_method == InitMethod::Provided) {
        if (args.init_labels.empty()) throw UsageError("--init file needs --init-labels");
        base.initial_labels = read_labels(args.init_labels, y.size(), args.K);
    }
    if (base.censored_mode && !y.censor_cap()) throw UsageError("--censored needs --censor-cap");
    try {
        base.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    const PriorSpec priors = PriorSpec::defaults(base.K);

    std::vector<ChainJob> jobs(static_cast<std::size_t>(args.chains));
    for (int c = 0; c < args.chains; ++c) {
        auto& job = jobs[c];
        job.dir = args.chains == 1 ? args.out : args.out / ("chain-" + std::to_string(c + 1));
        fs::create_directories(job.dir);
        if (args.resume) {
            const auto stored = io::read_json(job.dir / "config.json");
            job.cfg = fit_config_from_json(stored);
            if (stored.at("config_hash") != config_fingerprint(job.cfg, priors))
                throw DataError(job.dir.string() + ": stored configuration does not match its fingerprint");
            job.resume = io::checkpoint_from_json(io::read_json(job.dir / "checkpoint.json"));
        } else {
            job.cfg = base;
            job.cfg.seed = derived_seed(args.seed, c);
        }
    }

    auto work = [&](ChainJob& job) {
        try {
            run_job(job, y, covs, priors, inputs, args.checkpoint_every, cap);
        } catch (const NumericalError& e) {
            job.status = kNumerical;
            job.error = e.what();
        } catch (const DataError& e) {
            job.status = kData;
            job.error = e.what();
        } catch (const std::invalid_argument& e) {
            job.status = kUsage;
            job.error = e.what();
        } catch (const std::exception& e) {
            job.status = 1;
            job.error = e.what();
        }
    };
    if (jobs.size() == 1) {
        work(jobs.front());
    } else {
        std::vector<std::thread> threads;
        for (auto& job : jobs) threads.emplace_back(work, std::ref(job));
        for (auto& t : threads) t.join();
    }
    int status = kOk;
    for (const auto& job : jobs) {
        if (job.status != kOk) {
            std::cerr << "error: " << job.dir.string() << ": " << job.error << '\n';
            status = std::max(status, job.status);
        } else {
            std::cout << "chain written to " << job.dir.string() << '\n';
        }
    }
    return status;
}

// -- reading a chain back -------------------------------------------------------------

ChainOutput load_chain(const fs::path& dir) {
    if (!fs::exists(dir / "config.json") || !fs::exists(dir / "draws.csv"))
        throw DataError(dir.string() + ": no chain (config.json and draws.csv required)");
    const auto cfg = io::read_json(dir / "config.json");
    ChainOutput chain;
    chain.columns = io::columns_from_json(cfg.at("columns"));
    chain.K = cfg.at("K");
    chain.n = cfg.at("n");
    chain.seed = cfg.at("seed");
    chain.censored_mode = cfg.at("censored");
    chain.config_hash = cfg.at("config_hash");
    chain.draws = io::read_draws(dir / "draws.csv", chain.columns, chain.n, chain.K);
    if (chain.draws.empty()) throw DataError(dir.string() + ": chain has no draws");
    return chain;
}

// -- summarize ---------------------------------------------------------------------

int cmd_summarize(const fs::path& dir, bool compare_averaged, double level) {
    const auto chain = load_chain(dir);
    const auto s = resolve_labels(chain, chain.K, level);

    std::ofstream table(dir / "summary_communities.csv");
    table << "covariate,community,size,lower,mean,upper,pooled_lower,pooled_mean,pooled_upper\n";
    std::ofstream nodes(dir / "summary_nodes.csv");
    nodes << "covariate,node,cluster,lower,mean,upper\n";
    std::cout << "covariate        community  size      lower       mean      upper\n";
    char buf[160];
    for (std::size_t p = 0; p < s.columns.size(); ++p) {
        const auto& name = s.columns[p].name;
        for (int k = 0; k < chain.K; ++k) {
            const auto& iv = s.community_intervals[p][k];
            const auto& pv = s.pooled_intervals[p][k];
            table << name << ',' << k + 1 << ',' << s.cluster_sizes(k) << ',' << io::format_double(iv.lower) << ','
                  << io::format_double(iv.mean) << ',' << io::format_double(iv.upper) << ','
                  << io::format_double(pv.lower) << ',' << io::format_double(pv.mean) << ','
                  << io::format_double(pv.upper) << '\n';
            std::snprintf(buf, sizeof buf, "%-16s %9d %5d %10.4f %10.4f %10.4f\n", name.c_str(), k + 1,
                          s.cluster_sizes(k), iv.lower, iv.mean, iv.upper);
            std::cout << buf;
        }
        for (Index i = 0; i < chain.n; ++i) {
            const auto& iv = s.node_intervals[p][i];
            nodes << name << ',' << i + 1 << ',' << s.cluster[i] + 1 << ',' << io::format_double(iv.lower) << ','
                  << io::format_double(iv.mean) << ',' << io::format_double(iv.upper) << '\n';
        }
    }

    if (compare_averaged) {
        // Community-size weighted average of the community coefficients, per
        // draw: the quantity a community-independent fit estimates.
        std::ofstream avg(dir / "summary_averaged.csv");
        avg << "covariate,lower,mean,upper\n";
        std::cout << "\nsize-weighted average over communities\n";
        for (std::size_t p = 0; p < s.columns.size(); ++p) {
            std::vector<double> series;
            for (const auto& d : chain.draws) series.push_back(d.ubeta.col(static_cast<Index>(p)).mean());
            const auto iv = credible_interval(series, level);
            avg << s.columns[p].name << ',' << io::format_double(iv.lower) << ',' << io::format_double(iv.mean)
                << ',' << io::format_double(iv.upper) << '\n';
            std::snprintf(buf, sizeof buf, "%-16s %26.4f %10.4f %10.4f\n", s.columns[p].name.c_str(), iv.lower,
                          iv.mean, iv.upper);
            std::cout << buf;
        }
    }
    return kOk;
}

// -- diagnose ----------------------------------------------------------------------

int cmd_diagnose(const fs::path& dir, int max_lag) {
    const auto chain = load_chain(dir);
    const std::size_t length = chain.draws.size();
    if (length < 100)
        throw DataError(dir.string() + ": chain too short for diagnostics (" + std::to_string(length) +
                        " draws, need 100)");
    if (max_lag >= static_cast<int>(length)) throw UsageError("--max-lag must be below the number of draws");

    std::ofstream table(dir / "diagnostics.csv");
    table << "parameter,index,ess,geweke_z\n";
    int under = 0, scored = 0;
    auto report = [&](const std::string& name, Index index, const std::vector<double>& series) {
        const auto e = ess(series);
        std::string z = "NA";
        if (!e.degenerate) {
            try {
                const double g = geweke(series);
                z = io::format_double(g);
                under += std::abs(g) < 2.0;
                ++scored;
            } catch (const std::domain_error&) {
            }
        }
        table << name << ',' << index << ',' << io::format_double(e.ess) << ',' << z << '\n';
    };
    auto scalar = [&](const std::string& name, auto get) {
        std::vector<double> s;
        for (const auto& d : chain.draws) s.push_back(get(d));
        report(name, 0, s);
    };
    scalar("beta0", [](const Draw& d) { return d.coeffs.beta0; });
    scalar("rho", [](const Draw& d) { return d.rho; });
    for (Index k = 0; k < chain.K * chain.K; ++k) {
        std::vector<double> s;
        for (const auto& d : chain.draws) s.push_back(d.lambda.data()[k]);
        report("lambda", k, s);
    }

    // ACF of u_i beta, summarized by the median across nodes per column.
    std::ofstream acf_out(dir / "acf.csv");
    acf_out << "column,lag,median_acf\n";
    for (std::size_t p = 0; p < chain.columns.size(); ++p) {
        std::vector<std::vector<double>> by_lag(static_cast<std::size_t>(max_lag + 1));
        for (Index i = 0; i < chain.n; ++i) {
            const auto series = ubeta_series(chain, static_cast<Index>(p), i);
            report("ubeta:" + chain.columns[p].name, i, series);
            try {
                const auto r = acf(series, max_lag);
                for (int l = 0; l <= max_lag; ++l) by_lag[l].push_back(r[l]);
            } catch (const std::domain_error&) {
            }
        }
        for (int l = 0; l <= max_lag; ++l)
            if (!by_lag[l].empty())
                acf_out << chain.columns[p].name << ',' << l << ',' << io::format_double(quantile(by_lag[l], 0.5))
                        << '\n';
    }
    const double fraction = scored ? static_cast<double>(under) / scored : 0.0;
    io::write_json(dir / "diagnostics.json", {{"draws", length}, {"scored", scored}, {"geweke_under_2", fraction}});
    std::cout << "draws: " << length << "\nGeweke |z| < 2: " << under << " of " << scored << " (" << fraction
              << ")\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Latent community adaptive network regression"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Generate a network from a preset scenario");
    simulate->add_option("--preset", sim.preset, "binary-k3 | censored-k3 | misspec-continuous")
        ->capture_default_str();
    simulate->add_option("--seed", sim.seed)->capture_default_str();
    simulate->add_option("--n", sim.n, "Override the number of nodes");
    simulate->add_option("--censor-cap", sim.censor_cap, "Override the out-degree cap");
    simulate->add_flag("--export-z", sim.export_z, "Also write the latent matrix Z");
    simulate->add_option("-o,--out", sim.out)->required();

    FitArgs fit;
    auto* fitcmd = app.add_subcommand("fit", "Run the sampler");
    fitcmd->add_option("data", fit.data, "Directory with adjacency.csv and covariates")->required();
    fitcmd->add_option("-o,--out", fit.out)->required();
    fitcmd->add_option("--seed", fit.seed)->capture_default_str();
    fitcmd->add_option("--K", fit.K)->capture_default_str();
    fitcmd->add_option("--iter", fit.iter)->capture_default_str();
    fitcmd->add_option("--burnin", fit.burnin)->capture_default_str();
    fitcmd->add_option("--thin", fit.thin)->capture_default_str();
    fitcmd->add_option("--init", fit.init, "spectral | residual | random | file")
        ->check(CLI::IsMember({"spectral", "residual", "random", "file"}))
        ->capture_default_str();
    fitcmd->add_option("--init-labels", fit.init_labels, "Labels 1..K, one per line (with --init file)");
    fitcmd->add_flag("--censored", fit.censored, "Fit the censoring offsets");
    fitcmd->add_option("--censor-cap", fit.censor_cap, "Out-degree cap of the survey");
    fitcmd->add_option("--dep-flags", fit.dep_flags, "Lines of 'name dependent|independent'");
    fitcmd->add_option("--chains", fit.chains)->capture_default_str();
    fitcmd->add_option("--checkpoint-every", fit.checkpoint_every)->capture_default_str();
    fitcmd->add_flag("--resume", fit.resume, "Continue from the checkpoint in the output directory");

    fs::path summary_dir;
    bool compare_averaged = false;
    double level = 0.95;
    auto* summarize = app.add_subcommand("summarize", "Resolve labels and tabulate credible intervals");
    summarize->add_option("chain", summary_dir)->required();
    summarize->add_flag("--compare-averaged", compare_averaged, "Add size-weighted average intervals");
    summarize->add_option("--level", level)->check(CLI::Range(0.0, 1.0))->capture_default_str();

    fs::path diag_dir;
    int max_lag = 100;
    auto* diagnose = app.add_subcommand("diagnose", "ESS, Geweke and ACF tables");
    diagnose->add_option("chain", diag_dir)->required();
    diagnose->add_option("--max-lag", max_lag)->check(CLI::PositiveNumber)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*simulate) return cmd_simulate(sim);
        if (*fitcmd) return cmd_fit(fit);
        if (*summarize) return cmd_summarize(summary_dir, compare_averaged, level);
        if (*diagnose) return cmd_diagnose(diag_dir, max_lag);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return kNumerical;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return kOk;
}
