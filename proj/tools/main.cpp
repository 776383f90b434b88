// mstr: simulate, fit and summarize Markov-switching zero-inflated tensor
// regressions of binary network panels.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mstr/diagnostics.hpp"
#include "mstr/distributions.hpp"
#include "mstr/io.hpp"
#include "mstr/parallel.hpp"
#include "mstr/pooled.hpp"
#include "mstr/simulate.hpp"

#ifndef MSTR_VERSION
#define MSTR_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using namespace mstr;

namespace {

enum ExitCode : int { kOk = 0, kFailure = 1, kUsage = 2, kInvalid = 3, kNumerical = 4 };

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

struct PriorFlags {
  double alpha = 1.0, b_tau = 1.0, a_lambda = 3.0, b_lambda = 2.0, a_rho = 1.0, b_rho = 1.0;
  double c_diag = 8.0, c_off = 2.0;

  void add(CLI::App* app) {
    app->add_option("--alpha", alpha, "Dirichlet concentration of the level weights");
    app->add_option("--b-tau", b_tau, "rate of the global variance prior");
    app->add_option("--a-lambda", a_lambda, "shape of the lambda prior");
    app->add_option("--b-lambda", b_lambda, "rate of the lambda prior");
    app->add_option("--a-rho", a_rho, "Beta prior on rho, first parameter");
    app->add_option("--b-rho", b_rho, "Beta prior on rho, second parameter");
    app->add_option("--c-diag", c_diag, "transition prior concentration on the diagonal");
    app->add_option("--c-off", c_off, "transition prior concentration off the diagonal");
  }

  PriorConfig build(Index regimes, Index rank) const {
    PriorConfig cfg = PriorConfig::defaults(regimes, rank);
    cfg.alpha = alpha;
    cfg.b_tau = b_tau;
    cfg.a_lambda.setConstant(a_lambda);
    cfg.b_lambda.setConstant(b_lambda);
    cfg.a_rho.setConstant(a_rho);
    cfg.b_rho.setConstant(b_rho);
    cfg.c_xi.setConstant(c_off);
    cfg.c_xi.diagonal().setConstant(c_diag);
    cfg.validate();
    return cfg;
  }
};

struct ChainFlags {
  long iterations = 2000, burn_in = 1000, thin = 1;
  std::uint64_t seed = 1;
  double hmc_step = 0.1;
  int hmc_nleap = 10;
  double jitter = 0.0;
  bool no_adapt = false;

  void add(CLI::App* app) {
    app->add_option("--iterations", iterations, "total sweeps");
    app->add_option("--burn-in", burn_in, "sweeps discarded before storing draws");
    app->add_option("--thin", thin, "store every n-th post-burn-in sweep");
    app->add_option("--seed", seed, "random seed");
    app->add_option("--hmc-step", hmc_step, "initial leapfrog step of the lambda move");
    app->add_option("--hmc-nleap", hmc_nleap, "leapfrog steps per lambda move");
    app->add_option("--jitter", jitter, "relative diagonal jitter for the Gaussian conditionals");
    app->add_flag("--no-adapt", no_adapt, "keep the leapfrog step fixed during burn-in");
  }

  ChainConfig build(int threads) const {
    ChainConfig c;
    c.iterations = iterations;
    c.burn_in = burn_in;
    c.thin = thin;
    c.seed = seed;
    c.hmc_step = hmc_step;
    c.hmc_nleap = hmc_nleap;
    c.jitter = jitter;
    c.threads = threads;
    c.adapt_hmc = !no_adapt;
    c.validate();
    return c;
  }
};

struct DimFlags {
  Index I = 0, J = 0, K = 1, T = 0, Q = 1;

  void add(CLI::App* app, bool required) {
    auto* i = app->add_option("--I", I, "first node dimension");
    auto* j = app->add_option("--J", J, "second node dimension");
    app->add_option("--K", K, "layer dimension");
    auto* t = app->add_option("--T", T, "time points");
    app->add_option("--Q", Q, "covariates, intercept included");
    if (required) {
      i->required();
      j->required();
      t->required();
    }
  }

  PanelDims build() const {
    PanelDims d{I, J, K, T, Q};
    d.validate();
    return d;
  }
};

json options_json(const CLI::App* app) {
  json out = json::object();
  for (const auto* opt : app->get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "config") continue;
    const auto& r = opt->results();
    out[name] = r.empty() ? opt->get_default_str() : r.back();
  }
  return out;
}

// Replays `--config FILE` as ordinary flags placed before the remaining
// command line, so explicit flags take precedence.
std::vector<std::string> expand_config(const std::vector<std::string>& args, const CLI::App& app) {
  if (args.size() < 2) return args;
  const CLI::App* sub = nullptr;
  for (const auto* s : app.get_subcommands({})) {
    if (s->get_name() == args[1]) sub = s;
  }
  if (sub == nullptr) return args;

  std::vector<std::string> rest, config;
  for (std::size_t n = 2; n < args.size(); ++n) {
    std::string path;
    if (args[n] == "--config") {
      if (n + 1 >= args.size()) throw UsageError("--config requires a file argument");
      path = args[++n];
    } else if (args[n].rfind("--config=", 0) == 0) {
      path = args[n].substr(9);
    } else {
      rest.push_back(args[n]);
      continue;
    }
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file " + path);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto b = line.find_first_not_of(" \t\r");
      if (b == std::string::npos || line[b] == '#' || line[b] == ';' || line[b] == '[') continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw UsageError(path + ":" + std::to_string(line_no) + ": expected key=value");
      }
      auto strip = [](std::string s) {
        s.erase(0, s.find_first_not_of(" \t\r"));
        s.erase(s.find_last_not_of(" \t\r") + 1);
        if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
        return s;
      };
      const std::string key = strip(line.substr(0, eq));
      const std::string value = strip(line.substr(eq + 1));
      const CLI::Option* opt = nullptr;
      try {
        opt = sub->get_option("--" + key);
      } catch (const CLI::OptionNotFound&) {
        throw UsageError(path + ":" + std::to_string(line_no) + ": unknown key '" + key + "' for " + args[1]);
      }
      if (opt->get_expected_min() == 0) {
        if (value == "true" || value == "1" || value == "yes") config.push_back("--" + key);
      } else {
        config.push_back("--" + key);
        config.push_back(value);
      }
    }
  }
  std::vector<std::string> out{args[0], args[1]};
  out.insert(out.end(), config.begin(), config.end());
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

fs::path prepare_out(const std::string& out) {
  fs::path dir(out);
  fs::create_directories(dir);
  return dir;
}

void write_json(const fs::path& path, const json& j) { write_atomic(path, j.dump(2) + "\n"); }

json diagnostics_json(const ChainDiagnostics& d) {
  json blocks = json::object();
  for (int b = 0; b < kBlockCount; ++b) blocks[block_name(b)] = d.block_seconds[static_cast<std::size_t>(b)];
  return {{"sweeps", d.sweeps},
          {"total_seconds", d.total_seconds},
          {"block_seconds", blocks},
          {"hmc_acceptance", d.hmc_acceptance},
          {"hmc_acceptance_burn_in", d.hmc_acceptance_burn_in},
          {"hmc_flagged", d.hmc_flagged},
          {"hmc_step", std::vector<double>(d.hmc_step.data(), d.hmc_step.data() + d.hmc_step.size())}};
}

json trace_summary(const std::map<std::string, std::vector<double>>& traces) {
  json out = json::object();
  for (const auto& [name, x] : traces) {
    if (x.size() < 2) continue;
    out[name] = {{"mean", sample_mean(x)},
                 {"sd", std::sqrt(sample_variance(x))},
                 {"q05", quantile(x, 0.05)},
                 {"q95", quantile(x, 0.95)},
                 {"ess", effective_sample_size(x)}};
  }
  return out;
}

std::string label(const char* base, Index l) { return std::string(base) + "_" + std::to_string(l + 1); }

// ---------------------------------------------------------------- simulate

struct SimulateCmd {
  DimFlags dims;
  PriorFlags prior;
  Index L = 2, R = 1;
  std::uint64_t seed = 1;
  std::string initial = "stationary";
  std::string out = ".";
  CLI::App* app = nullptr;

  void add(CLI::App& root) {
    app = root.add_subcommand("simulate", "draw a synthetic panel from the prior");
    dims.add(app, true);
    app->add_option("--L", L, "regimes");
    app->add_option("--R", R, "PARAFAC rank");
    app->add_option("--seed", seed, "random seed");
    app->add_option("--initial", initial, "law of the first regime")
        ->check(CLI::IsMember({"stationary", "uniform"}));
    prior.add(app);
  }

  int run() const {
    const PanelDims d = dims.build();
    const PriorConfig cfg = prior.build(L, R);
    const auto law = initial == "uniform" ? InitialLaw::Uniform : InitialLaw::Stationary;
    const std::string started = utc_now();
    const Simulation sim = simulate_panel(d, cfg, seed, law);
    const fs::path dir = prepare_out(out);
    save_panel(dir, sim.panel);
    write_json(dir / "truth.json", truth_json(sim));
    json manifest = {{"command", "simulate"}, {"version", MSTR_VERSION}, {"seed", seed},
                     {"config", options_json(app)}, {"started", started}, {"finished", utc_now()},
                     {"files", {"panel.csv", "covariates.csv", "truth.json"}}};
    write_json(dir / "manifest.json", manifest);
    std::cout << "wrote " << (dir / "panel.csv").string() << " (" << d.I << "x" << d.J << "x" << d.K << "x" << d.T
              << ", Q=" << d.Q << ")\n";
    return kOk;
  }
};

// --------------------------------------------------------------------- fit

struct FitCmd {
  bool pooled = false;
  std::string panel_path, covariates_path;
  Index L = 2, R = 1;
  ChainFlags chain;
  PriorFlags prior;
  int threads = default_threads();
  bool validate_only = false;
  std::string out = ".";
  CLI::App* app = nullptr;

  void add(CLI::App& root, bool pooled_model) {
    pooled = pooled_model;
    app = pooled ? root.add_subcommand("fit-pooled", "fit the pooled benchmark model")
                 : root.add_subcommand("fit", "fit the tensor model by Gibbs sampling");
    app->add_option("--panel", panel_path, "edge list (panel.csv)")->required();
    app->add_option("--covariates", covariates_path, "covariate table (covariates.csv)")->required();
    app->add_option("--L", L, "regimes");
    if (!pooled) app->add_option("--R", R, "PARAFAC rank");
    chain.add(app);
    prior.add(app);
    app->add_flag("--validate-only", validate_only, "check inputs and configuration, then stop");
  }

  int run() const {
    const PriorConfig cfg = prior.build(L, R);
    const ChainConfig cc = chain.build(threads);
    const NetworkPanel panel = load_panel(panel_path, covariates_path);
    if (validate_only) {
      std::cout << "ok: panel " << panel.I << "x" << panel.J << "x" << panel.K << "x" << panel.T
                << ", Q=" << panel.Q << ", L=" << L << (pooled ? "" : ", R=" + std::to_string(R)) << ", "
                << cc.stored_draws() << " draws to store\n";
      return kOk;
    }

    const fs::path dir = prepare_out(out);
    const fs::path tmp = dir / "draws.jsonl.tmp";
    std::ofstream draws(tmp, std::ios::binary | std::ios::trunc);
    if (!draws) throw std::runtime_error("cannot write " + tmp.string());

    std::map<std::string, std::vector<double>> traces;
    auto record_common = [&](double loglik, double tau, const Eigen::VectorXd& lambda, const Eigen::VectorXd& rho) {
      traces["loglik"].push_back(loglik);
      traces["tau"].push_back(tau);
      for (Index l = 0; l < L; ++l) {
        traces[label("lambda", l)].push_back(lambda[l]);
        traces[label("rho", l)].push_back(rho[l]);
      }
    };

    const std::string started = utc_now();
    ChainDiagnostics diag;
    long stored = 0;
    if (pooled) {
      auto res = run_pooled_chain(panel, cfg, cc, [&](const PooledDraw& d) {
        draws << draw_record(d).dump() << '\n';
        record_common(d.loglik, d.params.tau, d.params.lambda, d.params.rho);
        ++stored;
      });
      diag = res.diagnostics;
    } else {
      auto res = run_chain(panel, cfg, cc, [&](const Draw& d) {
        draws << draw_record(d).dump() << '\n';
        record_common(d.loglik, d.shrink.tau, d.shrink.lambda, d.params.rho);
        ++stored;
      });
      diag = res.diagnostics;
    }
    draws.close();
    if (!draws) throw std::runtime_error("write failed for " + tmp.string());
    fs::rename(tmp, dir / "draws.jsonl");

    const PanelDims dims{panel.I, panel.J, panel.K, panel.T, panel.Q};
    json manifest = {{"command", pooled ? "fit-pooled" : "fit"},
                     {"model", pooled ? "pooled" : "tensor"},
                     {"version", MSTR_VERSION},
                     {"seed", cc.seed},
                     {"config", options_json(app)},
                     {"panel", fs::absolute(panel_path).string()},
                     {"covariates", fs::absolute(covariates_path).string()},
                     {"dims", {{"I", panel.I}, {"J", panel.J}, {"K", panel.K}, {"T", panel.T}, {"Q", panel.Q}}},
                     {"regimes", L},
                     {"rank", pooled ? 1 : R},
                     {"iterations", cc.iterations},
                     {"burn_in", cc.burn_in},
                     {"thin", cc.thin},
                     {"draws", stored},
                     {"started", started},
                     {"finished", utc_now()},
                     {"diagnostics", diagnostics_json(diag)},
                     {"summary", trace_summary(traces)}};
    if (pooled) {
      manifest["g_legend"] = {{"order", {"regime", "covariate"}}, {"Q", panel.Q}, {"regimes", L}};
    } else {
      manifest["gamma_legend"] = gamma_legend(dims, L, R);
    }
    write_atomic(dir / "run.ini", app->config_to_str(true, false));
    write_json(dir / "manifest.json", manifest);
    std::cout << "stored " << stored << " draws in " << (dir / "draws.jsonl").string() << " ("
              << std::setprecision(3) << diag.total_seconds << " s, HMC acceptance " << diag.hmc_acceptance << ")\n";
    return kOk;
  }
};

// --------------------------------------------------------------- summarize

struct SummarizeCmd {
  std::string run_dir;
  std::string panel_path;
  std::string out;
  CLI::App* app = nullptr;

  void add(CLI::App& root) {
    app = root.add_subcommand("summarize", "posterior summaries of a fitted run");
    app->add_option("--run", run_dir, "directory holding manifest.json and draws.jsonl")->required();
    app->add_option("--panel", panel_path, "edge list for the degree series (default: the fitted panel)");
  }

  int run() const {
    const fs::path dir(run_dir);
    std::ifstream mf(dir / "manifest.json");
    if (!mf) throw ValidationError("no manifest.json in " + dir.string());
    json manifest;
    try {
      manifest = json::parse(mf);
    } catch (const json::parse_error& e) {
      throw ParseError("manifest.json: malformed at byte offset " + std::to_string(e.byte), e.byte);
    }
    const auto& dm = manifest.at("dims");
    const PanelDims dims{dm.at("I").get<Index>(), dm.at("J").get<Index>(), dm.at("K").get<Index>(),
                         dm.at("T").get<Index>(), dm.at("Q").get<Index>()};
    const Index L = manifest.at("regimes").get<Index>();
    const Index R = manifest.at("rank").get<Index>();
    const bool pooled = manifest.value("model", "tensor") == "pooled";

    std::ifstream df(dir / "draws.jsonl");
    if (!df) throw ValidationError("no draws.jsonl in " + dir.string());
    std::vector<Draw> draws;
    std::vector<PooledDraw> pdraws;
    if (pooled) {
      pdraws = read_pooled_draws(df, dims.Q, L);
    } else {
      draws = read_draws(df, dims, L, R);
    }
    const std::size_t n = pooled ? pdraws.size() : draws.size();
    if (n == 0) throw ValidationError("draws.jsonl holds no draws");
    auto path_of = [&](std::size_t d) -> const std::vector<int>& { return pooled ? pdraws[d].s : draws[d].s; };
    auto rho_of = [&](std::size_t d) -> const Eigen::VectorXd& {
      return pooled ? pdraws[d].params.rho : draws[d].params.rho;
    };

    const fs::path target = out.empty() ? dir : prepare_out(out);

    // coefficients.csv: one row per (i, j, k, covariate, regime).
    {
      std::ostringstream os;
      os << std::setprecision(17) << "i,j,k,covariate,regime,mean,q05,q95\n";
      const Index entries = dims.I * dims.J * dims.K * dims.Q;
      const Index block = std::max<Index>(1, static_cast<Index>(4000000 / n));
      std::vector<double> samples;
      for (Index l = 0; l < L; ++l) {
        for (Index lo = 0; lo < entries; lo += block) {
          const Index hi = std::min(entries, lo + block);
          samples.assign(static_cast<std::size_t>((hi - lo)) * n, 0.0);
          for (std::size_t d = 0; d < n; ++d) {
            for (Index e = lo; e < hi; ++e) {
              const Index i = e % dims.I, j = (e / dims.I) % dims.J, k = (e / (dims.I * dims.J)) % dims.K,
                          q = e / (dims.I * dims.J * dims.K);
              double v = 0.0;
              if (pooled) {
                v = pdraws[d].params.g(q, l);
              } else {
                const auto& m = draws[d].params.marginals[static_cast<std::size_t>(l)];
                for (Index r = 0; r < R; ++r) {
                  v += m.factor(0)(i, r) * m.factor(1)(j, r) * m.factor(2)(k, r) * m.factor(3)(q, r);
                }
              }
              samples[static_cast<std::size_t>(e - lo) * n + d] = v;
            }
          }
          for (Index e = lo; e < hi; ++e) {
            std::vector<double> x(samples.begin() + static_cast<long>((e - lo) * static_cast<Index>(n)),
                                  samples.begin() + static_cast<long>((e - lo + 1) * static_cast<Index>(n)));
            const Index i = e % dims.I, j = (e / dims.I) % dims.J, k = (e / (dims.I * dims.J)) % dims.K,
                        q = e / (dims.I * dims.J * dims.K);
            os << i + 1 << ',' << j + 1 << ',' << k + 1 << ',' << q + 1 << ',' << l + 1 << ',' << sample_mean(x)
               << ',' << quantile(x, 0.05) << ',' << quantile(x, 0.95) << '\n';
          }
        }
      }
      write_atomic(target / "coefficients.csv", os.str());
    }

    // regime_probs.csv: share of draws with s_t = l.
    {
      std::ostringstream os;
      os << std::setprecision(17) << "t";
      for (Index l = 0; l < L; ++l) os << ",p" << l + 1;
      os << '\n';
      for (Index t = 0; t < dims.T; ++t) {
        std::vector<double> count(static_cast<std::size_t>(L), 0.0);
        for (std::size_t d = 0; d < n; ++d) count[static_cast<std::size_t>(path_of(d).at(static_cast<std::size_t>(t)))] += 1.0;
        os << t + 1;
        for (double c : count) os << ',' << c / static_cast<double>(n);
        os << '\n';
      }
      write_atomic(target / "regime_probs.csv", os.str());
    }

    // rho_samples.csv
    {
      std::ostringstream os;
      os << std::setprecision(17) << "draw,iteration";
      for (Index l = 0; l < L; ++l) os << ",rho" << l + 1;
      os << '\n';
      for (std::size_t d = 0; d < n; ++d) {
        os << d + 1 << ',' << (pooled ? pdraws[d].iteration : draws[d].iteration);
        for (Index l = 0; l < L; ++l) os << ',' << rho_of(d)[l];
        os << '\n';
      }
      write_atomic(target / "rho_samples.csv", os.str());
    }

    // degree.csv: edge count per time point and the most probable regime.
    {
      const std::string pp = panel_path.empty() ? manifest.at("panel").get<std::string>() : panel_path;
      std::ifstream pf(pp);
      if (!pf) throw ValidationError("cannot open panel file " + pp);
      const NetworkPanel panel = read_panel_csv(pf, pp);
      if (panel.T != dims.T) throw ValidationError("panel " + pp + " has T=" + std::to_string(panel.T) +
                                                   " but the run has T=" + std::to_string(dims.T));
      std::ostringstream os;
      os << "t,degree,density,map_regime\n" << std::setprecision(17);
      for (Index t = 0; t < dims.T; ++t) {
        std::vector<long> count(static_cast<std::size_t>(L), 0);
        for (std::size_t d = 0; d < n; ++d) ++count[static_cast<std::size_t>(path_of(d).at(static_cast<std::size_t>(t)))];
        const auto best = std::max_element(count.begin(), count.end()) - count.begin();
        const double deg = static_cast<double>(panel.edge_count(t));
        os << t + 1 << ',' << panel.edge_count(t) << ',' << deg / static_cast<double>(panel.edges()) << ','
           << best + 1 << '\n';
      }
      write_atomic(target / "degree.csv", os.str());
    }

    // ess.csv
    {
      std::map<std::string, std::vector<double>> traces;
      for (std::size_t d = 0; d < n; ++d) {
        traces["loglik"].push_back(pooled ? pdraws[d].loglik : draws[d].loglik);
        traces["tau"].push_back(pooled ? pdraws[d].params.tau : draws[d].shrink.tau);
        for (Index l = 0; l < L; ++l) {
          traces[label("rho", l)].push_back(rho_of(d)[l]);
          traces[label("lambda", l)].push_back(pooled ? pdraws[d].params.lambda[l] : draws[d].shrink.lambda[l]);
        }
      }
      std::ostringstream os;
      os << std::setprecision(17) << "parameter,mean,sd,q05,q95,ess\n";
      for (const auto& [name, x] : traces) {
        const double sd = x.size() > 1 ? std::sqrt(sample_variance(x)) : 0.0;
        os << name << ',' << sample_mean(x) << ',' << sd << ',' << quantile(x, 0.05) << ',' << quantile(x, 0.95)
           << ',' << (x.size() > 1 ? effective_sample_size(x) : 1.0) << '\n';
      }
      write_atomic(target / "ess.csv", os.str());
    }
    std::cout << "summarized " << n << " draws into " << target.string() << "\n";
    return kOk;
  }
};

// ------------------------------------------------------------------ geweke

struct GewekeCmd {
  DimFlags dims;
  PriorFlags prior;
  Index L = 2, R = 2;
  long sweeps = 20000;
  std::uint64_t seed = 1;
  std::string model = "tensor";
  std::string mutation = "none";
  double threshold = 0.0;
  CLI::App* app = nullptr;

  void add(CLI::App& root) {
    app = root.add_subcommand("geweke", "joint-distribution check of the sampler");
    dims.I = 3;
    dims.J = 3;
    dims.T = 20;
    dims.Q = 2;
    dims.add(app, false);
    app->add_option("--L", L, "regimes");
    app->add_option("--R", R, "PARAFAC rank (tensor model)");
    app->add_option("--sweeps", sweeps, "successive-conditional sweeps and prior draws");
    app->add_option("--seed", seed, "random seed");
    app->add_option("--model", model, "sampler under test")->check(CLI::IsMember({"tensor", "pooled"}));
    app->add_option("--mutation", mutation, "deliberate sampler defect")
        ->check(CLI::IsMember({"none", "noop", "tau-order"}));
    app->add_option("--fail-above", threshold, "exit 1 when max |z| exceeds this (0 disables)");
    prior.add(app);
  }

  int run() const {
    const PanelDims d = dims.build();
    const PriorConfig cfg = prior.build(L, model == "pooled" ? 1 : R);
    GewekeConfig gc;
    gc.sweeps = sweeps;
    gc.seed = seed;
    gc.mutation = mutation == "noop" ? Mutation::NoOpBlock
                  : mutation == "tau-order" ? Mutation::TauOrderPlusOne
                                            : Mutation::None;
    const GewekeReport rep = model == "pooled" ? pooled_geweke_pair(d, cfg, gc) : geweke_pair(d, cfg, gc);
    std::cout << std::left << std::setw(22) << "statistic" << std::right << std::setw(14) << "marginal"
              << std::setw(14) << "successive" << std::setw(10) << "z" << '\n';
    for (const auto& s : rep.stats) {
      std::cout << std::left << std::setw(22) << s.name << std::right << std::setprecision(5) << std::setw(14)
                << s.marginal_mean << std::setw(14) << s.successive_mean << std::setprecision(3) << std::setw(10)
                << s.z << '\n';
    }
    std::cout << "max |z| = " << rep.max_abs_z() << '\n';
    return threshold > 0.0 && rep.max_abs_z() > threshold ? kFailure : kOk;
  }
};

template <typename Cmd>
void add_common(Cmd& cmd, int* threads) {
  cmd.app->add_option("--out", cmd.out, "output directory")->envname("MSTR_OUTPUT_DIR");
  if (threads) cmd.app->add_option("--threads", *threads, "worker threads for the emission terms");
  cmd.app->add_option("--config", "key=value file of option defaults; explicit flags win");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Markov-switching zero-inflated tensor regression for binary network panels"};
  app.set_version_flag("--version", MSTR_VERSION);
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast)->always_capture_default();

  SimulateCmd simulate;
  FitCmd fit, fit_pooled;
  SummarizeCmd summarize;
  GewekeCmd geweke;
  simulate.add(app);
  fit.add(app, false);
  fit_pooled.add(app, true);
  summarize.add(app);
  geweke.add(app);
  add_common(simulate, nullptr);
  add_common(fit, &fit.threads);
  add_common(fit_pooled, &fit_pooled.threads);
  add_common(summarize, nullptr);
  geweke.app->add_option("--config", "key=value file of option defaults; explicit flags win");

  try {
    std::vector<std::string> args(argv, argv + argc);
    args = expand_config(args, app);
    std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    std::cerr << "run with --help for usage\n";
    return kUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (*simulate.app) return simulate.run();
    if (*fit.app) return fit.run();
    if (*fit_pooled.app) return fit_pooled.run();
    if (*summarize.app) return summarize.run();
    if (*geweke.app) return geweke.run();
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kInvalid;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kInvalid;
  } catch (const ArgumentError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kInvalid;
  } catch (const SamplerError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kNumerical;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kNumerical;
  } catch (const InvariantError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kUsage;
}
