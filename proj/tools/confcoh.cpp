// confcoh: command-line driver for evolutions, mixing sweeps and spectrum analyses.
// Output is CSV with a '#'-prefixed metadata header.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <confcoh/confcoh.hpp>

#ifndef CONFCOH_VERSION
#define CONFCOH_VERSION "0.0.0"
#endif

using namespace confcoh;

namespace {

enum Exit { kOk = 0, kError = 1, kUsage = 2, kAbort = 3 };

/// Invalid user input discovered after parsing (bad ranges, unknown scenarios).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Unreadable or corrupt input files.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Config echo: shortest form that reads back the same for typical inputs.
std::string short_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  return buf;
}

std::string label_str(SectorLabel l) { return std::to_string(l.n) + ":" + std::to_string(l.np); }

class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_ = std::make_unique<std::ofstream>(path, std::ios::trunc);
      if (!*file_) throw InputError("cannot write " + path);
    }
  }
  std::ostream& os() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

void meta(std::ostream& os, const std::string& command, const std::vector<std::pair<std::string, std::string>>& kv) {
  os << "# confcoh " << CONFCOH_VERSION << '\n' << "# command=" << command;
  for (const auto& [k, v] : kv) os << ' ' << k << '=' << v;
  os << '\n';
}

DensityMatrix load_density(const std::string& path) {
  try {
    return read_density(path);
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  } catch (const std::runtime_error& e) {
    throw InputError(e.what());
  }
}

std::vector<int> parse_sites(const std::string& list, int L) {
  std::vector<int> sites;
  std::stringstream ss(list);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    std::size_t used = 0;
    int s = 0;
    try {
      s = std::stoi(tok, &used);
    } catch (const std::exception&) {
      throw UsageError("bad site '" + tok + "'");
    }
    if (used != tok.size()) throw UsageError("bad site '" + tok + "'");
    if (s < 1 || s > L) throw UsageError("site " + tok + " outside 1.." + std::to_string(L));
    sites.push_back(s - 1);
  }
  if (sites.empty()) throw UsageError("empty site list");
  return sites;
}

void check_cut(int L, int cut) {
  if (cut < 1 || cut >= L) throw UsageError("cut must satisfy 1 <= cut < L");
}

void check_dense(int L, int N) {
  const std::uint64_t dim = binomial(L, N);
  if (dim > kDenseGuard) throw UsageError("sector dimension " + std::to_string(dim) + " exceeds the dense guard " + std::to_string(kDenseGuard));
}

// Built-in two-state scenarios for mix-sweep: rho and the mixing partner sigma.
std::pair<DensityMatrix, DensityMatrix> scenario(const std::string& name) {
  if (name == "fig1b") {
    const auto b = enumerate_sector(3, 1);
    Vector v = Vector::Zero(3);
    v(0) = v(1) = 1.0;
    const auto rho = projector(normalized_state(b, v));
    return {rho, diag_part(rho)};
  }
  if (name == "bell") {
    const auto b = enumerate_sector(2, 1);
    Vector v(2);
    v << 1.0, 1.0;
    const auto rho = projector(normalized_state(b, v));
    return {rho, diag_part(rho)};
  }
  throw UsageError("unknown scenario '" + name + "' (known: fig1b, bell)");
}

int default_cut(const std::string& name) { return name == "fig1b" ? 2 : 1; }

// ---------------------------------------------------------------------------

struct EvolveConfig {
  int L = 12;
  int N = 2;
  int cut = 6;
  double J = 1.0;
  double gamma = 0.005;
  double dt = 0.05;
  int steps = 1200;
  int chi = 200;
  double cutoff = 1e-12;
  double abort_discarded = 1e-3;
  std::string backend = "mpdo";
  std::string init = "sites:1,11";
  std::string out;
  int observe_every = 10;
  int top_k = 8;
  int order = 2;
  int substeps = 4;
  std::string checkpoint;
};

void header_row(std::ostream& os, const std::string& prefix, int L, int top_k) {
  os << prefix << "purity," << prefix << "C_N," << prefix << "OSEE";
  for (int k = 1; k <= L; ++k) os << ',' << prefix << "n_" << k;
  for (int k = 1; k <= top_k; ++k) os << ',' << prefix << "oses_" << k << ',' << prefix << "label_" << k;
}

void obs_row(std::ostream& os, const Observation& o, int top_k) {
  os << num(o.purity) << ',' << num(o.coherence) << ',' << num(o.osee);
  for (double n : o.densities) os << ',' << num(n);
  for (int k = 0; k < top_k; ++k) {
    if (k < static_cast<int>(o.top_oses.size()))
      os << ',' << num(o.top_oses[static_cast<std::size_t>(k)].value) << ',' << label_str(o.top_oses[static_cast<std::size_t>(k)].label);
    else
      os << ",,";
  }
}

int cmd_evolve(const EvolveConfig& c) {
  const LindbladModel model{c.L, c.J, c.gamma};
  try {
    model.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (c.N < 0 || c.N > c.L) throw UsageError("N must satisfy 0 <= N <= L");
  check_cut(c.L, c.cut);
  if (!(c.dt > 0.0) || c.steps < 0 || c.observe_every < 1 || c.top_k < 0 || c.substeps < 1 || c.chi < 1 || c.cutoff < 0.0)
    throw UsageError("invalid numeric option");
  if (c.order != 1 && c.order != 2) throw UsageError("order must be 1 or 2");
  const bool want_dense = c.backend == "dense" || c.backend == "both";
  const bool want_mpdo = c.backend == "mpdo" || c.backend == "both";
  if (!want_dense && !want_mpdo) throw UsageError("backend must be dense, mpdo or both");

  const auto colon = c.init.find(':');
  if (colon == std::string::npos) throw UsageError("init must be sites:<list>, file:<path> or checkpoint:<base>");
  const std::string kind = c.init.substr(0, colon), arg = c.init.substr(colon + 1);
  if (kind != "sites" && kind != "file" && kind != "checkpoint") throw UsageError("unknown init kind '" + kind + "'");
  if (kind == "checkpoint" && want_dense) throw UsageError("checkpoint init requires backend mpdo");

  TruncationParams trunc;
  trunc.chi_max = c.chi;
  trunc.svd_cutoff = c.cutoff;
  trunc.abort_discarded = c.abort_discarded;

  std::vector<int> sites;
  std::optional<DensityMatrix> rho0;
  std::optional<MpdoState> m0;
  if (kind == "sites") {
    sites = parse_sites(arg, c.L);
    if (static_cast<int>(sites.size()) != c.N) throw UsageError("init lists " + std::to_string(sites.size()) + " sites but N = " + std::to_string(c.N));
  } else if (kind == "file") {
    rho0 = load_density(arg);
    if (rho0->basis().sites() != c.L || rho0->basis().particles() != c.N) throw UsageError("state file sector disagrees with --L/--N");
  } else {
    try {
      m0 = load_checkpoint(arg);
    } catch (const std::exception& e) {
      throw InputError(e.what());
    }
    if (m0->sites != c.L || m0->particles != c.N) throw UsageError("checkpoint sector disagrees with --L/--N");
    m0->trunc = trunc;
  }
  if (want_dense || (want_mpdo && rho0)) check_dense(c.L, c.N);

  std::optional<Trajectory> dense, mpdo;
  if (want_dense) {
    const DensityMatrix start = rho0 ? *rho0 : projector(occupation_state(enumerate_sector(c.L, c.N), sites));
    DenseEvolveOptions opt;
    opt.dt = c.dt;
    opt.steps = c.steps;
    opt.observe_every = c.observe_every;
    opt.substeps = c.substeps;
    opt.cut = c.cut;
    opt.top_k = c.top_k;
    dense = evolve(start, model, opt);
  }
  if (want_mpdo) {
    MpdoState m = m0 ? std::move(*m0) : rho0 ? mpdo_from_dense(*rho0, trunc) : mpdo_product(c.L, sites, trunc);
    TebdOptions opt;
    opt.dt = c.dt;
    opt.steps = c.steps;
    opt.order = c.order;
    opt.observe_every = c.observe_every;
    opt.cut = c.cut;
    opt.top_k = c.top_k;
    mpdo = evolve_mpdo(m, model, opt);
    if (!c.checkpoint.empty()) save_checkpoint(m, c.checkpoint);
  }

  Output out(c.out);
  auto& os = out.os();
  meta(os, "evolve",
       {{"L", std::to_string(c.L)}, {"N", std::to_string(c.N)}, {"cut", std::to_string(c.cut)}, {"J", short_num(c.J)},
        {"gamma", short_num(c.gamma)}, {"dt", short_num(c.dt)}, {"steps", std::to_string(c.steps)}, {"chi", std::to_string(c.chi)},
        {"cutoff", short_num(c.cutoff)}, {"abort_discarded", short_num(c.abort_discarded)}, {"backend", c.backend}, {"init", c.init},
        {"observe_every", std::to_string(c.observe_every)}, {"top_k", std::to_string(c.top_k)}, {"order", std::to_string(c.order)},
        {"substeps", std::to_string(c.substeps)}});
  os << "t,";
  if (dense && mpdo) {
    header_row(os, "dense_", c.L, c.top_k);
    os << ',';
    header_row(os, "mpdo_", c.L, c.top_k);
  } else {
    header_row(os, "", c.L, c.top_k);
  }
  if (mpdo) os << ",discarded";
  os << '\n';
  const auto& ref = dense ? *dense : *mpdo;
  double dc = 0.0, dp = 0.0;
  for (std::size_t k = 0; k < ref.points.size(); ++k) {
    os << num(ref.points[k].time) << ',';
    if (dense) obs_row(os, dense->points[k], c.top_k);
    if (dense && mpdo) os << ',';
    if (mpdo) {
      obs_row(os, mpdo->points[k], c.top_k);
      os << ',' << num(mpdo->points[k].discarded_weight);
    }
    os << '\n';
    if (dense && mpdo) {
      dc = std::max(dc, std::abs(dense->points[k].coherence - mpdo->points[k].coherence));
      dp = std::max(dp, std::abs(dense->points[k].purity - mpdo->points[k].purity));
    }
  }
  if (dense && mpdo) os << "# max_abs_delta C_N=" << num(dc) << " purity=" << num(dp) << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

struct MixConfig {
  std::string scenario_name;
  std::string state;
  std::string sigma;
  int cut = 0;
  int points = 21;
  std::string out;
};

int cmd_mix_sweep(const MixConfig& c) {
  if (c.scenario_name.empty() == c.state.empty()) throw UsageError("give exactly one of --scenario or --state");
  if (c.points < 2) throw UsageError("points must be at least 2");
  std::optional<DensityMatrix> rho, sigma;
  int cut = c.cut;
  if (!c.scenario_name.empty()) {
    auto [r, s] = scenario(c.scenario_name);
    rho = r;
    sigma = s;
    if (cut == 0) cut = default_cut(c.scenario_name);
  } else {
    rho = load_density(c.state);
    sigma = c.sigma.empty() ? diag_part(*rho) : load_density(c.sigma);
    if (!(rho->basis() == sigma->basis())) throw UsageError("state and sigma live in different sectors");
    if (cut == 0) cut = rho->basis().sites() / 2;
  }
  check_cut(rho->basis().sites(), cut);
  check_dense(rho->basis().sites(), rho->basis().particles());

  std::vector<std::string> rows;
  std::size_t width = 0;
  for (int k = 0; k < c.points; ++k) {
    const double p = static_cast<double>(k) / (c.points - 1);
    const auto r = mix(*rho, *sigma, p);
    const auto blocks = build_c_blocks(r, cut);
    const auto spec = oses(blocks);
    const auto sorted = spec.sorted_descending();
    width = std::max(width, sorted.size());
    std::string line = num(p) + ',' + num(purity(r)) + ',' + num(osee(spec)) + ',' + num(configuration_coherence(blocks)) + ',' +
                       num(negativity(r, cut));
    for (const auto& e : sorted) line += ',' + num(e.value) + ',' + label_str(e.label);
    rows.push_back(std::move(line));
  }
  Output out(c.out);
  auto& os = out.os();
  meta(os, "mix-sweep",
       {{"scenario", c.scenario_name.empty() ? "-" : c.scenario_name}, {"state", c.state.empty() ? "-" : c.state},
        {"sigma", c.sigma.empty() ? "diag" : c.sigma}, {"cut", std::to_string(cut)}, {"points", std::to_string(c.points)}});
  os << "p,purity,OSEE,C_N,negativity";
  for (std::size_t k = 1; k <= width; ++k) os << ",oses_" << k << ",label_" << k;
  os << '\n';
  for (const auto& r : rows) os << r << '\n';
  return kOk;
}

int cmd_spectrum(const std::string& path, int cut, const std::string& out_path) {
  const auto rho = load_density(path);
  check_cut(rho.basis().sites(), cut);
  const auto report = detect_degenerate_values(rho, cut);
  Output out(out_path);
  auto& os = out.os();
  meta(os, "spectrum", {{"state", path}, {"cut", std::to_string(cut)}});
  os << "# purity=" << num(purity(rho)) << " C_N=" << num(config_coherence_offdiag(rho, cut)) << " quantum_sum=" << num(report.quantum_sum)
     << " labels_agree_with_probe=" << (report.labels_agree_with_probe ? "true" : "false") << '\n';
  os << "rank,value,n,np,correlation\n";
  int rank = 1;
  for (const auto& v : report.values)
    os << rank++ << ',' << num(v.value) << ',' << v.label.n << ',' << v.label.np << ',' << to_string(v.classification) << '\n';
  return kOk;
}

int cmd_bounds(int L, int N, int cut, const std::string& out_path) {
  if (L < 2 || L > kMaxSites) throw UsageError("L must be in [2, 62]");
  if (N < 0 || N > L) throw UsageError("N must satisfy 0 <= N <= L");
  check_cut(L, cut);
  const auto table = rank_bound_table(cut, L - cut, N);
  Output out(out_path);
  auto& os = out.os();
  meta(os, "bounds", {{"L", std::to_string(L)}, {"N", std::to_string(N)}, {"cut", std::to_string(cut)}});
  os << "block,n,np,degeneracy,max_rank\n";
  for (const auto& r : table.rows) os << r.block << ',' << r.label.n << ',' << r.label.np << ',' << r.degeneracy << ',' << r.max_rank << '\n';
  os << "total,,,," << table.total << '\n';
  return kOk;
}

int cmd_negativity(const std::string& path, int cut) {
  const auto rho = load_density(path);
  check_cut(rho.basis().sites(), cut);
  check_dense(rho.basis().sites(), rho.basis().particles());
  std::cout << num(negativity(rho, cut)) << '\n';
  return kOk;
}

struct StateConfig {
  int L = 0;
  int N = 0;
  std::string sites;
  std::string scenario_name;
  int random_rank = 0;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_state(const StateConfig& c) {
  const int chosen = !c.sites.empty() + !c.scenario_name.empty() + (c.random_rank > 0);
  if (chosen != 1) throw UsageError("give exactly one of --sites, --scenario or --random-rank");
  if (c.out.empty()) throw UsageError("--out is required");
  if (!c.scenario_name.empty()) {
    write_state(c.out, scenario(c.scenario_name).first);
    return kOk;
  }
  if (c.L < 1 || c.L > kMaxSites || c.N < 0 || c.N > c.L) throw UsageError("invalid L or N");
  check_dense(c.L, c.N);
  const auto b = enumerate_sector(c.L, c.N);
  if (!c.sites.empty()) {
    const auto s = parse_sites(c.sites, c.L);
    if (static_cast<int>(s.size()) != c.N) throw UsageError("site count disagrees with N");
    write_state(c.out, occupation_state(b, s));
  } else {
    write_state(c.out, random_fixed_n_density(b, c.random_rank, c.seed));
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Configuration coherence and operator-space entanglement tools for hardcore bosons"};
  app.set_version_flag("--version", CONFCOH_VERSION);
  app.require_subcommand(1);

  EvolveConfig ev;
  auto* evolve_cmd = app.add_subcommand("evolve", "Dephasing hopping chain: trajectory CSV");
  evolve_cmd->add_option("--L", ev.L, "Sites")->capture_default_str();
  evolve_cmd->add_option("--N", ev.N, "Particles")->capture_default_str();
  evolve_cmd->add_option("--cut", ev.cut, "Sites in A")->capture_default_str();
  evolve_cmd->add_option("--J", ev.J, "Hopping amplitude")->capture_default_str();
  evolve_cmd->add_option("--gamma", ev.gamma, "Dephasing rate")->capture_default_str();
  evolve_cmd->add_option("--dt", ev.dt, "Time step")->capture_default_str();
  evolve_cmd->add_option("--steps", ev.steps, "Number of steps")->capture_default_str();
  evolve_cmd->add_option("--chi", ev.chi, "Maximal bond dimension")->capture_default_str();
  evolve_cmd->add_option("--cutoff", ev.cutoff, "Relative singular value cutoff")->capture_default_str();
  evolve_cmd->add_option("--abort-discarded", ev.abort_discarded, "Abort when one step discards more weight")->capture_default_str();
  evolve_cmd->add_option("--backend", ev.backend, "dense, mpdo or both")->check(CLI::IsMember({"dense", "mpdo", "both"}))->capture_default_str();
  evolve_cmd->add_option("--init", ev.init, "sites:1,11 | file:<state> | checkpoint:<base>")->capture_default_str();
  evolve_cmd->add_option("--out", ev.out, "CSV path (default stdout)");
  evolve_cmd->add_option("--observe-every", ev.observe_every, "Steps between observations")->capture_default_str();
  evolve_cmd->add_option("--top-k", ev.top_k, "OSES values per row")->capture_default_str();
  evolve_cmd->add_option("--order", ev.order, "Trotter order (1 or 2)")->capture_default_str();
  evolve_cmd->add_option("--substeps", ev.substeps, "RK4 substeps per step (dense)")->capture_default_str();
  evolve_cmd->add_option("--checkpoint", ev.checkpoint, "Write the final MPDO to <base>.json/.bin");

  MixConfig mx;
  auto* mix_cmd = app.add_subcommand("mix-sweep", "(1-p) rho + p sigma over p in [0, 1]");
  mix_cmd->add_option("--scenario", mx.scenario_name, "fig1b or bell");
  mix_cmd->add_option("--state", mx.state, "State file for rho");
  mix_cmd->add_option("--sigma", mx.sigma, "State file for sigma (default: diagonal part of rho)");
  mix_cmd->add_option("--cut", mx.cut, "Sites in A (default per scenario, or L/2)");
  mix_cmd->add_option("--points", mx.points, "Grid points")->capture_default_str();
  mix_cmd->add_option("--out", mx.out, "CSV path (default stdout)");

  std::string sp_state, sp_out;
  int sp_cut = 1;
  auto* spec_cmd = app.add_subcommand("spectrum", "Labeled OSES with quantum/classical classification");
  spec_cmd->add_option("--state", sp_state, "State file")->required();
  spec_cmd->add_option("--cut", sp_cut, "Sites in A")->required();
  spec_cmd->add_option("--out", sp_out, "CSV path (default stdout)");

  int bd_L = 0, bd_N = 0, bd_cut = 0;
  std::string bd_out;
  auto* bounds_cmd = app.add_subcommand("bounds", "Maximal block ranks and bond dimension");
  bounds_cmd->add_option("--L", bd_L, "Sites")->required();
  bounds_cmd->add_option("--N", bd_N, "Particles")->required();
  bounds_cmd->add_option("--cut", bd_cut, "Sites in A")->required();
  bounds_cmd->add_option("--out", bd_out, "CSV path (default stdout)");

  std::string ng_state;
  int ng_cut = 1;
  auto* neg_cmd = app.add_subcommand("negativity", "Negativity of a stored state");
  neg_cmd->add_option("--state", ng_state, "State file")->required();
  neg_cmd->add_option("--cut", ng_cut, "Sites in A")->required();

  StateConfig st;
  auto* state_cmd = app.add_subcommand("state", "Write a state file");
  state_cmd->add_option("--L", st.L, "Sites");
  state_cmd->add_option("--N", st.N, "Particles");
  state_cmd->add_option("--sites", st.sites, "Occupied sites, 1-indexed (pure product state)");
  state_cmd->add_option("--scenario", st.scenario_name, "fig1b or bell");
  state_cmd->add_option("--random-rank", st.random_rank, "Random mixed state of this rank");
  state_cmd->add_option("--seed", st.seed, "Seed for --random-rank");
  state_cmd->add_option("--out", st.out, "Output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*evolve_cmd) return cmd_evolve(ev);
    if (*mix_cmd) return cmd_mix_sweep(mx);
    if (*spec_cmd) return cmd_spectrum(sp_state, sp_cut, sp_out);
    if (*bounds_cmd) return cmd_bounds(bd_L, bd_N, bd_cut, bd_out);
    if (*neg_cmd) return cmd_negativity(ng_state, ng_cut);
    if (*state_cmd) return cmd_state(st);
  } catch (const UsageError& e) {
    std::cerr << "confcoh: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericalAbort& e) {
    std::cerr << "confcoh: numerical abort: " << e.what() << '\n';
    return kAbort;
  } catch (const InputError& e) {
    std::cerr << "confcoh: " << e.what() << '\n';
    return kError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "confcoh: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "confcoh: " << e.what() << '\n';
    return kError;
  }
  return kUsage;
}
