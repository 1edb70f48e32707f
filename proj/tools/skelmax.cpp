// Copyright The skelmax Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "skelmax/grid_io.hpp"
#include "skelmax/harness.hpp"
#include "skelmax/parallel.hpp"

namespace {

using namespace skelmax;

constexpr int kPass = 0;
constexpr int kFail = 1;
constexpr int kInvalid = 2;

struct RunConfig {
  std::string subcommand;
  std::string p = "2";
  std::string delta = "1/8";
  std::string weight = "constant";
  std::uint64_t seed = 0;
  int threads = 0;
  std::optional<double> tol;
  std::string out;
  std::string format;
  std::string config;
  bool no_timing = false;
  bool append = false;
  std::string z = "0,0";
  int refine = 4;

  // field
  std::string f = R"({"kind":"constant"})";
  std::string input;
  std::string op = "skeleton";
  std::string eval = "centers";
  std::string rho = "greedy";
  // apconst
  std::string cls = "skeleton";
  // select
  std::size_t u = 0;
  std::string strategy = "greedy";
  double C = 4;
  // verify
  std::string check;
  int instances = 0;
  std::string weights;
  std::string K = "2,4,8,16";
  std::optional<double> constant;
  // scaling
  std::string deltas = "1/8,1/16,1/32,1/64";
};

double parse_fraction(const std::string& s) {
  if (auto slash = s.find('/'); slash != std::string::npos)
    return parse_real(s.substr(0, slash)) / parse_real(s.substr(slash + 1));
  return parse_real(s);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

IndexVec parse_z(const std::string& s) {
  const auto parts = split(s, ',');
  if (parts.empty() || parts.size() > static_cast<std::size_t>(kMaxDim)) throw InvalidInput("z must have 1 to 3 integers");
  IndexVec z(static_cast<Eigen::Index>(parts.size()));
  for (std::size_t j = 0; j < parts.size(); ++j) {
    const double v = parse_real(parts[j]);
    if (v != std::floor(v)) throw InvalidInput("z must be integer");
    z[static_cast<Eigen::Index>(j)] = static_cast<Eigen::Index>(v);
  }
  return z;
}

/// --config JSON overrides flags.
void apply_config(RunConfig& cfg) {
  if (cfg.config.empty()) return;
  std::ifstream is(cfg.config);
  if (!is) throw InvalidInput("cannot read config file " + cfg.config);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidInput(std::string("config JSON: ") + e.what());
  }
  auto text = [](const nlohmann::json& v) {
    return v.is_string() ? v.get<std::string>() : v.dump();
  };
  try {
    if (j.contains("check")) cfg.check = j.at("check").get<std::string>();
    if (j.contains("p")) cfg.p = text(j.at("p"));
    if (j.contains("delta")) cfg.delta = text(j.at("delta"));
    if (j.contains("weight")) cfg.weight = text(j.at("weight"));
    if (j.contains("seeds")) {
      const auto& s = j.at("seeds");
      if (s.is_array()) {
        if (s.empty()) throw InvalidInput("config seeds must not be empty");
        cfg.seed = s.front().get<std::uint64_t>();
        cfg.instances = static_cast<int>(s.size());
      } else {
        cfg.seed = s.get<std::uint64_t>();
      }
    }
    if (j.contains("tolerances")) {
      const auto& t = j.at("tolerances");
      cfg.tol = t.is_object() ? t.at("tol").get<double>() : t.get<double>();
    }
    if (j.contains("instances")) cfg.instances = j.at("instances").get<int>();
    if (j.contains("deltas")) cfg.deltas = text(j.at("deltas"));
    if (j.contains("z")) cfg.z = text(j.at("z"));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("config JSON: ") + e.what());
  }
}

class Output {
 public:
  explicit Output(const RunConfig& cfg) : cfg_(cfg) {}

  bool appending_to_existing() const {
    if (cfg_.out.empty() || !cfg_.append) return false;
    std::ifstream is(cfg_.out);
    return is && is.peek() != std::ifstream::traits_type::eof();
  }

  void write(const std::string& content) const {
    if (cfg_.out.empty()) {
      std::cout << content;
      return;
    }
    std::ofstream os(cfg_.out, cfg_.append ? std::ios::app : std::ios::trunc);
    if (!os) throw std::ios_base::failure("cannot open " + cfg_.out + " for writing");
    os << content;
    if (!os) throw std::ios_base::failure("write to " + cfg_.out + " failed");
  }

 private:
  const RunConfig& cfg_;
};

std::string format_of(const RunConfig& cfg, const std::string& fallback) {
  const std::string f = cfg.format.empty() ? fallback : cfg.format;
  if (f != "csv" && f != "json") throw InvalidInput("format must be csv or json");
  return f;
}

// ---------------------------------------------------------------------------

int run_field(const RunConfig& cfg) {
  const Delta delta = Delta::parse(cfg.delta);
  const LocalFrame frame(parse_z(cfg.z), delta, cfg.refine);
  const int n = frame.dim();
  if (cfg.op == "weight") {
    Output(cfg).write([&] {
      std::ostringstream os;
      write_grid_csv(os, make_weight(WeightSpec::parse(cfg.weight), frame.grid()));
      return os.str();
    }());
    return kPass;
  }
  SampledField f;
  if (!cfg.input.empty()) {
    f = load_grid_csv(cfg.input);
  } else {
    nlohmann::json desc;
    try {
      desc = nlohmann::json::parse(cfg.f);
    } catch (const nlohmann::json::parse_error& e) {
      throw InvalidInput(std::string("f descriptor JSON: ") + e.what());
    }
    f = build_field(frame.grid(), make_sampler(desc, n));
  }
  if ((f.values() < 0).any()) throw InvalidInput("f must be nonnegative");
  if (cfg.eval != "centers" && cfg.eval != "dense") throw InvalidInput("eval must be centers or dense");
  const GridSpec eval = cfg.eval == "dense" ? frame.inner_grid() : frame.lattice().grid();
  const PrefixTable table(f);

  MaximalField out;
  if (cfg.op == "skeleton") {
    out = skeleton_maximal(table, SkeletonParams::lattice(delta, 1), eval);
  } else if (cfg.op == "linearized") {
    if (cfg.eval != "centers") throw InvalidInput("the linearized operator is evaluated at cell centers");
    const CellLattice lattice = frame.lattice();
    RhoAssignment rho = cfg.rho == "greedy"   ? greedy_rho(table, lattice, delta.value())
                        : cfg.rho == "random" ? RhoAssignment::random(lattice, cfg.seed)
                                              : RhoAssignment::constant(lattice, parse_fraction(cfg.rho));
    const FaceSelection sel = select_faces(rho.skeletons(1), delta, SelectionStrategy::greedy);
    out = MaximalField(lattice.grid(), linearized_maximal(table, rho, sel, delta.value()));
  } else if (cfg.op == "hl") {
    out = hl_maximal(f, frame.unit_cube());
  } else {
    throw InvalidInput("op must be skeleton, linearized, hl or weight");
  }
  std::ostringstream os;
  write_grid_csv(os, out);
  Output(cfg).write(os.str());
  return kPass;
}

int run_apconst(const RunConfig& cfg) {
  const Delta delta = Delta::parse(cfg.delta);
  const std::vector<IndexVec> zs = {parse_z(cfg.z)};
  const GridSpec grid = covering_grid(zs, delta, cfg.refine, 3);
  const SampledField w = make_weight(WeightSpec::parse(cfg.weight), grid);
  const WeightField wf(w, delta);
  ApReport rep;
  if (cfg.cls == "skeleton") {
    rep = ap_skeleton_global(wf, parse_fraction(cfg.p), zs, RhoFamily{true, true, 4, cfg.seed});
  } else if (cfg.cls == "a1") {
    rep = a1_skeleton(wf, zs, RhoFamily{true, true, 4, cfg.seed});
  } else if (cfg.cls == "nonlinear") {
    rep = ap_nonlinear(wf, parse_fraction(cfg.p), lattice_samples(zs, delta));
  } else if (cfg.cls == "cubic") {
    rep = ap_cubic(w, parse_fraction(cfg.p));
    rep.delta = delta;
  } else {
    throw InvalidInput("class must be skeleton, a1, nonlinear or cubic");
  }
  if (format_of(cfg, "json") == "json") {
    Output(cfg).write(to_json(rep).dump(2) + "\n");
  } else {
    std::string s = "class,p,delta,value,lower,upper\n" + rep.cls + ',' + format_real(rep.p) + ',' + rep.delta.str() +
                    ',' + format_real(rep.value) + ',';
    s += rep.bracket ? format_real(rep.bracket->first) + ',' + format_real(rep.bracket->second) : std::string(",");
    Output(cfg).write(s + "\n");
  }
  return kPass;
}

int run_select(const RunConfig& cfg) {
  const Delta delta = Delta::parse(cfg.delta);
  std::vector<Skeleton> skels;
  if (!cfg.input.empty()) {
    std::ifstream is(cfg.input);
    if (!is) throw InvalidInput("cannot read skeleton file " + cfg.input);
    skels = read_skeletons_csv(is);
  } else {
    const std::size_t u = cfg.u > 0 ? cfg.u : static_cast<std::size_t>(delta.m) * static_cast<std::size_t>(delta.m);
    skels = random_lattice_family(parse_z(cfg.z), delta, u, cfg.seed);
  }
  SelectionStrategy strategy;
  if (cfg.strategy == "greedy") strategy = SelectionStrategy::greedy;
  else if (cfg.strategy == "random") strategy = SelectionStrategy::random;
  else throw InvalidInput("strategy must be greedy or random");
  const FaceSelection sel = select_faces(skels, delta, strategy, cfg.seed);
  const int n = skels.empty() ? 2 : skels.front().n();
  const LoadReport rep = verify_selection_bound(sel, std::max<std::size_t>(1, skels.size()), n, 1, cfg.C);
  if (format_of(cfg, "json") == "json") {
    nlohmann::ordered_json j;
    j["u"] = rep.u;
    j["max_load"] = rep.max_load;
    j["exponent"] = rep.exponent;
    j["threshold"] = rep.threshold;
    j["pass"] = rep.pass;
    Output(cfg).write(j.dump(2) + "\n");
  } else {
    std::ostringstream os;
    write_loads_csv(os, sel.loads);
    Output(cfg).write(os.str());
  }
  return rep.pass ? kPass : kFail;
}

std::vector<CheckReport> run_checks(const RunConfig& cfg) {
  const Delta delta = Delta::parse(cfg.delta);
  const double p = parse_fraction(cfg.p);
  const double tol = cfg.tol.value_or(1e-9);
  const IndexVec z = parse_z(cfg.z);
  const std::vector<IndexVec> zs = {z};
  std::vector<CheckReport> out;
  auto count = [&](int fallback) { return cfg.instances > 0 ? cfg.instances : fallback; };

  if (cfg.check == "duality" || cfg.check == "domination") {
    const int N = count(1);
    out.resize(static_cast<std::size_t>(N));
    for (int t = 0; t < N; ++t) {
      const std::uint64_t s = cfg.seed + static_cast<std::uint64_t>(t);
      out[static_cast<std::size_t>(t)] = cfg.check == "duality" ? duality_instance(p, delta, s)
                                                                : domination_instance(p, delta, s);
    }
  } else if (cfg.check == "sufficient") {
    const LocalFrame frame(z, delta, cfg.refine);
    const SampledField w = make_weight(WeightSpec::parse(cfg.weight), frame.grid());
    const EvalMode mode = cfg.eval == "dense" ? EvalMode::dense : EvalMode::centers;
    out.push_back(check_sufficient(w, p, frame, FunctionFamily::v1(frame, p, cfg.seed), cfg.constant, mode, tol).report);
  } else if (cfg.check == "necessary") {
    const SampledField w = make_weight(WeightSpec::parse(cfg.weight), covering_grid(zs, delta, cfg.refine));
    const auto sample = random_skeleton_samples(CellLattice(z, delta), static_cast<std::size_t>(count(100)), cfg.seed);
    out.push_back(check_necessary_chain(w, p, delta, sample, tol));
  } else if (cfg.check == "embedding") {
    const SampledField w = make_weight(WeightSpec::parse(cfg.weight), covering_grid(zs, delta, cfg.refine, 4));
    out.push_back(check_ap_embedding(w, p, delta, z, tol));
  } else if (cfg.check == "buckley") {
    std::vector<WeightSpec> ws;
    const std::string list = cfg.weights.empty() ? "twovalue:K=2,split=0.5;twovalue:K=4,split=0.5;twovalue:K=16,split=0.5"
                                                 : cfg.weights;
    for (const auto& item : split(list, ';')) ws.push_back(WeightSpec::parse(item));
    out.push_back(check_buckley(ws, p, LocalFrame(z, delta, 1), cfg.seed));
  } else if (cfg.check == "selection") {
    out.push_back(selection_check(cfg.u > 0 ? cfg.u : 64, count(100), cfg.seed, cfg.C));
  } else if (cfg.check == "monotone") {
    const std::vector<double> ps = {4.0 / 3.0, 1.5, 2.0, 3.0};
    out.push_back(monotone_check(delta, ps, count(20), cfg.seed));
  } else if (cfg.check == "limit") {
    std::vector<double> Ks;
    for (const auto& k : split(cfg.K, ',')) Ks.push_back(parse_fraction(k));
    out.push_back(limit_check(delta, cfg.p == "2" ? 1.01 : p, Ks));
  } else {
    throw InvalidInput("check must be one of duality, domination, sufficient, necessary, embedding, buckley, "
                       "selection, monotone, limit");
  }
  return out;
}

int run_verify(const RunConfig& cfg) {
  if (cfg.check.empty()) throw InvalidInput("verify needs --check");
  const auto reports = run_checks(cfg);
  const bool timing = !cfg.no_timing;
  const Output out(cfg);
  if (format_of(cfg, "csv") == "csv") {
    std::string s = out.appending_to_existing() ? "" : ledger_header() + "\n";
    for (const auto& r : reports) s += ledger_row(r, timing) + "\n";
    out.write(s);
  } else {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& r : reports) j.push_back(to_json(r, timing));
    out.write(j.dump(2) + "\n");
  }
  for (const auto& r : reports)
    if (!r.pass) return kFail;
  return kPass;
}

int run_scaling(const RunConfig& cfg) {
  std::vector<Delta> deltas;
  for (const auto& d : split(cfg.deltas, ',')) deltas.push_back(Delta::parse(d));
  const EvalMode mode = cfg.eval == "dense" ? EvalMode::dense : EvalMode::centers;
  const ScalingReport rep = scaling_experiment(parse_fraction(cfg.p), deltas, WeightSpec::parse(cfg.weight), cfg.seed,
                                               mode, cfg.refine);
  if (format_of(cfg, "json") == "json") {
    Output(cfg).write(to_json(rep, !cfg.no_timing).dump(2) + "\n");
  } else {
    std::string s = "delta,norm,skeleton_constant,fitted_C\n";
    for (const auto& r : rep.rows)
      s += r.delta.str() + ',' + format_real(r.norm) + ',' + format_real(r.constant) + ',' + format_real(r.fitted_c) + '\n';
    Output(cfg).write(s);
  }
  return rep.pass ? kPass : kFail;
}

int dispatch(const RunConfig& cfg) {
  if (cfg.subcommand == "field") return run_field(cfg);
  if (cfg.subcommand == "apconst") return run_apconst(cfg);
  if (cfg.subcommand == "select") return run_select(cfg);
  if (cfg.subcommand == "verify") return run_verify(cfg);
  return run_scaling(cfg);
}

int thread_default() {
  if (const char* env = std::getenv("SKELMAX_THREADS")) {
    try {
      return std::max(1, std::stoi(env));
    } catch (const std::exception&) {
      throw InvalidInput("SKELMAX_THREADS must be a positive integer");
    }
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig cfg;
  CLI::App app{"Skeleton maximal operators, skeleton weight constants and their verification harness", "skelmax"};
  app.require_subcommand(1, 1);
  app.fallthrough();

  app.add_option("--p", cfg.p, "Exponent p (fractions such as 4/3 allowed)");
  app.add_option("--delta", cfg.delta, "Lattice spacing, written 1/m");
  app.add_option("--weight", cfg.weight, "Weight: kind[:key=value,...] or JSON {kind, params}");
  app.add_option("--seed", cfg.seed, "Seed for every random choice");
  app.add_option("--threads", cfg.threads, "Worker threads (default: SKELMAX_THREADS, else all cores)");
  app.add_option("--tol", cfg.tol, "Relative tolerance of the checks");
  app.add_option("--out", cfg.out, "Output path (default: stdout)");
  app.add_option("--format", cfg.format, "csv or json");
  app.add_option("--config", cfg.config, "JSON file overriding flags: {check, p, delta, weight, seeds, tolerances}");
  app.add_flag("--no-timing", cfg.no_timing, "Write 0 for runtimes so reports are byte-stable");
  app.add_flag("--append", cfg.append, "Append ledger rows to an existing --out file");
  app.add_option("--z", cfg.z, "Lower corner of the unit cube Q_z, comma separated");
  app.add_option("--refine", cfg.refine, "Quadrature cells per delta along each axis");

  auto* field = app.add_subcommand("field", "Sample an operator applied to f on Q_z as a grid CSV");
  field->add_option("--f", cfg.f, "Function descriptor JSON: constant, linear, power or box");
  field->add_option("--input", cfg.input, "Grid CSV holding f");
  field->add_option("--op", cfg.op, "skeleton, linearized, hl or weight");
  field->add_option("--eval", cfg.eval, "centers or dense");
  field->add_option("--rho", cfg.rho, "Radius assignment of the linearized operator: greedy, random or a radius");

  auto* apconst = app.add_subcommand("apconst", "Skeleton, nonlinear and cubic weight constants as JSON");
  apconst->add_option("--class", cfg.cls, "skeleton, a1, nonlinear or cubic");

  auto* select = app.add_subcommand("select", "Face selection with plane-load report");
  select->add_option("--u", cfg.u, "Number of random lattice skeletons (default: every lattice center)");
  select->add_option("--input", cfg.input, "Skeleton CSV (cx,cy[,cz],r) instead of a random family");
  select->add_option("--strategy", cfg.strategy, "greedy or random");
  select->add_option("--C", cfg.C, "Constant of the load bound");

  auto* verify = app.add_subcommand("verify", "Run one inequality check and emit ledger rows");
  verify->add_option("--check", cfg.check,
                     "duality, domination, sufficient, necessary, embedding, buckley, selection, monotone or limit");
  verify->add_option("--instances", cfg.instances, "Instances, samples or families, depending on the check");
  verify->add_option("--weights", cfg.weights, "Weights of the buckley check, separated by ';'");
  verify->add_option("--K", cfg.K, "Two-value contrasts of the limit check, comma separated");
  verify->add_option("--u", cfg.u, "Family size of the selection check");
  verify->add_option("--C", cfg.C, "Constant of the selection bound");
  verify->add_option("--constant", cfg.constant, "Constant of the sufficient bound (default 3 (392)^(1/p))");
  verify->add_option("--eval", cfg.eval, "centers or dense (sufficient check)");

  auto* scaling = app.add_subcommand("scaling", "Empirical norm of M_delta across delta with a log-log fit");
  scaling->add_option("--deltas", cfg.deltas, "Comma separated list of 1/m values");
  scaling->add_option("--eval", cfg.eval, "centers or dense");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kInvalid;
  }
  cfg.subcommand = app.get_subcommands().front()->get_name();
  if (cfg.subcommand == "verify" && cfg.eval == "centers" && verify->count("--eval") == 0) cfg.eval = "dense";

  try {
    apply_config(cfg);
    set_thread_count(cfg.threads > 0 ? cfg.threads : thread_default());
    if (cfg.refine < 1) throw InvalidInput("refine must be >= 1");
    (void)Delta::parse(cfg.delta);
    return dispatch(cfg);
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  }
}
