#pragma once

#include "lexpand/gibbs.hpp"
#include "lexpand/measures.hpp"
#include "lexpand/mixing.hpp"
#include "lexpand/partition_io.hpp"
#include "lexpand/system_io.hpp"

#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

namespace lexpand {

using Json = nlohmann::ordered_json;

/// Stages in pipeline order; partition depends on verify, the rest on
/// partition.
inline const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names{"verify", "partition", "induce-check", "thermo", "measures"};
  return names;
}

inline const std::map<std::string, int>& stage_versions() {
  static const std::map<std::string, int> v{
      {"verify", 1}, {"partition", 1}, {"induce-check", 1}, {"thermo", 1}, {"measures", 1}, {"report", 1}};
  return v;
}

/// Potential vocabulary for the thermo stage:
///   constant:<c>   phi = c
///   logderiv:<t>   phi = -t log|T'|
///   coordinate     phi = x in [0,1)
struct PotentialSpec {
  enum class Kind { constant, log_derivative, coordinate } kind = Kind::constant;
  double value = 0.0;

  std::string describe() const {
    switch (kind) {
      case Kind::constant: return "constant:" + format_double(value);
      case Kind::log_derivative: return "logderiv:" + format_double(value);
      case Kind::coordinate: return "coordinate";
    }
    return "?";
  }
};

inline PotentialSpec parse_potential(const std::string& text) {
  PotentialSpec p;
  auto colon = text.find(':');
  std::string head = text.substr(0, colon);
  auto number = [&]() {
    if (colon == std::string::npos) throw Error(ErrorKind::invalid_input, "potential " + head + " needs a value");
    auto q = parse_rational(text.substr(colon + 1));
    if (!q) throw Error(ErrorKind::invalid_input, "bad potential value in '" + text + "'");
    return to_double(*q);
  };
  if (head == "constant") {
    p.kind = PotentialSpec::Kind::constant;
    p.value = number();
  } else if (head == "logderiv") {
    p.kind = PotentialSpec::Kind::log_derivative;
    p.value = number();
  } else if (head == "coordinate" && colon == std::string::npos) {
    p.kind = PotentialSpec::Kind::coordinate;
  } else {
    throw Error(ErrorKind::invalid_input, "unknown potential '" + text + "' (constant:c, logderiv:t, coordinate)");
  }
  return p;
}

struct RunConfig {
  std::string config_path;
  std::string out_dir = "out";
  std::vector<std::string> stages;  // for `report`: stages to run first
  Rational epsilon{1, 16};
  BaseMode mode = BaseMode::overlap;
  std::size_t depth_cap = 16;
  std::size_t horizon = 8;
  double tol = 1e-3;
  std::size_t bins = 512;
  std::size_t n_max = 16;
  std::uint64_t seed = 0;
  PotentialSpec potential;
  std::optional<double> margin;  // chart neighbourhood radius for declared charts
  double mixing_scale = 0.125;
  std::size_t mixing_horizon = 8;
  std::size_t gibbs_depth = 3;
  std::size_t skew_samples = 200000;

  void validate() const {
    if (!(tol > 0.0)) throw Error(ErrorKind::invalid_input, "--tol must be positive");
    if (!(epsilon > 0)) throw Error(ErrorKind::invalid_input, "epsilon must be positive");
    if (!(mixing_scale > 0.0)) throw Error(ErrorKind::invalid_input, "mixing-scale must be positive");
    if (n_max < 2) throw Error(ErrorKind::invalid_input, "--nmax must be at least 2");
    if (depth_cap == 0) throw Error(ErrorKind::invalid_input, "depth-cap must be positive");
    detail::check_bins(bins);
    std::set<std::string> chosen(stages.begin(), stages.end());
    for (const auto& s : stages)
      if (std::find(stage_names().begin(), stage_names().end(), s) == stage_names().end())
        throw Error(ErrorKind::invalid_input, "unknown stage '" + s + "'");
    for (const auto& s : chosen) {
      if (s != "verify" && !chosen.count("verify")) throw Error(ErrorKind::invalid_input, "stage " + s + " needs verify");
      if (s != "verify" && s != "partition" && !chosen.count("partition"))
        throw Error(ErrorKind::invalid_input, "stage " + s + " needs partition");
    }
  }
};

/// Options in the system file fill the run config; command-line flags set
/// afterwards override them.
inline RunConfig run_config_from(const SystemConfig& sys, const std::string& path) {
  RunConfig rc;
  rc.config_path = path;
  rc.epsilon = sys.rational_option("epsilon", rc.epsilon);
  rc.mode = parse_base_mode(sys.option("mode", to_string(rc.mode)));
  rc.depth_cap = static_cast<std::size_t>(sys.int_option("depth-cap", static_cast<long long>(rc.depth_cap)));
  rc.horizon = static_cast<std::size_t>(sys.int_option("horizon", static_cast<long long>(rc.horizon)));
  rc.tol = sys.real_option("tol", rc.tol);
  rc.bins = static_cast<std::size_t>(sys.int_option("bins", static_cast<long long>(rc.bins)));
  rc.n_max = static_cast<std::size_t>(sys.int_option("nmax", static_cast<long long>(rc.n_max)));
  rc.seed = sys.system.seed;
  rc.potential = parse_potential(sys.option("potential", rc.potential.describe()));
  if (sys.has("margin")) rc.margin = sys.real_option("margin", 0.0);
  rc.mixing_scale = sys.real_option("mixing-scale", rc.mixing_scale);
  rc.mixing_horizon = static_cast<std::size_t>(sys.int_option("mixing-horizon", static_cast<long long>(rc.mixing_horizon)));
  rc.gibbs_depth = static_cast<std::size_t>(sys.int_option("gibbs-depth", static_cast<long long>(rc.gibbs_depth)));
  rc.skew_samples = static_cast<std::size_t>(sys.int_option("skew-samples", static_cast<long long>(rc.skew_samples)));
  return rc;
}

/// Outcome of one command: 0 success, 1 mathematical failure (the report
/// carries the witness).
struct StageOutcome {
  int exit_code = 0;
  std::string summary;
  std::vector<std::string> artifacts;
};

namespace detail {

namespace fs = std::filesystem;

inline std::string artifact_path(const RunConfig& rc, const std::string& name) {
  return (fs::path(rc.out_dir) / name).string();
}

inline void emit(const RunConfig& rc, StageOutcome& out, const std::string& name, const std::string& text) {
  fs::create_directories(rc.out_dir);
  write_text(artifact_path(rc, name), text);
  out.artifacts.push_back(name);
}

inline void emit_json(const RunConfig& rc, StageOutcome& out, const std::string& name, const Json& j) {
  emit(rc, out, name, j.dump(2) + "\n");
}

inline Json read_json(const RunConfig& rc, const std::string& name) {
  std::string text = read_text(artifact_path(rc, name));
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::parse, name + ": " + e.what());
  }
}

inline Json cover_json(const ExpandingCover& c) {
  Json j;
  j["sigma"] = c.sigma;
  j["r"] = c.r;
  j["eta"] = c.eta;
  j["charts"] = Json::array();
  for (const auto& ch : c.charts) j["charts"].push_back({{"generator", ch.generator}, {"start", ch.arc.start}, {"length", ch.arc.length}});
  return j;
}

inline ExpandingCover cover_from_json(const Json& j) {
  ExpandingCover c;
  try {
    c.sigma = j.at("sigma").get<double>();
    c.r = j.at("r").get<double>();
    c.eta = j.at("eta").get<double>();
    for (const auto& ch : j.at("charts")) {
      Chart chart;
      chart.generator = ch.at("generator").get<int>();
      chart.arc.start = ch.at("start").get<double>();
      chart.arc.length = ch.at("length").get<double>();
      c.charts.push_back(chart);
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::parse, std::string("cover.json: ") + e.what());
  }
  return c;
}

inline SystemConfig load_run_system(const RunConfig& rc) { return load_system(rc.config_path); }

inline ExpandingCover load_cover(const RunConfig& rc) {
  Json v = read_json(rc, "verify.json");
  if (!v.value("ok", false)) throw Error(ErrorKind::dependency, "verify stage failed; no certified cover in " + rc.out_dir);
  return cover_from_json(read_json(rc, "cover.json"));
}

inline InducedMap load_induced(const RunConfig& rc) {
  auto sys = load_run_system(rc);
  auto cover = load_cover(rc);
  auto part = parse_partition(read_text(artifact_path(rc, "partition.txt")));
  return induce(sys.system, cover, part);
}

inline Json vector_json(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(x);
  return a;
}

/// Keeps JSON finite: nlohmann writes non-finite numbers as null.
inline Json number(double x) { return std::isfinite(x) ? Json(x) : Json(format17(x)); }

}  // namespace detail

/// Cover certificate, Lebesgue number and topological mixing certificate.
inline StageOutcome cmd_verify(const RunConfig& rc) {
  StageOutcome out;
  auto sys = detail::load_run_system(rc);
  Json rep;
  rep["config"] = rc.config_path;
  rep["generators"] = Json::array();
  for (const auto& g : sys.system.generators) rep["generators"].push_back(g.describe());
  ExpandingCover cover;
  try {
    cover = verify_locally_expanding(sys.system, 4096, sys.charts, rc.margin);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::not_locally_expanding) throw;
    rep["ok"] = false;
    rep["locally_expanding"] = false;
    rep["witness"] = e.what();
    detail::emit_json(rc, out, "verify.json", rep);
    out.exit_code = 1;
    out.summary = std::string("not locally expanding: ") + e.what();
    return out;
  }
  auto mix = check_topological_mixing(sys.system, cover, rc.mixing_scale, rc.mixing_horizon);
  rep["locally_expanding"] = true;
  rep["sigma"] = cover.sigma;
  rep["eta"] = cover.eta;
  rep["epsilon"] = format_rational(rc.epsilon);
  rep["epsilon_within_eta_over_6"] = to_double(rc.epsilon) <= cover.eta / 6.0;
  Json m;
  m["complete"] = mix.complete;
  m["net_size"] = mix.net_size;
  m["scale"] = mix.scale;
  m["horizon"] = mix.horizon;
  std::size_t longest = 0;
  for (const auto& w : mix.witnesses) longest = std::max(longest, w.word.size());
  m["pairs_resolved"] = mix.witnesses.size();
  m["longest_word"] = longest;
  if (!mix.unresolved.empty()) m["unresolved"] = {mix.unresolved.front().first, mix.unresolved.front().second};
  rep["mixing"] = m;
  rep["ok"] = mix.complete;
  detail::emit_json(rc, out, "cover.json", detail::cover_json(cover));
  detail::emit_json(rc, out, "verify.json", rep);
  out.exit_code = mix.complete ? 0 : 1;
  out.summary = mix.complete ? "cover certified, sigma " + format_double(cover.sigma) + ", mixing at scale " +
                                   format_double(mix.scale)
                             : "mixing not certified for net pair (" + std::to_string(mix.unresolved.front().first) +
                                   ", " + std::to_string(mix.unresolved.front().second) + ")";
  return out;
}

/// Markov partition, transition matrix and structural flags.
inline StageOutcome cmd_partition(const RunConfig& rc) {
  StageOutcome out;
  auto sys = detail::load_run_system(rc);
  auto cover = detail::load_cover(rc);
  PartitionOptions o;
  o.epsilon = rc.epsilon;
  o.mode = rc.mode;
  o.depth_cap = rc.depth_cap;
  o.tol = rc.tol;
  o.horizon = rc.horizon;
  auto part = build_markov_partition(sys.system, cover, o);
  auto t = transition_matrix(part);
  auto markov = verify_markov_property(part, t);
  auto fip = check_fip(part, &sys.system);
  auto fcp = check_fcp(t, part.cycle);
  bool bip = check_bip(t, part.cycle);
  auto mixing = check_shift_mixing(t, 64);
  auto audit = audit_partition(part, sys.system);

  std::string text = serialize_partition(part);
  detail::emit(rc, out, "partition.txt", text);
  std::ostringstream csv;
  csv << "from,to\n";
  for (std::size_t i = 0; i < t.size(); ++i)
    for (std::size_t j : t.rows[i]) csv << i << ',' << j << "\n";
  detail::emit(rc, out, "transition.csv", csv.str());

  Json rep;
  rep["partition_hash"] = partition_hash(part);
  rep["elements"] = part.size();
  rep["exact"] = part.exact;
  rep["mode"] = to_string(part.base.mode);
  rep["balls"] = part.base.size();
  rep["depth_cap"] = part.depth_cap;
  rep["depth_reached"] = part.depth_reached;
  rep["tol"] = part.tol;
  rep["uncovered"] = part.uncovered;
  rep["mean_return_time"] = mean_return_time(part);
  rep["cycle"] = part.cycle;
  rep["markov"] = markov.ok;
  if (markov.witness) rep["markov_witness"] = {markov.witness->first, markov.witness->second};
  rep["fip"] = fip.ok;
  if (!fip.ok) rep["fip_witness"] = fip.offending.front();
  rep["fcp"] = fcp.ok;
  if (fcp.witness) rep["fcp_witness"] = *fcp.witness;
  rep["bip"] = bip;
  rep["shift_mixing"] = mixing.mixing;
  rep["mixing_power"] = mixing.power;
  rep["disjoint"] = audit.disjoint;
  rep["inside_components"] = audit.inside_components;
  rep["images_exact"] = audit.images_exact;
  rep["uncovered_within_tol"] = part.uncovered <= part.tol;
  bool ok = markov.ok && fip.ok && fcp.ok && bip && mixing.mixing && audit.disjoint && audit.inside_components &&
            audit.images_exact && part.uncovered <= part.tol;
  rep["ok"] = ok;
  detail::emit_json(rc, out, "structure.json", rep);
  out.exit_code = ok ? 0 : 1;
  out.summary = std::to_string(part.size()) + " elements, uncovered " + format_double(part.uncovered) +
                (ok ? ", all structure flags hold" : ", a structure flag fails (see structure.json)");
  return out;
}

/// Inducing-scheme conditions on the stored partition.
inline StageOutcome cmd_induce_check(const RunConfig& rc) {
  StageOutcome out;
  auto T = detail::load_induced(rc);
  auto rep = verify_inducing_scheme(T);
  Json j;
  auto cond = [](const ConditionResult& c) {
    Json x{{"ok", c.ok}};
    if (!c.detail.empty()) x["detail"] = c.detail;
    if (c.witness) x["witness"] = *c.witness;
    return x;
  };
  j["H1"] = cond(rep.h1);
  j["H2"] = cond(rep.h2);
  j["H3"] = cond(rep.h3);
  j["H4"] = cond(rep.h4);
  j["H5"] = cond(rep.h5);
  j["sigma_star"] = rep.sigma_star;
  j["d0"] = rep.d0;
  j["min_margin"] = rep.min_margin;
  j["min_expansion"] = rep.min_expansion;
  j["max_distortion"] = rep.max_distortion;
  j["K1"] = rep.k1;
  j["h3_depth"] = rep.h3_depth;
  j["markov_image_misses"] = markov_image_misses(T);
  j["ok"] = rep.ok();
  detail::emit_json(rc, out, "inducing.json", j);
  out.exit_code = rep.ok() ? 0 : 1;
  out.summary = rep.ok() ? "H1-H5 hold, K1 " + format_double(rep.k1) : "an inducing condition fails (see inducing.json)";
  return out;
}

/// Element potential for a potential description, evaluated at element midpoints
/// (memory 1). `truncation` bounds its distance to the exact potential.
inline ShiftPotential element_potential(const InducedMap& T, const PotentialSpec& spec, double& truncation) {
  truncation = 0.0;
  if (spec.kind == PotentialSpec::Kind::constant) return ShiftPotential::constant(spec.value);
  std::function<double(std::size_t, double)> psi;
  double K = 0.0;
  if (spec.kind == PotentialSpec::Kind::log_derivative) {
    const double t = spec.value;
    psi = [&T, t](std::size_t i, double x) { return -t * std::log(std::fabs(T.derivative(i, x))); };
    K = std::fabs(t) * T.system().log_derivative_lipschitz() / (1.0 - T.sigma());
  } else {
    psi = [](std::size_t, double x) { return reduce(x); };
    K = 1.0;
  }
  auto phi = truncate_memory(project_potential(T, psi, K, 1.0), 1);
  truncation = K * T.d0();
  // the depth-1 evaluation lies inside M_i: keep the value, drop the cylinder walk
  std::vector<double> values(T.size());
  for (std::size_t i = 0; i < T.size(); ++i) values[i] = phi({i});
  auto p = ShiftPotential::first_symbol(std::move(values));
  p.modulus = phi.modulus;
  return p;
}

/// Pressure, Gibbs measure and equilibrium residual for one potential.
inline StageOutcome cmd_thermo(const RunConfig& rc) {
  StageOutcome out;
  auto T = detail::load_induced(rc);
  const auto& t = T.matrix();
  double truncation = 0.0;
  auto phi = element_potential(T, rc.potential, truncation);
  const std::size_t base = T.partition().cycle.empty() ? 0 : T.partition().cycle.front();
  auto pr = gurevich_pressure(t, phi, base, rc.n_max);
  Json p;
  p["potential"] = rc.potential.describe();
  p["truncation_bound"] = truncation;
  p["base"] = pr.base;
  p["base2"] = pr.base2;
  p["n_min"] = pr.n_min;
  p["n_max"] = pr.n_max;
  p["pressure"] = pr.pressure;
  p["residual"] = pr.residual;
  p["pressure2"] = detail::number(pr.pressure2);
  p["residual2"] = pr.residual2;
  p["discrepancy"] = detail::number(pr.discrepancy);
  p["fit_points"] = pr.fit_points;
  p["shift_mixing"] = pr.mixing_certified;
  detail::emit_json(rc, out, "pressure.json", p);
  std::ostringstream csv;
  csv << "n,log_z,log_z2\n";
  for (std::size_t n = 1; n <= pr.log_z.size(); ++n)
    csv << n << ',' << format17(pr.log_z[n - 1]) << ',' << format17(pr.log_z2[n - 1]) << "\n";
  detail::emit(rc, out, "logz.csv", csv.str());

  Json g;
  try {
    auto op = transfer_gibbs(t, phi);
    auto mu = gibbs_measure(op);
    auto cert = verify_gibbs(mu, t, phi, op.pressure(), rc.gibbs_depth, 2000000);
    auto eq = equilibrium_check(mu, phi, op.pressure());
    g["transfer_pressure"] = op.pressure();
    g["eigen_residual"] = op.residual;
    g["slope_minus_transfer"] = pr.pressure - op.pressure();
    g["B"] = detail::number(cert.B);
    g["depth"] = cert.depth;
    g["cylinders"] = cert.cylinders;
    g["complete"] = cert.complete;
    g["entropy"] = eq.entropy;
    g["integral"] = eq.integral;
    g["equilibrium_residual"] = eq.residual;
    g["invariance_defect"] = eq.invariance_defect;
    g["ok"] = true;
    out.summary = "pressure " + format_double(pr.pressure) + " (transfer " + format_double(op.pressure()) + "), B " +
                  format_double(cert.B);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::convergence_failure && e.kind() != ErrorKind::non_invariant) throw;
    g["ok"] = false;
    g["error"] = e.what();
    out.exit_code = 1;
    out.summary = std::string("Gibbs construction failed: ") + e.what();
  }
  detail::emit_json(rc, out, "gibbs.json", g);
  return out;
}

/// Acip, entropy, Perron vector, tower lift and stationarity.
inline StageOutcome cmd_measures(const RunConfig& rc) {
  StageOutcome out;
  auto T = detail::load_induced(rc);
  const auto& sys = T.system();
  auto mu = acip_pushforward(T, rc.bins);
  auto ent = rokhlin_entropy(T, mu);
  auto perron = perron_vector(sys.driving_matrix());
  auto fm = lift_measure(T, mu, perron.p, rc.tol);
  auto st = check_stationary(sys, fm);
  auto skew = skew_invariance_check(sys, fm, rc.skew_samples, rc.seed);
  const double k1 = induced_distortion_constant(T);

  std::ostringstream dens;
  dens << "bin,left,weight\n";
  for (std::size_t j = 0; j < mu.bins; ++j)
    dens << j << ',' << format17(static_cast<double>(j) / static_cast<double>(mu.bins)) << ',' << format17(mu.weights[j])
         << "\n";
  detail::emit(rc, out, "density.csv", dens.str());
  std::ostringstream fib;
  fib << "symbol,bin,left,weight\n";
  for (std::size_t i = 0; i < fm.symbols(); ++i)
    for (std::size_t j = 0; j < fm.bins; ++j)
      fib << i << ',' << j << ',' << format17(static_cast<double>(j) / static_cast<double>(fm.bins)) << ','
          << format17(fm.weights[i][j]) << "\n";
  detail::emit(rc, out, "fibered.csv", fib.str());

  Json m;
  m["bins"] = mu.bins;
  m["acip"] = {{"min_density", mu.min_density},
               {"max_density", mu.max_density},
               {"C0", mu.c0},
               {"K1_squared", k1 * k1},
               {"within_band", mu.c0 <= k1 * k1},
               {"component_oscillation", component_oscillation(T, mu)},
               {"tv_change", mu.tv_change},
               {"deficit", mu.deficit},
               {"iterations", mu.iterations},
               {"converged", mu.converged}};
  m["entropy"] = {{"value", ent.entropy}, {"quadrature_error", ent.quadrature_error}};
  m["perron"] = {{"p", detail::vector_json(perron.p)}, {"residual", perron.residual}, {"iterations", perron.iterations}};
  m["lift"] = {{"Q", fm.Q}, {"mass", detail::vector_json(fm.mass)}, {"deficit", fm.deficit}, {"flagged", fm.flagged}};
  m["stationarity"] = {{"residual", st.residual},
                       {"per_fiber", detail::vector_json(st.per_fiber)},
                       {"mass_defect", st.mass_defect},
                       {"within_tol", st.residual <= rc.tol}};
  m["skew"] = {{"samples", skew.samples}, {"cells", skew.cells}, {"residual", skew.residual}, {"band", skew.band}, {"ok", skew.ok}};
  detail::emit_json(rc, out, "measures.json", m);
  out.summary = "entropy " + format_double(ent.entropy) + ", C0 " + format_double(mu.c0) + ", stationarity residual " +
                format_double(st.residual);
  return out;
}

/// Collects the stage reports present in the output directory.
inline StageOutcome cmd_report(const RunConfig& rc) {
  StageOutcome out;
  Json r;
  r["config"] = rc.config_path;
  r["stages"] = Json::object();
  const std::vector<std::pair<std::string, std::vector<std::string>>> files{
      {"verify", {"verify.json"}},
      {"partition", {"structure.json"}},
      {"induce-check", {"inducing.json"}},
      {"thermo", {"pressure.json", "gibbs.json"}},
      {"measures", {"measures.json"}}};
  std::ostringstream table;
  for (const auto& [stage, names] : files) {
    Json s;
    bool present = true;
    for (const auto& n : names) {
      if (!std::filesystem::exists(detail::artifact_path(rc, n))) {
        present = false;
        break;
      }
      s[n] = detail::read_json(rc, n);
    }
    if (!present) {
      r["stages"][stage] = nullptr;
      table << stage << ": not run\n";
      continue;
    }
    r["stages"][stage] = s;
    table << stage << ": ";
    if (stage == "verify") table << (s["verify.json"].value("ok", false) ? "ok" : "FAILED");
    if (stage == "partition")
      table << s["structure.json"]["elements"] << " elements, uncovered " << s["structure.json"]["uncovered"]
            << (s["structure.json"].value("ok", false) ? ", ok" : ", FAILED");
    if (stage == "induce-check") table << "K1 " << s["inducing.json"]["K1"] << (s["inducing.json"].value("ok", false) ? ", ok" : ", FAILED");
    if (stage == "thermo") table << "pressure " << s["pressure.json"]["pressure"];
    if (stage == "measures")
      table << "entropy " << s["measures.json"]["entropy"]["value"] << ", C0 " << s["measures.json"]["acip"]["C0"]
            << ", stationarity " << s["measures.json"]["stationarity"]["residual"];
    table << "\n";
  }
  detail::emit_json(rc, out, "report.json", r);
  out.summary = table.str();
  return out;
}

inline StageOutcome run_stage(const std::string& name, const RunConfig& rc) {
  if (name == "verify") return cmd_verify(rc);
  if (name == "partition") return cmd_partition(rc);
  if (name == "induce-check") return cmd_induce_check(rc);
  if (name == "thermo") return cmd_thermo(rc);
  if (name == "measures") return cmd_measures(rc);
  if (name == "report") return cmd_report(rc);
  throw Error(ErrorKind::invalid_input, "unknown command '" + name + "'");
}

/// Records the stage in manifest.json: config hash, stage version, wall
/// clock and the hashes of the artifacts it wrote. Only the manifest carries
/// timings, so the numeric artifacts stay byte-identical across reruns.
inline void update_manifest(const RunConfig& rc, const std::string& stage, const StageOutcome& out, double millis) {
  Json m;
  auto path = detail::artifact_path(rc, "manifest.json");
  if (std::filesystem::exists(path)) {
    try {
      m = Json::parse(read_text(path));
    } catch (const Json::exception&) {
      m = Json::object();
    }
  }
  m["config"] = rc.config_path;
  m["config_hash"] = hex64(fnv1a(read_text(rc.config_path)));
  m["seed"] = rc.seed;
  Json s;
  s["version"] = stage_versions().at(stage);
  s["exit_code"] = out.exit_code;
  s["wall_ms"] = millis;
  s["artifacts"] = Json::object();
  for (const auto& a : out.artifacts) s["artifacts"][a] = hex64(fnv1a(read_text(detail::artifact_path(rc, a))));
  m["stages"][stage] = s;
  std::filesystem::create_directories(rc.out_dir);
  write_text(path, m.dump(2) + "\n");
}

/// Runs one command (and, for `report`, the requested stages first) and
/// updates the manifest. Returns the exit code of the first failing stage.
inline int run_command(const std::string& command, const RunConfig& rc, std::ostream& log) {
  std::vector<std::string> todo;
  if (command == "report")
    for (const auto& s : stage_names())
      if (std::find(rc.stages.begin(), rc.stages.end(), s) != rc.stages.end()) todo.push_back(s);
  todo.push_back(command);
  int code = 0;
  for (const auto& s : todo) {
    auto t0 = std::chrono::steady_clock::now();
    auto out = run_stage(s, rc);
    double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    update_manifest(rc, s, out, ms);
    log << s << ": " << out.summary << (out.summary.empty() || out.summary.back() == '\n' ? "" : "\n");
    if (out.exit_code != 0 && code == 0) code = out.exit_code;
    if (out.exit_code != 0 && s != command) break;
  }
  return code;
}

/// Exit code for an error escaping a command.
inline int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::parse:
    case ErrorKind::invalid_input:
    case ErrorKind::dependency:
      return 2;
    default:
      return 1;
  }
}

}  // namespace lexpand
