// Command-line surface for the tent-map inverse-limit toolkit.
//
// Exit codes: 0 ok, 2 configuration error, 3 numeric failure,
// 4 inconclusive (truncation could not decide).  Result envelopes go to
// stdout or --out files; timing goes to stderr so identical configs produce
// identical output bytes.

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <thread>

#include "tentlim/serialize.hpp"
#include "tentlim/version.hpp"

namespace tl = tentlim;
using tl::json;

namespace {

struct CommonOpts {
  double slope = 2.0;
  std::string mode = "scalar";
  std::uint64_t seed = 1;
  bool no_snap = false;
  bool allow_sqrt2 = false;
  std::string out;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool with_slope = true) {
  if (with_slope) {
    cmd->add_option("--slope", o.slope, "tent map slope in [sqrt(2), 2]")->required();
  }
  cmd->add_option("--mode", o.mode, "number mode: scalar | enclosure")
      ->check(CLI::IsMember({"scalar", "enclosure"}));
  cmd->add_option("--seed", o.seed, "RNG seed");
  cmd->add_flag("--no-snap", o.no_snap, "do not snap the slope to nearby algebraic values");
  cmd->add_flag("--allow-sqrt2", o.allow_sqrt2, "allow boxes at the endpoint slope sqrt(2)");
  cmd->add_option("--out", o.out, "output file prefix (default: JSON to stdout)");
}

tl::Mode parse_mode(const CommonOpts& o) {
  std::string m = o.mode;
  if (const char* env = std::getenv("TENTLIM_MODE"); env && m == "scalar") m = env;
  return m == "enclosure" ? tl::Mode::enclosure : tl::Mode::scalar;
}

tl::TentParams make_params(const CommonOpts& o) {
  const tl::Mode mode = parse_mode(o);
  return o.no_snap ? tl::TentParams::from_slope(o.slope, mode)
                   : tl::TentParams::snapped(o.slope, mode);
}

void write_outputs(const CommonOpts& o, const json& envelope, const std::string* csv) {
  if (o.out.empty()) {
    std::cout << envelope.dump(2) << "\n";
    if (csv) std::cout << *csv;
    return;
  }
  {
    std::ofstream f(o.out + ".json");
    if (!f) throw std::invalid_argument("cannot open output file " + o.out + ".json");
    f << envelope.dump(2) << "\n";
  }
  if (csv) {
    std::ofstream f(o.out + ".csv");
    if (!f) throw std::invalid_argument("cannot open output file " + o.out + ".csv");
    f << *csv;
  }
}

// Density with the method used by the measure-level commands: exact when the
// critical orbit is certified finite, Ulam otherwise.
tl::StepDensity auto_density(const tl::TentParams& p, int bins) {
  if (auto ms = tl::detect_markov(p, 64); ms && ms->certified) {
    return tl::markov_density(p, *ms);
  }
  return tl::ulam_density(p, bins).density;
}

// ---------------------------------------------------------------------------

int cmd_density(const CommonOpts& o, const std::string& method, int bins, int iterations,
                std::int64_t orbit_length) {
  const tl::TentParams p = make_params(o);
  tl::StepDensity d;
  json extra;
  if (method == "ulam") {
    tl::UlamResult r = tl::ulam_density(p, bins, iterations);
    d = std::move(r.density);
    extra["iterations"] = r.iterations;
    extra["residual"] = r.residual;
  } else if (method == "markov") {
    auto ms = tl::detect_markov(p, 64);
    if (!ms) {
      throw tl::ConvergenceError("no eventually periodic critical orbit detected at depth 64",
                                 0.0);
    }
    extra["markov"] = tl::to_json(*ms);
    d = tl::markov_density(p, *ms);
  } else if (method == "histogram") {
    d = tl::orbit_histogram(p, o.seed, orbit_length, bins);
  } else if (method == "auto") {
    d = auto_density(p, bins);
  } else {
    throw std::invalid_argument("unknown density method " + method);
  }

  json payload{{"density", tl::to_json(d)}, {"diagnostics", tl::to_json(tl::density_diagnostics(d))}};
  if (!extra.is_null()) payload["solver"] = extra;
  json config{{"slope", p.slope()}, {"method", method}, {"bins", bins},
              {"iterations", iterations}, {"orbit_length", orbit_length}, {"seed", o.seed}};
  const std::string csv = tl::density_csv(d);
  write_outputs(o, tl::make_envelope("density", config, payload), &csv);
  return 0;
}

int cmd_box(const CommonOpts& o, int component_index, const std::pair<double, double>& interval,
            bool has_interval, int prefix, int depth, int bins, double probe, bool has_probe,
            std::size_t mc_samples) {
  const tl::TentParams p = make_params(o);
  const tl::StepDensity phi = auto_density(p, bins);

  tl::Interval J{};
  if (has_interval) {
    J = tl::make_interval(interval.first, interval.second);
  } else {
    const auto comps = tl::complement_components(p, prefix);
    if (component_index < 0 || component_index >= static_cast<int>(comps.size())) {
      throw std::invalid_argument("component index out of range");
    }
    J = comps[static_cast<std::size_t>(component_index)];
  }
  tl::BoxConfig cfg;
  cfg.flat_prefix = prefix;
  cfg.depth = depth;
  cfg.allow_sqrt2 = o.allow_sqrt2;
  const tl::Box box = tl::build_box(p, phi, J, cfg);

  const double x = has_probe ? probe : tl::best_probe(box);
  const tl::MeasureEnclosure a = tl::alpha_box(box, x);

  json payload{{"box", tl::to_json(box)},
               {"probe", x},
               {"alpha", tl::to_json(a)}};
  if (mc_samples > 0) {
    tl::SamplerConfig sc;
    sc.seed = o.seed;
    sc.window_depth = prefix + depth;
    tl::MuHatSampler sampler(p, &phi, sc);
    const tl::BoxMeasureReport mc = tl::muhat_box_measure(box, sampler, mc_samples);
    payload["muhat_mc"] = tl::to_json(mc);
    payload["product_reference"] = J.length() * a.mid();
  }
  json config{{"slope", p.slope()}, {"component_index", component_index},
              {"prefix", prefix}, {"depth", depth}, {"bins", bins},
              {"mc_samples", mc_samples}, {"seed", o.seed}};
  write_outputs(o, tl::make_envelope("box", config, payload), nullptr);
  return 0;
}

int cmd_holonomy(const CommonOpts& o, int prefix, int depth, int probes, int bins) {
  const tl::TentParams p = make_params(o);
  const tl::StepDensity phi = auto_density(p, bins);
  const tl::Box box = tl::build_positive_measure_box(p, phi, prefix, depth, o.allow_sqrt2);
  const tl::HolonomyReport rep = tl::holonomy_check(box, probes);
  json payload{{"box", tl::to_json(box)}, {"holonomy", tl::to_json(rep)}};
  json config{{"slope", p.slope()}, {"prefix", prefix}, {"depth", depth},
              {"probes", probes}, {"bins", bins}};
  write_outputs(o, tl::make_envelope("holonomy", config, payload), nullptr);
  if (!rep.pass) {
    std::cerr << "holonomy: alpha differs across probes beyond tolerance\n";
    return 3;
  }
  return 0;
}

int cmd_typicality(const CommonOpts& o, const tl::TypicalityConfig& cfg, int bins) {
  tl::TentParams p = make_params(o);
  tl::StepDensity phi = auto_density(p, bins);
  tl::TypicalityReport rep = tl::typicality_report(p, phi, cfg);
  json config{{"slope", p.slope()}, {"orbit_prefix", cfg.orbit_prefix},
              {"box_depth", cfg.box_depth}, {"visit_depth", cfg.visit_depth},
              {"visit_samples", cfg.visit_samples}, {"mc_samples", cfg.mc_samples},
              {"period_bound", cfg.period_bound}, {"bins", bins}, {"seed", cfg.seed}};
  write_outputs(o, tl::make_envelope("typicality", config, tl::to_json(rep)), nullptr);
  return 0;
}

int cmd_decompose(const CommonOpts& o, int level, const std::pair<double, double>& interval,
                  int depth, std::string branches) {
  const tl::TentParams p = make_params(o);
  if (depth < level) throw std::invalid_argument("decompose: depth must be >= level");
  const tl::Interval Jm = tl::make_interval(interval.first, interval.second);

  // Deeper levels: explicit branch word or a seeded choice among available
  // branches, recorded in the output either way.
  std::mt19937_64 rng(o.seed);
  std::vector<tl::Interval> levels(static_cast<std::size_t>(depth) + 1);
  levels[static_cast<std::size_t>(level)] = Jm;
  std::string used;
  for (int i = level + 1; i <= depth; ++i) {
    const tl::Interval& prev = levels[static_cast<std::size_t>(i - 1)];
    char want = 0;
    const std::size_t k = static_cast<std::size_t>(i - level - 1);
    if (k < branches.size()) want = branches[k];
    std::optional<tl::Interval> next;
    if (want == 'L' || want == 'R') {
      next = tl::monotone_pullback(p, prev, want == 'L' ? tl::Branch::left : tl::Branch::right);
      if (!next) throw std::invalid_argument("decompose: requested branch unavailable");
      used.push_back(want);
    } else {
      auto left = tl::monotone_pullback(p, prev, tl::Branch::left);
      auto right = tl::monotone_pullback(p, prev, tl::Branch::right);
      if (left && (!right || (rng() & 1u))) {
        next = left;
        used.push_back('L');
      } else {
        next = right;
        used.push_back('R');
      }
    }
    levels[static_cast<std::size_t>(i)] = *next;
  }
  for (int i = level - 1; i >= 0; --i) {
    levels[static_cast<std::size_t>(i)] = tl::image_interval(p, levels[static_cast<std::size_t>(i + 1)]);
  }
  const tl::IntervalThread thread = tl::make_interval_thread(p, levels);
  const tl::Decomposition dec = tl::flat_decompose(p, thread, level);
  const tl::Ival r = tl::rho(p, thread, level);

  json payload{{"thread", tl::to_json(thread)},
               {"branches", used},
               {"decomposition", tl::to_json(dec)},
               {"pieces", dec.pieces.size()},
               {"nodes", dec.nodes.size()},
               {"rho", json{{"lo", r.lo}, {"hi", r.hi}}}};
  json config{{"slope", p.slope()}, {"level", level}, {"depth", depth},
              {"interval", json{interval.first, interval.second}}, {"seed", o.seed}};
  const std::string csv = tl::decomposition_csv(dec);
  write_outputs(o, tl::make_envelope("decompose", config, payload), &csv);
  return 0;
}

int cmd_sweep(const CommonOpts& o, double from, double to, double step, const std::string& sub,
              int n, int prefix, int depth, int probes, int bins, int jobs) {
  if (!(step > 0.0) || to < from) throw std::invalid_argument("sweep: empty slope range");
  std::vector<double> slopes;
  for (double s = from; s <= to + 1e-12; s += step) slopes.push_back(s);
  if (slopes.empty()) throw std::invalid_argument("sweep: empty slope range");
  if (sub != "gap" && sub != "holonomy") {
    throw std::invalid_argument("sweep: --cmd must be gap or holonomy");
  }

  std::vector<json> rows(slopes.size());
  std::atomic<std::size_t> cursor{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= slopes.size()) return;
      json row{{"slope", slopes[i]}};
      try {
        const tl::TentParams p = o.no_snap ? tl::TentParams::from_slope(slopes[i])
                                           : tl::TentParams::snapped(slopes[i]);
        if (sub == "gap") {
          row["max_gap"] = tl::gap_statistic(p, n);
        } else {
          const tl::StepDensity phi = auto_density(p, bins);
          const tl::Box box =
              tl::build_positive_measure_box(p, phi, prefix, depth, o.allow_sqrt2);
          const tl::HolonomyReport rep = tl::holonomy_check(box, probes);
          row["max_pairwise_diff"] = rep.max_pairwise_diff;
          row["tolerance"] = rep.tolerance;
          row["pass"] = rep.pass;
        }
        row["status"] = "ok";
      } catch (const std::exception& e) {
        row["status"] = std::string("error: ") + e.what();
      }
      rows[i] = std::move(row);
    }
  };
  const int nthreads = std::max(1, jobs);
  std::vector<std::thread> pool;
  for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();

  // Aggregate in slope order regardless of completion order.
  std::string csv = sub == "gap" ? "slope,max_gap,status\n"
                                 : "slope,max_pairwise_diff,tolerance,pass,status\n";
  for (const json& row : rows) {
    csv += tl::format_double(row["slope"].get<double>());
    if (sub == "gap") {
      csv += ',';
      csv += row.contains("max_gap") ? tl::format_double(row["max_gap"].get<double>()) : "";
    } else {
      csv += ',';
      csv += row.contains("max_pairwise_diff")
                 ? tl::format_double(row["max_pairwise_diff"].get<double>())
                 : "";
      csv += ',';
      csv += row.contains("tolerance") ? tl::format_double(row["tolerance"].get<double>()) : "";
      csv += ',';
      csv += row.contains("pass") ? (row["pass"].get<bool>() ? "true" : "false") : "";
    }
    csv += ',';
    std::string status = row["status"].get<std::string>();
    for (char& ch : status) {
      if (ch == ',' || ch == '\n') ch = ';';
    }
    csv += status;
    csv += '\n';
  }
  json payload{{"rows", rows}};
  json config{{"from", from}, {"to", to}, {"step", step}, {"cmd", sub},
              {"N", n}, {"prefix", prefix}, {"depth", depth}, {"probes", probes},
              {"bins", bins}, {"jobs", nthreads}};
  write_outputs(o, tl::make_envelope("sweep", config, payload), &csv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tent-map inverse-limit toolkit"};
  app.set_version_flag("--version", tentlim::kVersion);
  app.require_subcommand(1);

  CommonOpts o;

  auto* density = app.add_subcommand("density", "invariant density (ulam | markov | histogram)");
  std::string method = "auto";
  int bins = 1024;
  int iterations = 100000;
  double orbit_length_d = 1e6;
  add_common(density, o);
  density->add_option("--method", method, "ulam | markov | histogram | auto")
      ->check(CLI::IsMember({"ulam", "markov", "histogram", "auto"}));
  density->add_option("--bins", bins, "uniform partition size");
  density->add_option("--iterations", iterations, "power iteration budget");
  density->add_option("--orbit-length", orbit_length_d, "histogram orbit length");

  auto* boxc = app.add_subcommand("box", "maximal 0-box over an interval");
  int component_index = 0;
  std::pair<double, double> interval{0.0, 0.0};
  int prefix = 4, depth = 30, probes = 5;
  double probe = 0.0;
  double mc_samples_d = 0;
  add_common(boxc, o);
  boxc->add_option("--component-index", component_index,
                   "complement component of the orbit prefix to use as base");
  auto* iv_opt = boxc->add_option("--interval", interval, "explicit base interval lo hi");
  boxc->add_option("--prefix", prefix, "flat prefix depth N'");
  boxc->add_option("--depth", depth, "exclusion truncation depth D");
  boxc->add_option("--bins", bins, "Ulam bins when no exact density exists");
  auto* probe_opt = boxc->add_option("--probe", probe, "fiber base point for alpha");
  boxc->add_option("--mc-samples", mc_samples_d, "sliding-window samples for muhat(B)");

  auto* holo = app.add_subcommand("holonomy", "fiber-measure invariance across base points");
  add_common(holo, o);
  holo->add_option("--prefix", prefix, "flat prefix depth N'");
  holo->add_option("--depth", depth, "exclusion truncation depth D");
  holo->add_option("--probes", probes, "number of base probes");
  holo->add_option("--bins", bins, "Ulam bins when no exact density exists");

  auto* typ = app.add_subcommand("typicality", "leaf-regularity statistics bundle");
  tl::TypicalityConfig tcfg;
  add_common(typ, o);
  typ->add_option("--prefix", tcfg.orbit_prefix, "orbit prefix N for the box");
  typ->add_option("--depth", tcfg.box_depth, "box truncation depth D");
  typ->add_option("--visit-depth", tcfg.visit_depth, "max backward shift");
  double visit_samples_d = 10000, typ_mc_d = 200000;
  typ->add_option("--samples", visit_samples_d, "visit samples");
  typ->add_option("--mc-samples", typ_mc_d, "product-formula samples");
  typ->add_option("--period-bound", tcfg.period_bound, "periodic certificate search bound");
  typ->add_option("--bins", bins, "Ulam bins when no exact density exists");

  auto* dec = app.add_subcommand("decompose", "0-flat decomposition of a flat arc");
  int level = 1;
  std::pair<double, double> dec_interval{0.3, 0.8};
  int dec_depth = 8;
  std::string branches;
  add_common(dec, o);
  dec->add_option("--level", level, "flatness level m (interval given at this level)");
  dec->add_option("--interval", dec_interval, "level-m interval lo hi")->required();
  dec->add_option("--depth", dec_depth, "total thread depth");
  dec->add_option("--branches", branches, "explicit pullback branch word (L/R per level)");

  auto* sweep = app.add_subcommand("sweep", "run a sub-command across a slope grid");
  double from = 0.0, to = 0.0, step_sz = 0.01;
  std::string sweep_cmd = "gap";
  int sweep_n = 2000;
  int jobs = static_cast<int>(std::thread::hardware_concurrency());
  add_common(sweep, o, false);
  sweep->add_option("--from", from, "first slope")->required();
  sweep->add_option("--to", to, "last slope")->required();
  sweep->add_option("--step", step_sz, "slope increment");
  sweep->add_option("--cmd", sweep_cmd, "gap | holonomy");
  sweep->add_option("--N", sweep_n, "orbit prefix for gap");
  sweep->add_option("--prefix", prefix, "flat prefix depth for holonomy");
  sweep->add_option("--depth", depth, "truncation depth for holonomy");
  sweep->add_option("--probes", probes, "holonomy probes");
  sweep->add_option("--bins", bins, "Ulam bins");
  sweep->add_option("--jobs", jobs, "parallel slope evaluations");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const auto t0 = std::chrono::steady_clock::now();
  int rc = 0;
  try {
    if (density->parsed()) {
      rc = cmd_density(o, method, bins, iterations, static_cast<std::int64_t>(orbit_length_d));
    } else if (boxc->parsed()) {
      rc = cmd_box(o, component_index, interval, iv_opt->count() > 0, prefix, depth, bins, probe,
                   probe_opt->count() > 0, static_cast<std::size_t>(mc_samples_d));
    } else if (holo->parsed()) {
      rc = cmd_holonomy(o, prefix, depth, probes, bins);
    } else if (typ->parsed()) {
      tcfg.seed = o.seed;
      tcfg.allow_sqrt2 = o.allow_sqrt2;
      tcfg.visit_samples = static_cast<std::size_t>(visit_samples_d);
      tcfg.mc_samples = static_cast<std::size_t>(typ_mc_d);
      rc = cmd_typicality(o, tcfg, bins);
    } else if (dec->parsed()) {
      rc = cmd_decompose(o, level, dec_interval, dec_depth, branches);
    } else if (sweep->parsed()) {
      rc = cmd_sweep(o, from, to, step_sz, sweep_cmd, sweep_n, prefix, depth, probes, bins, jobs);
    }
  } catch (const tl::Inconclusive& e) {
    std::cerr << "inconclusive: " << e.what() << "\n";
    rc = 4;
  } catch (const tl::ConvergenceError& e) {
    std::cerr << "numeric failure: " << e.what() << " (residual " << e.residual << ")\n";
    rc = 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    rc = 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    rc = 3;
  }
  const auto t1 = std::chrono::steady_clock::now();
  std::cerr << "elapsed_ms "
            << std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count() << "\n";
  return rc;
}
