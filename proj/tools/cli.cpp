#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include "ldnhim/errors.hpp"
#include "ldnhim/features.hpp"
#include "ldnhim/grid_io.hpp"
#include "ldnhim/ld_engine.hpp"
#include "ldnhim/symplectic.hpp"
#include "ldnhim/system_model.hpp"

namespace ldnhim::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct ModelOptions {
  std::string model;
  double lambda = 1.0;
  double omega2 = 1.0;
  double omega3 = 1.0;
  std::string transform;
};

struct GridOptions {
  double h = 0.2;
  double tau = 10.0;
  double p = 0.5;
  double dt = 1e-2;
  int nu = 400;
  int nv = 400;
  std::string bounds = "-1,1,-1,1";
  unsigned workers = 0;
};

void add_model_options(CLI::App* app, ModelOptions& m) {
  app->add_option("--model", m.model, "decoupled2, coupled2, decoupled3 or coupled3");
  app->add_option("--lambda", m.lambda, "saddle exponent")->capture_default_str();
  app->add_option("--omega2", m.omega2, "first bath frequency")->capture_default_str();
  app->add_option("--omega3", m.omega3, "second bath frequency (3 DoF)")->capture_default_str();
  app->add_option("--transform", m.transform, "symplectic matrix file for coupled models");
}

void add_grid_options(CLI::App* app, GridOptions& g) {
  app->add_option("--h", g.h, "energy")->capture_default_str();
  app->add_option("--tau", g.tau, "half window")->capture_default_str();
  app->add_option("--p", g.p, "LD exponent in (0, 1]")->capture_default_str();
  app->add_option("--dt", g.dt, "RK4 step")->capture_default_str();
  app->add_option("--nu", g.nu, "cells along u")->capture_default_str();
  app->add_option("--nv", g.nv, "cells along v")->capture_default_str();
  app->add_option("--bounds", g.bounds, "u_min,u_max,v_min,v_max")->capture_default_str();
  app->add_option("--workers", g.workers, "threads, 0 = all cores")->capture_default_str();
}

Bounds parse_bounds(const std::string& s) {
  std::vector<double> b;
  std::stringstream ss(s);
  for (std::string tok; std::getline(ss, tok, ',');) {
    try {
      std::size_t used = 0;
      b.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ParameterDomainError("bad --bounds entry '" + tok + "'");
    }
  }
  if (b.size() != 4) throw ParameterDomainError("--bounds needs u_min,u_max,v_min,v_max");
  return {b[0], b[1], b[2], b[3]};
}

std::set<std::string> parse_emit(const std::string& s) {
  std::set<std::string> out;
  std::stringstream ss(s);
  for (std::string tok; std::getline(ss, tok, ',');) {
    if (tok != "csv" && tok != "image" && tok != "report") {
      throw ParameterDomainError("unknown --emit entry '" + tok + "'");
    }
    out.insert(tok);
  }
  if (out.empty()) throw ParameterDomainError("--emit is empty");
  return out;
}

Eigen::MatrixXd load_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParameterDomainError("cannot open " + path);
  return read_matrix(in);
}

SystemModel make_system(ModelKind kind, const ModelOptions& m) {
  ModelParams mp;
  mp.lambda = m.lambda;
  mp.omega2 = m.omega2;
  if (degrees_of_freedom(kind) == 3) mp.omega3 = m.omega3;
  if (!m.transform.empty()) {
    if (!is_coupled(kind)) throw ParameterDomainError("--transform needs a coupled model");
    return build_system(kind, mp, load_matrix(m.transform));
  }
  return reference_system(kind, mp);
}

LDParams ld_params(const GridOptions& g) {
  LDParams p;
  p.p = g.p;
  p.tau = g.tau;
  p.dt = g.dt;
  validate(p);
  return p;
}

std::string file_stem(const std::string& section) {
  std::string s = section;
  for (char& c : s) {
    if (c == '/') c = '_';
  }
  return s;
}

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

Manifest manifest_for(const GridField& g, const SystemModel& sys, const ModelOptions& m) {
  Manifest out{{"tool", std::string("ldnhim ") + kVersion},
               {"model", to_string(sys.kind())},
               {"lambda", num(sys.params().lambda)},
               {"omega2", num(sys.params().omega2)}};
  if (sys.params().omega3) out.emplace_back("omega3", num(*sys.params().omega3));
  if (is_coupled(sys.kind())) {
    out.emplace_back("transform", m.transform.empty() ? "reference" : m.transform);
  }
  out.insert(out.end(), {{"section", g.section.name},
                         {"h", num(g.h)},
                         {"tau", num(g.params.tau)},
                         {"p", num(g.params.p)},
                         {"dt", num(g.params.dt)},
                         {"integrator", "rk4"},
                         {"nu", std::to_string(g.nu)},
                         {"nv", std::to_string(g.nv)},
                         {"bounds", num(g.bounds.u_min) + "," + num(g.bounds.u_max) + "," +
                                        num(g.bounds.v_min) + "," + num(g.bounds.v_max)}});
  return out;
}

json label_entry(const std::string& section, const LabelReport& l, double tol) {
  return {{"section", section},
          {"label", to_string(l.label)},
          {"expected", l.expected},
          {"n_detected", l.n_detected},
          {"max_distance", l.max_distance},
          {"mean_distance", l.mean_distance},
          {"coverage", l.coverage},
          {"tolerance", tol},
          {"pass", l.pass}};
}

MatchReport match_grid(const GridField& grid, const SystemModel& sys, double oracle_h,
                       double tol, const KinkOptions& kink) {
  const FeatureSet analytic = analytic_features(grid.section, sys, oracle_h, grid.bounds);
  const DetectedSets detected = detect_structures(grid, kink);
  const ScalarGrid mask = scalar_view(grid);
  return match_features(detected, analytic, tol, &mask);
}

// Prepends the entries of --config files to the subcommand's arguments, so
// flags given on the command line win.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> out;
  std::vector<std::string> injected;
  for (std::size_t k = 0; k < args.size(); ++k) {
    std::string path;
    if (args[k] == "--config" && k + 1 < args.size()) {
      path = args[++k];
    } else if (args[k].rfind("--config=", 0) == 0) {
      path = args[k].substr(9);
    } else {
      out.push_back(args[k]);
      continue;
    }
    std::ifstream in(path);
    if (!in) throw ParameterDomainError("cannot open config " + path);
    for (const auto& [key, value] : read_config(in)) injected.push_back("--" + key + "=" + value);
  }
  if (injected.empty() || out.empty()) return out;
  out.insert(out.begin() + 1, injected.begin(), injected.end());
  return out;
}

int cmd_grid(const ModelOptions& m, const GridOptions& g, const std::string& section_name,
             const std::string& out_dir, const std::string& emit_list, const std::string& image_of,
             double tol, std::ostream& out, std::ostream& err) {
  const auto emit = parse_emit(emit_list);
  std::string name = section_name;
  if (name.find('/') == std::string::npos) name = (m.model.empty() ? "decoupled2" : m.model) + "/" + name;
  const SectionSpec section = find_section(name);
  if (!m.model.empty() && parse_model_kind(m.model) != section.kind) {
    throw UnknownSectionError("section " + name + " does not belong to model " + m.model);
  }
  FieldComponent which = FieldComponent::Total;
  if (image_of == "forward") which = FieldComponent::Forward;
  else if (image_of == "backward") which = FieldComponent::Backward;
  else if (image_of != "total") throw ParameterDomainError("--image-of must be total, forward or backward");

  const SystemModel sys = make_system(section.kind, m);
  const LDParams params = ld_params(g);
  const Bounds bounds = parse_bounds(g.bounds);
  fs::create_directories(out_dir);

  const GridField grid = grid_ld(sys, section, g.h, bounds, g.nu, g.nv, params, g.workers);
  const std::string stem = (fs::path(out_dir) / file_stem(section.name)).string();

  std::size_t overflow = 0;
  for (CellStatus s : grid.status) overflow += s == CellStatus::Overflow;
  if (overflow > 0) {
    std::ofstream log(stem + ".overflow.log");
    log << "# i j u v\n";
    for (int j = 0; j < grid.nv; ++j) {
      for (int i = 0; i < grid.nu; ++i) {
        if (grid.status[grid.index(i, j)] != CellStatus::Overflow) continue;
        log << i << ' ' << j << ' ' << num(grid.u_at(i)) << ' ' << num(grid.v_at(j)) << '\n';
      }
    }
    err << overflow << " cells overflowed and were masked; see " << stem << ".overflow.log\n";
  }
  if (emit.count("csv")) {
    std::ofstream f(stem + ".csv");
    write_csv(f, grid, manifest_for(grid, sys, m));
    if (!f) throw ParameterDomainError("cannot write " + stem + ".csv");
    out << "wrote " << stem << ".csv\n";
  }
  if (emit.count("image")) {
    std::ofstream f(stem + ".pgm", std::ios::binary);
    write_pgm(f, grid, which);
    if (!f) throw ParameterDomainError("cannot write " + stem + ".pgm");
    out << "wrote " << stem << ".pgm\n";
  }
  if (emit.count("report")) {
    const double t = tol > 0.0 ? tol : std::min(grid.du(), grid.dv());
    const MatchReport r = match_grid(grid, sys, g.h, t, {});
    json j = {{"section", section.name}, {"tolerance", t}, {"pass", r.pass}, {"entries", json::array()}};
    for (const auto& l : r.labels) j["entries"].push_back(label_entry(section.name, l, t));
    std::ofstream f(stem + ".report.json");
    f << std::setw(2) << j << '\n';
    out << "wrote " << stem << ".report.json\n";
  }
  return kOk;
}

int cmd_verify(const ModelOptions& m, const GridOptions& g, const std::vector<std::string>& targets,
               double oracle_h, double tol, double kappa, const std::string& report_path,
               std::ostream& out) {
  const auto sections = resolve_targets(targets);
  const LDParams params = ld_params(g);
  const Bounds bounds = parse_bounds(g.bounds);
  const double h_oracle = std::isnan(oracle_h) ? g.h : oracle_h;
  KinkOptions kink;
  kink.kappa = kappa;

  json entries = json::array();
  json summary = json::array();
  bool all_pass = true;
  for (const SectionSpec& s : sections) {
    if (!m.model.empty() && parse_model_kind(m.model) != s.kind) continue;
    const SystemModel sys = make_system(s.kind, m);
    const GridField grid = grid_ld(sys, s, g.h, bounds, g.nu, g.nv, params, g.workers);
    const double t = tol > 0.0 ? tol : std::min(grid.du(), grid.dv());
    const MatchReport r = match_grid(grid, sys, h_oracle, t, kink);
    all_pass = all_pass && r.pass;
    out << std::left << std::setw(20) << s.name << (r.pass ? "PASS" : "FAIL");
    for (const auto& l : r.labels) {
      out << "  " << to_string(l.label) << " n=" << l.n_detected << " max=" << std::setprecision(4)
          << l.max_distance << (l.pass ? "" : "!");
      entries.push_back(label_entry(s.name, l, t));
    }
    out << '\n' << std::flush;
    summary.push_back({{"section", s.name}, {"pass", r.pass}});
  }
  json report = {{"tool", std::string("ldnhim ") + kVersion},
                 {"parameters",
                  {{"h", g.h}, {"oracle_h", h_oracle}, {"tau", g.tau}, {"p", g.p}, {"dt", g.dt},
                   {"nu", g.nu}, {"nv", g.nv}, {"bounds", g.bounds}, {"kappa", kappa}}},
                 {"sections", summary},
                 {"entries", entries},
                 {"pass", all_pass}};
  if (!report_path.empty()) {
    const fs::path path(report_path);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path);
    f << std::setw(2) << report << '\n';
    if (!f) throw ParameterDomainError("cannot write " + report_path);
    out << "wrote " << report_path << '\n';
  }
  out << summary.size() << " sections, " << (all_pass ? "all pass" : "FAILURES") << '\n';
  return all_pass ? kOk : kVerifyFailed;
}

int cmd_asymptotics(double lambda, double p, double a, double b, double omega, double mode_h,
                    const std::vector<double>& taus, double dt, const std::string& method,
                    std::ostream& out) {
  ModelParams mp;
  mp.lambda = lambda;
  mp.omega2 = omega;
  const SystemModel sys = build_system(ModelKind::Decoupled2, mp);
  const double radius = std::sqrt(2.0 * mode_h / omega);
  const PhasePoint x0{0.5 * (a + b), radius, 0.5 * (a - b), 0.0};
  const double limit = elliptic_average_limit(omega, mode_h, p);

  LDParams params;
  params.p = p;
  params.dt = dt;
  if (method == "quadrature") params.method = LDMethod::AnalyticQuadrature;
  else if (method != "rk4") throw ParameterDomainError("--method must be rk4 or quadrature");

  out << "lambda=" << lambda << " p=" << p << " A=" << a << " B=" << b << " omega=" << omega
      << " H0=" << mode_h << " method=" << method << '\n';
  out << std::setw(8) << "tau" << std::setw(18) << "M_h" << std::setw(18) << "asymptote"
      << std::setw(12) << "gap" << std::setw(14) << "M_e/(2tau)" << std::setw(14) << "limit"
      << std::setw(12) << "gap" << '\n';
  for (double tau : taus) {
    params.tau = tau;
    if (params.dt > tau) params.dt = tau;
    const ComponentSplit s = split_components(sys, x0, params);
    const double asym = hyperbolic_asymptote(lambda, p, a, b, tau);
    const double avg = s.elliptic / (2.0 * tau);
    auto gap = [](double x, double ref) {
      return ref == 0.0 ? std::abs(x) : std::abs(x / ref - 1.0);
    };
    char row[160];
    std::snprintf(row, sizeof row, "%8g%18.10g%18.10g%12.3e%14.8g%14.8g%12.3e\n", tau,
                  s.hyperbolic, asym, gap(s.hyperbolic, asym), avg, limit, gap(avg, limit));
    out << row;
  }
  return kOk;
}

int cmd_check_symplectic(const std::string& path, bool catalog, std::ostream& out) {
  bool ok = true;
  auto report = [&](const std::string& name, const Eigen::MatrixXd& c) {
    const double r = check_symplectic(c);
    char line[160];
    std::snprintf(line, sizeof line, "%-24s %dx%d residual %.3e %s\n", name.c_str(),
                  static_cast<int>(c.rows()), static_cast<int>(c.cols()), r,
                  r <= 1e-12 ? "symplectic" : "NOT symplectic");
    out << line;
    ok = ok && r <= 1e-12;
  };
  if (catalog) {
    for (const auto& t : transform_catalog()) report(t.name, t.matrix);
  }
  if (!path.empty()) report(path, load_matrix(path));
  if (!catalog && path.empty()) throw ParameterDomainError("give a matrix file or --catalog");
  return ok ? kOk : kVerifyFailed;
}

}  // namespace

std::vector<SectionSpec> resolve_targets(const std::vector<std::string>& targets) {
  std::vector<SectionSpec> out;
  std::set<std::string> seen;
  auto add = [&](const SectionSpec& s) {
    if (seen.insert(s.name).second) out.push_back(s);
  };
  for (const std::string& t : targets) {
    if (t == "all") {
      for (const auto& s : full_catalog()) add(s);
    } else if (t.size() > 2 && t.compare(t.size() - 2, 2, "/*") == 0) {
      ModelKind kind;
      try {
        kind = parse_model_kind(t.substr(0, t.size() - 2));
      } catch (const std::exception&) {
        throw UnknownSectionError("unknown model in target " + t);
      }
      for (const auto& s : section_catalog(kind)) add(s);
    } else {
      add(find_section(t));
    }
  }
  return out;
}

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Lagrangian descriptors on isoenergetic sections of quadratic saddle Hamiltonians",
               "ldnhim"};
  // -h is taken by the energy option.
  app.set_help_flag("--help", "print this help and exit");
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  ModelOptions model;
  GridOptions grid;

  auto* g = app.add_subcommand("grid", "compute an LD grid on one section");
  add_model_options(g, model);
  add_grid_options(g, grid);
  std::string section = "q1p1", out_dir = ".", emit = "csv", image_of = "total";
  double tol = 0.0;
  g->add_option("--section", section, "section name, with or without the model prefix")
      ->capture_default_str();
  g->add_option("--out", out_dir, "output directory")->capture_default_str();
  g->add_option("--emit", emit, "comma list of csv, image, report")->capture_default_str();
  g->add_option("--image-of", image_of, "total, forward or backward")->capture_default_str();
  g->add_option("--tol", tol, "match tolerance for the report; 0 = one grid spacing");
  g->add_option("--config", "key=value file (flags override it)");

  auto* v = app.add_subcommand("verify", "match detected structures against the analytic sets");
  ModelOptions vmodel;
  GridOptions vgrid;
  add_model_options(v, vmodel);
  add_grid_options(v, vgrid);
  std::vector<std::string> targets{"all"};
  double oracle_h = std::nan(""), vtol = 0.0, kappa = KinkOptions{}.kappa;
  std::string report = "verify_report.json";
  v->add_option("targets", targets, "all, <model>/* or section names")
      ->capture_default_str()
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  v->add_option("--oracle-h", oracle_h, "energy of the analytic sets (default --h)");
  v->add_option("--tol", vtol, "match tolerance; 0 = one grid spacing");
  v->add_option("--kappa", kappa, "kink threshold in units of the difference scale")
      ->capture_default_str();
  v->add_option("--report,--out", report, "JSON report path")->capture_default_str();
  v->add_option("--config", "key=value file (flags override it)");

  auto* a = app.add_subcommand("asymptotics", "numerical LD components against closed forms");
  double lambda = 1.0, p = 0.5, ca = 2.0, cb = 0.0, omega = 1.0, mode_h = 0.2, dt = 1e-2;
  std::vector<double> taus{5.0, 10.0, 15.0};
  std::string method = "rk4";
  a->add_option("--lambda", lambda)->capture_default_str();
  a->add_option("--p", p)->capture_default_str();
  a->add_option("--A", ca, "q1 + p1")->capture_default_str();
  a->add_option("--B", cb, "q1 - p1")->capture_default_str();
  a->add_option("--omega", omega)->capture_default_str();
  a->add_option("--mode-energy", mode_h, "energy of the bath mode")->capture_default_str();
  a->add_option("--taus", taus)->delimiter(',')->capture_default_str()
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  a->add_option("--dt", dt)->capture_default_str();
  a->add_option("--method", method, "rk4 or quadrature")->capture_default_str();
  a->add_option("--config", "key=value file (flags override it)");

  auto* c = app.add_subcommand("check-symplectic", "residual of C J C^T - J for a matrix file");
  std::string matrix_path;
  bool catalog = false;
  c->add_option("matrix", matrix_path, "whitespace-separated 2N x 2N matrix");
  c->add_flag("--catalog", catalog, "check the built-in transformations");

  try {
    std::vector<std::string> args = expand_config(raw_args);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (g->parsed()) {
      return cmd_grid(model, grid, section, out_dir, emit, image_of, tol, out, err);
    }
    if (v->parsed()) {
      return cmd_verify(vmodel, vgrid, targets, oracle_h, vtol, kappa, report, out);
    }
    if (a->parsed()) {
      return cmd_asymptotics(lambda, p, ca, cb, omega, mode_h, taus, dt, method, out);
    }
    return cmd_check_symplectic(matrix_path, catalog, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
}

}  // namespace ldnhim::cli
