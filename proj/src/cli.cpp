#include "psolv/cli.hpp"

#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include "psolv/config.hpp"
#include "psolv/estimate_lab.hpp"
#include "psolv/expr.hpp"
#include "psolv/psi_analysis.hpp"
#include "psolv/pseudo_sign.hpp"
#include "psolv/symbols.hpp"
#include "psolv/system_algebra.hpp"
#include "psolv/weights.hpp"

namespace psolv {

namespace {

using nlohmann::json;

std::string timestamp_utc() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_report(const std::string& dir, const std::string& name,
                  const RunConfig& c, json body) {
  body["tool"] = "psolv";
  body["version"] = kVersion;
  body["generated_at"] = timestamp_utc();
  body["config"] = config_json(c);
  std::filesystem::create_directories(dir);
  const std::string path = dir + "/" + name;
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open report file " + path);
  os << body.dump(2) << '\n';
}

json json_of(const PsibarReport& r) {
  json j;
  j["holds"] = r.holds;
  j["tau_zero"] = r.tau_zero;
  j["n_violations"] = r.violations.size();
  json list = json::array();
  std::size_t cap = 0;
  for (const PsibarViolation& v : r.violations) {
    if (++cap > 50) break;  // witness list, not a field dump
    list.push_back({{"t", v.t}, {"x", v.x}, {"xi", v.xi}, {"witness", v.witness}});
  }
  j["violations"] = list;
  return j;
}

json json_of(const InequalityCheck& c) {
  return {{"ok", c.ok},
          {"max_violation", c.max_violation},
          {"t", c.t},
          {"x", c.x},
          {"xi", c.xi}};
}

json json_of(const WeightCertificate& c) {
  json j;
  j["h"] = c.h;
  j["eps_fp"] = c.eps_fp;
  j["h_lower"] = json_of(c.h_lower);
  j["h_mid"] = json_of(c.h_mid);
  j["h_upper"] = json_of(c.h_upper);
  j["hhh_lower"] = json_of(c.hhh_lower);
  j["hhh_mid"] = json_of(c.hhh_mid);
  j["hhh_upper"] = json_of(c.hhh_upper);
  j["m_lower"] = json_of(c.m_lower);
  j["qmax"] = json_of(c.qmax);
  j["sign_consistency"] = json_of(c.sign_consistency);
  j["all_hard_ok"] = c.all_hard_ok();
  j["fitted_C3"] = c.fitted_C3;
  j["mest0_C0"] = c.mest0_C0;
  j["slowvar_CH"] = c.slowvar_CH;
  j["temper_CM"] = c.temper_CM;
  j["m_temper_C"] = c.m_temper_C;
  j["lipschitz_m"] = c.lipschitz_m;
  j["norm_grad"] = c.norm_grad;
  j["norm_hess"] = c.norm_hess;
  return j;
}

json json_of(const TraceResult& r) {
  json j;
  switch (r.status) {
    case TraceStatus::Completed: j["status"] = "completed"; break;
    case TraceStatus::Exited: j["status"] = "exited"; break;
    case TraceStatus::Degenerate: j["status"] = "degenerate"; break;
  }
  j["steps"] = r.path.size();
  j["max_re_drift"] = r.max_re_drift;
  json events = json::array();
  for (const SignChangeEvent& e : r.events)
    events.push_back({{"step", e.step},
                      {"x", e.x},
                      {"xi", e.xi},
                      {"im_before", e.im_before},
                      {"im_after", e.im_after}});
  j["events"] = events;
  return j;
}

// Subcommand bodies. Each returns the process exit code; Error thrown here
// means a runtime failure (mapped to 3 by the caller).

int cmd_check_psi(const RunConfig& c, const ScalarField& f) {
  const PsibarReport rep = check_psibar(f, c.tol_zero);
  json body;
  body["psibar"] = json_of(rep);

  bool trace_clean = true;
  if (!c.trace_re.empty() || !c.trace_im.empty()) {
    const ScalarSymbol re =
        compile_expr(c.trace_re.empty() ? "0" : c.trace_re);
    const ScalarSymbol im =
        compile_expr(c.trace_im.empty() ? "0" : c.trace_im);
    TraceOptions opt;
    opt.max_steps = c.trace_steps;
    const TraceResult tr = trace_bicharacteristic(
        [&](double x, double xi) {
          return cplx(re(0.0, x, xi), im(0.0, x, xi));
        },
        c.trace_x0, c.trace_xi0, opt);
    trace_clean = tr.events.empty();
    body["trace"] = json_of(tr);
  }

  const bool holds = rep.holds && trace_clean;
  body["holds"] = holds;
  write_report(c.out, "check_psi.json", c, body);
  std::cout << "check-psi: " << (holds ? "holds" : "violated") << " ("
            << rep.violations.size() << " gate witnesses)\n";
  return holds ? 0 : 1;
}

// Matrix symbol frozen at the middle time slice, bilinear in (x, xi) and
// clamped at the window edge so finite differences stay defined.
MatrixFn field_matrix_fn(const MatrixField& mf) {
  const std::size_t mid = mf.time.n_t / 2;
  return [mf, mid](const Eigen::VectorXd& w) {
    const PhaseGrid& g = mf.grid;
    double s = (w[0] - g.x_min) / g.dx() - 0.5;
    double u = (w[1] - g.xi_min) / g.dxi() - 0.5;
    s = std::min(std::max(s, 0.0), static_cast<double>(g.n_x - 1));
    u = std::min(std::max(u, 0.0), static_cast<double>(g.n_xi - 1));
    const std::size_t j = std::min(static_cast<std::size_t>(s), g.n_x - 2);
    const std::size_t k = std::min(static_cast<std::size_t>(u), g.n_xi - 2);
    const double a = s - static_cast<double>(j), b = u - static_cast<double>(k);
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(mf.N, mf.N);
    for (std::size_t r = 0; r < mf.N; ++r)
      for (std::size_t q = 0; q < mf.N; ++q)
        out(r, q) = (1 - a) * (1 - b) * mf.at(mid, j, k, r, q) +
                    a * (1 - b) * mf.at(mid, j + 1, k, r, q) +
                    (1 - a) * b * mf.at(mid, j, k + 1, r, q) +
                    a * b * mf.at(mid, j + 1, k + 1, r, q);
    return out;
  };
}

int cmd_classify(const RunConfig& c) {
  // Gallery entries answer by name; the stored expected verdict is the
  // pass/fail criterion.
  std::string name = c.matrix;
  if (name == "symmetric_w1_w2") name = "symmetric-pair";
  for (const GalleryEntry& e : gallery()) {
    if (e.name != name) continue;
    json body;
    body["entry"] = json::parse(to_json(e));
    write_report(c.out, "classify.json", c, body);
    std::cout << "classify: " << e.name
              << (e.matches ? ": matches documented verdict\n"
                            : ": MISMATCH against documented verdict\n");
    return e.matches ? 0 : 1;
  }

  MatrixFn p;
  Eigen::VectorXd w0(2);
  double eps_ball = 0.25;
  std::string label = c.matrix;
  if (c.matrix == "identity") {
    p = [](const Eigen::VectorXd&) {
      return Eigen::MatrixXcd::Identity(2, 2).eval();
    };
    w0 << 1.0, 0.0;
  } else if (c.matrix.rfind("file:", 0) == 0) {
    const std::string path = c.matrix.substr(5);
    AnyField any = read_field(path);
    if (any.kind != kPslfMatrix)
      throw Error("classify: " + path + " is not a matrix field");
    p = field_matrix_fn(any.matrix);
    w0 << 0.5 * (any.matrix.grid.x_min + any.matrix.grid.x_max),
        0.5 * (any.matrix.grid.xi_min + any.matrix.grid.xi_max);
    eps_ball = 0.5 * std::min(any.matrix.grid.dx(), any.matrix.grid.dxi());
  } else {
    throw Error("config: unknown matrix selection '" + c.matrix + "'");
  }

  const PrincipalTypeReport pt = principal_type_test(p, w0, 1e-2, c.tol_rank);
  const double scale = p(w0).norm();
  const CharacteristicsReport cc = constant_characteristics_test(
      p, w0, eps_ball, 24, std::max(0.1 * scale, 1e-8), c.tol_rank, c.seed);

  json body;
  body["matrix"] = label;
  body["principal_type"] = json::parse(to_json(pt));
  body["constant_characteristics"] = json::parse(to_json(cc));
  if (pt.elliptic) body["note"] = "elliptic at the base point";
  write_report(c.out, "classify.json", c, body);
  std::cout << "classify: " << label << ": principal type "
            << (pt.is_pt ? "yes" : "no") << ", constant characteristics "
            << (cc.constant ? "yes" : "no") << "\n";
  return (pt.indeterminate || cc.indeterminate) ? 1 : 0;
}

int cmd_verify(const RunConfig& c, const ScalarField& f) {
  PipelineOptions opt;
  opt.T_max = c.T;
  opt.n_random_trials = c.n_random_trials;
  opt.seed = c.seed;
  opt.skip_gate = c.skip_gate;
  opt.margin = c.margin;
  opt.bisect_steps = c.bisect_steps;
  opt.tau_zero = c.tol_zero;
  opt.dbest_slack = c.tol_slack;

  const PipelineResult res = run_estimate_pipeline(f, opt);

  json body;
  body["gate"] = json_of(res.gate);
  body["gate_passed"] = res.gate_passed;
  body["T_corpus"] = res.T_corpus;
  const bool ran_estimate = !res.estimate.trial_labels.empty();
  body["estimate"] = json::parse(to_json(res.estimate));
  if (ran_estimate) {
    body["weights"] = json_of(res.certificate);
    body["west3"] = json::parse(to_json(res.west3));
    body["dbest"] = {{"ok", res.dbest.ok},
                     {"min_margin", res.dbest.min_margin},
                     {"scale", res.dbest.scale},
                     {"argmin_pair", res.dbest.argmin_pair}};
    std::filesystem::create_directories(c.out);
    write_estimate_csv(c.out + "/estimate_trials.csv", res.estimate);
  }

  bool ok = res.gate_passed && ran_estimate && res.estimate.verdict &&
            res.certificate.all_hard_ok() && res.west3.positive && res.dbest.ok;

  // Lower-order block: reduce, quantize the conjugator, rerun the pairing.
  if (!c.f0_file.empty() && ran_estimate) {
    AnyField any = read_field(c.f0_file);
    if (any.kind != kPslfMatrix)
      throw Error("verify: " + c.f0_file + " is not a matrix field");
    const MatrixField& f0 = any.matrix;
    if (f0.grid.n_x != f.grid.n_x || f0.grid.n_xi != f.grid.n_xi ||
        f0.time.n_t != f.time.n_t)
      throw Error("verify: F0 grid does not match the symbol grid");

    const ReductionReport red = reduce_lower_order(f0);
    body["reduction"] = json::parse(to_json(red));

    const double t_rep = res.T_corpus > 0.0 ? res.T_corpus : c.T;
    const SignPartition part = sign_partition(f, c.tol_zero);
    const SignedDistanceField sd = signed_distance(part);
    const WeightBundle wb = build_weights(f, sd);
    const PseudoSign ps = build_rho(sd.delta0, wb.m, t_rep);
    const std::vector<OperatorMatrix> mult = build_multiplier(ps, f.grid);
    const SpaceTimeOperator p0 = assemble_P0(f, f0);
    const std::vector<Trial> trials =
        trial_corpus(f.grid, f.time, c.n_random_trials, c.seed, f0.N);
    const EstimateReport conj_rep = verify_propest(
        p0, mult, trials, t_rep, f.grid.h, quantize_conjugator(red.E));
    body["conjugated_estimate"] = json::parse(to_json(conj_rep));
    ok = ok && conj_rep.verdict && red.invertible_ok &&
         red.residual <= c.tol_resid;
  }

  body["ok"] = ok;
  write_report(c.out, "verify_report.json", c, body);
  std::cout << "verify: " << (ok ? "pass" : "fail") << " (T_corpus = "
            << res.T_corpus << ", fitted_C0 = " << res.estimate.fitted_C0
            << ")\n";
  return ok ? 0 : 1;
}

int cmd_gallery(const RunConfig& c) {
  const std::vector<GalleryEntry> entries = gallery();
  json list = json::array();
  bool all = true;
  std::string first_bad;
  std::filesystem::create_directories(c.out + "/gallery");
  for (const GalleryEntry& e : entries) {
    const json je = json::parse(to_json(e));
    list.push_back(je);
    json body;
    body["entry"] = je;
    write_report(c.out + "/gallery", e.name + ".json", c, body);
    if (!e.matches && all) {
      all = false;
      first_bad = e.name;
    }
  }
  json body;
  body["entries"] = list;
  body["all_match"] = all;
  write_report(c.out, "gallery.json", c, body);
  if (all)
    std::cout << "gallery: all " << entries.size() << " verdicts match\n";
  else
    std::cout << "gallery: MISMATCH at entry " << first_bad << "\n";
  return all ? 0 : 1;
}

int cmd_weights(const RunConfig& c, const ScalarField& f) {
  const SignPartition part = sign_partition(f, c.tol_zero);
  const SignedDistanceField sd = signed_distance(part);
  const WeightBundle wb = build_weights(f, sd);
  const WeightCertificate cert = certify_inequalities(f, part, sd, wb, c.seed);

  std::filesystem::create_directories(c.out);
  write_field(c.out + "/delta0.pslf", sd.delta0);
  write_field(c.out + "/hinv_sqrt.pslf", wb.hinv_sqrt);
  write_field(c.out + "/weight_M.pslf", wb.M);
  write_field(c.out + "/weight_m.pslf", wb.m);

  json body;
  body["certificate"] = json_of(cert);
  body["fields"] = {"delta0.pslf", "hinv_sqrt.pslf", "weight_M.pslf",
                    "weight_m.pslf"};
  write_report(c.out, "weights_report.json", c, body);
  std::cout << "weights: " << (cert.all_hard_ok() ? "all hard checks pass"
                                                  : "hard check FAILED")
            << " (mest0_C0 = " << cert.mest0_C0 << ")\n";
  return cert.all_hard_ok() ? 0 : 1;
}

int cmd_fields(const RunConfig& c) {
  PslfHeader h;
  const std::vector<double> payload = pslf_read(c.in_file, h);

  json body;
  body["path"] = c.in_file;
  body["kind"] = h.kind == kPslfScalar   ? "scalar"
                 : h.kind == kPslfMatrix ? "matrix"
                                         : "operator";
  body["n_t"] = h.n_t;
  body["n_x"] = h.n_x;
  body["n_xi"] = h.n_xi;
  body["N"] = h.N;
  body["x_window"] = {h.x_min, h.x_max};
  body["xi_window"] = {h.xi_min, h.xi_max};
  body["t_window"] = {h.t_min, h.t_max};
  body["h"] = h.h;
  body["T"] = h.T;
  body["payload_doubles"] = payload.size();

  if (!c.csv_out.empty()) {
    if (h.kind == kPslfOperator)
      throw Error("fields: CSV conversion handles scalar and matrix kinds");
    AnyField any = read_field(c.in_file);
    std::ofstream os(c.csv_out);
    if (!os) throw Error("fields: cannot open " + c.csv_out);
    os.precision(17);
    if (any.kind == kPslfScalar) {
      const ScalarField& f = any.scalar;
      os << "t,x,xi,value\n";
      for (std::size_t i = 0; i < f.time.n_t; ++i)
        for (std::size_t j = 0; j < f.grid.n_x; ++j)
          for (std::size_t k = 0; k < f.grid.n_xi; ++k)
            os << f.time.t(i) << ',' << f.grid.x(j) << ',' << f.grid.xi(k)
               << ',' << f.at(i, j, k) << '\n';
    } else {
      const MatrixField& f = any.matrix;
      os << "t,x,xi,row,col,re,im\n";
      for (std::size_t i = 0; i < f.time.n_t; ++i)
        for (std::size_t j = 0; j < f.grid.n_x; ++j)
          for (std::size_t k = 0; k < f.grid.n_xi; ++k)
            for (std::size_t r = 0; r < f.N; ++r)
              for (std::size_t s = 0; s < f.N; ++s) {
                const cplx v = f.at(i, j, k, r, s);
                os << f.time.t(i) << ',' << f.grid.x(j) << ',' << f.grid.xi(k)
                   << ',' << r << ',' << s << ',' << v.real() << ','
                   << v.imag() << '\n';
              }
    }
    body["csv_out"] = c.csv_out;
  }

  write_report(c.out, "fields_report.json", c, body);
  std::cout << "fields: " << c.in_file << ": " << body["kind"].get<std::string>()
            << " " << h.n_t << "x" << h.n_x << "x" << h.n_xi << "\n";
  return 0;
}

struct CommonArgs {
  std::string config_path;
  std::string out;
  std::uint64_t seed = 0;
  bool skip_gate = false;
  double tol_rank = 0, tol_zero = 0, tol_slack = 0, tol_resid = 0;
  std::vector<std::string> sets;

  CLI::Option *o_out = nullptr, *o_seed = nullptr;
  CLI::Option *o_rank = nullptr, *o_zero = nullptr, *o_slack = nullptr,
              *o_resid = nullptr;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--config", a.config_path, "configuration file (JSON or key = value)");
  a.o_out = cmd->add_option("--out", a.out, "report directory");
  a.o_seed = cmd->add_option("--seed", a.seed, "random seed override");
  cmd->add_flag("--skip-gate", a.skip_gate, "run the estimate even when the gate fails");
  a.o_rank = cmd->add_option("--tol-rank", a.tol_rank, "classification rank tolerance");
  a.o_zero = cmd->add_option("--tol-zero", a.tol_zero, "sign-partition dead zone");
  a.o_slack = cmd->add_option("--tol-slack", a.tol_slack, "derivative-bound slack");
  a.o_resid = cmd->add_option("--tol-resid", a.tol_resid, "reduction residual budget");
  cmd->add_option("--set", a.sets, "extra key=value config override")
      ->take_all();
}

RunConfig resolve(const CommonArgs& a) {
  RunConfig c;
  if (!a.config_path.empty()) c = load_config(a.config_path);
  for (const std::string& kv : a.sets) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos)
      throw Error("--set expects key=value, got '" + kv + "'");
    apply_override(c, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (a.o_out->count()) c.out = a.out;
  if (a.o_seed->count()) c.seed = a.seed;
  if (a.skip_gate) c.skip_gate = true;
  if (a.o_rank->count()) c.tol_rank = a.tol_rank;
  if (a.o_zero->count()) c.tol_zero = a.tol_zero;
  if (a.o_slack->count()) c.tol_slack = a.tol_slack;
  if (a.o_resid->count()) c.tol_resid = a.tol_resid;
  c.validate();
  return c;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"numerical solvability toolkit for pseudodifferential models"};
  app.set_version_flag("--version", std::string("psolv ") + kVersion);
  app.require_subcommand(1);

  CLI::App* s_check = app.add_subcommand("check-psi", "one-sided sign condition gate");
  CLI::App* s_classify = app.add_subcommand("classify", "matrix symbol classification");
  CLI::App* s_verify = app.add_subcommand("verify", "full multiplier-estimate pipeline");
  CLI::App* s_gallery = app.add_subcommand("gallery", "documented example verdicts");
  CLI::App* s_weights = app.add_subcommand("weights", "weight fields and certificates");
  CLI::App* s_fields = app.add_subcommand("fields", "inspect/convert PSLF files");
  CommonArgs a_check, a_classify, a_verify, a_gallery, a_weights, a_fields;
  add_common(s_check, a_check);
  add_common(s_classify, a_classify);
  add_common(s_verify, a_verify);
  add_common(s_gallery, a_gallery);
  add_common(s_weights, a_weights);
  add_common(s_fields, a_fields);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  // Configuration phase: anything wrong with the run description (bad keys,
  // malformed expressions, unreadable inputs) exits 2 before computation.
  RunConfig cfg;
  ScalarField f;
  int (*runner)(const RunConfig&, const ScalarField&) = nullptr;
  int (*runner_nofield)(const RunConfig&) = nullptr;
  try {
    if (app.got_subcommand(s_check)) {
      cfg = resolve(a_check);
      f = config_symbol_field(cfg);
      runner = cmd_check_psi;
    } else if (app.got_subcommand(s_classify)) {
      cfg = resolve(a_classify);
      if (cfg.matrix.empty())
        throw Error("config: classify needs the 'matrix' key "
                    "(gallery name, 'identity', or file:<path>)");
      runner_nofield = cmd_classify;
    } else if (app.got_subcommand(s_verify)) {
      cfg = resolve(a_verify);
      f = config_symbol_field(cfg);
      runner = cmd_verify;
    } else if (app.got_subcommand(s_gallery)) {
      cfg = resolve(a_gallery);
      runner_nofield = cmd_gallery;
    } else if (app.got_subcommand(s_weights)) {
      cfg = resolve(a_weights);
      f = config_symbol_field(cfg);
      runner = cmd_weights;
    } else {
      cfg = resolve(a_fields);
      if (cfg.in_file.empty())
        throw Error("config: fields needs 'in' (a PSLF path)");
      runner_nofield = cmd_fields;
    }
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  try {
    return runner ? runner(cfg, f) : runner_nofield(cfg);
  } catch (const Error& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace psolv
