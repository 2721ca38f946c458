#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "homtom/adaptive.hpp"
#include "homtom/averaging.hpp"
#include "homtom/calibration.hpp"
#include "homtom/errors.hpp"
#include "homtom/io.hpp"
#include "homtom/kernels.hpp"
#include "homtom/maxlik.hpp"
#include "homtom/states.hpp"
#include "homtom/svg.hpp"

namespace {

using json = nlohmann::json;
using namespace homtom;

constexpr const char* kVersion = "1.0.0";

int log_threshold() {
  static const int level = [] {
    const char* env = std::getenv("HOMTOM_LOG");
    if (env == nullptr) return 1;
    const std::string v(env);
    if (v == "error") return 0;
    if (v == "warn") return 1;
    if (v == "info") return 2;
    if (v == "debug") return 3;
    std::fprintf(stderr, "homtom: unknown HOMTOM_LOG level '%s' (use error, warn, info or debug)\n",
                 v.c_str());
    return 1;
  }();
  return level;
}

void log_warn(const std::string& msg) {
  if (log_threshold() >= 1) std::fprintf(stderr, "homtom: %s\n", msg.c_str());
}

void log_info(const std::string& msg) {
  if (log_threshold() >= 2) std::fprintf(stderr, "homtom: %s\n", msg.c_str());
}

unsigned default_jobs() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

std::complex<double> parse_complex(const std::string& text, const char* flag) {
  const char* s = text.c_str();
  char* end = nullptr;
  const double re = std::strtod(s, &end);
  if (end == s) {
    throw ValidationError(std::string(flag) + ": cannot parse '" + text + "'");
  }
  double im = 0.0;
  if (*end == ',') {
    const char* s2 = end + 1;
    im = std::strtod(s2, &end);
    if (end == s2) {
      throw ValidationError(std::string(flag) + ": cannot parse '" + text + "'");
    }
  }
  while (*end == ' ') ++end;
  if (*end != '\0') {
    throw ValidationError(std::string(flag) + ": trailing garbage in '" + text + "'");
  }
  return {re, im};
}

// "lo:hi:count" inclusive grid or a plain comma-separated value list
std::vector<double> parse_grid(const std::string& text, const char* flag) {
  const auto bad = [&] {
    return ValidationError(std::string(flag) + ": expected lo:hi:count or v1,v2,..., got '" +
                           text + "'");
  };
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    double lo = 0.0, hi = 0.0;
    long count = 0;
    char tail = '\0';
    if (std::sscanf(text.c_str(), "%lf:%lf:%ld%c", &lo, &hi, &count, &tail) != 3 ||
        count < 1) {
      throw bad();
    }
    if (count == 1) return {lo};
    for (long i = 0; i < count; ++i) {
      out.push_back(lo + (hi - lo) * static_cast<double>(i) /
                             static_cast<double>(count - 1));
    }
    return out;
  }
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t next = std::min(text.find(',', pos), text.size());
    const std::string field = text.substr(pos, next - pos);
    char* end = nullptr;
    const double v = std::strtod(field.c_str(), &end);
    if (end == field.c_str() || *end != '\0') throw bad();
    out.push_back(v);
    pos = next + 1;
  }
  if (out.empty()) throw bad();
  return out;
}

std::string sibling_svg_path(const std::string& out) {
  const std::string suffix = ".json";
  if (out.size() > suffix.size() &&
      out.compare(out.size() - suffix.size(), suffix.size(), suffix) == 0) {
    return out.substr(0, out.size() - suffix.size()) + ".svg";
  }
  return out + ".svg";
}

// every run leaves its resolved configuration next to the output so the
// exact invocation can be replayed later
void write_sidecar(const std::string& out, json config) {
  config["version"] = kVersion;
  write_text_file(out + ".run.json", config.dump(2) + "\n");
  log_info("wrote sidecar " + out + ".run.json");
}

BarChartSpec diagonal_chart(const DensityMatrixEstimate& est,
                            const std::string& method) {
  BarChartSpec spec;
  spec.title = "reconstructed diagonal (" + method + ", N = " +
               std::to_string(est.sample_count) + ")";
  spec.x_label = "n";
  spec.y_label = "rho_nn";
  const int dim = static_cast<int>(est.rho.rows());
  for (int n = 0; n < dim; ++n) {
    spec.categories.push_back(std::to_string(n));
    spec.values.push_back(est.rho(n, n).real());
    spec.errors.push_back(est.err(n, n));
  }
  return spec;
}

std::string povm_panels_svg(const DiagonalPOVM& povm,
                            const Eigen::MatrixXd* theory) {
  std::vector<BarChartSpec> panels;
  for (int n = 0; n <= povm.n_max; ++n) {
    BarChartSpec spec;
    spec.title = "outcome n = " + std::to_string(n);
    spec.x_label = "m";
    spec.y_label = "P(n|m)";
    for (int m = 0; m < povm.dim; ++m) {
      spec.categories.push_back(std::to_string(m));
      spec.values.push_back(povm.p(n, m));
      spec.errors.push_back(povm.err(n, m));
      if (theory != nullptr) spec.overlay.push_back((*theory)(n, m));
    }
    panels.push_back(std::move(spec));
  }
  return render_panel_grid(panels);
}

struct SimulateArgs {
  std::string state_path;
  std::string xi_text;
  double eta = 1.0;
  double eta_h = 1.0;
  double nbar = 0.0;
  int truncation = 0;
  std::size_t count = 10000;
  std::uint64_t seed = 0;
  std::string out;
  std::string format = "csv";
  unsigned jobs = default_jobs();
};

void run_simulate(const SimulateArgs& a) {
  if (!a.xi_text.empty()) {
    if (!a.state_path.empty()) {
      throw ValidationError(
          "simulate: --state and --xi are mutually exclusive (a twin-beam "
          "run fixes the source)");
    }
    if (a.format != "csv") {
      throw ValidationError("simulate: joint records support --format csv only");
    }
    const auto xi = parse_complex(a.xi_text, "--xi");
    const auto records = simulate_joint(xi, a.eta, a.nbar, a.eta_h, a.count,
                                        a.seed, a.truncation, a.jobs);
    write_joint_records_csv(a.out, records);
    log_info("wrote " + std::to_string(records.size()) + " joint records to " + a.out);
    write_sidecar(a.out, json{{"command", "simulate"},
                              {"mode", "joint-records"},
                              {"xi", {xi.real(), xi.imag()}},
                              {"eta", a.eta},
                              {"nbar", a.nbar},
                              {"eta_h", a.eta_h},
                              {"truncation", a.truncation},
                              {"count", a.count},
                              {"seed", a.seed},
                              {"format", a.format},
                              {"jobs", a.jobs},
                              {"out", a.out}});
    return;
  }
  if (a.state_path.empty()) {
    throw ValidationError("simulate: need --state FILE (or --xi for joint records)");
  }
  if (a.format != "csv" && a.format != "bin") {
    throw ValidationError("simulate: samples support --format csv or bin");
  }
  const StateModel state = read_state_json(a.state_path);
  const DetectorModel detector(a.eta);
  const auto samples = sample_quadratures(state, detector, a.count, a.seed, a.jobs);
  if (a.format == "bin") {
    write_samples_binary(a.out, samples);
  } else {
    write_samples_csv(a.out, samples);
  }
  log_info("wrote " + std::to_string(samples.size()) + " samples to " + a.out);
  write_sidecar(a.out, json{{"command", "simulate"},
                            {"mode", "samples"},
                            {"state", a.state_path},
                            {"eta", a.eta},
                            {"count", a.count},
                            {"seed", a.seed},
                            {"format", a.format},
                            {"jobs", a.jobs},
                            {"out", a.out}});
}

// per-element variance-reduced averaging: fit null-function corrections on
// the first half of the data, average the corrected kernel on the second
DensityMatrixEstimate adaptive_reconstruct(
    std::span<const QuadratureSample> samples, int dim, double eta,
    unsigned jobs) {
  const NullBasis basis = NullBasis::default_basis();
  DensityMatrixEstimate est;
  est.rho.resize(dim, dim);
  est.err.resize(dim, dim);
  est.eta = eta;
  est.sample_count = samples.size();
  for (int n = 0; n < dim; ++n) {
    for (int m = n; m < dim; ++m) {
      const KernelFn base = [n, m, eta](double x, double phi) {
        return kernel_fock(n, m, x, phi, eta);
      };
      const EstimateWithError e =
          adaptive_estimate(samples, base, basis, true, jobs);
      est.rho(n, m) = e.mean;
      est.rho(m, n) = std::conj(e.mean);
      est.err(n, m) = est.err(m, n) = e.std_error();
      if (n == 0 && m == 0) est.diagnostics = e.diagnostics;
    }
  }
  return est;
}

struct ReconstructArgs {
  std::string input;
  int dim = 0;
  double eta = 1.0;
  std::string method = "avg";
  bool adaptive = false;
  bool do_hermitize = false;
  bool do_clip = false;
  std::size_t bootstrap = 0;
  double tol = 1e-8;
  std::size_t max_iters = 5000;
  std::uint64_t seed = 0;
  std::string out;
  std::string format = "json";
  unsigned jobs = default_jobs();
};

void run_reconstruct(const ReconstructArgs& a) {
  const auto samples = read_samples(a.input);
  log_info("read " + std::to_string(samples.size()) + " samples from " + a.input);

  EstimateFile file;
  file.method = a.method;
  if (a.method == "avg") {
    if (a.dim < 1) {
      throw ValidationError("reconstruct: method avg needs an explicit --dim");
    }
    if (a.bootstrap != 0) {
      throw ValidationError(
          "reconstruct: --bootstrap applies to method ml (averaging carries "
          "analytic error bars)");
    }
    if (a.adaptive) {
      file.estimate = adaptive_reconstruct(samples, a.dim, a.eta, a.jobs);
      if (a.do_hermitize) hermitize(file.estimate);
      if (a.do_clip) clip_negative_eigenvalues(file.estimate);
    } else {
      ReconstructOptions options;
      options.hermitize = a.do_hermitize;
      options.clip_eigenvalues = a.do_clip;
      options.jobs = a.jobs;
      file.estimate = reconstruct_density_matrix(samples, a.dim, a.eta, options);
    }
  } else {
    if (a.adaptive) {
      throw ValidationError("reconstruct: --adaptive applies to method avg");
    }
    MlConfig config;
    config.dim = a.dim;
    config.eta = a.eta;
    config.tol = a.tol;
    config.max_iters = a.max_iters;
    config.seed = a.seed;
    config.jobs = a.jobs;
    MlResult result = ml_reconstruct(samples, config);
    if (!result.report.converged) {
      throw NotConverged("reconstruct: ml hit --max-iters " +
                         std::to_string(a.max_iters) +
                         " before meeting --tol; raise the budget");
    }
    if (a.do_hermitize || a.do_clip) {
      log_warn("ml output is positive by construction; --hermitize/--clip ignored");
    }
    if (a.bootstrap > 0) {
      config.dim = result.report.truncation;
      config.initial = result.estimate.rho;
      const MlBootstrapResult boot =
          ml_bootstrap(samples, config, a.bootstrap, a.seed);
      result.estimate.err = boot.std_err;
      log_info("bootstrap used " + std::to_string(boot.used) + " of " +
               std::to_string(a.bootstrap) + " resamples");
    }
    file.estimate = result.estimate;
    file.ml = result.report;
  }

  write_estimate_json(a.out, file);
  log_info("wrote estimate to " + a.out);
  if (a.format == "svg") {
    const std::string svg_path = sibling_svg_path(a.out);
    write_text_file(svg_path, render_bar_chart(diagonal_chart(file.estimate, a.method)));
    log_info("wrote diagonal chart to " + svg_path);
  }
  write_sidecar(a.out, json{{"command", "reconstruct"},
                            {"input", a.input},
                            {"dim", a.dim},
                            {"eta", a.eta},
                            {"method", a.method},
                            {"adaptive", a.adaptive},
                            {"hermitize", a.do_hermitize},
                            {"clip", a.do_clip},
                            {"bootstrap", a.bootstrap},
                            {"tol", a.tol},
                            {"max_iters", a.max_iters},
                            {"seed", a.seed},
                            {"format", a.format},
                            {"jobs", a.jobs},
                            {"out", a.out}});
}

struct CalibrateArgs {
  std::string input;
  std::string xi_text;
  double eta_h = 1.0;
  int dim = 0;
  int n_max = -1;
  std::string method = "avg";
  std::size_t bootstrap = 50;
  double tol = 1e-8;
  std::size_t max_iters = 100000;
  std::string theory_text;
  std::uint64_t seed = 0;
  std::string out;
  std::string format = "json";
  unsigned jobs = default_jobs();
};

void run_calibrate(const CalibrateArgs& a) {
  const auto records = read_joint_records_csv(a.input);
  log_info("read " + std::to_string(records.size()) + " joint records from " + a.input);
  const auto xi = parse_complex(a.xi_text, "--xi");
  if (a.dim < 1) {
    throw ValidationError("calibrate: need --dim >= 1 Fock columns");
  }

  int n_max = a.n_max;
  if (n_max < 0) {
    int top = 0;
    for (const auto& r : records) top = std::max(top, r.n);
    n_max = std::min(top, 16);
    log_info("using n_max = " + std::to_string(n_max) + " from the data");
  }

  json config{{"command", "calibrate"},
              {"input", a.input},
              {"xi", {xi.real(), xi.imag()}},
              {"eta_h", a.eta_h},
              {"dim", a.dim},
              {"n_max", n_max},
              {"method", a.method},
              {"seed", a.seed},
              {"format", a.format},
              {"jobs", a.jobs},
              {"out", a.out}};

  PovmFile file;
  if (a.method == "avg") {
    if (a.bootstrap != 50) {
      log_warn("--bootstrap applies to method ml; averaging carries "
               "Wilson-score error bars");
    }
    file.povm = calibrate_averaging(records, xi, a.eta_h, n_max, a.dim, a.jobs);
  } else {
    CalibrationMlConfig config_ml;
    config_ml.bootstrap = a.bootstrap;
    config_ml.tol = a.tol;
    config_ml.max_iters = a.max_iters;
    config_ml.seed = a.seed;
    config_ml.jobs = a.jobs;
    CalibrationMlResult result = calibrate_ml(records, xi, a.eta_h, n_max,
                                              a.dim, config_ml);
    if (!result.converged) {
      throw NotConverged("calibrate: ml hit --max-iters " +
                         std::to_string(a.max_iters) +
                         " before meeting --tol; raise the budget");
    }
    log_info("ml converged after " + std::to_string(result.iterations) +
             " iterations, log-likelihood " + std::to_string(result.loglik));
    file.povm = std::move(result.povm);
    config["bootstrap"] = a.bootstrap;
    config["tol"] = a.tol;
    config["max_iters"] = a.max_iters;
  }

  std::optional<Eigen::MatrixXd> theory;
  if (!a.theory_text.empty()) {
    const auto pars = parse_complex(a.theory_text, "--theory");
    theory = theoretical_povm_table(pars.real(), pars.imag(), n_max, a.dim);
    config["theory"] = {pars.real(), pars.imag()};
  }

  file.config_json = config.dump();
  write_povm_json(a.out, file);
  log_info("wrote POVM table to " + a.out);
  if (a.format == "svg") {
    const std::string svg_path = sibling_svg_path(a.out);
    write_text_file(svg_path,
                    povm_panels_svg(file.povm, theory ? &*theory : nullptr));
    log_info("wrote outcome charts to " + svg_path);
  }
  write_sidecar(a.out, std::move(config));
}

struct KernelTableArgs {
  int dim = 0;
  double eta = 1.0;
  std::string x_text = "-4:4:17";
  std::string phi_text = "0";
  std::string out;
  std::string format = "csv";
  unsigned jobs = default_jobs();
};

void run_kernel_table(const KernelTableArgs& a) {
  if (a.format != "csv") {
    throw ValidationError("kernel-table: --format csv only");
  }
  if (a.dim < 1) {
    throw ValidationError("kernel-table: need --dim >= 1");
  }
  const auto xs = parse_grid(a.x_text, "--x");
  const auto phis = parse_grid(a.phi_text, "--phi");
  write_kernel_table_csv(a.out, a.dim, a.eta, xs, phis);
  log_info("wrote " + std::to_string(xs.size() * phis.size() *
                                     static_cast<std::size_t>(a.dim) *
                                     static_cast<std::size_t>(a.dim)) +
           " kernel values to " + a.out);
  write_sidecar(a.out, json{{"command", "kernel-table"},
                            {"dim", a.dim},
                            {"eta", a.eta},
                            {"x", a.x_text},
                            {"phi", a.phi_text},
                            {"format", a.format},
                            {"jobs", a.jobs},
                            {"out", a.out}});
}

struct PlotArgs {
  std::string input;
  std::string out;
  std::string format = "svg";
};

void run_plot(const PlotArgs& a) {
  if (a.format != "svg") {
    throw ValidationError("plot: --format svg only");
  }
  json doc;
  try {
    doc = json::parse(read_text_file(a.input));
  } catch (const json::exception& e) {
    throw IoError("'" + a.input + "' is not JSON: " + e.what());
  }
  std::string svg;
  if (doc.contains("rho")) {
    const EstimateFile file = read_estimate_json(a.input);
    svg = render_bar_chart(diagonal_chart(file.estimate, file.method));
  } else if (doc.contains("P")) {
    const PovmFile file = read_povm_json(a.input);
    std::optional<Eigen::MatrixXd> theory;
    const json config = json::parse(file.config_json);
    if (config.contains("theory")) {
      theory = theoretical_povm_table(config["theory"][0].get<double>(),
                                      config["theory"][1].get<double>(),
                                      file.povm.n_max, file.povm.dim);
    }
    svg = povm_panels_svg(file.povm, theory ? &*theory : nullptr);
  } else {
    throw IoError("'" + a.input + "' holds neither an estimate (rho) nor a POVM (P)");
  }
  write_text_file(a.out, svg);
  log_info("wrote " + a.out);
  write_sidecar(a.out, json{{"command", "plot"},
                            {"input", a.input},
                            {"format", a.format},
                            {"out", a.out}});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"homodyne quantum tomography toolkit"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  SimulateArgs sim;
  CLI::App* simulate = app.add_subcommand(
      "simulate", "draw homodyne samples of a state, or twin-beam joint "
                  "records when --xi is given");
  simulate->add_option("--state", sim.state_path,
                       "state description JSON (vacuum, fock, coherent, "
                       "thermal or density)")
      ->check(CLI::ExistingFile);
  simulate->add_option("--xi", sim.xi_text,
                       "twin-beam parameter (re or re,im); switches to joint "
                       "records with a photocounter on the trigger arm");
  simulate->add_option("--eta", sim.eta, "detector efficiency")
      ->capture_default_str();
  simulate->add_option("--eta-h", sim.eta_h,
                       "homodyne efficiency of the twin-beam signal arm")
      ->capture_default_str();
  simulate->add_option("--nbar", sim.nbar, "photocounter dark-count mean")
      ->capture_default_str();
  simulate->add_option("--truncation", sim.truncation,
                       "twin-beam Fock cutoff (0 = automatic)")
      ->capture_default_str();
  simulate->add_option("--n", sim.count, "number of events")
      ->capture_default_str();
  simulate->add_option("--seed", sim.seed, "random seed")->capture_default_str();
  simulate->add_option("--out", sim.out, "output path")->required();
  simulate->add_option("--format", sim.format, "csv or bin")
      ->check(CLI::IsMember({"csv", "bin"}))
      ->capture_default_str();
  simulate->add_option("--jobs", sim.jobs, "worker threads")
      ->capture_default_str();

  ReconstructArgs rec;
  CLI::App* reconstruct = app.add_subcommand(
      "reconstruct", "estimate a density matrix from homodyne samples");
  reconstruct->add_option("input", rec.input, "samples file (csv or bin)")
      ->required()
      ->check(CLI::ExistingFile);
  reconstruct->add_option("--dim", rec.dim,
                          "Fock truncation (ml: 0 picks it from the data)")
      ->capture_default_str();
  reconstruct->add_option("--eta", rec.eta, "detector efficiency")
      ->capture_default_str();
  reconstruct->add_option("--method", rec.method, "avg or ml")
      ->check(CLI::IsMember({"avg", "ml"}))
      ->capture_default_str();
  reconstruct->add_flag("--adaptive", rec.adaptive,
                        "variance-reduced kernels (method avg)");
  reconstruct->add_flag("--hermitize", rec.do_hermitize,
                        "post-process: average with the adjoint");
  reconstruct->add_flag("--clip", rec.do_clip,
                        "post-process: clip negative eigenvalues");
  reconstruct->add_option("--bootstrap", rec.bootstrap,
                          "ml error bars from this many resamples (0 = off)")
      ->capture_default_str();
  reconstruct->add_option("--tol", rec.tol, "ml stopping tolerance")
      ->capture_default_str();
  reconstruct->add_option("--max-iters", rec.max_iters, "ml iteration budget")
      ->capture_default_str();
  reconstruct->add_option("--seed", rec.seed, "random seed (ml bootstrap)")
      ->capture_default_str();
  reconstruct->add_option("--out", rec.out, "estimate JSON path")->required();
  reconstruct->add_option("--format", rec.format,
                          "json, or svg to add a diagonal bar chart")
      ->check(CLI::IsMember({"json", "svg"}))
      ->capture_default_str();
  reconstruct->add_option("--jobs", rec.jobs, "worker threads")
      ->capture_default_str();

  CalibrateArgs cal;
  CLI::App* calibrate = app.add_subcommand(
      "calibrate", "estimate a photodetector POVM from twin-beam records");
  calibrate->add_option("input", cal.input, "joint records CSV")
      ->required()
      ->check(CLI::ExistingFile);
  calibrate->add_option("--xi", cal.xi_text, "twin-beam parameter (re or re,im)")
      ->required();
  calibrate->add_option("--eta-h", cal.eta_h, "homodyne efficiency")
      ->capture_default_str();
  calibrate->add_option("--dim", cal.dim, "Fock columns m = 0..dim-1")
      ->required();
  calibrate->add_option("--n-max", cal.n_max,
                        "largest reported outcome (-1 = from the data)")
      ->capture_default_str();
  calibrate->add_option("--method", cal.method, "avg or ml")
      ->check(CLI::IsMember({"avg", "ml"}))
      ->capture_default_str();
  calibrate->add_option("--bootstrap", cal.bootstrap,
                        "ml error bars from this many resamples (0 = off)")
      ->capture_default_str();
  calibrate->add_option("--tol", cal.tol, "ml stopping tolerance")
      ->capture_default_str();
  calibrate->add_option("--max-iters", cal.max_iters, "ml iteration budget")
      ->capture_default_str();
  calibrate->add_option("--theory", cal.theory_text,
                        "overlay the table of an ideal detector, eta,nbar");
  calibrate->add_option("--seed", cal.seed, "random seed (ml bootstrap)")
      ->capture_default_str();
  calibrate->add_option("--out", cal.out, "POVM JSON path")->required();
  calibrate->add_option("--format", cal.format,
                        "json, or svg to add per-outcome bar charts")
      ->check(CLI::IsMember({"json", "svg"}))
      ->capture_default_str();
  calibrate->add_option("--jobs", cal.jobs, "worker threads")
      ->capture_default_str();

  KernelTableArgs ker;
  CLI::App* kernel_table = app.add_subcommand(
      "kernel-table", "tabulate deconvolution kernels K_nm(x, phi) as CSV");
  kernel_table->add_option("--dim", ker.dim, "Fock truncation")->required();
  kernel_table->add_option("--eta", ker.eta, "detector efficiency")
      ->capture_default_str();
  kernel_table->add_option("--x", ker.x_text, "grid, lo:hi:count or v1,v2,...")
      ->capture_default_str();
  kernel_table->add_option("--phi", ker.phi_text,
                           "grid, lo:hi:count or v1,v2,...")
      ->capture_default_str();
  kernel_table->add_option("--out", ker.out, "CSV path")->required();
  kernel_table->add_option("--format", ker.format, "csv")
      ->check(CLI::IsMember({"csv"}))
      ->capture_default_str();
  kernel_table->add_option("--jobs", ker.jobs, "worker threads")
      ->capture_default_str();

  PlotArgs plot_args;
  CLI::App* plot = app.add_subcommand(
      "plot", "re-render an estimate or POVM JSON as SVG");
  plot->add_option("input", plot_args.input, "estimate or POVM JSON")
      ->required()
      ->check(CLI::ExistingFile);
  plot->add_option("--out", plot_args.out, "SVG path")->required();
  plot->add_option("--format", plot_args.format, "svg")
      ->check(CLI::IsMember({"svg"}))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
    if (app.got_subcommand(simulate)) run_simulate(sim);
    if (app.got_subcommand(reconstruct)) run_reconstruct(rec);
    if (app.got_subcommand(calibrate)) run_calibrate(cal);
    if (app.got_subcommand(kernel_table)) run_kernel_table(ker);
    if (app.got_subcommand(plot)) run_plot(plot_args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const NotConverged& e) {
    std::fprintf(stderr, "homtom: %s\n", e.what());
    return 3;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "homtom: %s\n", e.what());
    return 2;
  } catch (const IoError& e) {
    std::fprintf(stderr, "homtom: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "homtom: %s\n", e.what());
    return 1;
  }
  return 0;
}
