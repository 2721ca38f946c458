#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <complex>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "homtom/errors.hpp"
#include "homtom/io.hpp"
#include "homtom/kernels.hpp"
#include "homtom/states.hpp"
#include "homtom/svg.hpp"

#ifndef HOMTOM_CLI_PATH
#define HOMTOM_CLI_PATH ""
#endif

using namespace homtom;
using std::complex;
namespace fs = std::filesystem;

namespace {

fs::path scratch() {
  static const fs::path dir = [] {
    fs::path p = fs::temp_directory_path() /
                 ("homtom_test_" + std::to_string(::getpid()));
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

std::string path_in_scratch(const std::string& name) {
  return (scratch() / name).string();
}

struct CliRun {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

CliRun run_cli(const std::string& args, const std::string& env = "") {
  static int counter = 0;
  const std::string out = path_in_scratch("stdout" + std::to_string(counter));
  const std::string err = path_in_scratch("stderr" + std::to_string(counter));
  ++counter;
  std::string cmd;
  if (!env.empty()) cmd += env + " ";
  cmd += std::string(HOMTOM_CLI_PATH) + " " + args + " >" + out + " 2>" + err;
  const int status = std::system(cmd.c_str());
  CliRun r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

}  // namespace

TEST_CASE("sample files round trip in both formats") {
  std::vector<QuadratureSample> samples;
  for (int i = 0; i < 200; ++i) {
    samples.push_back({0.0157 * i, std::sin(0.7 * i) * 3.0 - 1.0});
  }
  samples.push_back({0.0, -0.0});
  samples.push_back({3.14159, 1e-300});

  const std::string csv = path_in_scratch("samples.csv");
  write_samples_csv(csv, samples);
  CHECK(read_text_file(csv).rfind("phi,x\n", 0) == 0);
  const auto from_csv = read_samples(csv);
  REQUIRE(from_csv.size() == samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    CHECK(from_csv[i].phi == samples[i].phi);
    CHECK(from_csv[i].x == samples[i].x);
  }

  const std::string bin = path_in_scratch("samples.bin");
  write_samples_binary(bin, samples);
  CHECK(slurp(bin).rfind("HOMTOM01", 0) == 0);
  const auto from_bin = read_samples(bin);
  REQUIRE(from_bin.size() == samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    CHECK(from_bin[i].phi == samples[i].phi);
    CHECK(from_bin[i].x == samples[i].x);
  }
}

TEST_CASE("sample file error paths") {
  CHECK_THROWS_AS(read_samples(path_in_scratch("absent.csv")), IoError);

  const std::string truncated = path_in_scratch("truncated.bin");
  write_text_file(truncated, "HOMTOM01abc");
  CHECK_THROWS_AS(read_samples(truncated), IoError);

  const std::string bad = path_in_scratch("bad.csv");
  write_text_file(bad, "phi,x\n0.5,1.0\nnonsense\n");
  CHECK_THROWS_AS(read_samples(bad), IoError);

  const std::string blank = path_in_scratch("blank.csv");
  write_text_file(blank, "phi,x\n\n0.5,1.0\n\n");
  CHECK(read_samples(blank).size() == 1);
}

TEST_CASE("joint record files round trip") {
  std::vector<JointRecord> records;
  for (int i = 0; i < 150; ++i) {
    records.push_back({i % 7, 0.02 * i, std::cos(1.1 * i) * 2.5});
  }
  const std::string path = path_in_scratch("joint.csv");
  write_joint_records_csv(path, records);
  CHECK(read_text_file(path).rfind("n,phi,x\n", 0) == 0);
  const auto back = read_joint_records_csv(path);
  REQUIRE(back.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(back[i].n == records[i].n);
    CHECK(back[i].phi == records[i].phi);
    CHECK(back[i].x == records[i].x);
  }

  const std::string neg = path_in_scratch("neg.csv");
  write_text_file(neg, "n,phi,x\n-3,0.5,1.0\n");
  CHECK_THROWS_AS(read_joint_records_csv(neg), IoError);
  const std::string junk = path_in_scratch("junk.csv");
  write_text_file(junk, "n,phi,x\n1,0.5\n");
  CHECK_THROWS_AS(read_joint_records_csv(junk), IoError);
}

TEST_CASE("estimate files round trip") {
  EstimateFile file;
  file.method = "ml";
  file.estimate.rho.resize(2, 2);
  file.estimate.rho << complex<double>(0.75, 0.0), complex<double>(0.1, -0.2),
      complex<double>(0.1, 0.2), complex<double>(0.25, 0.0);
  file.estimate.err.resize(2, 2);
  file.estimate.err << 0.01, 0.02, 0.02, 0.03;
  file.estimate.eta = 0.85;
  file.estimate.sample_count = 4321;
  file.estimate.hermitized = true;
  file.estimate.diagnostics.block_count = 40;
  file.estimate.diagnostics.chi2_pvalue = 0.37;
  MlReport ml;
  ml.iterations = 123;
  ml.loglik = -456.75;
  ml.stationarity_residual = 3.2e-8;
  ml.converged = true;
  ml.truncation = 2;
  ml.loglik_trace = {-500.0, -456.75};
  file.ml = ml;

  const std::string path = path_in_scratch("estimate.json");
  write_estimate_json(path, file);
  const auto back = read_estimate_json(path);
  CHECK(back.method == "ml");
  CHECK((back.estimate.rho - file.estimate.rho).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.estimate.err - file.estimate.err).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.estimate.eta == 0.85);
  CHECK(back.estimate.sample_count == 4321);
  CHECK(back.estimate.hermitized);
  CHECK(!back.estimate.clipped);
  CHECK(back.estimate.diagnostics.chi2_pvalue == 0.37);
  CHECK(back.estimate.diagnostics.block_count == 40);
  REQUIRE(back.ml.has_value());
  CHECK(back.ml->iterations == 123);
  CHECK(back.ml->loglik == -456.75);
  CHECK(back.ml->converged);
  CHECK(back.ml->truncation == 2);

  // an unset p-value crosses the file as null and comes back as NaN
  file.ml.reset();
  file.method = "avg";
  file.estimate.diagnostics.chi2_pvalue =
      std::numeric_limits<double>::quiet_NaN();
  write_estimate_json(path, file);
  const auto avg = read_estimate_json(path);
  CHECK(avg.method == "avg");
  CHECK(!avg.ml.has_value());
  CHECK(std::isnan(avg.estimate.diagnostics.chi2_pvalue));
}

TEST_CASE("estimate file error paths") {
  const std::string path = path_in_scratch("bad_estimate.json");
  write_text_file(path, "{\"rho\": 3}");
  CHECK_THROWS_AS(read_estimate_json(path), IoError);
  write_text_file(path, "not json at all");
  CHECK_THROWS_AS(read_estimate_json(path), IoError);
  write_text_file(path,
                  R"({"dim": 3, "eta": 1.0, "N": 10, "method": "avg",
                      "rho": [[[1.0, 0.0]]], "err": [[0.0]]})");
  CHECK_THROWS_AS(read_estimate_json(path), IoError);
}

TEST_CASE("POVM files round trip") {
  PovmFile file;
  file.povm.n_max = 1;
  file.povm.dim = 3;
  file.povm.method = "ml";
  file.povm.p.resize(2, 3);
  file.povm.p << 0.9, 0.2, 0.05, 0.1, 0.7, 0.2;
  file.povm.err = Eigen::MatrixXd::Constant(2, 3, 0.01);
  file.povm.overflow = Eigen::Vector3d(0.0, 0.1, 0.75);
  file.povm.overflow_err = Eigen::Vector3d(0.001, 0.002, 0.003);
  file.config_json = R"({"xi": 0.88, "bootstrap": 50})";

  const std::string path = path_in_scratch("povm.json");
  write_povm_json(path, file);
  const auto back = read_povm_json(path);
  CHECK(back.povm.n_max == 1);
  CHECK(back.povm.dim == 3);
  CHECK(back.povm.method == "ml");
  CHECK((back.povm.p - file.povm.p).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.povm.err - file.povm.err).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(back.povm.overflow.has_value());
  CHECK((*back.povm.overflow - *file.povm.overflow).cwiseAbs().maxCoeff() ==
        0.0);
  REQUIRE(back.povm.overflow_err.has_value());
  CHECK(back.config_json.find("0.88") != std::string::npos);

  file.povm.overflow.reset();
  file.povm.overflow_err.reset();
  file.config_json.clear();
  write_povm_json(path, file);
  const auto plain = read_povm_json(path);
  CHECK(!plain.povm.overflow.has_value());
  CHECK(!plain.povm.overflow_err.has_value());
  CHECK(plain.config_json == "{}");

  write_text_file(path, "{\"n_max\": 1}");
  CHECK_THROWS_AS(read_povm_json(path), IoError);
  PovmFile invalid = file;
  invalid.config_json = "{broken";
  CHECK_THROWS_AS(write_povm_json(path, invalid), IoError);
}

TEST_CASE("kernel tables are plain CSV of kernel values") {
  const std::string path = path_in_scratch("kernels.csv");
  const std::vector<double> xs{0.0, 0.5};
  const std::vector<double> phis{0.3};
  write_kernel_table_csv(path, 2, 0.9, xs, phis);
  const std::string text = read_text_file(path);
  CHECK(text.rfind("n,m,x,phi,eta,re,im\n", 0) == 0);
  // header plus dim^2 rows per grid point
  std::size_t lines = 0;
  for (char c : text) lines += c == '\n';
  CHECK(lines == 1 + 4 * xs.size() * phis.size());

  // spot check one row against the evaluator
  const auto k = kernel_fock(0, 1, 0.5, 0.3, 0.9);
  std::istringstream in(text);
  std::string line;
  bool found = false;
  while (std::getline(in, line)) {
    if (line.rfind("0,1,0.5,", 0) == 0) {
      const auto tail = line.substr(line.rfind(",0.9,") + 5);
      const auto comma = tail.find(',');
      CHECK(std::stod(tail.substr(0, comma)) ==
            doctest::Approx(k.real()).epsilon(1e-15));
      CHECK(std::stod(tail.substr(comma + 1)) ==
            doctest::Approx(k.imag()).epsilon(1e-15));
      found = true;
    }
  }
  CHECK(found);

  CHECK_THROWS_AS(write_kernel_table_csv(path, 0, 0.9, xs, phis), DomainError);
  CHECK_THROWS_AS(write_kernel_table_csv(path, 2, 0.9, {}, phis), DomainError);
}

TEST_CASE("state description files") {
  const std::string path = path_in_scratch("state.json");

  write_text_file(path, R"({"kind": "vacuum"})");
  CHECK(read_state_json(path).expand().elements()(0, 0).real() ==
        doctest::Approx(1.0));

  write_text_file(path, R"({"kind": "fock", "n": 2})");
  CHECK(read_state_json(path).expand().elements()(2, 2).real() ==
        doctest::Approx(1.0));

  write_text_file(path, R"({"kind": "coherent", "alpha": 1.0})");
  const auto coh = read_state_json(path).expand().elements();
  CHECK(coh(0, 0).real() == doctest::Approx(std::exp(-1.0)).epsilon(1e-9));

  write_text_file(path, R"({"kind": "coherent", "alpha": [0.0, 1.0]})");
  const auto rot = read_state_json(path).expand().elements();
  CHECK(rot(0, 0).real() == doctest::Approx(std::exp(-1.0)).epsilon(1e-9));
  // rho_01 = exp(-|alpha|^2) conj(alpha) for a coherent state
  CHECK(std::abs(rot(0, 1) - complex<double>(0.0, -std::exp(-1.0))) <= 1e-9);

  write_text_file(path, R"({"kind": "thermal", "nbar": 0.5, "dim": 30})");
  const auto th = read_state_json(path);
  CHECK(th.truncation() == 30);
  CHECK(th.expand().elements()(0, 0).real() ==
        doctest::Approx(2.0 / 3.0).epsilon(1e-9));

  write_text_file(path, R"({"kind": "density",
    "rho": [[[0.5, 0.0], [0.0, -0.5]], [[0.0, 0.5], [0.5, 0.0]]]})");
  const auto rho = read_state_json(path).expand().elements();
  CHECK(rho(0, 1) == complex<double>(0.0, -0.5));
  CHECK(rho(1, 0) == complex<double>(0.0, 0.5));

  write_text_file(path, R"({"kind": "squeezed"})");
  CHECK_THROWS_AS(read_state_json(path), IoError);
  write_text_file(path, "[1, 2, 3]");
  CHECK_THROWS_AS(read_state_json(path), IoError);
  write_text_file(path, "{{{");
  CHECK_THROWS_AS(read_state_json(path), IoError);
}

TEST_CASE("bar charts render as standalone SVG") {
  BarChartSpec spec;
  spec.title = "diagonal of rho";
  spec.x_label = "n";
  spec.y_label = "p";
  spec.categories = {"0", "1", "2"};
  spec.values = {0.6, 0.3, 0.1};
  spec.errors = {0.01, 0.01, 0.005};
  spec.overlay = {0.58, 0.31, 0.11};
  const std::string svg = render_bar_chart(spec);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("diagonal of rho") != std::string::npos);
  CHECK(svg.find("stroke-dasharray") != std::string::npos);
  CHECK(svg == render_bar_chart(spec));

  BarChartSpec second = spec;
  second.title = "outcome 1";
  const std::string grid = render_panel_grid({spec, second}, 2);
  CHECK(grid.find("diagonal of rho") != std::string::npos);
  CHECK(grid.find("outcome 1") != std::string::npos);

  BarChartSpec empty;
  CHECK_THROWS_AS(render_bar_chart(empty), DomainError);
  CHECK_THROWS_AS(render_panel_grid({}, 2), DomainError);
  spec.errors = {0.01};
  CHECK_THROWS_AS(render_bar_chart(spec), DomainError);
}

TEST_CASE("cli basics") {
  REQUIRE(fs::exists(HOMTOM_CLI_PATH));
  CHECK(run_cli("--version").code == 0);
  CHECK(run_cli("--version").out.find("1.0.0") != std::string::npos);
  CHECK(run_cli("--help").code == 0);
  CHECK(run_cli("").code == 2);
  CHECK(run_cli("simulate --no-such-flag").code == 2);
  CHECK(run_cli("frobnicate").code == 2);
}

TEST_CASE("cli simulate is deterministic and format-agnostic") {
  const std::string state = path_in_scratch("vac.json");
  write_text_file(state, R"({"kind": "vacuum"})");
  const std::string out1 = path_in_scratch("sim1.csv");
  const std::string out2 = path_in_scratch("sim2.csv");

  CHECK(run_cli("simulate --state " + state + " --n 500 --seed 4 --out " +
                out1).code == 0);
  CHECK(run_cli("simulate --state " + state + " --n 500 --seed 4 --out " +
                out2).code == 0);
  CHECK(slurp(out1) == slurp(out2));
  CHECK(slurp(out1 + ".run.json") == slurp(out2 + ".run.json"));

  const std::string out3 = path_in_scratch("sim3.csv");
  CHECK(run_cli("simulate --state " + state + " --n 500 --seed 5 --out " +
                out3).code == 0);
  CHECK(slurp(out1) != slurp(out3));

  const std::string jobs3 = path_in_scratch("sim_jobs3.csv");
  CHECK(run_cli("simulate --state " + state +
                " --n 500 --seed 4 --jobs 3 --out " + jobs3).code == 0);
  CHECK(slurp(out1) == slurp(jobs3));

  const std::string bin = path_in_scratch("sim1.bin");
  CHECK(run_cli("simulate --state " + state +
                " --n 500 --seed 4 --format bin --out " + bin).code == 0);
  const auto csv_samples = read_samples(out1);
  const auto bin_samples = read_samples(bin);
  REQUIRE(csv_samples.size() == bin_samples.size());
  for (std::size_t i = 0; i < csv_samples.size(); ++i) {
    CHECK(csv_samples[i].phi == bin_samples[i].phi);
    CHECK(csv_samples[i].x == bin_samples[i].x);
  }

  // the sidecar restates the resolved configuration
  const std::string sidecar = slurp(out1 + ".run.json");
  CHECK(sidecar.find("\"seed\": 4") != std::string::npos);
  CHECK(sidecar.find("\"version\"") != std::string::npos);
}

TEST_CASE("cli reconstruct in both methods") {
  const std::string state = path_in_scratch("coh.json");
  write_text_file(state, R"({"kind": "coherent", "alpha": 0.5})");
  const std::string samples = path_in_scratch("rec_in.csv");
  REQUIRE(run_cli("simulate --state " + state + " --eta 0.9 --n 4000 "
                  "--seed 8 --out " + samples).code == 0);

  const std::string avg_out = path_in_scratch("rec_avg.json");
  CHECK(run_cli("reconstruct " + samples + " --dim 3 --eta 0.9 --out " +
                avg_out).code == 0);
  const auto avg = read_estimate_json(avg_out);
  CHECK(avg.method == "avg");
  CHECK(avg.estimate.rho.rows() == 3);
  CHECK(std::abs(avg.estimate.rho(0, 0).real() - std::exp(-0.25)) < 0.1);
  CHECK(!avg.ml.has_value());
  CHECK(fs::exists(avg_out + ".run.json"));

  const std::string ml_out = path_in_scratch("rec_ml.json");
  CHECK(run_cli("reconstruct " + samples + " --method ml --dim 3 --eta 0.9 "
                "--out " + ml_out).code == 0);
  const auto ml = read_estimate_json(ml_out);
  CHECK(ml.method == "ml");
  REQUIRE(ml.ml.has_value());
  CHECK(ml.ml->converged);
  CHECK(std::abs(ml.estimate.rho(0, 0).real() - std::exp(-0.25)) < 0.1);

  // adaptive averaging runs; bootstrap belongs to ml only
  const std::string ad_out = path_in_scratch("rec_ad.json");
  CHECK(run_cli("reconstruct " + samples + " --dim 2 --eta 0.9 --adaptive "
                "--out " + ad_out).code == 0);
  CHECK(read_estimate_json(ad_out).method == "avg");

  // jobs count must not change the result
  const std::string jobs_out = path_in_scratch("rec_avg_jobs.json");
  CHECK(run_cli("reconstruct " + samples + " --dim 3 --eta 0.9 --jobs 3 "
                "--out " + jobs_out).code == 0);
  const auto jobs = read_estimate_json(jobs_out);
  CHECK((jobs.estimate.rho - avg.estimate.rho).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("cli exit codes follow the error taxonomy") {
  const std::string state = path_in_scratch("vac2.json");
  write_text_file(state, R"({"kind": "vacuum"})");
  const std::string samples = path_in_scratch("codes_in.csv");
  REQUIRE(run_cli("simulate --state " + state + " --n 300 --seed 2 --out " +
                  samples).code == 0);
  const std::string out = path_in_scratch("codes_out.json");

  // validation problems exit 2
  CHECK(run_cli("reconstruct " + samples + " --dim 3 --eta 0.45 --out " +
                out).code == 2);
  CHECK(run_cli("reconstruct " + samples + " --method avg --bootstrap 50 "
                "--dim 3 --out " + out).code == 2);
  CHECK(run_cli("reconstruct " + samples + " --method ml --adaptive "
                "--dim 3 --out " + out).code == 2);
  CHECK(run_cli("reconstruct " + samples + " --method avg --out " + out)
            .code == 2);

  // an exhausted iteration budget exits 3
  CHECK(run_cli("reconstruct " + samples + " --method ml --dim 3 "
                "--max-iters 1 --out " + out).code == 3);

  // unreadable input exits 4
  CHECK(run_cli("reconstruct " + path_in_scratch("nowhere.csv") +
                " --dim 3 --out " + out).code == 4);
  CHECK(run_cli("plot " + path_in_scratch("nowhere.json") + " --out " +
                path_in_scratch("nowhere.svg")).code == 4);
}

TEST_CASE("cli calibrate in both methods") {
  const std::string joint = path_in_scratch("cal_in.csv");
  REQUIRE(run_cli("simulate --xi 0.5 --eta 0.8 --nbar 0.5 --eta-h 0.9 "
                  "--n 3000 --seed 6 --out " + joint).code == 0);
  CHECK(read_text_file(joint).rfind("n,phi,x\n", 0) == 0);

  const std::string avg_out = path_in_scratch("cal_avg.json");
  CHECK(run_cli("calibrate " + joint + " --xi 0.5 --eta-h 0.9 --dim 4 "
                "--n-max 2 --out " + avg_out).code == 0);
  const auto avg = read_povm_json(avg_out);
  CHECK(avg.povm.method == "averaging");
  CHECK(avg.povm.n_max == 2);
  CHECK(avg.povm.dim == 4);
  CHECK(avg.config_json.find("0.5") != std::string::npos);

  const std::string ml_out = path_in_scratch("cal_ml.json");
  CHECK(run_cli("calibrate " + joint + " --xi 0.5 --eta-h 0.9 --dim 4 "
                "--n-max 2 --method ml --bootstrap 0 --out " + ml_out)
            .code == 0);
  const auto ml = read_povm_json(ml_out);
  CHECK(ml.povm.method == "ml");
  CHECK(ml.povm.overflow.has_value());

  // iteration budget exhaustion exits 3 here as well
  CHECK(run_cli("calibrate " + joint + " --xi 0.5 --eta-h 0.9 --dim 4 "
                "--n-max 2 --method ml --bootstrap 0 --max-iters 1 --out " +
                ml_out).code == 3);

  // per-outcome charts with a theory overlay
  const std::string svg_out = path_in_scratch("cal_svg.json");
  CHECK(run_cli("calibrate " + joint + " --xi 0.5 --eta-h 0.9 --dim 4 "
                "--n-max 2 --theory 0.8,0.5 --format svg --out " + svg_out)
            .code == 0);
  const std::string svg = slurp(path_in_scratch("cal_svg.svg"));
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("stroke-dasharray") != std::string::npos);
}

TEST_CASE("cli kernel table matches the library writer") {
  const std::string cli_out = path_in_scratch("ktab_cli.csv");
  CHECK(run_cli("kernel-table --dim 2 --eta 0.9 --x 0:1:3 --phi 0,0.5 "
                "--out " + cli_out).code == 0);
  const std::string lib_out = path_in_scratch("ktab_lib.csv");
  const std::vector<double> xs{0.0, 0.5, 1.0};
  const std::vector<double> phis{0.0, 0.5};
  write_kernel_table_csv(lib_out, 2, 0.9, xs, phis);
  CHECK(slurp(cli_out) == slurp(lib_out));
}

TEST_CASE("cli plot reproduces render output from data files") {
  const std::string state = path_in_scratch("vac3.json");
  write_text_file(state, R"({"kind": "vacuum"})");
  const std::string samples = path_in_scratch("plot_in.csv");
  REQUIRE(run_cli("simulate --state " + state + " --n 2000 --seed 9 --out " +
                  samples).code == 0);
  const std::string est = path_in_scratch("plot_est.json");
  REQUIRE(run_cli("reconstruct " + samples + " --dim 3 --format svg --out " +
                  est).code == 0);
  const std::string sibling = path_in_scratch("plot_est.svg");
  REQUIRE(fs::exists(sibling));

  const std::string replot = path_in_scratch("replot.svg");
  CHECK(run_cli("plot " + est + " --out " + replot).code == 0);
  CHECK(slurp(replot) == slurp(sibling));

  const std::string junk = path_in_scratch("junk_plot.json");
  write_text_file(junk, R"({"neither": "estimate nor povm"})");
  CHECK(run_cli("plot " + junk + " --out " + replot).code == 4);
}

TEST_CASE("cli logging responds to the environment") {
  const std::string state = path_in_scratch("vac4.json");
  write_text_file(state, R"({"kind": "vacuum"})");
  const std::string out = path_in_scratch("log_sim.csv");

  const auto quiet = run_cli("simulate --state " + state +
                             " --n 100 --seed 1 --out " + out);
  CHECK(quiet.code == 0);
  CHECK(quiet.err.empty());

  const auto chatty = run_cli("simulate --state " + state +
                              " --n 100 --seed 1 --out " + out,
                              "HOMTOM_LOG=debug");
  CHECK(chatty.code == 0);
  CHECK(!chatty.err.empty());

  const auto silent = run_cli("simulate --state " + state +
                              " --n 100 --seed 1 --out " + out,
                              "HOMTOM_LOG=error");
  CHECK(silent.code == 0);
  CHECK(silent.err.empty());
}
