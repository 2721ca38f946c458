#include "homtom/io.hpp"

#include <cerrno>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "homtom/errors.hpp"
#include "homtom/kernels.hpp"

namespace homtom {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'H', 'O', 'M', 'T', 'O', 'M', '0', '1'};

std::ofstream open_output(const std::string& path, bool binary) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) {
    throw IoError("cannot open '" + path + "' for writing: " +
                  std::strerror(errno));
  }
  return out;
}

std::ifstream open_input(const std::string& path, bool binary) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) {
    throw IoError("cannot open '" + path + "' for reading: " +
                  std::strerror(errno));
  }
  return in;
}

void finish_output(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw IoError("write to '" + path + "' failed");
}

// %.17g prints the shortest decimal that still round-trips a double.
std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

bool parse_double(const std::string& field, double* out) {
  const char* begin = field.c_str();
  char* end = nullptr;
  errno = 0;
  *out = std::strtod(begin, &end);
  if (end == begin || errno == ERANGE) return false;
  while (*end == ' ' || *end == '\t' || *end == '\r') ++end;
  return *end == '\0';
}

bool parse_int(const std::string& field, long* out) {
  const char* begin = field.c_str();
  char* end = nullptr;
  errno = 0;
  *out = std::strtol(begin, &end, 10);
  if (end == begin || errno == ERANGE) return false;
  while (*end == ' ' || *end == '\t' || *end == '\r') ++end;
  return *end == '\0';
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

std::string strip_eol(std::string line) {
  while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) {
    line.pop_back();
  }
  return line;
}

json matrix_to_json(const Eigen::MatrixXcd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      row.push_back(json::array({m(i, j).real(), m(i, j).imag()}));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXcd complex_matrix_from_json(const json& rows,
                                          const std::string& what) {
  if (!rows.is_array() || rows.empty()) {
    throw IoError(what + ": expected a non-empty array of rows");
  }
  const Eigen::Index nrows = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index ncols = static_cast<Eigen::Index>(rows[0].size());
  Eigen::MatrixXcd m(nrows, ncols);
  for (Eigen::Index i = 0; i < nrows; ++i) {
    const json& row = rows[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != ncols) {
      throw IoError(what + ": ragged rows");
    }
    for (Eigen::Index j = 0; j < ncols; ++j) {
      const json& cell = row[static_cast<std::size_t>(j)];
      if (!cell.is_array() || cell.size() != 2) {
        throw IoError(what + ": each entry must be an [re, im] pair");
      }
      m(i, j) = std::complex<double>(cell[0].get<double>(),
                                     cell[1].get<double>());
    }
  }
  return m;
}

Eigen::MatrixXd real_matrix_from_json(const json& rows,
                                      const std::string& what) {
  if (!rows.is_array() || rows.empty()) {
    throw IoError(what + ": expected a non-empty array of rows");
  }
  const Eigen::Index nrows = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index ncols = static_cast<Eigen::Index>(rows[0].size());
  Eigen::MatrixXd m(nrows, ncols);
  for (Eigen::Index i = 0; i < nrows; ++i) {
    const json& row = rows[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != ncols) {
      throw IoError(what + ": ragged rows");
    }
    for (Eigen::Index j = 0; j < ncols; ++j) {
      m(i, j) = row[static_cast<std::size_t>(j)].get<double>();
    }
  }
  return m;
}

json parse_json_file(const std::string& path) {
  std::ifstream in = open_input(path, false);
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw IoError("'" + path + "' is not valid JSON: " + e.what());
  }
  return doc;
}

}  // namespace

void write_samples_csv(const std::string& path,
                       std::span<const QuadratureSample> samples) {
  std::ofstream out = open_output(path, false);
  out << "phi,x\n";
  for (const QuadratureSample& s : samples) {
    out << format_double(s.phi) << ',' << format_double(s.x) << '\n';
  }
  finish_output(out, path);
}

void write_samples_binary(const std::string& path,
                          std::span<const QuadratureSample> samples) {
  static_assert(sizeof(QuadratureSample) == 2 * sizeof(double));
  std::ofstream out = open_output(path, true);
  out.write(kMagic, sizeof(kMagic));
  out.write(reinterpret_cast<const char*>(samples.data()),
            static_cast<std::streamsize>(samples.size() * sizeof(QuadratureSample)));
  finish_output(out, path);
}

std::vector<QuadratureSample> read_samples(const std::string& path) {
  std::ifstream in = open_input(path, true);
  char head[8] = {};
  in.read(head, sizeof(head));
  const bool is_binary =
      in.gcount() == sizeof(head) && std::memcmp(head, kMagic, sizeof(kMagic)) == 0;

  std::vector<QuadratureSample> samples;
  if (is_binary) {
    in.seekg(0, std::ios::end);
    const std::int64_t size = static_cast<std::int64_t>(in.tellg());
    const std::int64_t payload = size - static_cast<std::int64_t>(sizeof(kMagic));
    if (payload < 0 || payload % static_cast<std::int64_t>(sizeof(QuadratureSample)) != 0) {
      throw IoError("'" + path + "' is truncated: payload of " +
                    std::to_string(payload) + " bytes is not a whole number of (phi, x) pairs");
    }
    in.seekg(sizeof(kMagic), std::ios::beg);
    samples.resize(static_cast<std::size_t>(payload) / sizeof(QuadratureSample));
    in.read(reinterpret_cast<char*>(samples.data()), payload);
    if (in.gcount() != payload) throw IoError("short read from '" + path + "'");
    return samples;
  }

  in.seekg(0, std::ios::beg);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_eol(line);
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_fields(line);
    QuadratureSample s{};
    if (fields.size() != 2 || !parse_double(fields[0], &s.phi) ||
        !parse_double(fields[1], &s.x)) {
      if (lineno == 1) continue;  // header row
      throw IoError("'" + path + "' line " + std::to_string(lineno) +
                    ": expected 'phi,x'");
    }
    samples.push_back(s);
  }
  return samples;
}

void write_joint_records_csv(const std::string& path,
                             std::span<const JointRecord> records) {
  std::ofstream out = open_output(path, false);
  out << "n,phi,x\n";
  for (const JointRecord& r : records) {
    out << r.n << ',' << format_double(r.phi) << ',' << format_double(r.x)
        << '\n';
  }
  finish_output(out, path);
}

std::vector<JointRecord> read_joint_records_csv(const std::string& path) {
  std::ifstream in = open_input(path, false);
  std::vector<JointRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_eol(line);
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_fields(line);
    JointRecord r{};
    long n = 0;
    if (fields.size() != 3 || !parse_int(fields[0], &n) ||
        !parse_double(fields[1], &r.phi) || !parse_double(fields[2], &r.x)) {
      if (lineno == 1) continue;  // header row
      throw IoError("'" + path + "' line " + std::to_string(lineno) +
                    ": expected 'n,phi,x'");
    }
    if (n < 0) {
      throw IoError("'" + path + "' line " + std::to_string(lineno) +
                    ": negative photocount");
    }
    r.n = static_cast<int>(n);
    records.push_back(r);
  }
  return records;
}

void write_estimate_json(const std::string& path, const EstimateFile& file) {
  const DensityMatrixEstimate& est = file.estimate;
  json doc;
  doc["dim"] = est.rho.rows();
  doc["eta"] = est.eta;
  doc["N"] = est.sample_count;
  doc["method"] = file.method;
  doc["rho"] = matrix_to_json(est.rho);
  doc["err"] = matrix_to_json(est.err);
  doc["hermitized"] = est.hermitized;
  doc["clipped"] = est.clipped;
  json diag;
  if (std::isfinite(est.diagnostics.chi2_pvalue)) {
    diag["chi2_pvalue"] = est.diagnostics.chi2_pvalue;
  } else {
    diag["chi2_pvalue"] = nullptr;
  }
  diag["block_count"] = est.diagnostics.block_count;
  doc["diagnostics"] = std::move(diag);
  if (file.ml) {
    doc["loglik"] = file.ml->loglik;
    doc["iterations"] = file.ml->iterations;
    doc["stationarity_residual"] = file.ml->stationarity_residual;
    doc["converged"] = file.ml->converged;
    doc["truncation"] = file.ml->truncation;
  }
  std::ofstream out = open_output(path, false);
  out << doc.dump(2) << '\n';
  finish_output(out, path);
}

EstimateFile read_estimate_json(const std::string& path) {
  const json doc = parse_json_file(path);
  EstimateFile file;
  try {
    file.estimate.rho = complex_matrix_from_json(doc.at("rho"), "rho");
    file.estimate.err = real_matrix_from_json(doc.at("err"), "err");
    file.estimate.eta = doc.at("eta").get<double>();
    file.estimate.sample_count = doc.at("N").get<std::size_t>();
    file.method = doc.at("method").get<std::string>();
    file.estimate.hermitized = doc.value("hermitized", false);
    file.estimate.clipped = doc.value("clipped", false);
    if (doc.contains("diagnostics")) {
      const json& diag = doc["diagnostics"];
      const json& pv = diag.at("chi2_pvalue");
      file.estimate.diagnostics.chi2_pvalue =
          pv.is_null() ? std::numeric_limits<double>::quiet_NaN()
                       : pv.get<double>();
      file.estimate.diagnostics.block_count = diag.value("block_count", 0);
    }
    if (doc.contains("loglik")) {
      MlReport ml;
      ml.loglik = doc.at("loglik").get<double>();
      ml.iterations = doc.at("iterations").get<std::size_t>();
      ml.stationarity_residual = doc.at("stationarity_residual").get<double>();
      ml.converged = doc.at("converged").get<bool>();
      ml.truncation = doc.value("truncation", static_cast<int>(file.estimate.rho.rows()));
      file.ml = std::move(ml);
    }
  } catch (const json::exception& e) {
    throw IoError("'" + path + "' is not an estimate file: " + e.what());
  }
  const Eigen::Index d = file.estimate.rho.rows();
  if (file.estimate.rho.cols() != d || file.estimate.err.rows() != d ||
      file.estimate.err.cols() != d) {
    throw IoError("'" + path + "': rho and err must be square and congruent");
  }
  if (doc.contains("dim") && doc["dim"].get<Eigen::Index>() != d) {
    throw IoError("'" + path + "': dim field disagrees with the rho payload");
  }
  return file;
}

void write_povm_json(const std::string& path, const PovmFile& file) {
  const DiagonalPOVM& povm = file.povm;
  json doc;
  doc["n_max"] = povm.n_max;
  doc["dim"] = povm.dim;
  doc["method"] = povm.method;
  doc["P"] = matrix_to_json(povm.p);
  doc["err"] = matrix_to_json(povm.err);
  if (povm.overflow) {
    json row = json::array();
    for (Eigen::Index m = 0; m < povm.overflow->size(); ++m) {
      row.push_back((*povm.overflow)(m));
    }
    doc["overflow"] = std::move(row);
  }
  if (povm.overflow_err) {
    json row = json::array();
    for (Eigen::Index m = 0; m < povm.overflow_err->size(); ++m) {
      row.push_back((*povm.overflow_err)(m));
    }
    doc["overflow_err"] = std::move(row);
  }
  if (file.config_json.empty()) {
    doc["config"] = json::object();
  } else {
    try {
      doc["config"] = json::parse(file.config_json);
    } catch (const json::parse_error& e) {
      throw IoError(std::string("config_json is not valid JSON: ") + e.what());
    }
  }
  std::ofstream out = open_output(path, false);
  out << doc.dump(2) << '\n';
  finish_output(out, path);
}

PovmFile read_povm_json(const std::string& path) {
  const json doc = parse_json_file(path);
  PovmFile file;
  try {
    file.povm.n_max = doc.at("n_max").get<int>();
    file.povm.dim = doc.at("dim").get<int>();
    file.povm.method = doc.at("method").get<std::string>();
    file.povm.p = real_matrix_from_json(doc.at("P"), "P");
    file.povm.err = real_matrix_from_json(doc.at("err"), "err");
    if (doc.contains("overflow") && !doc["overflow"].is_null()) {
      const json& row = doc["overflow"];
      Eigen::VectorXd v(row.size());
      for (std::size_t m = 0; m < row.size(); ++m) v(static_cast<Eigen::Index>(m)) = row[m].get<double>();
      file.povm.overflow = std::move(v);
    }
    if (doc.contains("overflow_err") && !doc["overflow_err"].is_null()) {
      const json& row = doc["overflow_err"];
      Eigen::VectorXd v(row.size());
      for (std::size_t m = 0; m < row.size(); ++m) v(static_cast<Eigen::Index>(m)) = row[m].get<double>();
      file.povm.overflow_err = std::move(v);
    }
    if (doc.contains("config")) file.config_json = doc["config"].dump();
  } catch (const json::exception& e) {
    throw IoError("'" + path + "' is not a POVM file: " + e.what());
  }
  if (file.povm.p.rows() != file.povm.n_max + 1 ||
      file.povm.p.cols() != file.povm.dim ||
      file.povm.err.rows() != file.povm.p.rows() ||
      file.povm.err.cols() != file.povm.p.cols()) {
    throw IoError("'" + path + "': P/err shape disagrees with n_max and dim");
  }
  return file;
}

void write_kernel_table_csv(const std::string& path, int dim, double eta,
                            std::span<const double> xs,
                            std::span<const double> phis) {
  if (dim < 1) throw DomainError("kernel table needs dim >= 1");
  if (xs.empty() || phis.empty()) {
    throw DomainError("kernel table needs at least one x and one phi");
  }
  const KernelBank bank(dim, eta);
  std::ofstream out = open_output(path, false);
  out << "n,m,x,phi,eta,re,im\n";
  char buf[64];
  Eigen::MatrixXcd k;
  for (const double x : xs) {
    for (const double phi : phis) {
      bank.evaluate(x, phi, k);
      for (int n = 0; n < dim; ++n) {
        for (int m = 0; m < dim; ++m) {
          out << n << ',' << m << ',';
          std::snprintf(buf, sizeof(buf), "%.12g,%.12g,%.12g,", x, phi, eta);
          out << buf;
          std::snprintf(buf, sizeof(buf), "%.12g,%.12g\n", k(n, m).real(),
                        k(n, m).imag());
          out << buf;
        }
      }
    }
  }
  finish_output(out, path);
}

StateModel read_state_json(const std::string& path) {
  const json doc = parse_json_file(path);
  try {
    const auto kind = doc.at("kind").get<std::string>();
    const int dim = doc.value("dim", 0);
    if (kind == "vacuum") return StateModel::vacuum();
    if (kind == "fock") return StateModel::fock(doc.at("n").get<int>(), dim);
    if (kind == "coherent") {
      const json& a = doc.at("alpha");
      std::complex<double> alpha;
      if (a.is_array()) {
        if (a.size() != 2) {
          throw IoError("'" + path + "': alpha must be a number or [re, im]");
        }
        alpha = {a[0].get<double>(), a[1].get<double>()};
      } else {
        alpha = a.get<double>();
      }
      return StateModel::coherent(alpha, dim);
    }
    if (kind == "thermal") {
      return StateModel::thermal(doc.at("nbar").get<double>(), dim);
    }
    if (kind == "density") {
      return StateModel::density_matrix(
          FockDensityMatrix(complex_matrix_from_json(doc.at("rho"), "rho")));
    }
    throw IoError("'" + path + "': unknown state kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw IoError("'" + path + "' is not a state file: " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out = open_output(path, true);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  finish_output(out, path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in = open_input(path, true);
  std::ostringstream buf;
  buf << in.rdbuf();
  if (!in && !in.eof()) throw IoError("read from '" + path + "' failed");
  return buf.str();
}

}  // namespace homtom
