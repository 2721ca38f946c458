#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "homtom/averaging.hpp"
#include "homtom/calibration.hpp"
#include "homtom/maxlik.hpp"
#include "homtom/states.hpp"

namespace homtom {

// Quadrature sample files come in two interchangeable formats:
//   csv  header "phi,x", one event per row, full double precision
//   bin  8-byte magic "HOMTOM01" followed by raw little-endian float64
//        (phi, x) pairs
// read_samples sniffs the magic, so callers never state the format.
void write_samples_csv(const std::string& path,
                       std::span<const QuadratureSample> samples);
void write_samples_binary(const std::string& path,
                          std::span<const QuadratureSample> samples);
std::vector<QuadratureSample> read_samples(const std::string& path);

// Calibration records (photocount n plus the conditioned homodyne event)
// are CSV only, header "n,phi,x".
void write_joint_records_csv(const std::string& path,
                             std::span<const JointRecord> records);
std::vector<JointRecord> read_joint_records_csv(const std::string& path);

// Reconstruction result with enough metadata to re-render plots later.
// method is "avg" or "ml"; ml holds the optimizer report when method == "ml".
struct EstimateFile {
  DensityMatrixEstimate estimate;
  std::string method = "avg";
  std::optional<MlReport> ml;
};

void write_estimate_json(const std::string& path, const EstimateFile& file);
EstimateFile read_estimate_json(const std::string& path);

// Reconstructed diagonal POVM table.  config_json carries the resolved run
// parameters as a serialized JSON object (may be empty, meaning "{}").
struct PovmFile {
  DiagonalPOVM povm;
  std::string config_json;
};

void write_povm_json(const std::string& path, const PovmFile& file);
PovmFile read_povm_json(const std::string& path);

// Dense table of deconvolution kernel values K_nm(x, phi) for all
// 0 <= n, m < dim over the grid xs x phis; header "n,m,x,phi,eta,re,im".
void write_kernel_table_csv(const std::string& path, int dim, double eta,
                            std::span<const double> xs,
                            std::span<const double> phis);

// State description files select the source state for simulation:
//   {"kind": "vacuum"}
//   {"kind": "fock", "n": 2}
//   {"kind": "coherent", "alpha": 1.0}        (or "alpha": [re, im])
//   {"kind": "thermal", "nbar": 0.5}
//   {"kind": "density", "rho": [[[re, im], ...], ...]}
// An optional "dim" overrides the automatic Fock truncation.
StateModel read_state_json(const std::string& path);

// Small helpers shared by the CLI (sidecar configs, SVG output).
void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace homtom
