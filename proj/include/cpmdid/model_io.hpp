#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cpmdid/fit.hpp"

namespace cpmdid {

// Identifies the run that produced an output file: tool identity, a hash of
// the effective configuration, the seed, and, for artifacts derived from an
// input file, a hash of that file's bytes.
struct Provenance {
  std::string tool = "cpmdid";
  std::string version = "0.1.0";
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string input_hash;  // empty when no input file applies
};

// 64-bit FNV-1a over the given bytes, rendered as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);

// FNV-1a hash of a file's raw contents. Throws input_error when the file
// cannot be read.
std::string hash_file(const std::filesystem::path& path);

// A fitted model together with the metadata needed to reuse it: the
// covariate names it was trained against, the fit options, and provenance.
struct PersistedModel {
  FittedCPM fit;
  std::vector<std::string> covariate_names;
  FitOptions options;
  Provenance provenance;
};

// JSON round trip. save_model writes deterministically (sorted keys, shortest
// round-trip numbers) so identical fits produce byte-identical files;
// load_model validates the structural invariants (strictly increasing alphas,
// consistent sizes) and throws input_error on malformed files.
void save_model(const PersistedModel& model,
                const std::filesystem::path& path);
PersistedModel load_model(const std::filesystem::path& path);

}  // namespace cpmdid
