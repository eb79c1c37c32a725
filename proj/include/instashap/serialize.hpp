#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "instashap/fastshap.hpp"
#include "instashap/gam.hpp"
#include "instashap/masking.hpp"

namespace instashap {

inline constexpr int kModelFormatVersion = 1;

// Unreadable model files: bad JSON, truncation, checksum mismatch, missing or
// ill-typed fields.
class CorruptModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A well-formed container written by an incompatible format version.
class ModelVersionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ModelKind { kAdditive, kSurrogate, kAmortizedHead };
std::string ToString(ModelKind kind);

// One JSON container for every model kind: format tag, version, kind, a
// payload with coefficient arrays as base64 little-endian float64, a BLAKE2b
// checksum of the payload, and free-form metadata.
std::string SerializeModel(const AdditiveModel& model);
std::string SerializeModel(const SurrogateModel& model,
                           const std::map<std::string, std::string>& metadata = {});
std::string SerializeModel(const AmortizedHead& head,
                           const std::map<std::string, std::string>& metadata = {});

ModelKind PeekModelKind(const std::string& bytes);
AdditiveModel DeserializeAdditiveModel(const std::string& bytes);
SurrogateModel DeserializeSurrogate(const std::string& bytes);
AmortizedHead DeserializeAmortizedHead(const std::string& bytes);
std::map<std::string, std::string> ModelMetadata(const std::string& bytes);

std::string ReadFileBytes(const std::string& path);
// Writes via a temporary file and rename.
void WriteFileBytes(const std::string& path, const std::string& bytes);

std::string Base64EncodeDoubles(const std::vector<double>& values);
std::vector<double> Base64DecodeDoubles(const std::string& text);

// Long-format CSV of φ_T over the product of per-axis grids: one column per
// feature of T (named after the feature), then one value column per output.
// An empty grid for an axis uses its knots (continuous; exact, since shapes
// are piecewise linear between knots) or its level indices (categorical).
void WriteShapeCsv(const AdditiveModel& model, const ShapeFunction& shape,
                   const std::string& path,
                   const std::vector<std::vector<double>>& axis_grids = {});

}  // namespace instashap
