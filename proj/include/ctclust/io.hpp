#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "ctclust/data.hpp"
#include "ctclust/sampler.hpp"
#include "ctclust/simulate.hpp"

namespace ctclust {

using Json = nlohmann::json;
namespace fs = std::filesystem;

/// Long-format CSV with header `subject_id,time,outcome[,covariate_level]`.
/// Subjects keep their order of first appearance; each subject's rows are
/// sorted by time. Throws DataParse with the offending line number.
Dataset parse_dataset_csv(std::istream& in);
Dataset read_dataset_csv(const fs::path& path);
std::string format_dataset_csv(const Dataset& data);

Json truth_to_json(const GroundTruth& truth);
GroundTruth truth_from_json(const Json& j);

Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j);
Json vector_to_json(const Vector& v);
Vector vector_from_json(const Json& j);

/// Model and prior from the "model"/"prior" sections of a config document.
/// `num_levels` is used when the document does not state it.
ModelSpec model_from_json(const Json& config, int num_levels);
/// Sampler settings from the "sampler" section on top of `model`.
SamplerConfig sampler_config_from_json(const Json& config, ModelSpec model);
Json to_json(const SamplerConfig& config);
Json to_json(const ModelSpec& model);

/// The "simulate" section: either {"preset": ...} with optional overrides
/// or explicit {"family", "clusters": [{"pi", "Q", "B", "subjects"}], ...}.
SimConfig sim_config_from_json(const Json& section);
Json to_json(const SimConfig& config);

/// One JSON object per retained iteration; labels are written 1-based.
Json sample_to_json(const PosteriorSample& sample);
PosteriorSample sample_from_json(const Json& j);
std::vector<PosteriorSample> read_samples_jsonl(const fs::path& path);

/// Drops every line whose iteration exceeds `iteration` (resume support).
void truncate_samples_jsonl(const fs::path& path, long iteration);

/// Binary snapshot with a version tag: seed, dataset fingerprint and the full
/// sampler state. Throws CheckpointIOFailure.
struct Checkpoint {
  std::uint64_t seed = 0;
  std::string dataset_sha256;
  SamplerState state;
};
void save_checkpoint(const fs::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const fs::path& path);

/// Writes to a sibling temp file and renames it over `path`. IOFailure.
void write_file_atomic(const fs::path& path, std::string_view content);
std::string read_file(const fs::path& path);
Json read_json_file(const fs::path& path);

std::string sha256_hex(std::string_view bytes);

}  // namespace ctclust
