#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "ctclust/ctmc.hpp"
#include "ctclust/data.hpp"
#include "ctclust/outcome.hpp"
#include "ctclust/path.hpp"
#include "ctclust/sampler.hpp"

namespace ctclust {

/// One generating component. `coefficients` has one row per covariate level
/// (row 0 intercepts, rows d > 0 contrasts) and one column per state.
struct SimCluster {
  InitialDistribution pi;
  GeneratorMatrix q;
  Matrix coefficients;
  int subjects = 1;
};

struct SimConfig {
  std::vector<SimCluster> clusters;
  Family family = Family::Poisson;
  double sigma = 1.0;
  int num_obs = 50;       ///< observations per subject, the first at time 0
  double horizon = 15.0;  ///< remaining times are uniform on (0, horizon)
  Vector covariate_probs;  ///< per-observation level probabilities; empty = no covariate
  std::uint64_t seed = 1;

  int num_states() const;
  int num_levels() const;
  int num_subjects() const;
  void validate() const;
};

enum class Preset { Ex1Gaussian, Ex1Poisson, Ex2, Ex3 };

Preset parse_preset(std::string_view name);
std::string_view to_string(Preset preset);

/// Published parameter sets of the three simulation designs. `sigma` is the
/// residual sd used by Ex2 (Ex1Gaussian always uses 1).
SimConfig builtin_example_config(Preset preset, int num_obs, double sigma = 0.5);

/// Sampler settings that go with a preset (scan count, variant).
struct PresetFitDefaults {
  int restricted_scans = 3;
  Variant variant = Variant::Full;
};
PresetFitDefaults preset_fit_defaults(Preset preset);

/// Gamma(20, 500) on every generator channel, the informative prior used for
/// the real-data analysis; other blocks keep their defaults.
PriorSpec informative_q_prior(int num_states, int num_levels);

/// Generating truth, kept apart from the Dataset handed to the sampler.
struct GroundTruth {
  std::vector<int> labels;               ///< 0-based component of each subject
  std::vector<std::vector<int>> states;  ///< latent state at each observation
  std::vector<PathStats> paths;          ///< whole-path statistics per subject
  std::vector<ClusterParams> params;     ///< theta holds the (state, level) cells
  std::vector<Matrix> coefficients;
};

struct SimulatedData {
  Dataset data;
  GroundTruth truth;
};

SimulatedData generate_dataset(const SimConfig& config);

/// Matching model description for fitting simulated data.
ModelSpec model_for(const SimConfig& config);

}  // namespace ctclust
