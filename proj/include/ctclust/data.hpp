#pragma once

#include <optional>
#include <string>
#include <vector>

namespace ctclust {

/// One individual's irregularly timed observations. `levels` is either empty
/// (no covariate) or holds one 0-based factor level per observation.
struct SubjectRecord {
  std::string id;
  std::vector<double> times;
  std::vector<double> outcomes;
  std::vector<int> levels;

  int num_observations() const { return static_cast<int>(times.size()); }
  int level(int t) const { return levels.empty() ? 0 : levels[t]; }
  double interval(int t) const { return times[t + 1] - times[t]; }
};

struct Dataset {
  std::vector<SubjectRecord> subjects;

  int size() const { return static_cast<int>(subjects.size()); }
  bool empty() const { return subjects.empty(); }
  /// 1 + largest covariate level present (1 when no covariate is recorded).
  int num_levels() const;
};

/// Throws NonMonotoneTimes / MisalignedInputs / InvalidArgument.
void validate_subject(const SubjectRecord& subject);
void validate_dataset(const Dataset& data);

}  // namespace ctclust
