#include "ctclust/data.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "ctclust/error.hpp"

namespace ctclust {

int Dataset::num_levels() const {
  int levels = 1;
  for (const auto& s : subjects) {
    for (int z : s.levels) levels = std::max(levels, z + 1);
  }
  return levels;
}

void validate_subject(const SubjectRecord& subject) {
  const auto n = subject.times.size();
  if (n == 0) throw Error(ErrorKind::InvalidArgument, fmt::format("subject {} has no observations", subject.id));
  if (subject.outcomes.size() != n || (!subject.levels.empty() && subject.levels.size() != n)) {
    throw Error(ErrorKind::MisalignedInputs, fmt::format("subject {}: times/outcomes/levels lengths differ", subject.id));
  }
  for (std::size_t t = 0; t < n; ++t) {
    if (!std::isfinite(subject.times[t]) || !std::isfinite(subject.outcomes[t])) {
      throw Error(ErrorKind::NonFiniteInput, fmt::format("subject {} observation {}", subject.id, t + 1));
    }
    if (t > 0 && !(subject.times[t] > subject.times[t - 1])) {
      throw Error(ErrorKind::NonMonotoneTimes,
                  fmt::format("subject {}: time {} does not exceed {}", subject.id, subject.times[t], subject.times[t - 1]));
    }
    if (!subject.levels.empty() && subject.levels[t] < 0) {
      throw Error(ErrorKind::InvalidArgument, fmt::format("subject {}: negative covariate level", subject.id));
    }
  }
}

void validate_dataset(const Dataset& data) {
  if (data.empty()) throw Error(ErrorKind::EmptyDataset, "dataset has no subjects");
  for (const auto& s : data.subjects) validate_subject(s);
}

}  // namespace ctclust
