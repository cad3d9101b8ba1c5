#include "ctclust/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <cereal/archives/binary.hpp>
#include <cereal/types/string.hpp>
#include <cereal/types/utility.hpp>
#include <cereal/types/vector.hpp>
#include <fmt/format.h>
#include <openssl/evp.h>

#include "ctclust/error.hpp"

namespace ctclust {

namespace {

constexpr char kCheckpointMagic[] = "CTCLUST-CKPT";
constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  for (auto& f : out) {
    const auto b = f.find_first_not_of(" \t\r");
    const auto e = f.find_last_not_of(" \t\r");
    f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
  }
  return out;
}

double parse_real(const std::string& s, long line, std::string_view column) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (...) {
    used = 0;
  }
  if (s.empty() || used != s.size()) {
    throw Error(ErrorKind::DataParse, fmt::format("line {}: column '{}' is not a number: '{}'", line, column, s));
  }
  return v;
}

Json parse_json_text(const std::string& text, std::string_view what) {
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::ConfigParse, fmt::format("{}: {}", what, e.what()));
  }
}

// A prior block given either as a scalar (broadcast) or as nested arrays.
Matrix block(const Json& section, const char* key, Matrix fallback) {
  if (!section.contains(key)) return fallback;
  const Json& v = section.at(key);
  if (v.is_number()) return Matrix::Constant(fallback.rows(), fallback.cols(), v.get<double>());
  Matrix m = v.is_array() && !v.empty() && v.front().is_array() ? matrix_from_json(v) : Matrix(vector_from_json(v));
  if (m.rows() != fallback.rows() || m.cols() != fallback.cols()) {
    throw Error(ErrorKind::ConfigParse, fmt::format("prior '{}' must be {}x{}", key, fallback.rows(), fallback.cols()));
  }
  return m;
}

template <class T>
T get_or(const Json& section, const char* key, T fallback) {
  if (!section.contains(key)) return fallback;
  try {
    return section.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::ConfigParse, fmt::format("'{}': {}", key, e.what()));
  }
}

template <class Archive, class Derived>
void put_eigen(Archive& ar, const Eigen::PlainObjectBase<Derived>& m) {
  ar(static_cast<std::int64_t>(m.rows()), static_cast<std::int64_t>(m.cols()));
  ar(cereal::binary_data(m.data(), sizeof(typename Derived::Scalar) * static_cast<std::size_t>(m.size())));
}

template <class Archive, class Derived>
void get_eigen(Archive& ar, Eigen::PlainObjectBase<Derived>& m) {
  std::int64_t r = 0, c = 0;
  ar(r, c);
  if (r < 0 || c < 0 || r * c > (1LL << 32)) throw Error(ErrorKind::CheckpointIOFailure, "corrupt matrix header");
  m.resize(r, c);
  ar(cereal::binary_data(m.data(), sizeof(typename Derived::Scalar) * static_cast<std::size_t>(m.size())));
}

template <class Archive>
void put_params(Archive& ar, const ClusterParams& c) {
  put_eigen(ar, c.pi.probs());
  put_eigen(ar, c.q.rates());
  put_eigen(ar, c.theta);
}

template <class Archive>
ClusterParams get_params(Archive& ar) {
  ClusterParams c;
  Vector pi;
  Matrix q;
  get_eigen(ar, pi);
  get_eigen(ar, q);
  get_eigen(ar, c.theta);
  c.pi = InitialDistribution::restore(std::move(pi));
  c.q = q.rows() < 2 ? GeneratorMatrix::single_state() : validate_generator(q);
  return c;
}

template <class Archive>
void put_stats(Archive& ar, const OutcomeSuffStats& s) {
  put_eigen(ar, s.count);
  put_eigen(ar, s.sum);
  put_eigen(ar, s.sumsq);
  ar(s.log_factorial);
  put_eigen(ar, s.first_visit);
  put_eigen(ar, s.jumps);
  put_eigen(ar, s.holding);
}

template <class Archive>
void get_stats(Archive& ar, OutcomeSuffStats& s) {
  get_eigen(ar, s.count);
  get_eigen(ar, s.sum);
  get_eigen(ar, s.sumsq);
  ar(s.log_factorial);
  get_eigen(ar, s.first_visit);
  get_eigen(ar, s.jumps);
  get_eigen(ar, s.holding);
}

}  // namespace

Dataset parse_dataset_csv(std::istream& in) {
  std::string line;
  long line_no = 1;
  if (!std::getline(in, line)) throw Error(ErrorKind::DataParse, "line 1: missing header");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line = line.substr(3);
  const auto header = split_csv_line(line);
  auto column = [&](std::string_view name) -> int {
    const auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
  };
  const int c_id = column("subject_id");
  const int c_time = column("time");
  const int c_out = column("outcome");
  const int c_level = column("covariate_level");
  for (auto [idx, name] : {std::pair{c_id, "subject_id"}, std::pair{c_time, "time"}, std::pair{c_out, "outcome"}}) {
    if (idx < 0) throw Error(ErrorKind::DataParse, fmt::format("line 1: missing column '{}'", name));
  }

  struct Row {
    double time;
    double outcome;
    int level;
  };
  std::vector<std::string> order;
  std::map<std::string, std::vector<Row>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = split_csv_line(line);
    if (static_cast<int>(f.size()) != static_cast<int>(header.size())) {
      throw Error(ErrorKind::DataParse,
                  fmt::format("line {}: expected {} fields, found {}", line_no, header.size(), f.size()));
    }
    if (f[c_id].empty()) throw Error(ErrorKind::DataParse, fmt::format("line {}: empty subject_id", line_no));
    Row r{parse_real(f[c_time], line_no, "time"), parse_real(f[c_out], line_no, "outcome"), 0};
    if (c_level >= 0) {
      const double lv = parse_real(f[c_level], line_no, "covariate_level");
      if (lv < 0.0 || lv != std::floor(lv)) {
        throw Error(ErrorKind::DataParse, fmt::format("line {}: covariate_level must be a non-negative integer", line_no));
      }
      r.level = static_cast<int>(lv);
    }
    auto [it, fresh] = rows.try_emplace(f[c_id]);
    if (fresh) order.push_back(f[c_id]);
    it->second.push_back(r);
  }

  Dataset data;
  for (const auto& id : order) {
    auto& rs = rows[id];
    std::stable_sort(rs.begin(), rs.end(), [](const Row& a, const Row& b) { return a.time < b.time; });
    SubjectRecord s;
    s.id = id;
    for (const auto& r : rs) {
      s.times.push_back(r.time);
      s.outcomes.push_back(r.outcome);
      if (c_level >= 0) s.levels.push_back(r.level);
    }
    try {
      validate_subject(s);
    } catch (const Error& e) {
      throw Error(ErrorKind::DataParse, fmt::format("subject '{}': {}", id, e.what()));
    }
    data.subjects.push_back(std::move(s));
  }
  if (data.empty()) throw Error(ErrorKind::EmptyDataset, "data file has no rows");
  return data;
}

Dataset read_dataset_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IOFailure, fmt::format("cannot open '{}'", path.string()));
  return parse_dataset_csv(in);
}

std::string format_dataset_csv(const Dataset& data) {
  bool covariate = false;
  for (const auto& s : data.subjects) covariate = covariate || !s.levels.empty();
  std::string out = covariate ? "subject_id,time,outcome,covariate_level\n" : "subject_id,time,outcome\n";
  for (const auto& s : data.subjects) {
    for (int t = 0; t < s.num_observations(); ++t) {
      if (covariate) {
        out += fmt::format("{},{},{},{}\n", s.id, s.times[t], s.outcomes[t], s.level(t));
      } else {
        out += fmt::format("{},{},{}\n", s.id, s.times[t], s.outcomes[t]);
      }
    }
  }
  return out;
}

Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json r = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

Matrix matrix_from_json(const Json& j) {
  if (!j.is_array() || j.empty() || !j.front().is_array()) {
    throw Error(ErrorKind::ConfigParse, "expected a non-empty array of rows");
  }
  const auto cols = j.front().size();
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != cols) throw Error(ErrorKind::ConfigParse, "ragged matrix");
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[i][c].is_number()) throw Error(ErrorKind::ConfigParse, "matrix entries must be numbers");
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = j[i][c].get<double>();
    }
  }
  return m;
}

Json vector_to_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Vector vector_from_json(const Json& j) {
  if (!j.is_array()) throw Error(ErrorKind::ConfigParse, "expected an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw Error(ErrorKind::ConfigParse, "vector entries must be numbers");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

Json truth_to_json(const GroundTruth& truth) {
  Json j;
  Json labels = Json::array();
  for (int l : truth.labels) labels.push_back(l + 1);
  j["labels"] = labels;
  j["states"] = Json::array();
  for (const auto& s : truth.states) {
    Json row = Json::array();
    for (int k : s) row.push_back(k + 1);
    j["states"].push_back(row);
  }
  j["clusters"] = Json::array();
  for (std::size_t m = 0; m < truth.params.size(); ++m) {
    const auto& p = truth.params[m];
    Json c{{"pi", vector_to_json(p.pi.probs())}, {"Q", matrix_to_json(p.q.rates())}, {"theta", matrix_to_json(p.theta)}};
    if (m < truth.coefficients.size()) c["B"] = matrix_to_json(truth.coefficients[m]);
    j["clusters"].push_back(std::move(c));
  }
  j["paths"] = Json::array();
  for (const auto& p : truth.paths) {
    j["paths"].push_back(Json{{"jumps", matrix_to_json(p.jumps.cast<double>())}, {"holding", vector_to_json(p.holding)}});
  }
  return j;
}

GroundTruth truth_from_json(const Json& j) {
  GroundTruth t;
  try {
    for (const auto& l : j.at("labels")) t.labels.push_back(l.get<int>() - 1);
    if (j.contains("states")) {
      for (const auto& row : j.at("states")) {
        std::vector<int> s;
        for (const auto& k : row) s.push_back(k.get<int>() - 1);
        t.states.push_back(std::move(s));
      }
    }
    for (const auto& c : j.at("clusters")) {
      ClusterParams p;
      p.pi = InitialDistribution::from_probs(vector_from_json(c.at("pi")));
      p.q = validate_generator(matrix_from_json(c.at("Q")));
      p.theta = matrix_from_json(c.at("theta"));
      t.params.push_back(std::move(p));
      if (c.contains("B")) t.coefficients.push_back(matrix_from_json(c.at("B")));
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::ConfigParse, fmt::format("truth file: {}", e.what()));
  }
  return t;
}

ModelSpec model_from_json(const Json& config, int num_levels) {
  const Json empty = Json::object();
  const Json& m = config.contains("model") ? config.at("model") : empty;
  ModelSpec model;
  model.family = parse_family(get_or<std::string>(m, "family", "poisson"));
  model.num_states = get_or<int>(m, "num_states", 3);
  model.num_levels = get_or<int>(m, "num_levels", num_levels);
  model.sigma = get_or<double>(m, "sigma", 1.0);
  if (model.num_states < 1 || model.num_levels < 1) {
    throw Error(ErrorKind::ConfigParse, "num_states and num_levels must be positive");
  }
  const int k = model.num_states;
  const int l = model.num_levels;
  const Json& p = config.contains("prior") ? config.at("prior") : empty;
  PriorSpec prior = get_or<std::string>(p, "preset", "default") == "informative-q" ? informative_q_prior(k, l)
                                                                                    : PriorSpec::defaults(k, l);
  prior.theta_shape = block(p, "theta_shape", prior.theta_shape);
  prior.theta_rate = block(p, "theta_rate", prior.theta_rate);
  prior.theta_mean = block(p, "theta_mean", prior.theta_mean);
  prior.theta_sd = block(p, "theta_sd", prior.theta_sd);
  prior.pi_alpha = block(p, "pi_alpha", Matrix(prior.pi_alpha)).col(0);
  prior.q_shape = block(p, "q_shape", prior.q_shape);
  prior.q_rate = block(p, "q_rate", Matrix(prior.q_rate)).col(0);
  prior.dp_alpha = get_or<double>(p, "dp_alpha", prior.dp_alpha);
  model.prior = std::move(prior);
  try {
    model.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::ConfigParse, e.what());
  }
  return model;
}

SamplerConfig sampler_config_from_json(const Json& config, ModelSpec model) {
  const Json empty = Json::object();
  const Json& s = config.contains("sampler") ? config.at("sampler") : empty;
  SamplerConfig c;
  c.model = std::move(model);
  c.num_iterations = get_or<int>(s, "num_iterations", c.num_iterations);
  c.burn_in = get_or<int>(s, "burn_in", c.burn_in);
  c.thin = get_or<int>(s, "thin", c.thin);
  c.restricted_scans = get_or<int>(s, "restricted_scans", c.restricted_scans);
  c.initial_clusters = get_or<int>(s, "initial_clusters", c.initial_clusters);
  c.seed = get_or<std::uint64_t>(s, "seed", c.seed);
  c.variant = parse_variant(get_or<std::string>(s, "variant", std::string(to_string(c.variant))));
  c.checkpoint_interval = get_or<int>(s, "checkpoint_interval", c.checkpoint_interval);
  c.gibbs_sweeps = get_or<int>(s, "gibbs_sweeps", c.gibbs_sweeps);
  c.split_merge_moves = get_or<int>(s, "split_merge_moves", c.split_merge_moves);
  c.update_latent = get_or<bool>(s, "update_latent", c.update_latent);
  c.refresh_paths_in_split_merge = get_or<bool>(s, "refresh_paths_in_split_merge", c.refresh_paths_in_split_merge);
  c.fresh_reference_in_split_merge =
      get_or<bool>(s, "fresh_reference_in_split_merge", c.fresh_reference_in_split_merge);
  c.initial_theta = get_or<std::string>(s, "initial_theta", c.initial_theta);
  if (config.contains("prior")) c.theta_anchor = get_or<double>(config.at("prior"), "theta_anchor", c.theta_anchor);
  return c;
}

Json to_json(const ModelSpec& model) {
  const auto& p = model.prior;
  return Json{{"model",
               {{"family", to_string(model.family)},
                {"num_states", model.num_states},
                {"num_levels", model.num_levels},
                {"sigma", model.sigma}}},
              {"prior",
               {{"theta_shape", matrix_to_json(p.theta_shape)},
                {"theta_rate", matrix_to_json(p.theta_rate)},
                {"theta_mean", matrix_to_json(p.theta_mean)},
                {"theta_sd", matrix_to_json(p.theta_sd)},
                {"pi_alpha", vector_to_json(p.pi_alpha)},
                {"q_shape", matrix_to_json(p.q_shape)},
                {"q_rate", vector_to_json(p.q_rate)},
                {"dp_alpha", p.dp_alpha}}}};
}

Json to_json(const SamplerConfig& c) {
  Json j = to_json(c.model);
  j["sampler"] = Json{{"num_iterations", c.num_iterations},
                      {"burn_in", c.burn_in},
                      {"thin", c.thin},
                      {"restricted_scans", c.restricted_scans},
                      {"initial_clusters", c.initial_clusters},
                      {"seed", c.seed},
                      {"variant", to_string(c.variant)},
                      {"checkpoint_interval", c.checkpoint_interval},
                      {"gibbs_sweeps", c.gibbs_sweeps},
                      {"split_merge_moves", c.split_merge_moves},
                      {"update_latent", c.update_latent},
                      {"refresh_paths_in_split_merge", c.refresh_paths_in_split_merge},
                      {"fresh_reference_in_split_merge", c.fresh_reference_in_split_merge},
                      {"initial_theta", c.initial_theta}};
  j["prior"]["theta_anchor"] = c.theta_anchor;
  return j;
}

SimConfig sim_config_from_json(const Json& s) {
  SimConfig cfg;
  const int num_obs = get_or<int>(s, "T", 50);
  if (s.contains("preset")) {
    const Preset preset = parse_preset(get_or<std::string>(s, "preset", ""));
    cfg = builtin_example_config(preset, num_obs, get_or<double>(s, "sigma", 0.5));
    if (s.contains("sigma") && preset != Preset::Ex2) cfg.sigma = s.at("sigma").get<double>();
  } else {
    if (!s.contains("clusters")) throw Error(ErrorKind::ConfigParse, "simulate section needs 'preset' or 'clusters'");
    cfg.family = parse_family(get_or<std::string>(s, "family", "poisson"));
    cfg.sigma = get_or<double>(s, "sigma", 1.0);
    cfg.num_obs = num_obs;
    try {
      for (const auto& c : s.at("clusters")) {
        SimCluster sc;
        sc.pi = InitialDistribution::from_probs(vector_from_json(c.at("pi")));
        sc.q = validate_generator(matrix_from_json(c.at("Q")));
        sc.coefficients = c.contains("B") ? matrix_from_json(c.at("B"))
                                          : coefficients_from_cells(matrix_from_json(c.at("theta")), cfg.family);
        sc.subjects = get_or<int>(c, "subjects", 100);
        cfg.clusters.push_back(std::move(sc));
      }
    } catch (const Json::exception& e) {
      throw Error(ErrorKind::ConfigParse, fmt::format("simulate.clusters: {}", e.what()));
    }
    if (s.contains("covariate_probs")) cfg.covariate_probs = vector_from_json(s.at("covariate_probs"));
  }
  cfg.horizon = get_or<double>(s, "horizon", cfg.horizon);
  cfg.seed = get_or<std::uint64_t>(s, "seed", cfg.seed);
  if (s.contains("subjects_per_cluster")) {
    for (auto& c : cfg.clusters) c.subjects = s.at("subjects_per_cluster").get<int>();
  }
  if (s.contains("subjects")) {
    const auto sizes = s.at("subjects").get<std::vector<int>>();
    if (sizes.size() != cfg.clusters.size()) {
      throw Error(ErrorKind::ConfigParse, fmt::format("'subjects' needs {} entries", cfg.clusters.size()));
    }
    for (std::size_t m = 0; m < sizes.size(); ++m) cfg.clusters[m].subjects = sizes[m];
  }
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::ConfigParse, e.what());
  }
  return cfg;
}

Json to_json(const SimConfig& cfg) {
  Json clusters = Json::array();
  for (const auto& c : cfg.clusters) {
    clusters.push_back(Json{{"pi", vector_to_json(c.pi.probs())},
                            {"Q", matrix_to_json(c.q.rates())},
                            {"B", matrix_to_json(c.coefficients)},
                            {"subjects", c.subjects}});
  }
  Json j{{"family", to_string(cfg.family)}, {"sigma", cfg.sigma},   {"T", cfg.num_obs},
         {"horizon", cfg.horizon},          {"seed", cfg.seed},     {"clusters", clusters}};
  if (cfg.covariate_probs.size() > 0) j["covariate_probs"] = vector_to_json(cfg.covariate_probs);
  return j;
}

Json sample_to_json(const PosteriorSample& sample) {
  Json labels = Json::array();
  for (int l : sample.labels) labels.push_back(l + 1);
  Json clusters = Json::array();
  for (const auto& c : sample.clusters) {
    clusters.push_back(
        Json{{"pi", vector_to_json(c.pi.probs())}, {"Q", matrix_to_json(c.q.rates())}, {"theta", matrix_to_json(c.theta)}});
  }
  return Json{{"iteration", sample.iteration}, {"M", sample.num_clusters}, {"labels", labels}, {"clusters", clusters}};
}

PosteriorSample sample_from_json(const Json& j) {
  PosteriorSample s;
  try {
    s.iteration = j.at("iteration").get<long>();
    s.num_clusters = j.at("M").get<int>();
    for (const auto& l : j.at("labels")) s.labels.push_back(l.get<int>() - 1);
    for (const auto& c : j.at("clusters")) {
      ClusterParams p;
      p.pi = InitialDistribution::restore(vector_from_json(c.at("pi")));
      const Matrix q = matrix_from_json(c.at("Q"));
      p.q = q.rows() < 2 ? GeneratorMatrix::single_state() : validate_generator(q);
      p.theta = matrix_from_json(c.at("theta"));
      s.clusters.push_back(std::move(p));
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::DataParse, fmt::format("posterior sample: {}", e.what()));
  }
  if (static_cast<int>(s.clusters.size()) != s.num_clusters) {
    throw Error(ErrorKind::DataParse, "posterior sample: M disagrees with the cluster list");
  }
  return s;
}

std::vector<PosteriorSample> read_samples_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IOFailure, fmt::format("cannot open '{}'", path.string()));
  std::vector<PosteriorSample> out;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(sample_from_json(Json::parse(line)));
    } catch (const Json::exception& e) {
      throw Error(ErrorKind::DataParse, fmt::format("{} line {}: {}", path.string(), line_no, e.what()));
    }
  }
  return out;
}

void truncate_samples_jsonl(const fs::path& path, long iteration) {
  if (!fs::exists(path)) return;
  std::ifstream in(path);
  std::string line, kept;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::exception&) {
      break;  // a torn final line from an interrupted write
    }
    if (j.at("iteration").get<long>() > iteration) break;
    kept += line;
    kept += '\n';
  }
  in.close();
  write_file_atomic(path, kept);
}

void save_checkpoint(const fs::path& path, const Checkpoint& ck) {
  std::ostringstream buf(std::ios::binary);
  try {
    cereal::BinaryOutputArchive ar(buf);
    ar(std::string(kCheckpointMagic), kCheckpointVersion, ck.seed, ck.dataset_sha256);
    const auto& s = ck.state;
    ar(static_cast<std::int64_t>(s.iteration), s.labels);
    ar(s.moves.split_proposed, s.moves.split_accepted, s.moves.merge_proposed, s.moves.merge_accepted);
    ar(static_cast<std::uint64_t>(s.clusters.size()));
    for (const auto& c : s.clusters) put_params(ar, c);
    put_params(ar, s.shared);
    ar(static_cast<std::uint64_t>(s.latent.size()));
    for (const auto& lat : s.latent) {
      ar(lat.states, lat.endpoints, static_cast<std::uint64_t>(lat.paths.size()));
      for (const auto& p : lat.paths) {
        put_eigen(ar, p.jumps);
        put_eigen(ar, p.holding);
        ar(p.span);
      }
      put_stats(ar, lat.stats);
    }
  } catch (const std::exception& e) {
    throw Error(ErrorKind::CheckpointIOFailure, fmt::format("serializing checkpoint: {}", e.what()));
  }
  try {
    write_file_atomic(path, buf.str());
  } catch (const Error& e) {
    throw Error(ErrorKind::CheckpointIOFailure, e.what());
  }
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::CheckpointIOFailure, fmt::format("cannot open checkpoint '{}'", path.string()));
  Checkpoint ck;
  try {
    cereal::BinaryInputArchive ar(in);
    std::string magic;
    std::uint32_t version = 0;
    ar(magic);
    if (magic != kCheckpointMagic) throw Error(ErrorKind::CheckpointIOFailure, "not a checkpoint file");
    ar(version);
    if (version != kCheckpointVersion) {
      throw Error(ErrorKind::CheckpointIOFailure, fmt::format("unsupported checkpoint version {}", version));
    }
    ar(ck.seed, ck.dataset_sha256);
    auto& s = ck.state;
    std::int64_t iteration = 0;
    ar(iteration, s.labels);
    s.iteration = iteration;
    ar(s.moves.split_proposed, s.moves.split_accepted, s.moves.merge_proposed, s.moves.merge_accepted);
    std::uint64_t m = 0;
    ar(m);
    for (std::uint64_t j = 0; j < m; ++j) s.clusters.push_back(get_params(ar));
    s.shared = get_params(ar);
    std::uint64_t n = 0;
    ar(n);
    s.latent.resize(n);
    for (auto& lat : s.latent) {
      std::uint64_t np = 0;
      ar(lat.states, lat.endpoints, np);
      lat.paths.resize(np);
      for (auto& p : lat.paths) {
        get_eigen(ar, p.jumps);
        get_eigen(ar, p.holding);
        ar(p.span);
      }
      get_stats(ar, lat.stats);
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorKind::CheckpointIOFailure, fmt::format("reading checkpoint '{}': {}", path.string(), e.what()));
  }
  check_state(ck.state);
  return ck;
}

void write_file_atomic(const fs::path& path, std::string_view content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IOFailure, fmt::format("cannot write '{}'", tmp.string()));
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(ErrorKind::IOFailure, fmt::format("short write to '{}'", tmp.string()));
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorKind::IOFailure, fmt::format("cannot rename onto '{}': {}", path.string(), ec.message()));
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IOFailure, fmt::format("cannot open '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json read_json_file(const fs::path& path) {
  return parse_json_text(read_file(path), path.string());
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorKind::IOFailure, "SHA-256 computation failed");
  }
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

}  // namespace ctclust
