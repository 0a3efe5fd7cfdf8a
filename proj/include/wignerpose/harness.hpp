#pragma once

// Synthetic template dataset, run configuration, training, evaluation and ablations.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "wignerpose/estimation.hpp"
#include "wignerpose/mapper.hpp"
#include "wignerpose/specconv.hpp"

namespace wignerpose {

using json = nlohmann::json;

enum class InputKind { spherical, image };

struct DatasetConfig {
  InputKind kind{InputKind::spherical};
  int n_train{100};
  int n_test{20};
  int channels{3};
  int template_bandlimit{4};
  int input_level{2};  // full S^2 HEALPix level for spherical inputs
  int image_size{32};
  double noise{0.0};
};

struct Sample {
  RotationMatrix<double> rotation;
  Eigen::MatrixXd input;  // channels x points (spherical) or channels x (H * W) (image)
};

struct SyntheticDataset {
  DatasetConfig cfg;
  std::uint64_t seed{0};
  RealCoeffs templ;
  std::vector<Sample> train;
  std::vector<Sample> test;

  /// Points of spherical inputs (full HEALPix grid at cfg.input_level).
  std::vector<SphericalPoint> points() const;
};

SyntheticDataset gen_dataset(const DatasetConfig& cfg, std::uint64_t seed);

inline constexpr std::uint32_t kDatasetVersion = 1;
void save_dataset(const SyntheticDataset& d, std::ostream& os);
SyntheticDataset load_dataset(std::istream& is);
void save_dataset(const SyntheticDataset& d, const std::string& path);
SyntheticDataset load_dataset(const std::string& path);

struct OptimizerConfig {
  double lr{3e-3};
  double momentum{0.9};
  bool nesterov{true};
  int epochs{30};
  int batch{10};
  int decay_every{12};
  double decay_factor{0.1};
  double clip_norm{0.0};  // minibatch gradient norm cap; 0 disables
};

struct InferenceConfig {
  SO3GridKind grid_kind{SO3GridKind::healpix_hopf};
  int level{3};
  std::size_t count{0};  // random / super-Fibonacci size; 0 means the size of the HEALPix level
  std::uint64_t grid_seed{7};
  bool allow_large{false};
  double temperature{1.0};
  bool gradient_ascent{false};
  int ga_steps{100};
  double ga_lr{1e-3};
};

struct Seeds {
  std::uint64_t data{1};
  std::uint64_t init{2};
  std::uint64_t shuffle{3};
  std::uint64_t dropout{4};
};

struct RunConfig {
  DatasetConfig data;
  ModelConfig model;
  MapperConfig mapper;
  int mapper_level{2};
  int ce_level{2};  // SO(3) grid level of the distribution losses
  LossConfig loss;
  OptimizerConfig optimizer;
  InferenceConfig inference;
  Seeds seeds;
};

json to_json(const RunConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
RunConfig run_config_from_json(const json& j);
/// Cross-field validation (levels in range, channel counts consistent).
void validate(const RunConfig& c);

/// 64-bit FNV-1a of the canonical JSON dump, as 16 hex digits.
std::string config_hash(const json& j);
std::string library_version();

/// Spatial target vector of a rotation for a spatial head.
Eigen::VectorXd spatial_target(HeadKind h, const RotationMatrix<double>& r);
/// Rotation read from a spatial head output (normalized / SVD-projected).
RotationMatrix<double> spatial_to_rotation(HeadKind h, const Eigen::VectorXd& v);

/// Shared state of a run: the SO(3) grids, the input analyzer and the model.
class Pipeline {
 public:
  Pipeline(const RunConfig& cfg, const SyntheticDataset& d);

  const RunConfig& config() const { return cfg_; }
  const SO3Sampler& sampler() const { return *sampler_; }
  /// Input harmonic coefficients of one sample; dropout only when train is set.
  RealCoeffs input_coeffs(const Sample& s, bool train, std::uint64_t seed) const;

 private:
  RunConfig cfg_;
  int height_{0}, width_{0};
  std::optional<S2Analyzer<double>> full_analyzer_;
  std::optional<SO3Sampler> sampler_;
};

struct EpochLog {
  int epoch{0};
  double lr{0};
  double loss{0};
  std::optional<Metrics> test;
};

struct TrainResult {
  ToyModel model;
  std::vector<EpochLog> log;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Minibatch SGD with (Nesterov) momentum and step decay. eval_every > 0 adds
/// test metrics to the log every that many epochs.
TrainResult train(const RunConfig& cfg, const SyntheticDataset& d, int eval_every = 0,
                  const EpochCallback& on_epoch = {});

/// train() unless cache_dir holds a checkpoint for the same config hash; the
/// result is stored there when cache_dir is non-empty.
ToyModel train_cached(const RunConfig& cfg, const SyntheticDataset& d, const std::string& cache_dir);

struct SampleResult {
  std::size_t index{0};
  RotationMatrix<double> gt;
  RotationMatrix<double> pred;
  double error_deg{0};
  std::optional<RotationMatrix<double>> refined;
  double refined_error_deg{0};
};

struct EvalReport {
  Metrics argmax;
  std::optional<Metrics> refined;
  std::vector<SampleResult> samples;
};

SO3Grid make_inference_grid(const InferenceConfig& c, int bandlimit);

/// Eval-mode forward and readout over one split.
EvalReport evaluate(const ToyModel& m, const RunConfig& cfg, const SyntheticDataset& d, bool test_split = true);
EvalReport evaluate(const ToyModel& m, const RunConfig& cfg, const SyntheticDataset& d, const SO3Grid& grid,
                    bool test_split = true);

json metrics_json(const Metrics& m);
json report_json(const EvalReport& r, const RunConfig& cfg);
void write_samples_csv(const EvalReport& r, std::ostream& os);

enum class AblationKind { parametrization, loss, grid_type, grid_size, bandlimit };
AblationKind ablation_kind_from_string(const std::string& s);
std::string to_string(AblationKind k);

struct AblationRow {
  std::string variant;
  Metrics metrics;
  double seconds{0};
  bool cached{false};
};

/// Trains and evaluates each variant of `kind` with the base seeds. When
/// cache_dir is non-empty, finished variants are stored there as JSON keyed by
/// config hash and reused.
std::vector<AblationRow> run_ablation(AblationKind kind, const RunConfig& base, const std::string& cache_dir = "",
                                      const std::vector<std::string>& variants = {});
json ablation_json(AblationKind kind, const std::vector<AblationRow>& rows, const RunConfig& base);

}  // namespace wignerpose
