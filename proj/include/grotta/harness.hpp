#pragma once

#include "grotta/adaptation.hpp"
#include "grotta/model.hpp"
#include "grotta/output_adaptation.hpp"
#include "grotta/streamgen.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace grotta {

enum class Method {
  Grotta,
  Source,
  BnStat,
  Pl,
  Tent,
  OutputOnly,
  AblationA, // EMA statistics tracked on the raw test stream
  AblationB, // + category-balanced bank, statistics tracked on bank batches
  AblationC, // + self-distillation
  AblationD, // + source regularization
  AblationE, // + graph refinement at fixed lambda
};

Method parse_method(const std::string &name);
std::string method_name(Method method);
std::vector<Method> all_methods();

// Feature switches behind each method. Each ablation variant is the
// previous one plus a single switch.
struct MethodTraits {
  enum class Norm { Source, BatchStats, StreamEma, BankEma };
  enum class Objective { None, PseudoLabel, Entropy, Distill };
  enum class Refine { None, FixedLambda, Reweighted };
  Norm norm = Norm::Source;
  Objective objective = Objective::None;
  bool source_regularizer = false;
  Refine refine = Refine::None;
};

MethodTraits method_traits(Method method);

struct RunOptions {
  AdaptConfig adapt;
  AffinityConfig affinity;
  double fixed_lambda = 0.6;
  AdamConfig baseline_adam; // pl / tent
  bool disable_refinement = false;
  std::uint64_t seed = 0;
};

struct StepPrediction {
  std::vector<std::size_t> predicted; // argmax of the balanced predictions
  std::vector<std::size_t> refined;   // reported classes
  double zeta = 0.0;
};

// Per-method online state. predict() never mutates; update() applies the
// method's model/bank changes for the batch just predicted.
class Runner {
public:
  Runner(Method method, const Model &source, const RunOptions &options);

  StepPrediction predict(const Matrix &batch) const;
  void update(const Matrix &batch, const StepPrediction &prediction);

  Method method() const noexcept { return method_; }
  const Model &model() const noexcept;
  const std::optional<AdaptSession> &session() const noexcept { return session_; }

private:
  Method method_;
  MethodTraits traits_;
  RunOptions options_;
  Model model_; // used by the baselines and variant (a)
  std::optional<AdaptSession> session_;
  AdamState adam_;
};

struct StepRecord {
  std::size_t step = 0;
  std::size_t segment = 0;
  std::size_t period = 0;
  std::vector<std::size_t> predicted;
  std::vector<std::size_t> refined;
  std::size_t correct = 0; // refined == truth, out of batch size
  double zeta = 0.0;
  double accumulated_accuracy = 0.0;
};

struct RunResult {
  std::string method;
  std::uint64_t seed = 0;
  std::size_t batch_size = 0;
  std::vector<StepRecord> steps;
  std::vector<double> segment_error;
  double final_error = 0.0;
  double id = 0.0;
  double cd = 0.0;
  double mean_zeta = 0.0;
};

RunResult run_stream(Method method, const Model &source, const Stream &stream,
                     const RunOptions &options);

// Everything a run needs besides the method.
struct RunConfig {
  Method method = Method::Grotta;
  std::uint64_t seed = 0;

  // data: a CSV file, or synthetic Gaussians when empty
  std::string data_csv;
  bool csv_header = false;
  std::size_t classes = 8;
  std::size_t dim = 16;
  std::size_t train_per_class = 200;
  std::size_t test_per_class = 200;
  double separation = 6.0;

  // model
  std::vector<std::size_t> hidden = {32, 32};
  std::size_t pretrain_epochs = 20;
  std::string checkpoint; // load if set (pretraining is skipped)

  // stream
  std::string manifest; // replay if set
  double gamma = 1e-3;
  std::size_t segments = 15;
  std::size_t periods_per_segment = 10;
  std::size_t batches_per_period = 10;
  double severity = 2.0;

  // adaptation
  std::size_t batch_size = 64;
  std::size_t bank_capacity = kDefaultBankCapacity;
  double alpha = kDefaultGlobalAlpha;
  double nu = 0.001;
  double lambda_batch = 0.01;
  double lambda_re = 0.1;
  double lr = 1e-3;
  double weak_noise = 0.01;   // times pooled feature std
  double strong_noise = 0.1;  // times pooled feature std
  double p_drop = 0.1;
  std::string affinity = "knn";
  std::size_t knn_k = 5;
  double rbf_sigma = 1.0;
  double fixed_lambda = 0.6;
  bool no_refine = false;

  std::string output; // result file prefix; nothing written when empty

  // key=value pairs in a stable order, echoed into the summary.
  std::vector<std::pair<std::string, std::string>> entries() const;
};

struct Experiment {
  BaseDataset train;
  BaseDataset test;
  Model source;
  Stream stream;
  double feature_std = 1.0;
};

// Builds data, source model (pretrained or loaded) and the test stream.
Experiment prepare_experiment(const RunConfig &config);
RunOptions make_run_options(const RunConfig &config, double feature_std);
RunResult run(const RunConfig &config);
RunResult run(const RunConfig &config, const Experiment &experiment);

// Pooled standard deviation: sqrt of the mean per-column variance.
double pooled_feature_std(const Matrix &features);

// <prefix>.trace.csv and <prefix>.summary.txt
void write_results(const RunResult &result, const RunConfig &config,
                   const std::filesystem::path &prefix);
std::map<std::string, std::string> read_summary(const std::filesystem::path &path);

} // namespace grotta
