#include "grotta/harness.hpp"

#include "grotta/baselines.hpp"
#include "grotta/checkpoint.hpp"
#include "grotta/errors.hpp"
#include "grotta/kernels.hpp"
#include "grotta/pretrain.hpp"
#include "text_format.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace grotta {

namespace {

struct MethodName {
  Method method;
  const char *name;
};

constexpr MethodName kMethodNames[] = {
    {Method::Grotta, "grotta"},        {Method::Source, "source"},
    {Method::BnStat, "bn_stat"},       {Method::Pl, "pl"},
    {Method::Tent, "tent"},            {Method::OutputOnly, "output_only"},
    {Method::AblationA, "ablation_a"}, {Method::AblationB, "ablation_b"},
    {Method::AblationC, "ablation_c"}, {Method::AblationD, "ablation_d"},
    {Method::AblationE, "ablation_e"},
};

bool uses_session(const MethodTraits &t) {
  return t.norm == MethodTraits::Norm::BankEma;
}

BaselineKind baseline_kind(Method m) {
  switch (m) {
  case Method::Source:
    return BaselineKind::Source;
  case Method::BnStat:
    return BaselineKind::BnStat;
  case Method::Pl:
    return BaselineKind::Pl;
  case Method::Tent:
    return BaselineKind::Tent;
  default:
    throw UnknownMethod("not a baseline: " + method_name(m));
  }
}

} // namespace

Method parse_method(const std::string &name) {
  for (const auto &entry : kMethodNames)
    if (name == entry.name)
      return entry.method;
  // "ablation(b)" and "b" are accepted for the variants too
  std::string key = name;
  if (key.size() == 11 && key.starts_with("ablation(") && key.back() == ')')
    key = key.substr(9, 1);
  if (key.size() == 1 && key[0] >= 'a' && key[0] <= 'e')
    return static_cast<Method>(static_cast<int>(Method::AblationA) + (key[0] - 'a'));
  throw UnknownMethod("unknown method '" + name + "'");
}

std::string method_name(Method method) {
  for (const auto &entry : kMethodNames)
    if (entry.method == method)
      return entry.name;
  throw UnknownMethod("unknown method id");
}

std::vector<Method> all_methods() {
  std::vector<Method> out;
  for (const auto &entry : kMethodNames)
    out.push_back(entry.method);
  return out;
}

MethodTraits method_traits(Method method) {
  using N = MethodTraits::Norm;
  using O = MethodTraits::Objective;
  using R = MethodTraits::Refine;
  MethodTraits t;
  switch (method) {
  case Method::Source:
    return t;
  case Method::BnStat:
    t.norm = N::BatchStats;
    return t;
  case Method::Pl:
    t.norm = N::BatchStats;
    t.objective = O::PseudoLabel;
    return t;
  case Method::Tent:
    t.norm = N::BatchStats;
    t.objective = O::Entropy;
    return t;
  case Method::OutputOnly:
    t = method_traits(Method::AblationB);
    t.refine = R::Reweighted;
    return t;
  case Method::AblationA:
    t.norm = N::StreamEma;
    return t;
  case Method::AblationB:
    t = method_traits(Method::AblationA);
    t.norm = N::BankEma;
    return t;
  case Method::AblationC:
    t = method_traits(Method::AblationB);
    t.objective = O::Distill;
    return t;
  case Method::AblationD:
    t = method_traits(Method::AblationC);
    t.source_regularizer = true;
    return t;
  case Method::AblationE:
    t = method_traits(Method::AblationD);
    t.refine = R::FixedLambda;
    return t;
  case Method::Grotta:
    t = method_traits(Method::AblationE);
    t.refine = R::Reweighted;
    return t;
  }
  throw UnknownMethod("unknown method id");
}

Runner::Runner(Method method, const Model &source, const RunOptions &options)
    : method_(method), traits_(method_traits(method)), options_(options), model_(source) {
  adam_.config = options.baseline_adam;
  if (options_.disable_refinement)
    traits_.refine = MethodTraits::Refine::None;
  if (uses_session(traits_)) {
    AdaptConfig cfg = options.adapt;
    cfg.train = traits_.objective == MethodTraits::Objective::Distill;
    if (!traits_.source_regularizer)
      cfg.lambda_re = 0.0;
    session_.emplace(source, cfg, options.seed);
  } else if (traits_.norm == MethodTraits::Norm::StreamEma) {
    for (const auto &block : model_.blocks())
      if (!block.norm.has_source_stats())
        throw UninitializedSource("variant (a) needs source statistics");
  }
}

const Model &Runner::model() const noexcept {
  return session_ ? session_->teacher() : model_;
}

StepPrediction Runner::predict(const Matrix &batch) const {
  if (batch.rows() == 0)
    throw EmptyBatch("predict: empty batch");
  StepPrediction out;
  Matrix p;
  Matrix features;
  if (session_) {
    ForwardResult fr = session_->infer(batch);
    p = softmax_rows(fr.logits);
    features = std::move(fr.features);
  } else if (traits_.norm == MethodTraits::Norm::StreamEma) {
    p = softmax_rows(forward(model_, batch, Mode::AdaptNoTrack).logits);
  } else {
    p = baseline_predict(baseline_kind(method_), model_, batch);
  }
  out.predicted = argmax_rows(p);
  if (traits_.refine == MethodTraits::Refine::None) {
    out.refined = out.predicted;
    out.zeta = imbalance_lambda(p).zeta;
    return out;
  }
  RefineOptions ro;
  ro.affinity = options_.affinity;
  if (traits_.refine == MethodTraits::Refine::FixedLambda)
    ro.fixed_lambda = options_.fixed_lambda;
  RefinementResult r = refine(p, features, ro);
  out.refined = std::move(r.classes);
  out.zeta = r.zeta;
  return out;
}

void Runner::update(const Matrix &batch, const StepPrediction &prediction) {
  if (prediction.predicted.size() != batch.rows())
    throw ShapeMismatch("update: prediction count differs from batch rows");
  if (session_) {
    for (std::size_t i = 0; i < batch.rows(); ++i)
      session_->bank().insert(batch.row(i), prediction.predicted[i]);
    adapt_step(*session_, batch);
  } else if (traits_.norm == MethodTraits::Norm::StreamEma) {
    if (batch.rows() >= 2)
      forward(model_, batch, Mode::AdaptTrack);
  } else {
    baseline_update(baseline_kind(method_), model_, adam_, batch);
  }
}

RunResult run_stream(Method method, const Model &source, const Stream &stream,
                     const RunOptions &options) {
  Runner runner(method, source, options);
  RunResult result;
  result.method = method_name(method);
  result.seed = options.seed;
  result.batch_size = stream.config.batch_size;
  const std::size_t segments = stream.config.segments.size();
  std::vector<std::size_t> seg_correct(segments, 0), seg_total(segments, 0);
  std::size_t correct_sum = 0, seen = 0;
  double zeta_sum = 0.0;
  result.steps.reserve(stream.batches.size());
  for (const StreamBatch &batch : stream.batches) {
    StepPrediction pred = runner.predict(batch.features);
    runner.update(batch.features, pred);

    StepRecord rec;
    rec.step = batch.step;
    rec.segment = batch.segment;
    rec.period = batch.period;
    for (std::size_t i = 0; i < pred.refined.size(); ++i)
      rec.correct += pred.refined[i] == batch.true_labels[i] ? 1 : 0;
    rec.zeta = pred.zeta;
    rec.predicted = std::move(pred.predicted);
    rec.refined = std::move(pred.refined);
    correct_sum += rec.correct;
    seen += batch.true_labels.size();
    rec.accumulated_accuracy =
        static_cast<double>(correct_sum) / static_cast<double>(seen);
    if (batch.segment < segments) {
      seg_correct[batch.segment] += rec.correct;
      seg_total[batch.segment] += batch.true_labels.size();
    }
    zeta_sum += rec.zeta;
    result.steps.push_back(std::move(rec));
  }
  result.segment_error.resize(segments, 0.0);
  for (std::size_t s = 0; s < segments; ++s)
    if (seg_total[s] > 0)
      result.segment_error[s] =
          1.0 - static_cast<double>(seg_correct[s]) / static_cast<double>(seg_total[s]);
  result.final_error =
      result.steps.empty() ? 0.0 : 1.0 - result.steps.back().accumulated_accuracy;
  result.mean_zeta =
      result.steps.empty() ? 0.0 : zeta_sum / static_cast<double>(result.steps.size());
  if (!stream.period_distributions.empty())
    result.id = id_metric(stream.period_distributions);
  if (stream.period_distributions.size() >= 2)
    result.cd = cd_metric(stream.period_distributions);
  return result;
}

std::vector<std::pair<std::string, std::string>> RunConfig::entries() const {
  using text::format_double;
  std::string hidden_str;
  for (std::size_t i = 0; i < hidden.size(); ++i)
    hidden_str += (i ? "," : "") + std::to_string(hidden[i]);
  return {
      {"method", method_name(method)},
      {"seed", std::to_string(seed)},
      {"data_csv", data_csv},
      {"csv_header", csv_header ? "true" : "false"},
      {"classes", std::to_string(classes)},
      {"dim", std::to_string(dim)},
      {"train_per_class", std::to_string(train_per_class)},
      {"test_per_class", std::to_string(test_per_class)},
      {"separation", format_double(separation)},
      {"hidden", hidden_str},
      {"pretrain_epochs", std::to_string(pretrain_epochs)},
      {"checkpoint", checkpoint},
      {"manifest", manifest},
      {"gamma", format_double(gamma)},
      {"segments", std::to_string(segments)},
      {"periods_per_segment", std::to_string(periods_per_segment)},
      {"batches_per_period", std::to_string(batches_per_period)},
      {"severity", format_double(severity)},
      {"batch_size", std::to_string(batch_size)},
      {"bank_capacity", std::to_string(bank_capacity)},
      {"alpha", format_double(alpha)},
      {"nu", format_double(nu)},
      {"lambda_batch", format_double(lambda_batch)},
      {"lambda_re", format_double(lambda_re)},
      {"lr", format_double(lr)},
      {"weak_noise", format_double(weak_noise)},
      {"strong_noise", format_double(strong_noise)},
      {"p_drop", format_double(p_drop)},
      {"affinity", affinity},
      {"knn_k", std::to_string(knn_k)},
      {"rbf_sigma", format_double(rbf_sigma)},
      {"fixed_lambda", format_double(fixed_lambda)},
      {"no_refine", no_refine ? "true" : "false"},
  };
}

double pooled_feature_std(const Matrix &features) {
  const std::size_t n = features.rows(), d = features.cols();
  if (n == 0 || d == 0)
    throw EmptyDataset("pooled_feature_std: no data");
  Vector mean = column_sums(features);
  for (double &m : mean)
    m /= static_cast<double>(n);
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      double c = features(i, j) - mean[j];
      var += c * c;
    }
  return std::sqrt(var / static_cast<double>(n * d));
}

RunOptions make_run_options(const RunConfig &config, double feature_std) {
  RunOptions o;
  o.adapt.lambda_batch = config.lambda_batch;
  o.adapt.lambda_re = config.lambda_re;
  o.adapt.nu = config.nu;
  o.adapt.batch_size = config.batch_size;
  o.adapt.sigma_w = config.weak_noise * feature_std;
  o.adapt.sigma_s = config.strong_noise * feature_std;
  o.adapt.p_drop = config.p_drop;
  o.adapt.bank_capacity = config.bank_capacity;
  o.adapt.adam.lr = config.lr;
  o.adapt.validate();
  if (config.affinity == "knn")
    o.affinity.kind = AffinityKind::Knn;
  else if (config.affinity == "rbf")
    o.affinity.kind = AffinityKind::Rbf;
  else
    throw ConfigError("affinity must be knn or rbf, got '" + config.affinity + "'");
  if (config.knn_k < 1)
    throw ConfigError("knn_k must be >= 1");
  if (!(config.rbf_sigma > 0.0))
    throw ConfigError("rbf_sigma must be > 0");
  if (!(config.fixed_lambda >= 0.0 && config.fixed_lambda < 1.0))
    throw ConfigError("fixed_lambda must be in [0, 1)");
  o.affinity.k = config.knn_k;
  o.affinity.sigma_rbf = config.rbf_sigma;
  o.fixed_lambda = config.fixed_lambda;
  o.baseline_adam.lr = config.lr;
  o.disable_refinement = config.no_refine;
  o.seed = mix_seed(config.seed, 13);
  return o;
}

Experiment prepare_experiment(const RunConfig &config) {
  if (!(config.alpha > 0.0 && config.alpha <= 1.0))
    throw ConfigError("alpha must be in (0, 1]");
  if (config.batch_size < 1)
    throw ConfigError("batch_size must be >= 1");
  Experiment ex;

  if (config.data_csv.empty()) {
    if (config.train_per_class < 1 || config.test_per_class < 1)
      throw ConfigError("train_per_class and test_per_class must be >= 1");
    BaseDataset all =
        synth_gaussians(config.classes, config.dim,
                        config.train_per_class + config.test_per_class,
                        config.separation, mix_seed(config.seed, 10));
    // rows are interleaved by class, so a prefix split keeps every class
    std::vector<std::size_t> train_rows(config.train_per_class * config.classes);
    std::vector<std::size_t> test_rows(all.features.rows() - train_rows.size());
    std::iota(train_rows.begin(), train_rows.end(), std::size_t{0});
    std::iota(test_rows.begin(), test_rows.end(), train_rows.size());
    ex.train = all.subset(train_rows);
    ex.test = all.subset(test_rows);
  } else {
    BaseDataset all = ingest_csv(config.data_csv, config.csv_header);
    std::vector<std::vector<std::size_t>> pools = all.class_pools();
    RandomSource rng(mix_seed(config.seed, 10));
    std::vector<std::size_t> train_rows, test_rows;
    for (auto &pool : pools) {
      for (std::size_t i = pool.size(); i > 1; --i)
        std::swap(pool[i - 1], pool[rng.index(i)]);
      // classes with a single row serve both splits
      std::size_t n_train = pool.size() == 1 ? 1 : pool.size() / 2;
      train_rows.insert(train_rows.end(), pool.begin(), pool.begin() + n_train);
      if (pool.size() == 1)
        test_rows.push_back(pool[0]);
      else
        test_rows.insert(test_rows.end(), pool.begin() + n_train, pool.end());
    }
    std::sort(train_rows.begin(), train_rows.end());
    std::sort(test_rows.begin(), test_rows.end());
    ex.train = all.subset(train_rows);
    ex.test = all.subset(test_rows);
  }
  const std::size_t dim = ex.train.features.cols();
  const std::size_t classes = ex.train.num_classes;

  if (!config.checkpoint.empty()) {
    ex.source = load_checkpoint(config.checkpoint);
    if (ex.source.config().input_dim != dim || ex.source.config().num_classes != classes)
      throw ConfigError("checkpoint shape does not match the dataset");
  } else {
    ModelConfig mc{dim, config.hidden, classes};
    mc.validate();
    PretrainOptions po;
    po.epochs = config.pretrain_epochs;
    po.batch_size = config.batch_size;
    RandomSource rng(mix_seed(config.seed, 11));
    ex.source = pretrain_source(mc, ex.train.features, ex.train.labels, po, rng);
  }
  for (auto &block : ex.source.blocks())
    block.norm.alpha = config.alpha;

  if (!config.manifest.empty()) {
    StreamManifest m = load_manifest(config.manifest);
    if (m.input_dim != dim || m.num_classes != classes)
      throw ConfigError("manifest shape does not match the dataset");
    ex.stream = replay_manifest(ex.test, m);
  } else {
    StreamConfig sc;
    sc.segments =
        default_segments(dim, config.segments, mix_seed(config.seed, 14), config.severity);
    sc.periods_per_segment = config.periods_per_segment;
    sc.batches_per_period = config.batches_per_period;
    sc.batch_size = config.batch_size;
    sc.gamma = config.gamma;
    sc.seed = mix_seed(config.seed, 12);
    ex.stream = generate_stream(ex.test, sc);
  }
  ex.feature_std = pooled_feature_std(ex.train.features);
  return ex;
}

RunResult run(const RunConfig &config, const Experiment &experiment) {
  RunResult r = run_stream(config.method, experiment.source, experiment.stream,
                           make_run_options(config, experiment.feature_std));
  r.seed = config.seed;
  if (!config.output.empty())
    write_results(r, config, config.output);
  return r;
}

RunResult run(const RunConfig &config) {
  return run(config, prepare_experiment(config));
}

} // namespace grotta
