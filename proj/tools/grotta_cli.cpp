#include "grotta/checkpoint.hpp"
#include "grotta/errors.hpp"
#include "grotta/harness.hpp"
#include "grotta/output_adaptation.hpp"
#include "grotta/pretrain.hpp"
#include "grotta/streamgen.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace grotta;

namespace {

void add_data_flags(CLI::App *app, RunConfig &c) {
  app->add_option("--seed", c.seed, "Master seed")->capture_default_str();
  app->add_option("--data_csv", c.data_csv, "Feature CSV (last column = label); synthetic data when unset");
  app->add_flag("--csv_header", c.csv_header, "CSV has a header row");
  app->add_option("--classes", c.classes, "Synthetic class count")->capture_default_str();
  app->add_option("--dim", c.dim, "Synthetic feature dimension")->capture_default_str();
  app->add_option("--train_per_class", c.train_per_class)->capture_default_str();
  app->add_option("--test_per_class", c.test_per_class)->capture_default_str();
  app->add_option("--separation", c.separation, "Closest class-mean distance")->capture_default_str();
}

void add_model_flags(CLI::App *app, RunConfig &c) {
  app->add_option("--hidden", c.hidden, "Hidden widths")->delimiter(',')->capture_default_str();
  app->add_option("--pretrain_epochs", c.pretrain_epochs)->capture_default_str();
  app->add_option("--batch_size", c.batch_size, "Batch size B")->capture_default_str();
}

void add_stream_flags(CLI::App *app, RunConfig &c) {
  app->add_option("--gamma", c.gamma, "Dirichlet concentration")->capture_default_str();
  app->add_option("--segments", c.segments)->capture_default_str();
  app->add_option("--periods_per_segment", c.periods_per_segment)->capture_default_str();
  app->add_option("--batches_per_period", c.batches_per_period)->capture_default_str();
  app->add_option("--severity", c.severity, "Covariate shift strength")->capture_default_str();
}

void add_adapt_flags(CLI::App *app, RunConfig &c, std::string &method) {
  app->add_option("--method", method,
                  "grotta|source|bn_stat|pl|tent|output_only|ablation_a..ablation_e")
      ->capture_default_str();
  app->add_option("--checkpoint", c.checkpoint, "Source checkpoint (pretrain when unset)");
  app->add_option("--manifest", c.manifest, "Stream manifest to replay");
  app->add_option("--bank_capacity", c.bank_capacity, "Memory bank size N")->capture_default_str();
  app->add_option("--alpha", c.alpha, "Global statistics EMA rate")->capture_default_str();
  app->add_option("--nu", c.nu, "Teacher EMA rate")->capture_default_str();
  app->add_option("--lambda_batch", c.lambda_batch)->capture_default_str();
  app->add_option("--lambda_re", c.lambda_re)->capture_default_str();
  app->add_option("--lr", c.lr, "Adam learning rate")->capture_default_str();
  app->add_option("--weak_noise", c.weak_noise, "Weak view noise / feature std")->capture_default_str();
  app->add_option("--strong_noise", c.strong_noise, "Strong view noise / feature std")->capture_default_str();
  app->add_option("--p_drop", c.p_drop)->capture_default_str();
  app->add_option("--affinity", c.affinity, "knn|rbf")->capture_default_str();
  app->add_option("--knn_k", c.knn_k)->capture_default_str();
  app->add_option("--rbf_sigma", c.rbf_sigma)->capture_default_str();
  app->add_option("--fixed_lambda", c.fixed_lambda, "Lambda for ablation_e")->capture_default_str();
  app->add_flag("--no_refine", c.no_refine, "Disable output refinement");
  app->add_option("--output", c.output, "Result file prefix");
}

Matrix read_matrix(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw IoError("cannot read " + path);
  std::vector<Vector> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty() || line[0] == '#')
      continue;
    for (char &ch : line)
      if (ch == ',' || ch == '\t')
        ch = ' ';
    std::istringstream ss(line);
    Vector row;
    std::string tok;
    while (ss >> tok) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(tok, &used));
        if (used != tok.size())
          throw std::invalid_argument(tok);
      } catch (const std::logic_error &) {
        throw ParseError(path + ":" + std::to_string(lineno) + ": bad number '" + tok + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw ParseError(path + ":" + std::to_string(lineno) + ": ragged row");
    rows.push_back(std::move(row));
  }
  if (rows.empty())
    throw EmptyFile(path + ": no rows");
  return Matrix::from_rows(rows);
}

void write_matrix(const Matrix &m, const std::string &path) {
  std::ofstream out(path);
  if (!out)
    throw IoError("cannot write " + path);
  out << std::setprecision(17);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j)
      out << (j ? "," : "") << m(i, j);
    out << '\n';
  }
}

std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Expands "--config FILE" into "--key=value" arguments placed right after
// the subcommand, so flags given on the command line still win. Keys owned
// only by other subcommands are skipped; keys nobody owns are errors.
std::vector<std::string> expand_config(int argc, char **argv, const CLI::App &app) {
  std::vector<std::string> args(argv, argv + argc);
  std::string path;
  std::size_t at = 0;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      args.erase(args.begin() + i, args.begin() + i + 2);
      at = i;
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + i);
      at = i;
      break;
    }
  }
  if (path.empty())
    return args;
  std::ifstream in(path);
  if (!in)
    throw IoError("cannot read config " + path);
  std::size_t sub = 1;
  while (sub < at && sub < args.size() && args[sub].rfind("-", 0) == 0)
    ++sub;
  const CLI::App *target = nullptr;
  if (sub < args.size())
    for (const CLI::App *s : app.get_subcommands({}))
      if (s->get_name() == args[sub])
        target = s;
  if (target == nullptr)
    return args;
  auto owns = [](const CLI::App *s, const std::string &key) {
    return s->get_option_no_throw("--" + key) != nullptr;
  };
  std::vector<std::string> extra;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty())
      continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError(path + ":" + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    if (!owns(target, key)) {
      bool elsewhere = false;
      for (const CLI::App *s : app.get_subcommands({}))
        elsewhere = elsewhere || owns(s, key);
      if (!elsewhere)
        throw ConfigError(path + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
      continue;
    }
    bool overridden = false;
    for (const auto &a : args)
      if (a == "--" + key || a.rfind("--" + key + "=", 0) == 0)
        overridden = true;
    if (!overridden)
      extra.push_back("--" + key + "=" + trim(line.substr(eq + 1)));
  }
  args.insert(args.begin() + static_cast<std::ptrdiff_t>(std::min(sub + 1, args.size())),
              extra.begin(), extra.end());
  return args;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Test-time adaptation under continual covariate and label shift"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::string method = "grotta";
  std::string out_path;

  auto *pretrain = app.add_subcommand("pretrain", "Train a source model and save a checkpoint");
  pretrain->add_option("--config", "key=value config file; command-line flags take precedence");
  add_data_flags(pretrain, cfg);
  add_model_flags(pretrain, cfg);
  pretrain->add_option("--out", out_path, "Checkpoint path")->required();

  auto *gen = app.add_subcommand("gen-stream", "Generate a test stream manifest");
  gen->add_option("--config", "key=value config file; command-line flags take precedence");
  add_data_flags(gen, cfg);
  gen->add_option("--batch_size", cfg.batch_size)->capture_default_str();
  add_stream_flags(gen, cfg);
  gen->add_option("--out", out_path, "Manifest path")->required();

  auto *run = app.add_subcommand("run", "Run one method over a stream and write results");
  run->add_option("--config", "key=value config file; command-line flags take precedence");
  add_data_flags(run, cfg);
  add_model_flags(run, cfg);
  add_stream_flags(run, cfg);
  add_adapt_flags(run, cfg, method);

  std::string pred_path, feat_path, aff = "knn";
  std::size_t k = 5;
  double sigma = 1.0;
  double fixed = -1.0;
  auto *rf = app.add_subcommand("refine-file", "Refine one batch of predictions");
  rf->add_option("--config", "key=value config file; command-line flags take precedence");
  rf->add_option("--predictions", pred_path, "B x C probabilities, comma/space separated")->required();
  rf->add_option("--features", feat_path, "B x d features")->required();
  rf->add_option("--out", out_path, "Refined B x C predictions")->required();
  rf->add_option("--affinity", aff, "knn|rbf")->capture_default_str();
  rf->add_option("--knn_k", k)->capture_default_str();
  rf->add_option("--rbf_sigma", sigma)->capture_default_str();
  rf->add_option("--fixed_lambda", fixed, "Fixed lambda without reweighting (off when < 0)");

  std::vector<std::string> args;
  try {
    args = expand_config(argc, argv, app);
  } catch (const grotta::Error &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  std::vector<std::string> rest(args.rbegin(), args.rend() - 1);
  try {
    app.parse(rest);
  } catch (const CLI::ParseError &e) {
    return app.exit(e);
  }

  try {
    if (*pretrain) {
      Experiment ex = prepare_experiment(cfg);
      save_checkpoint(ex.source, out_path);
      std::cout << "source accuracy (train) " << accuracy(ex.source, ex.train.features, ex.train.labels)
                << "\nsource accuracy (test) " << accuracy(ex.source, ex.test.features, ex.test.labels)
                << "\ncheckpoint " << out_path << '\n';
    } else if (*gen) {
      cfg.pretrain_epochs = 0;
      cfg.hidden = {1};
      Experiment ex = prepare_experiment(cfg);
      save_manifest(ex.stream, out_path);
      std::cout << "batches " << ex.stream.batches.size() << "\nid "
                << id_metric(ex.stream.period_distributions) << "\nmanifest " << out_path << '\n';
    } else if (*run) {
      cfg.method = parse_method(method);
      RunResult r = grotta::run(cfg);
      std::cout << "method " << r.method << "\nfinal_error " << r.final_error << "\nmean_zeta "
                << r.mean_zeta << "\nid " << r.id << "\ncd " << r.cd << '\n';
    } else if (*rf) {
      Matrix p = read_matrix(pred_path);
      Matrix f = read_matrix(feat_path);
      if (p.rows() != f.rows())
        throw ShapeMismatch("predictions and features have different row counts");
      RefineOptions ro;
      if (aff == "knn")
        ro.affinity.kind = AffinityKind::Knn;
      else if (aff == "rbf")
        ro.affinity.kind = AffinityKind::Rbf;
      else
        throw ConfigError("affinity must be knn or rbf");
      ro.affinity.k = k;
      ro.affinity.sigma_rbf = sigma;
      if (fixed >= 0.0)
        ro.fixed_lambda = fixed;
      RefinementResult r = refine(p, f, ro);
      write_matrix(r.z_final, out_path);
      std::cout << "zeta " << r.zeta << "\nlambda " << r.lambda << '\n';
    }
  } catch (const grotta::Error &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
