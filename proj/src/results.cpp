#include "grotta/errors.hpp"
#include "grotta/harness.hpp"
#include "text_format.hpp"

#include <fstream>

namespace grotta {

namespace {

std::string join(const std::vector<std::size_t> &v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i)
      s += ' ';
    s += std::to_string(v[i]);
  }
  return s;
}

std::ofstream open_out(const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw IoError("cannot write " + path.string());
  return out;
}

} // namespace

void write_results(const RunResult &result, const RunConfig &config,
                   const std::filesystem::path &prefix) {
  using text::format_double;
  const std::filesystem::path trace = prefix.string() + ".trace.csv";
  const std::filesystem::path summary = prefix.string() + ".summary.txt";
  if (prefix.has_parent_path())
    std::filesystem::create_directories(prefix.parent_path());

  std::ofstream t = open_out(trace);
  t << "step,segment,period,predicted,refined,correct,zeta,accumulated_accuracy\n";
  for (const StepRecord &r : result.steps)
    t << r.step << ',' << r.segment << ',' << r.period << ',' << join(r.predicted) << ','
      << join(r.refined) << ',' << r.correct << ',' << format_double(r.zeta) << ','
      << format_double(r.accumulated_accuracy) << '\n';
  if (!t)
    throw IoError("write failed: " + trace.string());

  std::ofstream s = open_out(summary);
  s << "method=" << result.method << '\n';
  s << "seed=" << result.seed << '\n';
  s << "steps=" << result.steps.size() << '\n';
  s << "batch_size=" << result.batch_size << '\n';
  s << "final_error=" << format_double(result.final_error) << '\n';
  s << "id=" << format_double(result.id) << '\n';
  s << "cd=" << format_double(result.cd) << '\n';
  s << "mean_zeta=" << format_double(result.mean_zeta) << '\n';
  s << "segments=" << result.segment_error.size() << '\n';
  for (std::size_t i = 0; i < result.segment_error.size(); ++i)
    s << "segment_error." << i << '=' << format_double(result.segment_error[i]) << '\n';
  for (const auto &[k, v] : config.entries())
    s << "config." << k << '=' << v << '\n';
  if (!s)
    throw IoError("write failed: " + summary.string());
}

std::map<std::string, std::string> read_summary(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw IoError("cannot read " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty())
      continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": missing '='");
    out[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return out;
}

} // namespace grotta
