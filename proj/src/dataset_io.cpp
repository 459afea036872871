#include "grotta/errors.hpp"
#include "grotta/streamgen.hpp"
#include "text_format.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <string>

namespace grotta {

BaseDataset ingest_csv(const std::filesystem::path &path, bool has_header) {
  std::ifstream in(path);
  if (!in)
    throw IoError("cannot open " + path.string());

  std::vector<Vector> rows;
  std::vector<long long> raw_labels;
  std::size_t width = 0;
  std::string line;
  std::size_t line_no = 0;
  bool header_pending = has_header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos)
      continue;
    if (header_pending) {
      header_pending = false;
      continue;
    }
    const auto cells = text::split(line, ',');
    const std::string where = path.filename().string() + ":" + std::to_string(line_no);
    if (cells.size() < 2)
      throw ParseError(where + ": need at least one feature and a label");
    if (width == 0)
      width = cells.size();
    else if (cells.size() != width)
      throw ParseError(where + ": expected " + std::to_string(width) +
                       " columns, found " + std::to_string(cells.size()));
    Vector x(cells.size() - 1);
    for (std::size_t c = 0; c + 1 < cells.size(); ++c)
      if (!text::try_parse_double(cells[c], x[c]))
        throw NonNumericFeature(where + " column " + std::to_string(c + 1) + ": '" +
                                std::string(cells[c]) + "'");
    raw_labels.push_back(text::parse_int<long long>(cells.back(), where + " label"));
    rows.push_back(std::move(x));
  }
  if (rows.empty())
    throw EmptyFile(path.string() + " has no data rows");

  std::map<long long, std::size_t> dense;
  for (long long v : raw_labels)
    dense.emplace(v, 0);
  BaseDataset ds;
  for (auto &[value, index] : dense) {
    index = ds.class_values.size();
    ds.class_values.push_back(value);
  }
  ds.num_classes = dense.size();
  ds.features = Matrix::from_rows(rows);
  ds.labels.reserve(raw_labels.size());
  for (long long v : raw_labels)
    ds.labels.push_back(dense.at(v));
  return ds;
}

} // namespace grotta
