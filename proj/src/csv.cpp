#include "fairaudit/csv.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace fairaudit {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) {
      cell.pop_back();
    }
    std::size_t b = 0;
    while (b < cell.size() && cell[b] == ' ') ++b;
    out.push_back(cell.substr(b));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& cell, const std::string& col, int row) {
  double v = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end) {
    throw std::runtime_error("unparseable numeric cell '" + cell +
                             "' in column '" + col + "', data row " +
                             std::to_string(row));
  }
  return v;
}

int parse_binary(const std::string& cell, const std::string& col, int row) {
  const double v = parse_number(cell, col, row);
  if (v != 0.0 && v != 1.0) {
    throw std::runtime_error("non-binary value '" + cell + "' in column '" +
                             col + "', data row " + std::to_string(row));
  }
  return static_cast<int>(v);
}

struct RawTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

RawTable read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  RawTable t;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("no data rows: " + path);
  t.header = split_line(line);
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto cells = split_line(line);
    if (cells.size() != t.header.size()) {
      throw std::runtime_error("row " + std::to_string(t.rows.size() + 1) +
                               " has " + std::to_string(cells.size()) +
                               " cells, header has " +
                               std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(cells));
  }
  if (t.rows.empty()) throw std::runtime_error("no data rows: " + path);
  return t;
}

int column_index(const RawTable& t, const std::string& name) {
  auto it = std::find(t.header.begin(), t.header.end(), name);
  if (it == t.header.end()) {
    throw std::runtime_error("missing column '" + name + "'");
  }
  return static_cast<int>(it - t.header.begin());
}

struct ParsedColumns {
  Dataset data;
  Eigen::VectorXd weights;  // empty unless requested
};

ParsedColumns parse_table(const RawTable& t, const CsvSchema& schema,
                          bool want_weights) {
  const int si = column_index(t, schema.s_col);
  const int yi = column_index(t, schema.yhat_col);
  const int ti = schema.y_col ? column_index(t, *schema.y_col) : -1;
  const int li = schema.logit_col ? column_index(t, *schema.logit_col) : -1;
  int wi = -1;
  if (want_weights) {
    wi = column_index(t, schema.weight_col.value_or("weight"));
  }

  std::vector<int> feat;
  if (!schema.feature_cols.empty()) {
    for (const auto& name : schema.feature_cols) {
      feat.push_back(column_index(t, name));
    }
  } else {
    for (int c = 0; c < static_cast<int>(t.header.size()); ++c) {
      if (c == si || c == yi || c == ti || c == li || c == wi) continue;
      feat.push_back(c);
    }
  }

  const int n = static_cast<int>(t.rows.size());
  const int d = static_cast<int>(feat.size());
  ParsedColumns out;
  out.data.X.resize(n, d);
  out.data.S.resize(n);
  out.data.Yhat.resize(n);
  if (ti >= 0) out.data.Y = Eigen::VectorXi(n);
  if (li >= 0) out.data.logits = Eigen::VectorXd(n);
  if (wi >= 0) out.weights.resize(n);
  for (int c = 0; c < d; ++c) {
    out.data.feature_names.push_back(t.header[static_cast<std::size_t>(feat[c])]);
  }

  for (int r = 0; r < n; ++r) {
    const auto& cells = t.rows[static_cast<std::size_t>(r)];
    const int row1 = r + 1;
    out.data.S[r] = parse_binary(cells[si], schema.s_col, row1);
    out.data.Yhat[r] = parse_binary(cells[yi], schema.yhat_col, row1);
    if (ti >= 0) (*out.data.Y)[r] = parse_binary(cells[ti], *schema.y_col, row1);
    if (li >= 0) {
      (*out.data.logits)[r] = parse_number(cells[li], *schema.logit_col, row1);
    }
    if (wi >= 0) out.weights[r] = parse_number(cells[wi], "weight", row1);
    for (int c = 0; c < d; ++c) {
      out.data.X(r, c) = parse_number(cells[static_cast<std::size_t>(feat[c])],
                                      out.data.feature_names[c], row1);
    }
  }
  out.data.validate();
  return out;
}

void write_header(std::ostream& os, const Dataset& data, bool weighted) {
  for (std::size_t c = 0; c < data.feature_names.size(); ++c) {
    os << data.feature_names[c] << ',';
  }
  os << "s,yhat";
  if (data.Y) os << ",y";
  if (data.logits) os << ",logit";
  if (weighted) os << ",weight";
  os << '\n';
}

void write_rows(std::ostream& os, const Dataset& data,
                const Eigen::VectorXd* weights) {
  os << std::setprecision(17);
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    for (Eigen::Index c = 0; c < data.X.cols(); ++c) os << data.X(r, c) << ',';
    os << data.S[r] << ',' << data.Yhat[r];
    if (data.Y) os << ',' << (*data.Y)[r];
    if (data.logits) os << ',' << (*data.logits)[r];
    if (weights) os << ',' << (*weights)[r];
    os << '\n';
  }
}

}  // namespace

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
  return parse_table(read_table(path), schema, false).data;
}

WeightedDistribution load_weighted_csv(const std::string& path,
                                       const CsvSchema& schema) {
  auto parsed = parse_table(read_table(path), schema, true);
  const double total = parsed.weights.sum();
  if (!(total > 0.0)) throw std::runtime_error("weights sum to zero");
  WeightedDistribution dist;
  dist.base = std::move(parsed.data);
  dist.weights = parsed.weights / total;
  dist.validate();
  return dist;
}

void save_csv(const std::string& path, const Dataset& data) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write file: " + path);
  write_header(os, data, false);
  write_rows(os, data, nullptr);
}

void save_csv(const std::string& path, const WeightedDistribution& dist) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write file: " + path);
  write_header(os, dist.base, true);
  write_rows(os, dist.base, &dist.weights);
}

}  // namespace fairaudit
