#include "sgtmle/trial_data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sgtmle {

namespace {

std::string upper(std::string v) {
  std::transform(v.begin(), v.end(), v.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return v;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    // trim whitespace and a trailing \r
    auto b = cell.find_first_not_of(" \t\r");
    auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

double parse_cell(const std::string& cell, std::size_t row, const std::string& col,
                  const std::string& origin) {
  double v;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end) {
    throw std::runtime_error(origin + ": non-numeric cell '" + cell + "' at row " +
                             std::to_string(row) + ", column " + col);
  }
  return v;
}

std::string format_value(double v) {
  // shortest round-trip representation
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace

void validate(const TrialDataset& data, bool require_both_strata) {
  const auto n = data.n();
  if (n < 20) throw std::runtime_error("dataset too small: n = " + std::to_string(n) + " < 20");
  if (data.a.size() != n || data.y.size() != n || data.w.rows() != n)
    throw std::runtime_error("dataset columns have inconsistent lengths");
  if (static_cast<Eigen::Index>(data.covariate_names.size()) != data.w.cols())
    throw std::runtime_error("covariate_names length does not match covariate dimension");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (data.s[i] != 0.0 && data.s[i] != 1.0)
      throw std::runtime_error("S value outside {0,1} at row " + std::to_string(i + 1));
    if (data.a[i] != 0.0 && data.a[i] != 1.0)
      throw std::runtime_error("A value outside {0,1} at row " + std::to_string(i + 1));
    if (!(data.y[i] >= 0.0 && data.y[i] <= 1.0))
      throw std::runtime_error("Y value outside [0,1] at row " + std::to_string(i + 1));
    for (Eigen::Index j = 0; j < data.w.cols(); ++j) {
      if (!std::isfinite(data.w(i, j)))
        throw std::runtime_error("missing or non-finite covariate at row " +
                                 std::to_string(i + 1) + ", column " + data.covariate_names[j]);
    }
  }
  const double na1 = data.a.sum();
  if (na1 == 0.0 || na1 == static_cast<double>(n))
    throw std::runtime_error("dataset must contain both treatment arms");
  if (require_both_strata) {
    const double ns1 = data.s.sum();
    if (ns1 == 0.0 || ns1 == static_cast<double>(n))
      throw std::runtime_error("borrowing estimators require rows with S=1 and S=0");
  }
}

TrialDataset parse_csv(const std::string& text, const std::string& origin) {
  std::stringstream ss(text);
  std::string line;
  if (!std::getline(ss, line)) throw std::runtime_error(origin + ": empty file");
  const auto header = split_line(line);

  int s_col = -1, a_col = -1, y_col = -1;
  std::vector<int> w_cols;
  std::vector<std::string> names;
  for (std::size_t j = 0; j < header.size(); ++j) {
    const std::string u = upper(header[j]);
    if (u == "S" && s_col < 0) s_col = static_cast<int>(j);
    else if (u == "A" && a_col < 0) a_col = static_cast<int>(j);
    else if (u == "Y" && y_col < 0) y_col = static_cast<int>(j);
    else {
      w_cols.push_back(static_cast<int>(j));
      names.push_back(header[j]);
    }
  }
  if (s_col < 0) throw std::runtime_error(origin + ": missing required column S");
  if (a_col < 0) throw std::runtime_error(origin + ": missing required column A");
  if (y_col < 0) throw std::runtime_error(origin + ": missing required column Y");

  std::vector<std::vector<double>> rows;
  std::size_t row = 1;
  while (std::getline(ss, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_line(line);
    if (cells.size() != header.size())
      throw std::runtime_error(origin + ": row " + std::to_string(row) + " has " +
                               std::to_string(cells.size()) + " cells, expected " +
                               std::to_string(header.size()));
    std::vector<double> vals(cells.size());
    for (std::size_t j = 0; j < cells.size(); ++j)
      vals[j] = parse_cell(cells[j], row, header[j], origin);
    const double s = vals[static_cast<std::size_t>(s_col)];
    const double a = vals[static_cast<std::size_t>(a_col)];
    const double y = vals[static_cast<std::size_t>(y_col)];
    if (s != 0.0 && s != 1.0)
      throw std::runtime_error(origin + ": S value outside {0,1} at row " +
                               std::to_string(row) + ", column " + header[s_col]);
    if (a != 0.0 && a != 1.0)
      throw std::runtime_error(origin + ": A value outside {0,1} at row " +
                               std::to_string(row) + ", column " + header[a_col]);
    if (!(y >= 0.0 && y <= 1.0))
      throw std::runtime_error(origin + ": Y value outside [0,1] at row " +
                               std::to_string(row) + ", column " + header[y_col]);
    rows.push_back(std::move(vals));
  }

  TrialDataset data;
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto d = static_cast<Eigen::Index>(w_cols.size());
  data.s.resize(n);
  data.a.resize(n);
  data.y.resize(n);
  data.w.resize(n, d);
  data.covariate_names = std::move(names);
  for (Eigen::Index i = 0; i < n; ++i) {
    data.s[i] = rows[i][static_cast<std::size_t>(s_col)];
    data.a[i] = rows[i][static_cast<std::size_t>(a_col)];
    data.y[i] = rows[i][static_cast<std::size_t>(y_col)];
    for (Eigen::Index j = 0; j < d; ++j)
      data.w(i, j) = rows[i][static_cast<std::size_t>(w_cols[static_cast<std::size_t>(j)])];
  }
  return data;
}

TrialDataset load_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), path);
}

std::string to_csv(const TrialDataset& data) {
  std::string out = "S,A,Y";
  for (const auto& name : data.covariate_names) out += "," + name;
  out += "\n";
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    out += format_value(data.s[i]);
    out += ",";
    out += format_value(data.a[i]);
    out += ",";
    out += format_value(data.y[i]);
    for (Eigen::Index j = 0; j < data.w.cols(); ++j) {
      out += ",";
      out += format_value(data.w(i, j));
    }
    out += "\n";
  }
  return out;
}

void write_csv(const TrialDataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open file for writing: " + path);
  out << to_csv(data);
}

SubgroupCounts subgroup_counts(const TrialDataset& data) {
  SubgroupCounts c;
  c.n = static_cast<long>(data.n());
  c.n1 = static_cast<long>(std::lround(data.s.sum()));
  c.n0 = c.n - c.n1;
  c.p_s = static_cast<double>(c.n1) / static_cast<double>(c.n);
  return c;
}

TrialDataset subgroup_rows(const TrialDataset& data) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < data.n(); ++i)
    if (data.s[i] == 1.0) keep.push_back(i);
  TrialDataset out;
  const auto m = static_cast<Eigen::Index>(keep.size());
  out.s.resize(m);
  out.a.resize(m);
  out.y.resize(m);
  out.w.resize(m, data.w.cols());
  out.covariate_names = data.covariate_names;
  for (Eigen::Index k = 0; k < m; ++k) {
    out.s[k] = 1.0;
    out.a[k] = data.a[keep[static_cast<std::size_t>(k)]];
    out.y[k] = data.y[keep[static_cast<std::size_t>(k)]];
    out.w.row(k) = data.w.row(keep[static_cast<std::size_t>(k)]);
  }
  return out;
}

}  // namespace sgtmle
