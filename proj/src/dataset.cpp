#include "fmcpe/dataset.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace fmcpe {

void PairDataset::push(Vec t, Vec o) {
  theta.push_back(std::move(t));
  obs.push_back(std::move(o));
}

void PairDataset::validate() const {
  if (theta.size() != obs.size()) {
    throw std::runtime_error("PairDataset: theta/obs row counts differ");
  }
  const int p = theta_dim();
  const int d = obs_dim();
  for (size_t i = 0; i < theta.size(); ++i) {
    if (static_cast<int>(theta[i].size()) != p || static_cast<int>(obs[i].size()) != d) {
      throw std::runtime_error("PairDataset: inconsistent dimensions at row " + std::to_string(i));
    }
    if (!all_finite(theta[i]) || !all_finite(obs[i])) {
      throw std::runtime_error("PairDataset: non-finite value at row " + std::to_string(i));
    }
  }
}

PairDataset PairDataset::take(const std::vector<int>& indices) const {
  PairDataset out;
  out.provenance = provenance;
  out.theta.reserve(indices.size());
  out.obs.reserve(indices.size());
  for (int i : indices) {
    if (i < 0 || i >= size()) {
      throw std::out_of_range("PairDataset::take: index " + std::to_string(i) + " out of range");
    }
    out.theta.push_back(theta[static_cast<size_t>(i)]);
    out.obs.push_back(obs[static_cast<size_t>(i)]);
  }
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  size_t start = 0;
  for (;;) {
    size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  // Tolerate trailing \r from CRLF files.
  if (!fields.empty() && !fields.back().empty() && fields.back().back() == '\r') {
    fields.back().pop_back();
  }
  return fields;
}

double parse_double(const std::string& token, const std::string& path, size_t line_no) {
  double value = 0.0;
  const char* begin = token.data();
  const char* end = begin + token.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw std::runtime_error(path + ": line " + std::to_string(line_no) +
                             ": non-numeric token '" + token + "'");
  }
  return value;
}

}  // namespace

PairDataset ingest_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("ingest_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  std::vector<std::string> header = split_csv_line(line);
  int p = 0, d = 0;
  size_t col = 0;
  while (col < header.size() && header[col] == "theta_" + std::to_string(col)) ++col;
  p = static_cast<int>(col);
  while (col < header.size() &&
         header[col] == "obs_" + std::to_string(col - static_cast<size_t>(p))) {
    ++col;
  }
  d = static_cast<int>(col) - p;
  if (p == 0 || d == 0 || col != header.size()) {
    throw std::runtime_error(path + ": line 1: header must be theta_0..theta_{p-1},obs_0..obs_{d-1}");
  }

  PairDataset ds;
  ds.provenance = Provenance::kIngested;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
    std::vector<std::string> fields = split_csv_line(line);
    if (static_cast<int>(fields.size()) != p + d) {
      throw std::runtime_error(path + ": line " + std::to_string(line_no) + ": expected " +
                               std::to_string(p + d) + " fields, got " +
                               std::to_string(fields.size()));
    }
    Vec theta(static_cast<size_t>(p)), obs(static_cast<size_t>(d));
    for (int j = 0; j < p; ++j) theta[static_cast<size_t>(j)] = parse_double(fields[static_cast<size_t>(j)], path, line_no);
    for (int j = 0; j < d; ++j) {
      obs[static_cast<size_t>(j)] = parse_double(fields[static_cast<size_t>(p + j)], path, line_no);
    }
    ds.push(std::move(theta), std::move(obs));
  }
  if (ds.size() == 0) throw std::runtime_error(path + ": no data rows");
  ds.validate();
  return ds;
}

void export_csv(const PairDataset& ds, const std::string& path) {
  ds.validate();
  if (ds.size() == 0) throw std::runtime_error("export_csv: refusing to write empty dataset");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("export_csv: cannot open " + path + " for writing");
  const int p = ds.theta_dim();
  const int d = ds.obs_dim();
  for (int j = 0; j < p; ++j) out << (j ? "," : "") << "theta_" << j;
  for (int j = 0; j < d; ++j) out << ",obs_" << j;
  out << "\n";
  char buf[64];
  for (int i = 0; i < ds.size(); ++i) {
    for (int j = 0; j < p; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", ds.theta[static_cast<size_t>(i)][static_cast<size_t>(j)]);
      out << (j ? "," : "") << buf;
    }
    for (int j = 0; j < d; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", ds.obs[static_cast<size_t>(i)][static_cast<size_t>(j)]);
      out << ',' << buf;
    }
    out << "\n";
  }
  if (!out) throw std::runtime_error("export_csv: write failed for " + path);
}

}  // namespace fmcpe
