#include "cocoa/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "cocoa/rng.hpp"

namespace cocoa {

double FactualSample::tau() const {
  if (!has_ground_truth())
    throw std::invalid_argument("FactualSample::tau: ground truth missing");
  return *mu1 - *mu0;
}

namespace {

void validate_sample(const FactualSample& s, std::size_t d, bool ground_truth,
                     std::size_t index) {
  const std::string where = "sample " + std::to_string(index) + ": ";
  if (s.x.size() != d)
    throw std::invalid_argument(where + "covariate dimension mismatch");
  if (s.t != 0 && s.t != 1)
    throw std::invalid_argument(where + "treatment not binary");
  for (const double v : s.x)
    if (!std::isfinite(v))
      throw std::invalid_argument(where + "non-finite covariate");
  if (!std::isfinite(s.y))
    throw std::invalid_argument(where + "non-finite outcome");
  if (s.mu0.has_value() != s.mu1.has_value())
    throw std::invalid_argument(where + "mu0/mu1 must both be present or absent");
  if (s.has_ground_truth() != ground_truth)
    throw std::invalid_argument(where + "inconsistent ground-truth presence");
  if (ground_truth && (!std::isfinite(*s.mu0) || !std::isfinite(*s.mu1)))
    throw std::invalid_argument(where + "non-finite ground-truth mean");
}

}  // namespace

Dataset::Dataset(std::size_t d, std::string name,
                 std::vector<FactualSample> samples, bool has_ground_truth)
    : d_(d),
      name_(std::move(name)),
      samples_(std::move(samples)),
      has_ground_truth_(has_ground_truth) {
  for (std::size_t i = 0; i < samples_.size(); ++i)
    validate_sample(samples_[i], d_, has_ground_truth_, i);
}

Dataset::Dataset(std::size_t d, std::string name,
                 std::vector<FactualSample> samples)
    : d_(d), name_(std::move(name)), samples_(std::move(samples)) {
  if (samples_.empty())
    throw std::invalid_argument(
        "Dataset: ground-truth flag required for empty dataset");
  has_ground_truth_ = samples_.front().has_ground_truth();
  for (std::size_t i = 0; i < samples_.size(); ++i)
    validate_sample(samples_[i], d_, has_ground_truth_, i);
}

std::size_t Dataset::count_treated() const {
  return static_cast<std::size_t>(
      std::count_if(samples_.begin(), samples_.end(),
                    [](const FactualSample& s) { return s.t == 1; }));
}

std::size_t Dataset::count_control() const {
  return size() - count_treated();
}

Dataset Dataset::with_name(std::string name) const {
  return Dataset(d_, std::move(name), samples_, has_ground_truth_);
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t n, const SplitSpec& spec) {
  if (n < 2) throw std::invalid_argument("split: need at least 2 samples");
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
    throw std::invalid_argument("split: train_fraction must lie in (0,1)");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng = Rng(spec.seed).split("data_model.split");
  rng.shuffle(idx);
  const auto n_train = static_cast<std::size_t>(
      std::llround(spec.train_fraction * static_cast<double>(n)));
  std::vector<std::size_t> train(idx.begin(), idx.begin() + n_train);
  std::vector<std::size_t> test(idx.begin() + n_train, idx.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {std::move(train), std::move(test)};
}

std::pair<Dataset, Dataset> split(const Dataset& ds, const SplitSpec& spec) {
  const auto [train_idx, test_idx] = split_indices(ds.size(), spec);
  auto take = [&](const std::vector<std::size_t>& idx, const char* tag) {
    std::vector<FactualSample> out;
    out.reserve(idx.size());
    for (const std::size_t i : idx) out.push_back(ds[i]);
    return Dataset(ds.dim(), ds.name() + tag, std::move(out),
                   ds.has_ground_truth());
  };
  return {take(train_idx, "/train"), take(test_idx, "/test")};
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (const char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_number(const std::string& field, std::size_t row,
                    const std::string& column) {
  const std::string where = "row " + std::to_string(row) + ": ";
  std::size_t consumed = 0;
  double v = 0.0;
  try {
    v = std::stod(field, &consumed);
  } catch (const std::exception&) {
    throw std::runtime_error(where + "malformed number in column " + column);
  }
  if (consumed != field.size())
    throw std::runtime_error(where + "malformed number in column " + column);
  if (!std::isfinite(v))
    throw std::runtime_error(where + "non-finite value in column " + column);
  return v;
}

}  // namespace

Dataset load_csv(const std::string& path, bool require_ground_truth) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_csv: cannot open " + path);

  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("load_csv: empty file " + path);
  const std::vector<std::string> header = split_fields(line);

  // Header must be x_1..x_d,t,y[,mu0,mu1].
  std::size_t d = 0;
  while (d < header.size() && header[d] == "x_" + std::to_string(d + 1)) ++d;
  const std::size_t rest = header.size() - d;
  const bool ground_truth = rest == 4;
  if (d == 0 || (rest != 2 && rest != 4) || header[d] != "t" ||
      header[d + 1] != "y" ||
      (ground_truth && (header[d + 2] != "mu0" || header[d + 3] != "mu1")))
    throw std::runtime_error("load_csv: unrecognized header in " + path);
  if (require_ground_truth && !ground_truth)
    throw std::runtime_error("load_csv: " + path + " lacks mu0/mu1 columns");

  std::vector<FactualSample> samples;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    ++row;
    const std::vector<std::string> fields = split_fields(line);
    if (fields.size() != header.size())
      throw std::runtime_error("row " + std::to_string(row) + ": expected " +
                               std::to_string(header.size()) +
                               " columns, got " +
                               std::to_string(fields.size()));
    FactualSample s;
    s.x.resize(d);
    for (std::size_t k = 0; k < d; ++k)
      s.x[k] = parse_number(fields[k], row, header[k]);
    const double t = parse_number(fields[d], row, "t");
    if (t != 0.0 && t != 1.0)
      throw std::runtime_error("row " + std::to_string(row) +
                               ": treatment not binary");
    s.t = static_cast<int>(t);
    s.y = parse_number(fields[d + 1], row, "y");
    if (ground_truth) {
      s.mu0 = parse_number(fields[d + 2], row, "mu0");
      s.mu1 = parse_number(fields[d + 3], row, "mu1");
    }
    samples.push_back(std::move(s));
  }

  std::string name = path;
  if (const auto pos = name.find_last_of('/'); pos != std::string::npos)
    name = name.substr(pos + 1);
  if (const auto pos = name.rfind(".csv"); pos != std::string::npos)
    name = name.substr(0, pos);
  return Dataset(d, std::move(name), std::move(samples), ground_truth);
}

void save_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_csv: cannot open " + path);
  for (std::size_t k = 0; k < ds.dim(); ++k) out << "x_" << (k + 1) << ',';
  out << "t,y";
  if (ds.has_ground_truth()) out << ",mu0,mu1";
  out << '\n';
  for (const FactualSample& s : ds.samples()) {
    for (const double v : s.x) out << format_double(v) << ',';
    out << s.t << ',' << format_double(s.y);
    if (ds.has_ground_truth())
      out << ',' << format_double(*s.mu0) << ',' << format_double(*s.mu1);
    out << '\n';
  }
  if (!out) throw std::runtime_error("save_csv: write failed for " + path);
}

}  // namespace cocoa
