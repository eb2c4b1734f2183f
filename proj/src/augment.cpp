#include "cocoa/augment.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "cocoa/rng.hpp"

namespace cocoa {

AugmentationReport augment(const Dataset& ds, const AugmentSpec& spec) {
  if (spec.min_neighbors < 1)
    throw std::invalid_argument("augment: min_neighbors must be >= 1");
  if (ds.count_treated() == 0 || ds.count_control() == 0)
    throw std::invalid_argument(
        "augment: dataset must contain both treatment groups");

  ContrastiveSpec cspec = spec.contrastive;
  cspec.seed = Rng(spec.seed).split("augment.contrastive").next_u64();
  SiameseClassifier clf = fit_contrastive(ds, cspec);

  const Eigen::MatrixXd emb = clf.embed_all(ds);
  std::vector<int> treatments(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) treatments[i] = ds[i].t;

  const std::optional<KernelSpec> kernel =
      spec.psi == PsiKind::gp ? std::optional<KernelSpec>(spec.kernel)
                              : std::nullopt;

  std::vector<AddedRecord> added;
  std::vector<FactualSample> samples = ds.samples();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const std::vector<std::size_t> hood =
        neighbors_from_embeddings(emb, treatments, i, clf.radius());
    if (hood.size() < spec.min_neighbors) continue;

    const std::size_t use = std::min(spec.neighbor_cap, hood.size());
    NeighborSet nb;
    nb.points.resize(static_cast<Eigen::Index>(use),
                     static_cast<Eigen::Index>(ds.dim()));
    nb.outcomes.resize(static_cast<Eigen::Index>(use));
    for (std::size_t k = 0; k < use; ++k) {
      const FactualSample& s = ds[hood[k]];
      for (std::size_t c = 0; c < ds.dim(); ++c)
        nb.points(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c)) =
            s.x[c];
      nb.outcomes(static_cast<Eigen::Index>(k)) = s.y;
    }
    nb.query.resize(static_cast<Eigen::Index>(ds.dim()));
    for (std::size_t c = 0; c < ds.dim(); ++c)
      nb.query(static_cast<Eigen::Index>(c)) = ds[i].x[c];

    const double imputed = impute(spec.psi, nb, kernel);
    added.push_back(AddedRecord{i, 1 - ds[i].t, imputed, hood.size()});
  }

  for (const AddedRecord& rec : added) {
    FactualSample s = ds[rec.source_index];
    s.t = rec.imputed_t;
    s.y = rec.imputed_y;  // mu0/mu1 describe the same individual, keep them
    samples.push_back(std::move(s));
  }

  const double alpha =
      added.empty() ? 0.0
                    : static_cast<double>(added.size()) /
                          static_cast<double>(samples.size());
  Dataset augmented(ds.dim(), ds.name() + "/augmented", std::move(samples),
                    ds.has_ground_truth());
  return AugmentationReport{std::move(augmented), std::move(added), alpha,
                            std::move(clf), ds.size()};
}

ProvenancedDataset mark_provenance(const AugmentationReport& report) {
  std::vector<std::uint8_t> flags(report.augmented.size(), 0);
  for (std::size_t i = report.n_original; i < report.augmented.size(); ++i)
    flags[i] = 1;
  return ProvenancedDataset{report.augmented, std::move(flags)};
}

void save_provenance_csv(const ProvenancedDataset& ds,
                         const std::string& path) {
  if (ds.augmented.size() != ds.data.size())
    throw std::invalid_argument("save_provenance_csv: flag count mismatch");
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("save_provenance_csv: cannot open " + path);
  for (std::size_t k = 0; k < ds.data.dim(); ++k) out << "x_" << (k + 1) << ',';
  out << "t,y";
  if (ds.data.has_ground_truth()) out << ",mu0,mu1";
  out << ",augmented\n";
  for (std::size_t i = 0; i < ds.data.size(); ++i) {
    const FactualSample& s = ds.data[i];
    for (const double v : s.x) out << format_double(v) << ',';
    out << s.t << ',' << format_double(s.y);
    if (ds.data.has_ground_truth())
      out << ',' << format_double(*s.mu0) << ',' << format_double(*s.mu1);
    out << ',' << static_cast<int>(ds.augmented[i]) << '\n';
  }
  if (!out)
    throw std::runtime_error("save_provenance_csv: write failed for " + path);
}

ProvenancedDataset load_provenance_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("load_provenance_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("load_provenance_csv: empty file " + path);

  auto fields_of = [](const std::string& l) {
    std::vector<std::string> out;
    std::string cur;
    for (const char c : l) {
      if (c == ',') {
        out.push_back(cur);
        cur.clear();
      } else if (c != '\r') {
        cur.push_back(c);
      }
    }
    out.push_back(cur);
    return out;
  };

  const std::vector<std::string> header = fields_of(line);
  if (header.empty() || header.back() != "augmented")
    throw std::runtime_error("load_provenance_csv: missing augmented column");

  std::size_t d = 0;
  while (d < header.size() && header[d] == "x_" + std::to_string(d + 1)) ++d;
  const std::size_t rest = header.size() - d;
  const bool ground_truth = rest == 5;
  if (d == 0 || (rest != 3 && rest != 5) || header[d] != "t" ||
      header[d + 1] != "y" ||
      (ground_truth && (header[d + 2] != "mu0" || header[d + 3] != "mu1")))
    throw std::runtime_error("load_provenance_csv: unrecognized header");

  std::vector<FactualSample> samples;
  std::vector<std::uint8_t> flags;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    ++row;
    const std::vector<std::string> fields = fields_of(line);
    if (fields.size() != header.size())
      throw std::runtime_error("row " + std::to_string(row) +
                               ": expected " + std::to_string(header.size()) +
                               " columns, got " + std::to_string(fields.size()));
    auto num = [&](const std::string& f, const std::string& col) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(f, &used);
      } catch (const std::exception&) {
        throw std::runtime_error("row " + std::to_string(row) +
                                 ": malformed number in column " + col);
      }
      if (used != f.size() || !std::isfinite(v))
        throw std::runtime_error("row " + std::to_string(row) +
                                 ": malformed number in column " + col);
      return v;
    };
    FactualSample s;
    s.x.resize(d);
    for (std::size_t k = 0; k < d; ++k) s.x[k] = num(fields[k], header[k]);
    const double t = num(fields[d], "t");
    if (t != 0.0 && t != 1.0)
      throw std::runtime_error("row " + std::to_string(row) +
                               ": treatment not binary");
    s.t = static_cast<int>(t);
    s.y = num(fields[d + 1], "y");
    if (ground_truth) {
      s.mu0 = num(fields[d + 2], "mu0");
      s.mu1 = num(fields[d + 3], "mu1");
    }
    const double flag = num(fields.back(), "augmented");
    if (flag != 0.0 && flag != 1.0)
      throw std::runtime_error("row " + std::to_string(row) +
                               ": augmented flag not binary");
    samples.push_back(std::move(s));
    flags.push_back(static_cast<std::uint8_t>(flag));
  }
  Dataset data(d, "augmented", std::move(samples), ground_truth);
  return ProvenancedDataset{std::move(data), std::move(flags)};
}

}  // namespace cocoa
