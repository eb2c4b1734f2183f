#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cocoa/contrastive.hpp"
#include "cocoa/dataset.hpp"
#include "cocoa/imputers.hpp"

namespace cocoa {

struct AugmentSpec {
  ContrastiveSpec contrastive;
  std::size_t min_neighbors = 5;  // K: imputation requires |N_i| >= K
  PsiKind psi = PsiKind::gp;
  KernelSpec kernel;
  std::size_t neighbor_cap = 50;  // nearest neighbors passed to psi
  std::uint64_t seed = 0;
};

struct AddedRecord {
  std::size_t source_index = 0;
  int imputed_t = 0;
  double imputed_y = 0.0;
  std::size_t neighbor_count = 0;
};

// Augmented dataset plus provenance. `augmented` holds every original
// sample unchanged and in order, followed by one record per imputed
// individual; alpha = |added| / |augmented| and always lies in [0, 1/2].
struct AugmentationReport {
  Dataset augmented;
  std::vector<AddedRecord> added;
  double alpha = 0.0;
  SiameseClassifier classifier;
  std::size_t n_original = 0;
};

// Trains the similarity classifier, finds each individual's opposite-group
// neighbors, and imputes a counterfactual record for those with at least
// min_neighbors of them. Individuals are imputed at most once; when nobody
// qualifies the result is the input dataset.
AugmentationReport augment(const Dataset& ds, const AugmentSpec& spec);

// Dataset plus a 0/1 augmented flag per row, CSV round-trippable.
struct ProvenancedDataset {
  Dataset data;
  std::vector<std::uint8_t> augmented;
};

ProvenancedDataset mark_provenance(const AugmentationReport& report);

// Schema: x_1..x_d,t,y[,mu0,mu1],augmented.
void save_provenance_csv(const ProvenancedDataset& ds, const std::string& path);
ProvenancedDataset load_provenance_csv(const std::string& path);

}  // namespace cocoa
