#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "cocoa/dataset.hpp"
#include "cocoa/neuralnet.hpp"

namespace cocoa {

enum class BaseKind { ridge, knn, mlp };
enum class MetaKind { s_learner, t_learner };

struct BaseLearnerSpec {
  BaseKind kind = BaseKind::ridge;
  double ridge_lambda = 1e-8;
  std::size_t knn_k = 5;
  MlpSpec mlp;  // empty layer_sizes -> [p, 32, 32, 1]
  TrainSpec mlp_training{OptimizerKind::adam, 1e-3, 64, 60, 0.0, 0};
};

// Meta-learner over a regression base model. The S-learner fits one model
// on features (x, t, t*x); the T-learner fits one model per treatment arm
// on x alone. Prediction is tau_hat(x) = h(x,1) - h(x,0).
class CateModel {
 public:
  static CateModel fit(const Dataset& ds, MetaKind kind,
                       const BaseLearnerSpec& base, std::uint64_t seed);

  double predict_outcome(const std::vector<double>& x, int t) const;
  double predict_cate(const std::vector<double>& x) const;
  double predict_ate(const Dataset& ds) const;

  MetaKind meta_kind() const { return meta_; }
  BaseKind base_kind() const { return base_.kind; }
  std::size_t dim() const { return d_; }

  void save(const std::string& path) const;
  static CateModel load(const std::string& path);

  // Ridge coefficients (intercept first); throws for other base kinds.
  const Eigen::VectorXd& ridge_coefficients(int arm) const;

  struct BaseModel;  // opaque; defined in estimators.cpp

 private:
  CateModel() = default;

  MetaKind meta_ = MetaKind::t_learner;
  BaseLearnerSpec base_;
  std::size_t d_ = 0;
  std::vector<std::shared_ptr<const BaseModel>> models_;  // 1 (s) or 2 (t)
};

MetaKind meta_kind_from_name(const std::string& name);
std::string meta_kind_name(MetaKind kind);
BaseKind base_kind_from_name(const std::string& name);
std::string base_kind_name(BaseKind kind);

}  // namespace cocoa
