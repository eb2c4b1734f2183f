#include "cocoa/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <stdexcept>

#include "cocoa/imputers.hpp"
#include "cocoa/rng.hpp"

namespace cocoa {

namespace {

// S-learner feature recipe: (x, t, t*x) so arm-specific slopes are
// representable by a linear base model.
Eigen::VectorXd s_features(const std::vector<double>& x, int t) {
  const std::size_t d = x.size();
  Eigen::VectorXd f(2 * d + 1);
  for (std::size_t k = 0; k < d; ++k) f(static_cast<Eigen::Index>(k)) = x[k];
  f(static_cast<Eigen::Index>(d)) = static_cast<double>(t);
  for (std::size_t k = 0; k < d; ++k)
    f(static_cast<Eigen::Index>(d + 1 + k)) = t == 1 ? x[k] : 0.0;
  return f;
}

Eigen::VectorXd x_features(const std::vector<double>& x) {
  Eigen::VectorXd f(static_cast<Eigen::Index>(x.size()));
  for (std::size_t k = 0; k < x.size(); ++k)
    f(static_cast<Eigen::Index>(k)) = x[k];
  return f;
}

}  // namespace

struct CateModel::BaseModel {
  BaseKind kind = BaseKind::ridge;
  // ridge
  Eigen::VectorXd coef;  // intercept first
  // knn
  Eigen::MatrixXd train_x;  // rows = samples
  Eigen::VectorXd train_y;
  std::size_t k = 5;
  // mlp
  std::optional<Mlp> net;
  std::vector<double> feat_mean, feat_sd;

  double predict(const Eigen::VectorXd& f) const {
    switch (kind) {
      case BaseKind::ridge: {
        if (f.size() + 1 != coef.size())
          throw std::invalid_argument("CateModel: feature dimension mismatch");
        return coef(0) + coef.tail(f.size()).dot(f);
      }
      case BaseKind::knn: {
        if (f.size() != train_x.cols())
          throw std::invalid_argument("CateModel: feature dimension mismatch");
        const std::size_t kk =
            std::min<std::size_t>(k, static_cast<std::size_t>(train_x.rows()));
        std::vector<std::pair<double, std::size_t>> dist;
        dist.reserve(static_cast<std::size_t>(train_x.rows()));
        for (Eigen::Index r = 0; r < train_x.rows(); ++r)
          dist.emplace_back((train_x.row(r).transpose() - f).squaredNorm(),
                            static_cast<std::size_t>(r));
        std::partial_sort(dist.begin(),
                          dist.begin() + static_cast<std::ptrdiff_t>(kk),
                          dist.end());
        double sum = 0.0;
        for (std::size_t a = 0; a < kk; ++a)
          sum += train_y(static_cast<Eigen::Index>(dist[a].second));
        return sum / static_cast<double>(kk);
      }
      case BaseKind::mlp: {
        if (static_cast<std::size_t>(f.size()) != feat_mean.size())
          throw std::invalid_argument("CateModel: feature dimension mismatch");
        Eigen::VectorXd z(f.size());
        for (Eigen::Index i = 0; i < f.size(); ++i)
          z(i) = (f(i) - feat_mean[static_cast<std::size_t>(i)]) /
                 feat_sd[static_cast<std::size_t>(i)];
        return net->forward(z)(0);
      }
    }
    throw std::logic_error("CateModel: unknown base kind");
  }
};

namespace {

std::shared_ptr<const CateModel::BaseModel> fit_base(
    const std::vector<Eigen::VectorXd>& features,
    const std::vector<double>& outcomes, const BaseLearnerSpec& spec,
    std::uint64_t seed) {
  if (features.empty())
    throw std::invalid_argument("CateModel: no samples to fit");
  const auto n = static_cast<Eigen::Index>(features.size());
  const Eigen::Index p = features.front().size();

  auto model = std::make_shared<CateModel::BaseModel>();
  model->kind = spec.kind;
  switch (spec.kind) {
    case BaseKind::ridge: {
      if (spec.ridge_lambda < 0.0)
        throw std::invalid_argument("CateModel: ridge_lambda must be >= 0");
      Eigen::MatrixXd x(n, p + 1);
      Eigen::VectorXd y(n);
      for (Eigen::Index r = 0; r < n; ++r) {
        x(r, 0) = 1.0;
        x.row(r).tail(p) = features[static_cast<std::size_t>(r)].transpose();
        y(r) = outcomes[static_cast<std::size_t>(r)];
      }
      model->coef = ridge_normal_solve(x, y, spec.ridge_lambda);
      break;
    }
    case BaseKind::knn: {
      if (spec.knn_k == 0)
        throw std::invalid_argument("CateModel: knn_k must be >= 1");
      model->k = spec.knn_k;
      model->train_x.resize(n, p);
      model->train_y.resize(n);
      for (Eigen::Index r = 0; r < n; ++r) {
        model->train_x.row(r) =
            features[static_cast<std::size_t>(r)].transpose();
        model->train_y(r) = outcomes[static_cast<std::size_t>(r)];
      }
      break;
    }
    case BaseKind::mlp: {
      MlpSpec mspec = spec.mlp;
      if (mspec.layer_sizes.empty())
        mspec.layer_sizes = {static_cast<std::size_t>(p), 32, 32, 1};
      if (mspec.layer_sizes.front() != static_cast<std::size_t>(p) ||
          mspec.layer_sizes.back() != 1)
        throw std::invalid_argument("CateModel: mlp layer sizes mismatch");
      const Rng root(seed);
      mspec.init_seed = root.split("estimator.init").next_u64();

      model->feat_mean.assign(static_cast<std::size_t>(p), 0.0);
      model->feat_sd.assign(static_cast<std::size_t>(p), 0.0);
      for (const auto& f : features)
        for (Eigen::Index i = 0; i < p; ++i)
          model->feat_mean[static_cast<std::size_t>(i)] += f(i);
      for (double& m : model->feat_mean) m /= static_cast<double>(n);
      for (const auto& f : features)
        for (Eigen::Index i = 0; i < p; ++i) {
          const double c = f(i) - model->feat_mean[static_cast<std::size_t>(i)];
          model->feat_sd[static_cast<std::size_t>(i)] += c * c;
        }
      for (double& s : model->feat_sd) {
        s = std::sqrt(s / static_cast<double>(n));
        if (s == 0.0) s = 1.0;
      }

      Eigen::MatrixXd x(p, n);
      Eigen::MatrixXd y(1, n);
      for (Eigen::Index c = 0; c < n; ++c) {
        const auto& f = features[static_cast<std::size_t>(c)];
        for (Eigen::Index i = 0; i < p; ++i)
          x(i, c) = (f(i) - model->feat_mean[static_cast<std::size_t>(i)]) /
                    model->feat_sd[static_cast<std::size_t>(i)];
        y(0, c) = outcomes[static_cast<std::size_t>(c)];
      }
      TrainSpec tspec = spec.mlp_training;
      tspec.seed = root.split("estimator.train").next_u64();
      model->net.emplace(std::move(
          train(Mlp(mspec), x, y, tspec, LossKind::mse).net));
      break;
    }
  }
  return model;
}

}  // namespace

CateModel CateModel::fit(const Dataset& ds, MetaKind kind,
                         const BaseLearnerSpec& base, std::uint64_t seed) {
  if (ds.size() == 0) throw std::invalid_argument("CateModel::fit: empty dataset");
  CateModel model;
  model.meta_ = kind;
  model.base_ = base;
  model.d_ = ds.dim();

  const Rng root(seed);
  if (kind == MetaKind::s_learner) {
    std::vector<Eigen::VectorXd> feats;
    std::vector<double> y;
    feats.reserve(ds.size());
    y.reserve(ds.size());
    for (const auto& s : ds.samples()) {
      feats.push_back(s_features(s.x, s.t));
      y.push_back(s.y);
    }
    model.models_.push_back(
        fit_base(feats, y, base, root.split("s_learner").next_u64()));
  } else {
    for (int arm = 0; arm <= 1; ++arm) {
      std::vector<Eigen::VectorXd> feats;
      std::vector<double> y;
      for (const auto& s : ds.samples()) {
        if (s.t != arm) continue;
        feats.push_back(x_features(s.x));
        y.push_back(s.y);
      }
      if (feats.empty())
        throw std::invalid_argument(
            "CateModel::fit: t_learner requires both treatment arms");
      model.models_.push_back(fit_base(
          feats, y, base, root.split(arm == 0 ? "arm0" : "arm1").next_u64()));
    }
  }
  return model;
}

double CateModel::predict_outcome(const std::vector<double>& x, int t) const {
  if (x.size() != d_)
    throw std::invalid_argument("CateModel: covariate dimension mismatch");
  if (t != 0 && t != 1)
    throw std::invalid_argument("CateModel: treatment not binary");
  if (meta_ == MetaKind::s_learner) return models_[0]->predict(s_features(x, t));
  return models_[static_cast<std::size_t>(t)]->predict(x_features(x));
}

double CateModel::predict_cate(const std::vector<double>& x) const {
  return predict_outcome(x, 1) - predict_outcome(x, 0);
}

double CateModel::predict_ate(const Dataset& ds) const {
  if (ds.size() == 0)
    throw std::invalid_argument("CateModel::predict_ate: empty dataset");
  double sum = 0.0;
  for (const auto& s : ds.samples()) sum += predict_cate(s.x);
  return sum / static_cast<double>(ds.size());
}

const Eigen::VectorXd& CateModel::ridge_coefficients(int arm) const {
  if (base_.kind != BaseKind::ridge)
    throw std::invalid_argument("CateModel: not a ridge model");
  const std::size_t idx =
      meta_ == MetaKind::s_learner ? 0 : static_cast<std::size_t>(arm);
  return models_.at(idx)->coef;
}

namespace {

void write_base(const CateModel::BaseModel& m, std::ostream& out) {
  switch (m.kind) {
    case BaseKind::ridge:
      out << "MODEL ridge " << m.coef.size() << '\n';
      for (Eigen::Index i = 0; i < m.coef.size(); ++i)
        out << format_double(m.coef(i)) << '\n';
      break;
    case BaseKind::knn:
      out << "MODEL knn " << m.k << ' ' << m.train_x.rows() << ' '
          << m.train_x.cols() << '\n';
      for (Eigen::Index r = 0; r < m.train_x.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.train_x.cols(); ++c)
          out << format_double(m.train_x(r, c)) << ' ';
        out << format_double(m.train_y(r)) << '\n';
      }
      break;
    case BaseKind::mlp:
      out << "MODEL mlp " << m.feat_mean.size() << '\n';
      for (std::size_t i = 0; i < m.feat_mean.size(); ++i)
        out << format_double(m.feat_mean[i]) << ' '
            << format_double(m.feat_sd[i]) << '\n';
      write_mlp(*m.net, out);
      break;
  }
}

std::shared_ptr<const CateModel::BaseModel> read_base(std::istream& in) {
  std::string tag, kind;
  in >> tag >> kind;
  if (!in || tag != "MODEL")
    throw std::runtime_error("model file: expected MODEL block");
  auto m = std::make_shared<CateModel::BaseModel>();
  if (kind == "ridge") {
    m->kind = BaseKind::ridge;
    Eigen::Index n = 0;
    in >> n;
    m->coef.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) in >> m->coef(i);
  } else if (kind == "knn") {
    m->kind = BaseKind::knn;
    Eigen::Index rows = 0, cols = 0;
    in >> m->k >> rows >> cols;
    m->train_x.resize(rows, cols);
    m->train_y.resize(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) in >> m->train_x(r, c);
      in >> m->train_y(r);
    }
  } else if (kind == "mlp") {
    m->kind = BaseKind::mlp;
    std::size_t p = 0;
    in >> p;
    m->feat_mean.resize(p);
    m->feat_sd.resize(p);
    for (std::size_t i = 0; i < p; ++i) in >> m->feat_mean[i] >> m->feat_sd[i];
    m->net.emplace(read_mlp(in));
  } else {
    throw std::runtime_error("model file: unknown base kind " + kind);
  }
  if (!in) throw std::runtime_error("model file: truncated");
  return m;
}

}  // namespace

void CateModel::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("CateModel::save: cannot open " + path);
  out << "COCOAMODEL 1\n";
  out << "meta " << meta_kind_name(meta_) << '\n';
  out << "base " << base_kind_name(base_.kind) << '\n';
  out << "d " << d_ << '\n';
  out << "parts " << models_.size() << '\n';
  for (const auto& m : models_) write_base(*m, out);
  if (!out) throw std::runtime_error("CateModel::save: write failed");
}

CateModel CateModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("CateModel::load: cannot open " + path);
  std::string magic, key, value;
  int version = 0;
  in >> magic >> version;
  if (!in || magic != "COCOAMODEL" || version != 1)
    throw std::runtime_error("CateModel::load: bad header");
  CateModel model;
  in >> key >> value;
  if (key != "meta") throw std::runtime_error("model file: expected meta");
  model.meta_ = meta_kind_from_name(value);
  in >> key >> value;
  if (key != "base") throw std::runtime_error("model file: expected base");
  model.base_.kind = base_kind_from_name(value);
  std::size_t parts = 0;
  in >> key >> model.d_;
  if (key != "d") throw std::runtime_error("model file: expected d");
  in >> key >> parts;
  if (key != "parts") throw std::runtime_error("model file: expected parts");
  for (std::size_t i = 0; i < parts; ++i) model.models_.push_back(read_base(in));
  const std::size_t expected = model.meta_ == MetaKind::s_learner ? 1 : 2;
  if (model.models_.size() != expected)
    throw std::runtime_error("model file: wrong number of parts");
  return model;
}

MetaKind meta_kind_from_name(const std::string& name) {
  if (name == "s" || name == "s_learner") return MetaKind::s_learner;
  if (name == "t" || name == "t_learner") return MetaKind::t_learner;
  throw std::invalid_argument("unknown learner: " + name);
}

std::string meta_kind_name(MetaKind kind) {
  return kind == MetaKind::s_learner ? "s_learner" : "t_learner";
}

BaseKind base_kind_from_name(const std::string& name) {
  if (name == "ridge") return BaseKind::ridge;
  if (name == "knn") return BaseKind::knn;
  if (name == "mlp") return BaseKind::mlp;
  throw std::invalid_argument("unknown base learner: " + name);
}

std::string base_kind_name(BaseKind kind) {
  switch (kind) {
    case BaseKind::ridge: return "ridge";
    case BaseKind::knn: return "knn";
    case BaseKind::mlp: return "mlp";
  }
  return "?";
}

}  // namespace cocoa
