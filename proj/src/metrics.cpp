#include "s3vc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace s3vc {

double mcd_frame(const Eigen::VectorXd& converted,
                 const Eigen::VectorXd& target) {
  if (converted.size() != target.size())
    throw DataError("mcd_frame dimension mismatch: " +
                    std::to_string(converted.size()) + " vs " +
                    std::to_string(target.size()));
  if (converted.size() < 1)
    throw DataError("mcd_frame requires at least one dimension");
  return kMcdConstant * std::sqrt(2.0 * (converted - target).squaredNorm());
}

AlignmentPath dtw_align(const FeatureMatrix& a, const FeatureMatrix& b) {
  check_feature_matrix(a);
  check_feature_matrix(b);
  if (a.cols() != b.cols())
    throw DataError("dtw_align dimension mismatch: " +
                    std::to_string(a.cols()) + " vs " +
                    std::to_string(b.cols()));
  const Index ta = a.rows();
  const Index tb = b.rows();

  Eigen::MatrixXd acc(ta, tb);
  // predecessor: 0 = diagonal, 1 = (i-1,j), 2 = (i,j-1)
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> pred(ta, tb);
  auto local = [&](Index i, Index j) {
    return (a.row(i).cast<double>() - b.row(j).cast<double>()).norm();
  };
  for (Index i = 0; i < ta; ++i) {
    for (Index j = 0; j < tb; ++j) {
      const double c = local(i, j);
      if (i == 0 && j == 0) {
        acc(i, j) = c;
        pred(i, j) = 0;
      } else if (i == 0) {
        acc(i, j) = acc(i, j - 1) + c;
        pred(i, j) = 2;
      } else if (j == 0) {
        acc(i, j) = acc(i - 1, j) + c;
        pred(i, j) = 1;
      } else {
        double best = acc(i - 1, j - 1);
        std::uint8_t p = 0;
        if (acc(i - 1, j) < best) {
          best = acc(i - 1, j);
          p = 1;
        }
        if (acc(i, j - 1) < best) {
          best = acc(i, j - 1);
          p = 2;
        }
        acc(i, j) = best + c;
        pred(i, j) = p;
      }
    }
  }

  AlignmentPath path;
  Index i = ta - 1;
  Index j = tb - 1;
  while (true) {
    path.emplace_back(i, j);
    if (i == 0 && j == 0) break;
    switch (pred(i, j)) {
      case 0:
        --i;
        --j;
        break;
      case 1:
        --i;
        break;
      default:
        --j;
        break;
    }
  }
  std::reverse(path.begin(), path.end());
  return path;
}

namespace {

FeatureMatrix maybe_drop_first(const FeatureMatrix& m, bool drop) {
  if (!drop) return m;
  if (m.cols() < 2)
    throw DataError("cannot drop the first dimension of a 1-dim sequence");
  return m.rightCols(m.cols() - 1);
}

}  // namespace

double mcd_sequence(const FeatureMatrix& converted,
                    const FeatureMatrix& reference, const MCDConfig& cfg) {
  const FeatureMatrix c = maybe_drop_first(converted, cfg.drop_first_dim);
  const FeatureMatrix r = maybe_drop_first(reference, cfg.drop_first_dim);
  if (c.cols() != r.cols())
    throw DataError("mcd_sequence dimension mismatch: " +
                    std::to_string(c.cols()) + " vs " +
                    std::to_string(r.cols()));

  if (cfg.use_dtw) {
    const AlignmentPath path = dtw_align(c, r);
    double sum = 0.0;
    for (const auto& [i, j] : path)
      sum += mcd_frame(c.row(i).cast<double>(), r.row(j).cast<double>());
    return sum / static_cast<double>(path.size());
  }

  if (c.rows() != r.rows())
    throw DataError("mcd_sequence without DTW requires equal lengths (" +
                    std::to_string(c.rows()) + " vs " +
                    std::to_string(r.rows()) + ")");
  double sum = 0.0;
  for (Index i = 0; i < c.rows(); ++i)
    sum += mcd_frame(c.row(i).cast<double>(), r.row(i).cast<double>());
  return sum / static_cast<double>(c.rows());
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.size() != b.size())
    throw DataError("cosine_similarity dimension mismatch: " +
                    std::to_string(a.size()) + " vs " +
                    std::to_string(b.size()));
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0)
    throw DataError("cosine similarity is undefined for the zero vector");
  return a.dot(b) / (na * nb);
}

double asv_accept_rate(const std::vector<EmbeddingVector>& converted,
                       const EmbeddingVector& target, double threshold) {
  if (converted.empty())
    throw DataError("asv_accept_rate requires at least one embedding");
  Index accepted = 0;
  for (const auto& e : converted)
    if (cosine_similarity(e, target) > threshold) ++accepted;
  return 100.0 * static_cast<double>(accepted) /
         static_cast<double>(converted.size());
}

double eer_threshold(const std::vector<double>& genuine,
                     const std::vector<double>& impostor) {
  if (genuine.empty() || impostor.empty())
    throw DataError("eer_threshold requires nonempty score lists");

  std::set<double> candidate_set(genuine.begin(), genuine.end());
  candidate_set.insert(impostor.begin(), impostor.end());
  const std::vector<double> candidates(candidate_set.begin(),
                                       candidate_set.end());

  // f(t) = FAR(t) - FRR(t) with accept rule score > t; f is a step function,
  // constant on [c_k, c_{k+1}) and non-increasing in t.
  auto f = [&](double t) {
    Index fa = 0;
    for (const double s : impostor)
      if (s > t) ++fa;
    Index fr = 0;
    for (const double s : genuine)
      if (s <= t) ++fr;
    return static_cast<double>(fa) / static_cast<double>(impostor.size()) -
           static_cast<double>(fr) / static_cast<double>(genuine.size());
  };

  double prev_t = candidates.front() - 1.0;
  double prev_f = 1.0;  // below all scores: FAR 1, FRR 0
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double t = candidates[i];
    const double ft = f(t);
    if (ft == 0.0) {
      // midpoint of the plateau where FAR and FRR agree
      double hi = t;
      std::size_t j = i;
      while (j + 1 < candidates.size() && f(candidates[j + 1]) == 0.0) ++j;
      hi = j + 1 < candidates.size() ? candidates[j + 1] : candidates[j];
      return (t + hi) / 2.0;
    }
    if (ft < 0.0) {
      // sign change between prev_t and t: linear interpolation
      return prev_t + (t - prev_t) * prev_f / (prev_f - ft);
    }
    prev_t = t;
    prev_f = ft;
  }
  return candidates.back();  // f positive everywhere: accept nothing below max
}

double pearson(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (x.size() != y.size())
    throw DataError("pearson length mismatch: " + std::to_string(x.size()) +
                    " vs " + std::to_string(y.size()));
  if (x.size() < 2)
    throw DataError("pearson requires at least two samples");
  const Eigen::VectorXd xc = x.array() - x.mean();
  const Eigen::VectorXd yc = y.array() - y.mean();
  const double sx = xc.norm();
  const double sy = yc.norm();
  if (sx == 0.0 || sy == 0.0)
    throw DataError("pearson is undefined for a constant input");
  return xc.dot(yc) / (sx * sy);
}

CorrelationMatrix correlation_matrix(const MetricTable& table,
                                     const std::vector<std::string>& columns) {
  if (columns.empty())
    throw ConfigError("correlation_matrix needs at least one column");
  std::set<std::string> distinct(columns.begin(), columns.end());
  if (distinct.size() != columns.size())
    throw ConfigError("duplicate column in correlation request");
  if (table.rows() < 2)
    throw DataError("correlation requires at least two rows");

  CorrelationMatrix out;
  out.labels = columns;
  const Index n = static_cast<Index>(columns.size());
  out.values.resize(n, n);
  std::vector<Eigen::VectorXd> cols;
  cols.reserve(columns.size());
  for (const auto& name : columns) cols.push_back(table.column(name));
  for (Index i = 0; i < n; ++i) {
    out.values(i, i) = 1.0;
    for (Index j = i + 1; j < n; ++j) {
      const double r = pearson(cols[static_cast<std::size_t>(i)],
                               cols[static_cast<std::size_t>(j)]);
      out.values(i, j) = r;
      out.values(j, i) = r;
    }
  }
  return out;
}

}  // namespace s3vc
