#include "lofi/synth.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lofi/activation.hpp"
#include "lofi/errors.hpp"
#include "lofi/lofi.hpp"

namespace lofi {

namespace {

const double kInvSqrt2 = 1.0 / std::sqrt(2.0);

Matrix spherical_rows(Index rows, Index cols, Rng& rng) {
  Matrix w = gaussian_matrix(rows, cols, rng);
  w.rowwise().normalize();
  return w;
}

Matrix rf_features(const Matrix& x, const Matrix& w) {
  Matrix f = x * w.transpose();
  f = f.unaryExpr([](double v) { return activate(Activation::relu_perp01, v); });
  return f / std::sqrt(static_cast<double>(w.rows()));
}

Matrix poly_features(const Vector& t, int degree) {
  Matrix p(t.size(), degree + 1);
  p.col(0).setOnes();
  for (int j = 1; j <= degree; ++j) p.col(j) = p.col(j - 1).cwiseProduct(t);
  return p;
}

Matrix orthonormal_centered_basis(const Matrix& m) {
  Matrix c = m.rowwise() - m.colwise().mean();
  Eigen::ColPivHouseholderQR<Matrix> qr(c);
  qr.setThreshold(1e-10);
  const Index r = qr.rank();
  return Matrix(qr.householderQ() * Matrix::Identity(c.rows(), c.cols())).leftCols(r);
}

}  // namespace

Vector hermite2_features(const Vector& x) {
  const Index d = x.size();
  Vector f(hermite2_dim(d));
  for (Index i = 0; i < d; ++i) f(i) = (x(i) * x(i) - 1.0) * kInvSqrt2;
  Index k = d;
  for (Index i = 0; i < d; ++i) {
    for (Index j = i + 1; j < d; ++j) f(k++) = x(i) * x(j);
  }
  return f;
}

Matrix hermite2_feature_rows(const Matrix& x) {
  const Index d = x.cols();
  Matrix f(x.rows(), hermite2_dim(d));
  f.leftCols(d) = (x.array().square() - 1.0).matrix() * kInvSqrt2;
  Index k = d;
  for (Index i = 0; i < d; ++i) {
    for (Index j = i + 1; j < d; ++j) f.col(k++) = x.col(i).cwiseProduct(x.col(j));
  }
  return f;
}

Vector flatten_symmetric(const Matrix& a) {
  if (a.rows() != a.cols()) throw InvalidInput("flatten_symmetric needs a square matrix");
  const Index d = a.rows();
  Vector v(hermite2_dim(d));
  for (Index i = 0; i < d; ++i) v(i) = a(i, i);
  Index k = d;
  for (Index i = 0; i < d; ++i) {
    for (Index j = i + 1; j < d; ++j) v(k++) = std::sqrt(2.0) * a(i, j);
  }
  return v;
}

Matrix unflatten_symmetric(const Vector& v, Index d) {
  if (v.size() != hermite2_dim(d)) throw InvalidInput("flattened length does not match d");
  Matrix a(d, d);
  for (Index i = 0; i < d; ++i) a(i, i) = v(i);
  Index k = d;
  for (Index i = 0; i < d; ++i) {
    for (Index j = i + 1; j < d; ++j) a(i, j) = a(j, i) = v(k++) * kInvSqrt2;
  }
  return a;
}

Link parse_link(std::string_view name) {
  if (name == "tanh") return Link::tanh;
  if (name == "identity") return Link::identity;
  throw InvalidInput("unknown link '" + std::string(name) + "'");
}

std::string to_string(Link link) { return link == Link::tanh ? "tanh" : "identity"; }

Index latent_dim(Index d, double epsilon) {
  return static_cast<Index>(std::floor(std::pow(static_cast<double>(d), epsilon) + 1e-9));
}

HierTeacher gen_teacher(Index d, double epsilon, Link link, Rng& rng) {
  if (d < 4) throw InvalidInput("teacher needs d >= 4");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw InvalidInput("teacher needs 0 < epsilon < 1");
  HierTeacher t;
  t.d = d;
  t.d1 = latent_dim(d, epsilon);
  t.epsilon = epsilon;
  t.link = link;
  t.a1 = spherical_rows(t.d1, hermite2_dim(d), rng);
  const Matrix b = gaussian_matrix(t.d1, t.d1, rng);
  t.a2 = 0.5 * (b + b.transpose());
  t.a2 /= t.a2.norm();
  return t;
}

SynthSample sample_synth(const HierTeacher& teacher, Index n, Rng& rng) {
  if (n < 1) throw InvalidInput("sample size must be positive");
  SynthSample s;
  s.data.x = gaussian_matrix(n, teacher.d, rng);
  s.h1.resize(n, teacher.d1);
  constexpr Index kBatch = 4096;
  for (Index start = 0; start < n; start += kBatch) {
    const Index len = std::min(kBatch, n - start);
    s.h1.middleRows(start, len) =
        hermite2_feature_rows(Matrix(s.data.x.middleRows(start, len))) * teacher.a1.transpose();
  }
  s.h2 = ((s.h1 * teacher.a2).cwiseProduct(s.h1).rowwise().sum().array() - teacher.a2.trace()) *
         kInvSqrt2;
  s.data.y = teacher.link == Link::tanh ? Vector(s.h2.array().tanh()) : s.h2;
  s.data.name = "hier-d" + std::to_string(teacher.d);
  s.data = center_labels(std::move(s.data));
  return s;
}

double representation_overlap(const Matrix& h, const Matrix& h_hat) {
  if (h.rows() != h_hat.rows()) throw InvalidInput("representations differ in sample count");
  if (h.cols() < 1 || h_hat.cols() < 1) throw InvalidInput("representations need columns");
  const Matrix q = orthonormal_centered_basis(h);
  const Matrix q_hat = orthonormal_centered_basis(h_hat);
  if (q.cols() == 0 || q_hat.cols() == 0) return 0.0;
  return (q.transpose() * q_hat).squaredNorm() /
         static_cast<double>(std::max(h.cols(), h_hat.cols()));
}

RfEstimator fit_rf_estimator(const SynthSample& train, const RfConfig& config, Index rank,
                             Rng& rng) {
  const Matrix& x = train.data.x;
  const Vector& y = train.data.y;
  const Index n = x.rows();
  if (rank < 1 || config.p1 < rank || config.p2 < 1) {
    throw InvalidInput("random-feature widths must be at least the rank");
  }
  if (config.batch_rows < 1) throw InvalidInput("batch size must be positive");
  if (config.spectrum_size < 0) throw InvalidInput("spectrum size must be non-negative");

  RfEstimator est;
  Rng w1_rng = rng.fork(1);
  est.w1 = spherical_rows(config.p1, x.cols(), w1_rng);

  MomentAccumulator acc(config.p1);
  for (Index start = 0; start < n; start += config.batch_rows) {
    const Index len = std::min(config.batch_rows, n - start);
    acc.add(rf_features(x.middleRows(start, len), est.w1), y.segment(start, len));
  }
  const Matrix c1 = acc.result();
  if (config.spectrum_size > 0) {
    const SymEig top = sym_eig_topk(c1, std::min(c1.rows(), std::max(rank, config.spectrum_size)));
    est.spectrum = top.values.head(std::min(config.spectrum_size, top.values.size()));
    est.v1 = top.vectors.leftCols(rank);
  } else {
    est.spectrum = sym_eigenvalues(c1);
    est.v1 = sym_eig_topk(c1, rank).vectors;
  }

  Matrix h1(n, rank);
  for (Index start = 0; start < n; start += config.batch_rows) {
    const Index len = std::min(config.batch_rows, n - start);
    h1.middleRows(start, len) = rf_features(x.middleRows(start, len), est.w1) * est.v1;
  }
  if (config.batch_norm) {
    est.bn_mean = h1.colwise().mean();
    est.bn_scale = ((h1.rowwise() - est.bn_mean.transpose()).colwise().squaredNorm() /
                    static_cast<double>(n))
                       .cwiseSqrt()
                       .transpose();
    for (Index j = 0; j < rank; ++j) {
      if (!(est.bn_scale(j) > 0.0)) est.bn_scale(j) = 1.0;
    }
    h1 = (h1.rowwise() - est.bn_mean.transpose()).array().rowwise() /
         est.bn_scale.transpose().array();
  }

  Rng w2_rng = rng.fork(2);
  est.w2 = spherical_rows(config.p2, rank, w2_rng);
  const Matrix phi2 = rf_features(h1, est.w2);
  est.v2 = linear_moment(phi2, y);
  const Vector h2 = phi2 * est.v2;

  est.h2_mean = h2.mean();
  const double sd = std::sqrt((h2.array() - est.h2_mean).square().mean());
  est.h2_scale = sd > 0.0 ? sd : 1.0;
  const Vector t = (h2.array() - est.h2_mean) / est.h2_scale;
  est.poly = ridge_solve(poly_features(t, config.poly_degree), y, config.ridge);
  return est;
}

RfOutput rf_forward(const RfEstimator& est, const RfConfig& config, const Matrix& x) {
  if (x.cols() != est.w1.cols()) throw InvalidInput("input dimension does not match estimator");
  const Index n = x.rows();
  RfOutput out;
  out.h1_hat.resize(n, est.v1.cols());
  const Index batch = std::max<Index>(config.batch_rows, 1);
  for (Index start = 0; start < n; start += batch) {
    const Index len = std::min(batch, n - start);
    out.h1_hat.middleRows(start, len) = rf_features(x.middleRows(start, len), est.w1) * est.v1;
  }
  if (est.bn_mean.size() == out.h1_hat.cols()) {
    out.h1_hat = (out.h1_hat.rowwise() - est.bn_mean.transpose()).array().rowwise() /
                 est.bn_scale.transpose().array();
  }
  out.h2_hat = rf_features(out.h1_hat, est.w2) * est.v2;
  const Vector t = (out.h2_hat.array() - est.h2_mean) / est.h2_scale;
  out.prediction = poly_features(t, static_cast<int>(est.poly.size()) - 1) * est.poly;
  return out;
}

RfMetrics evaluate_rf(const RfEstimator& est, const RfConfig& config, const SynthSample& test,
                      Index rank) {
  const RfOutput out = rf_forward(est, config, test.data.x);
  RfMetrics m;
  m.test_mse = (out.prediction - test.data.y).squaredNorm() / static_cast<double>(test.h2.size());
  m.label_variance = (test.data.y.array() - test.data.y.mean()).square().mean();
  m.overlap = representation_overlap(test.h1, out.h1_hat);
  m.spectrum = est.spectrum;
  if (rank < est.spectrum.size() && est.spectrum(rank) != 0.0) {
    m.gap_ratio = std::abs(est.spectrum(rank - 1)) / std::abs(est.spectrum(rank));
  }
  return m;
}

Index synth_sample_size(Index d, double alpha) {
  return static_cast<Index>(std::floor(std::pow(static_cast<double>(d), alpha) + 1e-9));
}

RfMetrics run_synth_experiment(const SynthExperiment& exp, std::uint64_t seed) {
  Rng root(seed);
  Rng teacher_rng = root.fork(0);
  const HierTeacher teacher = gen_teacher(exp.d, exp.epsilon, exp.link, teacher_rng);
  const Index n = synth_sample_size(exp.d, exp.alpha);
  Rng train_rng = root.fork(1), test_rng = root.fork(2), fit_rng = root.fork(3);
  const SynthSample train = sample_synth(teacher, n, train_rng);
  const SynthSample test = sample_synth(teacher, exp.n_test, test_rng);
  const Index rank = exp.rf.rank > 0 ? exp.rf.rank : teacher.d1;
  const RfEstimator est = fit_rf_estimator(train, exp.rf, rank, fit_rng);
  return evaluate_rf(est, exp.rf, test, rank);
}

}  // namespace lofi
