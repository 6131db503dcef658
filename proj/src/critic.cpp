#include "nsc/critic.hpp"

#include <cmath>

namespace nsc {

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Rows of a sample matrix become columns here.
using ColMatrix = Matrix;

// Activations and (optionally) forward-mode tangents for one batch.
struct Pass {
  ColMatrix z1, s1, a1;  // h×n
  ColMatrix z2, s2, a2;  // h×n
  ColMatrix f;           // d×n
  int k = 0;             // directions per sample
  ColMatrix dirs;        // d×(n·k)
  ColMatrix t1, ta1;     // h×(n·k)
  ColMatrix t2, ta2;     // h×(n·k)
  ColMatrix tf;          // d×(n·k)
};

ColMatrix tiled_identity(int d, Eigen::Index n) {
  ColMatrix out = ColMatrix::Zero(d, n * d);
  for (Eigen::Index i = 0; i < n; ++i) out.middleCols(i * d, d).setIdentity();
  return out;
}

// out.block_i = diag(scale.col(i)) * in.block_i
ColMatrix scale_blocks(const ColMatrix& scale, const ColMatrix& in, int k) {
  ColMatrix out(in.rows(), in.cols());
  for (Eigen::Index i = 0; i < scale.cols(); ++i) {
    out.middleCols(i * k, k) = in.middleCols(i * k, k).array().colwise() * scale.col(i).array();
  }
  return out;
}

// column i of result = Σ over block i of (a ⊙ b)
ColMatrix block_rowsums(const ColMatrix& a, const ColMatrix& b, Eigen::Index n, int k) {
  ColMatrix out(a.rows(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.col(i) = a.middleCols(i * k, k).cwiseProduct(b.middleCols(i * k, k)).rowwise().sum();
  }
  return out;
}

void activate(const ColMatrix& z, ColMatrix& s1, ColMatrix& a) {
  a.resize(z.rows(), z.cols());
  s1.resize(z.rows(), z.cols());
  for (Eigen::Index j = 0; j < z.size(); ++j) {
    const double v = z.data()[j];
    const double sg = sigmoid(v);
    a.data()[j] = v * sg;
    s1.data()[j] = sg + v * sg * (1.0 - sg);
  }
}

ColMatrix second_derivative(const ColMatrix& z) {
  return z.unaryExpr([](double v) { return swish_d2(v); });
}

Pass run(const Layers& L, const ColMatrix& xc, const ColMatrix* probes, int k, bool tangents) {
  Pass p;
  const Eigen::Index n = xc.cols();
  p.z1 = (L.w1 * xc).colwise() + L.b1;
  activate(p.z1, p.s1, p.a1);
  p.z2 = (L.w2 * p.a1).colwise() + L.b2;
  activate(p.z2, p.s2, p.a2);
  p.f = (L.w3 * p.a2).colwise() + L.b3;
  if (!tangents) return p;

  const int d = L.dim();
  if (probes != nullptr) {
    p.k = k;
    p.dirs = *probes;
  } else {
    p.k = d;
    p.dirs = tiled_identity(d, n);
  }
  p.t1.noalias() = L.w1 * p.dirs;
  p.ta1 = scale_blocks(p.s1, p.t1, p.k);
  p.t2.noalias() = L.w2 * p.ta1;
  p.ta2 = scale_blocks(p.s2, p.t2, p.k);
  p.tf.noalias() = L.w3 * p.ta2;
  return p;
}

Vector divergences(const Pass& p, bool exact) {
  const Eigen::Index n = p.f.cols();
  const Eigen::RowVectorXd quad = p.dirs.cwiseProduct(p.tf).colwise().sum();
  Vector div(n);
  for (Eigen::Index i = 0; i < n; ++i) div[i] = quad.segment(i * p.k, p.k).sum();
  if (!exact) div /= static_cast<double>(p.k);
  return div;
}

struct Grads {
  Matrix w1, w2, w3;
  Vector b1, b2, b3;
};

// Reverse pass given adjoints of the outputs (d×n) and, optionally, of the
// output tangents (d×(n·k)).
Grads backward(const Layers& L, const Pass& p, const ColMatrix& xc, const ColMatrix& g_f,
               const ColMatrix* g_tf) {
  Grads g;
  const Eigen::Index n = xc.cols();
  g.w3.noalias() = g_f * p.a2.transpose();
  g.b3 = g_f.rowwise().sum();
  ColMatrix g_a2 = L.w3.transpose() * g_f;
  ColMatrix g_z2 = p.s2.cwiseProduct(g_a2);

  ColMatrix g_t2;
  if (g_tf != nullptr) {
    g.w3.noalias() += *g_tf * p.ta2.transpose();
    const ColMatrix g_ta2 = L.w3.transpose() * *g_tf;
    g_t2 = scale_blocks(p.s2, g_ta2, p.k);
    g_z2 += second_derivative(p.z2).cwiseProduct(block_rowsums(g_ta2, p.t2, n, p.k));
  }

  g.w2.noalias() = g_z2 * p.a1.transpose();
  g.b2 = g_z2.rowwise().sum();
  ColMatrix g_a1 = L.w2.transpose() * g_z2;
  ColMatrix g_z1 = p.s1.cwiseProduct(g_a1);

  ColMatrix g_t1;
  if (g_tf != nullptr) {
    g.w2.noalias() += g_t2 * p.ta1.transpose();
    const ColMatrix g_ta1 = L.w2.transpose() * g_t2;
    g_t1 = scale_blocks(p.s1, g_ta1, p.k);
    g_z1 += second_derivative(p.z1).cwiseProduct(block_rowsums(g_ta1, p.t1, n, p.k));
  }

  g.w1.noalias() = g_z1 * xc.transpose();
  g.b1 = g_z1.rowwise().sum();
  if (g_tf != nullptr) g.w1.noalias() += g_t1 * p.dirs.transpose();
  return g;
}

ParamVector pack_grads(const Grads& g) {
  Layers l{g.w1, g.w2, g.w3, g.b1, g.b2, g.b3};
  return pack(l);
}

ColMatrix columns(const SampleMatrix& x) { return x.transpose(); }

void append_row_major(const Matrix& m, ParamVector& out, Eigen::Index& pos) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out[pos++] = m(r, c);
  }
}

void read_row_major(const ParamVector& in, Eigen::Index& pos, Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = in[pos++];
  }
}

constexpr Eigen::Index kChunk = 512;

}  // namespace

double swish(double z) { return z * sigmoid(z); }

double swish_d1(double z) {
  const double s = sigmoid(z);
  return s + z * s * (1.0 - s);
}

double swish_d2(double z) {
  const double s = sigmoid(z);
  return s * (1.0 - s) * (2.0 + z * (1.0 - 2.0 * s));
}

DivMode default_div_mode(int d) {
  return d <= kExactDivergenceMaxDim ? DivMode::exact() : DivMode::hutchinson(1);
}

Matrix draw_probes(int d, Eigen::Index m, int probes, Rng& rng) {
  Matrix v(d, m * probes);
  // Sample-major so that a sample's probes do not depend on the batch size.
  for (Eigen::Index c = 0; c < v.cols(); ++c) {
    for (int r = 0; r < d; ++r) v(r, c) = rademacher(rng);
  }
  return v;
}

// ---------------------------------------------------------------------------
// Layers / packing

Layers Layers::zeros(int d, int h) {
  return Layers{Matrix::Zero(h, d), Matrix::Zero(h, h), Matrix::Zero(d, h),
                Vector::Zero(h),    Vector::Zero(h),    Vector::Zero(d)};
}

std::size_t param_count(int d, int h) {
  const auto dd = static_cast<std::size_t>(d);
  const auto hh = static_cast<std::size_t>(h);
  return hh * (dd + 1) + hh * (hh + 1) + dd * (hh + 1);
}

ParamVector pack(const Layers& l) {
  ParamVector out(static_cast<Eigen::Index>(param_count(l.dim(), l.width())));
  Eigen::Index pos = 0;
  append_row_major(l.w1, out, pos);
  out.segment(pos, l.b1.size()) = l.b1;
  pos += l.b1.size();
  append_row_major(l.w2, out, pos);
  out.segment(pos, l.b2.size()) = l.b2;
  pos += l.b2.size();
  append_row_major(l.w3, out, pos);
  out.segment(pos, l.b3.size()) = l.b3;
  return out;
}

Layers unpack(const ParamVector& params, int d, int h) {
  if (static_cast<std::size_t>(params.size()) != param_count(d, h)) {
    throw std::invalid_argument("unpack: parameter vector has wrong length");
  }
  Layers l = Layers::zeros(d, h);
  Eigen::Index pos = 0;
  read_row_major(params, pos, l.w1);
  l.b1 = params.segment(pos, h);
  pos += h;
  read_row_major(params, pos, l.w2);
  l.b2 = params.segment(pos, h);
  pos += h;
  read_row_major(params, pos, l.w3);
  l.b3 = params.segment(pos, d);
  return l;
}

// ---------------------------------------------------------------------------
// MlpCritic

MlpCritic::MlpCritic(int d, int h) : layers_(Layers::zeros(d, h)) {
  if (d < 1 || h < 1) throw std::invalid_argument("critic: d and h must be >= 1");
}

MlpCritic::MlpCritic(Layers layers) : layers_(std::move(layers)) {
  const int d = layers_.dim();
  const int h = layers_.width();
  if (layers_.w2.rows() != h || layers_.w2.cols() != h || layers_.w3.rows() != d ||
      layers_.w3.cols() != h || layers_.b1.size() != h || layers_.b2.size() != h ||
      layers_.b3.size() != d) {
    throw std::invalid_argument("critic: inconsistent layer shapes");
  }
}

MlpCritic MlpCritic::init(int d, int h, Rng& rng) {
  MlpCritic c(d, h);
  auto fill = [&rng](Matrix& w) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(w.cols()));
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index col = 0; col < w.cols(); ++col) {
        w(r, col) = bound * (2.0 * uniform01(rng) - 1.0);
      }
    }
  };
  fill(c.layers_.w1);
  fill(c.layers_.w2);
  fill(c.layers_.w3);
  return c;
}

void MlpCritic::set_params(const ParamVector& params) { layers_ = unpack(params, dim(), width()); }

void MlpCritic::scale_output(double factor) {
  layers_.w3 *= factor;
  layers_.b3 *= factor;
  if (reference_) {
    reference_->w3 *= factor;
    reference_->b3 *= factor;
  }
}

Vector MlpCritic::forward(const Vector& x) const {
  SampleMatrix row = x.transpose();
  return forward_batch(row).row(0).transpose();
}

SampleMatrix MlpCritic::forward_batch(const SampleMatrix& x) const {
  const ColMatrix xc = columns(x);
  ColMatrix f = run(layers_, xc, nullptr, 0, false).f;
  if (reference_) f -= run(*reference_, xc, nullptr, 0, false).f;
  return f.transpose();
}

Matrix MlpCritic::input_jacobian(const Vector& x) const {
  const ColMatrix xc = x;
  Pass p = run(layers_, xc, nullptr, 0, true);
  Matrix jac = p.tf;  // column j = J e_j
  if (reference_) jac -= run(*reference_, xc, nullptr, 0, true).tf;
  return jac;
}

double MlpCritic::divergence_exact(const Vector& x) const { return input_jacobian(x).trace(); }

double MlpCritic::divergence_hutchinson(const Vector& x, int probes, Rng& rng) const {
  if (probes < 1) throw std::invalid_argument("hutchinson: need at least one probe");
  const Matrix v = draw_probes(dim(), 1, probes, rng);
  SampleMatrix row = x.transpose();
  return evaluate(row, &v, probes).div[0];
}

CriticEval MlpCritic::evaluate(const SampleMatrix& x, const Matrix* probes, int k) const {
  const Eigen::Index n = x.rows();
  CriticEval out{SampleMatrix(n, dim()), Vector(n)};
  for (Eigen::Index start = 0; start < n; start += kChunk) {
    const Eigen::Index len = std::min(kChunk, n - start);
    const ColMatrix xc = x.middleRows(start, len).transpose();
    ColMatrix chunk_probes;
    const ColMatrix* cp = nullptr;
    if (probes != nullptr) {
      chunk_probes = probes->middleCols(start * k, len * k);
      cp = &chunk_probes;
    }
    Pass p = run(layers_, xc, cp, k, true);
    ColMatrix f = p.f;
    Vector div = divergences(p, probes == nullptr);
    if (reference_) {
      Pass r = run(*reference_, xc, cp, k, true);
      f -= r.f;
      div -= divergences(r, probes == nullptr);
    }
    out.f.middleRows(start, len) = f.transpose();
    out.div.segment(start, len) = div;
  }
  return out;
}

CriticEval MlpCritic::evaluate(const SampleMatrix& x, DivMode mode, Rng& rng) const {
  if (mode.is_exact()) return evaluate(x, nullptr, 0);
  const Matrix v = draw_probes(dim(), x.rows(), mode.probes, rng);
  return evaluate(x, &v, mode.probes);
}

Matrix MlpCritic::param_jacobian(const Vector& x) const {
  const int d = dim();
  const ColMatrix xc = x;
  const Pass p = run(layers_, xc, nullptr, 0, false);
  Matrix jac(d, static_cast<Eigen::Index>(param_count()));
  for (int k = 0; k < d; ++k) {
    ColMatrix g = ColMatrix::Zero(d, 1);
    g(k, 0) = 1.0;
    jac.row(k) = pack_grads(backward(layers_, p, xc, g, nullptr)).transpose();
  }
  return jac;
}

ParamVector MlpCritic::output_vjp(const SampleMatrix& x, const SampleMatrix& g) const {
  const ColMatrix xc = columns(x);
  const Pass p = run(layers_, xc, nullptr, 0, false);
  const ColMatrix gc = g.transpose();
  return pack_grads(backward(layers_, p, xc, gc, nullptr));
}

LossGrad MlpCritic::loss_and_grad(const SampleMatrix& x, const SampleMatrix& score_q, double lambda,
                                  const Matrix* probes, int k) const {
  if (x.rows() < 1) throw std::invalid_argument("loss_and_grad: empty batch");
  if (!(lambda > 0.0)) throw std::invalid_argument("loss_and_grad: lambda must be positive");
  const Eigen::Index m = x.rows();
  const ColMatrix xc = columns(x);
  const ColMatrix sc = score_q.transpose();
  const bool exact = probes == nullptr;

  Pass p = run(layers_, xc, probes, k, true);
  ColMatrix u = p.f;
  Vector div = divergences(p, exact);
  if (reference_) {
    Pass r = run(*reference_, xc, probes, k, true);
    u -= r.f;
    div -= divergences(r, exact);
  }

  const Eigen::RowVectorXd stein = sc.cwiseProduct(u).colwise().sum() + div.transpose();
  const double loss = (-stein.sum() + 0.5 * lambda * u.squaredNorm()) / static_cast<double>(m);

  const double inv_m = 1.0 / static_cast<double>(m);
  const ColMatrix g_f = (lambda * u - sc) * inv_m;
  const double dir_weight = exact ? 1.0 : 1.0 / static_cast<double>(p.k);
  const ColMatrix g_tf = p.dirs * (-dir_weight * inv_m);

  LossGrad out{loss, pack_grads(backward(layers_, p, xc, g_f, &g_tf))};
  if (!std::isfinite(out.loss) || !out.grad.allFinite()) {
    throw NonFiniteError("non-finite loss or gradient");
  }
  return out;
}

LossGrad loss_and_grad(const MlpCritic& critic, const SampleMatrix& batch, const ScoreField& q,
                       double lambda, DivMode mode, Rng& rng) {
  const SampleMatrix scores = q.score_batch(batch);
  if (mode.is_exact()) return critic.loss_and_grad(batch, scores, lambda);
  const Matrix v = draw_probes(critic.dim(), batch.rows(), mode.probes, rng);
  return critic.loss_and_grad(batch, scores, lambda, &v, mode.probes);
}

}  // namespace nsc
