#include "nsc/stein.hpp"

#include <ostream>
#include <stdexcept>

#include "nsc/csv.hpp"

namespace nsc {

namespace {

CriticEval evaluate_with(const MlpCritic& critic, const SampleMatrix& x, const WitnessMode& mode) {
  if (mode.div.is_exact()) return critic.evaluate(x, nullptr, 0);
  const Matrix v = seeded_probes(critic.dim(), x.rows(), mode.div.probes, mode.probe_seed);
  return critic.evaluate(x, &v, mode.div.probes);
}

}  // namespace

WitnessMode default_witness_mode(int d, std::uint64_t probe_seed) {
  return WitnessMode{default_div_mode(d), probe_seed};
}

Matrix seeded_probes(int d, Eigen::Index n, int k, std::uint64_t seed, std::uint64_t offset) {
  Matrix v(d, n * k);
  for (Eigen::Index i = 0; i < n; ++i) {
    Rng rng = make_rng(seed, offset + static_cast<std::uint64_t>(i));
    v.middleCols(i * k, k) = draw_probes(d, 1, k, rng);
  }
  return v;
}

double witness(const MlpCritic& critic, const ScoreField& q, const Vector& x, DivMode mode, Rng& rng) {
  const SampleMatrix row = x.transpose();
  const CriticEval e = critic.evaluate(row, mode, rng);
  return q.score(x).dot(e.f.row(0).transpose()) + e.div[0];
}

Vector witness_values(const MlpCritic& critic, const ScoreField& q, const SampleMatrix& x,
                      const WitnessMode& mode) {
  const CriticEval e = evaluate_with(critic, x, mode);
  return stein_values(q.score_batch(x), e.f, e.div);
}

Vector stein_values(const SampleMatrix& scores, const SampleMatrix& f, const Vector& div) {
  if (scores.rows() != f.rows() || scores.cols() != f.cols() || div.size() != f.rows()) {
    throw std::invalid_argument("stein_values: shape mismatch");
  }
  return scores.cwiseProduct(f).rowwise().sum() + div;
}

WitnessBatch make_witness_batch(const MlpCritic& critic, const ScoreField& q, const SampleMatrix& x,
                                const WitnessMode& mode, std::string sample_set,
                                std::string checkpoint) {
  return WitnessBatch{witness_values(critic, q, x, mode), std::move(sample_set),
                      std::move(checkpoint), mode};
}

double sd_estimate(const Vector& w) {
  if (w.size() < 1) throw std::invalid_argument("sd_estimate: need at least one sample");
  return w.mean();
}

double sd_estimate(const MlpCritic& critic, const ScoreField& q, const SampleMatrix& samples,
                   const WitnessMode& mode) {
  return sd_estimate(witness_values(critic, q, samples, mode));
}

double empirical_loss(const MlpCritic& critic, const SampleMatrix& samples, const ScoreField& q,
                      double lambda, const WitnessMode& mode) {
  if (!(lambda > 0.0)) throw std::invalid_argument("empirical_loss: lambda must be positive");
  if (samples.rows() < 1) throw std::invalid_argument("empirical_loss: empty sample set");
  const CriticEval e = evaluate_with(critic, samples, mode);
  const SampleMatrix s = q.score_batch(samples);
  const Eigen::RowVectorXd stein = (s.cwiseProduct(e.f).rowwise().sum() + e.div).transpose();
  return (-stein.sum() + 0.5 * lambda * e.f.squaredNorm()) / static_cast<double>(samples.rows());
}

void write_witness_csv(const WitnessBatch& batch, std::ostream& out) {
  CsvWriter csv(out, {"index", "witness"});
  for (Eigen::Index i = 0; i < batch.values.size(); ++i) {
    csv.row(static_cast<long long>(i), batch.values[i]);
  }
}

}  // namespace nsc
