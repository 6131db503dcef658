#include "nsc/checkpoint.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace nsc {

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_vector(std::ostream& out, const char* key, const ParamVector& v) {
  out << key;
  for (Eigen::Index i = 0; i < v.size(); ++i) out << ' ' << fmt17(v[i]);
  out << '\n';
}

std::istringstream expect_line(std::istream& in, const std::string& key) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("checkpoint: missing '" + key + "'");
  std::istringstream ls(line);
  std::string got;
  ls >> got;
  if (got != key) throw std::runtime_error("checkpoint: expected '" + key + "', found '" + got + "'");
  return ls;
}

double parse_double(const std::string& tok) {
  double v = 0.0;
  const char* end = tok.data() + tok.size();
  const auto [ptr, ec] = std::from_chars(tok.data(), end, v);
  if (ec != std::errc{} || ptr != end) throw std::runtime_error("checkpoint: bad number '" + tok + "'");
  return v;
}

ParamVector read_vector(std::istream& in, const std::string& key, std::size_t count) {
  auto ls = expect_line(in, key);
  ParamVector v(static_cast<Eigen::Index>(count));
  std::string tok;
  for (std::size_t i = 0; i < count; ++i) {
    if (!(ls >> tok)) throw std::runtime_error("checkpoint: '" + key + "' too short");
    v[static_cast<Eigen::Index>(i)] = parse_double(tok);
  }
  if (ls >> tok) throw std::runtime_error("checkpoint: '" + key + "' too long");
  return v;
}

}  // namespace

Checkpoint Checkpoint::from_critic(const MlpCritic& critic, double lambda, long long interval,
                                   double monitor, std::uint64_t seed) {
  Checkpoint c;
  c.d = critic.dim();
  c.h = critic.width();
  c.params = critic.params();
  c.lambda = lambda;
  c.interval = interval;
  c.monitor = monitor;
  c.seed = seed;
  if (critic.centered()) c.reference = pack(*critic.reference());
  return c;
}

MlpCritic Checkpoint::to_critic() const {
  if (activation != "swish") throw std::runtime_error("checkpoint: unsupported activation " + activation);
  MlpCritic critic(unpack(params, d, h));
  if (reference) critic.set_reference(unpack(*reference, d, h));
  return critic;
}

void save_checkpoint(const Checkpoint& c, std::ostream& out) {
  out << "nsc-checkpoint 1\n";
  out << "d " << c.d << '\n';
  out << "h " << c.h << '\n';
  out << "activation " << c.activation << '\n';
  out << "lambda " << fmt17(c.lambda) << '\n';
  out << "interval " << c.interval << '\n';
  out << "monitor " << fmt17(c.monitor) << '\n';
  out << "seed " << c.seed << '\n';
  out << "centered " << (c.reference ? 1 : 0) << '\n';
  write_vector(out, "params", c.params);
  if (c.reference) write_vector(out, "reference", *c.reference);
}

Checkpoint load_checkpoint(std::istream& in) {
  Checkpoint c;
  {
    auto ls = expect_line(in, "nsc-checkpoint");
    int version = 0;
    ls >> version;
    if (version != 1) throw std::runtime_error("checkpoint: unsupported version");
  }
  expect_line(in, "d") >> c.d;
  expect_line(in, "h") >> c.h;
  expect_line(in, "activation") >> c.activation;
  if (c.activation != "swish") throw std::runtime_error("checkpoint: unsupported activation " + c.activation);
  std::string tok;
  expect_line(in, "lambda") >> tok;
  c.lambda = parse_double(tok);
  expect_line(in, "interval") >> c.interval;
  expect_line(in, "monitor") >> tok;
  c.monitor = parse_double(tok);
  expect_line(in, "seed") >> c.seed;
  int centered = 0;
  expect_line(in, "centered") >> centered;
  if (c.d < 1 || c.h < 1) throw std::runtime_error("checkpoint: bad architecture");
  const std::size_t m = param_count(c.d, c.h);
  c.params = read_vector(in, "params", m);
  if (centered) c.reference = read_vector(in, "reference", m);
  return c;
}

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  save_checkpoint(c, out);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return load_checkpoint(in);
}

}  // namespace nsc
