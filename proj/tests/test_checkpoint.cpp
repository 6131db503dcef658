#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "nsc/checkpoint.hpp"
#include "test_util.hpp"

using namespace nsc;

namespace {

MlpCritic odd_critic(bool centered) {
  Rng rng = make_rng(1, 0);
  MlpCritic c = MlpCritic::init(3, 7, rng);
  if (centered) c.enable_centering();
  // Values that do not survive short decimal printing.
  ParamVector p = c.params();
  p[0] = 0.1 + 0.2;
  p[1] = 1.0 / 3.0;
  p[2] = -5e-310;
  p[3] = 2.0 / 7.0 * 1e-3;
  c.set_params(p);
  return c;
}

void expect_same_outputs(const MlpCritic& a, const MlpCritic& b) {
  Rng rng = make_rng(2, 0);
  const SampleMatrix x = nsc::testing::random_samples(50, 3, rng) * 1e-300;
  const SampleMatrix y = nsc::testing::random_samples(50, 3, rng);
  EXPECT_EQ(a.forward_batch(x), b.forward_batch(x));
  EXPECT_EQ(a.forward_batch(y), b.forward_batch(y));
}

}  // namespace

TEST(Checkpoint, RoundTripIsBitExact) {
  for (bool centered : {false, true}) {
    const MlpCritic c = odd_critic(centered);
    const Checkpoint ck = Checkpoint::from_critic(c, 0.0123, 17, -0.456, 0xfedcba9876543210ull);
    std::stringstream buf;
    save_checkpoint(ck, buf);
    const Checkpoint back = load_checkpoint(buf);
    EXPECT_EQ(back.d, 3);
    EXPECT_EQ(back.h, 7);
    EXPECT_EQ(back.activation, "swish");
    EXPECT_EQ(back.params, ck.params);
    EXPECT_EQ(back.lambda, 0.0123);
    EXPECT_EQ(back.interval, 17);
    EXPECT_EQ(back.monitor, -0.456);
    EXPECT_EQ(back.seed, 0xfedcba9876543210ull);
    EXPECT_EQ(back.reference.has_value(), centered);
    const MlpCritic restored = back.to_critic();
    EXPECT_EQ(restored.centered(), centered);
    expect_same_outputs(c, restored);
  }
}

TEST(Checkpoint, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "nsc_checkpoint_test.ckpt";
  const MlpCritic c = odd_critic(true);
  save_checkpoint(Checkpoint::from_critic(c, 1.0, 0, 0.0, 5), path);
  expect_same_outputs(c, load_checkpoint(path).to_critic());
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint(path), std::runtime_error);
}

TEST(Checkpoint, HeaderLayout) {
  Layers l = Layers::zeros(1, 1);
  const Checkpoint ck = Checkpoint::from_critic(MlpCritic(l), 0.5, 2, 0.25, 9);
  std::stringstream buf;
  save_checkpoint(ck, buf);
  std::string first;
  std::getline(buf, first);
  EXPECT_EQ(first, "nsc-checkpoint 1");
  EXPECT_NE(buf.str().find("\nactivation swish\n"), std::string::npos);
  EXPECT_NE(buf.str().find("\ncentered 0\n"), std::string::npos);
}

TEST(Checkpoint, RejectsCorruptInput) {
  std::stringstream bad_magic("not-a-checkpoint 1\n");
  EXPECT_THROW(load_checkpoint(bad_magic), std::runtime_error);

  const Checkpoint ck = Checkpoint::from_critic(odd_critic(false), 1.0, 0, 0.0, 0);
  std::stringstream buf;
  save_checkpoint(ck, buf);
  std::string text = buf.str();
  text = text.substr(0, text.size() - 30);  // truncate the parameter line
  std::stringstream truncated(text);
  EXPECT_THROW(load_checkpoint(truncated), std::runtime_error);

  std::string relabeled = buf.str();
  relabeled.replace(relabeled.find("swish"), 5, "tanh!");
  std::stringstream act(relabeled);
  EXPECT_THROW(load_checkpoint(act), std::runtime_error);
}
