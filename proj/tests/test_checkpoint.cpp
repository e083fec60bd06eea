#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>

#include "ilac/checkpoint.hpp"
#include "ilac/errors.hpp"
#include "test_util.hpp"

namespace ilac {
namespace {

namespace fs = std::filesystem;

Checkpoint sample(bool with_adam) {
  Checkpoint c;
  c.config = testing::small_config();
  c.config.n_iters = 3;
  c.config.node_uses_previous_context = true;
  c.params = init_params(c.config, 21);
  c.epochs_done = 4;
  c.meta = {{"note", "unit"}, {"best_epoch", 2}};
  if (with_adam) {
    AdamState a = AdamState::zeros_like(c.params);
    std::mt19937_64 rng(2);
    for (auto& m : a.m) m = testing::random_tensor(m.shape(), rng);
    for (auto& v : a.v) v = testing::random_tensor(v.shape(), rng, 0.0, 1.0);
    a.t = 37;
    c.adam = a;
  }
  return c;
}

void expect_bitwise(const Tensor& a, const Tensor& b) {
  ASSERT_EQ(a.shape(), b.shape());
  EXPECT_EQ(std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)), 0);
}

TEST(Checkpoint, Float64RoundTripIsBitwise) {
  const Checkpoint c = sample(true);
  const Checkpoint back = deserialize_checkpoint(serialize_checkpoint(c));
  EXPECT_EQ(back.config, c.config);
  EXPECT_EQ(back.epochs_done, 4u);
  EXPECT_EQ(back.meta, c.meta);
  const auto a = param_entries(c.params), b = param_entries(back.params);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].first, b[k].first);
    expect_bitwise(*a[k].second, *b[k].second);
  }
  ASSERT_TRUE(back.adam.has_value());
  EXPECT_EQ(back.adam->t, 37u);
  for (std::size_t k = 0; k < a.size(); ++k) {
    expect_bitwise(c.adam->m[k], back.adam->m[k]);
    expect_bitwise(c.adam->v[k], back.adam->v[k]);
  }
}

TEST(Checkpoint, Float32StorageRoundsEachValueOnce) {
  const Checkpoint c = sample(false);
  const std::string bytes = serialize_checkpoint(c, FloatWidth::kF32);
  EXPECT_LT(bytes.size(), serialize_checkpoint(c, FloatWidth::kF64).size());
  const Checkpoint back = deserialize_checkpoint(bytes);
  EXPECT_FALSE(back.adam.has_value());
  const auto a = param_entries(c.params), b = param_entries(back.params);
  for (std::size_t k = 0; k < a.size(); ++k) {
    for (std::size_t i = 0; i < a[k].second->size(); ++i) {
      EXPECT_EQ((*b[k].second)[i], static_cast<double>(static_cast<float>((*a[k].second)[i])));
    }
  }
  // A float32 file re-saved as float32 is stable.
  EXPECT_EQ(serialize_checkpoint(back, FloatWidth::kF32), bytes);
}

TEST(Checkpoint, SerializationIsDeterministic) {
  EXPECT_EQ(serialize_checkpoint(sample(true)), serialize_checkpoint(sample(true)));
}

TEST(Checkpoint, FileRoundTrip) {
  const fs::path p = fs::temp_directory_path() / "ilac_test_checkpoint.ckpt";
  const Checkpoint c = sample(true);
  save_checkpoint(p, c);
  const Checkpoint back = load_checkpoint(p);
  EXPECT_EQ(back.config, c.config);
  fs::remove(p);
  EXPECT_THROW(load_checkpoint(p), InputError);
}

TEST(Checkpoint, BadMagicIsAVersionError) {
  std::string bytes = serialize_checkpoint(sample(false));
  bytes[0] = 'X';
  EXPECT_THROW(deserialize_checkpoint(bytes), VersionError);
  EXPECT_THROW(deserialize_checkpoint("ILAC"), VersionError);
}

TEST(Checkpoint, TruncatedOrPaddedFilesAreRejected) {
  const std::string bytes = serialize_checkpoint(sample(false));
  EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, bytes.size() - 3)), VersionError);
  EXPECT_THROW(deserialize_checkpoint(bytes + "x"), VersionError);
}

TEST(Checkpoint, HeaderDisagreeingWithArraysIsAVersionError) {
  // Swap the stored config for one with a different hidden size.
  const Checkpoint c = sample(false);
  std::string bytes = serialize_checkpoint(c);
  std::uint64_t len = 0;
  std::memcpy(&len, bytes.data() + 8, sizeof len);
  auto header = nlohmann::json::parse(bytes.substr(16, len));
  header["config"]["d_v"] = 9;
  const std::string text = header.dump();
  const std::uint64_t new_len = text.size();
  std::string patched = bytes.substr(0, 8);
  patched.append(reinterpret_cast<const char*>(&new_len), sizeof new_len);
  patched += text;
  patched += bytes.substr(16 + len);
  EXPECT_THROW(deserialize_checkpoint(patched), VersionError);
}

TEST(Checkpoint, UnknownFormatTagIsAVersionError) {
  std::string bytes = serialize_checkpoint(sample(false));
  const auto at = bytes.find("ilac-checkpoint/1");
  ASSERT_NE(at, std::string::npos);
  bytes[at + 16] = '9';
  EXPECT_THROW(deserialize_checkpoint(bytes), VersionError);
}

}  // namespace
}  // namespace ilac
