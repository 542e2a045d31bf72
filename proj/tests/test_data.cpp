#include <gtest/gtest.h>

#include <fstream>
#include <iterator>

#include "ciisod/dataset.hpp"
#include "ciisod/image.hpp"
#include "test_util.hpp"

using namespace ciisod;
namespace fs = std::filesystem;

namespace {

std::vector<char> bytes_of(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_raw(const fs::path& p, const std::string& header, std::size_t payload) {
  std::ofstream out(p, std::ios::binary);
  out << header;
  for (std::size_t i = 0; i < payload; ++i) out.put(static_cast<char>(i % 256));
}

double foreground(const GrayMap& m) {
  double s = 0;
  for (float v : m.values) s += v;
  return s / m.size();
}

bool binary(const GrayMap& m) {
  return std::all_of(m.values.begin(), m.values.end(), [](float v) { return v == 0.0f || v == 1.0f; });
}

}  // namespace

TEST(NetPbm, GrayRoundTripWithinQuantization) {
  const auto dir = ciisod::testing::temp_dir("pgm");
  Rng rng(1);
  GrayMap m(13, 17);
  for (float& v : m.values) v = static_cast<float>(rng.uniform());
  write_pgm(m, dir / "m.pgm");
  const GrayMap r = read_pgm(dir / "m.pgm");
  ASSERT_EQ(r.height, 13);
  ASSERT_EQ(r.width, 17);
  for (std::size_t i = 0; i < m.size(); ++i) EXPECT_LE(std::abs(r.values[i] - m.values[i]), 1.0 / 510 + 1e-7);
}

TEST(NetPbm, RgbRoundTripWithinQuantization) {
  const auto dir = ciisod::testing::temp_dir("ppm");
  Rng rng(2);
  RgbImage img(9, 11);
  for (float& v : img.values) v = static_cast<float>(rng.uniform());
  write_ppm(img, dir / "i.ppm");
  const RgbImage r = read_ppm(dir / "i.ppm");
  ASSERT_EQ(r.values.size(), img.values.size());
  for (std::size_t i = 0; i < img.values.size(); ++i) {
    EXPECT_LE(std::abs(r.values[i] - img.values[i]), 1.0 / 510 + 1e-7);
  }
}

TEST(NetPbm, MaskIsBinarized) {
  const auto dir = ciisod::testing::temp_dir("mask");
  GrayMap m(2, 3);
  m.values = {0, 1, 0, 1, 1, 0};
  write_pgm(m, dir / "m.pgm");
  EXPECT_EQ(read_mask(dir / "m.pgm").values, m.values);
  GrayMap soft(1, 4);
  soft.values = {0.49f, 0.51f, 0.2f, 0.9f};
  write_pgm(soft, dir / "s.pgm");
  EXPECT_EQ(read_mask(dir / "s.pgm").values, (std::vector<float>{0, 1, 0, 1}));
}

TEST(NetPbm, RejectsBadFiles) {
  const auto dir = ciisod::testing::temp_dir("bad");
  write_raw(dir / "maxval.ppm", "P6\n2 2\n65535\n", 24);
  EXPECT_THROW(read_ppm(dir / "maxval.ppm"), FormatError);
  write_raw(dir / "max100.ppm", "P6\n2 2\n100\n", 12);
  EXPECT_THROW(read_ppm(dir / "max100.ppm"), FormatError);
  write_raw(dir / "ascii.ppm", "P3\n1 1\n255\n1 2 3\n", 0);
  EXPECT_THROW(read_ppm(dir / "ascii.ppm"), FormatError);
  write_raw(dir / "short.pgm", "P5\n4 4\n255\n", 10);
  EXPECT_THROW(read_pgm(dir / "short.pgm"), FormatError);
  write_raw(dir / "kind.pgm", "P6\n1 1\n255\n", 3);
  EXPECT_THROW(read_pgm(dir / "kind.pgm"), FormatError);
  write_raw(dir / "comment.pgm", "P5\n# note\n2 1\n255\n", 2);
  EXPECT_EQ(read_pgm(dir / "comment.pgm").width, 2);
  EXPECT_THROW(read_pgm(dir / "missing.pgm"), IoError);
}

TEST(Manifest, RoundTripAndErrors) {
  const auto dir = ciisod::testing::temp_dir("manifest");
  const std::vector<ManifestEntry> entries{{"images/a.ppm", "masks/a.pgm"}, {"images/b.ppm", "masks/b.pgm"}};
  write_manifest(entries, dir / kManifestName);
  const auto back = read_manifest(dir / kManifestName);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].image, entries[1].image);
  EXPECT_EQ(back[1].mask, entries[1].mask);
  std::ofstream(dir / "bad.txt") << "no-tab-here\n";
  EXPECT_THROW(read_manifest(dir / "bad.txt"), FormatError);
}

TEST(Generator, SameSeedGivesIdenticalFiles) {
  const auto a = ciisod::testing::temp_dir("gen_a");
  const auto b = ciisod::testing::temp_dir("gen_b");
  const auto c = ciisod::testing::temp_dir("gen_c");
  const auto ea = gen_synthetic(6, 64, 7, a);
  gen_synthetic(6, 64, 7, b);
  gen_synthetic(6, 64, 8, c);
  EXPECT_EQ(bytes_of(a / kManifestName), bytes_of(b / kManifestName));
  bool differs = false;
  for (const auto& e : ea) {
    EXPECT_EQ(bytes_of(a / e.image), bytes_of(b / e.image));
    EXPECT_EQ(bytes_of(a / e.mask), bytes_of(b / e.mask));
    if (bytes_of(a / e.image) != bytes_of(c / e.image)) differs = true;
  }
  EXPECT_TRUE(differs);
}

TEST(Generator, CountsAndForegroundFraction) {
  const auto dir = ciisod::testing::temp_dir("gen_count");
  const auto entries = gen_synthetic(40, 64, 3, dir);
  EXPECT_EQ(entries.size(), 40u);
  std::size_t images = 0, masks = 0;
  for (const auto& f : fs::directory_iterator(dir / "images")) images += f.is_regular_file();
  for (const auto& f : fs::directory_iterator(dir / "masks")) masks += f.is_regular_file();
  EXPECT_EQ(images, 40u);
  EXPECT_EQ(masks, 40u);
  EXPECT_TRUE(fs::exists(dir / kManifestName));
  const auto samples = load_dataset(dir);
  ASSERT_EQ(samples.size(), 40u);
  for (const auto& s : samples) {
    EXPECT_TRUE(binary(s.mask));
    const double fg = foreground(s.mask);
    EXPECT_GE(fg, 0.05) << s.id;
    EXPECT_LE(fg, 0.6) << s.id;
    EXPECT_EQ(s.image.height, 64);
  }
  EXPECT_THROW(gen_synthetic(1, 50, 1, dir), ConfigError);
}

TEST(Generator, InMemorySampleMatchesFiles) {
  const auto dir = ciisod::testing::temp_dir("gen_mem");
  gen_synthetic(3, 32, 5, dir);
  const auto loaded = load_dataset(dir);
  const Sample s = synthesize_sample(32, 5, 2);
  EXPECT_EQ(s.mask.values, loaded[2].mask.values);
  for (std::size_t i = 0; i < s.image.values.size(); ++i) {
    EXPECT_LE(std::abs(s.image.values[i] - loaded[2].image.values[i]), 1.0 / 510 + 1e-7);
  }
}

TEST(Augment, FlipIsInvolution) {
  const Sample s = synthesize_sample(32, 1, 0);
  const Sample twice = flip_horizontal(flip_horizontal(s));
  EXPECT_EQ(twice.image.values, s.image.values);
  EXPECT_EQ(twice.mask.values, s.mask.values);
  Rng rng(1);
  AugmentOptions always{1.0, 1.0, 1.0};
  const Sample a = augment(augment(s, rng, always), rng, always);
  EXPECT_EQ(a.image.values, s.image.values);
  EXPECT_EQ(a.mask.values, s.mask.values);
  const Sample once = flip_horizontal(s);
  EXPECT_EQ(once.mask.at(3, 0), s.mask.at(3, 31));
}

TEST(Augment, FullCropIsIdentity) {
  const Sample s = synthesize_sample(64, 2, 1);
  Rng rng(2);
  const Sample a = augment(s, rng, AugmentOptions{0.0, 1.0, 1.0});
  for (std::size_t i = 0; i < s.image.values.size(); ++i) {
    EXPECT_LE(std::abs(a.image.values[i] - s.image.values[i]), 1e-6);
  }
  EXPECT_EQ(a.mask.values, s.mask.values);
}

TEST(Augment, MasksStayBinaryAndSizesHold) {
  Rng rng(3);
  for (int i = 0; i < 30; ++i) {
    const Sample s = synthesize_sample(64, 3, i);
    const Sample a = augment(s, rng);
    EXPECT_TRUE(binary(a.mask));
    EXPECT_EQ(a.image.height, 64);
    EXPECT_EQ(a.mask.width, 64);
  }
}

TEST(Augment, SeededStreamIsDeterministic) {
  const Sample s = synthesize_sample(64, 4, 0);
  Rng r1(9, "augment"), r2(9, "augment");
  for (int i = 0; i < 5; ++i) {
    EXPECT_EQ(augment(s, r1).image.values, augment(s, r2).image.values);
  }
}

TEST(Batch, TensorLayout) {
  std::vector<Sample> samples{synthesize_sample(32, 1, 0), synthesize_sample(32, 1, 1)};
  const auto b = make_batch<float>(samples);
  EXPECT_EQ(b.images.shape(), (Shape{2, 3, 32, 32}));
  EXPECT_EQ(b.masks.shape(), (Shape{2, 1, 32, 32}));
  EXPECT_EQ(b.images.at(1, 2, 5, 7), samples[1].image.at(2, 5, 7));
  EXPECT_EQ(b.masks.at(1, 0, 5, 7), samples[1].mask.at(5, 7));
  EXPECT_EQ(map_from_tensor(b.masks, 1).values, samples[1].mask.values);
  samples.push_back(synthesize_sample(64, 1, 2));
  EXPECT_THROW(make_batch<float>(samples), DimensionError);
}

TEST(Resize, MapHelpers) {
  GrayMap m(4, 4, 0.25f);
  const GrayMap up = resize_map(m, 8, 8);
  for (float v : up.values) EXPECT_FLOAT_EQ(v, 0.25f);
  GrayMap mask(2, 2);
  mask.values = {1, 0, 0, 1};
  const GrayMap big = resize_mask_nearest(mask, 4, 4);
  EXPECT_EQ(big.at(0, 0), 1.0f);
  EXPECT_EQ(big.at(0, 3), 0.0f);
  EXPECT_EQ(big.at(3, 3), 1.0f);
  RgbImage img(2, 2, 0.0f);
  img.at(0, 0, 0) = 0.3f;
  img.at(1, 0, 0) = 0.6f;
  img.at(2, 0, 0) = 0.9f;
  EXPECT_NEAR(to_gray(img).at(0, 0), 0.6f, 1e-6);
}
