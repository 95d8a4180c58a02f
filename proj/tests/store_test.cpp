#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <filesystem>

#include "oracles.hpp"
#include "volreg/store/container.hpp"
#include "volreg/store/octv.hpp"
#include "volreg/store/table.hpp"
#include "volreg/synth/phantom.hpp"

using namespace volreg;
using namespace volreg::store;

namespace {

Volume random_volume(Extents3 e, std::uint64_t seed) {
  Rng rng(seed);
  Volume v;
  v.voxels = oracle::random_tensor<float>({e[0], e[1], e[2]}, rng);
  v.spacing_mm = {0.09375f, 0.09375f, 0.015625f};
  v.scan_id = "P0007-OS-MAC";
  v.patient_id = "P0007";
  v.laterality = Laterality::Left;
  v.region = Region::Macula;
  return v;
}

std::uint32_t u32_at(const Bytes& b, std::size_t at) {
  return b[at] | (b[at + 1] << 8) | (b[at + 2] << 16) | (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("volreg_store_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

Schema feature_like_schema() {
  return {{"scan_id", CellKind::Text}, {"a", CellKind::Real, 0, 10}, {"b", CellKind::Real}};
}

}  // namespace

TEST(Octv, HeaderBytesForStandardOnhVolume) {
  Volume v;
  v.voxels = Tensor({64, 64, 128});
  v.scan_id = "A";
  const Bytes b = encode_volume(v);
  ASSERT_GE(b.size(), 40u);
  EXPECT_EQ(b[0], 0x4F);
  EXPECT_EQ(b[1], 0x43);
  EXPECT_EQ(b[2], 0x54);
  EXPECT_EQ(b[3], 0x56);
  EXPECT_EQ(u32_at(b, 4), 1u);
  EXPECT_EQ(u32_at(b, 8), 64u);
  EXPECT_EQ(u32_at(b, 12), 64u);
  EXPECT_EQ(u32_at(b, 16), 128u);
  EXPECT_EQ(b[32], 0);  // right eye
  EXPECT_EQ(b[33], 0);  // ONH
  EXPECT_EQ(u32_at(b, 34), 1u);
  EXPECT_EQ(b[38], 'A');
  EXPECT_EQ(b.size(), 39u + 64 * 64 * 128 * 4);
}

TEST(Octv, VoxelsAreStoredXFastest) {
  Volume v;
  v.voxels = Tensor({2, 1, 2}, {1, 2, 3, 4});  // (x, z): (0,0)=1 (0,1)=2 (1,0)=3 (1,1)=4
  v.scan_id = "s";
  const Bytes b = encode_volume(v);
  const std::size_t data = b.size() - 16;
  const float expect[] = {1, 3, 2, 4};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(std::bit_cast<float>(u32_at(b, data + 4 * i)), expect[i]);
}

TEST(Octv, RoundTripIsBitExact) {
  Volume v = random_volume({8, 8, 8}, 1);
  v.voxels[5] = -0.0f;
  v.voxels[6] = std::numeric_limits<float>::denorm_min();
  const auto dir = temp_dir("octv");
  write_volume(v, dir / "v.octv");
  const Volume r = read_volume(dir / "v.octv");
  EXPECT_EQ(r, v);
  for (std::size_t i = 0; i < v.voxels.size(); ++i) {
    EXPECT_EQ(std::bit_cast<std::uint32_t>(r.voxels[i]), std::bit_cast<std::uint32_t>(v.voxels[i]));
  }
  write_volume(v, dir / "w.octv");
  EXPECT_EQ(read_file(dir / "v.octv"), read_file(dir / "w.octv"));
  std::filesystem::remove_all(dir);
}

TEST(Octv, EveryTruncationFailsWithOffset) {
  const Bytes b = encode_volume(random_volume({3, 2, 2}, 2));
  for (std::size_t n = 0; n < b.size(); ++n) {
    const std::span<const std::uint8_t> cut(b.data(), n);
    try {
      decode_volume(cut);
      ADD_FAILURE() << "decoded a volume from " << n << " bytes";
    } catch (const FormatError& e) {
      EXPECT_LE(e.offset(), n);
    }
  }
}

TEST(Octv, BadMagicVersionAndCodes) {
  Bytes b = encode_volume(random_volume({2, 2, 2}, 3));
  Bytes bad = b;
  bad[0] = 'X';
  EXPECT_THROW(decode_volume(bad), FormatError);
  bad = b;
  bad[4] = 2;
  try {
    decode_volume(bad);
    ADD_FAILURE();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 4u);
  }
  bad = b;
  bad[8] = 0;
  EXPECT_THROW(decode_volume(bad), FormatError);
  bad = b;
  bad[32] = 7;
  EXPECT_THROW(decode_volume(bad), FormatError);
  bad = b;
  bad.push_back(0);
  EXPECT_THROW(decode_volume(bad), FormatError);
}

TEST(Octv, MissingFileLeavesNoPartialResult) {
  EXPECT_THROW(read_volume("/nonexistent/volreg/none.octv"), std::exception);
}

TEST(Container, RoundTripPreservesEveryBit) {
  Container c;
  Rng rng(4);
  c.add("w", oracle::random_tensor<float>({3, 2}, rng));
  c.add("d", oracle::random_tensor<double>({4}, rng));
  c.set("seed", "18446744073709551615");
  c.set("pc", format_number(0.1 + 0.2));
  const Bytes b = encode_container(c);
  EXPECT_EQ(std::string(b.begin(), b.begin() + 4), "VRCK");
  EXPECT_EQ(u32_at(b, 4), kContainerVersion);
  const Container r = decode_container(b);
  EXPECT_EQ(r, c);
  EXPECT_EQ(encode_container(r), b);
  EXPECT_EQ(r.require_number("pc"), 0.1 + 0.2);
  EXPECT_THROW(r.require("missing"), FormatError);
  EXPECT_THROW(r.f32("d"), std::exception);
}

TEST(Container, EveryTruncationFails) {
  Container c;
  c.add("w", Tensor({2, 2}, 1.5f));
  c.set("k", "v");
  const Bytes b = encode_container(c);
  for (std::size_t n = 0; n < b.size(); ++n) {
    EXPECT_THROW(decode_container(std::span<const std::uint8_t>(b.data(), n)), FormatError) << n;
  }
}

TEST(Container, RejectsBadKeysAndDuplicates) {
  Container c;
  EXPECT_THROW(c.set("a=b", "1"), InvalidArgument);
  EXPECT_THROW(c.set("", "1"), InvalidArgument);
  EXPECT_THROW(c.set("a", "x\ny"), InvalidArgument);
  c.add("t", Tensor({1}));
  EXPECT_THROW(c.add("t", Tensor({1})), InvalidArgument);
}

TEST(Numbers, ShortestRoundTrip) {
  Rng rng(5);
  for (int i = 0; i < 2000; ++i) {
    const double v = std::ldexp(rng.uniform(-1, 1), static_cast<int>(rng.uniform_int(-60, 60)));
    EXPECT_EQ(parse_number(format_number(v)), v);
  }
  EXPECT_EQ(format_number(0.5), "0.5");
  EXPECT_FALSE(parse_number("1.5x").has_value());
  EXPECT_FALSE(parse_number("").has_value());
}

TEST(Table, WriteThenReadThreeRows) {
  Table t{feature_like_schema(), {}};
  t.add_row({std::string("s1"), 1.0, 0.1 + 0.2});
  t.add_row({std::string("s2"), 2.5, -1e-300});
  t.add_row({std::string("s3"), 10.0, 123456789.123456789});
  const auto dir = temp_dir("table");
  write_table(t, dir / "t.csv");
  const Table r = read_table(dir / "t.csv", feature_like_schema());
  ASSERT_EQ(r.rows.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(r.rows[i], t.rows[i]);
  std::filesystem::remove_all(dir);
}

TEST(Table, MisspelledHeaderNamesTheColumn) {
  try {
    parse_table("scan_id,aa,b\ns1,1,2\n", feature_like_schema());
    ADD_FAILURE();
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.row(), -1);
    EXPECT_EQ(e.column(), 1);
    EXPECT_NE(std::string(e.what()).find("aa"), std::string::npos);
  }
}

TEST(Table, CellErrorsCarryRowAndColumn) {
  try {
    parse_table("scan_id,a,b\ns1,1,2\ns2,x,2\n", feature_like_schema());
    ADD_FAILURE();
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.row(), 1);
    EXPECT_EQ(e.column(), 1);
  }
  EXPECT_THROW(parse_table("scan_id,a,b\ns1,11,2\n", feature_like_schema()), SchemaError);
  EXPECT_THROW(parse_table("scan_id,a,b\ns1,1\n", feature_like_schema()), SchemaError);
  EXPECT_THROW(parse_table("scan_id,a,b\ns1,nan,1\n", feature_like_schema()), SchemaError);
}

TEST(Table, WriterRejectsCommasInText) {
  Table t{feature_like_schema(), {}};
  t.add_row({std::string("a,b"), 1.0, 1.0});
  EXPECT_THROW(format_table(t), std::exception);
}

TEST(Table, VfiAboveRangeIsRejected) {
  synth::ScanRecord rec;
  rec.scan_id = "P0001-OD-ONH";
  rec.patient_id = "P0001";
  std::string text = format_table(synth::records_to_table(std::span<const synth::ScanRecord>(&rec, 1)));
  const auto pos = text.find(",100,");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 5, ",101,");
  EXPECT_THROW(parse_table(text, synth::record_schema()), SchemaError);
}
