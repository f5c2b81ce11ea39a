#include <cmath>
#include <fstream>
#include <random>

#include <boost/math/distributions/normal.hpp>
#include <gtest/gtest.h>

#include "qmcrisk/qsource/bit_sources.hpp"
#include "qmcrisk/rand/bits.hpp"
#include "qmcrisk/rand/normal.hpp"
#include "qmcrisk/rand/pool.hpp"
#include "support.hpp"

namespace qmcrisk::rand {
namespace {

using qmcrisk::testing::expect_error;
using qmcrisk::testing::TempDir;

BitBuffer bits_of(std::vector<std::uint8_t> v) { return BitBuffer{std::move(v), "test"}; }

std::vector<std::uint8_t> random_bits(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::vector<std::uint8_t> out(n);
  for (auto& b : out) b = static_cast<std::uint8_t>(g() & 1);
  return out;
}

// Normal CDF from the Maclaurin series of erf, then bisection for the quantile.
double series_cdf(double x) {
  const double z = x / std::sqrt(2.0);
  double term = z, sum = z;
  for (int n = 1; n < 200; ++n) {
    term *= -z * z / n;
    sum += term / (2 * n + 1);
  }
  return 0.5 + sum / std::sqrt(M_PI);
}

double bisect_quantile(double u) {
  double lo = -8.0, hi = 8.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (series_cdf(mid) < u ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

TEST(BitsToUniform, ZeroBitsDecodeToZero) {
  const auto batch = bits_to_uniform(bits_of(std::vector<std::uint8_t>(53, 0)));
  ASSERT_EQ(batch.values.size(), 1u);
  EXPECT_EQ(batch.values[0], 0.0);
  EXPECT_EQ(batch.bits_consumed, 53u);
}

TEST(BitsToUniform, OneBitsDecodeToLargestValue) {
  const auto batch = bits_to_uniform(bits_of(std::vector<std::uint8_t>(53, 1)));
  EXPECT_EQ(batch.values[0], (std::ldexp(1.0, 53) - 1.0) / std::ldexp(1.0, 53));
}

TEST(BitsToUniform, LeadingBitWeighsOneHalf) {
  std::vector<std::uint8_t> v(53, 0);
  v[0] = 1;
  EXPECT_EQ(bits_to_uniform(bits_of(v)).values[0], 0.5);
}

TEST(BitsToUniform, RemainderIsReported) {
  const auto batch = bits_to_uniform(bits_of(random_bits(53 * 3 + 17, 1)));
  EXPECT_EQ(batch.values.size(), 3u);
  EXPECT_EQ(batch.bits_consumed, 159u);
  EXPECT_EQ(batch.remainder_bits, 17u);
}

TEST(BitsToUniform, TooFewBitsNamesCounts) {
  const auto e = expect_error(ErrorCode::insufficient_entropy, [] { bits_to_uniform(bits_of(random_bits(52, 2))); });
  EXPECT_EQ(e.detail().at("required"), "53");
  EXPECT_EQ(e.detail().at("available"), "52");
}

TEST(BitsToUniform, MatchesPositionalSum) {
  const auto bits = random_bits(53 * 40, 3);
  const auto batch = bits_to_uniform(bits_of(bits));
  for (std::size_t i = 0; i < batch.values.size(); ++i) {
    double expected = 0.0;
    for (int j = 0; j < 53; ++j) expected += bits[i * 53 + j] * std::ldexp(1.0, -(j + 1));
    EXPECT_EQ(batch.values[i], expected);
    EXPECT_GE(batch.values[i], 0.0);
    EXPECT_LT(batch.values[i], 1.0);
  }
}

TEST(DecodeUniforms, AgreesWithUnpackedDecodingAtAnyOffset) {
  const auto bits = random_bits(8 * 400, 4);
  const auto packed = pack_bits(bits);
  for (std::uint64_t offset : {0u, 1u, 5u, 7u, 8u, 13u, 53u, 63u, 64u, 65u, 250u}) {
    const std::size_t count = (bits.size() - offset) / 53;
    std::vector<double> fast(count);
    decode_uniforms(packed, offset, fast);
    const auto slow = bits_to_uniform(
        bits_of(std::vector<std::uint8_t>(bits.begin() + static_cast<long>(offset), bits.end())));
    ASSERT_EQ(slow.values.size(), count);
    for (std::size_t i = 0; i < count; ++i) ASSERT_EQ(fast[i], slow.values[i]) << "offset " << offset << " i " << i;
  }
}

TEST(PackBits, RoundTripsThroughUnpack) {
  const auto bits = random_bits(8 * 33, 5);
  const auto back = unpack_bytes(pack_bits(bits), "x");
  EXPECT_EQ(back.bits, bits);
  EXPECT_EQ(pack_bits(std::vector<std::uint8_t>{1, 0, 1}), std::vector<std::uint8_t>{0xA0});
}

TEST(BitBuffer, ValidateRejectsNonBinaryAndEmptyOrigin) {
  expect_error(ErrorCode::domain, [] { BitBuffer{{0, 2}, "x"}.validate(); });
  expect_error(ErrorCode::domain, [] { BitBuffer{{0, 1}, ""}.validate(); });
  BitBuffer{{}, "x"}.validate();
}

TEST(VonNeumann, Examples) {
  EXPECT_EQ(von_neumann_extract(bits_of({0, 1, 1, 0})).bits, (std::vector<std::uint8_t>{0, 1}));
  EXPECT_TRUE(von_neumann_extract(bits_of({0, 0, 1, 1})).bits.empty());
  EXPECT_EQ(von_neumann_extract(bits_of({1, 0, 0, 1, 0, 1})).bits, (std::vector<std::uint8_t>{1, 0, 0}));
  EXPECT_TRUE(von_neumann_extract(bits_of({1})).bits.empty());
  EXPECT_EQ(von_neumann_extract(bits_of({1, 0, 1})).bits, (std::vector<std::uint8_t>{1}));
}

TEST(VonNeumann, OutputNeverExceedsHalfTheInput) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto in = random_bits(1 + seed * 37, seed);
    const auto out = von_neumann_extract(bits_of(in));
    EXPECT_LE(out.size(), in.size() / 2);
    std::size_t unequal = 0;
    for (std::size_t i = 0; i + 1 < in.size(); i += 2) unequal += in[i] != in[i + 1];
    EXPECT_EQ(out.size(), unequal);
  }
}

TEST(InverseNormal, Median) { EXPECT_EQ(inverse_normal_cdf(0.5), 0.0); }

TEST(InverseNormal, MatchesSeriesBisectionOracle) {
  EXPECT_NEAR(inverse_normal_cdf(0.975), 1.959964, 1e-6);
  EXPECT_NEAR(inverse_normal_cdf(0.158655), -1.0, 1e-5);
  for (double u : {0.001, 0.02, 0.02425, 0.1, 0.3, 0.5, 0.7, 0.9, 0.97575, 0.99, 0.999}) {
    EXPECT_NEAR(inverse_normal_cdf(u), bisect_quantile(u), 1e-9) << "u = " << u;
  }
}

TEST(InverseNormal, MatchesBoostQuantileAcrossTails) {
  const boost::math::normal_distribution<double> nd;
  for (double e = -15.0; e <= -0.31; e += 0.05) {
    const double u = std::pow(10.0, e);
    EXPECT_NEAR(inverse_normal_cdf(u), boost::math::quantile(nd, u), 1e-8 * std::max(1.0, std::abs(std::log(u))))
        << "u = " << u;
    EXPECT_NEAR(inverse_normal_cdf(1.0 - u), boost::math::quantile(nd, 1.0 - u), 1e-8 * std::max(1.0, -std::log(u)));
  }
}

TEST(InverseNormal, AntisymmetricAndMonotone) {
  double previous = -INFINITY;
  for (int i = 1; i < 4096; ++i) {
    const double u = i / 4096.0;  // dyadic, so 1 - u is exact
    const double x = inverse_normal_cdf(u);
    EXPECT_EQ(x, -inverse_normal_cdf(1.0 - u));
    EXPECT_GT(x, previous);
    previous = x;
  }
}

TEST(InverseNormal, DomainErrors) {
  for (double u : {0.0, 1.0, -0.1, 1.5, std::nan("")}) {
    expect_error(ErrorCode::domain, [u] { inverse_normal_cdf(u); });
  }
}

TEST(InverseNormal, ZeroUniformIsRemapped) {
  EXPECT_EQ(inverse_normal_cdf_unchecked(0.0), inverse_normal_cdf(kZeroUniform));
  EXPECT_TRUE(std::isfinite(inverse_normal_cdf_unchecked(0.0)));
}

TEST(UniformsToNormals, Examples) {
  EXPECT_EQ(uniforms_to_normals(UniformBatch{{0.5, 0.5}, "s", 106, 0}).values, (std::vector<double>{0.0, 0.0}));
  EXPECT_NEAR(uniforms_to_normals(UniformBatch{{0.975}, "s", 53, 0}).values[0], 1.959964, 1e-6);
  const auto empty = uniforms_to_normals(UniformBatch{{}, "s", 0, 0});
  EXPECT_TRUE(empty.values.empty());
  EXPECT_EQ(empty.source, "s");
}

TEST(UniformsToNormals, AllOutputsFinite) {
  std::vector<double> u = {0.0, 0x1p-53, 0.5, 1.0 - 0x1p-53};
  uniforms_to_normals(std::span<double>(u));
  for (double x : u) EXPECT_TRUE(std::isfinite(x));
}

PoolMetadata meta(std::string source = "mock-1") {
  return PoolMetadata{std::move(source), "2024-01-02T03:04:05Z", false, std::nullopt};
}

TEST(EntropyPool, CreateFromMockSource) {
  TempDir dir;
  qsource::MockBitSource source(7, 0.5);
  auto pool = EntropyPool::create(dir / "p.qpool", source, 1024, meta());
  EXPECT_EQ(pool.total_bytes(), 1024u);
  EXPECT_EQ(pool.cursor(), 0u);
  EXPECT_EQ(pool.remaining(), 1024u);
}

TEST(EntropyPool, PartialFillNamesBytesObtained) {
  TempDir dir;
  qsource::MemoryByteSource source(std::vector<std::uint8_t>(512, 0xAB), "short");
  const auto e = expect_error(ErrorCode::partial_fill,
                              [&] { EntropyPool::create(dir / "p.qpool", source, 1024, meta()); });
  EXPECT_EQ(e.detail().at("obtained"), "512");
  EXPECT_FALSE(std::filesystem::exists(dir / "p.qpool"));
}

TEST(EntropyPool, MetadataRoundTrips) {
  TempDir dir;
  PoolMetadata m{"remote-anu", "2024-05-06T07:08:09Z", true, std::string("validation-1")};
  std::vector<std::uint8_t> payload = {1, 2, 3, 4, 5};
  EntropyPool::create(dir / "p.qpool", payload, m);
  const auto reopened = EntropyPool::open(dir / "p.qpool");
  EXPECT_EQ(reopened.metadata(), m);
  EXPECT_EQ(reopened.total_bytes(), 5u);
}

TEST(EntropyPool, HeaderLayoutIsBigEndian) {
  TempDir dir;
  std::vector<std::uint8_t> payload = {0xDE, 0xAD, 0xBE, 0xEF};
  EntropyPool::create(dir / "p.qpool", payload, meta());
  std::ifstream in(dir / "p.qpool", std::ios::binary);
  std::vector<unsigned char> file((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  ASSERT_GT(file.size(), 20u);
  EXPECT_EQ(std::string(file.begin(), file.begin() + 8), std::string("QPOOL\0\0\0", 8));
  EXPECT_EQ(file[8], 0);
  EXPECT_EQ(file[9], 1);
  for (int i = 10; i < 16; ++i) EXPECT_EQ(file[i], 0);
  const std::size_t len = (std::size_t{file[16]} << 24) | (std::size_t{file[17]} << 16) |
                          (std::size_t{file[18]} << 8) | file[19];
  ASSERT_EQ(file.size(), 20 + len + 4);
  const std::string doc(file.begin() + 20, file.begin() + 20 + static_cast<long>(len));
  EXPECT_NE(doc.find("source=mock-1\n"), std::string::npos);
  EXPECT_NE(doc.find("extractor=false\n"), std::string::npos);
  EXPECT_EQ(std::vector<unsigned char>(file.end() - 4, file.end()), (std::vector<unsigned char>{0xDE, 0xAD, 0xBE, 0xEF}));
}

TEST(EntropyPool, ReadsAreDisjointAndAdvanceCursor) {
  TempDir dir;
  std::vector<std::uint8_t> payload = {0xF0, 0x0F, 0xAA, 0x55};
  auto pool = EntropyPool::create(dir / "p.qpool", payload, meta());
  const auto a = pool.read(2);
  const auto b = pool.read(2);
  EXPECT_EQ(pack_bits(a.bits), (std::vector<std::uint8_t>{0xF0, 0x0F}));
  EXPECT_EQ(pack_bits(b.bits), (std::vector<std::uint8_t>{0xAA, 0x55}));
  EXPECT_EQ(pool.cursor(), 4u);
}

TEST(EntropyPool, OverReadNamesRemaining) {
  TempDir dir;
  auto pool = EntropyPool::create(dir / "p.qpool", std::vector<std::uint8_t>(4, 1), meta());
  const auto e = expect_error(ErrorCode::pool_exhausted, [&] { pool.read(8); });
  EXPECT_EQ(e.detail().at("remaining"), "4");
  EXPECT_EQ(pool.cursor(), 0u);
}

TEST(EntropyPool, ZeroReadLeavesCursor) {
  TempDir dir;
  auto pool = EntropyPool::create(dir / "p.qpool", std::vector<std::uint8_t>(4, 1), meta());
  pool.read(1);
  EXPECT_TRUE(pool.read(0).empty());
  EXPECT_EQ(pool.cursor(), 1u);
}

TEST(EntropyPool, CursorSurvivesReopen) {
  TempDir dir;
  std::vector<std::uint8_t> payload(64);
  for (std::size_t i = 0; i < payload.size(); ++i) payload[i] = static_cast<std::uint8_t>(i);
  {
    auto pool = EntropyPool::create(dir / "p.qpool", payload, meta());
    pool.read(10);
    const auto r = pool.reserve(6);
    EXPECT_EQ(r.offset, 10u);
    EXPECT_EQ(r.length, 6u);
  }
  auto pool = EntropyPool::open(dir / "p.qpool");
  EXPECT_EQ(pool.cursor(), 16u);
  EXPECT_EQ(pack_bits(pool.read(1).bits)[0], 16);
}

TEST(EntropyPool, ReadRangeDoesNotMoveCursor) {
  TempDir dir;
  std::vector<std::uint8_t> payload = {9, 8, 7, 6, 5};
  auto pool = EntropyPool::create(dir / "p.qpool", payload, meta());
  std::vector<std::uint8_t> out(3);
  pool.read_range(1, out);
  EXPECT_EQ(out, (std::vector<std::uint8_t>{8, 7, 6}));
  EXPECT_EQ(pool.cursor(), 0u);
}

TEST(EntropyPool, RejectsForeignFiles) {
  TempDir dir;
  std::ofstream(dir / "junk") << "definitely not a pool file";
  expect_error(ErrorCode::format, [&] { EntropyPool::open(dir / "junk"); });
  expect_error(ErrorCode::storage, [&] { EntropyPool::open(dir / "missing"); });
}

TEST(EntropyPool, UnwritableTargetIsStorageError) {
  qsource::MockBitSource source(1, 0.5);
  expect_error(ErrorCode::storage,
               [&] { EntropyPool::create("/nonexistent-dir/sub/p.qpool", source, 16, meta()); });
}

}  // namespace
}  // namespace qmcrisk::rand
