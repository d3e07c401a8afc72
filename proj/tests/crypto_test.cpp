// Hash and RNG primitives: published vectors, an independent OpenSSL oracle,
// and the determinism guarantees the rest of the toolkit leans on.

#include <gtest/gtest.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>

#include <set>
#include <string>
#include <vector>

#include "fedehr/rng.hpp"
#include "fedehr/sha256.hpp"

namespace {

using namespace fedehr;

std::string openssl_sha256_hex(const std::string& msg) {
  unsigned char digest[32];
  unsigned int len = 0;
  EVP_Digest(msg.data(), msg.size(), digest, &len, EVP_sha256(), nullptr);
  return hex_encode(digest, len);
}

TEST(Sha256, PublishedVectors) {
  // NIST FIPS 180-4 examples.
  EXPECT_EQ(hex_encode(sha256("")),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(hex_encode(sha256("abc")),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(hex_encode(sha256("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq")),
            "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
}

TEST(Sha256, MatchesOpenSslOnVariedLengths) {
  Rng rng(41);
  for (std::size_t len : {0u, 1u, 55u, 56u, 63u, 64u, 65u, 127u, 128u, 1000u, 4096u}) {
    std::string msg(len, '\0');
    for (char& c : msg) c = static_cast<char>(rng.next_below(256));
    EXPECT_EQ(hex_encode(sha256(msg)), openssl_sha256_hex(msg)) << "length " << len;
  }
}

TEST(Sha256, StreamingEqualsOneShot) {
  const std::string msg(300, 'x');
  Sha256 ctx;
  ctx.update(msg.substr(0, 7));
  ctx.update(msg.substr(7, 130));
  ctx.update(msg.substr(137));
  EXPECT_EQ(hex_encode(ctx.finish()), hex_encode(sha256(msg)));
}

TEST(HmacSha256, Rfc4231Vectors) {
  const std::vector<std::uint8_t> key1(20, 0x0b);
  EXPECT_EQ(hex_encode(hmac_sha256(key1.data(), key1.size(), "Hi There", 8)),
            "b0344c61d8db38535ca8afceaf0bf12b881dc200c9833da726e9376c2e32cff7");

  const std::string key2 = "Jefe";
  const std::string msg2 = "what do ya want for nothing?";
  EXPECT_EQ(hex_encode(hmac_sha256(reinterpret_cast<const std::uint8_t*>(key2.data()), key2.size(),
                                   msg2.data(), msg2.size())),
            "5bdcc146bf60754e6a042426089575c75a003f089d2739839dec58b964ec3843");
}

TEST(HmacSha256, MatchesOpenSsl) {
  Rng rng(77);
  for (int i = 0; i < 20; ++i) {
    std::vector<std::uint8_t> key(1 + rng.next_below(100));
    for (auto& b : key) b = static_cast<std::uint8_t>(rng.next_below(256));
    std::string msg(rng.next_below(300), '\0');
    for (char& c : msg) c = static_cast<char>(rng.next_below(256));

    unsigned char expected[32];
    unsigned int len = 0;
    HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()),
         reinterpret_cast<const unsigned char*>(msg.data()), msg.size(), expected, &len);
    EXPECT_EQ(hex_encode(hmac_sha256(key.data(), key.size(), msg.data(), msg.size())),
              hex_encode(expected, len));
  }
}

TEST(Hex, RoundTrip) {
  const std::vector<std::uint8_t> bytes{0x00, 0x01, 0xab, 0xff, 0x7f};
  EXPECT_EQ(hex_decode(hex_encode(bytes.data(), bytes.size())), bytes);
  EXPECT_THROW(hex_decode("abc"), Error);   // odd length
  EXPECT_THROW(hex_decode("zz"), Error);    // bad digit
  EXPECT_THROW(digest_from_hex("aabb"), BadKeyLength);
}

TEST(Rng, DeterministicStreams) {
  Rng a(123), b(123), c(124);
  bool any_diff = false;
  for (int i = 0; i < 100; ++i) {
    const auto va = a.next_u64();
    EXPECT_EQ(va, b.next_u64());
    if (va != c.next_u64()) any_diff = true;
  }
  EXPECT_TRUE(any_diff);
}

TEST(Rng, UniformBounds) {
  Rng rng(5);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.next_double();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    const double s = rng.next_symmetric();
    EXPECT_GT(s, -0.5);
    EXPECT_LT(s, 0.5);
    EXPECT_LT(rng.next_below(7), 7u);
  }
}

TEST(Rng, DeriveSeedSeparatesStreams) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t k = 0; k < 1000; ++k) seen.insert(derive_seed(42, k));
  EXPECT_EQ(seen.size(), 1000u);
  EXPECT_NE(derive_seed(42, 0), derive_seed(43, 0));
}

TEST(Rng, ShuffleIsAPermutation) {
  Rng rng(9);
  auto idx = shuffled_indices(100, rng);
  std::set<std::size_t> unique(idx.begin(), idx.end());
  EXPECT_EQ(unique.size(), 100u);
  EXPECT_EQ(*unique.begin(), 0u);
  EXPECT_EQ(*unique.rbegin(), 99u);
}

}  // namespace
