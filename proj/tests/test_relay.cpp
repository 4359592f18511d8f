#include <gtest/gtest.h>

#include <random>
#include <set>
#include <sstream>

#include "satqkd/relay.hpp"

namespace satqkd::relay {
namespace {

TEST(BitString, HexRoundTripAndPadding) {
    BitString b = BitString::from_hex("a50f", 12);
    EXPECT_EQ(b.size(), 12u);
    EXPECT_EQ(b.to_hex(), "a50f");
    EXPECT_TRUE(b.bit(0));
    EXPECT_FALSE(b.bit(1));
    EXPECT_THROW(b.bit(12), RelayError);
    // Bits past the length are cleared.
    EXPECT_EQ(BitString::from_hex("ff", 3).to_hex(), "07");
    EXPECT_THROW(BitString::from_hex("abc"), RelayError);
    EXPECT_THROW(BitString::from_hex("zz"), RelayError);
}

TEST(BitString, RandomKeepsPaddingClear) {
    std::mt19937_64 rng(3);
    BitString b = BitString::random(13, rng);
    EXPECT_EQ(b.bytes().size(), 2u);
    EXPECT_EQ(b.bytes()[1] & 0xe0, 0);
}

TEST(BitString, WipeZeroises) {
    std::mt19937_64 rng(1);
    BitString b = BitString::random(100, rng);
    b.wipe();
    EXPECT_TRUE(b.all_zero());
    EXPECT_EQ(b.size(), 100u);
}

TEST(KeyStore, StoreAndLookup) {
    KeyStore store;
    std::mt19937_64 rng(5);
    BitString k = BitString::random(64, rng);
    auto a = store.store_key("OGS-A", k);
    auto b = store.store_key("OGS-B", k);
    EXPECT_NE(a, b);
    EXPECT_EQ(store.lookup(a).bits, k);
    EXPECT_EQ(store.lookup(a).peer, "OGS-A");
    EXPECT_EQ(store.lookup(a).status, KeyStatus::stored);
    EXPECT_THROW(store.lookup(999), RelayError);
    EXPECT_THROW(store.store_key("OGS-C", BitString{}), RelayError);
}

TEST(KeyStore, MegabitKeyRoundTrips) {
    KeyStore store;
    std::mt19937_64 rng(2024);
    BitString k = BitString::random(1000000, rng);
    auto id = store.store_key("OGS-A", k);
    EXPECT_EQ(store.lookup(id).bits, k);
}

TEST(KeyStore, ZeroKeyBroadcastsTheOther) {
    KeyStore store;
    std::mt19937_64 rng(9);
    BitString k_a = BitString::random(256, rng);
    auto a = store.store_key("OGS-A", k_a);
    auto b = store.store_key("OGS-B", BitString::zeros(256));
    RelayMessage m = store.combine_and_broadcast(a, b);
    EXPECT_EQ(m.payload, k_a);
    EXPECT_TRUE(store.lookup(a).bits.all_zero());
    EXPECT_EQ(store.lookup(b).status, KeyStatus::consumed);
}

TEST(KeyStore, RoundTripErasureAndAccounting) {
    KeyStore store;
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<std::size_t> length(1, 2048);
    std::uint64_t consumed = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = length(rng);
        BitString k_a = BitString::random(n, rng);
        BitString k_b = BitString::random(n, rng);
        auto a = store.store_key("OGS-A", k_a);
        auto b = store.store_key("OGS-B", k_b);
        const auto relayed_before = store.bits_relayed();
        RelayMessage m = store.combine_and_broadcast(a, b);
        ASSERT_EQ(recover(k_b, m), k_a);
        ASSERT_EQ(recover(k_a, m), k_b);
        consumed += 2 * n;
        ASSERT_EQ(store.bits_consumed(), consumed);
        ASSERT_EQ(store.bits_relayed() - relayed_before, n);
        ASSERT_TRUE(store.records_holding(k_a).empty() || k_a.all_zero());
        ASSERT_TRUE(store.records_holding(k_b).empty() || k_b.all_zero());
        ASSERT_THROW(store.combine_and_broadcast(a, b), RelayError);
    }
    for (const auto& r : store.records()) {
        EXPECT_EQ(r.status, KeyStatus::consumed);
        EXPECT_TRUE(r.bits.all_zero());
    }
    EXPECT_EQ(store.broadcasts().size(), 1000u);
}

TEST(KeyStore, RejectionsLeaveStateUntouched) {
    KeyStore store;
    std::mt19937_64 rng(4);
    BitString k_a = BitString::random(100, rng);
    BitString k_b = BitString::random(101, rng);
    auto a = store.store_key("OGS-A", k_a);
    auto b = store.store_key("OGS-B", k_b);
    EXPECT_THROW(store.combine_and_broadcast(a, b), RelayError);
    EXPECT_THROW(store.combine_and_broadcast(a, a), RelayError);
    EXPECT_THROW(store.combine_and_broadcast(a, 42), RelayError);
    EXPECT_EQ(store.lookup(a).bits, k_a);
    EXPECT_EQ(store.lookup(b).bits, k_b);
    EXPECT_EQ(store.lookup(a).status, KeyStatus::stored);
    EXPECT_EQ(store.bits_consumed(), 0u);
    EXPECT_TRUE(store.broadcasts().empty());

    auto c = store.store_key("OGS-C", BitString::random(100, rng));
    store.combine_and_broadcast(a, c);
    auto d = store.store_key("OGS-D", BitString::random(100, rng));
    EXPECT_THROW(store.combine_and_broadcast(c, d), RelayError);
    EXPECT_EQ(store.lookup(d).status, KeyStatus::stored);
}

TEST(Recover, Identities) {
    std::mt19937_64 rng(8);
    BitString x = BitString::random(333, rng);
    RelayMessage zero{1, 2, BitString::zeros(333)};
    EXPECT_EQ(recover(x, zero), x);
    RelayMessage m{1, 2, BitString::random(333, rng)};
    EXPECT_EQ(recover(recover(x, m), m), x);
    EXPECT_THROW(recover(BitString::random(10, rng), m), RelayError);
}

TEST(Snapshot, SaveLoadRoundTrip) {
    KeyStore store;
    std::mt19937_64 rng(12);
    auto a = store.store_key("OGS-A", BitString::random(77, rng));
    auto b = store.store_key("OGS-B", BitString::random(77, rng));
    BitString kept = BitString::random(40, rng);
    auto c = store.store_key("OGS-C", kept);
    RelayMessage m = store.combine_and_broadcast(a, b);

    std::stringstream buf;
    store.save(buf);
    const std::string bytes = buf.str();
    ASSERT_GE(bytes.size(), 5u);
    EXPECT_EQ(bytes.substr(0, 4), "SQKD");
    EXPECT_EQ(static_cast<std::uint8_t>(bytes[4]), KeyStore::kSnapshotVersion);

    KeyStore loaded = KeyStore::load(buf);
    EXPECT_EQ(loaded.lookup(c).bits, kept);
    EXPECT_EQ(loaded.lookup(a).status, KeyStatus::consumed);
    ASSERT_EQ(loaded.broadcasts().size(), 1u);
    EXPECT_EQ(loaded.broadcasts()[0].payload, m.payload);
    EXPECT_EQ(loaded.bits_consumed(), store.bits_consumed());
    auto d = loaded.store_key("OGS-D", BitString::random(8, rng));
    std::set<std::uint64_t> ids{a, b, c};
    EXPECT_EQ(ids.count(d), 0u);

    std::stringstream again;
    loaded.save(again);
    EXPECT_NE(again.str(), bytes);  // the new record is included
}

TEST(Snapshot, RejectsForeignData) {
    std::stringstream bad("XXXX\x01");
    EXPECT_THROW(KeyStore::load(bad), RelayError);
    std::stringstream version(std::string("SQKD\x09", 5));
    EXPECT_THROW(KeyStore::load(version), RelayError);
    KeyStore store;
    std::mt19937_64 rng(1);
    store.store_key("OGS-A", BitString::random(64, rng));
    std::stringstream buf;
    store.save(buf);
    std::string bytes = buf.str();
    std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
    EXPECT_THROW(KeyStore::load(truncated), RelayError);
}

}  // namespace
}  // namespace satqkd::relay
