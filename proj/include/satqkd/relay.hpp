// Trusted-node key relay: the satellite holds one QKD key per ground
// station, publishes k_A XOR k_B on request, and erases both keys.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace satqkd::relay {

class RelayError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Packed bit string; unused bits of the final byte are always zero.
class BitString {
public:
    BitString() = default;
    BitString(std::size_t n_bits, std::vector<std::uint8_t> bytes);

    static BitString zeros(std::size_t n_bits);
    static BitString random(std::size_t n_bits, std::mt19937_64& rng);
    /// Two hex digits per byte, bit 0 in the least significant bit of byte 0.
    static BitString from_hex(std::string_view hex, std::size_t n_bits);
    static BitString from_hex(std::string_view hex);

    std::size_t size() const { return n_bits_; }
    bool empty() const { return n_bits_ == 0; }
    bool bit(std::size_t i) const;
    bool all_zero() const;
    const std::vector<std::uint8_t>& bytes() const { return bytes_; }
    std::string to_hex() const;  ///< two digits per byte

    /// Overwrites the content with zeros, keeping the length.
    void wipe();

    friend BitString operator^(const BitString& a, const BitString& b);
    friend bool operator==(const BitString& a, const BitString& b) = default;

private:
    std::size_t n_bits_ = 0;
    std::vector<std::uint8_t> bytes_;
};

enum class KeyStatus : std::uint8_t { stored = 0, consumed = 1 };

struct KeyRecord {
    std::uint64_t key_id = 0;
    std::string peer;
    BitString bits;
    KeyStatus status = KeyStatus::stored;
};

struct RelayMessage {
    std::uint64_t key_id_a = 0;
    std::uint64_t key_id_b = 0;
    BitString payload;
};

/// In-memory key management store of the satellite. Not thread-safe: a
/// single owner serialises access.
class KeyStore {
public:
    std::uint64_t store_key(std::string peer, BitString bits);
    const KeyRecord& lookup(std::uint64_t key_id) const;

    /// Publishes k_a XOR k_b and zeroises both records. Rejected without any
    /// state change on unknown ids, consumed records, equal ids or a length
    /// mismatch.
    RelayMessage combine_and_broadcast(std::uint64_t key_id_a, std::uint64_t key_id_b);

    const std::vector<KeyRecord>& records() const { return records_; }
    const std::vector<RelayMessage>& broadcasts() const { return broadcasts_; }

    /// Ids of records whose bits equal `needle`.
    std::vector<std::uint64_t> records_holding(const BitString& needle) const;

    std::uint64_t bits_consumed() const { return bits_consumed_; }
    std::uint64_t bits_relayed() const { return bits_relayed_; }

    /// Snapshot: "SQKD", version byte, then length-prefixed little-endian
    /// records and broadcasts.
    void save(std::ostream& out) const;
    static KeyStore load(std::istream& in);

    static constexpr std::uint8_t kSnapshotVersion = 1;

private:
    KeyRecord& find(std::uint64_t key_id);

    std::vector<KeyRecord> records_;
    std::vector<RelayMessage> broadcasts_;
    std::uint64_t next_id_ = 1;
    std::uint64_t bits_consumed_ = 0;
    std::uint64_t bits_relayed_ = 0;
};

/// Receiver side: local key XOR public payload.
BitString recover(const BitString& local_bits, const RelayMessage& message);

}  // namespace satqkd::relay
