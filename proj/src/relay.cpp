#include "satqkd/relay.hpp"

#include <openssl/crypto.h>

#include <algorithm>
#include <istream>
#include <ostream>

namespace satqkd::relay {

namespace {

constexpr char kMagic[4] = {'S', 'Q', 'K', 'D'};

std::size_t byte_count(std::size_t n_bits) { return (n_bits + 7) / 8; }

void put_u64(std::ostream& out, std::uint64_t v) {
    char buf[8];
    for (int i = 0; i < 8; ++i) {
        buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    }
    out.write(buf, 8);
}

std::uint64_t get_u64(std::istream& in) {
    unsigned char buf[8];
    if (!in.read(reinterpret_cast<char*>(buf), 8)) {
        throw RelayError("snapshot truncated");
    }
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) {
        v = (v << 8) | buf[i];
    }
    return v;
}

void put_bits(std::ostream& out, const BitString& bits) {
    put_u64(out, bits.size());
    out.write(reinterpret_cast<const char*>(bits.bytes().data()),
              static_cast<std::streamsize>(bits.bytes().size()));
}

BitString get_bits(std::istream& in) {
    const std::uint64_t n_bits = get_u64(in);
    std::vector<std::uint8_t> bytes(byte_count(n_bits));
    if (!in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()))) {
        throw RelayError("snapshot truncated");
    }
    return BitString(n_bits, std::move(bytes));
}

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw RelayError(std::string("invalid hex digit '") + c + "'");
}

}  // namespace

BitString::BitString(std::size_t n_bits, std::vector<std::uint8_t> bytes)
    : n_bits_(n_bits), bytes_(std::move(bytes)) {
    if (bytes_.size() != byte_count(n_bits_)) {
        throw RelayError("bit string byte count does not match its length");
    }
    if (const std::size_t tail = n_bits_ % 8; tail != 0) {
        bytes_.back() &= static_cast<std::uint8_t>((1u << tail) - 1u);
    }
}

BitString BitString::zeros(std::size_t n_bits) {
    return BitString(n_bits, std::vector<std::uint8_t>(byte_count(n_bits), 0));
}

BitString BitString::random(std::size_t n_bits, std::mt19937_64& rng) {
    std::vector<std::uint8_t> bytes(byte_count(n_bits));
    std::uniform_int_distribution<int> byte(0, 255);
    for (auto& b : bytes) {
        b = static_cast<std::uint8_t>(byte(rng));
    }
    return BitString(n_bits, std::move(bytes));
}

BitString BitString::from_hex(std::string_view hex, std::size_t n_bits) {
    if (hex.size() != 2 * byte_count(n_bits)) {
        throw RelayError("hex string needs exactly two digits per byte of the key");
    }
    std::vector<std::uint8_t> bytes(byte_count(n_bits), 0);
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        bytes[i] = static_cast<std::uint8_t>((hex_value(hex[2 * i]) << 4) | hex_value(hex[2 * i + 1]));
    }
    return BitString(n_bits, std::move(bytes));
}

BitString BitString::from_hex(std::string_view hex) {
    if (hex.size() % 2 != 0) {
        throw RelayError("hex string has an odd number of digits");
    }
    return from_hex(hex, 4 * hex.size());
}

bool BitString::bit(std::size_t i) const {
    if (i >= n_bits_) {
        throw RelayError("bit index out of range");
    }
    return (bytes_[i / 8] >> (i % 8)) & 1u;
}

bool BitString::all_zero() const {
    return std::all_of(bytes_.begin(), bytes_.end(), [](std::uint8_t b) { return b == 0; });
}

std::string BitString::to_hex() const {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * bytes_.size());
    for (std::uint8_t b : bytes_) {
        out.push_back(kDigits[b >> 4]);
        out.push_back(kDigits[b & 0x0f]);
    }
    return out;
}

void BitString::wipe() {
    if (!bytes_.empty()) {
        OPENSSL_cleanse(bytes_.data(), bytes_.size());
    }
}

BitString operator^(const BitString& a, const BitString& b) {
    if (a.n_bits_ != b.n_bits_) {
        throw RelayError("bit strings differ in length");
    }
    std::vector<std::uint8_t> bytes(a.bytes_.size());
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        bytes[i] = a.bytes_[i] ^ b.bytes_[i];
    }
    return BitString(a.n_bits_, std::move(bytes));
}

std::uint64_t KeyStore::store_key(std::string peer, BitString bits) {
    if (bits.empty()) {
        throw RelayError("refusing to store an empty key");
    }
    const std::uint64_t id = next_id_++;
    records_.push_back({id, std::move(peer), std::move(bits), KeyStatus::stored});
    return id;
}

KeyRecord& KeyStore::find(std::uint64_t key_id) {
    auto it = std::find_if(records_.begin(), records_.end(),
                           [&](const KeyRecord& r) { return r.key_id == key_id; });
    if (it == records_.end()) {
        throw RelayError("unknown key id " + std::to_string(key_id));
    }
    return *it;
}

const KeyRecord& KeyStore::lookup(std::uint64_t key_id) const {
    return const_cast<KeyStore*>(this)->find(key_id);
}

RelayMessage KeyStore::combine_and_broadcast(std::uint64_t key_id_a, std::uint64_t key_id_b) {
    if (key_id_a == key_id_b) {
        throw RelayError("cannot combine a key with itself");
    }
    KeyRecord& a = find(key_id_a);
    KeyRecord& b = find(key_id_b);
    if (a.status != KeyStatus::stored || b.status != KeyStatus::stored) {
        throw RelayError("key already consumed");
    }
    if (a.bits.size() != b.bits.size()) {
        throw RelayError("key lengths differ: " + std::to_string(a.bits.size()) + " vs " +
                         std::to_string(b.bits.size()));
    }
    // Everything that can throw happens before the records change state.
    RelayMessage message{key_id_a, key_id_b, a.bits ^ b.bits};
    broadcasts_.reserve(broadcasts_.size() + 1);

    a.bits.wipe();
    b.bits.wipe();
    a.status = KeyStatus::consumed;
    b.status = KeyStatus::consumed;
    bits_consumed_ += 2 * message.payload.size();
    bits_relayed_ += message.payload.size();
    broadcasts_.push_back(message);
    return message;
}

std::vector<std::uint64_t> KeyStore::records_holding(const BitString& needle) const {
    std::vector<std::uint64_t> ids;
    for (const auto& r : records_) {
        if (r.bits == needle) {
            ids.push_back(r.key_id);
        }
    }
    return ids;
}

void KeyStore::save(std::ostream& out) const {
    out.write(kMagic, sizeof kMagic);
    out.put(static_cast<char>(kSnapshotVersion));
    put_u64(out, next_id_);
    put_u64(out, bits_consumed_);
    put_u64(out, bits_relayed_);
    put_u64(out, records_.size());
    for (const auto& r : records_) {
        put_u64(out, r.key_id);
        out.put(static_cast<char>(r.status));
        put_u64(out, r.peer.size());
        out.write(r.peer.data(), static_cast<std::streamsize>(r.peer.size()));
        put_bits(out, r.bits);
    }
    put_u64(out, broadcasts_.size());
    for (const auto& m : broadcasts_) {
        put_u64(out, m.key_id_a);
        put_u64(out, m.key_id_b);
        put_bits(out, m.payload);
    }
    if (!out) {
        throw RelayError("failed to write snapshot");
    }
}

KeyStore KeyStore::load(std::istream& in) {
    char magic[4];
    if (!in.read(magic, 4) || !std::equal(magic, magic + 4, kMagic)) {
        throw RelayError("not a key store snapshot");
    }
    const int version = in.get();
    if (version != kSnapshotVersion) {
        throw RelayError("unsupported snapshot version " + std::to_string(version));
    }
    KeyStore store;
    store.next_id_ = get_u64(in);
    store.bits_consumed_ = get_u64(in);
    store.bits_relayed_ = get_u64(in);
    const std::uint64_t n_records = get_u64(in);
    for (std::uint64_t i = 0; i < n_records; ++i) {
        KeyRecord r;
        r.key_id = get_u64(in);
        const int status = in.get();
        if (status != 0 && status != 1) {
            throw RelayError("snapshot has an invalid key status");
        }
        r.status = static_cast<KeyStatus>(status);
        r.peer.resize(get_u64(in));
        if (!in.read(r.peer.data(), static_cast<std::streamsize>(r.peer.size()))) {
            throw RelayError("snapshot truncated");
        }
        r.bits = get_bits(in);
        store.records_.push_back(std::move(r));
    }
    const std::uint64_t n_messages = get_u64(in);
    for (std::uint64_t i = 0; i < n_messages; ++i) {
        RelayMessage m;
        m.key_id_a = get_u64(in);
        m.key_id_b = get_u64(in);
        m.payload = get_bits(in);
        store.broadcasts_.push_back(std::move(m));
    }
    return store;
}

BitString recover(const BitString& local_bits, const RelayMessage& message) {
    if (local_bits.size() != message.payload.size()) {
        throw RelayError("local key and payload differ in length");
    }
    return local_bits ^ message.payload;
}

}  // namespace satqkd::relay
