#include "powergear/bitvec.hpp"

#include <bit>
#include <stdexcept>

#include "powergear/errors.hpp"

namespace powergear {

BitVec::BitVec(int width) : width_(width) {
    if (width <= 0) throw ValidationError("bit vector width must be positive");
    words_.assign(static_cast<std::size_t>((width + 63) / 64), 0);
}

BitVec::BitVec(int width, std::uint64_t value) : BitVec(width) {
    words_[0] = value;
    mask_top();
}

void BitVec::mask_top() {
    int rem = width_ % 64;
    if (rem != 0) words_.back() &= (~0ULL >> (64 - rem));
}

bool BitVec::bit(int i) const {
    return (words_[static_cast<std::size_t>(i / 64)] >> (i % 64)) & 1ULL;
}

void BitVec::set_bit(int i, bool v) {
    std::uint64_t m = 1ULL << (i % 64);
    auto& w = words_[static_cast<std::size_t>(i / 64)];
    if (v)
        w |= m;
    else
        w &= ~m;
}

std::string BitVec::to_hex() const {
    static const char digits[] = "0123456789abcdef";
    int nibbles = (width_ + 3) / 4;
    std::string out(static_cast<std::size_t>(nibbles), '0');
    for (int i = 0; i < nibbles; ++i) {
        int shift = (i % 16) * 4;
        std::uint64_t w = words_[static_cast<std::size_t>(i / 16)];
        out[static_cast<std::size_t>(nibbles - 1 - i)] = digits[(w >> shift) & 0xf];
    }
    return out;
}

BitVec BitVec::from_hex(int width, const std::string& hex) {
    BitVec v(width);
    if (hex.empty()) throw ValidationError("empty hex literal");
    int nibble = 0;
    for (auto it = hex.rbegin(); it != hex.rend(); ++it, ++nibble) {
        char c = *it;
        std::uint64_t d;
        if (c >= '0' && c <= '9')
            d = static_cast<std::uint64_t>(c - '0');
        else if (c >= 'a' && c <= 'f')
            d = static_cast<std::uint64_t>(c - 'a' + 10);
        else if (c >= 'A' && c <= 'F')
            d = static_cast<std::uint64_t>(c - 'A' + 10);
        else
            throw ValidationError("bad hex digit '" + std::string(1, c) + "'");
        if (nibble * 4 >= width) {
            if (d != 0) throw ValidationError("hex literal wider than " + std::to_string(width) + " bits");
            continue;
        }
        v.words_[static_cast<std::size_t>(nibble / 16)] |= d << ((nibble % 16) * 4);
    }
    std::uint64_t top = v.words_.back();
    v.mask_top();
    if (v.words_.back() != top)
        throw ValidationError("hex literal wider than " + std::to_string(width) + " bits");
    return v;
}

BitVec BitVec::all_ones(int width) {
    BitVec v(width);
    for (auto& w : v.words_) w = ~0ULL;
    v.mask_top();
    return v;
}

int hamming(const BitVec& a, const BitVec& b) {
    if (a.width() != b.width())
        throw ValidationError("hamming: width mismatch (" + std::to_string(a.width()) + " vs " +
                              std::to_string(b.width()) + ")");
    int d = 0;
    for (std::size_t i = 0; i < a.words().size(); ++i)
        d += std::popcount(a.words()[i] ^ b.words()[i]);
    return d;
}

} // namespace powergear
