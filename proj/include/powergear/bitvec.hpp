#ifndef POWERGEAR_BITVEC_HPP
#define POWERGEAR_BITVEC_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace powergear {

/// Fixed-width bit vector. Storage and Hamming distance work at any width;
/// arithmetic helpers used by the interpreter live in interp.cpp and are
/// restricted to widths <= 64.
class BitVec {
public:
    BitVec() = default;
    explicit BitVec(int width);
    BitVec(int width, std::uint64_t value); // value truncated to width

    int width() const { return width_; }
    std::uint64_t low64() const { return words_.empty() ? 0 : words_[0]; }

    bool bit(int i) const;
    void set_bit(int i, bool v);

    bool operator==(const BitVec& o) const { return width_ == o.width_ && words_ == o.words_; }
    bool operator!=(const BitVec& o) const { return !(*this == o); }

    /// Lowercase hex, no 0x prefix, no leading-zero trimming beyond word 0.
    std::string to_hex() const;
    static BitVec from_hex(int width, const std::string& hex); // throws ValidationError

    static BitVec all_ones(int width);

    const std::vector<std::uint64_t>& words() const { return words_; }

private:
    void mask_top();

    int width_ = 0;
    std::vector<std::uint64_t> words_; // little-endian 64-bit words
};

/// popcount(a XOR b); widths must match.
int hamming(const BitVec& a, const BitVec& b);

} // namespace powergear

#endif
