#pragma once

#include <vector>

#include "naor/bitvec.hpp"

namespace naor {

/// Polynomial over GF(2), coefficient of x^i at bit i of coeffs.
struct F2Polynomial {
    BitVector coeffs;

    /// Index of the highest set bit, or -1 for the zero polynomial.
    long degree() const;
    bool is_zero() const { return degree() < 0; }

    /// x^n - 1 (over GF(2), x^n + 1).
    static F2Polynomial xn_minus_one(std::size_t n);
};

BitVector xor_bits(const BitVector& a, const BitVector& b);
std::size_t weight(const BitVector& v);
BitVector rotate_right(const BitVector& v, std::size_t k);

/// Successive right-rotations of r1: out[0] = r1, out[i] = rot(out[i-1], 1).
/// Stacked as columns these reproduce the circulant generated by r1.
std::vector<BitVector> generate_vectors(const BitVector& r1, std::size_t count);

/// Rows of the circulant matrix generated by v (row j = v rotated right j times).
std::vector<BitVector> circulant_rows(const BitVector& v);

/// Rank over GF(2) by word-packed Gaussian elimination. Empty input -> 0.
std::size_t rank_f2(std::vector<BitVector> rows);

/// Euclidean gcd in GF(2)[x]; every nonzero result is monic by field arithmetic.
/// Throws if both inputs are zero.
F2Polynomial poly_gcd_f2(F2Polynomial f, F2Polynomial g);

/// True iff gcd(f_v, x^n - 1) has degree 0, for n = v.size() a power of two.
/// For those n this coincides with weight(v) being odd.
bool circulant_is_full_rank(const BitVector& v);

} // namespace naor
