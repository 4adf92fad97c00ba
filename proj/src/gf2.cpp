#include "naor/gf2.hpp"

#include <bit>
#include <stdexcept>
#include <utility>

namespace naor {

long F2Polynomial::degree() const {
    auto words = coeffs.words();
    for (std::size_t i = words.size(); i-- > 0;) {
        if (words[i] != 0)
            return static_cast<long>(i * 64 + 63 - static_cast<std::size_t>(std::countl_zero(words[i])));
    }
    return -1;
}

F2Polynomial F2Polynomial::xn_minus_one(std::size_t n) {
    BitVector c(n + 1);
    c.set_bit(0, true);
    c.set_bit(n, true);
    return F2Polynomial{std::move(c)};
}

BitVector xor_bits(const BitVector& a, const BitVector& b) {
    return a ^ b;
}

std::size_t weight(const BitVector& v) {
    return v.weight();
}

BitVector rotate_right(const BitVector& v, std::size_t k) {
    return v.rotated_right(k);
}

std::vector<BitVector> generate_vectors(const BitVector& r1, std::size_t count) {
    if (count > r1.size()) throw std::invalid_argument("generate_vectors: count exceeds vector length");
    std::vector<BitVector> out;
    out.reserve(count);
    if (count == 0) return out;
    out.push_back(r1);
    for (std::size_t i = 1; i < count; ++i) out.push_back(out.back().rotated_right(1));
    return out;
}

std::vector<BitVector> circulant_rows(const BitVector& v) {
    return generate_vectors(v, v.size());
}

std::size_t rank_f2(std::vector<BitVector> rows) {
    if (rows.empty()) return 0;
    std::size_t cols = rows[0].size();
    for (const auto& r : rows) {
        if (r.size() != cols) throw std::invalid_argument("rank_f2: row length mismatch");
    }
    std::size_t rank = 0;
    for (std::size_t col = 0; col < cols && rank < rows.size(); ++col) {
        std::size_t pivot = rank;
        while (pivot < rows.size() && !rows[pivot].bit(col)) ++pivot;
        if (pivot == rows.size()) continue;
        std::swap(rows[pivot], rows[rank]);
        for (std::size_t r = pivot + 1; r < rows.size(); ++r) {
            if (rows[r].bit(col)) rows[r] ^= rows[rank];
        }
        ++rank;
    }
    return rank;
}

namespace {

// f -= g * x^shift, in place.
void xor_shifted(BitVector& f, const BitVector& g, std::size_t shift, long gdeg) {
    for (long i = 0; i <= gdeg; ++i) {
        if (g.bit(static_cast<std::size_t>(i)))
            f.set_bit(static_cast<std::size_t>(i) + shift, !f.bit(static_cast<std::size_t>(i) + shift));
    }
}

} // namespace

F2Polynomial poly_gcd_f2(F2Polynomial f, F2Polynomial g) {
    if (f.is_zero() && g.is_zero()) throw std::invalid_argument("poly_gcd_f2: gcd(0, 0) undefined");
    // Work with equal-width coefficient vectors so reduction stays in bounds.
    std::size_t width = std::max(f.coeffs.size(), g.coeffs.size());
    auto widen = [width](BitVector v) {
        BitVector w(width);
        for (std::size_t i = 0; i < v.size(); ++i)
            if (v.bit(i)) w.set_bit(i, true);
        return w;
    };
    BitVector a = widen(std::move(f.coeffs));
    BitVector b = widen(std::move(g.coeffs));
    auto deg = [](const BitVector& v) { return F2Polynomial{v}.degree(); };
    long da = deg(a), db = deg(b);
    while (db >= 0) {
        while (da >= db) {
            xor_shifted(a, b, static_cast<std::size_t>(da - db), db);
            da = deg(a);
        }
        std::swap(a, b);
        std::swap(da, db);
    }
    return F2Polynomial{std::move(a)};
}

bool circulant_is_full_rank(const BitVector& v) {
    std::size_t n = v.size();
    if (n == 0 || !std::has_single_bit(n))
        throw std::domain_error("circulant_is_full_rank: length must be a power of two");
    F2Polynomial f{v};
    if (f.is_zero()) return false;
    return poly_gcd_f2(f, F2Polynomial::xn_minus_one(n)).degree() == 0;
}

} // namespace naor
