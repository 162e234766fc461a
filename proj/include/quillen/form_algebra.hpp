#pragma once

// Pointwise exterior algebra over C in the variables dz_1..dz_n, dz~_1..dz~_n
// (dz~ denotes the conjugate differential). Elements are complex-coefficient
// multivectors stored on the canonical basis
//
//     e(I,J) = dz_{i1} ^ ... ^ dz_{ip} ^ dz~_{j1} ^ ... ^ dz~_{jq},
//
// I, J strictly increasing subsets of {1..n} held as bitmasks. The fixed
// orientation form is dz_1 ^ dz~_1 ^ ... ^ dz_n ^ dz~_n; top_coefficient
// carries the (-1)^{n(n-1)/2} block-reordering sign so that the orientation
// form has coefficient exactly +1.
//
// This is algebra at a single point: no d, no partial/antiholomorphic
// derivative operators live here.

#include <array>
#include <bit>
#include <cassert>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace quillen {

using cplx = std::complex<double>;

// max complex dimension handled by the pointwise algebra
inline constexpr int kMaxDim = 4;

// |coefficient| below this counts as zero when comparing elements
inline constexpr double kFormTol = 1e-10;

namespace detail {

// parity of the merge a|b when concatenating two increasing index blocks;
// counts inversions (x in a) > (y in b). Masks must be disjoint.
inline int merge_sign(unsigned a, unsigned b)
{
    int inv = 0;
    while (b) {
        unsigned low = b & (~b + 1u); // lowest set bit of b
        inv += std::popcount(a & ~(low - 1u) & ~low);
        b ^= low;
    }
    return (inv & 1) ? -1 : +1;
}

} // namespace detail

class ExtElement {
public:
    explicit ExtElement(int n = 1) : n_(n)
    {
        if (n < 1 || n > kMaxDim) throw std::invalid_argument("ExtElement: n out of range");
        coef_.assign(std::size_t(1) << (2 * n), cplx(0.0, 0.0));
    }

    static ExtElement scalar(int n, cplx value)
    {
        ExtElement e(n);
        e.coef_[0] = value;
        return e;
    }

    // single dz_k (k in 1..n)
    static ExtElement dz(int n, int k)
    {
        ExtElement e(n);
        e.at(1u << (k - 1), 0u) = 1.0;
        return e;
    }

    // single dz~_k
    static ExtElement dzbar(int n, int k)
    {
        ExtElement e(n);
        e.at(0u, 1u << (k - 1)) = 1.0;
        return e;
    }

    int dim() const { return n_; }

    cplx& at(unsigned maskI, unsigned maskJ) { return coef_[key(maskI, maskJ)]; }
    const cplx& at(unsigned maskI, unsigned maskJ) const { return coef_[key(maskI, maskJ)]; }

    // coefficient of the full-degree basis element relative to the orientation
    // dz_1 ^ dz~_1 ^ ... ^ dz_n ^ dz~_n
    cplx top_coefficient() const
    {
        unsigned full = (1u << n_) - 1u;
        // e(full,full) -> interleaved orientation costs n(n-1)/2 transposition blocks
        int swaps = n_ * (n_ - 1) / 2;
        cplx c = at(full, full);
        return (swaps & 1) ? -c : c;
    }

    bool is_zero(double tol = kFormTol) const
    {
        for (const cplx& c : coef_)
            if (std::abs(c) > tol) return false;
        return true;
    }

    // keeps only coefficients above tol; useful before printing
    ExtElement pruned(double tol = kFormTol) const
    {
        ExtElement r(n_);
        for (std::size_t k = 0; k < coef_.size(); ++k)
            if (std::abs(coef_[k]) > tol) r.coef_[k] = coef_[k];
        return r;
    }

    double max_abs_coeff() const
    {
        double m = 0.0;
        for (const cplx& c : coef_) m = std::max(m, std::abs(c));
        return m;
    }

    ExtElement& operator+=(const ExtElement& o)
    {
        assert(n_ == o.n_);
        for (std::size_t k = 0; k < coef_.size(); ++k) coef_[k] += o.coef_[k];
        return *this;
    }
    ExtElement& operator-=(const ExtElement& o)
    {
        assert(n_ == o.n_);
        for (std::size_t k = 0; k < coef_.size(); ++k) coef_[k] -= o.coef_[k];
        return *this;
    }
    ExtElement& operator*=(cplx s)
    {
        for (cplx& c : coef_) c *= s;
        return *this;
    }

    friend ExtElement operator+(ExtElement a, const ExtElement& b) { return a += b; }
    friend ExtElement operator-(ExtElement a, const ExtElement& b) { return a -= b; }
    friend ExtElement operator*(ExtElement a, cplx s) { return a *= s; }
    friend ExtElement operator*(cplx s, ExtElement a) { return a *= s; }
    friend ExtElement operator-(ExtElement a)
    {
        for (cplx& c : a.coef_) c = -c;
        return a;
    }

    friend ExtElement wedge(const ExtElement& a, const ExtElement& b)
    {
        assert(a.n_ == b.n_);
        const int n = a.n_;
        ExtElement r(n);
        const unsigned full = (1u << n) - 1u;
        for (unsigned i1 = 0; i1 <= full; ++i1)
            for (unsigned j1 = 0; j1 <= full; ++j1) {
                const cplx ca = a.at(i1, j1);
                if (ca == cplx(0.0, 0.0)) continue;
                for (unsigned i2 = 0; i2 <= full; ++i2) {
                    if (i1 & i2) continue;
                    for (unsigned j2 = 0; j2 <= full; ++j2) {
                        if (j1 & j2) continue;
                        const cplx cb = b.at(i2, j2);
                        if (cb == cplx(0.0, 0.0)) continue;
                        // move dz-block of b across the dz~-block of a
                        int sgn = (std::popcount(j1) * std::popcount(i2)) & 1 ? -1 : +1;
                        sgn *= detail::merge_sign(i1, i2);
                        sgn *= detail::merge_sign(j1, j2);
                        r.at(i1 | i2, j1 | j2) += double(sgn) * ca * cb;
                    }
                }
            }
        return r;
    }

    // max abs coefficient difference; the algebra's working equality metric
    friend double distance(const ExtElement& a, const ExtElement& b)
    {
        assert(a.n_ == b.n_);
        double m = 0.0;
        for (std::size_t k = 0; k < a.coef_.size(); ++k)
            m = std::max(m, std::abs(a.coef_[k] - b.coef_[k]));
        return m;
    }

    friend bool approx_equal(const ExtElement& a, const ExtElement& b, double tol = kFormTol)
    {
        return distance(a, b) <= tol;
    }

private:
    std::size_t key(unsigned maskI, unsigned maskJ) const
    {
        assert(maskI < (1u << n_) && maskJ < (1u << n_));
        return (std::size_t(maskI) << n_) | maskJ;
    }

    int n_;
    std::vector<cplx> coef_;
};

// Square matrix of even-degree forms (curvature-like objects). Entries of odd
// degree would break trace cyclicity; callers own that invariant, assert_even
// checks it where it matters.
class FormMatrix {
public:
    FormMatrix(int dim, int n) : dim_(dim), n_(n), e_(std::size_t(dim) * dim, ExtElement(n))
    {
        if (dim < 1) throw std::invalid_argument("FormMatrix: dim < 1");
    }

    static FormMatrix identity(int dim, int n)
    {
        FormMatrix m(dim, n);
        for (int i = 0; i < dim; ++i) m(i, i) = ExtElement::scalar(n, 1.0);
        return m;
    }

    int dim() const { return dim_; }
    int form_dim() const { return n_; }

    ExtElement& operator()(int r, int c) { return e_[std::size_t(r) * dim_ + c]; }
    const ExtElement& operator()(int r, int c) const { return e_[std::size_t(r) * dim_ + c]; }

    bool entries_even() const
    {
        for (const ExtElement& x : e_) {
            unsigned full = (1u << n_) - 1u;
            for (unsigned i = 0; i <= full; ++i)
                for (unsigned j = 0; j <= full; ++j)
                    if ((std::popcount(i) + std::popcount(j)) % 2 == 1
                        && std::abs(x.at(i, j)) > kFormTol)
                        return false;
        }
        return true;
    }

    FormMatrix& operator+=(const FormMatrix& o)
    {
        assert(dim_ == o.dim_ && n_ == o.n_);
        for (std::size_t k = 0; k < e_.size(); ++k) e_[k] += o.e_[k];
        return *this;
    }
    friend FormMatrix operator+(FormMatrix a, const FormMatrix& b) { return a += b; }

    FormMatrix& operator*=(cplx s)
    {
        for (ExtElement& x : e_) x *= s;
        return *this;
    }
    friend FormMatrix operator*(FormMatrix a, cplx s) { return a *= s; }
    friend FormMatrix operator*(cplx s, FormMatrix a) { return a *= s; }
    friend FormMatrix operator-(FormMatrix a) { return a *= cplx(-1.0, 0.0); }

    friend FormMatrix mat_mul(const FormMatrix& a, const FormMatrix& b)
    {
        assert(a.dim_ == b.dim_ && a.n_ == b.n_);
        FormMatrix r(a.dim_, a.n_);
        for (int i = 0; i < a.dim_; ++i)
            for (int j = 0; j < a.dim_; ++j) {
                ExtElement s(a.n_);
                for (int k = 0; k < a.dim_; ++k) s += wedge(a(i, k), b(k, j));
                r(i, j) = s;
            }
        return r;
    }

    friend ExtElement trace(const FormMatrix& m)
    {
        ExtElement s(m.n_);
        for (int i = 0; i < m.dim_; ++i) s += m(i, i);
        return s;
    }

private:
    int dim_;
    int n_;
    std::vector<ExtElement> e_;
};

// Tr(A^k B) with A^0 = I
inline ExtElement trace_power_product(const FormMatrix& a, int k, const FormMatrix& b)
{
    FormMatrix acc = b;
    for (int i = 0; i < k; ++i) acc = mat_mul(a, acc);
    return trace(acc);
}

} // namespace quillen
