#include "capspoe/exact_sum.hpp"

namespace capspoe {

// Grow-expansion: add one double to the expansion with exact two-sums,
// dropping zero components. parts_ stays nonoverlapping, increasing in
// magnitude, and sums exactly to everything added so far.
void ExactSum::add(double x) {
    std::size_t k = 0;
    for (std::size_t i = 0; i < parts_.size(); ++i) {
        double p = parts_[i];
        double hi = x + p;
        double bv = hi - x;
        double lo = (x - (hi - bv)) + (p - bv); // Knuth two-sum error term
        if (lo != 0.0) parts_[k++] = lo;
        x = hi;
    }
    parts_.resize(k);
    if (x != 0.0 || parts_.empty()) parts_.push_back(x);
}

// Compression pass (Shewchuk 1997, fig. 15). The surviving top component
// carries the whole expansion's value to within half an ulp.
double ExactSum::value() const {
    std::size_t m = parts_.size();
    if (m == 0) return 0.0;
    if (m == 1) return parts_[0];

    std::vector<double> g(m);
    double q = parts_[m - 1];
    std::size_t bottom = m - 1;
    for (std::size_t i = m - 1; i-- > 0;) {
        // fast-two-sum: |q| >= |parts_[i]| by the expansion ordering
        double sum = q + parts_[i];
        double err = parts_[i] - (sum - q);
        if (err != 0.0) {
            g[bottom--] = sum;
            q = err;
        } else {
            q = sum;
        }
    }
    for (std::size_t i = bottom + 1; i < m; ++i) {
        double sum = g[i] + q;
        q = sum; // low parts would go to the output expansion; only the top survives
    }
    return q;
}

double exact_sum(const double* x, std::size_t n) {
    ExactSum s;
    for (std::size_t i = 0; i < n; ++i) s.add(x[i]);
    return s.value();
}

} // namespace capspoe
