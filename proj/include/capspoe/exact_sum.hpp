#pragma once

#include <cstddef>
#include <vector>

namespace capspoe {

/// Exact accumulator for doubles, kept as a Shewchuk-style nonoverlapping
/// expansion. value() compresses the expansion and returns its top component,
/// which approximates the exact sum to within half an ulp, i.e. the result is
/// the correctly rounded exact sum. That makes the returned double
/// independent of the order in which values were added. Routing uses this
/// for its cross-capsule reductions, so permutation equivariance holds
/// bitwise and reduction order never matters.
class ExactSum {
public:
    void add(double x);
    double value() const;
    void reset() { parts_.clear(); }

private:
    std::vector<double> parts_; // nonoverlapping, increasing magnitude
};

/// Order-invariant sum of n values.
double exact_sum(const double* x, std::size_t n);

} // namespace capspoe
