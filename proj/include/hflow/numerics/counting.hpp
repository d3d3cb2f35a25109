// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "hflow/numerics/format.hpp"

namespace hflow {

struct OpCounts {
    std::uint64_t add = 0, sub = 0, mul = 0, div = 0, neg = 0;
    std::uint64_t exp = 0, log = 0, sqrt = 0;
    std::uint64_t compare = 0;

    /// Arithmetic operations; comparisons are tracked but not included.
    std::uint64_t arithmetic() const noexcept { return add + sub + mul + div + neg + exp + log + sqrt; }

    OpCounts& operator+=(const OpCounts& o) noexcept {
        add += o.add; sub += o.sub; mul += o.mul; div += o.div; neg += o.neg;
        exp += o.exp; log += o.log; sqrt += o.sqrt; compare += o.compare;
        return *this;
    }
    bool operator==(const OpCounts&) const = default;
};

/// Instrumentation policy: forwards to `Inner` and tallies every operation.
template <class Inner>
class Counting : public Inner {
public:
    using value_type = typename Inner::value_type;

    Counting(const Inner& inner, OpCounts* counts) : Inner(inner), counts_(counts) {}

    Counting with_diagnostics(Diagnostics* d) const { return Counting(Inner::with_diagnostics(d), counts_); }

    value_type add(value_type a, value_type b) const { ++counts_->add; return Inner::add(a, b); }
    value_type sub(value_type a, value_type b) const { ++counts_->sub; return Inner::sub(a, b); }
    value_type mul(value_type a, value_type b) const { ++counts_->mul; return Inner::mul(a, b); }
    value_type div(value_type a, value_type b) const { ++counts_->div; return Inner::div(a, b); }
    value_type neg(value_type a) const { ++counts_->neg; return Inner::neg(a); }
    value_type exp(value_type a) const { ++counts_->exp; return Inner::exp(a); }
    value_type log(value_type a) const { ++counts_->log; return Inner::log(a); }
    value_type sqrt(value_type a) const { ++counts_->sqrt; return Inner::sqrt(a); }
    bool less(value_type a, value_type b) const { ++counts_->compare; return Inner::less(a, b); }

    OpCounts* counts() const noexcept { return counts_; }

private:
    OpCounts* counts_;
};

}  // namespace hflow
