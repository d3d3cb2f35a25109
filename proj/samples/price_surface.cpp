// SPDX-License-Identifier: Apache-2.0
//
// Runs a small grid in binary64 and half precision on the same draws and
// prints the deviation of the reduced surface.

#include <cstdio>

#include "hflow/hflow.hpp"

int main() {
    const hflow::GridSpec grid(4, 64, 2000);
    const auto draws = hflow::DrawProvider::keyed({7}, grid);
    const std::vector<hflow::HestonParams> params{hflow::default_heston()};

    const auto ref = hflow::run_reduced(hflow::NumericFormat::float64(), grid, params, draws);
    const auto half = hflow::run_reduced(hflow::NumericFormat::float16(), grid, params, draws);

    std::printf("elements      %llu\n", static_cast<unsigned long long>(grid.elements()));
    std::printf("double total  %.2f ms\n", ref.timings.total_ms);
    std::printf("half total    %.2f ms\n", half.timings.total_ms);
    std::printf("half vs double deviation %.4f%%\n", hflow::deviation(half.reduced, ref.reduced));
    std::printf("max S at t=T, path 0: %.6f\n", ref.reduced[grid.timesteps() - 1]);
    return 0;
}
