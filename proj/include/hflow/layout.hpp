// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hflow/core_model.hpp"
#include "hflow/error.hpp"

namespace hflow {

/// Position of host element (p, a, t) in the batched device layout
/// [batch][asset][timestep][path-in-batch]. For full batches this is
/// (p div B)*A*T*B + a*T*B + t*B + (p mod B); a ragged final batch uses its
/// own width as the path stride so the map stays a bijection.
inline std::uint64_t device_index(const GridSpec& grid, std::uint64_t batch, std::uint64_t p, std::uint64_t a,
                                  std::uint64_t t) noexcept {
    const std::uint64_t k = p / batch;
    const std::uint64_t first = k * batch;
    const std::uint64_t width = std::min(batch, grid.paths() - first);
    const std::uint64_t T = grid.timesteps();
    return first * grid.assets() * T + a * T * width + t * width + (p - first);
}

inline std::uint64_t host_index(const GridSpec& grid, std::uint64_t p, std::uint64_t a, std::uint64_t t) noexcept {
    return (p * grid.assets() + a) * grid.timesteps() + t;
}

namespace detail {

inline void check_reorder_args(std::size_t n, const GridSpec& grid, std::uint64_t batch, const char* what) {
    if (batch < 1) throw ValidationError(std::string(what) + ": batch size must be >= 1");
    if (n != grid.elements()) {
        throw SizeMismatch(std::string(what) + ": expected " + std::to_string(grid.elements()) + " values, got " +
                           std::to_string(n));
    }
}

}  // namespace detail

template <class T>
std::vector<T> reorder_to_device(std::span<const T> host, const GridSpec& grid, std::uint64_t batch) {
    detail::check_reorder_args(host.size(), grid, batch, "reorder_to_device");
    std::vector<T> device(host.size());
    for (std::uint64_t p = 0; p < grid.paths(); ++p)
        for (std::uint64_t a = 0; a < grid.assets(); ++a)
            for (std::uint64_t t = 0; t < grid.timesteps(); ++t)
                device[device_index(grid, batch, p, a, t)] = host[host_index(grid, p, a, t)];
    return device;
}

template <class T>
std::vector<T> reorder_from_device(std::span<const T> device, const GridSpec& grid, std::uint64_t batch) {
    detail::check_reorder_args(device.size(), grid, batch, "reorder_from_device");
    std::vector<T> host(device.size());
    for (std::uint64_t p = 0; p < grid.paths(); ++p)
        for (std::uint64_t a = 0; a < grid.assets(); ++a)
            for (std::uint64_t t = 0; t < grid.timesteps(); ++t)
                host[host_index(grid, p, a, t)] = device[device_index(grid, batch, p, a, t)];
    return host;
}

template <class T>
std::vector<T> reorder_to_device(const std::vector<T>& host, const GridSpec& grid, std::uint64_t batch) {
    return reorder_to_device(std::span<const T>(host), grid, batch);
}

template <class T>
std::vector<T> reorder_from_device(const std::vector<T>& device, const GridSpec& grid, std::uint64_t batch) {
    return reorder_from_device(std::span<const T>(device), grid, batch);
}

}  // namespace hflow
