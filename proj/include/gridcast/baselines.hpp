#pragma once

#include <cstdint>
#include <cstring>
#include <string>

#include "gridcast/metrics.hpp"
#include "gridcast/tensor.hpp"
#include "gridcast/util.hpp"

namespace gridcast {

namespace detail {

inline ByteTensor prediction_like(const ByteTensor& input, const TestStack& s) {
    if (input.rank() == 4) return ByteTensor({6, s.rows, s.cols, 8}, 0);
    return ByteTensor({s.n, 6, s.rows, s.cols, 8}, 0);
}

}  // namespace detail

/// Predict the rounded mean of the 12 input frames for every horizon.
inline ByteTensor naive_average(const ByteTensor& input) {
    const detail::TestStack s = detail::as_test_stack(input, 12, "input");
    ByteTensor out = detail::prediction_like(input, s);
    const std::size_t frame = s.rows * s.cols * 8;
    for (std::size_t i = 0; i < s.n; ++i) {
        const std::uint8_t* in = s.data + i * 12 * frame;
        std::uint8_t* first = out.data() + i * 6 * frame;
        for (std::size_t e = 0; e < frame; ++e) {
            std::uint64_t sum = 0;
            for (int f = 0; f < 12; ++f) sum += in[static_cast<std::size_t>(f) * frame + e];
            first[e] = static_cast<std::uint8_t>(round_half_up_ratio(sum, 12));
        }
        for (int f = 1; f < 6; ++f) {
            std::memcpy(first + static_cast<std::size_t>(f) * frame, first, frame);
        }
    }
    return out;
}

/// All-zero prediction; its score is the energy of the truth.
inline ByteTensor zeros_baseline(const ByteTensor& input) {
    const detail::TestStack s = detail::as_test_stack(input, 12, "input");
    return detail::prediction_like(input, s);
}

/// Repeat the last input frame for every horizon.
inline ByteTensor persistence(const ByteTensor& input) {
    const detail::TestStack s = detail::as_test_stack(input, 12, "input");
    ByteTensor out = detail::prediction_like(input, s);
    const std::size_t frame = s.rows * s.cols * 8;
    for (std::size_t i = 0; i < s.n; ++i) {
        const std::uint8_t* last = s.data + (i * 12 + 11) * frame;
        for (int f = 0; f < 6; ++f) {
            std::memcpy(out.data() + (i * 6 + static_cast<std::size_t>(f)) * frame, last, frame);
        }
    }
    return out;
}

/// Dispatch by CLI method name: naive-average, zeros or persistence.
inline ByteTensor run_baseline(const std::string& method, const ByteTensor& input) {
    if (method == "naive-average") return naive_average(input);
    if (method == "zeros") return zeros_baseline(input);
    if (method == "persistence") return persistence(input);
    throw InvalidInputError("unknown baseline method: " + method);
}

}  // namespace gridcast
