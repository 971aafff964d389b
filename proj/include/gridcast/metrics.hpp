#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridcast/grid.hpp"
#include "gridcast/tensor.hpp"
#include "gridcast/util.hpp"

namespace gridcast {

struct ScoreReport {
    double mse_all = 0;
    double mse_volume = 0;
    double mse_speed = 0;
    std::array<double, 8> per_channel = {};
    std::array<double, 6> per_horizon = {};
    std::size_t n_tests = 0;

    nlohmann::json to_json() const {
        return nlohmann::json{{"mse_all", mse_all},       {"mse_volume", mse_volume},
                              {"mse_speed", mse_speed},   {"per_channel", per_channel},
                              {"per_horizon", per_horizon}, {"n_tests", n_tests}};
    }
};

enum class MaskMode { Both, PredOnly };

inline const char* mask_mode_name(MaskMode m) {
    return m == MaskMode::Both ? "both" : "pred-only";
}

/// Binary (rows, cols) grid broadcast over frames and channels when scoring.
struct Mask {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint8_t> cells;
    MaskMode mode = MaskMode::Both;

    Mask() = default;
    Mask(std::size_t r, std::size_t c, std::uint8_t fill = 0, MaskMode m = MaskMode::Both)
        : rows(r), cols(c), cells(r * c, fill), mode(m) {}

    std::uint8_t at(std::size_t r, std::size_t c) const { return cells[r * cols + c]; }
    std::uint8_t& at(std::size_t r, std::size_t c) { return cells[r * cols + c]; }
};

/// Cells touched by any road evidence: nonzero grayscale or any
/// connectivity bit of the 9-channel static tensor.
inline Mask road_mask(const ByteTensor& static_tensor, MaskMode mode = MaskMode::Both) {
    if (static_tensor.rank() != 3 || static_tensor.dim(2) != 9) {
        throw InvalidInputError("static tensor must have shape (rows, cols, 9), got " +
                                static_tensor.shape_string());
    }
    Mask m(static_tensor.dim(0), static_tensor.dim(1), 0, mode);
    for (std::size_t r = 0; r < m.rows; ++r) {
        for (std::size_t c = 0; c < m.cols; ++c) {
            for (std::size_t ch = 0; ch < 9; ++ch) {
                if (static_tensor(r, c, ch) != 0) {
                    m.at(r, c) = 1;
                    break;
                }
            }
        }
    }
    return m;
}

namespace detail {

struct TestStack {
    const std::uint8_t* data = nullptr;
    std::size_t n = 0;
    std::size_t frames = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
};

inline TestStack as_test_stack(const ByteTensor& t, std::size_t expect_frames,
                               const char* what) {
    TestStack s;
    if (t.rank() == 4) {
        s.n = 1;
        s.frames = t.dim(0);
        s.rows = t.dim(1);
        s.cols = t.dim(2);
    } else if (t.rank() == 5) {
        s.n = t.dim(0);
        s.frames = t.dim(1);
        s.rows = t.dim(2);
        s.cols = t.dim(3);
    } else {
        throw InvalidInputError(std::string(what) + " must be rank 4 or 5, got " +
                                t.shape_string());
    }
    if (t.dim(t.rank() - 1) != 8 || (expect_frames != 0 && s.frames != expect_frames)) {
        throw InvalidInputError(std::string(what) + " has unexpected shape " + t.shape_string());
    }
    s.data = t.data();
    return s;
}

/// Per (horizon, channel) integer sums of squared differences: everything in
/// the report is a ratio of these, so the result is order-independent.
using SqTable = std::array<std::array<std::uint64_t, 8>, 6>;

inline SqTable score_one_test(const std::uint8_t* pred, const std::uint8_t* truth,
                              std::size_t rows, std::size_t cols, const Mask* mask) {
    SqTable table = {};
    const std::size_t cells = rows * cols;
    for (int h = 0; h < 6; ++h) {
        const std::uint8_t* p = pred + static_cast<std::size_t>(h) * cells * 8;
        const std::uint8_t* t = truth + static_cast<std::size_t>(h) * cells * 8;
        auto& row_sums = table[static_cast<std::size_t>(h)];
        for (std::size_t cell = 0; cell < cells; ++cell) {
            const bool keep = mask == nullptr || mask->cells[cell] != 0;
            for (int c = 0; c < 8; ++c) {
                int d;
                if (keep) {
                    d = static_cast<int>(p[cell * 8 + static_cast<std::size_t>(c)]) -
                        static_cast<int>(t[cell * 8 + static_cast<std::size_t>(c)]);
                } else if (mask->mode == MaskMode::Both) {
                    d = 0;
                } else {
                    d = -static_cast<int>(t[cell * 8 + static_cast<std::size_t>(c)]);
                }
                row_sums[static_cast<std::size_t>(c)] +=
                    static_cast<std::uint64_t>(d) * static_cast<std::uint64_t>(d);
            }
        }
    }
    return table;
}

}  // namespace detail

/// Pools squared-error sums across any number of (pred, truth) stacks, so
/// scoring many files gives the same result as scoring one concatenation.
class ScoreAccumulator {
public:
    void add(const ByteTensor& pred, const ByteTensor& truth, const Mask* mask = nullptr,
             unsigned workers = 1) {
        if (!pred.same_shape(truth)) {
            throw InvalidInputError("prediction shape " + pred.shape_string() +
                                    " does not match truth shape " + truth.shape_string());
        }
        const detail::TestStack p = detail::as_test_stack(pred, 6, "prediction");
        if (mask != nullptr && (mask->rows != p.rows || mask->cols != p.cols)) {
            throw InvalidInputError("mask grid does not match tensor grid");
        }
        const std::size_t per_test = p.frames * p.rows * p.cols * 8;
        std::vector<detail::SqTable> tables(p.n);
        parallel_for(std::size_t{0}, p.n, workers, [&](std::size_t i) {
            tables[i] = detail::score_one_test(p.data + i * per_test, truth.data() + i * per_test,
                                               p.rows, p.cols, mask);
        });
        for (const detail::SqTable& tab : tables) {
            for (int h = 0; h < 6; ++h) {
                for (int c = 0; c < 8; ++c) err_[h][c] += tab[h][c];
            }
        }
        samples_ += p.n * p.rows * p.cols;
        n_tests_ += p.n;
    }

    std::size_t n_tests() const { return n_tests_; }

    ScoreReport report() const {
        if (samples_ == 0) throw InvalidInputError("nothing scored");
        ScoreReport rep;
        rep.n_tests = n_tests_;
        std::uint64_t total = 0;
        std::uint64_t by_channel[8] = {};
        std::uint64_t by_horizon[6] = {};
        for (int h = 0; h < 6; ++h) {
            for (int c = 0; c < 8; ++c) {
                total += err_[h][c];
                by_channel[c] += err_[h][c];
                by_horizon[h] += err_[h][c];
            }
        }
        const double m = static_cast<double>(samples_);
        rep.mse_all = static_cast<double>(total) / (m * 6 * 8);
        std::uint64_t vol = 0, spd = 0;
        for (int c = 0; c < 8; c += 2) vol += by_channel[c];
        for (int c = 1; c < 8; c += 2) spd += by_channel[c];
        rep.mse_volume = static_cast<double>(vol) / (m * 6 * 4);
        rep.mse_speed = static_cast<double>(spd) / (m * 6 * 4);
        for (int c = 0; c < 8; ++c) {
            rep.per_channel[static_cast<std::size_t>(c)] =
                static_cast<double>(by_channel[c]) / (m * 6);
        }
        for (int h = 0; h < 6; ++h) {
            rep.per_horizon[static_cast<std::size_t>(h)] =
                static_cast<double>(by_horizon[h]) / (m * 8);
        }
        return rep;
    }

private:
    detail::SqTable err_ = {};
    /// Σ over added stacks of n_tests × rows × cols.
    std::uint64_t samples_ = 0;
    std::size_t n_tests_ = 0;
};

/// Plain competition MSE over (n,6,rows,cols,8) or (6,rows,cols,8) stacks.
inline ScoreReport mse(const ByteTensor& pred, const ByteTensor& truth, unsigned workers = 1) {
    ScoreAccumulator acc;
    acc.add(pred, truth, nullptr, workers);
    return acc.report();
}

/// Masked MSE. Both modes keep the denominator at the full element count;
/// BOTH zeroes prediction and truth outside the mask, PRED_ONLY only the
/// prediction.
inline ScoreReport masked_mse(const ByteTensor& pred, const ByteTensor& truth, const Mask& mask,
                              unsigned workers = 1) {
    ScoreAccumulator acc;
    acc.add(pred, truth, &mask, workers);
    return acc.report();
}

enum class ChannelKind { Volume, Speed };

inline const char* channel_kind_name(ChannelKind k) {
    return k == ChannelKind::Volume ? "volume" : "speed";
}

/// Directional pixels bucketed by ground-truth standard deviation, with the
/// per-bucket share of the total MSE.
struct StdBinReport {
    double bin_width = 1.0;
    std::vector<double> bin_edges;
    std::vector<std::uint64_t> counts;
    std::vector<double> mean_mse;
    std::vector<double> summed_mse;
    std::vector<double> cumulative;

    std::size_t bins() const { return counts.size(); }

    nlohmann::json to_json() const {
        return nlohmann::json{{"bin_width", bin_width},   {"bin_edges", bin_edges},
                              {"counts", counts},         {"mean_mse", mean_mse},
                              {"summed_mse", summed_mse}, {"cumulative", cumulative}};
    }

    void write_csv(std::ostream& out) const {
        out << "bin_lo,bin_hi,count,mean_mse,summed_mse,cumulative_summed_mse\n";
        for (std::size_t k = 0; k < bins(); ++k) {
            out << bin_edges[k] << "," << bin_edges[k + 1] << "," << counts[k] << ","
                << mean_mse[k] << "," << summed_mse[k] << "," << cumulative[k] << "\n";
        }
    }
};

/// Bin directional pixels by the std of their ground-truth channel (over the
/// 12 input and 6 truth frames of every test) and report how the prediction
/// MSE distributes over those bins.
inline StdBinReport mse_vs_std(const ByteTensor& pred, const ByteTensor& input,
                               const ByteTensor& truth, ChannelKind kind,
                               double bin_width = 1.0) {
    if (!(bin_width > 0)) throw InvalidInputError("bin width must be positive");
    const detail::TestStack p = detail::as_test_stack(pred, 6, "prediction");
    const detail::TestStack in = detail::as_test_stack(input, 12, "input");
    const detail::TestStack t = detail::as_test_stack(truth, 6, "truth");
    if (!pred.same_shape(truth)) throw InvalidInputError("prediction/truth shape mismatch");
    if (in.n != p.n || in.rows != p.rows || in.cols != p.cols) {
        throw InvalidInputError("input stack does not match prediction stack");
    }

    const std::size_t rows = p.rows, cols = p.cols, n = p.n;
    const std::size_t frame = rows * cols * 8;
    const std::size_t n_pixels = rows * cols * 4;

    std::vector<double> pixel_std(n_pixels);
    std::vector<double> pixel_mse(n_pixels);

    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            for (int h = 0; h < 4; ++h) {
                const std::size_t ch = static_cast<std::size_t>(
                    kind == ChannelKind::Volume ? volume_channel(static_cast<Heading>(h))
                                                : speed_channel(static_cast<Heading>(h)));
                const std::size_t base = (r * cols + c) * 8 + ch;
                std::uint64_t sum = 0, sumsq = 0, err = 0;
                for (std::size_t test = 0; test < n; ++test) {
                    const std::uint8_t* in_t = in.data + test * 12 * frame;
                    const std::uint8_t* tr_t = t.data + test * 6 * frame;
                    const std::uint8_t* pr_t = p.data + test * 6 * frame;
                    for (int f = 0; f < 12; ++f) {
                        const std::uint64_t v = in_t[static_cast<std::size_t>(f) * frame + base];
                        sum += v;
                        sumsq += v * v;
                    }
                    for (int f = 0; f < 6; ++f) {
                        const std::uint64_t v = tr_t[static_cast<std::size_t>(f) * frame + base];
                        sum += v;
                        sumsq += v * v;
                        const int d =
                            static_cast<int>(pr_t[static_cast<std::size_t>(f) * frame + base]) -
                            static_cast<int>(v);
                        err += static_cast<std::uint64_t>(d) * static_cast<std::uint64_t>(d);
                    }
                }
                const double m = static_cast<double>(18 * n);
                const double mean = static_cast<double>(sum) / m;
                const double var = static_cast<double>(sumsq) / m - mean * mean;
                const std::size_t px = (r * cols + c) * 4 + static_cast<std::size_t>(h);
                pixel_std[px] = std::sqrt(std::max(0.0, var));
                pixel_mse[px] = static_cast<double>(err) / static_cast<double>(6 * n);
            }
        }
    }

    std::size_t nbins = 0;
    for (double s : pixel_std) {
        nbins = std::max(nbins, static_cast<std::size_t>(std::floor(s / bin_width)) + 1);
    }
    StdBinReport rep;
    rep.bin_width = bin_width;
    rep.counts.assign(nbins, 0);
    rep.summed_mse.assign(nbins, 0.0);
    for (std::size_t px = 0; px < n_pixels; ++px) {
        const std::size_t k = static_cast<std::size_t>(std::floor(pixel_std[px] / bin_width));
        rep.counts[k] += 1;
        rep.summed_mse[k] += pixel_mse[px];
    }
    rep.bin_edges.resize(nbins + 1);
    for (std::size_t k = 0; k <= nbins; ++k) rep.bin_edges[k] = static_cast<double>(k) * bin_width;
    rep.mean_mse.assign(nbins, 0.0);
    rep.cumulative.assign(nbins, 0.0);
    double running = 0;
    for (std::size_t k = 0; k < nbins; ++k) {
        if (rep.counts[k] > 0) rep.mean_mse[k] = rep.summed_mse[k] / static_cast<double>(rep.counts[k]);
        running += rep.summed_mse[k];
        rep.cumulative[k] = running;
    }
    return rep;
}

/// Overload taking the 18-frame ground truth as one (n,18,rows,cols,8) stack
/// (12 input frames followed by the 6 truth frames).
inline StdBinReport mse_vs_std(const ByteTensor& pred, const ByteTensor& combined,
                               ChannelKind kind, double bin_width = 1.0) {
    const detail::TestStack c = detail::as_test_stack(combined, 18, "combined truth");
    ByteTensor input({c.n, 12, c.rows, c.cols, 8});
    ByteTensor truth({c.n, 6, c.rows, c.cols, 8});
    const std::size_t frame = c.rows * c.cols * 8;
    for (std::size_t test = 0; test < c.n; ++test) {
        const std::uint8_t* src = c.data + test * 18 * frame;
        std::copy(src, src + 12 * frame, input.data() + test * 12 * frame);
        std::copy(src + 12 * frame, src + 18 * frame, truth.data() + test * 6 * frame);
    }
    return mse_vs_std(pred, input, truth, kind, bin_width);
}

struct PixelStatsRow {
    std::size_t row = 0;
    std::size_t col = 0;
    Heading heading = Heading::NE;
    double vol_mean = 0;
    double vol_std = 0;
    double speed_mean = 0;
    double speed_std = 0;
};

/// Per-directional-pixel mean and population std of both channels, over all
/// leading (sample) dimensions of the given stack.
inline std::vector<PixelStatsRow> pixel_stats(const ByteTensor& truth) {
    if (truth.rank() < 4 || truth.dim(truth.rank() - 1) != 8) {
        throw InvalidInputError("expected a (..., rows, cols, 8) stack, got " +
                                truth.shape_string());
    }
    const std::size_t rows = truth.dim(truth.rank() - 3);
    const std::size_t cols = truth.dim(truth.rank() - 2);
    const std::size_t frame = rows * cols * 8;
    const std::size_t samples = truth.size() / frame;

    std::vector<PixelStatsRow> out;
    out.reserve(rows * cols * 4);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            for (int h = 0; h < 4; ++h) {
                const Heading hd = static_cast<Heading>(h);
                PixelStatsRow row;
                row.row = r;
                row.col = c;
                row.heading = hd;
                std::uint64_t vs = 0, vs2 = 0, ss = 0, ss2 = 0;
                const std::size_t vbase =
                    (r * cols + c) * 8 + static_cast<std::size_t>(volume_channel(hd));
                const std::size_t sbase =
                    (r * cols + c) * 8 + static_cast<std::size_t>(speed_channel(hd));
                for (std::size_t s = 0; s < samples; ++s) {
                    const std::uint64_t v = truth.data()[s * frame + vbase];
                    const std::uint64_t sp = truth.data()[s * frame + sbase];
                    vs += v;
                    vs2 += v * v;
                    ss += sp;
                    ss2 += sp * sp;
                }
                const double m = static_cast<double>(samples);
                row.vol_mean = static_cast<double>(vs) / m;
                row.vol_std =
                    std::sqrt(std::max(0.0, static_cast<double>(vs2) / m - row.vol_mean * row.vol_mean));
                row.speed_mean = static_cast<double>(ss) / m;
                row.speed_std = std::sqrt(
                    std::max(0.0, static_cast<double>(ss2) / m - row.speed_mean * row.speed_mean));
                out.push_back(row);
            }
        }
    }
    return out;
}

inline void write_pixel_stats_csv(std::ostream& out, const std::vector<PixelStatsRow>& rows) {
    out << "row,col,heading,vol_mean,vol_std,speed_mean,speed_std\n";
    for (const PixelStatsRow& r : rows) {
        out << r.row << "," << r.col << "," << heading_name(r.heading) << "," << r.vol_mean << ","
            << r.vol_std << "," << r.speed_mean << "," << r.speed_std << "\n";
    }
}

}  // namespace gridcast
