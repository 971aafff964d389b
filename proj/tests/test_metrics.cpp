#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <random>
#include <sstream>
#include <vector>

#include "gridcast/metrics.hpp"
#include "test_support.hpp"

using namespace gridcast;

TEST_CASE("identical tensors score zero") {
    std::mt19937_64 rng(61);
    const ByteTensor t = testsupport::random_tensor(rng, {3, 6, 4, 5, 8});
    const ScoreReport rep = mse(t, t);
    CHECK(rep.mse_all == 0.0);
    CHECK(rep.mse_volume == 0.0);
    CHECK(rep.mse_speed == 0.0);
    CHECK(rep.n_tests == 3);
    for (double v : rep.per_channel) CHECK(v == 0.0);
    for (double v : rep.per_horizon) CHECK(v == 0.0);
}

TEST_CASE("a uniform off-by-one scores exactly one") {
    ByteTensor truth({2, 6, 3, 3, 8}, 100);
    ByteTensor pred({2, 6, 3, 3, 8}, 101);
    const ScoreReport rep = mse(pred, truth);
    CHECK(rep.mse_all == 1.0);
    CHECK(rep.mse_volume == 1.0);
    CHECK(rep.mse_speed == 1.0);
    for (double v : rep.per_channel) CHECK(v == 1.0);
    for (double v : rep.per_horizon) CHECK(v == 1.0);
}

TEST_CASE("a single deviating element is averaged over everything") {
    ByteTensor truth({6, 2, 2, 8}, 0);
    ByteTensor pred = truth;
    pred(3, 1, 0, 5) = 10;
    const ScoreReport rep = mse(pred, truth);
    const double expect = 100.0 / (6.0 * 2 * 2 * 8);
    CHECK(rep.mse_all == Catch::Approx(expect).margin(1e-12));
    // Channel 5 is a speed channel; volume channels are untouched.
    CHECK(rep.mse_volume == 0.0);
    CHECK(rep.mse_speed == Catch::Approx(2.0 * expect).margin(1e-12));
    CHECK(rep.per_horizon[3] == Catch::Approx(100.0 / (2.0 * 2 * 8)).margin(1e-12));
    CHECK(rep.per_horizon[0] == 0.0);
}

TEST_CASE("mse matches a plain nested-loop reference on random pairs") {
    std::mt19937_64 rng(62);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 1 + rng() % 3;
        const ByteTensor truth = testsupport::random_tensor(rng, {n, 6, 4, 5, 8});
        const ByteTensor pred = testsupport::random_tensor(rng, {n, 6, 4, 5, 8});
        const ScoreReport rep = mse(pred, truth);

        CHECK(rep.mse_all ==
              Catch::Approx(testsupport::reference_mse(pred, truth)).epsilon(1e-12));
        for (std::size_t c = 0; c < 8; ++c) {
            CHECK(rep.per_channel[c] ==
                  Catch::Approx(testsupport::reference_channel_mse(pred, truth, c))
                      .epsilon(1e-12));
        }
        // Horizon h means frame h of every test.
        const std::size_t frame = 4 * 5 * 8;
        for (std::size_t h = 0; h < 6; ++h) {
            double sum = 0;
            std::size_t cnt = 0;
            for (std::size_t test = 0; test < n; ++test) {
                const std::size_t base = (test * 6 + h) * frame;
                for (std::size_t i = 0; i < frame; ++i) {
                    const double d = static_cast<double>(pred[base + i]) -
                                     static_cast<double>(truth[base + i]);
                    sum += d * d;
                    cnt += 1;
                }
            }
            CHECK(rep.per_horizon[h] == Catch::Approx(sum / cnt).epsilon(1e-12));
        }
        // mse_all is exactly the mean of volume and speed pools.
        CHECK(rep.mse_all ==
              Catch::Approx((rep.mse_volume + rep.mse_speed) / 2.0).epsilon(1e-12));
    }
}

TEST_CASE("workers do not change the score") {
    std::mt19937_64 rng(63);
    const ByteTensor truth = testsupport::random_tensor(rng, {8, 6, 5, 4, 8});
    const ByteTensor pred = testsupport::random_tensor(rng, {8, 6, 5, 4, 8});
    const ScoreReport a = mse(pred, truth, 1);
    const ScoreReport b = mse(pred, truth, 4);
    CHECK(a.mse_all == b.mse_all);
    CHECK(a.per_channel == b.per_channel);
    CHECK(a.per_horizon == b.per_horizon);
}

TEST_CASE("rank-4 stacks are treated as a single test") {
    std::mt19937_64 rng(64);
    const ByteTensor truth4 = testsupport::random_tensor(rng, {6, 3, 4, 8});
    const ByteTensor pred4 = testsupport::random_tensor(rng, {6, 3, 4, 8});
    const ScoreReport rep = mse(pred4, truth4);
    CHECK(rep.n_tests == 1);
    CHECK(rep.mse_all == Catch::Approx(testsupport::reference_mse(pred4, truth4)).epsilon(1e-12));
}

TEST_CASE("scoring rejects malformed stacks") {
    CHECK_THROWS_AS(mse(ByteTensor({6, 2, 2, 8}), ByteTensor({6, 2, 3, 8})), InvalidInputError);
    CHECK_THROWS_AS(mse(ByteTensor({5, 2, 2, 8}), ByteTensor({5, 2, 2, 8})), InvalidInputError);
    CHECK_THROWS_AS(mse(ByteTensor({6, 2, 2, 4}), ByteTensor({6, 2, 2, 4})), InvalidInputError);
    CHECK_THROWS_AS(mse(ByteTensor({2, 2}), ByteTensor({2, 2})), InvalidInputError);
    CHECK_THROWS_AS(ScoreAccumulator{}.report(), InvalidInputError);
}

TEST_CASE("an all-ones mask reproduces the unmasked score") {
    std::mt19937_64 rng(65);
    for (int trial = 0; trial < 25; ++trial) {
        const ByteTensor truth = testsupport::random_tensor(rng, {2, 6, 4, 4, 8});
        const ByteTensor pred = testsupport::random_tensor(rng, {2, 6, 4, 4, 8});
        const ScoreReport plain = mse(pred, truth);
        for (MaskMode mode : {MaskMode::Both, MaskMode::PredOnly}) {
            const Mask ones(4, 4, 1, mode);
            const ScoreReport masked = masked_mse(pred, truth, ones);
            CHECK(masked.mse_all == plain.mse_all);
            CHECK(masked.mse_volume == plain.mse_volume);
            CHECK(masked.mse_speed == plain.mse_speed);
            CHECK(masked.per_channel == plain.per_channel);
            CHECK(masked.per_horizon == plain.per_horizon);
        }
    }
}

TEST_CASE("masked scoring keeps the full denominator") {
    // Two cells; the mask keeps only cell (0,0).
    ByteTensor truth({6, 1, 2, 8}, 7);
    ByteTensor pred({6, 1, 2, 8}, 10);

    Mask keep_first(1, 2, 0, MaskMode::Both);
    keep_first.at(0, 0) = 1;

    // BOTH: inside d=3, outside zeroed. 48 elements inside.
    const ScoreReport both = masked_mse(pred, truth, keep_first);
    CHECK(both.mse_all == Catch::Approx(9.0 * 48 / 96).margin(1e-12));

    // PRED_ONLY: outside contributes (0 - truth)^2 = 49.
    keep_first.mode = MaskMode::PredOnly;
    const ScoreReport pred_only = masked_mse(pred, truth, keep_first);
    CHECK(pred_only.mse_all == Catch::Approx((9.0 * 48 + 49.0 * 48) / 96).margin(1e-12));

    // Unmasked for contrast.
    CHECK(mse(pred, truth).mse_all == Catch::Approx(9.0).margin(1e-12));
}

TEST_CASE("mask geometry must match the stack") {
    const ByteTensor t({6, 2, 2, 8}, 1);
    const Mask wrong(3, 2, 1);
    CHECK_THROWS_AS(masked_mse(t, t, wrong), InvalidInputError);
}

TEST_CASE("road_mask flags cells with any static evidence") {
    ByteTensor s({2, 2, 9}, 0);
    s(0, 0, 0) = 17;   // gray only
    s(0, 1, 3) = 255;  // connectivity only
    s(1, 1, 8) = 255;

    const Mask m = road_mask(s, MaskMode::PredOnly);
    CHECK(m.mode == MaskMode::PredOnly);
    CHECK(m.at(0, 0) == 1);
    CHECK(m.at(0, 1) == 1);
    CHECK(m.at(1, 0) == 0);
    CHECK(m.at(1, 1) == 1);

    CHECK_THROWS_AS(road_mask(ByteTensor({2, 2, 8})), InvalidInputError);
    CHECK_THROWS_AS(road_mask(ByteTensor({2, 2})), InvalidInputError);
}

TEST_CASE("pooling across stacks equals scoring the concatenation") {
    std::mt19937_64 rng(66);
    const ByteTensor pa = testsupport::random_tensor(rng, {2, 6, 3, 4, 8});
    const ByteTensor ta = testsupport::random_tensor(rng, {2, 6, 3, 4, 8});
    const ByteTensor pb = testsupport::random_tensor(rng, {3, 6, 3, 4, 8});
    const ByteTensor tb = testsupport::random_tensor(rng, {3, 6, 3, 4, 8});

    ScoreAccumulator acc;
    acc.add(pa, ta);
    acc.add(pb, tb);
    const ScoreReport pooled = acc.report();

    ByteTensor pc({5, 6, 3, 4, 8});
    ByteTensor tc({5, 6, 3, 4, 8});
    std::memcpy(pc.data(), pa.data(), pa.size());
    std::memcpy(pc.data() + pa.size(), pb.data(), pb.size());
    std::memcpy(tc.data(), ta.data(), ta.size());
    std::memcpy(tc.data() + ta.size(), tb.data(), tb.size());
    const ScoreReport whole = mse(pc, tc);

    CHECK(pooled.mse_all == whole.mse_all);
    CHECK(pooled.mse_volume == whole.mse_volume);
    CHECK(pooled.per_channel == whole.per_channel);
    CHECK(pooled.per_horizon == whole.per_horizon);
    CHECK(pooled.n_tests == 5);
}

TEST_CASE("mse_vs_std puts constant pixels in the first bin") {
    const std::size_t n = 2, rows = 3, cols = 2;
    ByteTensor input({n, 12, rows, cols, 8}, 50);
    ByteTensor truth({n, 6, rows, cols, 8}, 50);
    ByteTensor pred({n, 6, rows, cols, 8}, 53);

    const StdBinReport rep = mse_vs_std(pred, input, truth, ChannelKind::Volume);
    REQUIRE(rep.bins() == 1);
    CHECK(rep.counts[0] == rows * cols * 4);
    CHECK(rep.bin_edges.size() == 2);
    CHECK(rep.bin_edges[0] == 0.0);
    CHECK(rep.bin_edges[1] == 1.0);
    // Volume channels differ by 3 everywhere: per-pixel MSE is 9.
    CHECK(rep.mean_mse[0] == Catch::Approx(9.0).margin(1e-12));
    CHECK(rep.summed_mse[0] == Catch::Approx(9.0 * rows * cols * 4).margin(1e-9));
    CHECK(rep.cumulative[0] == Catch::Approx(rep.summed_mse[0]).margin(1e-12));
}

TEST_CASE("mse_vs_std separates populations by ground-truth std") {
    // One directional pixel alternates 0/255 across the 18 frames; the rest
    // stay constant. Population std of a balanced 0/255 sequence is 127.5.
    const std::size_t rows = 2, cols = 2;
    ByteTensor input({1, 12, rows, cols, 8}, 10);
    ByteTensor truth({1, 6, rows, cols, 8}, 10);
    ByteTensor pred({1, 6, rows, cols, 8}, 10);

    for (int f = 0; f < 12; ++f) {
        input(0, f, 0, 0, 0) = f % 2 ? 255 : 0;
    }
    for (int f = 0; f < 6; ++f) {
        truth(0, f, 0, 0, 0) = f % 2 ? 255 : 0;
        pred(0, f, 0, 0, 0) = 100;
    }

    const StdBinReport rep = mse_vs_std(pred, input, truth, ChannelKind::Volume, 1.0);
    REQUIRE(rep.bins() == 128);  // floor(127.5) + 1
    CHECK(rep.counts[0] == rows * cols * 4 - 1);
    CHECK(rep.counts[127] == 1);
    for (std::size_t k = 1; k < 127; ++k) CHECK(rep.counts[k] == 0);

    // The noisy pixel's MSE: three frames off by 100, three off by 155.
    const double noisy = (3 * 100.0 * 100.0 + 3 * 155.0 * 155.0) / 6.0;
    CHECK(rep.mean_mse[127] == Catch::Approx(noisy).margin(1e-9));
    CHECK(rep.mean_mse[0] == Catch::Approx(0.0).margin(1e-12));

    // Wider bins shift the population into coarser buckets.
    const StdBinReport wide = mse_vs_std(pred, input, truth, ChannelKind::Volume, 50.0);
    REQUIRE(wide.bins() == 3);
    CHECK(wide.counts[2] == 1);
    CHECK(wide.counts[0] == rows * cols * 4 - 1);
}

TEST_CASE("mse_vs_std conserves the total error") {
    std::mt19937_64 rng(67);
    for (ChannelKind kind : {ChannelKind::Volume, ChannelKind::Speed}) {
        const std::size_t n = 3, rows = 4, cols = 5;
        const ByteTensor input = testsupport::random_tensor(rng, {n, 12, rows, cols, 8});
        const ByteTensor truth = testsupport::random_tensor(rng, {n, 6, rows, cols, 8});
        const ByteTensor pred = testsupport::random_tensor(rng, {n, 6, rows, cols, 8});

        const StdBinReport rep = mse_vs_std(pred, input, truth, kind, 7.5);

        std::uint64_t count_total = 0;
        double sum_total = 0;
        for (std::size_t k = 0; k < rep.bins(); ++k) {
            count_total += rep.counts[k];
            sum_total += rep.summed_mse[k];
        }
        CHECK(count_total == rows * cols * 4);

        const ScoreReport score = mse(pred, truth);
        const double channel_total =
            (kind == ChannelKind::Volume ? score.mse_volume : score.mse_speed) * rows * cols * 4;
        CHECK(sum_total == Catch::Approx(channel_total).epsilon(1e-9));
        CHECK(rep.cumulative.back() == Catch::Approx(sum_total).epsilon(1e-12));
        for (std::size_t k = 1; k < rep.bins(); ++k) {
            CHECK(rep.cumulative[k] >= rep.cumulative[k - 1] - 1e-12);
        }
    }
}

TEST_CASE("the combined 18-frame overload matches the split form") {
    std::mt19937_64 rng(68);
    const std::size_t n = 2, rows = 3, cols = 3;
    const ByteTensor input = testsupport::random_tensor(rng, {n, 12, rows, cols, 8});
    const ByteTensor truth = testsupport::random_tensor(rng, {n, 6, rows, cols, 8});
    const ByteTensor pred = testsupport::random_tensor(rng, {n, 6, rows, cols, 8});

    ByteTensor combined({n, 18, rows, cols, 8});
    const std::size_t frame = rows * cols * 8;
    for (std::size_t t = 0; t < n; ++t) {
        std::memcpy(combined.data() + t * 18 * frame, input.data() + t * 12 * frame, 12 * frame);
        std::memcpy(combined.data() + t * 18 * frame + 12 * frame, truth.data() + t * 6 * frame,
                    6 * frame);
    }

    const StdBinReport split = mse_vs_std(pred, input, truth, ChannelKind::Speed, 2.0);
    const StdBinReport merged = mse_vs_std(pred, combined, ChannelKind::Speed, 2.0);
    CHECK(split.counts == merged.counts);
    CHECK(split.summed_mse == merged.summed_mse);
    CHECK(split.mean_mse == merged.mean_mse);
    CHECK(split.bin_edges == merged.bin_edges);
}

TEST_CASE("mse_vs_std validates its inputs") {
    const ByteTensor pred({1, 6, 2, 2, 8}, 0);
    const ByteTensor input({1, 12, 2, 2, 8}, 0);
    const ByteTensor truth({1, 6, 2, 2, 8}, 0);
    CHECK_THROWS_AS(mse_vs_std(pred, input, truth, ChannelKind::Volume, 0.0), InvalidInputError);
    CHECK_THROWS_AS(mse_vs_std(pred, input, truth, ChannelKind::Volume, -1.0), InvalidInputError);
    CHECK_THROWS_AS(mse_vs_std(pred, ByteTensor({1, 12, 3, 2, 8}), truth, ChannelKind::Volume),
                    InvalidInputError);
    CHECK_THROWS_AS(mse_vs_std(pred, input, ByteTensor({1, 6, 2, 3, 8}), ChannelKind::Volume),
                    InvalidInputError);
}

TEST_CASE("pixel_stats reports mean and population std per channel pair") {
    // 4 samples; one pixel alternates 0/255 in volume, another is constant.
    ByteTensor stack({4, 1, 2, 8}, 0);
    for (std::size_t s = 0; s < 4; ++s) {
        stack(s, 0, 0, 0) = s % 2 ? 255 : 0;  // NE volume alternates
        stack(s, 0, 0, 1) = 60;               // NE speed constant
        stack(s, 0, 1, 6) = 10;               // NW volume constant
        stack(s, 0, 1, 7) = static_cast<std::uint8_t>(10 * s);  // NW speed 0,10,20,30
    }
    const auto rows = pixel_stats(stack);
    REQUIRE(rows.size() == 1 * 2 * 4);

    const PixelStatsRow& ne = rows[0];  // (0,0) NE
    CHECK(ne.row == 0);
    CHECK(ne.col == 0);
    CHECK(ne.heading == Heading::NE);
    CHECK(ne.vol_mean == Catch::Approx(127.5).margin(1e-12));
    CHECK(ne.vol_std == Catch::Approx(127.5).margin(1e-9));
    CHECK(ne.speed_mean == Catch::Approx(60.0).margin(1e-12));
    CHECK(ne.speed_std == Catch::Approx(0.0).margin(1e-9));

    const PixelStatsRow& nw = rows[7];  // (0,1) NW
    CHECK(nw.heading == Heading::NW);
    CHECK(nw.vol_mean == Catch::Approx(10.0).margin(1e-12));
    CHECK(nw.speed_mean == Catch::Approx(15.0).margin(1e-12));
    // Population std of {0,10,20,30}.
    CHECK(nw.speed_std == Catch::Approx(std::sqrt(125.0)).margin(1e-9));
}

TEST_CASE("pixel_stats matches a two-pass reference on random stacks") {
    std::mt19937_64 rng(69);
    const ByteTensor stack = testsupport::random_tensor(rng, {7, 3, 2, 8});
    const auto rows = pixel_stats(stack);
    REQUIRE(rows.size() == 3 * 2 * 4);

    for (const PixelStatsRow& row : rows) {
        const std::size_t vch = static_cast<std::size_t>(volume_channel(row.heading));
        std::vector<double> vals;
        for (std::size_t s = 0; s < 7; ++s) {
            vals.push_back(stack(s, row.row, row.col, vch));
        }
        double mean = 0;
        for (double v : vals) mean += v;
        mean /= static_cast<double>(vals.size());
        double var = 0;
        for (double v : vals) var += (v - mean) * (v - mean);
        var /= static_cast<double>(vals.size());
        CHECK(row.vol_mean == Catch::Approx(mean).margin(1e-9));
        CHECK(row.vol_std == Catch::Approx(std::sqrt(var)).margin(1e-9));
    }
}

TEST_CASE("pixel_stats accepts any rank above three") {
    std::mt19937_64 rng(70);
    const ByteTensor five = testsupport::random_tensor(rng, {2, 3, 2, 2, 8});
    CHECK(pixel_stats(five).size() == 2 * 2 * 4);
    CHECK_THROWS_AS(pixel_stats(ByteTensor({3, 2, 8})), InvalidInputError);
    CHECK_THROWS_AS(pixel_stats(ByteTensor({2, 3, 2, 2, 4})), InvalidInputError);
}

TEST_CASE("csv writers emit the documented headers") {
    std::ostringstream stats_out;
    write_pixel_stats_csv(stats_out, pixel_stats(ByteTensor({2, 1, 1, 8}, 5)));
    CHECK(stats_out.str().rfind("row,col,heading,vol_mean,vol_std,speed_mean,speed_std\n", 0) ==
          0);

    ByteTensor input({1, 12, 1, 1, 8}, 0);
    ByteTensor truth({1, 6, 1, 1, 8}, 0);
    const StdBinReport rep = mse_vs_std(truth, input, truth, ChannelKind::Volume);
    std::ostringstream bins_out;
    rep.write_csv(bins_out);
    CHECK(bins_out.str().rfind("bin_lo,bin_hi,count,mean_mse,summed_mse,cumulative_summed_mse\n",
                               0) == 0);
}
