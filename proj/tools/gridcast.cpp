#include <glob.h>

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gridcast/gridcast.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<fs::path> expand_glob(const std::string& pattern) {
    glob_t g = {};
    const int rc = ::glob(pattern.c_str(), GLOB_TILDE, nullptr, &g);
    std::vector<fs::path> paths;
    if (rc == 0) {
        for (std::size_t i = 0; i < g.gl_pathc; ++i) paths.emplace_back(g.gl_pathv[i]);
    }
    globfree(&g);
    if (rc != 0 && rc != GLOB_NOMATCH) {
        throw gridcast::InvalidInputError("glob failed for pattern: " + pattern);
    }
    if (paths.empty()) {
        throw gridcast::InvalidInputError("no files match pattern: " + pattern);
    }
    std::sort(paths.begin(), paths.end());
    return paths;
}

bool tensor_extension(const fs::path& p) {
    const auto e = p.extension().string();
    return e == ".h5" || e == ".hdf5" || e == ".t4c" || e == ".bin";
}

/// A --pred/--truth argument names either a tensor file or a directory of
/// them; directories are listed in name order.
std::vector<fs::path> tensor_files(const fs::path& p) {
    if (fs::is_regular_file(p)) return {p};
    if (!fs::is_directory(p)) {
        throw gridcast::InvalidInputError("no such file or directory: " + p.string());
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(p)) {
        if (entry.is_regular_file() && tensor_extension(entry.path())) {
            files.push_back(entry.path());
        }
    }
    if (files.empty()) {
        throw gridcast::InvalidInputError("no tensor files in directory: " + p.string());
    }
    std::sort(files.begin(), files.end());
    return files;
}

gridcast::LocalDate parse_date_arg(const std::string& s) {
    const auto d = gridcast::parse_date(s);
    if (!d) throw gridcast::InvalidInputError("bad date (expected YYYY-MM-DD): " + s);
    return *d;
}

void write_json_file(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw gridcast::InvalidInputError("cannot write: " + path.string());
    out << j.dump(2) << "\n";
}

std::ofstream open_text_out(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw gridcast::InvalidInputError("cannot write: " + path.string());
    return out;
}

// ---------------------------------------------------------------------------
// synth: self-contained generators so the pipeline can be exercised without
// proprietary probe data.
// ---------------------------------------------------------------------------

void synth_probes(const gridcast::CityConfig& cfg, const gridcast::LocalDate& date,
                  std::size_t n, std::uint64_t seed, double oob_fraction, std::ostream& out) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const double lat_span = cfg.lat_max() - cfg.lat_min;
    const double lon_span = cfg.lon_max() - cfg.lon_min;

    out << gridcast::kProbeHeader << "\n";
    char line[160];
    for (std::size_t i = 0; i < n; ++i) {
        double lat = cfg.lat_min + u01(rng) * lat_span;
        double lon = cfg.lon_min + u01(rng) * lon_span;
        if (u01(rng) < oob_fraction) lat = cfg.lat_max() + 1.0 + u01(rng);
        const int minutes = static_cast<int>(rng() % 1440);
        const int seconds = static_cast<int>(rng() % 60);
        const double speed = u01(rng) * 140.0;
        const double heading = u01(rng) * 360.0;
        std::snprintf(line, sizeof(line), "%.6f,%.6f,%04d-%02d-%02dT%02d:%02d:%02d,%.2f,%.2f\n",
                      lat, lon, date.year, date.month, date.day, minutes / 60, minutes % 60,
                      seconds, speed, heading);
        out << line;
    }
}

void synth_raster(std::size_t rows, std::size_t cols, std::size_t strokes, std::uint64_t seed,
                  gridcast::HighResRaster& raster) {
    raster = gridcast::HighResRaster(rows, cols, 255);
    std::mt19937_64 rng(seed);
    for (std::size_t s = 0; s < strokes; ++s) {
        std::size_t r = rng() % rows;
        std::size_t c = rng() % cols;
        const bool horizontal = rng() % 2 == 0;
        const std::size_t len = 10 + rng() % (horizontal ? cols : rows);
        for (std::size_t i = 0; i < len; ++i) {
            raster.at(r, c) = static_cast<std::uint8_t>(rng() % 128);
            if (horizontal) {
                c = (c + 1) % cols;
                if (rng() % 4 == 0) r = (r + (rng() % 2 ? 1 : rows - 1)) % rows;
            } else {
                r = (r + 1) % rows;
                if (rng() % 4 == 0) c = (c + (rng() % 2 ? 1 : cols - 1)) % cols;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Subcommand bodies.
// ---------------------------------------------------------------------------

struct IngestArgs {
    std::string probes;
    std::string city_config;
    std::string date;
    std::string out;
    std::string stats;
    unsigned workers = 1;
};

int run_ingest(const IngestArgs& a) {
    const auto cfg = gridcast::CityConfig::load(a.city_config);
    const auto date = parse_date_arg(a.date);
    const auto paths = expand_glob(a.probes);

    gridcast::OutputLock lock(a.out);
    gridcast::IngestStats stats;
    const gridcast::ByteTensor day = gridcast::ingest_day(paths, cfg, date, a.workers, &stats);
    gridcast::write_tensor(a.out, day);
    if (!a.stats.empty()) write_json_file(a.stats, stats.to_json());
    std::cerr << "ingested " << stats.records << " records (" << stats.in_bounds
              << " in bounds, " << stats.out_of_bounds << " out of bounds, " << stats.rejected
              << " rejected) from " << paths.size() << " file(s) -> " << a.out << "\n";
    return 0;
}

struct StaticArgs {
    std::string raster;
    std::string city_config;
    std::string out;
};

int run_static(const StaticArgs& a) {
    const auto cfg = gridcast::CityConfig::load(a.city_config);
    const auto raster = gridcast::read_pgm(a.raster);
    const gridcast::ByteTensor st = gridcast::build_static(raster, cfg);
    gridcast::write_tensor(a.out, st);
    std::cerr << "static tensor " << st.shape_string() << " -> " << a.out << "\n";
    return 0;
}

struct SlotsArgs {
    std::string days;
    std::size_t n = 100;
    std::uint64_t seed = 0;
    std::string out_prefix;
};

int run_slots_sample(const SlotsArgs& a) {
    const auto manifest = gridcast::DayManifest::load(a.days);
    const gridcast::TestSet set = gridcast::sample_test_set(manifest.days, a.n, a.seed);
    const auto paths = gridcast::write_test_set(a.out_prefix, set, a.seed);
    std::cerr << "sampled " << set.n_tests() << " slots from " << manifest.days.size()
              << " day(s) -> " << paths.input << ", " << paths.truth << ", " << paths.meta
              << "\n";
    return 0;
}

struct ScoreArgs {
    std::string pred;
    std::string truth;
    std::string mask;
    std::string mask_mode = "both";
    std::string report;
    unsigned workers = 1;
};

int run_score(const ScoreArgs& a) {
    const auto pred_files = tensor_files(a.pred);
    const auto truth_files = tensor_files(a.truth);
    if (pred_files.size() != truth_files.size()) {
        throw gridcast::InvalidInputError("prediction/truth file count mismatch");
    }

    gridcast::Mask mask;
    const bool masked = !a.mask.empty();
    if (masked) {
        const auto mode = a.mask_mode == "both" ? gridcast::MaskMode::Both
                         : a.mask_mode == "pred-only"
                             ? gridcast::MaskMode::PredOnly
                             : throw gridcast::InvalidInputError("bad mask mode: " + a.mask_mode);
        mask = gridcast::road_mask(gridcast::read_tensor(a.mask), mode);
    }

    gridcast::ScoreAccumulator acc;
    json per_file = json::object();
    for (std::size_t i = 0; i < truth_files.size(); ++i) {
        const auto pred = gridcast::read_tensor(pred_files[i]);
        const auto truth = gridcast::read_tensor(truth_files[i]);
        gridcast::ScoreAccumulator one;
        one.add(pred, truth, masked ? &mask : nullptr, a.workers);
        acc.add(pred, truth, masked ? &mask : nullptr, a.workers);
        per_file[truth_files[i].filename().string()] = one.report().mse_all;
    }
    const gridcast::ScoreReport rep = acc.report();
    json j = rep.to_json();
    j["per_file"] = per_file;
    if (masked) j["mask_mode"] = gridcast::mask_mode_name(mask.mode);
    write_json_file(a.report, j);
    std::cerr << "mse_all " << rep.mse_all << " over " << rep.n_tests << " test(s) -> "
              << a.report << "\n";
    return 0;
}

struct BaselineArgs {
    std::string method = "naive-average";
    std::string test;
    std::string out;
};

int run_baseline(const BaselineArgs& a) {
    const auto input = gridcast::read_tensor(a.test);
    const gridcast::ByteTensor pred = gridcast::run_baseline(a.method, input);
    gridcast::write_tensor(a.out, pred);
    std::cerr << a.method << " prediction " << pred.shape_string() << " -> " << a.out << "\n";
    return 0;
}

struct OutlierDetectArgs {
    std::string day;
    std::string criteria;
    std::string out;
    unsigned workers = 1;
};

int run_outliers_detect(const OutlierDetectArgs& a) {
    gridcast::OutlierCriteria crit;
    if (!a.criteria.empty()) crit = gridcast::OutlierCriteria::load(a.criteria);
    const auto day = gridcast::read_tensor(a.day);
    const auto events = gridcast::detect_outliers(day, crit, a.workers);
    auto out = open_text_out(a.out);
    gridcast::write_events_csv(out, events);
    std::cerr << events.size() << " event(s) -> " << a.out << "\n";
    return 0;
}

struct OutlierScoreArgs {
    std::string pred;
    std::string truth;
    std::string events;
    std::string report;
};

int run_outliers_score(const OutlierScoreArgs& a) {
    std::ifstream ev(a.events);
    if (!ev) throw gridcast::InvalidInputError("cannot open events: " + a.events);
    const auto events = gridcast::read_events_csv(ev);

    const auto pred_files = tensor_files(a.pred);
    const auto truth_files = tensor_files(a.truth);
    if (pred_files.size() != truth_files.size()) {
        throw gridcast::InvalidInputError("prediction/truth file count mismatch");
    }
    std::uint64_t err_values = 0;
    double err_sum = 0;
    std::size_t consumed = 0;
    for (std::size_t i = 0; i < truth_files.size(); ++i) {
        const auto pred = gridcast::read_tensor(pred_files[i]);
        const auto truth = gridcast::read_tensor(truth_files[i]);
        const std::size_t n = pred.rank() == 5 ? pred.dim(0) : 1;
        if (consumed + n > events.size()) {
            throw gridcast::InvalidInputError("fewer events than tests");
        }
        const std::vector<gridcast::OutlierEvent> slice(events.begin() + consumed,
                                                        events.begin() + consumed + n);
        const auto rep = gridcast::outlier_mask_score(pred, truth, slice);
        err_sum += rep.mse * static_cast<double>(rep.values);
        err_values += rep.values;
        consumed += n;
    }
    if (consumed != events.size()) {
        throw gridcast::InvalidInputError("more events than tests");
    }
    gridcast::OutlierScoreReport rep;
    rep.n_tests = consumed;
    rep.values = err_values;
    rep.mse = err_sum / static_cast<double>(err_values);
    write_json_file(a.report, rep.to_json());
    std::cerr << "outlier-masked mse " << rep.mse << " over " << rep.values << " values -> "
              << a.report << "\n";
    return 0;
}

struct OutlierMakeTestsArgs {
    std::string day;
    std::string date;
    std::string city = "synthetic";
    std::string events;
    std::string out_prefix;
};

int run_outliers_make_tests(const OutlierMakeTestsArgs& a) {
    std::ifstream ev(a.events);
    if (!ev) throw gridcast::InvalidInputError("cannot open events: " + a.events);
    const auto events = gridcast::read_events_csv(ev);
    const auto day = gridcast::read_tensor(a.day);
    const auto date = parse_date_arg(a.date);

    const auto result = gridcast::make_outlier_tests(day, date, a.city, events);
    if (result.slots.empty()) {
        throw gridcast::InvalidInputError("no events with room for a full input window");
    }
    const gridcast::TestSet set = gridcast::split_test_file(result.slots);
    const auto paths = gridcast::test_set_paths(a.out_prefix);
    gridcast::write_tensor(paths.input, set.input);
    gridcast::write_tensor(paths.truth, set.truth);
    gridcast::write_tensor(paths.meta, set.meta);

    auto out = open_text_out(a.out_prefix + "_events.csv");
    gridcast::write_events_csv(out, result.events);
    std::cerr << result.slots.size() << " test(s), " << result.skipped << " skipped -> "
              << paths.input << "\n";
    return 0;
}

struct MseStdArgs {
    std::string pred;
    std::string truth;
    std::string input;
    std::string channel = "speed";
    double bin_width = 1.0;
    std::string out;
};

int run_analyze_mse_std(const MseStdArgs& a) {
    const auto kind = a.channel == "speed" ? gridcast::ChannelKind::Speed
                     : a.channel == "volume"
                         ? gridcast::ChannelKind::Volume
                         : throw gridcast::InvalidInputError("bad channel: " + a.channel);
    const auto pred = gridcast::read_tensor(a.pred);
    const auto truth = gridcast::read_tensor(a.truth);
    gridcast::StdBinReport rep;
    if (!a.input.empty()) {
        rep = gridcast::mse_vs_std(pred, gridcast::read_tensor(a.input), truth, kind,
                                   a.bin_width);
    } else {
        rep = gridcast::mse_vs_std(pred, truth, kind, a.bin_width);
    }
    auto out = open_text_out(a.out);
    rep.write_csv(out);
    std::cerr << rep.bins() << " std bins -> " << a.out << "\n";
    return 0;
}

struct PixelStatsArgs {
    std::string truth;
    std::string out;
};

int run_analyze_pixel_stats(const PixelStatsArgs& a) {
    const auto truth = gridcast::read_tensor(a.truth);
    const auto rows = gridcast::pixel_stats(truth);
    auto out = open_text_out(a.out);
    gridcast::write_pixel_stats_csv(out, rows);
    std::cerr << rows.size() << " directional pixels -> " << a.out << "\n";
    return 0;
}

struct DailyVolumeArgs {
    std::vector<std::string> days;
    std::vector<std::string> labels;
    std::string out;
};

int run_analyze_daily_volume(const DailyVolumeArgs& a) {
    if (a.days.size() != a.labels.size()) {
        throw gridcast::InvalidInputError("need one --label per --days manifest");
    }
    std::vector<gridcast::DailyVolumeCurve> curves;
    for (std::size_t i = 0; i < a.days.size(); ++i) {
        const auto manifest = gridcast::DayManifest::load(a.days[i]);
        std::vector<fs::path> files;
        for (const auto& [date, path] : manifest.days) files.push_back(path);
        curves.push_back(gridcast::daily_volume_curve_files(files, a.labels[i]));
    }
    auto out = open_text_out(a.out);
    gridcast::write_daily_volume_csv(out, curves);
    std::cerr << curves.size() << " curve(s) -> " << a.out << "\n";
    return 0;
}

struct PixelArgs {
    std::string day;
    std::string days;
    std::size_t row = 0;
    std::size_t col = 0;
    std::string heading = "NE";
    std::string out;
};

int run_analyze_pixel(const PixelArgs& a) {
    const auto h = gridcast::parse_heading(a.heading);
    if (!h) throw gridcast::InvalidInputError("bad heading: " + a.heading);
    gridcast::PixelSeriesAccumulator acc(gridcast::DirectionalPixel{a.row, a.col, *h});
    if (!a.day.empty()) {
        acc.add_day(gridcast::read_tensor(a.day));
    } else if (!a.days.empty()) {
        const auto manifest = gridcast::DayManifest::load(a.days);
        for (const auto& [date, path] : manifest.days) acc.add_day(gridcast::read_tensor(path));
    } else {
        throw gridcast::InvalidInputError("need --day or --days");
    }
    auto out = open_text_out(a.out);
    acc.series().write_csv(out);
    std::cerr << "pixel series over " << acc.series().days << " day(s) -> " << a.out << "\n";
    return 0;
}

struct SynthProbesArgs {
    std::string city_config;
    std::string date;
    std::size_t n = 100000;
    std::uint64_t seed = 0;
    double oob_fraction = 0.0;
    std::string out;
};

int run_synth_probes(const SynthProbesArgs& a) {
    const auto cfg = gridcast::CityConfig::load(a.city_config);
    auto out = open_text_out(a.out);
    synth_probes(cfg, parse_date_arg(a.date), a.n, a.seed, a.oob_fraction, out);
    std::cerr << a.n << " probes -> " << a.out << "\n";
    return 0;
}

struct SynthRasterArgs {
    std::size_t rows = 300;
    std::size_t cols = 300;
    std::size_t strokes = 40;
    std::uint64_t seed = 0;
    std::string out;
};

int run_synth_raster(const SynthRasterArgs& a) {
    gridcast::HighResRaster raster;
    synth_raster(a.rows, a.cols, a.strokes, a.seed, raster);
    gridcast::write_pgm(a.out, raster);
    std::cerr << a.rows << "x" << a.cols << " raster -> " << a.out << "\n";
    return 0;
}

struct BenchArgs {
    std::size_t n = 1000000;
    std::vector<unsigned> workers = {1, 4};
    std::uint64_t seed = 7;
};

int run_bench_ingest(const BenchArgs& a) {
    gridcast::CityConfig cfg;
    cfg.name = "bench";
    cfg.lat_min = 52.0;
    cfg.lon_min = 13.0;
    cfg.rows = 100;
    cfg.cols = 100;
    const auto date = gridcast::LocalDate{2020, 3, 2};

    const fs::path csv = fs::temp_directory_path() / "gridcast_bench_probes.csv";
    {
        auto out = open_text_out(csv);
        synth_probes(cfg, date, a.n, a.seed, 0.01, out);
    }

    std::cout << "probes: " << a.n << "\n";
    double base_rate = 0;
    for (unsigned w : a.workers) {
        gridcast::DayAccumulator acc(cfg);
        const auto t0 = std::chrono::steady_clock::now();
        gridcast::ingest_file(csv, acc, cfg, date, w);
        const auto t1 = std::chrono::steady_clock::now();
        const double secs = std::chrono::duration<double>(t1 - t0).count();
        const double rate = static_cast<double>(a.n) / secs;
        if (w == 1 || base_rate == 0) base_rate = rate;
        std::cout << "workers=" << w << " " << secs << " s, " << rate / 1e6
                  << " Mprobes/s, speedup " << rate / base_rate << "x\n";
    }
    fs::remove(csv);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"traffic movie pipeline: probe aggregation, static graphs, scoring"};
    app.require_subcommand(1);

    IngestArgs ingest_args;
    auto* ingest = app.add_subcommand("ingest", "aggregate probe CSVs into a day tensor");
    ingest->add_option("--probes", ingest_args.probes, "probe CSV path or glob")->required();
    ingest->add_option("--city-config", ingest_args.city_config, "city config JSON")->required();
    ingest->add_option("--date", ingest_args.date, "target day (YYYY-MM-DD)")->required();
    ingest->add_option("--out", ingest_args.out, "output tensor file")->required();
    ingest->add_option("--workers", ingest_args.workers, "worker threads");
    ingest->add_option("--stats", ingest_args.stats, "write ingest stats JSON here");

    StaticArgs static_args;
    auto* static_cmd = app.add_subcommand("static", "derive the static tensor from a raster");
    static_cmd->add_option("--raster", static_args.raster, "high resolution PGM")->required();
    static_cmd->add_option("--city-config", static_args.city_config, "city config JSON")
        ->required();
    static_cmd->add_option("--out", static_args.out, "output tensor file")->required();

    SlotsArgs slots_args;
    auto* slots = app.add_subcommand("slots", "test slot sampling");
    auto* slots_sample = slots->add_subcommand("sample", "sample test slots from day files");
    slots_sample->add_option("--days", slots_args.days, "day manifest JSON")->required();
    slots_sample->add_option("--n", slots_args.n, "number of slots");
    slots_sample->add_option("--seed", slots_args.seed, "sampling seed");
    slots_sample->add_option("--out-prefix", slots_args.out_prefix, "output file prefix")
        ->required();

    ScoreArgs score_args;
    auto* score = app.add_subcommand("score", "MSE scoring of predictions against truth");
    score->add_option("--pred", score_args.pred, "prediction file or directory")->required();
    score->add_option("--truth", score_args.truth, "truth file or directory")->required();
    score->add_option("--mask", score_args.mask, "static tensor file for road masking");
    score->add_option("--mask-mode", score_args.mask_mode, "both|pred-only");
    score->add_option("--report", score_args.report, "output report JSON")->required();
    score->add_option("--workers", score_args.workers, "worker threads");

    BaselineArgs baseline_args;
    auto* baseline = app.add_subcommand("baseline", "reference predictors");
    baseline->add_option("--method", baseline_args.method, "naive-average|zeros|persistence");
    baseline->add_option("--test", baseline_args.test, "input tensor file")->required();
    baseline->add_option("--out", baseline_args.out, "output prediction file")->required();

    auto* outliers = app.add_subcommand("outliers", "jam events");
    OutlierDetectArgs od_args;
    auto* od = outliers->add_subcommand("detect", "detect jam events in a day tensor");
    od->add_option("--day", od_args.day, "day tensor file")->required();
    od->add_option("--criteria", od_args.criteria, "criteria JSON (defaults when omitted)");
    od->add_option("--out", od_args.out, "output events CSV")->required();
    od->add_option("--workers", od_args.workers, "worker threads");

    OutlierScoreArgs os_args;
    auto* os = outliers->add_subcommand("score", "score on event pixels only");
    os->add_option("--pred", os_args.pred, "prediction file or directory")->required();
    os->add_option("--truth", os_args.truth, "truth file or directory")->required();
    os->add_option("--events", os_args.events, "events CSV (one per test)")->required();
    os->add_option("--report", os_args.report, "output report JSON")->required();

    OutlierMakeTestsArgs om_args;
    auto* om = outliers->add_subcommand("make-tests", "build test slots around events");
    om->add_option("--day", om_args.day, "day tensor file")->required();
    om->add_option("--date", om_args.date, "the day's date (YYYY-MM-DD)")->required();
    om->add_option("--city", om_args.city, "city name for the slots");
    om->add_option("--events", om_args.events, "events CSV")->required();
    om->add_option("--out-prefix", om_args.out_prefix, "output file prefix")->required();

    auto* analyze = app.add_subcommand("analyze", "diagnostic tables");
    MseStdArgs ms_args;
    auto* ms = analyze->add_subcommand("mse-std", "MSE binned by ground-truth std");
    ms->add_option("--pred", ms_args.pred, "prediction stack file")->required();
    ms->add_option("--truth", ms_args.truth, "truth stack (6-frame, or 18-frame combined)")
        ->required();
    ms->add_option("--input", ms_args.input, "input stack file (12-frame)");
    ms->add_option("--channel", ms_args.channel, "volume|speed");
    ms->add_option("--bin-width", ms_args.bin_width, "std bin width");
    ms->add_option("--out", ms_args.out, "output CSV")->required();

    PixelStatsArgs ps_args;
    auto* ps = analyze->add_subcommand("pixel-stats", "per directional pixel mean/std");
    ps->add_option("--truth", ps_args.truth, "stack file")->required();
    ps->add_option("--out", ps_args.out, "output CSV")->required();

    DailyVolumeArgs dv_args;
    auto* dv = analyze->add_subcommand("daily-volume", "grid-wide volume per bin");
    dv->add_option("--days", dv_args.days, "day manifest JSON (repeatable)")->required();
    dv->add_option("--label", dv_args.labels, "curve label (one per --days)")->required();
    dv->add_option("--out", dv_args.out, "output CSV")->required();

    PixelArgs px_args;
    auto* px = analyze->add_subcommand("pixel", "one directional pixel's day series");
    px->add_option("--day", px_args.day, "day tensor file");
    px->add_option("--days", px_args.days, "day manifest JSON");
    px->add_option("--row", px_args.row, "pixel row")->required();
    px->add_option("--col", px_args.col, "pixel col")->required();
    px->add_option("--heading", px_args.heading, "NE|SE|SW|NW");
    px->add_option("--out", px_args.out, "output CSV")->required();

    auto* synth = app.add_subcommand("synth", "synthetic data generators");
    SynthProbesArgs sp_args;
    auto* sp = synth->add_subcommand("probes", "random probe CSV");
    sp->add_option("--city-config", sp_args.city_config, "city config JSON")->required();
    sp->add_option("--date", sp_args.date, "day (YYYY-MM-DD)")->required();
    sp->add_option("--n", sp_args.n, "record count");
    sp->add_option("--seed", sp_args.seed, "RNG seed");
    sp->add_option("--oob-fraction", sp_args.oob_fraction, "fraction pushed out of bounds");
    sp->add_option("--out", sp_args.out, "output CSV")->required();

    SynthRasterArgs sr_args;
    auto* sr = synth->add_subcommand("raster", "random road raster PGM");
    sr->add_option("--rows", sr_args.rows, "raster rows");
    sr->add_option("--cols", sr_args.cols, "raster cols");
    sr->add_option("--strokes", sr_args.strokes, "number of road strokes");
    sr->add_option("--seed", sr_args.seed, "RNG seed");
    sr->add_option("--out", sr_args.out, "output PGM")->required();

    BenchArgs bench_args;
    auto* bench = app.add_subcommand("bench", "benchmarks");
    auto* bi = bench->add_subcommand("ingest", "ingest throughput on synthetic probes");
    bi->add_option("--n", bench_args.n, "probe count");
    bi->add_option("--workers", bench_args.workers, "worker counts to time")->delimiter(',');
    bi->add_option("--seed", bench_args.seed, "RNG seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ingest) return run_ingest(ingest_args);
        if (*static_cmd) return run_static(static_args);
        if (*slots_sample) return run_slots_sample(slots_args);
        if (*score) return run_score(score_args);
        if (*baseline) return run_baseline(baseline_args);
        if (*od) return run_outliers_detect(od_args);
        if (*os) return run_outliers_score(os_args);
        if (*om) return run_outliers_make_tests(om_args);
        if (*ms) return run_analyze_mse_std(ms_args);
        if (*ps) return run_analyze_pixel_stats(ps_args);
        if (*dv) return run_analyze_daily_volume(dv_args);
        if (*px) return run_analyze_pixel(px_args);
        if (*sp) return run_synth_probes(sp_args);
        if (*sr) return run_synth_raster(sr_args);
        if (*bi) return run_bench_ingest(bench_args);
        std::cerr << "missing subcommand\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
