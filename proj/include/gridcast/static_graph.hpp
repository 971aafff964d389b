#pragma once

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "gridcast/grid.hpp"
#include "gridcast/tensor.hpp"
#include "gridcast/util.hpp"

namespace gridcast {

/// High resolution grayscale road map, 255 = white = no road.
struct HighResRaster {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint8_t> pixels;

    HighResRaster() = default;
    HighResRaster(std::size_t r, std::size_t c, std::uint8_t fill = 255)
        : rows(r), cols(c), pixels(r * c, fill) {}

    std::uint8_t& at(std::size_t r, std::size_t c) { return pixels[r * cols + c]; }
    std::uint8_t at(std::size_t r, std::size_t c) const { return pixels[r * cols + c]; }
};

namespace detail {

inline std::string pgm_token(std::istream& in) {
    std::string tok;
    int ch = in.get();
    while (ch != EOF) {
        if (ch == '#') {
            while (ch != EOF && ch != '\n') ch = in.get();
        } else if (std::isspace(ch)) {
            if (!tok.empty()) return tok;
        } else {
            tok.push_back(static_cast<char>(ch));
        }
        ch = in.get();
    }
    return tok;
}

}  // namespace detail

inline HighResRaster read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInputError("cannot open raster: " + path.string());

    if (detail::pgm_token(in) != "P5") throw InvalidInputError("not a binary PGM: " + path.string());
    auto read_uint = [&](const char* what) {
        const std::string tok = detail::pgm_token(in);
        if (tok.empty() || tok.find_first_not_of("0123456789") != std::string::npos) {
            throw InvalidInputError(std::string("bad PGM ") + what + " in " + path.string());
        }
        return std::stoull(tok);
    };
    const std::uint64_t width = read_uint("width");
    const std::uint64_t height = read_uint("height");
    const std::uint64_t maxval = read_uint("maxval");
    if (width == 0 || height == 0) throw InvalidInputError("empty PGM: " + path.string());
    if (maxval == 0 || maxval > 255) {
        throw InvalidInputError("unsupported PGM maxval in " + path.string());
    }

    HighResRaster r(height, width);
    in.read(reinterpret_cast<char*>(r.pixels.data()),
            static_cast<std::streamsize>(r.pixels.size()));
    if (static_cast<std::size_t>(in.gcount()) != r.pixels.size()) {
        throw InvalidInputError("truncated PGM payload: " + path.string());
    }
    return r;
}

inline void write_pgm(const std::filesystem::path& path, const HighResRaster& r) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidInputError("cannot write raster: " + path.string());
    out << "P5\n" << r.cols << " " << r.rows << "\n255\n";
    out.write(reinterpret_cast<const char*>(r.pixels.data()),
              static_cast<std::streamsize>(r.pixels.size()));
    if (!out) throw InvalidInputError("failed writing raster: " + path.string());
}

/// Road pixels (any value below pure white) with Moore 8-adjacency.
struct PixelGraph {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint8_t> node;
    std::size_t node_count = 0;
    std::size_t edge_count = 0;

    bool is_node(std::ptrdiff_t r, std::ptrdiff_t c) const {
        if (r < 0 || c < 0 || r >= static_cast<std::ptrdiff_t>(rows) ||
            c >= static_cast<std::ptrdiff_t>(cols)) {
            return false;
        }
        return node[static_cast<std::size_t>(r) * cols + static_cast<std::size_t>(c)] != 0;
    }
};

inline PixelGraph build_pixel_graph(const HighResRaster& raster) {
    PixelGraph g;
    g.rows = raster.rows;
    g.cols = raster.cols;
    g.node.assign(raster.rows * raster.cols, 0);
    for (std::size_t i = 0; i < raster.pixels.size(); ++i) {
        if (raster.pixels[i] < 255) {
            g.node[i] = 1;
            g.node_count += 1;
        }
    }
    // Count each undirected edge once via the four forward directions.
    static constexpr int fwd[4][2] = {{0, 1}, {1, 0}, {1, 1}, {1, -1}};
    for (std::size_t r = 0; r < g.rows; ++r) {
        for (std::size_t c = 0; c < g.cols; ++c) {
            if (!g.node[r * g.cols + c]) continue;
            for (const auto& d : fwd) {
                if (g.is_node(static_cast<std::ptrdiff_t>(r) + d[0],
                              static_cast<std::ptrdiff_t>(c) + d[1])) {
                    g.edge_count += 1;
                }
            }
        }
    }
    return g;
}

/// Longest pixel path that still counts as a connection between diagonally
/// adjacent blocks.
inline constexpr int kDetourMaxEdges = 7;

namespace detail {

struct Block {
    std::ptrdiff_t r0 = 0;
    std::ptrdiff_t c0 = 0;
    std::ptrdiff_t size = 0;

    bool contains(std::ptrdiff_t r, std::ptrdiff_t c) const {
        return r >= r0 && r < r0 + size && c >= c0 && c < c0 + size;
    }
    bool on_ring(std::ptrdiff_t r, std::ptrdiff_t c) const {
        return r == r0 || r == r0 + size - 1 || c == c0 || c == c0 + size - 1;
    }
};

/// True when some node of block a reaches some node of block b along a pixel
/// path of at most kDetourMaxEdges edges. Any such path crosses a's boundary
/// ring, so a multi-source BFS from the ring nodes is exhaustive. The search
/// never needs to leave a window of kDetourMaxEdges pixels around a.
inline bool detour_connected(const PixelGraph& g, const Block& a, const Block& b) {
    const std::ptrdiff_t wr0 = a.r0 - kDetourMaxEdges;
    const std::ptrdiff_t wc0 = a.c0 - kDetourMaxEdges;
    const std::ptrdiff_t wsize = a.size + 2 * kDetourMaxEdges;
    std::vector<std::uint8_t> seen(static_cast<std::size_t>(wsize * wsize), 0);
    auto idx = [&](std::ptrdiff_t r, std::ptrdiff_t c) {
        return static_cast<std::size_t>((r - wr0) * wsize + (c - wc0));
    };

    std::vector<std::pair<std::ptrdiff_t, std::ptrdiff_t>> frontier;
    for (std::ptrdiff_t r = a.r0; r < a.r0 + a.size; ++r) {
        for (std::ptrdiff_t c = a.c0; c < a.c0 + a.size; ++c) {
            if (a.on_ring(r, c) && g.is_node(r, c)) {
                seen[idx(r, c)] = 1;
                frontier.emplace_back(r, c);
            }
        }
    }

    std::vector<std::pair<std::ptrdiff_t, std::ptrdiff_t>> next;
    for (int depth = 1; depth <= kDetourMaxEdges && !frontier.empty(); ++depth) {
        next.clear();
        for (const auto& [r, c] : frontier) {
            for (std::ptrdiff_t dr = -1; dr <= 1; ++dr) {
                for (std::ptrdiff_t dc = -1; dc <= 1; ++dc) {
                    if (dr == 0 && dc == 0) continue;
                    const std::ptrdiff_t nr = r + dr;
                    const std::ptrdiff_t nc = c + dc;
                    if (nr < wr0 || nc < wc0 || nr >= wr0 + wsize || nc >= wc0 + wsize) continue;
                    if (seen[idx(nr, nc)] || !g.is_node(nr, nc)) continue;
                    if (b.contains(nr, nc)) return true;
                    seen[idx(nr, nc)] = 1;
                    next.emplace_back(nr, nc);
                }
            }
        }
        frontier.swap(next);
    }
    return false;
}

}  // namespace detail

/// Static channel layout: 0 = grayscale road density, 1..8 = connectivity to
/// the N, NE, E, SE, S, SW, W, NW neighbor (255 or 0).
enum StaticChannel : int {
    kGray = 0,
    kNorth = 1,
    kNorthEast = 2,
    kEast = 3,
    kSouthEast = 4,
    kSouth = 5,
    kSouthWest = 6,
    kWest = 7,
    kNorthWest = 8
};

/// Derive the (rows, cols, 9) static tensor from a high resolution raster
/// whose dimensions are an integer multiple of the grid.
inline ByteTensor build_static(const HighResRaster& raster, const CityConfig& cfg) {
    cfg.validate();
    if (raster.rows == 0 || raster.cols == 0) throw InvalidInputError("empty raster");
    if (raster.rows % cfg.rows != 0 || raster.cols % cfg.cols != 0 ||
        raster.rows / cfg.rows != raster.cols / cfg.cols) {
        throw InvalidInputError("raster dimensions must be one square block per grid cell");
    }
    const std::size_t block = raster.rows / cfg.rows;
    const std::ptrdiff_t bs = static_cast<std::ptrdiff_t>(block);

    ByteTensor out({cfg.rows, cfg.cols, 9}, 0);

    // Channel 0: mean darkness of the block, rounded to the nearest byte.
    for (std::size_t gr = 0; gr < cfg.rows; ++gr) {
        for (std::size_t gc = 0; gc < cfg.cols; ++gc) {
            std::uint64_t darkness = 0;
            for (std::size_t r = gr * block; r < (gr + 1) * block; ++r) {
                for (std::size_t c = gc * block; c < (gc + 1) * block; ++c) {
                    darkness += 255 - raster.at(r, c);
                }
            }
            out(gr, gc, kGray) =
                static_cast<std::uint8_t>(round_half_up_ratio(darkness, block * block));
        }
    }

    const PixelGraph g = build_pixel_graph(raster);

    std::vector<std::uint8_t> has_node(cfg.rows * cfg.cols, 0);
    for (std::size_t r = 0; r < g.rows; ++r) {
        for (std::size_t c = 0; c < g.cols; ++c) {
            if (g.node[r * g.cols + c]) has_node[(r / block) * cfg.cols + (c / block)] = 1;
        }
    }

    auto block_of = [&](std::size_t gr, std::size_t gc) {
        return detail::Block{static_cast<std::ptrdiff_t>(gr * block),
                             static_cast<std::ptrdiff_t>(gc * block), bs};
    };
    auto connect = [&](std::size_t ar, std::size_t ac, int a_ch, std::size_t br, std::size_t bc,
                       int b_ch) {
        out(ar, ac, static_cast<std::size_t>(a_ch)) = 255;
        out(br, bc, static_cast<std::size_t>(b_ch)) = 255;
    };

    for (std::size_t gr = 0; gr < cfg.rows; ++gr) {
        for (std::size_t gc = 0; gc < cfg.cols; ++gc) {
            if (!has_node[gr * cfg.cols + gc]) continue;
            const detail::Block a = block_of(gr, gc);

            // East: a pixel edge crossing the shared column boundary.
            if (gc + 1 < cfg.cols && has_node[gr * cfg.cols + gc + 1]) {
                const std::ptrdiff_t lc = a.c0 + bs - 1;
                bool linked = false;
                for (std::ptrdiff_t r = a.r0; r < a.r0 + bs && !linked; ++r) {
                    if (!g.is_node(r, lc)) continue;
                    for (std::ptrdiff_t nr = std::max(a.r0, r - 1);
                         nr <= std::min(a.r0 + bs - 1, r + 1); ++nr) {
                        if (g.is_node(nr, lc + 1)) {
                            linked = true;
                            break;
                        }
                    }
                }
                if (linked) connect(gr, gc, kEast, gr, gc + 1, kWest);
            }

            // South: same scan along the shared row boundary.
            if (gr + 1 < cfg.rows && has_node[(gr + 1) * cfg.cols + gc]) {
                const std::ptrdiff_t lr = a.r0 + bs - 1;
                bool linked = false;
                for (std::ptrdiff_t c = a.c0; c < a.c0 + bs && !linked; ++c) {
                    if (!g.is_node(lr, c)) continue;
                    for (std::ptrdiff_t nc = std::max(a.c0, c - 1);
                         nc <= std::min(a.c0 + bs - 1, c + 1); ++nc) {
                        if (g.is_node(lr + 1, nc)) {
                            linked = true;
                            break;
                        }
                    }
                }
                if (linked) connect(gr, gc, kSouth, gr + 1, gc, kNorth);
            }

            // Diagonals: the corner pixel pair, or a short detour around it.
            if (gr + 1 < cfg.rows && gc + 1 < cfg.cols &&
                has_node[(gr + 1) * cfg.cols + gc + 1]) {
                const detail::Block b = block_of(gr + 1, gc + 1);
                const bool corner = g.is_node(a.r0 + bs - 1, a.c0 + bs - 1) && g.is_node(b.r0, b.c0);
                if (corner || detail::detour_connected(g, a, b)) {
                    connect(gr, gc, kSouthEast, gr + 1, gc + 1, kNorthWest);
                }
            }
            if (gr + 1 < cfg.rows && gc > 0 && has_node[(gr + 1) * cfg.cols + gc - 1]) {
                const detail::Block b = block_of(gr + 1, gc - 1);
                const bool corner =
                    g.is_node(a.r0 + bs - 1, a.c0) && g.is_node(b.r0, b.c0 + bs - 1);
                if (corner || detail::detour_connected(g, a, b)) {
                    connect(gr, gc, kSouthWest, gr + 1, gc - 1, kNorthEast);
                }
            }
        }
    }
    return out;
}

}  // namespace gridcast
