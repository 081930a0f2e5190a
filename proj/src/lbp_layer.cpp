#include "lbpnet/lbp_layer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lbpnet/errors.hpp"

namespace lbpnet {

namespace {

void check_layer(int in_channels, std::span<const Pattern> patterns, const ProjectionTable& proj) {
    const int n = proj.n_bits;
    for (const auto& p : patterns) {
        if (p.size() != n) {
            throw ShapeError("pattern has " + std::to_string(p.size()) +
                             " points but projection table expects " + std::to_string(n));
        }
    }
    check_projection(proj, in_channels, static_cast<int>(patterns.size()), n);
}

// Zero-padded copy of every input plane, wide enough that all bilinear taps of
// all patterns land inside the buffer.
struct PaddedPlanes {
    int pad = 0;
    int height = 0;
    int width = 0;
    std::vector<double> data;

    const double* plane(int c) const noexcept {
        return data.data() + static_cast<std::size_t>(c) * height * width;
    }
    double* plane(int c) noexcept { return data.data() + static_cast<std::size_t>(c) * height * width; }
};

int required_pad(std::span<const Pattern> patterns) {
    int pad = 1;
    for (const auto& p : patterns) {
        for (const auto& pt : p.points) {
            const auto cell = bilinear_cell(pt.dx, pt.dy);
            pad = std::max({pad, std::abs(cell.x0), std::abs(cell.x0 + 1), std::abs(cell.y0),
                            std::abs(cell.y0 + 1)});
        }
    }
    return pad;
}

PaddedPlanes make_padded(const FeatureMap* input, int channels, int h, int w, int pad) {
    PaddedPlanes p;
    p.pad = pad;
    p.height = h + 2 * pad;
    p.width = w + 2 * pad;
    p.data.assign(static_cast<std::size_t>(channels) * p.height * p.width, 0.0);
    if (input) {
        for (int c = 0; c < channels; ++c) {
            const auto src = input->plane(c);
            double* dst = p.plane(c);
            for (int y = 0; y < h; ++y) {
                std::copy_n(src.data() + static_cast<std::size_t>(y) * w, w,
                            dst + static_cast<std::size_t>(y + pad) * p.width + pad);
            }
        }
    }
    return p;
}

}  // namespace

void validate_surrogate(const SurrogateConfig& cfg, int in_channels) {
    if (!(cfg.k > 0.0) || !std::isfinite(cfg.k)) {
        throw ConfigError("surrogate temperature k must be positive, got " + std::to_string(cfg.k));
    }
    if (!cfg.channel_scale.empty()) {
        if (static_cast<int>(cfg.channel_scale.size()) < in_channels) {
            throw ConfigError("surrogate channel scale vector shorter than input channel count");
        }
        for (double s : cfg.channel_scale) {
            if (!(s > 0.0) || !std::isfinite(s)) throw ConfigError("surrogate channel scale must be positive");
        }
    }
}

template <typename T>
BasicFeatureMap<T> lbp_forward_hard(const BasicFeatureMap<T>& input, std::span<const Pattern> patterns,
                                    const ProjectionTable& proj, OpCounter* counter) {
    check_layer(input.channels(), patterns, proj);
    const int n = proj.n_bits;
    if (n > static_cast<int>(sizeof(T) * 8) && std::is_integral_v<T>) {
        throw ShapeError("lbp_forward_hard: " + std::to_string(n) + "-bit codes do not fit the map type");
    }
    const int h = input.height();
    const int w = input.width();
    const int out_channels = static_cast<int>(patterns.size());
    BasicFeatureMap<std::uint32_t> codes(out_channels, h, w);

    for (int o = 0; o < out_channels; ++o) {
        auto out = codes.plane(o);
        for (int i = 0; i < n; ++i) {
            const int c = static_cast<int>(proj.source(o, i));
            const int tx = round_offset(patterns[o].points[i].dx);
            const int ty = round_offset(patterns[o].points[i].dy);
            const auto src = input.plane(c);
            const std::uint32_t bit = 1u << i;
            for (int y = 0; y < h; ++y) {
                const int sy = y + ty;
                const bool row_in = sy >= 0 && sy < h;
                for (int x = 0; x < w; ++x) {
                    const int sx = x + tx;
                    const T pivot = src[static_cast<std::size_t>(y) * w + x];
                    const T sampled = (row_in && sx >= 0 && sx < w)
                                          ? src[static_cast<std::size_t>(sy) * w + sx]
                                          : T{};
                    if (sampled > pivot) out[static_cast<std::size_t>(y) * w + x] |= bit;
                }
            }
        }
    }
    if (counter) {
        const auto pixels = static_cast<std::uint64_t>(h) * w * out_channels * n;
        counter->comparisons += pixels;
        counter->bit_ops += pixels;
    }

    BasicFeatureMap<T> result(out_channels, h, w);
    std::transform(codes.data().begin(), codes.data().end(), result.data().begin(),
                   [](std::uint32_t v) { return static_cast<T>(v); });
    return result;
}

template BasicFeatureMap<double> lbp_forward_hard(const BasicFeatureMap<double>&, std::span<const Pattern>,
                                                  const ProjectionTable&, OpCounter*);
template BasicFeatureMap<std::uint16_t> lbp_forward_hard(const BasicFeatureMap<std::uint16_t>&,
                                                         std::span<const Pattern>, const ProjectionTable&,
                                                         OpCounter*);

FeatureMap lbp_forward_surrogate(const FeatureMap& input, std::span<const Pattern> patterns,
                                 const ProjectionTable& proj, const SurrogateConfig& cfg,
                                 SurrogateCache* cache) {
    check_layer(input.channels(), patterns, proj);
    validate_surrogate(cfg, input.channels());
    const int n = proj.n_bits;
    const int h = input.height();
    const int w = input.width();
    const int out_channels = static_cast<int>(patterns.size());
    const std::size_t hw = input.plane_size();
    const auto padded = make_padded(&input, input.channels(), h, w, required_pad(patterns));

    FeatureMap out(out_channels, h, w);
    if (cache) cache->tanh_values.resize(static_cast<std::size_t>(out_channels) * n * hw);

    for (int o = 0; o < out_channels; ++o) {
        auto dst = out.plane(o);
        for (int i = 0; i < n; ++i) {
            const int c = static_cast<int>(proj.source(o, i));
            const double inv_k = 1.0 / cfg.k_for(c);
            const double weight = 0.5 * static_cast<double>(1u << i);
            const auto cell = bilinear_cell(patterns[o].points[i].dx, patterns[o].points[i].dy);
            const auto pivot = input.plane(c);
            const double* base = padded.plane(c);
            double* saved = cache ? cache->tanh_values.data() + (static_cast<std::size_t>(o) * n + i) * hw
                                  : nullptr;
            const double bit = static_cast<double>(1u << i);
            // Rounded tap relative to the cell origin; round() picks x0 or x0 + 1.
            const int tx = round_offset(patterns[o].points[i].dx) - cell.x0;
            const int ty = round_offset(patterns[o].points[i].dy) - cell.y0;
            for (int y = 0; y < h; ++y) {
                const double* r0 = base + static_cast<std::size_t>(y + padded.pad + cell.y0) * padded.width +
                                   padded.pad + cell.x0;
                const double* r1 = r0 + padded.width;
                for (int x = 0; x < w; ++x) {
                    const double top = r0[x] + cell.fx * (r0[x + 1] - r0[x]);
                    const double bottom = r1[x] + cell.fx * (r1[x + 1] - r1[x]);
                    const double sampled = top + cell.fy * (bottom - top);
                    const std::size_t p = static_cast<std::size_t>(y) * w + x;
                    const double t = std::tanh((sampled - pivot[p]) * inv_k);
                    switch (cfg.forward) {
                        case ForwardValue::soft: dst[p] += weight * (t + 1.0); break;
                        case ForwardValue::hard_bits: if (sampled > pivot[p]) dst[p] += bit; break;
                        case ForwardValue::hard: if ((ty ? r1 : r0)[x + tx] > pivot[p]) dst[p] += bit; break;
                    }
                    if (saved) saved[p] = t;
                }
            }
        }
    }
    return out;
}

LbpGradients lbp_backward(const FeatureMap& input, std::span<const Pattern> patterns,
                          const ProjectionTable& proj, const SurrogateConfig& cfg,
                          const FeatureMap& grad_out, const SurrogateCache* cache, bool want_input_grad) {
    check_layer(input.channels(), patterns, proj);
    validate_surrogate(cfg, input.channels());
    const int n = proj.n_bits;
    const int h = input.height();
    const int w = input.width();
    const int out_channels = static_cast<int>(patterns.size());
    const std::size_t hw = input.plane_size();
    if (grad_out.channels() != out_channels || grad_out.height() != h || grad_out.width() != w) {
        throw ShapeError("lbp_backward: grad_out shape does not match the layer output");
    }
    if (cache && cache->tanh_values.size() != static_cast<std::size_t>(out_channels) * n * hw) {
        throw ShapeError("lbp_backward: surrogate cache does not match the layer");
    }

    const int pad = required_pad(patterns);
    const auto padded = make_padded(&input, input.channels(), h, w, pad);
    PaddedPlanes grad_padded;
    if (want_input_grad) grad_padded = make_padded(nullptr, input.channels(), h, w, pad);

    LbpGradients result;
    result.positions.assign(static_cast<std::size_t>(out_channels), std::vector<Grad2D>(n));
    if (want_input_grad) result.input = FeatureMap(input.channels(), h, w);

    for (int o = 0; o < out_channels; ++o) {
        const auto g = grad_out.plane(o);
        for (int i = 0; i < n; ++i) {
            const int c = static_cast<int>(proj.source(o, i));
            const double inv_k = 1.0 / cfg.k_for(c);
            const double weight = static_cast<double>(1u << i);
            const auto cell = bilinear_cell(patterns[o].points[i].dx, patterns[o].points[i].dy);
            const double fx = cell.fx;
            const double fy = cell.fy;
            const auto pivot = input.plane(c);
            const double* base = padded.plane(c);
            const double* saved =
                cache ? cache->tanh_values.data() + (static_cast<std::size_t>(o) * n + i) * hw : nullptr;
            double* gbase = want_input_grad ? grad_padded.plane(c) : nullptr;
            auto gpivot = want_input_grad ? result.input.plane(c) : std::span<double>{};
            double gdx = 0.0;
            double gdy = 0.0;
            for (int y = 0; y < h; ++y) {
                const std::size_t row_off =
                    static_cast<std::size_t>(y + pad + cell.y0) * padded.width + pad + cell.x0;
                const double* r0 = base + row_off;
                const double* r1 = r0 + padded.width;
                for (int x = 0; x < w; ++x) {
                    const std::size_t p = static_cast<std::size_t>(y) * w + x;
                    if (g[p] == 0.0) continue;
                    const double v00 = r0[x], v01 = r0[x + 1], v10 = r1[x], v11 = r1[x + 1];
                    double t;
                    if (saved) {
                        t = saved[p];
                    } else {
                        const double top = v00 + fx * (v01 - v00);
                        const double bottom = v10 + fx * (v11 - v10);
                        t = std::tanh((top + fy * (bottom - top) - pivot[p]) * inv_k);
                    }
                    // d(output)/d(I_p) for this bit, scaled by the incoming gradient.
                    const double a = g[p] * weight * 0.5 * (1.0 - t * t) * inv_k;
                    gdx += a * ((1.0 - fy) * (v01 - v00) + fy * (v11 - v10));
                    gdy += a * ((1.0 - fx) * (v10 - v00) + fx * (v11 - v01));
                    if (gbase) {
                        double* q0 = gbase + row_off + x;
                        double* q1 = q0 + grad_padded.width;
                        q0[0] += a * (1.0 - fx) * (1.0 - fy);
                        q0[1] += a * fx * (1.0 - fy);
                        q1[0] += a * (1.0 - fx) * fy;
                        q1[1] += a * fx * fy;
                        gpivot[p] -= a;
                    }
                }
            }
            result.positions[o][i] = {gdx, gdy};
        }
    }

    if (want_input_grad) {
        for (int c = 0; c < input.channels(); ++c) {
            const double* src = grad_padded.plane(c);
            auto dst = result.input.plane(c);
            for (int y = 0; y < h; ++y) {
                const double* row = src + static_cast<std::size_t>(y + pad) * grad_padded.width + pad;
                for (int x = 0; x < w; ++x) dst[static_cast<std::size_t>(y) * w + x] += row[x];
            }
        }
    }
    return result;
}

}  // namespace lbpnet
