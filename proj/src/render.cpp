#include <cmath>

#include <nlohmann/json.hpp>

#include "taap/errors.hpp"
#include "taap/imaging.hpp"

namespace taap::imaging {

using namespace constants;

ImageGrid ImageGrid::centered(double half_extent, double pixel_size) {
    if (!(pixel_size > 0.0) || !(half_extent > 0.0)) throw DomainError("image grid needs positive extent and pixel size");
    ImageGrid g;
    const auto n = static_cast<std::size_t>(std::ceil(2.0 * half_extent / pixel_size - 1e-9));
    g.n_rows = g.n_cols = n;
    g.pixel_size = pixel_size;
    g.origin_x = g.origin_y = -0.5 * static_cast<double>(n) * pixel_size;
    return g;
}

double DensityImage::total() const {
    double s = 0.0;
    for (double v : data) s += v;
    return s * grid.pixel_size * grid.pixel_size;
}

DensityImage render_image(const std::vector<Position>& atoms, const ImageGrid& grid, double sigma_psf) {
    DensityImage img{grid, std::vector<double>(grid.size(), 0.0)};
    const double inv_area = 1.0 / (grid.pixel_size * grid.pixel_size);
    for (const auto& a : atoms) {
        const double fc = std::floor((a.x - grid.origin_x) / grid.pixel_size);
        const double fr = std::floor((a.y - grid.origin_y) / grid.pixel_size);
        if (fc < 0 || fr < 0 || fc >= static_cast<double>(grid.n_cols) || fr >= static_cast<double>(grid.n_rows)) continue;
        img.at(static_cast<std::size_t>(fr), static_cast<std::size_t>(fc)) += inv_area;
    }
    if (sigma_psf > 0.0) gaussian_blur(img, sigma_psf);
    return img;
}

DensityImage render_image(const std::function<double(double, double)>& n2d, const ImageGrid& grid, int ss,
                          double sigma_psf) {
    if (ss < 1) ss = 1;
    DensityImage img{grid, std::vector<double>(grid.size(), 0.0)};
    const double sub = grid.pixel_size / ss;
    for (std::size_t r = 0; r < grid.n_rows; ++r)
        for (std::size_t c = 0; c < grid.n_cols; ++c) {
            double acc = 0.0;
            const double x0 = grid.origin_x + static_cast<double>(c) * grid.pixel_size;
            const double y0 = grid.origin_y + static_cast<double>(r) * grid.pixel_size;
            for (int i = 0; i < ss; ++i)
                for (int j = 0; j < ss; ++j) acc += n2d(x0 + (j + 0.5) * sub, y0 + (i + 0.5) * sub);
            img.at(r, c) = acc / (ss * ss);
        }
    if (sigma_psf > 0.0) gaussian_blur(img, sigma_psf);
    return img;
}

void gaussian_blur(DensityImage& img, double sigma) {
    if (!(sigma > 0.0)) return;
    const auto& g = img.grid;
    const int rad = static_cast<int>(std::ceil(4.0 * sigma / g.pixel_size));
    std::vector<double> w(2 * static_cast<std::size_t>(rad) + 1);
    double norm = 0.0;
    for (int k = -rad; k <= rad; ++k) {
        const double d = k * g.pixel_size;
        w[static_cast<std::size_t>(k + rad)] = std::exp(-0.5 * d * d / (sigma * sigma));
        norm += w[static_cast<std::size_t>(k + rad)];
    }
    for (double& v : w) v /= norm;
    const auto R = static_cast<long>(g.n_rows), C = static_cast<long>(g.n_cols);
    std::vector<double> tmp(img.data.size(), 0.0);
    for (long r = 0; r < R; ++r)
        for (long c = 0; c < C; ++c) {
            double acc = 0.0;
            for (int k = -rad; k <= rad; ++k) {
                const long cc = c + k;
                if (cc >= 0 && cc < C) acc += w[static_cast<std::size_t>(k + rad)] * img.data[static_cast<std::size_t>(r * C + cc)];
            }
            tmp[static_cast<std::size_t>(r * C + c)] = acc;
        }
    for (long r = 0; r < R; ++r)
        for (long c = 0; c < C; ++c) {
            double acc = 0.0;
            for (int k = -rad; k <= rad; ++k) {
                const long rr = r + k;
                if (rr >= 0 && rr < R) acc += w[static_cast<std::size_t>(k + rad)] * tmp[static_cast<std::size_t>(rr * C + c)];
            }
            img.data[static_cast<std::size_t>(r * C + c)] = acc;
        }
}

void add_gaussian_noise(DensityImage& img, double sigma, std::uint64_t seed) {
    num::CounterRng rng(seed, num::stream_id(num::Module::imaging, 1));
    for (double& v : img.data) v += sigma * rng.normal();
}

std::vector<double> azimuthal_profile(const DensityImage& img, double cx, double cy, double rho_lo, double rho_hi,
                                      int n_bins) {
    std::vector<double> sum(static_cast<std::size_t>(n_bins), 0.0), cnt(static_cast<std::size_t>(n_bins), 0.0);
    const auto& g = img.grid;
    for (std::size_t r = 0; r < g.n_rows; ++r)
        for (std::size_t c = 0; c < g.n_cols; ++c) {
            const double dx = g.x(c) - cx, dy = g.y(r) - cy;
            const double rho = std::hypot(dx, dy);
            if (rho < rho_lo || rho > rho_hi) continue;
            double phi = std::atan2(dy, dx);
            if (phi < 0.0) phi += two_pi;
            auto b = static_cast<std::size_t>(phi / two_pi * n_bins);
            if (b >= sum.size()) b = sum.size() - 1;
            sum[b] += img.at(r, c);
            cnt[b] += 1.0;
        }
    for (std::size_t b = 0; b < sum.size(); ++b) sum[b] = cnt[b] > 0 ? sum[b] / cnt[b] : 0.0;
    return sum;
}

nlohmann::json image_metadata(const ImageGrid& g) {
    return {{"pixel_size_um", g.pixel_size / micron},
            {"origin_um", {g.origin_x / micron, g.origin_y / micron}},
            {"n_rows", g.n_rows},
            {"n_cols", g.n_cols}};
}

ImageGrid grid_from_metadata(const nlohmann::json& j) {
    try {
        ImageGrid g;
        g.pixel_size = j.at("pixel_size_um").get<double>() * micron;
        g.origin_x = j.at("origin_um").at(0).get<double>() * micron;
        g.origin_y = j.at("origin_um").at(1).get<double>() * micron;
        g.n_rows = j.at("n_rows").get<std::size_t>();
        g.n_cols = j.at("n_cols").get<std::size_t>();
        if (!(g.pixel_size > 0.0)) throw ConfigError("pixel size must be positive");
        return g;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("image metadata: ") + e.what());
    }
}

}  // namespace taap::imaging
