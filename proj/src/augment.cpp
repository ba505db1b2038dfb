#include "ferkit/augment.hpp"

#include <cmath>
#include <stdexcept>

namespace ferkit {

AffineParams AffineParams::defaults_for(std::size_t width) {
    AffineParams p;
    p.max_rotation_deg = 15.0;
    p.max_scale_delta = 0.10;
    p.max_translate_px = 0.10 * static_cast<double>(width);
    p.flip_horizontal = true;
    return p;
}

Tensor affine_transform(const Tensor& image, double angle_deg, double scale,
                        double tx, double ty, bool flip) {
    const bool chw = image.shape.size() == 3;
    if (chw && image.shape[0] != 1)
        throw std::invalid_argument("affine_transform expects a single-channel image");
    if (!chw && image.shape.size() != 2)
        throw std::invalid_argument("affine_transform expects (H,W) or (1,H,W)");
    const std::size_t H = image.shape[chw ? 1 : 0];
    const std::size_t W = image.shape[chw ? 2 : 1];
    if (H != W)
        throw std::invalid_argument("affine_transform expects a square image");
    if (scale <= 0.0)
        throw std::invalid_argument("scale must be positive");

    const double cy = (static_cast<double>(H) - 1.0) / 2.0;
    const double cx = (static_cast<double>(W) - 1.0) / 2.0;
    const double a = angle_deg * 3.14159265358979323846 / 180.0;
    const double ca = std::cos(a), sa = std::sin(a);

    Tensor out = Tensor::zeros(image.shape);
    const double* src = image.v.data();
    double* dst = out.v.data();

    for (std::size_t y = 0; y < H; ++y) {
        for (std::size_t x = 0; x < W; ++x) {
            // invert dst = R(a) * s * (src - c) + c + t
            const double ux = static_cast<double>(x) - cx - tx;
            const double uy = static_cast<double>(y) - cy - ty;
            double sx = (ca * ux + sa * uy) / scale + cx;
            const double sy = (-sa * ux + ca * uy) / scale + cy;
            if (flip) sx = static_cast<double>(W) - 1.0 - sx;

            const double fx0 = std::floor(sx), fy0 = std::floor(sy);
            const long x0 = static_cast<long>(fx0), y0 = static_cast<long>(fy0);
            const double wx = sx - fx0, wy = sy - fy0;

            double acc = 0.0;
            for (int dy = 0; dy < 2; ++dy) {
                const long yy = y0 + dy;
                if (yy < 0 || yy >= static_cast<long>(H)) continue;
                const double wrow = dy ? wy : (1.0 - wy);
                if (wrow == 0.0) continue;
                for (int dx = 0; dx < 2; ++dx) {
                    const long xx = x0 + dx;
                    if (xx < 0 || xx >= static_cast<long>(W)) continue;
                    const double wcol = dx ? wx : (1.0 - wx);
                    if (wcol == 0.0) continue;
                    acc += wrow * wcol * src[yy * static_cast<long>(W) + xx];
                }
            }
            dst[y * W + x] = acc;
        }
    }
    return out;
}

Tensor random_affine(const Tensor& image, const AffineParams& params, Rng& rng) {
    if (params.max_rotation_deg < 0.0 || params.max_scale_delta < 0.0 ||
        params.max_translate_px < 0.0)
        throw std::invalid_argument("affine bounds must be >= 0");
    if (params.is_identity()) return image;

    const double angle = rng.uniform(-params.max_rotation_deg, params.max_rotation_deg);
    const double scale = 1.0 + rng.uniform(-params.max_scale_delta, params.max_scale_delta);
    const double tx = rng.uniform(-params.max_translate_px, params.max_translate_px);
    const double ty = rng.uniform(-params.max_translate_px, params.max_translate_px);
    const bool flip = params.flip_horizontal && rng.uniform() < 0.5;
    return affine_transform(image, angle, scale, tx, ty, flip);
}

} // namespace ferkit
