#pragma once

#include "ferkit/rng.hpp"
#include "ferkit/tensor.hpp"

namespace ferkit {

// Bounds for on-the-fly affine augmentation; each transform is sampled
// uniformly within +/- the bound. Applies to the training split only.
struct AffineParams {
    double max_rotation_deg = 0.0;
    double max_scale_delta = 0.0;   // fraction, e.g. 0.10 for +/-10%
    double max_translate_px = 0.0;
    bool flip_horizontal = false;

    // rotation +/-15 deg, scale +/-10%, translation +/-10% of width,
    // flip with probability 0.5
    static AffineParams defaults_for(std::size_t width);

    bool is_identity() const {
        return max_rotation_deg == 0.0 && max_scale_delta == 0.0 &&
               max_translate_px == 0.0 && !flip_horizontal;
    }
};

// Random affine transform of a square grayscale image, shape (H,W) or
// (1,H,W). Inverse-mapped bilinear sampling, out-of-bounds filled with 0.
// Sampling order is rotation, scale, tx, ty, flip coin (fixed for
// reproducibility). Identity bounds return the input bit-exactly.
Tensor random_affine(const Tensor& image, const AffineParams& params, Rng& rng);

// Deterministic building block behind random_affine: rotate by angle_deg
// about the image center, scale, translate by (tx, ty) pixels, optional
// horizontal flip.
Tensor affine_transform(const Tensor& image, double angle_deg, double scale,
                        double tx, double ty, bool flip);

} // namespace ferkit
