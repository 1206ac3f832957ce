// Copyright Contributors to the headsplat project
// SPDX-License-Identifier: Apache-2.0
//
// Masked image losses with exact gradients, plus the external loss hook.

#pragma once

#include "image.hpp"

#include <filesystem>
#include <string>

namespace hsplat {

struct LossWeights {
    double l1   = 0.8;
    double ssim = 0.2;
    double hook = 0.0;
};

/// External loss process. Invoked as
///   <command> <rendered.raster> <guidance.raster> <mask.raster> <out_dir>
/// and expected to write <out_dir>/loss.txt (one number) and
/// <out_dir>/grad.raster (3 channels, dLoss/dRendered).
struct LossHook {
    std::string command;
    std::filesystem::path workDir;

    bool
    enabled() const {
        return !command.empty();
    }
};

struct LossValue {
    double total = 0.0;
    double l1    = 0.0; // masked mean absolute error
    double ssim  = 0.0; // 1 - masked mean SSIM
    double hook  = 0.0;
    Image grad;         // dTotal/dRendered, RGB
};

/// Mean of |a - b| over masked pixel-channels (0 for an empty mask);
/// optional gradient uses sign(a - b) with sign(0) = 0.
double maskedL1(const Image &a, const Image &b, const Image &mask, Image *gradA = nullptr);

/// Mean SSIM over masked pixel-channels (11x11 Gaussian window, sigma 1.5,
/// zero padding); 1 for an empty mask. Optional gradient w.r.t. `a`.
double maskedSsim(const Image &a, const Image &b, const Image &mask, Image *gradA = nullptr);

LossValue computeLoss(const Image &rendered, const Image &guidance, const Image &mask,
                      const LossWeights &weights, const LossHook *hook = nullptr);

} // namespace hsplat
