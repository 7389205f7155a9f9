#pragma once

#include "hsdf/geom/image.hpp"

#include <vector>

namespace hsdf::composite {

struct SolverOptions {
    double tolerance = 1e-10;  // absolute L2 residual per channel
    int max_iterations = 0;    // 0 = 10 * unknowns
};

struct SolveStats {
    double max_residual = 0.0;  // worst channel, L2 norm of b - A f
    int iterations = 0;         // summed over channels
};

/// One double-precision channel, row-major.
struct Plane {
    int width = 0;
    int height = 0;
    std::vector<double> values;
};

/// Core solver behind both image operations. With a source, the right-hand side
/// carries the source Laplacian; without one the fill is harmonic.
Plane solve_masked_poisson(const Plane* source, const Plane& target, const std::vector<unsigned char>& mask,
                           const SolverOptions& opts = {}, SolveStats* stats = nullptr);

/// Seamless cloning: inside `mask` (> 0.5) the output solves the 5-point
/// discrete Poisson equation with the source Laplacian as guidance and the
/// target as Dirichlet boundary; outside it equals the target. Solved per
/// channel by conjugate gradient. An empty mask returns the target; a mask
/// touching the image border throws Error(OutOfDomain).
Image poisson_blend(const Image& source, const Image& target, const Image& mask, const SolverOptions& opts = {},
                    SolveStats* stats = nullptr);

/// Harmonic fill of the hole pixels (> 0.5) with the surrounding pixels as
/// Dirichlet boundary. Non-hole pixels are returned unchanged.
Image laplacian_inpaint(const Image& img, const Image& hole_mask, const SolverOptions& opts = {},
                        SolveStats* stats = nullptr);

} // namespace hsdf::composite
