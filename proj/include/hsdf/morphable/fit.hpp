#pragma once

#include "hsdf/morphable/model.hpp"

#include <vector>

namespace hsdf::morphable {

struct FitOptions {
    double lambda_id = 1e-3;
    double lambda_exp = 1e-3;
    double damping_init = 1e-3;
    double damping_up = 10.0;
    double damping_down = 0.5;
    int max_iters = 100;
    double rel_tol = 1e-10;
    double coeff_bound = 4.0;
};

struct FitResult {
    FitParams params;
    double rms_px = 0.0;
    int iterations = 0;
    bool converged = false;
    // objective after each accepted step, starting with the initial value
    std::vector<double> objective_history;
};

/// Damped Gauss-Newton (Levenberg-Marquardt) over rotation increment,
/// translation, identity and expression coefficients with analytic Jacobians.
/// Focal length and pose scale stay fixed. Never throws on rank deficiency;
/// the damping is raised instead.
FitResult fit_landmarks(const MorphableModel& model, const std::vector<Vec2>& observed, const FitParams& init,
                        const FitOptions& opts = {});

/// Sum of squared reprojection residuals plus coefficient priors.
double fit_objective(const MorphableModel& model, const std::vector<Vec2>& observed, const FitParams& params,
                     const FitOptions& opts);

} // namespace hsdf::morphable
