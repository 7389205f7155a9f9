#include "hsdf/morphable/fit.hpp"

#include "hsdf/geom/error.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace hsdf::morphable {

namespace {

Mat3 skew(const Vec3& a)
{
    Mat3 s;
    s << 0, -a.z(), a.y(), a.z(), 0, -a.x(), -a.y(), a.x(), 0;
    return s;
}

struct Linearization {
    Eigen::VectorXd residual;
    Eigen::MatrixXd jacobian;
    bool in_front = true;
};

// Parameter block layout: [rotation increment (3) | translation (3) | id | exp].
Linearization linearize(const MorphableModel& model, const std::vector<Vec2>& observed, const FitParams& p,
                        const FitOptions& opts, bool with_jacobian)
{
    const int nl = static_cast<int>(model.landmark_indices.size());
    const int kid = model.num_id();
    const int kexp = model.num_exp();
    const int np = 6 + kid + kexp;
    Linearization lin;
    lin.residual.resize(2 * nl + kid + kexp);
    if (with_jacobian) {
        lin.jacobian = Eigen::MatrixXd::Zero(lin.residual.size(), np);
    }
    const PerspectiveCamera& cam = p.camera;
    const Mat3 cam_lin = cam.pose.scale * cam.pose.rotation;
    for (int l = 0; l < nl; ++l) {
        const int vi = model.landmark_indices[l];
        Vec3 v = model.mean_shape.vertices[vi];
        if (kid > 0) {
            v += model.id_basis.middleRows<3>(3 * vi) * p.id_coeffs;
        }
        if (kexp > 0) {
            v += model.exp_basis.middleRows<3>(3 * vi) * p.exp_coeffs;
        }
        const Vec3 rv = p.pose.scale * (p.pose.rotation * v);
        const Vec3 q = cam.pose.apply(rv + p.pose.translation);
        if (!(q.z() > 0.0)) {
            lin.in_front = false;
            return lin;
        }
        const double iz = 1.0 / q.z();
        lin.residual(2 * l) = cam.principal.x() + cam.focal * q.x() * iz - observed[l].x();
        lin.residual(2 * l + 1) = cam.principal.y() + cam.focal * q.y() * iz - observed[l].y();
        if (!with_jacobian) {
            continue;
        }
        Eigen::Matrix<double, 2, 3> duv;
        duv << cam.focal * iz, 0, -cam.focal * q.x() * iz * iz, 0, cam.focal * iz, -cam.focal * q.y() * iz * iz;
        const Eigen::Matrix<double, 2, 3> dworld = duv * cam_lin;
        lin.jacobian.block<2, 3>(2 * l, 0) = dworld * (-skew(rv));
        lin.jacobian.block<2, 3>(2 * l, 3) = dworld;
        const Eigen::Matrix<double, 2, 3> dmodel = dworld * (p.pose.scale * p.pose.rotation);
        if (kid > 0) {
            lin.jacobian.block(2 * l, 6, 2, kid) = dmodel * model.id_basis.middleRows<3>(3 * vi);
        }
        if (kexp > 0) {
            lin.jacobian.block(2 * l, 6 + kid, 2, kexp) = dmodel * model.exp_basis.middleRows<3>(3 * vi);
        }
    }
    const double sid = std::sqrt(opts.lambda_id);
    const double sexp = std::sqrt(opts.lambda_exp);
    for (int k = 0; k < kid; ++k) {
        lin.residual(2 * nl + k) = sid * p.id_coeffs(k);
        if (with_jacobian) {
            lin.jacobian(2 * nl + k, 6 + k) = sid;
        }
    }
    for (int k = 0; k < kexp; ++k) {
        lin.residual(2 * nl + kid + k) = sexp * p.exp_coeffs(k);
        if (with_jacobian) {
            lin.jacobian(2 * nl + kid + k, 6 + kid + k) = sexp;
        }
    }
    return lin;
}

FitParams apply_step(const FitParams& p, const Eigen::VectorXd& delta, int kid, int kexp, double bound)
{
    FitParams out = p;
    out.pose.rotation = rotation_from_axis_angle(delta.head<3>()) * p.pose.rotation;
    // re-orthonormalize to keep R^T R = I to machine precision over many steps
    Eigen::JacobiSVD<Mat3> svd(out.pose.rotation, Eigen::ComputeFullU | Eigen::ComputeFullV);
    out.pose.rotation = svd.matrixU() * svd.matrixV().transpose();
    out.pose.translation += delta.segment<3>(3);
    for (int k = 0; k < kid; ++k) {
        out.id_coeffs(k) = std::clamp(p.id_coeffs(k) + delta(6 + k), -bound, bound);
    }
    for (int k = 0; k < kexp; ++k) {
        out.exp_coeffs(k) = std::clamp(p.exp_coeffs(k) + delta(6 + kid + k), -bound, bound);
    }
    return out;
}

} // namespace

double fit_objective(const MorphableModel& model, const std::vector<Vec2>& observed, const FitParams& params,
                     const FitOptions& opts)
{
    const Linearization lin = linearize(model, observed, params, opts, false);
    require(lin.in_front, ErrorCode::BehindCamera, "landmark behind camera");
    return lin.residual.squaredNorm();
}

FitResult fit_landmarks(const MorphableModel& model, const std::vector<Vec2>& observed, const FitParams& init,
                        const FitOptions& opts)
{
    require(model.landmark_indices.size() >= 6, ErrorCode::InvalidArgument, "fit needs at least 6 landmarks");
    require(observed.size() == model.landmark_indices.size(), ErrorCode::SizeMismatch,
            "observed landmark count != model landmark count");
    require(init.id_coeffs.size() == model.num_id() && init.exp_coeffs.size() == model.num_exp(),
            ErrorCode::SizeMismatch, "init coefficient counts mismatch");
    const int kid = model.num_id();
    const int kexp = model.num_exp();
    const int nl = static_cast<int>(observed.size());

    FitResult res;
    res.params = init;
    Linearization lin = linearize(model, observed, res.params, opts, true);
    require(lin.in_front, ErrorCode::BehindCamera, "initial landmark behind camera");
    double obj = lin.residual.squaredNorm();
    res.objective_history.push_back(obj);
    double mu = opts.damping_init;

    for (int it = 0; it < opts.max_iters; ++it) {
        res.iterations = it + 1;
        if (obj <= 1e-30) {
            res.converged = true;
            break;
        }
        const Eigen::MatrixXd jtj = lin.jacobian.transpose() * lin.jacobian;
        const Eigen::VectorXd jtr = lin.jacobian.transpose() * lin.residual;
        const Eigen::VectorXd diag = jtj.diagonal().cwiseMax(1e-12 * std::max(1.0, jtj.diagonal().maxCoeff()));
        bool accepted = false;
        double new_obj = obj;
        FitParams trial;
        for (int attempt = 0; attempt < 40 && !accepted; ++attempt) {
            Eigen::MatrixXd a = jtj;
            a.diagonal() += mu * diag;
            Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
            Eigen::VectorXd delta;
            if (ldlt.info() == Eigen::Success) {
                delta = ldlt.solve(-jtr);
            }
            if (delta.size() == 0 || !delta.allFinite() || ldlt.info() != Eigen::Success) {
                mu *= opts.damping_up;
                continue;
            }
            trial = apply_step(res.params, delta, kid, kexp, opts.coeff_bound);
            const Linearization tl = linearize(model, observed, trial, opts, false);
            if (tl.in_front && tl.residual.squaredNorm() < obj) {
                new_obj = tl.residual.squaredNorm();
                accepted = true;
                mu = std::max(mu * opts.damping_down, 1e-15);
            } else {
                mu *= opts.damping_up;
            }
        }
        if (!accepted) {
            // no descent direction left at any damping: a stationary point
            res.converged = true;
            break;
        }
        const double rel = (obj - new_obj) / std::max(obj, 1e-300);
        res.params = trial;
        obj = new_obj;
        res.objective_history.push_back(obj);
        lin = linearize(model, observed, res.params, opts, true);
        if (rel < opts.rel_tol) {
            res.converged = true;
            break;
        }
    }
    const Eigen::VectorXd reproj = lin.residual.head(2 * nl);
    res.rms_px = std::sqrt(reproj.squaredNorm() / nl);
    return res;
}

} // namespace hsdf::morphable
