#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bbip/error.hpp"
#include "bbip/trajectory.hpp"

namespace bbip {

/// Phases are clamped to [0, max_phase]; the margin lets interactions run a bit
/// past the end of the training demonstrations.
inline constexpr double phase_margin = 0.05;
inline constexpr double max_phase = 1.0 + phase_margin;

struct BasisConfig {
    std::size_t count = 15;
    std::optional<double> width;     ///< default 1.5 / count
    std::optional<double> overhang;  ///< default 2 / count
    double ridge = 1e-6;
    double noise_floor = 1e-6;
};

/// Normalized Gaussian basis over phase, shared by every DoF.
///
/// Centers are spread uniformly over [-overhang, 1 + overhang]. Feature rows
/// are normalized to sum to one, so a constant weight vector reproduces a
/// constant signal at any phase.
class BasisModel {
public:
    BasisModel() = default;

    BasisModel(std::size_t count, double width, double overhang, std::size_t dof_count, double ridge = 1e-6)
        : count_(count), width_(width), overhang_(overhang), dof_count_(dof_count), ridge_(ridge) {
        if (count_ < 2) throw ConfigError("basis needs at least 2 functions per DoF");
        if (!(width_ > 0.0) || !std::isfinite(width_)) throw ConfigError("basis width must be positive");
        if (!(overhang_ >= 0.0) || !std::isfinite(overhang_)) throw ConfigError("basis overhang must be >= 0");
        if (!(ridge_ >= 0.0)) throw ConfigError("ridge must be >= 0");
        if (dof_count_ == 0) throw ConfigError("basis needs at least one DoF");
        centers_ = Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(count_), -overhang_, 1.0 + overhang_);
        noise_variance_ = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(dof_count_));
    }

    static BasisModel from_config(const BasisConfig& cfg, std::size_t dof_count) {
        if (cfg.count < 2) throw ConfigError("basis needs at least 2 functions per DoF");
        const double b = static_cast<double>(cfg.count);
        return BasisModel(cfg.count, cfg.width.value_or(1.5 / b), cfg.overhang.value_or(2.0 / b), dof_count, cfg.ridge);
    }

    [[nodiscard]] std::size_t count() const noexcept { return count_; }
    [[nodiscard]] double width() const noexcept { return width_; }
    [[nodiscard]] double overhang() const noexcept { return overhang_; }
    [[nodiscard]] std::size_t dof_count() const noexcept { return dof_count_; }
    [[nodiscard]] double ridge() const noexcept { return ridge_; }
    [[nodiscard]] const Eigen::VectorXd& centers() const noexcept { return centers_; }
    [[nodiscard]] std::size_t weight_count() const noexcept { return count_ * dof_count_; }

    /// Per-DoF measurement noise variance (epsilon_y).
    [[nodiscard]] const Eigen::VectorXd& noise_variance() const noexcept { return noise_variance_; }

    [[nodiscard]] BasisModel with_noise_variance(Eigen::VectorXd variance) const {
        if (static_cast<std::size_t>(variance.size()) != dof_count_) {
            throw ConfigError("noise variance needs one entry per DoF");
        }
        if (!(variance.array() > 0.0).all() || !variance.allFinite()) {
            throw ConfigError("noise variance entries must be positive");
        }
        BasisModel copy = *this;
        copy.noise_variance_ = std::move(variance);
        return copy;
    }

    [[nodiscard]] BasisModel with_ridge(double ridge) const {
        return BasisModel(count_, width_, overhang_, dof_count_, ridge).with_noise_variance(noise_variance_);
    }

private:
    std::size_t count_ = 0;
    double width_ = 0.0;
    double overhang_ = 0.0;
    std::size_t dof_count_ = 0;
    double ridge_ = 0.0;
    Eigen::VectorXd centers_;
    Eigen::VectorXd noise_variance_;
};

/// Concatenated per-DoF weight blocks, DoF d occupies [d*B, (d+1)*B).
struct LatentWeights {
    Eigen::VectorXd values;

    [[nodiscard]] auto block(std::size_t dof, std::size_t count) const {
        return values.segment(static_cast<Eigen::Index>(dof * count), static_cast<Eigen::Index>(count));
    }
};

/// Feature row at phase `phase`; the phase is clamped to [0, max_phase].
[[nodiscard]] inline Eigen::RowVectorXd features(const BasisModel& model, double phase) {
    const double p = std::clamp(phase, 0.0, max_phase);
    const double inv_two_var = 1.0 / (2.0 * model.width() * model.width());
    Eigen::RowVectorXd log_f = -(model.centers().array() - p).square().transpose() * inv_two_var;
    Eigen::RowVectorXd f = (log_f.array() - log_f.maxCoeff()).exp();
    return f / f.sum();
}

/// T x B matrix of feature rows at phases t / (T - 1).
[[nodiscard]] inline Eigen::MatrixXd design_matrix(const BasisModel& model, std::size_t sample_count) {
    Eigen::MatrixXd phi(static_cast<Eigen::Index>(sample_count), static_cast<Eigen::Index>(model.count()));
    for (std::size_t t = 0; t < sample_count; ++t) {
        phi.row(static_cast<Eigen::Index>(t)) = features(model, phase_of(t, sample_count));
    }
    return phi;
}

/// Ridge least-squares fit of every DoF row, solved by QR on the stacked
/// system [Phi; sqrt(lambda) I] rather than through the normal equations.
[[nodiscard]] inline LatentWeights fit_weights(const Demonstration& demo, const BasisModel& model) {
    if (demo.layout().dof_count() != model.dof_count()) {
        throw LayoutError("demonstration has " + std::to_string(demo.layout().dof_count()) +
                          " DoFs but the basis was built for " + std::to_string(model.dof_count()));
    }
    const auto b = static_cast<Eigen::Index>(model.count());
    const Eigen::MatrixXd phi = design_matrix(model, demo.sample_count());
    const Eigen::Index t = phi.rows();
    const Eigen::Index dofs = demo.values().rows();

    Eigen::MatrixXd a(t + (model.ridge() > 0.0 ? b : 0), b);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(a.rows(), dofs);
    a.topRows(t) = phi;
    rhs.topRows(t) = demo.values().transpose();
    if (model.ridge() > 0.0) {
        a.bottomRows(b) = std::sqrt(model.ridge()) * Eigen::MatrixXd::Identity(b, b);
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    if (qr.rank() < b) {
        throw NumericalError("basis design matrix is rank deficient (rank " + std::to_string(qr.rank()) + " < " +
                             std::to_string(b) + "); raise the ridge or use more samples");
    }
    const Eigen::MatrixXd w = qr.solve(rhs);  // B x D

    LatentWeights out;
    out.values.resize(b * dofs);
    for (Eigen::Index d = 0; d < dofs; ++d) out.values.segment(d * b, b) = w.col(d);
    return out;
}

/// Noise-free observation function restricted to `dofs`.
[[nodiscard]] inline Eigen::VectorXd observe(const BasisModel& model, double phase, const Eigen::VectorXd& weights,
                                             std::span<const std::size_t> dofs) {
    const Eigen::RowVectorXd f = features(model, phase);
    const auto b = static_cast<Eigen::Index>(model.count());
    Eigen::VectorXd out(static_cast<Eigen::Index>(dofs.size()));
    for (std::size_t i = 0; i < dofs.size(); ++i) {
        out(static_cast<Eigen::Index>(i)) = f.dot(weights.segment(static_cast<Eigen::Index>(dofs[i]) * b, b));
    }
    return out;
}

[[nodiscard]] inline Eigen::VectorXd observe(const BasisModel& model, double phase, const LatentWeights& weights,
                                             std::span<const std::size_t> dofs) {
    return observe(model, phase, weights.values, dofs);
}

/// Reconstructed D x T trajectory of a fitted weight vector.
[[nodiscard]] inline Eigen::MatrixXd reconstruct(const BasisModel& model, const LatentWeights& weights,
                                                 std::size_t sample_count) {
    const Eigen::MatrixXd phi = design_matrix(model, sample_count);
    const auto b = static_cast<Eigen::Index>(model.count());
    const auto dofs = static_cast<Eigen::Index>(model.dof_count());
    Eigen::MatrixXd out(dofs, phi.rows());
    for (Eigen::Index d = 0; d < dofs; ++d) out.row(d) = (phi * weights.values.segment(d * b, b)).transpose();
    return out;
}

/// Per-DoF mean squared residual of the fits, pooled over all samples and
/// floored at `floor`.
[[nodiscard]] inline Eigen::VectorXd residual_variance(const BasisModel& model, std::span<const Demonstration> demos,
                                                       std::span<const LatentWeights> weights, double floor = 1e-6) {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.dof_count()));
    double samples = 0.0;
    for (std::size_t i = 0; i < demos.size(); ++i) {
        const Eigen::MatrixXd fit = reconstruct(model, weights[i], demos[i].sample_count());
        sum += (demos[i].values() - fit).array().square().rowwise().sum().matrix();
        samples += static_cast<double>(demos[i].sample_count());
    }
    if (samples > 0.0) sum /= samples;
    return sum.cwiseMax(floor);
}

}  // namespace bbip
