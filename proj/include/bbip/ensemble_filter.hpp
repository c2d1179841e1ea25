#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <utility>

#include "bbip/basis.hpp"
#include "bbip/error.hpp"
#include "bbip/trajectory.hpp"

namespace bbip {

using Rng = std::mt19937_64;

/// Diagonal process noise, split by state component.
struct ProcessNoise {
    double phase = 1e-6;
    double phase_velocity = 1e-8;
    double weight = 1e-6;

    /// Expands to the full diagonal for a state with `weight_count` weights.
    [[nodiscard]] Eigen::VectorXd diagonal(std::size_t weight_count) const {
        Eigen::VectorXd q(static_cast<Eigen::Index>(2 + weight_count));
        q(0) = phase;
        q(1) = phase_velocity;
        q.tail(static_cast<Eigen::Index>(weight_count)).setConstant(weight);
        return q;
    }
};

/// Added to the innovation covariance diagonal before solving.
inline constexpr double innovation_jitter = 1e-9;

struct EnsembleMember {
    double phase = 0.0;
    double phase_velocity = 0.0;
    LatentWeights weights;
};

/// Monte Carlo approximation of the posterior over [phase, phase velocity, w].
/// States are stored column-wise: row 0 phase, row 1 phase velocity, rows
/// 2.. the concatenated basis weights.
class Ensemble {
public:
    Ensemble() = default;

    Ensemble(Eigen::MatrixXd states, Eigen::VectorXd process_noise, Eigen::VectorXd measurement_noise)
        : states_(std::move(states)), q_(std::move(process_noise)), r_(std::move(measurement_noise)) {
        if (states_.cols() < 2) throw ConfigError("an ensemble needs at least 2 members");
        if (states_.rows() < 3) throw ConfigError("ensemble state must hold phase, velocity and weights");
        if (q_.size() != states_.rows()) throw ConfigError("process noise must have one entry per state coordinate");
        if ((q_.array() < 0.0).any() || !q_.allFinite()) throw ConfigError("process noise entries must be >= 0");
        if (r_.size() == 0 || !(r_.array() > 0.0).all() || !r_.allFinite()) {
            throw ConfigError("measurement noise entries must be > 0");
        }
        if (!states_.allFinite()) throw DomainError("ensemble states must be finite");
    }

    [[nodiscard]] const Eigen::MatrixXd& states() const noexcept { return states_; }
    [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(states_.cols()); }
    [[nodiscard]] std::size_t state_dim() const noexcept { return static_cast<std::size_t>(states_.rows()); }
    [[nodiscard]] const Eigen::VectorXd& process_noise() const noexcept { return q_; }
    [[nodiscard]] const Eigen::VectorXd& measurement_noise() const noexcept { return r_; }

    [[nodiscard]] EnsembleMember member(std::size_t j) const {
        const auto col = states_.col(static_cast<Eigen::Index>(j));
        return {col(0), col(1), LatentWeights{col.tail(col.size() - 2)}};
    }

    [[nodiscard]] Ensemble with_states(Eigen::MatrixXd states) const {
        Ensemble copy = *this;
        copy.states_ = std::move(states);
        return copy;
    }

private:
    Eigen::MatrixXd states_;
    Eigen::VectorXd q_;
    Eigen::VectorXd r_;
};

/// One member per demonstration, all at phase zero with phase velocity 1 / (T - 1).
[[nodiscard]] inline Ensemble init_ensemble(std::span<const LatentWeights> weight_sets,
                                            std::span<const std::size_t> demo_lengths,
                                            Eigen::VectorXd process_noise, Eigen::VectorXd measurement_noise) {
    if (weight_sets.empty()) throw ConfigError("cannot build an ensemble from zero demonstrations");
    if (weight_sets.size() != demo_lengths.size()) {
        throw ConfigError("weight sets and demonstration lengths differ in count");
    }
    const auto w = weight_sets.front().values.size();
    Eigen::MatrixXd states(2 + w, static_cast<Eigen::Index>(weight_sets.size()));
    for (std::size_t j = 0; j < weight_sets.size(); ++j) {
        if (weight_sets[j].values.size() != w) throw ConfigError("weight sets differ in length");
        if (demo_lengths[j] < 2) throw DomainError("demonstration length must be >= 2");
        const auto col = static_cast<Eigen::Index>(j);
        states(0, col) = 0.0;
        states(1, col) = 1.0 / static_cast<double>(demo_lengths[j] - 1);
        states.col(col).tail(w) = weight_sets[j].values;
    }
    return Ensemble(std::move(states), std::move(process_noise), std::move(measurement_noise));
}

namespace detail {

inline void clamp_phase(Eigen::MatrixXd& states) {
    states.row(0) = states.row(0).cwiseMax(0.0).cwiseMin(max_phase);
}

/// rows x cols standard normals scaled per row, drawn column by column.
inline Eigen::MatrixXd scaled_normals(const Eigen::VectorXd& variance, Eigen::Index cols, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    const Eigen::VectorXd sd = variance.cwiseSqrt();
    Eigen::MatrixXd out(variance.size(), cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < variance.size(); ++i) out(i, j) = sd(i) * normal(rng);
    }
    return out;
}

}  // namespace detail

/// Constant-velocity phase propagation plus N(0, Q) noise on the full state.
/// Draws exactly state_dim * E normals, member by member.
[[nodiscard]] inline Ensemble predict(const Ensemble& ensemble, Rng& rng) {
    Eigen::MatrixXd next = ensemble.states();
    next.row(0) += next.row(1);
    detail::clamp_phase(next);
    next += detail::scaled_normals(ensemble.process_noise(), next.cols(), rng);
    detail::clamp_phase(next);
    return ensemble.with_states(std::move(next));
}

/// Predicted observed-DoF measurements, one column per member.
[[nodiscard]] inline Eigen::MatrixXd predicted_observations(const Ensemble& ensemble, const BasisModel& basis,
                                                            const DofLayout& layout) {
    const auto& states = ensemble.states();
    const auto& dofs = layout.observed();
    Eigen::MatrixXd h(static_cast<Eigen::Index>(dofs.size()), states.cols());
    const Eigen::Index w = states.rows() - 2;
    for (Eigen::Index j = 0; j < states.cols(); ++j) {
        const Eigen::VectorXd weights = states.col(j).tail(w);
        h.col(j) = observe(basis, states(0, j), weights, dofs);
    }
    return h;
}

/// Stochastic EnKF update with explicit observation perturbations (|D_o| x E).
/// Each member moves by gain_weight * K * (y + perturbation_j - h(x_j)).
[[nodiscard]] inline Ensemble update_with_perturbations(const Ensemble& ensemble, const ObservationFrame& observation,
                                                        const BasisModel& basis, const DofLayout& layout,
                                                        double gain_weight, const Eigen::MatrixXd& perturbations) {
    const auto m = static_cast<Eigen::Index>(layout.observed().size());
    const auto e = static_cast<Eigen::Index>(ensemble.size());
    if (observation.values.size() != m) {
        throw DomainError("observation has " + std::to_string(observation.values.size()) + " values, expected " +
                          std::to_string(m));
    }
    if (ensemble.measurement_noise().size() != m) throw DomainError("measurement noise does not match observed DoFs");
    if (ensemble.state_dim() != 2 + basis.weight_count()) throw DomainError("ensemble state does not match basis");
    if (perturbations.rows() != m || perturbations.cols() != e) throw DomainError("perturbation matrix has wrong shape");
    if (!(gain_weight >= 0.0 && gain_weight <= 1.0)) throw DomainError("gain weight must lie in [0, 1]");
    if (gain_weight == 0.0) return ensemble;

    const Eigen::MatrixXd& x = ensemble.states();
    const Eigen::MatrixXd h = predicted_observations(ensemble, basis, layout);
    const Eigen::MatrixXd x_dev = x.colwise() - x.rowwise().mean();
    const Eigen::MatrixXd h_dev = h.colwise() - h.rowwise().mean();
    const double scale = 1.0 / static_cast<double>(e - 1);

    const Eigen::MatrixXd cross_cov = scale * x_dev * h_dev.transpose();
    Eigen::MatrixXd innovation_cov = scale * h_dev * h_dev.transpose();
    innovation_cov.diagonal() += ensemble.measurement_noise();
    innovation_cov.diagonal().array() += innovation_jitter;

    Eigen::LDLT<Eigen::MatrixXd> ldlt(innovation_cov);
    if (ldlt.info() != Eigen::Success) throw NumericalError("innovation covariance factorization failed");
    const Eigen::MatrixXd gain = ldlt.solve(cross_cov.transpose()).transpose();  // n x m

    const Eigen::MatrixXd innovations = (perturbations.colwise() + observation.values) - h;
    Eigen::MatrixXd next = x + gain_weight * (gain * innovations);
    detail::clamp_phase(next);
    if (!next.allFinite()) throw NumericalError("ensemble update produced non-finite states");
    return ensemble.with_states(std::move(next));
}

/// Stochastic EnKF update. Perturbations N(0, R) are always drawn, member by
/// member, even for gain_weight == 0, so rng streams stay aligned.
[[nodiscard]] inline Ensemble update(const Ensemble& ensemble, const ObservationFrame& observation,
                                     const BasisModel& basis, const DofLayout& layout, double gain_weight, Rng& rng) {
    const Eigen::MatrixXd perturbations =
        detail::scaled_normals(ensemble.measurement_noise(), static_cast<Eigen::Index>(ensemble.size()), rng);
    return update_with_perturbations(ensemble, observation, basis, layout, gain_weight, perturbations);
}

struct MeanState {
    double phase = 0.0;
    double phase_velocity = 0.0;
    Eigen::VectorXd weights;
};

[[nodiscard]] inline MeanState mean_state(const Ensemble& ensemble) {
    const Eigen::VectorXd mean = ensemble.states().rowwise().mean();
    return {mean(0), mean(1), mean.tail(mean.size() - 2)};
}

}  // namespace bbip
