#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bbip/basis.hpp"
#include "bbip/ensemble_filter.hpp"
#include "bbip/error.hpp"
#include "bbip/model.hpp"
#include "bbip/trajectory.hpp"

namespace bbip {

/// How class posteriors are formed from the stream.
enum class PosteriorMode {
    per_frame,   ///< softmax of the current frame's discriminant scores
    cumulative,  ///< per-frame log-likelihoods summed over the whole stream
};

/// How per-class phases enter the response.
enum class PhaseMode {
    per_class,  ///< each class reconstructs at its own mean phase
    fused,      ///< every class reconstructs at the posterior-weighted mean phase
};

struct SessionOptions {
    PosteriorMode posterior_mode = PosteriorMode::per_frame;
    /// Exponential smoothing half-life in frames; 0 disables smoothing.
    double smoothing_half_life = 0.0;
    PhaseMode phase_mode = PhaseMode::per_class;
};

struct StepOutput {
    std::size_t frame_index = 0;
    Eigen::VectorXd class_posterior;
    std::vector<MeanState> class_states;
    Eigen::VectorXd response;  ///< controlled DoFs, marginalized over classes
    bool finished = false;
};

/// One live interaction against a trained model. The model must outlive the session.
///
/// Every step predicts and updates each class's sub-ensemble, with the update
/// gain scaled by that class's posterior probability. All randomness comes from
/// one generator seeded at construction and consumed in class order.
class InferenceSession {
public:
    InferenceSession(const BbipModel& model, std::uint64_t seed, SessionOptions options = {})
        : model_(&model),
          options_(options),
          ensembles_(model.sub_ensembles()),
          posterior_(model.prior()),
          rng_(seed) {
        if (options_.smoothing_half_life < 0.0) throw ConfigError("smoothing half-life must be >= 0");
        cumulative_.setZero(static_cast<Eigen::Index>(model.class_count()));
    }

    [[nodiscard]] const BbipModel& model() const noexcept { return *model_; }
    [[nodiscard]] const std::vector<Ensemble>& sub_ensembles() const noexcept { return ensembles_; }
    [[nodiscard]] const Eigen::VectorXd& posterior() const noexcept { return posterior_; }
    [[nodiscard]] std::size_t frame_count() const noexcept { return frames_; }
    [[nodiscard]] bool finished() const noexcept { return finished_; }

    /// Test hook: use `posterior` instead of the classifier for subsequent steps.
    void force_posterior(std::optional<Eigen::VectorXd> posterior) {
        if (posterior) {
            if (static_cast<std::size_t>(posterior->size()) != model_->class_count()) {
                throw DomainError("forced posterior has wrong length");
            }
            if ((posterior->array() < 0.0).any() || std::abs(posterior->sum() - 1.0) > 1e-9) {
                throw DomainError("forced posterior must be a probability vector");
            }
        }
        forced_ = std::move(posterior);
    }

    StepOutput step(const ObservationFrame& frame) {
        if (finished_) return last_;
        const auto& layout = model_->layout();
        if (static_cast<std::size_t>(frame.values.size()) != layout.observed().size()) {
            throw DomainError("frame has " + std::to_string(frame.values.size()) + " values, model expects " +
                              std::to_string(layout.observed().size()));
        }

        const Eigen::VectorXd p = class_posterior(frame);
        for (std::size_t c = 0; c < ensembles_.size(); ++c) {
            ensembles_[c] = predict(ensembles_[c], rng_);
            ensembles_[c] = update(ensembles_[c], frame, model_->basis(), layout, p(static_cast<Eigen::Index>(c)), rng_);
        }
        posterior_ = p;

        StepOutput out;
        out.frame_index = frames_++;
        out.class_posterior = p;
        out.class_states.reserve(ensembles_.size());
        for (const auto& e : ensembles_) out.class_states.push_back(mean_state(e));
        states_ = out.class_states;
        out.response = response_at(0);

        double weighted_phase = 0.0;
        for (std::size_t c = 0; c < states_.size(); ++c) weighted_phase += p(static_cast<Eigen::Index>(c)) * states_[c].phase;
        finished_ = weighted_phase > 1.0;
        out.finished = finished_;
        last_ = out;
        return out;
    }

    /// Rolls the current mean states forward `horizon` samples without
    /// touching the ensembles. Column 0 is the response at the current phase.
    [[nodiscard]] Eigen::MatrixXd respond(std::size_t horizon) const {
        if (frames_ == 0) throw DomainError("respond needs at least one processed frame");
        Eigen::MatrixXd out(static_cast<Eigen::Index>(model_->layout().controlled().size()),
                            static_cast<Eigen::Index>(horizon));
        for (std::size_t k = 0; k < horizon; ++k) out.col(static_cast<Eigen::Index>(k)) = response_at(k);
        return out;
    }

private:
    [[nodiscard]] Eigen::VectorXd class_posterior(const ObservationFrame& frame) {
        if (forced_) return *forced_;
        const auto& clf = model_->classifier();
        if (!clf) return Eigen::VectorXd::Ones(1);

        Eigen::VectorXd p;
        if (options_.posterior_mode == PosteriorMode::cumulative) {
            const Eigen::VectorXd log_prior = clf->priors().array().log();
            cumulative_ += clf->scores(frame.values) - log_prior;
            p = LdaClassifier::softmax(cumulative_ + log_prior);
        } else {
            p = clf->posterior(frame);
        }
        if (options_.smoothing_half_life > 0.0) {
            const double keep = std::pow(0.5, 1.0 / options_.smoothing_half_life);
            p = keep * posterior_ + (1.0 - keep) * p;
            p /= p.sum();
        }
        return p;
    }

    [[nodiscard]] Eigen::VectorXd response_at(std::size_t k) const {
        const auto& controlled = model_->layout().controlled();
        const auto step = static_cast<double>(k);
        double fused_phase = 0.0;
        double fused_velocity = 0.0;
        if (options_.phase_mode == PhaseMode::fused) {
            for (std::size_t c = 0; c < states_.size(); ++c) {
                fused_phase += posterior_(static_cast<Eigen::Index>(c)) * states_[c].phase;
                fused_velocity += posterior_(static_cast<Eigen::Index>(c)) * states_[c].phase_velocity;
            }
        }
        Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(controlled.size()));
        for (std::size_t c = 0; c < states_.size(); ++c) {
            const double weight = posterior_(static_cast<Eigen::Index>(c));
            const auto& s = states_[c];
            const double phase = options_.phase_mode == PhaseMode::fused ? fused_phase + step * fused_velocity
                                                                          : s.phase + step * s.phase_velocity;
            out += weight * observe(model_->basis(), std::clamp(phase, 0.0, max_phase), s.weights, controlled);
        }
        return out;
    }

    const BbipModel* model_;
    SessionOptions options_;
    std::vector<Ensemble> ensembles_;
    std::vector<MeanState> states_;
    Eigen::VectorXd posterior_;
    Eigen::VectorXd cumulative_;
    std::optional<Eigen::VectorXd> forced_;
    Rng rng_;
    std::size_t frames_ = 0;
    bool finished_ = false;
    StepOutput last_;
};

}  // namespace bbip
