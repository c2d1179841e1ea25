#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bbip/basis.hpp"
#include "bbip/classifier.hpp"
#include "bbip/ensemble_filter.hpp"
#include "bbip/error.hpp"
#include "bbip/trajectory.hpp"

namespace bbip {

struct TrainConfig {
    BasisConfig basis;
    ProcessNoise process_noise;
    bool reject_outliers = true;
    OutlierOptions outliers;
    LdaOptions lda;
};

/// Trained blending model: one sub-ensemble per interaction class plus the
/// class classifier. With a single class there is no classifier and the model
/// is a plain Bayesian interaction primitive.
class BbipModel {
public:
    static constexpr int format_version = 1;

    BbipModel(BasisModel basis, DofLayout layout, std::vector<std::string> classes,
              std::vector<Ensemble> sub_ensembles, std::optional<LdaClassifier> classifier,
              ProcessNoise process_noise)
        : basis_(std::move(basis)),
          layout_(std::move(layout)),
          classes_(std::move(classes)),
          ensembles_(std::move(sub_ensembles)),
          classifier_(std::move(classifier)),
          process_noise_(process_noise) {
        if (classes_.empty()) throw ConfigError("model needs at least one class");
        if (ensembles_.size() != classes_.size()) throw ConfigError("one sub-ensemble per class is required");
        if (classifier_.has_value() != (classes_.size() >= 2)) {
            throw ConfigError("a classifier is required exactly when there are 2 or more classes");
        }
        if (classifier_ && classifier_->classes() != classes_) throw ConfigError("classifier classes differ from model");
        if (classifier_ && static_cast<std::size_t>(classifier_->input_dims()) != layout_.observed().size()) {
            throw ConfigError("classifier input size differs from observed DoF count");
        }
        if (basis_.dof_count() != layout_.dof_count()) throw ConfigError("basis and layout disagree on DoF count");
        for (const auto& e : ensembles_) {
            if (e.size() < 2) throw ConfigError("each sub-ensemble needs at least 2 members");
            if (e.state_dim() != 2 + basis_.weight_count()) throw ConfigError("sub-ensemble state size mismatch");
        }
    }

    [[nodiscard]] const BasisModel& basis() const noexcept { return basis_; }
    [[nodiscard]] const DofLayout& layout() const noexcept { return layout_; }
    [[nodiscard]] const std::vector<std::string>& classes() const noexcept { return classes_; }
    [[nodiscard]] std::size_t class_count() const noexcept { return classes_.size(); }
    [[nodiscard]] const std::vector<Ensemble>& sub_ensembles() const noexcept { return ensembles_; }
    [[nodiscard]] const std::optional<LdaClassifier>& classifier() const noexcept { return classifier_; }
    [[nodiscard]] const ProcessNoise& process_noise() const noexcept { return process_noise_; }

    [[nodiscard]] std::size_t member_count() const noexcept {
        std::size_t n = 0;
        for (const auto& e : ensembles_) n += e.size();
        return n;
    }

    /// Class prior used before the first frame.
    [[nodiscard]] Eigen::VectorXd prior() const {
        if (classifier_) return classifier_->priors();
        return Eigen::VectorXd::Ones(1);
    }

private:
    BasisModel basis_;
    DofLayout layout_;
    std::vector<std::string> classes_;
    std::vector<Ensemble> ensembles_;
    std::optional<LdaClassifier> classifier_;
    ProcessNoise process_noise_;
};

struct ClassTrainingSummary {
    std::string name;
    std::size_t input_count = 0;
    std::vector<std::size_t> rejected;  ///< indices into the class's input list
    std::size_t member_count = 0;
};

struct TrainingReport {
    std::vector<ClassTrainingSummary> classes;
    Eigen::VectorXd fit_rmse;        ///< per DoF, over all kept demonstrations
    Eigen::VectorXd noise_variance;  ///< per DoF, floored
    Eigen::VectorXd lda_eigenvalues; ///< empty for single-class models
};

struct TrainResult {
    BbipModel model;
    TrainingReport report;
};

namespace detail {

template <class Fn>
decltype(auto) with_stage(const std::string& stage, Fn&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        rethrow_with_context(e, stage);
    }
}

}  // namespace detail

/// Outlier removal per class, least-squares weights per demonstration,
/// one sub-ensemble per class, and LDA over the kept labeled demonstrations.
[[nodiscard]] inline TrainResult train_with_report(const std::map<std::string, std::vector<Demonstration>>& demos_by_class,
                                                   const TrainConfig& config = {}) {
    if (demos_by_class.empty()) throw ConfigError("training needs at least one class");
    const DofLayout* layout = nullptr;
    for (const auto& [name, demos] : demos_by_class) {
        if (demos.empty()) throw ConfigError("class '" + name + "' has no demonstrations");
        for (const auto& d : demos) {
            if (!layout) layout = &d.layout();
            if (!d.layout().same_partition(*layout)) throw LayoutError("training demonstrations differ in layout");
        }
    }

    TrainingReport report;
    std::vector<std::string> classes;
    std::vector<std::vector<Demonstration>> kept;
    for (const auto& [name, demos] : demos_by_class) {
        ClassTrainingSummary summary{name, demos.size(), {}, 0};
        std::vector<Demonstration> keep;
        if (config.reject_outliers && demos.size() >= 2) {
            auto filtered = detail::with_stage("outlier removal (class " + name + ")",
                                               [&] { return remove_outliers(demos, config.outliers); });
            keep = std::move(filtered.kept);
            summary.rejected = std::move(filtered.rejected);
        } else {
            keep = demos;
        }
        if (keep.size() < 2) {
            std::string msg = "class '" + name + "' has " + std::to_string(keep.size()) +
                              " usable demonstrations; at least 2 are required";
            if (!summary.rejected.empty()) {
                msg += " (outlier removal rejected " + std::to_string(summary.rejected.size()) + " of " +
                       std::to_string(demos.size()) +
                       "; with few demonstrations per class the leave-one-out deviation is noisy, so "
                       "consider more demonstrations or disabling outlier rejection)";
            }
            throw ConfigError(msg);
        }
        summary.member_count = keep.size();
        for (auto& d : keep) d = d.with_label(name);
        classes.push_back(name);
        kept.push_back(std::move(keep));
        report.classes.push_back(std::move(summary));
    }

    const BasisModel basis = detail::with_stage(
        "basis configuration", [&] { return BasisModel::from_config(config.basis, layout->dof_count()); });

    std::vector<std::vector<LatentWeights>> weights(kept.size());
    std::vector<Demonstration> all_demos;
    std::vector<LatentWeights> all_weights;
    for (std::size_t c = 0; c < kept.size(); ++c) {
        for (const auto& d : kept[c]) {
            auto w = detail::with_stage("weight fitting (class " + classes[c] + ")",
                                        [&] { return fit_weights(d, basis); });
            weights[c].push_back(w);
            all_weights.push_back(std::move(w));
            all_demos.push_back(d);
        }
    }

    const Eigen::VectorXd raw_residual = residual_variance(basis, all_demos, all_weights, 0.0);
    report.fit_rmse = raw_residual.cwiseSqrt();
    report.noise_variance = raw_residual.cwiseMax(config.basis.noise_floor);
    const BasisModel fitted_basis = basis.with_noise_variance(report.noise_variance);

    Eigen::VectorXd r(static_cast<Eigen::Index>(layout->observed().size()));
    for (std::size_t i = 0; i < layout->observed().size(); ++i) {
        r(static_cast<Eigen::Index>(i)) = report.noise_variance(static_cast<Eigen::Index>(layout->observed()[i]));
    }
    const Eigen::VectorXd q = config.process_noise.diagonal(basis.weight_count());

    std::vector<Ensemble> ensembles;
    for (std::size_t c = 0; c < kept.size(); ++c) {
        std::vector<std::size_t> lengths;
        for (const auto& d : kept[c]) lengths.push_back(d.sample_count());
        ensembles.push_back(detail::with_stage("ensemble initialization (class " + classes[c] + ")",
                                               [&] { return init_ensemble(weights[c], lengths, q, r); }));
    }

    std::optional<LdaClassifier> classifier;
    if (classes.size() >= 2) {
        classifier = detail::with_stage("classifier fitting", [&] { return fit_lda(all_demos, config.lda); });
        report.lda_eigenvalues = classifier->eigenvalues();
    }

    BbipModel model(fitted_basis, *layout, std::move(classes), std::move(ensembles), std::move(classifier),
                    config.process_noise);
    return {std::move(model), std::move(report)};
}

[[nodiscard]] inline BbipModel train(const std::map<std::string, std::vector<Demonstration>>& demos_by_class,
                                     const TrainConfig& config = {}) {
    return train_with_report(demos_by_class, config).model;
}

/// Groups demonstrations by their class label; unlabeled ones go to `fallback`.
[[nodiscard]] inline std::map<std::string, std::vector<Demonstration>> group_by_label(
    std::span<const Demonstration> demos, const std::string& fallback = "default") {
    std::map<std::string, std::vector<Demonstration>> out;
    for (const auto& d : demos) out[d.class_label().value_or(fallback)].push_back(d);
    return out;
}

/// Everything in one class, i.e. the single-primitive baseline.
[[nodiscard]] inline std::map<std::string, std::vector<Demonstration>> single_class(std::span<const Demonstration> demos,
                                                                                    const std::string& name = "all") {
    std::map<std::string, std::vector<Demonstration>> out;
    auto& list = out[name];
    for (const auto& d : demos) list.push_back(d.with_label(name));
    return out;
}

}  // namespace bbip
