#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bbip/error.hpp"

namespace bbip {

/// Partition of the D degrees of freedom into controlled (robot) and
/// observed (partner) indices. Both index lists are kept sorted.
class DofLayout {
public:
    DofLayout() = default;

    DofLayout(std::vector<std::size_t> controlled, std::vector<std::size_t> observed,
              std::vector<std::string> names = {})
        : controlled_(std::move(controlled)), observed_(std::move(observed)), names_(std::move(names)) {
        std::sort(controlled_.begin(), controlled_.end());
        std::sort(observed_.begin(), observed_.end());
        validate();
    }

    /// Builds a layout from a per-DoF role string, 'c' = controlled, 'o' = observed.
    static DofLayout from_roles(const std::string& roles, std::vector<std::string> names = {}) {
        std::vector<std::size_t> controlled;
        std::vector<std::size_t> observed;
        for (std::size_t d = 0; d < roles.size(); ++d) {
            if (roles[d] == 'c') {
                controlled.push_back(d);
            } else if (roles[d] == 'o') {
                observed.push_back(d);
            } else {
                throw LayoutError("unknown DoF role '" + std::string(1, roles[d]) + "' (expected 'c' or 'o')");
            }
        }
        return DofLayout(std::move(controlled), std::move(observed), std::move(names));
    }

    [[nodiscard]] std::size_t dof_count() const noexcept { return controlled_.size() + observed_.size(); }
    [[nodiscard]] const std::vector<std::size_t>& controlled() const noexcept { return controlled_; }
    [[nodiscard]] const std::vector<std::size_t>& observed() const noexcept { return observed_; }
    [[nodiscard]] const std::vector<std::string>& names() const noexcept { return names_; }

    [[nodiscard]] std::string name(std::size_t d) const {
        return d < names_.size() ? names_[d] : "dof" + std::to_string(d);
    }

    [[nodiscard]] bool is_controlled(std::size_t d) const {
        return std::binary_search(controlled_.begin(), controlled_.end(), d);
    }

    [[nodiscard]] std::string roles() const {
        std::string r(dof_count(), 'o');
        for (auto d : controlled_) r[d] = 'c';
        return r;
    }

    /// Same partition; names are labels only and do not take part.
    [[nodiscard]] bool same_partition(const DofLayout& other) const {
        return controlled_ == other.controlled_ && observed_ == other.observed_;
    }

    friend bool operator==(const DofLayout&, const DofLayout&) = default;

private:
    void validate() const {
        if (controlled_.empty() || observed_.empty()) {
            throw LayoutError("layout needs at least one controlled and one observed DoF");
        }
        const std::size_t dofs = dof_count();
        std::vector<bool> seen(dofs, false);
        for (const auto* set : {&controlled_, &observed_}) {
            for (auto d : *set) {
                if (d >= dofs || seen[d]) {
                    throw LayoutError("controlled and observed indices must partition 0.." +
                                      std::to_string(dofs - 1));
                }
                seen[d] = true;
            }
        }
        if (!names_.empty() && names_.size() != dofs) {
            throw LayoutError("expected " + std::to_string(dofs) + " DoF names, got " +
                              std::to_string(names_.size()));
        }
    }

    std::vector<std::size_t> controlled_;
    std::vector<std::size_t> observed_;
    std::vector<std::string> names_;
};

/// Gathers the given rows of a column-major trajectory.
[[nodiscard]] inline Eigen::MatrixXd select_rows(const Eigen::MatrixXd& values,
                                                 const std::vector<std::size_t>& rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), values.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = values.row(static_cast<Eigen::Index>(rows[i]));
    }
    return out;
}

/// One recorded interaction: a D x T matrix, rows are DoFs, columns are samples.
class Demonstration {
public:
    Demonstration(Eigen::MatrixXd values, DofLayout layout, std::optional<std::string> class_label = {})
        : values_(std::move(values)), layout_(std::move(layout)), class_label_(std::move(class_label)) {
        if (static_cast<std::size_t>(values_.rows()) != layout_.dof_count()) {
            throw LayoutError("demonstration has " + std::to_string(values_.rows()) +
                              " rows but the layout declares " + std::to_string(layout_.dof_count()) +
                              " DoFs");
        }
        if (values_.cols() < 2) {
            throw DomainError("demonstration needs at least 2 samples");
        }
        if (!values_.allFinite()) {
            throw DomainError("demonstration contains non-finite values");
        }
    }

    [[nodiscard]] const Eigen::MatrixXd& values() const noexcept { return values_; }
    [[nodiscard]] const DofLayout& layout() const noexcept { return layout_; }
    [[nodiscard]] const std::optional<std::string>& class_label() const noexcept { return class_label_; }
    [[nodiscard]] std::size_t sample_count() const noexcept { return static_cast<std::size_t>(values_.cols()); }

    [[nodiscard]] Eigen::MatrixXd observed() const { return select_rows(values_, layout_.observed()); }
    [[nodiscard]] Eigen::MatrixXd controlled() const { return select_rows(values_, layout_.controlled()); }

    [[nodiscard]] Demonstration with_label(std::optional<std::string> label) const {
        return Demonstration(values_, layout_, std::move(label));
    }

private:
    Eigen::MatrixXd values_;
    DofLayout layout_;
    std::optional<std::string> class_label_;
};

/// Live measurement of the observed DoFs only.
struct ObservationFrame {
    Eigen::VectorXd values;
    std::size_t timestamp = 0;

    ObservationFrame() = default;
    ObservationFrame(Eigen::VectorXd v, std::size_t t) : values(std::move(v)), timestamp(t) {
        if (!values.allFinite()) throw DomainError("observation frame contains non-finite values");
    }
};

/// Column t of a demonstration, restricted to observed DoFs.
[[nodiscard]] inline ObservationFrame observation_at(const Demonstration& demo, std::size_t t) {
    const auto& obs = demo.layout().observed();
    Eigen::VectorXd v(static_cast<Eigen::Index>(obs.size()));
    for (std::size_t i = 0; i < obs.size(); ++i) {
        v(static_cast<Eigen::Index>(i)) = demo.values()(static_cast<Eigen::Index>(obs[i]), static_cast<Eigen::Index>(t));
    }
    return {std::move(v), t};
}

/// Normalized phase of sample t in a T-sample demonstration: t / (T - 1).
[[nodiscard]] inline double phase_of(std::size_t t, std::size_t sample_count) {
    if (sample_count < 2) throw DomainError("phase needs at least 2 samples");
    if (t >= sample_count) {
        throw DomainError("sample index " + std::to_string(t) + " outside 0.." + std::to_string(sample_count - 1));
    }
    return static_cast<double>(t) / static_cast<double>(sample_count - 1);
}

/// Linear interpolation of every row onto L uniformly spaced phase points.
/// Source positions are computed in integer arithmetic so L == T is an exact identity.
[[nodiscard]] inline Demonstration resample(const Demonstration& demo, std::size_t target_length) {
    if (target_length < 2) throw DomainError("resample target length must be >= 2");
    const auto& src = demo.values();
    const std::size_t len = demo.sample_count();
    Eigen::MatrixXd out(src.rows(), static_cast<Eigen::Index>(target_length));
    const std::size_t denom = target_length - 1;
    for (std::size_t i = 0; i < target_length; ++i) {
        const std::size_t num = i * (len - 1);
        const std::size_t lo = num / denom;
        const std::size_t rem = num % denom;
        const auto col = static_cast<Eigen::Index>(i);
        if (rem == 0) {
            out.col(col) = src.col(static_cast<Eigen::Index>(lo));
        } else {
            const double frac = static_cast<double>(rem) / static_cast<double>(denom);
            out.col(col) = (1.0 - frac) * src.col(static_cast<Eigen::Index>(lo)) +
                           frac * src.col(static_cast<Eigen::Index>(lo + 1));
        }
    }
    return Demonstration(std::move(out), demo.layout(), demo.class_label());
}

struct OutlierResult {
    std::vector<Demonstration> kept;
    std::vector<std::size_t> rejected;
};

struct OutlierOptions {
    double sigma_threshold = 4.0;
    double absolute_tolerance = 1e-9;
};

/// Rejects any demonstration with a value further than sigma_threshold standard
/// deviations from the other demonstrations at the same phase-aligned index.
///
/// Demos are first resampled to the lower median length. For each demo the mean
/// and sample standard deviation are taken over the remaining demos (leave-one-out),
/// computed once from the full input; rejection does not trigger re-estimation.
/// With only one other demo the deviation is undefined and nothing is rejected.
[[nodiscard]] inline OutlierResult remove_outliers(std::span<const Demonstration> demos,
                                                   const OutlierOptions& options = {}) {
    const std::size_t n = demos.size();
    if (n < 2) throw StatisticsError("outlier statistics need at least 2 demonstrations, got " + std::to_string(n));
    for (const auto& d : demos) {
        if (!d.layout().same_partition(demos.front().layout())) {
            throw LayoutError("outlier removal requires all demonstrations to share one layout");
        }
    }

    std::vector<std::size_t> lengths;
    lengths.reserve(n);
    for (const auto& d : demos) lengths.push_back(d.sample_count());
    std::sort(lengths.begin(), lengths.end());
    const std::size_t aligned_length = lengths[(n - 1) / 2];

    std::vector<Eigen::MatrixXd> aligned;
    aligned.reserve(n);
    for (const auto& d : demos) aligned.push_back(resample(d, aligned_length).values());

    const Eigen::Index rows = aligned.front().rows();
    const Eigen::Index cols = aligned.front().cols();
    Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(rows, cols);
    for (const auto& a : aligned) mean += a;
    mean /= static_cast<double>(n);
    Eigen::MatrixXd m2 = Eigen::MatrixXd::Zero(rows, cols);
    for (const auto& a : aligned) m2.array() += (a - mean).array().square();

    OutlierResult result;
    const auto nd = static_cast<double>(n);
    for (std::size_t j = 0; j < n; ++j) {
        bool outlier = false;
        if (n >= 3 && std::isfinite(options.sigma_threshold)) {
            const auto& x = aligned[j].array();
            // Downdate the full-sample moments to exclude demo j.
            const Eigen::ArrayXXd loo_mean = (nd * mean.array() - x) / (nd - 1.0);
            const Eigen::ArrayXXd loo_m2 = (m2.array() - (x - mean.array()) * (x - loo_mean)).max(0.0);
            const Eigen::ArrayXXd loo_sd = (loo_m2 / (nd - 2.0)).sqrt();
            outlier = ((x - loo_mean).abs() > options.sigma_threshold * loo_sd + options.absolute_tolerance).any();
        }
        if (outlier) {
            result.rejected.push_back(j);
        } else {
            result.kept.push_back(demos[j]);
        }
    }
    return result;
}

}  // namespace bbip
