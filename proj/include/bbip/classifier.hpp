#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "bbip/error.hpp"
#include "bbip/trajectory.hpp"

namespace bbip {

struct LdaOptions {
    /// Ridge added to the within-class scatter diagonal, relative to trace / dims.
    double shrinkage = 1e-6;
};

/// Scatter matrices of labeled observed-DoF samples. Covariances use the 1/N
/// (maximum likelihood) normalization so that S_T = S_W + S_B when the priors
/// match the per-class sample fractions.
struct ScatterMatrices {
    std::vector<std::string> classes;
    std::vector<Eigen::VectorXd> class_means;
    std::vector<double> demo_counts;
    Eigen::VectorXd priors;
    Eigen::MatrixXd within;   ///< S_W, prior weighted, before shrinkage
    Eigen::MatrixXd total;    ///< S_T over all pooled samples
    Eigen::MatrixXd between;  ///< S_B = S_T - S_W
};

/// Stacks the observed rows of every demonstration per class label and
/// computes the scatter matrices. Priors are N_c / sum N with N_c the number
/// of demonstrations in class c.
[[nodiscard]] inline ScatterMatrices scatter_matrices(std::span<const Demonstration> demos) {
    std::map<std::string, std::vector<const Demonstration*>> by_class;
    for (const auto& d : demos) {
        if (!d.class_label()) throw ConfigError("LDA training demonstrations must carry class labels");
        if (!d.layout().same_partition(demos.front().layout())) throw LayoutError("LDA demonstrations differ in layout");
        by_class[*d.class_label()].push_back(&d);
    }
    if (by_class.size() < 2) {
        throw DomainError("LDA needs at least 2 classes, got " + std::to_string(by_class.size()));
    }

    ScatterMatrices s;
    const auto dims = static_cast<Eigen::Index>(demos.front().layout().observed().size());
    std::vector<Eigen::MatrixXd> stacked;
    Eigen::Index pooled_cols = 0;
    for (const auto& [label, members] : by_class) {
        Eigen::Index cols = 0;
        for (const auto* d : members) cols += static_cast<Eigen::Index>(d->sample_count());
        Eigen::MatrixXd m(dims, cols);
        Eigen::Index at = 0;
        for (const auto* d : members) {
            const auto n = static_cast<Eigen::Index>(d->sample_count());
            m.middleCols(at, n) = d->observed();
            at += n;
        }
        if (cols < 2) throw StatisticsError("class '" + label + "' has fewer than 2 samples");
        s.classes.push_back(label);
        s.demo_counts.push_back(static_cast<double>(members.size()));
        pooled_cols += cols;
        stacked.push_back(std::move(m));
    }

    double total_demos = 0.0;
    for (double n : s.demo_counts) total_demos += n;
    s.priors.resize(static_cast<Eigen::Index>(s.classes.size()));
    s.within = Eigen::MatrixXd::Zero(dims, dims);
    Eigen::MatrixXd pooled(dims, pooled_cols);
    Eigen::Index at = 0;
    for (std::size_t c = 0; c < stacked.size(); ++c) {
        const auto& m = stacked[c];
        const Eigen::VectorXd mean = m.rowwise().mean();
        const Eigen::MatrixXd centered = m.colwise() - mean;
        const double prior = s.demo_counts[c] / total_demos;
        s.priors(static_cast<Eigen::Index>(c)) = prior;
        s.within += prior * (centered * centered.transpose()) / static_cast<double>(m.cols());
        s.class_means.push_back(mean);
        pooled.middleCols(at, m.cols()) = m;
        at += m.cols();
    }
    const Eigen::MatrixXd centered = pooled.colwise() - pooled.rowwise().mean();
    s.total = (centered * centered.transpose()) / static_cast<double>(pooled.cols());
    s.between = s.total - s.within;
    return s;
}

/// Reduced-rank LDA: projection onto the k = |C| - 1 leading generalized
/// eigenvectors of (S_B, S_W), then Gaussian class posteriors with a shared
/// covariance in the projected space.
class LdaClassifier {
public:
    LdaClassifier() = default;

    /// Assembles a classifier from stored parameters; discriminants are derived.
    LdaClassifier(std::vector<std::string> classes, Eigen::MatrixXd projection, Eigen::VectorXd eigenvalues,
                  Eigen::MatrixXd projected_means, Eigen::MatrixXd shared_covariance_inverse, Eigen::VectorXd priors)
        : classes_(std::move(classes)),
          projection_(std::move(projection)),
          eigenvalues_(std::move(eigenvalues)),
          means_(std::move(projected_means)),
          cov_inv_(std::move(shared_covariance_inverse)),
          priors_(std::move(priors)) {
        const auto c = static_cast<Eigen::Index>(classes_.size());
        const Eigen::Index k = c - 1;
        if (c < 2) throw ConfigError("classifier needs at least 2 classes");
        if (projection_.cols() != k || eigenvalues_.size() != k || means_.rows() != k || means_.cols() != c ||
            cov_inv_.rows() != k || cov_inv_.cols() != k || priors_.size() != c) {
            throw ConfigError("classifier parameter shapes are inconsistent");
        }
        if (!(priors_.array() > 0.0).all() || std::abs(priors_.sum() - 1.0) > 1e-9) {
            throw ConfigError("class priors must be positive and sum to 1");
        }
        std::tie(betas_, offsets_) = discriminants(means_, cov_inv_, priors_);
    }

    /// beta_c = Sigma^-1 mu_c, beta_c0 = -1/2 mu_c' Sigma^-1 mu_c + log pi_c.
    [[nodiscard]] static std::pair<Eigen::MatrixXd, Eigen::VectorXd> discriminants(const Eigen::MatrixXd& means,
                                                                                   const Eigen::MatrixXd& cov_inv,
                                                                                   const Eigen::VectorXd& priors) {
        Eigen::MatrixXd betas = cov_inv * means;
        Eigen::VectorXd offsets(means.cols());
        for (Eigen::Index c = 0; c < means.cols(); ++c) {
            offsets(c) = -0.5 * means.col(c).dot(betas.col(c)) + std::log(priors(c));
        }
        return {std::move(betas), std::move(offsets)};
    }

    [[nodiscard]] const std::vector<std::string>& classes() const noexcept { return classes_; }
    [[nodiscard]] std::size_t class_count() const noexcept { return classes_.size(); }
    [[nodiscard]] Eigen::Index rank() const noexcept { return projection_.cols(); }
    [[nodiscard]] Eigen::Index input_dims() const noexcept { return projection_.rows(); }
    [[nodiscard]] const Eigen::MatrixXd& projection() const noexcept { return projection_; }
    [[nodiscard]] const Eigen::VectorXd& eigenvalues() const noexcept { return eigenvalues_; }
    [[nodiscard]] const Eigen::MatrixXd& projected_means() const noexcept { return means_; }
    [[nodiscard]] const Eigen::MatrixXd& shared_covariance_inverse() const noexcept { return cov_inv_; }
    [[nodiscard]] const Eigen::MatrixXd& discriminant_vectors() const noexcept { return betas_; }
    [[nodiscard]] const Eigen::VectorXd& discriminant_offsets() const noexcept { return offsets_; }
    [[nodiscard]] const Eigen::VectorXd& priors() const noexcept { return priors_; }

    [[nodiscard]] Eigen::VectorXd project(const Eigen::VectorXd& observed) const {
        if (observed.size() != projection_.rows()) {
            throw DomainError("classifier expects " + std::to_string(projection_.rows()) + " observed values, got " +
                              std::to_string(observed.size()));
        }
        return projection_.transpose() * observed;
    }

    /// Linear discriminant scores beta_c' z + beta_c0.
    [[nodiscard]] Eigen::VectorXd scores(const Eigen::VectorXd& observed) const {
        return betas_.transpose() * project(observed) + offsets_;
    }

    [[nodiscard]] Eigen::VectorXd posterior(const ObservationFrame& frame) const {
        return softmax(scores(frame.values));
    }

    [[nodiscard]] static Eigen::VectorXd softmax(const Eigen::VectorXd& scores) {
        Eigen::VectorXd p = (scores.array() - scores.maxCoeff()).exp();
        return p / p.sum();
    }

private:
    std::vector<std::string> classes_;
    Eigen::MatrixXd projection_;
    Eigen::VectorXd eigenvalues_;
    Eigen::MatrixXd means_;
    Eigen::MatrixXd cov_inv_;
    Eigen::VectorXd priors_;
    Eigen::MatrixXd betas_;
    Eigen::VectorXd offsets_;
};

/// Unit norm, first non-negligible component positive.
inline void canonicalize_direction(Eigen::Ref<Eigen::VectorXd> v) {
    v.normalize();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (std::abs(v(i)) > 1e-12) {
            if (v(i) < 0.0) v = -v;
            return;
        }
    }
}

[[nodiscard]] inline LdaClassifier fit_lda(std::span<const Demonstration> demos, const LdaOptions& options = {}) {
    if (demos.empty()) throw ConfigError("LDA needs labeled demonstrations");
    const ScatterMatrices s = scatter_matrices(demos);
    const auto dims = s.within.rows();
    const auto c = static_cast<Eigen::Index>(s.classes.size());
    const Eigen::Index k = c - 1;
    if (dims < k) {
        throw DomainError("LDA with " + std::to_string(c) + " classes needs at least " + std::to_string(k) +
                          " observed DoFs, got " + std::to_string(dims));
    }

    Eigen::MatrixXd within = s.within;
    const double trace = within.trace();
    within.diagonal().array() += options.shrinkage * (trace > 0.0 ? trace : 1.0) / static_cast<double>(dims);

    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(s.between, within);
    if (solver.info() != Eigen::Success) throw NumericalError("generalized eigenproblem (S_B, S_W) failed");

    // Eigenvalues come back ascending.
    Eigen::MatrixXd projection(dims, k);
    Eigen::VectorXd eigenvalues(k);
    for (Eigen::Index i = 0; i < k; ++i) {
        eigenvalues(i) = solver.eigenvalues()(dims - 1 - i);
        projection.col(i) = solver.eigenvectors().col(dims - 1 - i);
        canonicalize_direction(projection.col(i));
    }

    Eigen::MatrixXd means(k, c);
    for (Eigen::Index i = 0; i < c; ++i) means.col(i) = projection.transpose() * s.class_means[static_cast<std::size_t>(i)];

    Eigen::MatrixXd cov = projection.transpose() * within * projection;
    cov = 0.5 * (cov + cov.transpose());
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) throw NumericalError("projected covariance is not positive definite");
    Eigen::MatrixXd cov_inv = llt.solve(Eigen::MatrixXd::Identity(k, k));
    cov_inv = 0.5 * (cov_inv + cov_inv.transpose());

    return LdaClassifier(s.classes, std::move(projection), std::move(eigenvalues), std::move(means),
                         std::move(cov_inv), s.priors);
}

}  // namespace bbip
