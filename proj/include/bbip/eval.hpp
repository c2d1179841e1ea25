#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "bbip/error.hpp"
#include "bbip/file_util.hpp"
#include "bbip/model.hpp"
#include "bbip/session.hpp"
#include "bbip/trajectory.hpp"

namespace bbip {

/// Mean over all entries of the squared difference.
[[nodiscard]] inline double mse(const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& truth) {
    if (predicted.rows() != truth.rows() || predicted.cols() != truth.cols()) {
        throw DomainError("mse shape mismatch: " + std::to_string(predicted.rows()) + "x" +
                          std::to_string(predicted.cols()) + " vs " + std::to_string(truth.rows()) + "x" +
                          std::to_string(truth.cols()));
    }
    if (predicted.size() == 0) throw DomainError("mse of empty trajectories");
    return (predicted - truth).array().square().mean();
}

/// Pearson correlation; a zero-variance input contributes 0.
[[nodiscard]] inline double pearson(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) {
    const Eigen::VectorXd da = a.array() - a.mean();
    const Eigen::VectorXd db = b.array() - b.mean();
    const double sa = da.norm();
    const double sb = db.norm();
    const double n = std::sqrt(static_cast<double>(a.size()));
    if (sa <= 1e-12 * n * (1.0 + std::abs(a.mean())) || sb <= 1e-12 * n * (1.0 + std::abs(b.mean()))) return 0.0;
    return std::clamp(da.dot(db) / (sa * sb), -1.0, 1.0);
}

struct LagResult {
    std::size_t lag_samples = 0;
    double lag_seconds = 0.0;
    double max_total_correlation = 0.0;
    std::vector<double> curve;  ///< total correlation per backward shift 0..max_lag
};

/// Argmax of a lag curve, ties resolved to the smallest lag.
[[nodiscard]] inline LagResult lag_from_curve(std::vector<double> curve, double rate) {
    if (curve.empty()) throw DomainError("empty lag curve");
    if (!(rate > 0.0)) throw DomainError("sample rate must be positive");
    LagResult r;
    r.max_total_correlation = curve.front();
    for (std::size_t l = 1; l < curve.size(); ++l) {
        if (curve[l] > r.max_total_correlation) {
            r.max_total_correlation = curve[l];
            r.lag_samples = l;
        }
    }
    r.lag_seconds = static_cast<double>(r.lag_samples) / rate;
    r.curve = std::move(curve);
    return r;
}

/// Shifts every robot signal back by l samples (robot[t + l] against human[t])
/// and sums the per-pair Pearson correlations over the overlap, for each
/// l in [0, max_lag]. Rows of `human` and `robot` are matched pairs.
[[nodiscard]] inline LagResult correlation_lag(const Eigen::MatrixXd& human, const Eigen::MatrixXd& robot,
                                               std::size_t max_lag, double rate) {
    if (human.rows() != robot.rows() || human.cols() != robot.cols()) {
        throw DomainError("correlation lag needs matched signal sets of equal length");
    }
    if (human.rows() == 0) throw DomainError("correlation lag needs at least one matched pair");
    const auto n = static_cast<std::size_t>(human.cols());
    if (2 * max_lag >= n) throw DomainError("max lag must be below half the signal length");
    std::vector<double> curve(max_lag + 1, 0.0);
    for (std::size_t l = 0; l <= max_lag; ++l) {
        const auto overlap = static_cast<Eigen::Index>(n - l);
        for (Eigen::Index p = 0; p < human.rows(); ++p) {
            curve[l] += pearson(human.row(p).head(overlap).transpose(),
                                robot.row(p).segment(static_cast<Eigen::Index>(l), overlap).transpose());
        }
    }
    return lag_from_curve(std::move(curve), rate);
}

/// Averages lag curves of equal length and re-takes the argmax.
[[nodiscard]] inline LagResult average_lag(std::span<const LagResult> results, double rate) {
    if (results.empty()) throw DomainError("no lag curves to average");
    std::vector<double> mean(results.front().curve.size(), 0.0);
    for (const auto& r : results) {
        if (r.curve.size() != mean.size()) throw DomainError("lag curves differ in length");
        for (std::size_t l = 0; l < mean.size(); ++l) mean[l] += r.curve[l];
    }
    for (auto& v : mean) v /= static_cast<double>(results.size());
    return lag_from_curve(std::move(mean), rate);
}

/// Evaluation settings. Observations are streamed teacher-forced from each
/// demonstration's observed DoFs.
struct CorpusProtocol {
    std::uint64_t seed = 0;
    SessionOptions session;
    /// (observed DoF, controlled DoF) pairs in full-layout indices, for lag analysis.
    std::vector<std::pair<std::size_t, std::size_t>> matched_pairs;
    double sample_rate = 120.0;
    std::size_t max_lag = 30;
};

struct DemoResult {
    std::size_t index = 0;
    double mse = 0.0;
    Eigen::MatrixXd response;   ///< |D_c| x T, marginal response per step
    Eigen::MatrixXd posterior;  ///< |C| x T
    std::optional<LagResult> lag;
};

struct EvalReport {
    std::vector<double> per_demo_mse;  ///< successful demos, in corpus order
    std::vector<std::pair<std::size_t, std::string>> failed;
    double mean_mse = 0.0;
    double stderr_mse = 0.0;
    std::optional<LagResult> lag;  ///< from the demo-averaged curve
    double sample_rate = 120.0;
    std::vector<DemoResult> demos;
};

/// Session seed for one demonstration: depends only on the master seed and the
/// demonstration's contents, so reports do not depend on corpus order.
[[nodiscard]] inline std::uint64_t demo_seed(std::uint64_t master, const Demonstration& demo) {
    const auto& v = demo.values();
    const std::string_view bytes(reinterpret_cast<const char*>(v.data()), static_cast<std::size_t>(v.size()) * sizeof(double));
    return (master * 0x9E3779B97F4A7C15ULL) ^ crc32_of(bytes);
}

/// Streams one demonstration through a fresh session.
[[nodiscard]] inline DemoResult run_demo(const BbipModel& model, const Demonstration& demo, std::uint64_t seed,
                                         const CorpusProtocol& protocol) {
    if (!demo.layout().same_partition(model.layout())) throw LayoutError("demonstration layout differs from model");
    InferenceSession session(model, seed, protocol.session);
    const auto len = static_cast<Eigen::Index>(demo.sample_count());
    DemoResult r;
    r.response.resize(static_cast<Eigen::Index>(model.layout().controlled().size()), len);
    r.posterior.resize(static_cast<Eigen::Index>(model.class_count()), len);
    for (Eigen::Index t = 0; t < len; ++t) {
        const auto out = session.step(observation_at(demo, static_cast<std::size_t>(t)));
        r.response.col(t) = out.response;
        r.posterior.col(t) = out.class_posterior;
    }
    r.mse = mse(r.response, demo.controlled());

    if (!protocol.matched_pairs.empty() && 2 * protocol.max_lag < demo.sample_count()) {
        const auto& controlled = model.layout().controlled();
        Eigen::MatrixXd human(static_cast<Eigen::Index>(protocol.matched_pairs.size()), len);
        Eigen::MatrixXd robot(human.rows(), len);
        for (std::size_t p = 0; p < protocol.matched_pairs.size(); ++p) {
            const auto [obs, ctl] = protocol.matched_pairs[p];
            const auto it = std::find(controlled.begin(), controlled.end(), ctl);
            if (obs >= demo.layout().dof_count() || demo.layout().is_controlled(obs) || it == controlled.end()) {
                throw ConfigError("matched pair (" + std::to_string(obs) + ", " + std::to_string(ctl) +
                                  ") must pair an observed DoF with a controlled DoF");
            }
            human.row(static_cast<Eigen::Index>(p)) = demo.values().row(static_cast<Eigen::Index>(obs));
            robot.row(static_cast<Eigen::Index>(p)) = r.response.row(it - controlled.begin());
        }
        r.lag = correlation_lag(human, robot, protocol.max_lag, protocol.sample_rate);
    }
    return r;
}

/// Mean and standard error (sample sd / sqrt n; 0 for n < 2).
[[nodiscard]] inline std::pair<double, double> mean_and_stderr(std::span<const double> values) {
    if (values.empty()) return {0.0, 0.0};
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    if (values.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double n = static_cast<double>(values.size());
    return {mean, std::sqrt(ss / (n - 1.0)) / std::sqrt(n)};
}

/// Streams every demonstration into a fresh session, scores the marginal
/// controlled-DoF response against ground truth, and aggregates. Per-demo
/// failures are recorded in the report rather than thrown.
[[nodiscard]] inline EvalReport run_corpus(const BbipModel& model, std::span<const Demonstration> corpus,
                                           const CorpusProtocol& protocol = {}) {
    if (protocol.matched_pairs.size() > 0 && !(protocol.sample_rate > 0.0)) throw ConfigError("sample rate must be positive");
    EvalReport report;
    report.sample_rate = protocol.sample_rate;
    std::vector<LagResult> lags;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        try {
            auto r = run_demo(model, corpus[i], demo_seed(protocol.seed, corpus[i]), protocol);
            r.index = i;
            report.per_demo_mse.push_back(r.mse);
            if (r.lag) lags.push_back(*r.lag);
            report.demos.push_back(std::move(r));
        } catch (const ConfigError&) {
            throw;
        } catch (const Error& e) {
            report.failed.emplace_back(i, e.what());
        }
    }
    std::tie(report.mean_mse, report.stderr_mse) = mean_and_stderr(report.per_demo_mse);
    if (!lags.empty()) report.lag = average_lag(lags, protocol.sample_rate);
    return report;
}

namespace detail {

inline std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

}  // namespace detail

/// Report text: a summary table in the "mean +- stderr" style followed by one
/// key = value block per (predictor, test set) entry.
struct NamedReport {
    std::string predictor;
    std::string test_set;
    EvalReport report;
};

[[nodiscard]] inline std::string format_reports(std::span<const NamedReport> reports, std::uint64_t seed) {
    std::ostringstream out;
    out << "# bbip evaluation report\n";
    out << "seed = " << seed << "\n\n";
    out << "# predictor  test_set  mse (mean +- stderr)\n";
    for (const auto& r : reports) {
        out << r.predictor << "  " << r.test_set << "  " << detail::fixed(r.report.mean_mse, 3) << " +- "
            << detail::fixed(r.report.stderr_mse, 3) << "\n";
    }
    for (const auto& r : reports) {
        out << "\n[" << r.predictor << "/" << r.test_set << "]\n";
        out << "demos = " << r.report.per_demo_mse.size() + r.report.failed.size() << "\n";
        out << "failed = " << r.report.failed.size() << "\n";
        for (const auto& [idx, msg] : r.report.failed) out << "failed_demo = " << idx << ": " << msg << "\n";
        out << "mse_mean = " << format_double(r.report.mean_mse) << "\n";
        out << "mse_stderr = " << format_double(r.report.stderr_mse) << "\n";
        out << "sample_rate = " << format_double(r.report.sample_rate) << "\n";
        if (r.report.lag) {
            out << "lag_seconds = " << format_double(r.report.lag->lag_seconds) << "\n";
            out << "lag_samples = " << r.report.lag->lag_samples << "\n";
            out << "max_total_correlation = " << format_double(r.report.lag->max_total_correlation) << "\n";
        }
    }
    return out.str();
}

}  // namespace bbip
