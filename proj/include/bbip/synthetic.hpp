#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "bbip/error.hpp"
#include "bbip/trajectory.hpp"

namespace bbip {

/// Mid-stream class change, positions as fractions of each demo's length.
struct SwitchSpec {
    double at = 0.5;
    double blend = 0.1;
};

struct SyntheticConfig {
    std::size_t class_count = 3;
    std::size_t per_class = 15;
    std::size_t observed_dofs = 3;
    std::size_t controlled_dofs = 2;
    std::size_t length = 120;
    double duration_jitter = 0.15;   ///< T_j = length * (1 + U(-j, j))
    double amplitude_jitter = 0.08;  ///< per-demo, per-DoF scale N(1, a); coupling between sides is class-specific
    double offset_jitter = 0.02;     ///< per-demo, per-DoF offset N(0, o)
    double noise = 0.0;              ///< additive white noise N(0, n)
    std::optional<SwitchSpec> switching;
    std::uint64_t seed = 0;
};

struct GroundTruth {
    std::string from_class;
    std::optional<std::string> to_class;
    std::optional<std::size_t> switch_index;
    std::size_t blend_width = 0;
    std::size_t sample_count = 0;

    [[nodiscard]] const std::string& label_at(std::size_t t) const {
        return (switch_index && t >= *switch_index) ? *to_class : from_class;
    }

    [[nodiscard]] std::vector<std::string> label_sequence() const {
        std::vector<std::string> out;
        out.reserve(sample_count);
        for (std::size_t t = 0; t < sample_count; ++t) out.push_back(label_at(t));
        return out;
    }
};

struct SyntheticCorpus {
    std::vector<Demonstration> demos;
    std::vector<GroundTruth> truth;
};

[[nodiscard]] inline std::string synthetic_class_name(std::size_t c) { return "class" + std::to_string(c); }

/// Layout used by the generator: observed DoFs first, then controlled.
[[nodiscard]] inline DofLayout synthetic_layout(std::size_t observed, std::size_t controlled) {
    std::vector<std::size_t> obs;
    std::vector<std::size_t> ctl;
    std::vector<std::string> names;
    for (std::size_t d = 0; d < observed; ++d) {
        obs.push_back(d);
        names.push_back("human" + std::to_string(d));
    }
    for (std::size_t d = 0; d < controlled; ++d) {
        ctl.push_back(observed + d);
        names.push_back("robot" + std::to_string(d));
    }
    return DofLayout(std::move(ctl), std::move(obs), std::move(names));
}

namespace detail {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Height the class raises DoF d to; every class has a distinct pattern.
inline double class_level(std::size_t c, std::size_t d, std::size_t classes) {
    if (classes < 2) return 0.7;
    return 0.4 + 0.6 * static_cast<double>((c + d) % classes) / static_cast<double>(classes - 1);
}

/// Phase at which class `c` raises; classes differ in timing, not only height.
inline double class_onset(std::size_t c, std::size_t classes) {
    if (classes < 2) return 0.35;
    return 0.28 + 0.14 * static_cast<double>(c) / static_cast<double>(classes - 1);
}

/// Cycles of the controlled DoFs' oscillation for class `c`.
inline double class_cycles(std::size_t c) { return 1.0 + static_cast<double>(c % 2); }

/// How strongly a controlled DoF's amplitude follows its mirrored observed DoF:
/// +1 for the first class, -1 for the last, evenly spaced in between.
inline double class_coupling(std::size_t c, std::size_t classes) {
    if (classes < 2) return 1.0;
    return 1.0 - 2.0 * static_cast<double>(c) / static_cast<double>(classes - 1);
}

/// Noise-free value of every DoF at phase `p` for class `c`; `scale` holds one
/// amplitude factor per DoF.
inline Eigen::VectorXd class_shape(std::size_t c, double p, const Eigen::VectorXd& scale, const SyntheticConfig& cfg) {
    const double two_pi = 2.0 * std::numbers::pi;
    const double onset = class_onset(c, cfg.class_count);
    Eigen::VectorXd v(static_cast<Eigen::Index>(cfg.observed_dofs + cfg.controlled_dofs));
    for (std::size_t d = 0; d < cfg.observed_dofs; ++d) {
        const double raise = scale(static_cast<Eigen::Index>(d)) * class_level(c, d, cfg.class_count) * (0.25 + 0.75 * sigmoid((p - onset) / 0.07));
        v(static_cast<Eigen::Index>(d)) = raise + 0.15 * std::sin(two_pi * (p + 0.25 * static_cast<double>(d)));
    }
    for (std::size_t d = 0; d < cfg.controlled_dofs; ++d) {
        const std::size_t mirrored = d % cfg.observed_dofs;
        const double raise =
            0.9 * scale(static_cast<Eigen::Index>(cfg.observed_dofs + d)) * class_level(c, mirrored, cfg.class_count) * (0.25 + 0.75 * sigmoid((p - onset - 0.03) / 0.07));
        v(static_cast<Eigen::Index>(cfg.observed_dofs + d)) =
            0.3 + raise + 0.12 * std::cos(two_pi * (class_cycles(c) * p + 0.25 * static_cast<double>(mirrored)));
    }
    return v;
}

}  // namespace detail

/// Smooth labeled corpus: sigmoid "raise" profiles with class-specific heights
/// and onsets plus phase-locked sinusoids (class-specific cycle counts on the
/// controlled DoFs), with per-demo duration, amplitude and offset
/// jitter. Controlled DoF d mirrors observed DoF d mod |D_o|; whether its
/// amplitude rises or falls with that DoF's amplitude depends on the class. Switching demos
/// go from class c to class (c + 1) mod C, cross-fading over the blend window.
[[nodiscard]] inline SyntheticCorpus generate_synthetic(const SyntheticConfig& cfg) {
    if (cfg.class_count < 1) throw ConfigError("synthetic corpus needs at least one class");
    if (cfg.observed_dofs < 1 || cfg.controlled_dofs < 1) throw ConfigError("synthetic corpus needs observed and controlled DoFs");
    if (cfg.length < 4) throw ConfigError("synthetic length must be >= 4");
    if (cfg.duration_jitter < 0.0 || cfg.duration_jitter >= 1.0) throw ConfigError("duration jitter must lie in [0, 1)");
    if (cfg.amplitude_jitter < 0.0 || cfg.offset_jitter < 0.0 || cfg.noise < 0.0) {
        throw ConfigError("jitter and noise levels must be >= 0");
    }
    if (cfg.switching) {
        if (cfg.class_count < 2) throw ConfigError("switching corpora need at least 2 classes");
        if (!(cfg.switching->at > 0.0 && cfg.switching->at < 1.0)) throw ConfigError("switch position must lie in (0, 1)");
        if (!(cfg.switching->blend >= 0.0 && cfg.switching->blend < 1.0)) throw ConfigError("blend width must lie in [0, 1)");
    }

    const auto layout = synthetic_layout(cfg.observed_dofs, cfg.controlled_dofs);
    const auto dofs = static_cast<Eigen::Index>(layout.dof_count());
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> uniform(-1.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    SyntheticCorpus corpus;
    for (std::size_t c = 0; c < cfg.class_count; ++c) {
        for (std::size_t i = 0; i < cfg.per_class; ++i) {
            const double stretch = 1.0 + cfg.duration_jitter * uniform(rng);
            const auto len = std::max<std::size_t>(
                4, static_cast<std::size_t>(std::lround(static_cast<double>(cfg.length) * stretch)));
            Eigen::VectorXd amplitude(dofs);
            for (Eigen::Index d = 0; d < dofs; ++d) amplitude(d) = normal(rng);
            Eigen::VectorXd offsets(dofs);
            for (Eigen::Index d = 0; d < dofs; ++d) offsets(d) = cfg.offset_jitter * normal(rng);

            GroundTruth truth;
            truth.from_class = synthetic_class_name(c);
            truth.sample_count = len;
            std::size_t target = c;
            double ramp_start = 0.0;
            if (cfg.switching) {
                target = (c + 1) % cfg.class_count;
                const auto s = static_cast<std::size_t>(std::lround(cfg.switching->at * static_cast<double>(len - 1)));
                truth.to_class = synthetic_class_name(target);
                truth.switch_index = s;
                truth.blend_width = static_cast<std::size_t>(std::lround(cfg.switching->blend * static_cast<double>(len)));
                ramp_start = static_cast<double>(s) - 0.5 * static_cast<double>(truth.blend_width);
            }

            const auto class_scale = [&](std::size_t k) {
                const double rho = detail::class_coupling(k, cfg.class_count);
                Eigen::VectorXd scale(dofs);
                for (std::size_t d = 0; d < cfg.observed_dofs; ++d) {
                    scale(static_cast<Eigen::Index>(d)) = 1.0 + cfg.amplitude_jitter * amplitude(static_cast<Eigen::Index>(d));
                }
                for (std::size_t d = 0; d < cfg.controlled_dofs; ++d) {
                    const auto own = static_cast<Eigen::Index>(cfg.observed_dofs + d);
                    const auto mirrored = static_cast<Eigen::Index>(d % cfg.observed_dofs);
                    scale(own) = 1.0 + cfg.amplitude_jitter * (rho * amplitude(mirrored) +
                                                               std::sqrt(1.0 - rho * rho) * amplitude(own));
                }
                return scale;
            };
            const Eigen::VectorXd scale = class_scale(c);
            const Eigen::VectorXd target_scale = class_scale(target);

            Eigen::MatrixXd values(dofs, static_cast<Eigen::Index>(len));
            for (std::size_t t = 0; t < len; ++t) {
                const double p = phase_of(t, len);
                Eigen::VectorXd v = detail::class_shape(c, p, scale, cfg);
                if (cfg.switching) {
                    double alpha = 0.0;
                    if (truth.blend_width == 0) {
                        alpha = t >= *truth.switch_index ? 1.0 : 0.0;
                    } else {
                        alpha = std::clamp((static_cast<double>(t) - ramp_start) / static_cast<double>(truth.blend_width),
                                           0.0, 1.0);
                    }
                    v = (1.0 - alpha) * v + alpha * detail::class_shape(target, p, target_scale, cfg);
                }
                values.col(static_cast<Eigen::Index>(t)) = v + offsets;
            }
            for (Eigen::Index t = 0; t < values.cols(); ++t) {
                for (Eigen::Index d = 0; d < dofs; ++d) values(d, t) += cfg.noise * normal(rng);
            }

            std::string label = cfg.switching ? truth.from_class + ">" + *truth.to_class : truth.from_class;
            corpus.demos.emplace_back(std::move(values), layout, std::move(label));
            corpus.truth.push_back(std::move(truth));
        }
    }
    return corpus;
}

}  // namespace bbip
