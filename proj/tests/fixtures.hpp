#pragma once

// Corpus, random-matrix and scratch-directory helpers shared by the unit
// tests and the acceptance runner; deliberately free of the test framework.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "bbip/bbip.hpp"

namespace bbip::testing {

/// Deterministic standard-normal matrix.
inline Eigen::MatrixXd random_normal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = n(rng);
    }
    return m;
}

/// Smooth random trajectory: a few low-frequency sinusoids per DoF.
inline Eigen::MatrixXd smooth_trajectory(Eigen::Index dofs, Eigen::Index samples, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::MatrixXd m(dofs, samples);
    for (Eigen::Index d = 0; d < dofs; ++d) {
        const double a0 = u(rng);
        const double a1 = 0.5 * u(rng);
        const double a2 = 0.25 * u(rng);
        const double s1 = u(rng);
        const double s2 = u(rng);
        for (Eigen::Index t = 0; t < samples; ++t) {
            const double p = static_cast<double>(t) / static_cast<double>(samples - 1);
            m(d, t) = a0 + a1 * std::sin(2.0 * M_PI * p + s1) + a2 * std::sin(4.0 * M_PI * p + s2);
        }
    }
    return m;
}

/// Small labeled corpus from the synthetic generator.
inline SyntheticCorpus small_corpus(std::size_t classes, std::size_t per_class, std::uint64_t seed, double noise = 0.0,
                                    std::optional<SwitchSpec> switching = std::nullopt) {
    SyntheticConfig cfg;
    cfg.class_count = classes;
    cfg.per_class = per_class;
    cfg.length = 80;
    cfg.noise = noise;
    cfg.seed = seed;
    cfg.switching = switching;
    return generate_synthetic(cfg);
}

/// Fresh scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::uint64_t counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("bbip-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] const std::filesystem::path& path() const { return path_; }
    [[nodiscard]] std::string operator/(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

}  // namespace bbip::testing
