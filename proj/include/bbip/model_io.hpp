#pragma once

// Model file layout (version 1)
//
// A UTF-8 JSON document followed by one trailer line:
//
//   { ...json body... }
//   crc32 <8 lowercase hex digits>
//
// The CRC-32 covers every byte before the trailer line, including the newline
// that ends the body. Body fields, in write order:
//
//   format         "bbip-model"
//   version        integer, currently 1
//   layout         { roles: "oocc..", names: [..] }
//   basis          { count, width, overhang, ridge, noise_variance: [per DoF] }
//   process_noise  { phase, phase_velocity, weight }   (diagonal of Q)
//   classes        [ { name, phase_velocities: [E_c], weights: [E_c x (B*D)] } ]
//   classifier     null, or { projection: [|D_o| rows of k], eigenvalues: [k],
//                  projected_means: [C columns of k], shared_covariance_inverse:
//                  [k rows of k], priors: [C], discriminant_vectors: [C of k],
//                  discriminant_offsets: [C] }
//
// The measurement noise R is the basis noise variance restricted to observed
// DoFs; every member starts at phase 0. Discriminants are stored for readers
// and re-derived on load; a mismatch is reported as corruption.

#include <nlohmann/json.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "bbip/error.hpp"
#include "bbip/file_util.hpp"
#include "bbip/model.hpp"

namespace bbip {

namespace detail {

using ordered_json = nlohmann::ordered_json;

inline ordered_json to_json(const Eigen::VectorXd& v) {
    ordered_json a = ordered_json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

/// Row-major nested arrays.
inline ordered_json rows_to_json(const Eigen::MatrixXd& m) {
    ordered_json a = ordered_json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(to_json(Eigen::VectorXd(m.row(r).transpose())));
    return a;
}

inline Eigen::VectorXd vector_from_json(const ordered_json& a) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<Eigen::Index>(i)) = a.at(i).get<double>();
    return v;
}

inline Eigen::MatrixXd rows_from_json(const ordered_json& a, Eigen::Index cols) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(a.size()), cols);
    for (std::size_t r = 0; r < a.size(); ++r) {
        if (static_cast<Eigen::Index>(a.at(r).size()) != cols) throw IntegrityError("ragged matrix in model file");
        m.row(static_cast<Eigen::Index>(r)) = vector_from_json(a.at(r)).transpose();
    }
    return m;
}

inline std::string crc_hex(std::uint32_t crc) {
    char buf[9];
    std::snprintf(buf, sizeof(buf), "%08x", crc);
    return buf;
}

}  // namespace detail

[[nodiscard]] inline std::string serialize_model(const BbipModel& model) {
    using detail::ordered_json;
    ordered_json j;
    j["format"] = "bbip-model";
    j["version"] = BbipModel::format_version;
    j["layout"] = {{"roles", model.layout().roles()}, {"names", model.layout().names()}};
    const auto& b = model.basis();
    j["basis"] = {{"count", b.count()},
                  {"width", b.width()},
                  {"overhang", b.overhang()},
                  {"ridge", b.ridge()},
                  {"noise_variance", detail::to_json(b.noise_variance())}};
    const auto& q = model.process_noise();
    j["process_noise"] = {{"phase", q.phase}, {"phase_velocity", q.phase_velocity}, {"weight", q.weight}};
    ordered_json classes = ordered_json::array();
    for (std::size_t c = 0; c < model.class_count(); ++c) {
        const auto& states = model.sub_ensembles()[c].states();
        ordered_json entry;
        entry["name"] = model.classes()[c];
        entry["phase_velocities"] = detail::to_json(states.row(1).transpose());
        entry["weights"] = detail::rows_to_json(states.bottomRows(states.rows() - 2).transpose());
        classes.push_back(std::move(entry));
    }
    j["classes"] = std::move(classes);
    if (const auto& clf = model.classifier()) {
        j["classifier"] = {{"projection", detail::rows_to_json(clf->projection())},
                           {"eigenvalues", detail::to_json(clf->eigenvalues())},
                           {"projected_means", detail::rows_to_json(clf->projected_means().transpose())},
                           {"shared_covariance_inverse", detail::rows_to_json(clf->shared_covariance_inverse())},
                           {"priors", detail::to_json(clf->priors())},
                           {"discriminant_vectors", detail::rows_to_json(clf->discriminant_vectors().transpose())},
                           {"discriminant_offsets", detail::to_json(clf->discriminant_offsets())}};
    } else {
        j["classifier"] = nullptr;
    }
    std::string body = j.dump(1);
    body += '\n';
    return body + "crc32 " + detail::crc_hex(crc32_of(body)) + "\n";
}

[[nodiscard]] inline BbipModel deserialize_model(std::string_view text) {
    using detail::ordered_json;
    // Trailer: the last line must be "crc32 xxxxxxxx".
    if (text.empty() || text.back() != '\n') throw IntegrityError("model file is truncated (no checksum trailer)");
    const auto trailer_start = text.rfind('\n', text.size() - 2);
    if (trailer_start == std::string_view::npos) throw IntegrityError("model file is truncated (no checksum trailer)");
    const std::string_view body = text.substr(0, trailer_start + 1);
    const std::string_view trailer = text.substr(trailer_start + 1, text.size() - trailer_start - 2);
    if (trailer.size() != 14 || trailer.substr(0, 6) != "crc32 ") {
        throw IntegrityError("model file is truncated (no checksum trailer)");
    }
    if (trailer.substr(6) != detail::crc_hex(crc32_of(body))) throw IntegrityError("model file checksum mismatch");

    ordered_json j;
    try {
        j = ordered_json::parse(body);
    } catch (const nlohmann::json::exception& e) {
        throw IntegrityError(std::string("model file body is not valid JSON: ") + e.what());
    }

    try {
        if (j.at("format").get<std::string>() != "bbip-model") throw IntegrityError("not a bbip model file");
        const int version = j.at("version").get<int>();
        if (version != BbipModel::format_version) throw VersionError(version, BbipModel::format_version);

        const auto& jl = j.at("layout");
        const auto layout = DofLayout::from_roles(jl.at("roles").get<std::string>(),
                                                  jl.at("names").get<std::vector<std::string>>());
        const auto& jb = j.at("basis");
        const BasisModel basis = BasisModel(jb.at("count").get<std::size_t>(), jb.at("width").get<double>(),
                                            jb.at("overhang").get<double>(), layout.dof_count(),
                                            jb.at("ridge").get<double>())
                                     .with_noise_variance(detail::vector_from_json(jb.at("noise_variance")));
        const auto& jq = j.at("process_noise");
        const ProcessNoise q{jq.at("phase").get<double>(), jq.at("phase_velocity").get<double>(),
                             jq.at("weight").get<double>()};

        Eigen::VectorXd r(static_cast<Eigen::Index>(layout.observed().size()));
        for (std::size_t i = 0; i < layout.observed().size(); ++i) {
            r(static_cast<Eigen::Index>(i)) = basis.noise_variance()(static_cast<Eigen::Index>(layout.observed()[i]));
        }
        const Eigen::VectorXd qdiag = q.diagonal(basis.weight_count());
        const auto w = static_cast<Eigen::Index>(basis.weight_count());

        std::vector<std::string> classes;
        std::vector<Ensemble> ensembles;
        for (const auto& jc : j.at("classes")) {
            classes.push_back(jc.at("name").get<std::string>());
            const Eigen::VectorXd velocities = detail::vector_from_json(jc.at("phase_velocities"));
            const Eigen::MatrixXd weights = detail::rows_from_json(jc.at("weights"), w);
            if (weights.rows() != velocities.size()) throw IntegrityError("member count mismatch in model file");
            Eigen::MatrixXd states(2 + w, velocities.size());
            states.row(0).setZero();
            states.row(1) = velocities.transpose();
            states.bottomRows(w) = weights.transpose();
            ensembles.emplace_back(std::move(states), qdiag, r);
        }

        std::optional<LdaClassifier> classifier;
        if (!j.at("classifier").is_null()) {
            const auto& jc = j.at("classifier");
            const auto k = static_cast<Eigen::Index>(classes.size()) - 1;
            classifier.emplace(classes, detail::rows_from_json(jc.at("projection"), k),
                               detail::vector_from_json(jc.at("eigenvalues")),
                               detail::rows_from_json(jc.at("projected_means"), k).transpose(),
                               detail::rows_from_json(jc.at("shared_covariance_inverse"), k),
                               detail::vector_from_json(jc.at("priors")));
            const Eigen::MatrixXd betas = detail::rows_from_json(jc.at("discriminant_vectors"), k).transpose();
            const Eigen::VectorXd offsets = detail::vector_from_json(jc.at("discriminant_offsets"));
            if (betas.cols() != classifier->discriminant_vectors().cols() ||
                offsets.size() != classifier->discriminant_offsets().size() ||
                (betas - classifier->discriminant_vectors()).cwiseAbs().maxCoeff() > 1e-12 ||
                (offsets - classifier->discriminant_offsets()).cwiseAbs().maxCoeff() > 1e-12) {
                throw IntegrityError("stored discriminants disagree with stored means, covariance and priors");
            }
        }
        return BbipModel(basis, layout, std::move(classes), std::move(ensembles), std::move(classifier), q);
    } catch (const VersionError&) {
        throw;
    } catch (const IntegrityError&) {
        throw;
    } catch (const Error& e) {
        throw IntegrityError(std::string("invalid model contents: ") + e.what());
    } catch (const nlohmann::json::exception& e) {
        throw IntegrityError(std::string("invalid model contents: ") + e.what());
    }
}

inline void save_model(const BbipModel& model, const std::filesystem::path& path) {
    write_file_atomic(path, serialize_model(model));
}

[[nodiscard]] inline BbipModel load_model(const std::filesystem::path& path) {
    return deserialize_model(read_file(path));
}

}  // namespace bbip
