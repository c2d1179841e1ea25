#pragma once

// Trajectory text format (".traj"):
//
//   # comment lines start with '#'
//   record dofs=3 roles=ooc names=hand_l,hand_r,robot_l class=left-high
//   0.10 0.25 0.31
//   0.11 0.26 0.30
//   ...
//   <blank line>
//   record dofs=3 roles=ooc
//   ...
//
// One "record" header per demonstration. Header keys: dofs (required), roles
// (required; one character per DoF, 'o' observed or 'c' controlled), names
// (optional, comma separated, one per DoF), class (optional). Each following
// line is one time sample holding exactly `dofs` reals separated by spaces,
// tabs or commas. A blank line or a new header ends the record. Data lines
// that appear before any header form a headerless record (a bare frame
// stream); such records carry no roles and cannot become demonstrations.

#include <Eigen/Dense>

#include <cstddef>
#include <filesystem>
#include <istream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "bbip/error.hpp"
#include "bbip/file_util.hpp"
#include "bbip/trajectory.hpp"

namespace bbip {

struct TrajectoryRecord {
    std::size_t line = 0;  ///< 1-based line of the header (or first data line)
    std::optional<std::size_t> declared_dofs;
    std::string roles;
    std::vector<std::string> names;
    std::optional<std::string> class_label;
    Eigen::MatrixXd values;  ///< D x T
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    auto is_sep = [](char c) { return c == ' ' || c == '\t' || c == ',' || c == '\r'; };
    while (i < line.size()) {
        while (i < line.size() && is_sep(line[i])) ++i;
        std::size_t j = i;
        while (j < line.size() && !is_sep(line[j])) ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

inline std::vector<std::string> split_commas(std::string_view s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto pos = s.find(',', start);
        out.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline bool is_blank(std::string_view line) {
    return line.find_first_not_of(" \t\r") == std::string_view::npos;
}

}  // namespace detail

/// Parses every record in a stream. `source` names the input in error messages.
[[nodiscard]] inline std::vector<TrajectoryRecord> read_records(std::istream& in, const std::string& source = "<input>") {
    std::vector<TrajectoryRecord> records;
    std::optional<TrajectoryRecord> current;
    std::vector<std::vector<double>> rows;

    auto fail = [&](std::size_t line, const std::string& msg) -> ParseError {
        return ParseError(source + ":" + std::to_string(line) + ": " + msg);
    };

    auto finish = [&]() {
        if (!current) return;
        if (rows.empty()) {
            throw fail(current->line, "record " + std::to_string(records.size()) + " has no samples");
        }
        const auto dofs = static_cast<Eigen::Index>(rows.front().size());
        current->values.resize(dofs, static_cast<Eigen::Index>(rows.size()));
        for (std::size_t t = 0; t < rows.size(); ++t) {
            for (Eigen::Index d = 0; d < dofs; ++d) {
                current->values(d, static_cast<Eigen::Index>(t)) = rows[t][static_cast<std::size_t>(d)];
            }
        }
        records.push_back(std::move(*current));
        current.reset();
        rows.clear();
    };

    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view view(line);
        if (detail::is_blank(view)) {
            finish();
            continue;
        }
        if (view.find_first_not_of(" \t") != std::string_view::npos &&
            view[view.find_first_not_of(" \t")] == '#') {
            continue;
        }
        auto fields = detail::split_fields(view);
        if (fields.front() == "record") {
            finish();
            TrajectoryRecord rec;
            rec.line = lineno;
            // Header keys are space separated; commas belong to values.
            std::istringstream hs(line);
            std::string token;
            hs >> token;
            while (hs >> token) {
                auto eq = token.find('=');
                if (eq == std::string::npos) throw fail(lineno, "malformed header token '" + token + "'");
                std::string key = token.substr(0, eq);
                std::string value = token.substr(eq + 1);
                if (key == "dofs") {
                    double d = 0;
                    if (!parse_double(value, d) || d < 1 || d != static_cast<double>(static_cast<std::size_t>(d))) {
                        throw fail(lineno, "invalid dofs '" + value + "'");
                    }
                    rec.declared_dofs = static_cast<std::size_t>(d);
                } else if (key == "roles") {
                    rec.roles = value;
                } else if (key == "names") {
                    rec.names = detail::split_commas(value);
                } else if (key == "class") {
                    if (value.empty()) throw fail(lineno, "empty class label");
                    rec.class_label = value;
                } else {
                    throw fail(lineno, "unknown header key '" + key + "'");
                }
            }
            if (!rec.declared_dofs) throw fail(lineno, "record header missing dofs=");
            if (rec.roles.size() != *rec.declared_dofs) {
                throw fail(lineno, "roles must have one character per DoF");
            }
            if (!rec.names.empty() && rec.names.size() != *rec.declared_dofs) {
                throw fail(lineno, "names must list one entry per DoF");
            }
            current = std::move(rec);
            continue;
        }
        if (!current) {
            TrajectoryRecord rec;
            rec.line = lineno;
            current = std::move(rec);
        }
        std::vector<double> row;
        row.reserve(fields.size());
        for (auto f : fields) {
            double v = 0;
            if (!parse_double(f, v) || !std::isfinite(v)) {
                throw fail(lineno, "invalid number '" + std::string(f) + "'");
            }
            row.push_back(v);
        }
        const std::size_t expected = current->declared_dofs ? *current->declared_dofs
                                     : rows.empty()         ? row.size()
                                                            : rows.front().size();
        if (row.size() != expected) {
            throw fail(lineno, "expected " + std::to_string(expected) + " values, got " + std::to_string(row.size()));
        }
        rows.push_back(std::move(row));
    }
    finish();
    return records;
}

/// Converts a parsed record into a demonstration, checking it against `layout`.
[[nodiscard]] inline Demonstration to_demonstration(const TrajectoryRecord& rec, const DofLayout& layout,
                                                    const std::string& source = "<input>") {
    const auto where = source + ":" + std::to_string(rec.line) + ": ";
    if (rec.roles.empty()) throw ParseError(where + "record has no header; roles unknown");
    if (static_cast<std::size_t>(rec.values.rows()) != layout.dof_count()) {
        throw LayoutError(where + "record has " + std::to_string(rec.values.rows()) + " DoFs, layout expects " +
                          std::to_string(layout.dof_count()));
    }
    if (rec.roles != layout.roles()) {
        throw LayoutError(where + "record roles '" + rec.roles + "' do not match layout roles '" + layout.roles() + "'");
    }
    if (rec.values.cols() < 2) throw ParseError(where + "record needs at least 2 samples");
    return Demonstration(rec.values, layout, rec.class_label);
}

[[nodiscard]] inline std::vector<Demonstration> read_demonstrations(std::istream& in, const DofLayout& layout,
                                                                    const std::string& source = "<input>") {
    std::vector<Demonstration> out;
    for (const auto& rec : read_records(in, source)) out.push_back(to_demonstration(rec, layout, source));
    return out;
}

[[nodiscard]] inline std::vector<Demonstration> load_demonstrations(const std::filesystem::path& path,
                                                                    const DofLayout& layout) {
    std::istringstream in(read_file(path));
    return read_demonstrations(in, layout, path.string());
}

/// Loads a file whose layout is taken from its first record.
[[nodiscard]] inline std::vector<Demonstration> load_demonstrations(const std::filesystem::path& path) {
    std::istringstream in(read_file(path));
    auto records = read_records(in, path.string());
    std::vector<Demonstration> out;
    if (records.empty()) return out;
    const auto& first = records.front();
    if (first.roles.empty()) throw ParseError(path.string() + ":" + std::to_string(first.line) + ": record has no header");
    const auto layout = DofLayout::from_roles(first.roles, first.names);
    for (const auto& rec : records) out.push_back(to_demonstration(rec, layout, path.string()));
    return out;
}

inline void write_demonstrations(std::ostream& out, std::span<const Demonstration> demos) {
    for (std::size_t i = 0; i < demos.size(); ++i) {
        const auto& demo = demos[i];
        const auto& layout = demo.layout();
        if (i > 0) out << '\n';
        out << "record dofs=" << layout.dof_count() << " roles=" << layout.roles();
        if (!layout.names().empty()) {
            out << " names=";
            for (std::size_t d = 0; d < layout.names().size(); ++d) out << (d ? "," : "") << layout.names()[d];
        }
        if (demo.class_label()) out << " class=" << *demo.class_label();
        out << '\n';
        const auto& v = demo.values();
        for (Eigen::Index t = 0; t < v.cols(); ++t) {
            for (Eigen::Index d = 0; d < v.rows(); ++d) out << (d ? " " : "") << format_double(v(d, t));
            out << '\n';
        }
    }
}

inline void save_demonstrations(const std::filesystem::path& path, std::span<const Demonstration> demos) {
    std::ostringstream ss;
    write_demonstrations(ss, demos);
    write_file_atomic(path, ss.str());
}

}  // namespace bbip
