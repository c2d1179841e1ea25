#pragma once

#include <stdexcept>
#include <string>

namespace bbip {

/// Broad failure class, used by the CLI to pick an exit code.
enum class ErrorCategory { config, data, numerical };

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    [[nodiscard]] ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorCategory::config, what) {}
};

class ParseError : public Error {
public:
    explicit ParseError(const std::string& what) : Error(ErrorCategory::data, what) {}
};

class LayoutError : public Error {
public:
    explicit LayoutError(const std::string& what) : Error(ErrorCategory::data, what) {}
};

class DomainError : public Error {
public:
    explicit DomainError(const std::string& what) : Error(ErrorCategory::data, what) {}
};

class StatisticsError : public Error {
public:
    explicit StatisticsError(const std::string& what) : Error(ErrorCategory::data, what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(ErrorCategory::data, what) {}
};

class IntegrityError : public Error {
public:
    explicit IntegrityError(const std::string& what) : Error(ErrorCategory::data, what) {}
};

class VersionError : public Error {
public:
    VersionError(int found, int supported)
        : Error(ErrorCategory::data,
                "model file version " + std::to_string(found) +
                    " is not supported (this build reads version " +
                    std::to_string(supported) + ")"),
          found_(found),
          supported_(supported) {}

    [[nodiscard]] int found() const noexcept { return found_; }
    [[nodiscard]] int supported() const noexcept { return supported_; }

private:
    int found_;
    int supported_;
};

class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(ErrorCategory::numerical, what) {}
};

/// Re-throws with a stage prefix, keeping the category.
[[noreturn]] inline void rethrow_with_context(const Error& e, const std::string& stage) {
    throw Error(e.category(), stage + ": " + e.what());
}

}  // namespace bbip
