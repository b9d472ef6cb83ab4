#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rcto {

/// Base class of every error raised by the library. `kind()` is a short
/// machine-readable tag used by the CLI's one-line error output.
class Error : public std::runtime_error
{
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind))
    {
    }

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

class ConfigError : public Error
{
public:
    ConfigError(const std::string& field, const std::string& message, int line = 0)
        : Error("config", format(field, message, line)), field_(field), line_(line)
    {
    }

    const std::string& field() const noexcept { return field_; }
    int line() const noexcept { return line_; }

private:
    static std::string format(const std::string& field, const std::string& message, int line)
    {
        std::string out;
        if (line > 0) out += "line " + std::to_string(line) + ": ";
        if (!field.empty()) out += field + ": ";
        return out + message;
    }

    std::string field_;
    int line_;
};

class SingularSystemError : public Error
{
public:
    SingularSystemError(int dof, const std::string& message)
        : Error("singular-system", message), dof_(dof)
    {
    }

    /// First global DOF at which the factorization found a zero pivot.
    int dof() const noexcept { return dof_; }

private:
    int dof_;
};

class NonConvergenceError : public Error
{
public:
    NonConvergenceError(const std::string& message, std::vector<double> trace)
        : Error("non-convergence", message), trace_(std::move(trace))
    {
    }

    const std::vector<double>& trace() const noexcept { return trace_; }

private:
    std::vector<double> trace_;
};

} // namespace rcto
