#pragma once

#include <stdexcept>
#include <string>

namespace hitrade {

// Every failure surfaced by the library carries a short machine-readable code
// ("data", "config", "checkpoint", ...) alongside the human message.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

class DataError : public Error {
public:
    explicit DataError(const std::string& message) : Error("data", message) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& message) : Error("config", message) {}
};

class CheckpointError : public Error {
public:
    explicit CheckpointError(const std::string& message) : Error("checkpoint", message) {}
};

class EnvError : public Error {
public:
    explicit EnvError(const std::string& message) : Error("env", message) {}
};

class TrainingError : public Error {
public:
    explicit TrainingError(const std::string& message) : Error("training", message) {}
};

} // namespace hitrade
