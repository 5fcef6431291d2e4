#pragma once

#include <stdexcept>
#include <string>

namespace trendlens {

/// Input or invariant violation (bad record, out-of-range parameter, schema mismatch).
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An artifact a command depends on has not been produced yet.
class MissingArtifactError : public std::runtime_error {
public:
    MissingArtifactError(const std::string& artifact, const std::string& message)
        : std::runtime_error(message), artifact_(artifact) {}

    const std::string& artifact() const noexcept { return artifact_; }

private:
    std::string artifact_;
};

/// Failure talking to an external service (embedding server, representative adapter).
class TransportError : public std::runtime_error {
public:
    TransportError(const std::string& message, int attempts, int status = 0)
        : std::runtime_error(message), attempts_(attempts), status_(status) {}

    int attempts() const noexcept { return attempts_; }
    /// HTTP status of the last attempt, 0 when no response arrived.
    int status() const noexcept { return status_; }

private:
    int attempts_;
    int status_;
};

}  // namespace trendlens
