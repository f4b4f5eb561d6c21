#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace teaser {

enum class ErrorCode {
    // dataset
    MalformedRecord,
    LabelOutOfRange,
    DuplicateId,
    VariantConflict,
    // embedding_retrieval
    ProviderUnavailable,
    DimensionMismatch,
    ZeroVector,
    EmptyStore,
    ProviderTagMismatch,
    // prompt_forge
    EmptyChoices,
    InvalidStrategy,
    ShotMismatch,
    SubtaskMismatch,
    MissingReasoning,
    MissingDistractor,
    TemplateError,
    // provider_gateway
    AuthMissing,
    RateLimited,
    ProviderError,
    Timeout,
    CacheMiss,
    // reasoning_bank
    NotFound,
    // adjudicator
    MissingPrediction,
    UnknownInstance,
    // orchestrator
    InvalidConfig,
    UnknownExemplarId,
    MissingStore,
    EmptyResults,
    Io,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Single exception type for the library. The code is the contract; the
/// message is for humans.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), message_(message) {}

    ErrorCode code() const noexcept { return code_; }
    /// what() without the code prefix.
    const std::string& message() const noexcept { return message_; }

private:
    ErrorCode code_;
    std::string message_;
};

}  // namespace teaser
