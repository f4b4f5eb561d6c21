#include "teaser/error.hpp"

namespace teaser {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::MalformedRecord: return "MalformedRecord";
        case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
        case ErrorCode::DuplicateId: return "DuplicateId";
        case ErrorCode::VariantConflict: return "VariantConflict";
        case ErrorCode::ProviderUnavailable: return "ProviderUnavailable";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::ZeroVector: return "ZeroVector";
        case ErrorCode::EmptyStore: return "EmptyStore";
        case ErrorCode::ProviderTagMismatch: return "ProviderTagMismatch";
        case ErrorCode::EmptyChoices: return "EmptyChoices";
        case ErrorCode::InvalidStrategy: return "InvalidStrategy";
        case ErrorCode::ShotMismatch: return "ShotMismatch";
        case ErrorCode::SubtaskMismatch: return "SubtaskMismatch";
        case ErrorCode::MissingReasoning: return "MissingReasoning";
        case ErrorCode::MissingDistractor: return "MissingDistractor";
        case ErrorCode::TemplateError: return "TemplateError";
        case ErrorCode::AuthMissing: return "AuthMissing";
        case ErrorCode::RateLimited: return "RateLimited";
        case ErrorCode::ProviderError: return "ProviderError";
        case ErrorCode::Timeout: return "Timeout";
        case ErrorCode::CacheMiss: return "CacheMiss";
        case ErrorCode::NotFound: return "NotFound";
        case ErrorCode::MissingPrediction: return "MissingPrediction";
        case ErrorCode::UnknownInstance: return "UnknownInstance";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::UnknownExemplarId: return "UnknownExemplarId";
        case ErrorCode::MissingStore: return "MissingStore";
        case ErrorCode::EmptyResults: return "EmptyResults";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

}  // namespace teaser
