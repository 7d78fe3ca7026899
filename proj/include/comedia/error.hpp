#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace comedia {

enum class ErrorKind {
    NetworkUnreachable,
    UnknownCorpus,
    HttpFailure,
    CacheWriteFailure,
    MalformedResponse,
    XmlParse,
    MissingCastList,
    UnknownCharacter,
    RatiosNotNormalized,
    EmptyCorpus,
    InvalidArgument,
    IdOutOfRange,
    EmptySequence,
    EmptyTrainSet,
    VersionMismatch,
    DigestMismatch,
    TruncatedFile,
    EmptyInput,
    ZeroProbability,
    TooFewCharacters,
    MisalignedAttribution,
    CharacterNotFound,
    SceneIndexMismatch,
    ConfigInvalid,
    Io,
};

std::string_view to_string(ErrorKind kind);

/// Single exception type for the toolkit; `kind()` lets callers branch on
/// the failure class without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), message_(message) {}

    ErrorKind kind() const noexcept { return kind_; }
    /// The message without the kind prefix.
    const std::string& message() const noexcept { return message_; }

private:
    ErrorKind kind_;
    std::string message_;
};

}  // namespace comedia
