#include "comedia/error.hpp"

namespace comedia {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::NetworkUnreachable: return "network-unreachable";
        case ErrorKind::UnknownCorpus: return "unknown-corpus";
        case ErrorKind::HttpFailure: return "http-failure";
        case ErrorKind::CacheWriteFailure: return "cache-write-failure";
        case ErrorKind::MalformedResponse: return "malformed-response";
        case ErrorKind::XmlParse: return "xml-parse-error";
        case ErrorKind::MissingCastList: return "missing-cast-list";
        case ErrorKind::UnknownCharacter: return "unknown-character";
        case ErrorKind::RatiosNotNormalized: return "ratios-not-normalized";
        case ErrorKind::EmptyCorpus: return "empty-corpus";
        case ErrorKind::InvalidArgument: return "invalid-argument";
        case ErrorKind::IdOutOfRange: return "id-out-of-range";
        case ErrorKind::EmptySequence: return "empty-sequence";
        case ErrorKind::EmptyTrainSet: return "empty-train-set";
        case ErrorKind::VersionMismatch: return "version-mismatch";
        case ErrorKind::DigestMismatch: return "digest-mismatch";
        case ErrorKind::TruncatedFile: return "truncated-file";
        case ErrorKind::EmptyInput: return "empty-input";
        case ErrorKind::ZeroProbability: return "zero-probability";
        case ErrorKind::TooFewCharacters: return "too-few-characters";
        case ErrorKind::MisalignedAttribution: return "misaligned-attribution";
        case ErrorKind::CharacterNotFound: return "character-not-found";
        case ErrorKind::SceneIndexMismatch: return "scene-index-mismatch";
        case ErrorKind::ConfigInvalid: return "config-invalid";
        case ErrorKind::Io: return "io-error";
    }
    return "unknown";
}

}  // namespace comedia
