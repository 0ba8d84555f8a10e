#pragma once

#include <stdexcept>
#include <string>

namespace askdetect {

/// Base of every error raised by the library. Callers that only need to
/// distinguish "bad input" from programming errors can catch this.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// email-ingest
class MalformedMime : public Error { using Error::Error; };
class NoBody : public Error { using Error::Error; };

// annotation-model
class SchemaError : public Error { using Error::Error; };
class GraphError : public Error { using Error::Error; };

// lexicon-store
class LexiconError : public Error { using Error::Error; };
class MissingFile : public LexiconError { using LexiconError::LexiconError; };
class ManifestMismatch : public LexiconError { using LexiconError::LexiconError; };
class MalformedCluster : public LexiconError { using LexiconError::LexiconError; };
class DeltaError : public LexiconError { using LexiconError::LexiconError; };
class RemoveMissing : public DeltaError { using DeltaError::DeltaError; };
class AddExisting : public DeltaError { using DeltaError::DeltaError; };

// eval-harness
class AlignmentError : public Error { using Error::Error; };
class LengthMismatch : public Error { using Error::Error; };

}  // namespace askdetect
