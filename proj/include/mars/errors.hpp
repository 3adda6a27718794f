#pragma once

#include <stdexcept>
#include <string>

namespace mars {

// Base class for every error raised by the toolkit. Catch this at the CLI
// boundary; catch the concrete types where the distinction matters.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// taxonomy
class UnknownQuestionType : public Error { public: using Error::Error; };
class UnknownErrorType : public Error { public: using Error::Error; };
class UnknownVariantKind : public Error { public: using Error::Error; };
class EmptyTopics : public Error { public: using Error::Error; };

// payload parsing (diagnosis & synthesis)
class MalformedPayload : public Error { public: using Error::Error; };
class SchemaViolation : public Error { public: using Error::Error; };
class AllDiagnosesFailed : public Error { public: using Error::Error; };

// allocation
class EmptyInput : public Error { public: using Error::Error; };
class MixedKeys : public Error { public: using Error::Error; };

// synthesis / hybrid
class NoEnhancements : public Error { public: using Error::Error; };
class MissingPrompt : public Error { public: using Error::Error; };
class EmptyDataset : public Error { public: using Error::Error; };

// strategy harness
class UnknownStrategy : public Error { public: using Error::Error; };
class EmptyCompletion : public Error { public: using Error::Error; };

// gateway; these map to exit code 2 at the CLI
class ProviderExhausted : public Error { public: using Error::Error; };
class Timeout : public ProviderExhausted { public: using ProviderExhausted::ProviderExhausted; };
class RateLimited : public ProviderExhausted { public: using ProviderExhausted::ProviderExhausted; };
class ProviderError : public ProviderExhausted { public: using ProviderExhausted::ProviderExhausted; };
class MockExhausted : public ProviderExhausted { public: using ProviderExhausted::ProviderExhausted; };

// reporting / files
class InsufficientData : public Error { public: using Error::Error; };
class NoFailures : public Error { public: using Error::Error; };
class ValidationError : public Error { public: using Error::Error; };

} // namespace mars
