#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mnemo {

enum class ErrorCode {
    invalid_geometry,
    missing_field,
    unexpected_field,
    invalid_observation,
    invalid_trajectory,
    empty_input,
    remote_unavailable,
    dimension_mismatch,
    non_monotonic_step,
    duplicate_entry,
    empty_trajectory,
    invalid_lambda,
    corrupt_store,
    version_mismatch,
    missing_tag,
    malformed_answer,
    invalid_action,
    invalid_weights,
    inconsistent_ground_truth,
    empty_sequence,
    invalid_log_prob,
    out_of_range,
    length_mismatch,
    insufficient_pool,
    unknown_task,
    episode_finished,
    policy_output_unparseable,
    invalid_environment,
    usage_error,
    invalid_config,
    unknown_fixture,
    checksum_mismatch,
    malformed_record,
    io_error,
};

constexpr std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::invalid_geometry: return "InvalidGeometry";
        case ErrorCode::missing_field: return "MissingField";
        case ErrorCode::unexpected_field: return "UnexpectedField";
        case ErrorCode::invalid_observation: return "InvalidObservation";
        case ErrorCode::invalid_trajectory: return "InvalidTrajectory";
        case ErrorCode::empty_input: return "EmptyInput";
        case ErrorCode::remote_unavailable: return "RemoteUnavailable";
        case ErrorCode::dimension_mismatch: return "DimensionMismatch";
        case ErrorCode::non_monotonic_step: return "NonMonotonicStep";
        case ErrorCode::duplicate_entry: return "DuplicateEntry";
        case ErrorCode::empty_trajectory: return "EmptyTrajectory";
        case ErrorCode::invalid_lambda: return "InvalidLambda";
        case ErrorCode::corrupt_store: return "CorruptStore";
        case ErrorCode::version_mismatch: return "VersionMismatch";
        case ErrorCode::missing_tag: return "MissingTag";
        case ErrorCode::malformed_answer: return "MalformedAnswer";
        case ErrorCode::invalid_action: return "InvalidAction";
        case ErrorCode::invalid_weights: return "InvalidWeights";
        case ErrorCode::inconsistent_ground_truth: return "InconsistentGroundTruth";
        case ErrorCode::empty_sequence: return "EmptySequence";
        case ErrorCode::invalid_log_prob: return "InvalidLogProb";
        case ErrorCode::out_of_range: return "OutOfRange";
        case ErrorCode::length_mismatch: return "LengthMismatch";
        case ErrorCode::insufficient_pool: return "InsufficientPool";
        case ErrorCode::unknown_task: return "UnknownTask";
        case ErrorCode::episode_finished: return "EpisodeFinished";
        case ErrorCode::policy_output_unparseable: return "PolicyOutputUnparseable";
        case ErrorCode::invalid_environment: return "InvalidEnvironment";
        case ErrorCode::usage_error: return "UsageError";
        case ErrorCode::invalid_config: return "InvalidConfig";
        case ErrorCode::unknown_fixture: return "UnknownFixture";
        case ErrorCode::checksum_mismatch: return "ChecksumMismatch";
        case ErrorCode::malformed_record: return "MalformedRecord";
        case ErrorCode::io_error: return "IoError";
    }
    return "Unknown";
}

// Every failure in the library surfaces as this exception. The message has the
// form "Kind(detail)" so callers and the CLI can print it verbatim.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, std::string detail)
        : std::runtime_error(format(code, detail)), code_(code), detail_(std::move(detail)) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    static std::string format(ErrorCode code, const std::string& detail) {
        std::string out(to_string(code));
        if (!detail.empty()) {
            out += '(';
            out += detail;
            out += ')';
        }
        return out;
    }

    ErrorCode code_;
    std::string detail_;
};

} // namespace mnemo
