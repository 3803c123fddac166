#ifndef POWERGEAR_VERSION_HPP
#define POWERGEAR_VERSION_HPP

namespace powergear {

inline constexpr const char* kToolVersion = "0.1.0";

// Schema versions of the on-disk formats.
inline constexpr int kDfgSchemaVersion = 1;
inline constexpr int kTraceSchemaVersion = 1;
inline constexpr int kStimuliSchemaVersion = 1;
inline constexpr int kSampleSchemaVersion = 1;
inline constexpr int kMetaSchemaVersion = 1;
inline constexpr int kCheckpointSchemaVersion = 1;

} // namespace powergear

#endif
