#pragma once

namespace srpo {

inline constexpr const char* kToolVersion = "0.1.0";

// File schema versions. Loaders reject mismatches instead of migrating.
inline constexpr int kDatasetSchemaVersion = 1;
inline constexpr int kCorpusSchemaVersion = 1;
inline constexpr int kCheckpointSchemaVersion = 1;
inline constexpr int kManifestSchemaVersion = 1;

inline constexpr const char* kDatasetSchemaName = "srpo.dataset";
inline constexpr const char* kCorpusSchemaName = "srpo.corpus";

}  // namespace srpo
