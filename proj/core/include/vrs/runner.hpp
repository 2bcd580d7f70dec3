#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "vrs/errors.hpp"
#include "vrs/experiment.hpp"

namespace vrs {

struct RunnerOptions {
    std::optional<BackendKind> backend;  // run(): default Simulated; resume(): from header
    std::optional<std::filesystem::path> record_store;  // wrap the backend in Record mode
    std::optional<std::filesystem::path> replay_store;  // Replay-mode source
    std::optional<std::uint64_t> seed_override;
    std::optional<int> parallelism_override;
    int throttle_ms = 0;  // sleep before each backend call (rate limiting)
    std::optional<std::filesystem::path> templates_dir;
};

struct RunSummary {
    std::filesystem::path run_dir;
    std::string spec_sha256;
    int cells_total = 0;
    int cells_skipped = 0;  // already complete in the log (resume)
    int cells_failed = 0;
    SweepOutputs outputs;

    bool complete() const { return cells_failed == 0; }
};

/// Another live runner already owns the run directory.
struct RunnerLocked : Error {
    using Error::Error;
};

/// Resume refused because the spec file changed under the run.
struct SpecHashMismatch : Error {
    using Error::Error;
};

class Runner {
public:
    /// Execute `spec` into a fresh run directory: copies the spec text,
    /// writes the log header, runs every cell, and emits the result
    /// CSVs. `spec_text` is the exact spec-file bytes; its sha256 is
    /// embedded in the log header and all outputs.
    static RunSummary run(const ExperimentSpec& spec, const std::string& spec_text,
                          const std::filesystem::path& out_dir, const RunnerOptions& options);

    /// Continue a possibly interrupted run directory. Completed
    /// (cell, sample-index) pairs are reused from the log; only the
    /// missing work is executed.
    static RunSummary resume(const std::filesystem::path& out_dir,
                             const RunnerOptions& options);
};

/// Rough upper bound on backend calls for the live-cost guard.
std::int64_t estimate_query_count(const ExperimentSpec& spec);

}  // namespace vrs
