#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "microtune/engine.hpp"
#include "microtune/search_space.hpp"
#include "microtune/trial.hpp"

namespace microtune {

struct LogHeader {
    std::string run_id;
    nlohmann::json spec;  // resolved run spec snapshot; must carry "space"
    Timestamp started_at{};
};

struct LogFooter {
    RunStatus status = RunStatus::Finished;
    Timestamp finished_at{};
    std::string cause;
};

enum class AppendResult { Appended, Duplicate };

/// Single-writer, append-only JSON-Lines log: one header, trials, optional footer.
/// Each record is written with one write(2) and, when `sync` is set, fsync'd.
class TrialLogWriter {
public:
    /// Creates (truncating) the file and writes the header.
    TrialLogWriter(const std::filesystem::path& path, const LogHeader& header, bool sync = true);
    TrialLogWriter(TrialLogWriter&& other) noexcept;
    TrialLogWriter& operator=(TrialLogWriter&&) = delete;
    TrialLogWriter(const TrialLogWriter&) = delete;
    TrialLogWriter& operator=(const TrialLogWriter&) = delete;
    ~TrialLogWriter();

    /// trial_id must be last + 1; resending the last trial verbatim is a no-op.
    /// Throws LogError on out-of-order ids, conflicting duplicates, or I/O failure.
    AppendResult append(const Trial& trial);
    void finish(const LogFooter& footer);

    std::size_t records() const noexcept { return records_; }
    const std::filesystem::path& path() const noexcept { return path_; }

private:
    void write_line(const std::string& line);

    std::filesystem::path path_;
    int fd_ = -1;
    bool sync_ = true;
    std::size_t records_ = 0;
    std::optional<std::uint64_t> last_id_;
    std::string last_payload_;
    bool finished_ = false;
};

struct LoadedLog {
    LogHeader header;
    std::shared_ptr<const SearchSpace> space;
    std::vector<Trial> trials;  // baseline included, trial_id order
    std::optional<LogFooter> footer;
    bool truncated_tail = false;  // an unterminated last line was ignored

    const Trial* baseline() const;
    std::vector<Trial> candidates() const;
};

/// Throws LogError on a missing header, malformed records, ordering violations,
/// or records after the footer. An unterminated final line is skipped.
LoadedLog load_trial_log(const std::filesystem::path& path);

}  // namespace microtune
