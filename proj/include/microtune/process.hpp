#pragma once

#include <chrono>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <sys/types.h>

namespace microtune {

/// Searches PATH for bare names; names containing '/' must exist and be executable.
std::optional<std::string> resolve_executable(const std::string& name);

/// Child process in its own process group, stdin from /dev/null and output
/// appended to `log_path` (or discarded). Killed with its group on destruction.
class ChildProcess {
public:
    using Environment = std::map<std::string, std::string>;

    /// Returns nullopt when the program could not be started.
    static std::optional<ChildProcess> spawn(const std::vector<std::string>& argv,
                                             const Environment& env,
                                             const std::string& log_path = {});

    ChildProcess(ChildProcess&& other) noexcept;
    ChildProcess& operator=(ChildProcess&& other) noexcept;
    ChildProcess(const ChildProcess&) = delete;
    ChildProcess& operator=(const ChildProcess&) = delete;
    ~ChildProcess();

    pid_t pid() const noexcept { return pid_; }
    bool running();
    /// Exit status once exited; signals map to 128 + signo.
    std::optional<int> exit_code();
    /// Waits until exit or deadline; nullopt on deadline.
    std::optional<int> wait_until(std::chrono::steady_clock::time_point deadline);
    /// SIGTERM to the group, then SIGKILL after `grace`; reaps the child.
    void terminate(std::chrono::milliseconds grace = std::chrono::milliseconds(2000));

private:
    explicit ChildProcess(pid_t pid) : pid_(pid) {}
    void poll();

    pid_t pid_ = -1;
    std::optional<int> status_;
};

/// Runs to completion with a deadline; returns the exit code or nullopt on
/// spawn failure or timeout (the process group is killed).
std::optional<int> run_to_completion(const std::vector<std::string>& argv,
                                     const ChildProcess::Environment& env,
                                     std::chrono::steady_clock::time_point deadline,
                                     const std::string& log_path = {});

/// Current process environment as a map.
ChildProcess::Environment inherited_environment();

}  // namespace microtune
