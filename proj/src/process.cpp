#include "microtune/process.hpp"

#include <csignal>
#include <cstdlib>
#include <cstring>
#include <thread>
#include <utility>

#include <fcntl.h>
#include <spawn.h>
#include <sys/stat.h>
#include <sys/wait.h>
#include <unistd.h>

extern char** environ;

namespace microtune {

namespace {

bool is_executable_file(const std::string& path) {
    struct stat st {};
    return ::stat(path.c_str(), &st) == 0 && S_ISREG(st.st_mode) &&
           ::access(path.c_str(), X_OK) == 0;
}

int decode_status(int status) {
    if (WIFEXITED(status))
        return WEXITSTATUS(status);
    if (WIFSIGNALED(status))
        return 128 + WTERMSIG(status);
    return -1;
}

constexpr auto kPollInterval = std::chrono::milliseconds(5);

}  // namespace

std::optional<std::string> resolve_executable(const std::string& name) {
    if (name.empty())
        return std::nullopt;
    if (name.find('/') != std::string::npos)
        return is_executable_file(name) ? std::optional<std::string>(name) : std::nullopt;
    const char* path = std::getenv("PATH");
    std::string dirs = path ? path : "/usr/local/bin:/usr/bin:/bin";
    std::size_t begin = 0;
    while (begin <= dirs.size()) {
        auto end = dirs.find(':', begin);
        if (end == std::string::npos)
            end = dirs.size();
        std::string dir = dirs.substr(begin, end - begin);
        if (dir.empty())
            dir = ".";
        std::string candidate = dir + "/" + name;
        if (is_executable_file(candidate))
            return candidate;
        begin = end + 1;
    }
    return std::nullopt;
}

ChildProcess::Environment inherited_environment() {
    ChildProcess::Environment env;
    for (char** e = environ; e && *e; ++e) {
        std::string entry(*e);
        auto eq = entry.find('=');
        if (eq != std::string::npos)
            env[entry.substr(0, eq)] = entry.substr(eq + 1);
    }
    return env;
}

std::optional<ChildProcess> ChildProcess::spawn(const std::vector<std::string>& argv,
                                                const Environment& env,
                                                const std::string& log_path) {
    if (argv.empty())
        return std::nullopt;
    auto exe = resolve_executable(argv[0]);
    if (!exe)
        return std::nullopt;

    std::vector<char*> args;
    for (const auto& a : argv)
        args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);

    std::vector<std::string> env_strings;
    for (const auto& [k, v] : env)
        env_strings.push_back(k + "=" + v);
    std::vector<char*> envp;
    for (auto& s : env_strings)
        envp.push_back(s.data());
    envp.push_back(nullptr);

    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_addopen(&actions, STDIN_FILENO, "/dev/null", O_RDONLY, 0);
    const std::string out = log_path.empty() ? "/dev/null" : log_path;
    posix_spawn_file_actions_addopen(&actions, STDOUT_FILENO, out.c_str(),
                                     O_WRONLY | O_CREAT | O_APPEND, 0644);
    posix_spawn_file_actions_adddup2(&actions, STDOUT_FILENO, STDERR_FILENO);

    posix_spawnattr_t attr;
    posix_spawnattr_init(&attr);
    posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP);
    posix_spawnattr_setpgroup(&attr, 0);

    pid_t pid = -1;
    const int rc = ::posix_spawn(&pid, exe->c_str(), &actions, &attr, args.data(), envp.data());
    posix_spawn_file_actions_destroy(&actions);
    posix_spawnattr_destroy(&attr);
    if (rc != 0)
        return std::nullopt;
    return ChildProcess(pid);
}

ChildProcess::ChildProcess(ChildProcess&& other) noexcept
    : pid_(std::exchange(other.pid_, -1)), status_(other.status_) {}

ChildProcess& ChildProcess::operator=(ChildProcess&& other) noexcept {
    if (this != &other) {
        if (pid_ > 0 && !status_)
            terminate();
        pid_ = std::exchange(other.pid_, -1);
        status_ = other.status_;
    }
    return *this;
}

ChildProcess::~ChildProcess() {
    if (pid_ > 0)
        terminate();
}

void ChildProcess::poll() {
    if (pid_ <= 0 || status_)
        return;
    int status = 0;
    const pid_t r = ::waitpid(pid_, &status, WNOHANG);
    if (r == pid_)
        status_ = decode_status(status);
    else if (r < 0)
        status_ = -1;
}

bool ChildProcess::running() {
    poll();
    return pid_ > 0 && !status_;
}

std::optional<int> ChildProcess::exit_code() {
    poll();
    return status_;
}

std::optional<int> ChildProcess::wait_until(std::chrono::steady_clock::time_point deadline) {
    for (;;) {
        poll();
        if (status_)
            return status_;
        if (std::chrono::steady_clock::now() >= deadline)
            return std::nullopt;
        std::this_thread::sleep_for(kPollInterval);
    }
}

void ChildProcess::terminate(std::chrono::milliseconds grace) {
    if (pid_ <= 0)
        return;
    // The group may outlive the leader (e.g. a shell's background children).
    ::kill(-pid_, SIGTERM);
    if (!wait_until(std::chrono::steady_clock::now() + grace))
        ::kill(-pid_, SIGKILL);
    ::kill(-pid_, SIGKILL);
    if (!status_) {
        int status = 0;
        if (::waitpid(pid_, &status, 0) == pid_)
            status_ = decode_status(status);
    }
}

std::optional<int> run_to_completion(const std::vector<std::string>& argv,
                                     const ChildProcess::Environment& env,
                                     std::chrono::steady_clock::time_point deadline,
                                     const std::string& log_path) {
    auto child = ChildProcess::spawn(argv, env, log_path);
    if (!child)
        return std::nullopt;
    auto code = child->wait_until(deadline);
    if (!code)
        child->terminate(std::chrono::milliseconds(200));
    return code;
}

}  // namespace microtune
