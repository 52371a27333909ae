#include "microtune/trial_log.hpp"

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fcntl.h>
#include <unistd.h>

#include "microtune/errors.hpp"

namespace microtune {

using nlohmann::json;

namespace {

json header_to_json(const LogHeader& h) {
    return {{"kind", "header"},
            {"run_id", h.run_id},
            {"spec", h.spec},
            {"started_at", format_timestamp(h.started_at)}};
}

json footer_to_json(const LogFooter& f) {
    json j{{"kind", "footer"},
           {"status", to_string(f.status)},
           {"finished_at", format_timestamp(f.finished_at)}};
    if (!f.cause.empty())
        j["cause"] = f.cause;
    return j;
}

std::string errno_text() {
    return std::strerror(errno);
}

}  // namespace

TrialLogWriter::TrialLogWriter(const std::filesystem::path& path, const LogHeader& header,
                               bool sync)
    : path_(path), sync_(sync) {
    if (!header.spec.is_object() || !header.spec.contains("space"))
        throw LogError("log header spec must contain the search space");
    if (path_.has_parent_path())
        std::filesystem::create_directories(path_.parent_path());
    fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_APPEND | O_CLOEXEC, 0644);
    if (fd_ < 0)
        throw LogError("cannot open trial log '" + path_.string() + "': " + errno_text());
    write_line(header_to_json(header).dump());
}

TrialLogWriter::TrialLogWriter(TrialLogWriter&& other) noexcept
    : path_(std::move(other.path_)),
      fd_(std::exchange(other.fd_, -1)),
      sync_(other.sync_),
      records_(other.records_),
      last_id_(other.last_id_),
      last_payload_(std::move(other.last_payload_)),
      finished_(other.finished_) {}

TrialLogWriter::~TrialLogWriter() {
    if (fd_ >= 0)
        ::close(fd_);
}

void TrialLogWriter::write_line(const std::string& line) {
    std::string buf = line;
    buf += '\n';
    const char* p = buf.data();
    std::size_t left = buf.size();
    while (left > 0) {
        const ssize_t n = ::write(fd_, p, left);
        if (n < 0) {
            if (errno == EINTR)
                continue;
            throw LogError("write to '" + path_.string() + "' failed: " + errno_text());
        }
        p += n;
        left -= static_cast<std::size_t>(n);
    }
    if (sync_ && ::fsync(fd_) != 0)
        throw LogError("fsync of '" + path_.string() + "' failed: " + errno_text());
    ++records_;
}

AppendResult TrialLogWriter::append(const Trial& trial) {
    if (finished_)
        throw LogError("trial log already has a footer");
    std::string payload = json{{"kind", "trial"}, {"trial", trial_to_json(trial)}}.dump();
    if (last_id_ && trial.trial_id == *last_id_) {
        if (payload == last_payload_)
            return AppendResult::Duplicate;
        throw LogError("conflicting duplicate of trial " + std::to_string(trial.trial_id));
    }
    if (last_id_ && trial.trial_id != *last_id_ + 1)
        throw LogError("out-of-order trial id " + std::to_string(trial.trial_id) + " after " +
                       std::to_string(*last_id_));
    write_line(payload);
    last_id_ = trial.trial_id;
    last_payload_ = std::move(payload);
    return AppendResult::Appended;
}

void TrialLogWriter::finish(const LogFooter& footer) {
    if (finished_)
        throw LogError("trial log already has a footer");
    write_line(footer_to_json(footer).dump());
    finished_ = true;
}

const Trial* LoadedLog::baseline() const {
    for (const auto& t : trials) {
        if (t.baseline)
            return &t;
    }
    return nullptr;
}

std::vector<Trial> LoadedLog::candidates() const {
    std::vector<Trial> out;
    for (const auto& t : trials) {
        if (!t.baseline)
            out.push_back(t);
    }
    return out;
}

LoadedLog load_trial_log(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw LogError("cannot open trial log '" + path.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string content = buf.str();

    LoadedLog log;
    bool have_header = false;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < content.size()) {
        auto nl = content.find('\n', pos);
        const bool terminated = nl != std::string::npos;
        const std::string line = content.substr(pos, terminated ? nl - pos : std::string::npos);
        pos = terminated ? nl + 1 : content.size();
        ++line_no;
        if (line.empty())
            continue;

        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::parse_error&) {
            if (!terminated) {
                log.truncated_tail = true;
                break;
            }
            throw LogError(path.string() + ":" + std::to_string(line_no) + ": malformed record");
        }
        const std::string where = path.string() + ":" + std::to_string(line_no) + ": ";
        try {
            const auto kind = rec.at("kind").get<std::string>();
            if (log.footer)
                throw LogError(where + "record after footer");
            if (kind == "header") {
                if (have_header)
                    throw LogError(where + "second header");
                have_header = true;
                log.header.run_id = rec.at("run_id").get<std::string>();
                log.header.spec = rec.at("spec");
                log.header.started_at = parse_timestamp(rec.at("started_at").get<std::string>());
                log.space = std::make_shared<const SearchSpace>(parse_space(log.header.spec.at("space")));
            } else if (!have_header) {
                throw LogError(where + "record before header");
            } else if (kind == "trial") {
                Trial t = trial_from_json(rec.at("trial"), *log.space);
                if (!log.trials.empty() && t.trial_id != log.trials.back().trial_id + 1)
                    throw LogError(where + "trial ids not strictly sequential");
                log.trials.push_back(std::move(t));
            } else if (kind == "footer") {
                LogFooter f;
                f.status = run_status_from_string(rec.at("status").get<std::string>());
                f.finished_at = parse_timestamp(rec.at("finished_at").get<std::string>());
                f.cause = rec.value("cause", "");
                log.footer = f;
            } else {
                throw LogError(where + "unknown record kind '" + kind + "'");
            }
        } catch (const json::exception& e) {
            throw LogError(where + e.what());
        } catch (const SpaceError& e) {
            throw LogError(where + e.what());
        }
    }
    if (!have_header)
        throw LogError("trial log '" + path.string() + "' has no header");
    return log;
}

}  // namespace microtune
