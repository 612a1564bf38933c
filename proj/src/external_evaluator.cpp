#include "cellnas/external_evaluator.hpp"

#include <arpa/inet.h>
#include <csignal>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fcntl.h>
#include <netdb.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "cellnas/errors.hpp"

namespace cellnas {

namespace {

using nlohmann::json;

/// Buffered line reader/writer over raw file descriptors.
class FdChannel : public LineChannel {
public:
    FdChannel(int read_fd, int write_fd) : read_fd_(read_fd), write_fd_(write_fd) {}

    ~FdChannel() override { close_fds(); }

    void write_line(const std::string& line) override {
        std::string buf = line + '\n';
        const char* p = buf.data();
        std::size_t left = buf.size();
        while (left > 0) {
            const ssize_t w = write_some(p, left);
            if (w < 0) {
                if (errno == EINTR) continue;
                throw EvaluationError(std::string("evaluator channel write failed: ") + std::strerror(errno), {});
            }
            p += w;
            left -= static_cast<std::size_t>(w);
        }
    }

    std::optional<std::string> read_line() override {
        for (;;) {
            if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
                std::string line = buffer_.substr(0, nl);
                buffer_.erase(0, nl + 1);
                if (!line.empty() && line.back() == '\r') line.pop_back();
                return line;
            }
            char chunk[4096];
            const ssize_t r = ::read(read_fd_, chunk, sizeof chunk);
            if (r < 0 && errno == EINTR) continue;
            if (r <= 0) return std::nullopt;
            buffer_.append(chunk, static_cast<std::size_t>(r));
        }
    }

protected:
    virtual ssize_t write_some(const char* p, std::size_t n) { return ::write(write_fd_, p, n); }

    void close_fds() {
        if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
        if (read_fd_ >= 0) ::close(read_fd_);
        read_fd_ = write_fd_ = -1;
    }

    int read_fd_;
    int write_fd_;
    std::string buffer_;
};

class ProcessChannel final : public FdChannel {
public:
    ProcessChannel(int read_fd, int write_fd, pid_t pid) : FdChannel(read_fd, write_fd), pid_(pid) {}

    ~ProcessChannel() override {
        shutdown();
        reap();
    }

    void shutdown() override {
        if (pid_ <= 0 || closed_) return;
        closed_ = true;
        if (write_fd_ >= 0) {
            ::close(write_fd_);
            write_fd_ = -1;
        }
        // Give the child a moment to exit on EOF, then force it.
        for (int i = 0; i < 50; ++i) {
            if (::waitpid(pid_, nullptr, WNOHANG) == pid_) {
                pid_ = -1;
                return;
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(10));
        }
        ::kill(pid_, SIGKILL);
    }

private:
    void reap() {
        if (pid_ > 0) {
            ::waitpid(pid_, nullptr, 0);
            pid_ = -1;
        }
    }

    pid_t pid_;
    bool closed_ = false;
};

class SocketChannel final : public FdChannel {
public:
    explicit SocketChannel(int fd) : FdChannel(fd, fd) {}
    void shutdown() override {
        if (read_fd_ >= 0) ::shutdown(read_fd_, SHUT_RDWR);
    }

protected:
    ssize_t write_some(const char* p, std::size_t n) override { return ::send(write_fd_, p, n, MSG_NOSIGNAL); }
};

}  // namespace

std::unique_ptr<LineChannel> spawn_process_channel(const std::string& command) {
    int to_child[2], from_child[2];
    if (::pipe2(to_child, O_CLOEXEC) != 0) throw EvaluationError("pipe() failed", {});
    if (::pipe2(from_child, O_CLOEXEC) != 0) {
        ::close(to_child[0]);
        ::close(to_child[1]);
        throw EvaluationError("pipe() failed", {});
    }
    const pid_t pid = ::fork();
    if (pid < 0) throw EvaluationError("fork() failed", {});
    if (pid == 0) {
        ::dup2(to_child[0], STDIN_FILENO);
        ::dup2(from_child[1], STDOUT_FILENO);
        ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    // A dead child must surface as a write error, not terminate the process.
    std::signal(SIGPIPE, SIG_IGN);
    return std::make_unique<ProcessChannel>(from_child[0], to_child[1], pid);
}

std::unique_ptr<LineChannel> connect_tcp_channel(const std::string& address) {
    const auto colon = address.rfind(':');
    if (colon == std::string::npos) throw EvaluationError("tcp address must be host:port, got '" + address + "'", {});
    const std::string host = address.substr(0, colon);
    const std::string port = address.substr(colon + 1);
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res); rc != 0)
        throw EvaluationError("cannot resolve " + address + ": " + ::gai_strerror(rc), {});
    int fd = -1;
    for (addrinfo* ai = res; ai; ai = ai->ai_next) {
        fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
        ::close(fd);
        fd = -1;
    }
    ::freeaddrinfo(res);
    if (fd < 0) throw EvaluationError("cannot connect to " + address, {});
    return std::make_unique<SocketChannel>(fd);
}

std::string encode_request(std::uint64_t id, const Genome& genome, const SpaceConfig& space) {
    json j;
    j["id"] = id;
    j["genome"] = genome.cells;
    j["arch"] = describe(genome);
    j["scale"] = space.scale;
    return j.dump();
}

EvalResponse decode_response(const std::string& line, const Genome& genome) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        throw ProtocolError("malformed evaluator response: " + std::string(e.what()), genome.cells);
    }
    auto number = [&](const char* key) {
        if (!j.is_object() || !j.contains(key) || !j[key].is_number())
            throw ProtocolError(std::string("evaluator response lacks numeric '") + key + "'", genome.cells);
        return j[key].get<double>();
    };
    if (!j.is_object() || !j.contains("id") || !j["id"].is_number_unsigned())
        throw ProtocolError("evaluator response lacks unsigned 'id'", genome.cells);
    EvalResponse r;
    r.id = j["id"].get<std::uint64_t>();
    r.psnr = number("psnr");
    r.mse = number("mse");
    if (!std::isfinite(r.psnr) || !std::isfinite(r.mse) || !(r.mse > 0.0))
        throw ProtocolError("evaluator response psnr/mse must be finite with mse > 0", genome.cells);
    const double expected = mse_from_psnr(r.psnr);
    if (std::abs(r.mse - expected) > 1e-6 * expected)
        throw ProtocolError("evaluator response inconsistent: psnr " + std::to_string(r.psnr) + " implies mse " +
                                std::to_string(expected) + " but mse is " + std::to_string(r.mse),
                            genome.cells);
    return r;
}

ExternalEvaluator::ExternalEvaluator(std::unique_ptr<LineChannel> channel, SpaceConfig space, double timeout_seconds)
    : channel_(std::move(channel)), space_(space), timeout_seconds_(timeout_seconds) {
    reader_ = std::thread([this] { reader_loop(); });
}

ExternalEvaluator::~ExternalEvaluator() {
    channel_->shutdown();
    if (reader_.joinable()) reader_.join();
}

std::unique_ptr<ExternalEvaluator> ExternalEvaluator::connect(const ExternalEndpoint& endpoint,
                                                              const SpaceConfig& space) {
    std::unique_ptr<LineChannel> ch;
    if (!endpoint.tcp_address.empty()) {
        ch = connect_tcp_channel(endpoint.tcp_address);
    } else if (!endpoint.command.empty()) {
        ch = spawn_process_channel(endpoint.command);
    } else {
        throw ConfigError("external backend needs either 'command' or 'tcp'");
    }
    return std::make_unique<ExternalEvaluator>(std::move(ch), space, endpoint.timeout_seconds);
}

void ExternalEvaluator::reader_loop() {
    for (;;) {
        std::optional<std::string> line = channel_->read_line();
        std::lock_guard lock(mu_);
        if (!line) {
            if (!fatal_) fatal_ = "evaluator closed the stream";
            cv_.notify_all();
            return;
        }
        std::uint64_t id = 0;
        bool has_id = false;
        try {
            const json j = json::parse(*line);
            if (j.is_object() && j.contains("id") && j["id"].is_number_unsigned()) {
                id = j["id"].get<std::uint64_t>();
                has_id = true;
            }
        } catch (const json::exception&) {
        }
        if (!has_id) {
            fatal_ = "malformed evaluator response: " + line->substr(0, 200);
        } else if (auto it = pending_.find(id); it != pending_.end()) {
            it->second.line = std::move(*line);
        } else if (abandoned_.erase(id) == 0) {
            fatal_ = "evaluator response with unknown id " + std::to_string(id);
        }
        cv_.notify_all();
    }
}

ExternalEvaluator::Wait ExternalEvaluator::request(const Genome& genome, std::string& response_line,
                                                   std::uint64_t& id) {
    {
        std::lock_guard lock(mu_);
        if (fatal_) throw ProtocolError(*fatal_, genome.cells);
        id = next_id_++;
        pending_.emplace(id, Pending{});
        ++sent_;
    }
    try {
        std::lock_guard wlock(write_mu_);
        channel_->write_line(encode_request(id, genome, space_));
    } catch (...) {
        std::lock_guard lock(mu_);
        pending_.erase(id);
        throw;
    }
    std::unique_lock lock(mu_);
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_seconds_);
    const bool ready = cv_.wait_until(lock, deadline, [&] { return pending_.at(id).line.has_value() || fatal_; });
    auto node = pending_.extract(id);
    if (ready && node.mapped().line) {
        response_line = std::move(*node.mapped().line);
        return Wait::Ok;
    }
    if (fatal_) throw ProtocolError(*fatal_, genome.cells);
    abandoned_.insert(id);
    ++timeouts_;
    return Wait::TimedOut;
}

EvalResult ExternalEvaluator::evaluate(const Genome& genome) {
    validate_genome(genome, space_);
    const CostReport cost = cost_of(genome, space_);
    for (int attempt = 0; attempt < 2; ++attempt) {
        std::string line;
        std::uint64_t id = 0;
        if (request(genome, line, id) == Wait::TimedOut) continue;
        const EvalResponse resp = decode_response(line, genome);
        if (resp.id != id) throw ProtocolError("evaluator response id mismatch", genome.cells);
        EvalResult r;
        r.psnr = resp.psnr;
        r.mse = resp.mse;
        r.multi_adds = cost.multi_adds;
        r.params = cost.params;
        r.source = EvalSource::External;
        return r;
    }
    return unmeasured_result(cost, EvalSource::External);
}

std::uint64_t ExternalEvaluator::requests_sent() const {
    std::lock_guard lock(mu_);
    return sent_;
}

std::uint64_t ExternalEvaluator::timeouts() const {
    std::lock_guard lock(mu_);
    return timeouts_;
}

}  // namespace cellnas
