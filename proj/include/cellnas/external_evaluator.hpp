#pragma once

#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>

#include "cellnas/evaluation.hpp"

namespace cellnas {

/// Bidirectional newline-delimited text stream.
class LineChannel {
public:
    virtual ~LineChannel() = default;
    /// Writes `line` plus '\n'. Throws EvaluationError if the peer is gone.
    virtual void write_line(const std::string& line) = 0;
    /// Blocks for the next line; nullopt on end of stream.
    virtual std::optional<std::string> read_line() = 0;
    /// Unblocks a pending read_line and releases the peer.
    virtual void shutdown() = 0;
};

/// Runs `command` through /bin/sh with its stdin/stdout connected to the channel.
std::unique_ptr<LineChannel> spawn_process_channel(const std::string& command);

/// Connects to "host:port".
std::unique_ptr<LineChannel> connect_tcp_channel(const std::string& address);

struct ExternalEndpoint {
    std::string command;      ///< subprocess command line, or
    std::string tcp_address;  ///< "host:port"
    double timeout_seconds = 3600.0;

    friend bool operator==(const ExternalEndpoint&, const ExternalEndpoint&) = default;
};

/// Request line: {"id":u64,"genome":[u32...],"arch":"<labels>","scale":s}
std::string encode_request(std::uint64_t id, const Genome& genome, const SpaceConfig& space);

struct EvalResponse {
    std::uint64_t id = 0;
    double psnr = 0.0;
    double mse = 0.0;
};

/// Parses and validates a response line ({"id","psnr","mse"}, |mse - 10^(-psnr/10)| <= 1e-6 relative).
EvalResponse decode_response(const std::string& line, const Genome& genome);

/// Client for an external trainer. Requests from concurrent callers share the
/// channel; responses are matched by id and may arrive in any order. A request
/// that times out is re-sent once under a new id; a second timeout yields an
/// unmeasured result rather than an error.
class ExternalEvaluator final : public Evaluator {
public:
    ExternalEvaluator(std::unique_ptr<LineChannel> channel, SpaceConfig space, double timeout_seconds = 3600.0);
    ~ExternalEvaluator() override;

    ExternalEvaluator(const ExternalEvaluator&) = delete;
    ExternalEvaluator& operator=(const ExternalEvaluator&) = delete;

    static std::unique_ptr<ExternalEvaluator> connect(const ExternalEndpoint& endpoint, const SpaceConfig& space);

    EvalResult evaluate(const Genome& genome) override;

    std::uint64_t requests_sent() const;
    std::uint64_t timeouts() const;

private:
    enum class Wait { Ok, TimedOut };
    struct Pending {
        std::optional<std::string> line;
    };

    Wait request(const Genome& genome, std::string& response_line, std::uint64_t& id);
    void reader_loop();

    std::unique_ptr<LineChannel> channel_;
    SpaceConfig space_;
    double timeout_seconds_;

    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::map<std::uint64_t, Pending> pending_;
    std::set<std::uint64_t> abandoned_;
    std::optional<std::string> fatal_;  ///< set once the stream is broken
    std::uint64_t next_id_ = 1;
    std::uint64_t sent_ = 0;
    std::uint64_t timeouts_ = 0;
    std::mutex write_mu_;
    std::thread reader_;
};

}  // namespace cellnas
