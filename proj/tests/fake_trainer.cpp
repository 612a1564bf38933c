// Stand-in for an external trainer speaking the line protocol on stdin/stdout
// or over one TCP connection.
//
//   fake_trainer [--mode ok|bad-id|inconsistent|malformed|reverse|hang-first|hang]
//                [--psnr X] [--tcp-listen PORT]
//
// Without --psnr the reply is 25 + (sum of indices mod 100) / 20.

#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

using json = nlohmann::json;

namespace {

struct Options {
    std::string mode = "ok";
    std::optional<double> psnr;
    std::optional<int> tcp_port;
};

double psnr_for(const json& req, const Options& o) {
    if (o.psnr) return *o.psnr;
    std::uint64_t sum = 0;
    for (const auto& v : req.at("genome")) sum += v.get<std::uint64_t>();
    return 25.0 + static_cast<double>(sum % 100) / 20.0;
}

std::string reply(const json& req, const Options& o) {
    const double p = psnr_for(req, o);
    json r;
    r["id"] = req.at("id").get<std::uint64_t>();
    r["psnr"] = p;
    r["mse"] = std::pow(10.0, -p / 10.0);
    if (o.mode == "bad-id") r["id"] = req.at("id").get<std::uint64_t>() + 1000000;
    if (o.mode == "inconsistent") r["mse"] = 2.0 * std::pow(10.0, -p / 10.0);
    if (o.mode == "malformed") return "{\"id\": " + std::to_string(req.at("id").get<std::uint64_t>()) + ", \"psnr\": ";
    return r.dump();
}

template <class ReadLine, class WriteLine>
void serve(const Options& o, ReadLine read_line, WriteLine write_line) {
    std::vector<json> held;
    bool first = true;
    std::string line;
    while (read_line(line)) {
        if (line.empty()) continue;
        const json req = json::parse(line);
        if (o.mode == "hang") continue;
        if (o.mode == "hang-first" && first) {
            first = false;
            continue;
        }
        if (o.mode == "reverse") {
            held.push_back(req);
            if (held.size() < 2) continue;
            for (auto it = held.rbegin(); it != held.rend(); ++it) write_line(reply(*it, o));
            held.clear();
            continue;
        }
        write_line(reply(req, o));
    }
}

int serve_tcp(const Options& o) {
    const int lfd = ::socket(AF_INET, SOCK_STREAM, 0);
    const int yes = 1;
    ::setsockopt(lfd, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(static_cast<std::uint16_t>(*o.tcp_port));
    if (::bind(lfd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(lfd, 1) != 0) {
        std::perror("bind");
        return 1;
    }
    socklen_t len = sizeof addr;
    ::getsockname(lfd, reinterpret_cast<sockaddr*>(&addr), &len);
    std::printf("%d\n", ntohs(addr.sin_port));
    std::fflush(stdout);
    const int fd = ::accept(lfd, nullptr, nullptr);
    ::close(lfd);
    if (fd < 0) return 1;

    std::string buf;
    auto read_line = [&](std::string& out) {
        for (;;) {
            if (auto nl = buf.find('\n'); nl != std::string::npos) {
                out = buf.substr(0, nl);
                buf.erase(0, nl + 1);
                return true;
            }
            char chunk[4096];
            const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
            if (n <= 0) return false;
            buf.append(chunk, static_cast<std::size_t>(n));
        }
    };
    auto write_line = [&](const std::string& s) {
        const std::string msg = s + "\n";
        ::send(fd, msg.data(), msg.size(), MSG_NOSIGNAL);
    };
    serve(o, read_line, write_line);
    ::close(fd);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    Options o;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--mode" && i + 1 < argc) o.mode = argv[++i];
        else if (a == "--psnr" && i + 1 < argc) o.psnr = std::atof(argv[++i]);
        else if (a == "--tcp-listen" && i + 1 < argc) o.tcp_port = std::atoi(argv[++i]);
        else {
            std::cerr << "unknown argument " << a << "\n";
            return 2;
        }
    }
    if (o.tcp_port) return serve_tcp(o);
    serve(
        o, [](std::string& out) { return static_cast<bool>(std::getline(std::cin, out)); },
        [](const std::string& s) { std::cout << s << std::endl; });
    return 0;
}
