#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <string>

#include <json.hpp>

#include "cellnas/errors.hpp"
#include "cellnas/external_evaluator.hpp"

using namespace cellnas;

namespace {

std::string trainer(const std::string& args) { return std::string(FAKE_TRAINER_PATH) + " " + args; }

std::unique_ptr<ExternalEvaluator> spawn(const std::string& args, double timeout = 10.0) {
    ExternalEndpoint ep;
    ep.command = trainer(args);
    ep.timeout_seconds = timeout;
    return ExternalEvaluator::connect(ep, SpaceConfig{});
}

const Genome kG{12, 0, 85, 191, 3, 3, 77};

}  // namespace

TEST_CASE("request encoding") {
    const auto j = nlohmann::json::parse(encode_request(5, kG, SpaceConfig{}));
    CHECK(j["id"] == 5);
    CHECK(j["genome"].get<std::vector<std::uint32_t>>() == kG.cells);
    CHECK(j["arch"] == describe(kG));
    CHECK(j["scale"] == 2);
}

TEST_CASE("response decoding") {
    const auto r = decode_response(R"({"id": 3, "psnr": 30.0, "mse": 0.001})", kG);
    CHECK(r.id == 3);
    CHECK(r.psnr == 30.0);
    CHECK_THROWS_AS(decode_response(R"({"id": 3, "psnr": 30.0, "mse": 0.002})", kG), ProtocolError);
    CHECK_THROWS_AS(decode_response(R"({"id": 3, "psnr": 30.0})", kG), ProtocolError);
    CHECK_THROWS_AS(decode_response(R"({"id": -1, "psnr": 30.0, "mse": 0.001})", kG), ProtocolError);
    CHECK_THROWS_AS(decode_response("{\"id\": 3, ", kG), ProtocolError);
    CHECK_THROWS_AS(decode_response(R"({"id": 3, "psnr": "x", "mse": 0.001})", kG), ProtocolError);
    try {
        decode_response("garbage", kG);
    } catch (const ProtocolError& e) {
        CHECK(e.genome() == kG.cells);
    }
}

TEST_CASE("subprocess trainer") {
    auto ev = spawn("--psnr 30");
    const auto r = ev->evaluate(kG);
    CHECK(r.psnr == 30.0);
    CHECK(r.mse == doctest::Approx(0.001).epsilon(1e-12));
    CHECK(r.source == EvalSource::External);
    CHECK(r.quality_measured);
    const auto cost = cost_of(kG, SpaceConfig{});
    CHECK(r.params == cost.params);
    CHECK(r.multi_adds == cost.multi_adds);
    CHECK(ev->requests_sent() == 1);
    CHECK_THROWS_AS(ev->evaluate(Genome{1, 2}), DomainError);
}

TEST_CASE("out of order replies are matched by id") {
    auto ev = spawn("--mode reverse");
    std::vector<Genome> gs;
    for (std::uint32_t i = 0; i < 8; ++i) gs.push_back(Genome{i, i, i, i, i, i, i});
    const auto results = dispatch_generation(gs, 4, *ev);
    for (std::uint32_t i = 0; i < 8; ++i) {
        const double expect = 25.0 + static_cast<double>((7 * i) % 100) / 20.0;
        CHECK(results[i].psnr == doctest::Approx(expect));
    }
}

TEST_CASE("protocol violations") {
    SUBCASE("unknown id") {
        auto ev = spawn("--mode bad-id");
        CHECK_THROWS_AS(ev->evaluate(kG), ProtocolError);
        // The channel stays poisoned.
        CHECK_THROWS_AS(ev->evaluate(kG), ProtocolError);
    }
    SUBCASE("inconsistent psnr and mse") {
        auto ev = spawn("--mode inconsistent");
        CHECK_THROWS_AS(ev->evaluate(kG), ProtocolError);
    }
    SUBCASE("malformed line") {
        auto ev = spawn("--mode malformed");
        CHECK_THROWS_AS(ev->evaluate(kG), ProtocolError);
    }
    SUBCASE("peer exits") {
        ExternalEndpoint ep;
        ep.command = "exit 0";
        auto ev = ExternalEvaluator::connect(ep, SpaceConfig{});
        CHECK_THROWS_AS(ev->evaluate(kG), EvaluationError);
    }
    SUBCASE("no endpoint") { CHECK_THROWS_AS(ExternalEvaluator::connect(ExternalEndpoint{}, SpaceConfig{}), ConfigError); }
}

TEST_CASE("timeouts") {
    SUBCASE("one timeout is retried under a new id") {
        auto ev = spawn("--mode hang-first --psnr 28", 0.5);
        const auto r = ev->evaluate(kG);
        CHECK(r.quality_measured);
        CHECK(r.psnr == 28.0);
        CHECK(ev->requests_sent() == 2);
        CHECK(ev->timeouts() == 1);
    }
    SUBCASE("two timeouts give an unmeasured result") {
        auto ev = spawn("--mode hang", 0.3);
        const auto r = ev->evaluate(kG);
        CHECK_FALSE(r.quality_measured);
        CHECK(r.psnr == 0.0);
        CHECK(r.mse == 1.0);
        CHECK(r.params == cost_of(kG, SpaceConfig{}).params);
        CHECK(ev->timeouts() == 2);
    }
}

TEST_CASE("tcp trainer") {
    FILE* proc = ::popen(trainer("--tcp-listen 0 --psnr 31").c_str(), "r");
    REQUIRE(proc != nullptr);
    int port = 0;
    REQUIRE(std::fscanf(proc, "%d", &port) == 1);
    {
        ExternalEndpoint ep;
        ep.tcp_address = "127.0.0.1:" + std::to_string(port);
        ep.timeout_seconds = 10;
        auto ev = ExternalEvaluator::connect(ep, SpaceConfig{});
        const auto r = ev->evaluate(kG);
        CHECK(r.psnr == 31.0);
        CHECK(r.mse == doctest::Approx(std::pow(10.0, -3.1)));
    }
    ::pclose(proc);
    CHECK_THROWS_AS(connect_tcp_channel("no-port"), EvaluationError);
}
