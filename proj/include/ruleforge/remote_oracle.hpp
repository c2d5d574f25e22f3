#pragma once

// Chat-completion backed oracle.
//
// Requests are plain OpenAI-style chat completions. Transport failures are
// retried with exponential backoff; unparseable replies are retried without
// delay. A counting semaphore bounds the number of requests in flight.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <mutex>
#include <semaphore>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "ruleforge/oracle.hpp"
#include "ruleforge/prompts.hpp"

namespace ruleforge {

struct ChatMessage {
    std::string role;
    std::string content;
};

struct ChatRequest {
    std::string model;
    std::vector<ChatMessage> messages;
    double temperature = 0;
};

inline json to_json(const ChatRequest& r) {
    json messages = json::array();
    for (const auto& m : r.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
    return json{{"model", r.model}, {"messages", messages}, {"temperature", r.temperature}};
}

class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Sends one chat request and returns the assistant message content.
class ChatTransport {
public:
    virtual ~ChatTransport() = default;
    virtual std::string complete(const ChatRequest& request) = 0;
};

class HttpChatTransport final : public ChatTransport {
public:
    HttpChatTransport(std::string base_url, std::string api_key, std::chrono::seconds timeout = std::chrono::seconds(120))
        : api_key_(std::move(api_key)), timeout_(timeout) {
        // "scheme://host[:port][/prefix]"
        const auto scheme_end = base_url.find("://");
        const auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
        const auto path_start = base_url.find('/', host_start);
        origin_ = base_url.substr(0, path_start);
        prefix_ = path_start == std::string::npos ? "" : base_url.substr(path_start);
        while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
    }

    std::string complete(const ChatRequest& request) override {
        httplib::Client client(origin_);
        client.set_connection_timeout(timeout_);
        client.set_read_timeout(timeout_);
        httplib::Headers headers;
        if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
        auto res = client.Post(prefix_ + "/chat/completions", headers, to_json(request).dump(), "application/json");
        if (!res) throw TransportError("HTTP request failed: " + httplib::to_string(res.error()));
        if (res->status >= 500 || res->status == 429)
            throw TransportError("HTTP status " + std::to_string(res->status));
        if (res->status != 200)
            throw Error(ErrorKind::OracleUnavailable, "HTTP status " + std::to_string(res->status) + ": " + res->body);
        try {
            const auto body = json::parse(res->body);
            return body.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const json::exception& e) {
            throw Error(ErrorKind::MalformedResponse, std::string("chat completion body: ") + e.what());
        }
    }

private:
    std::string origin_;
    std::string prefix_;
    std::string api_key_;
    std::chrono::seconds timeout_;
};

struct RemoteConfig {
    std::string base_url = "http://127.0.0.1:8000/v1";
    std::string model = "deepseek-chat";
    std::size_t max_in_flight = 4;
    /// Extra attempts after the first one.
    std::size_t retry_budget = 3;
    std::chrono::milliseconds backoff{500};
    double generation_temperature = 1.0;
    double scoring_temperature = 0.0;
    /// JSONL transcript of every exchange when non-empty.
    std::string audit_path;
};

class RemoteOracle final : public Oracle {
public:
    RemoteOracle(std::shared_ptr<ChatTransport> transport, TaskSpec task, RemoteConfig config = {})
        : Oracle(std::move(task)), transport_(std::move(transport)), config_(std::move(config)),
          slots_(static_cast<std::ptrdiff_t>(std::max<std::size_t>(1, config_.max_in_flight))) {}

    /// Transport from config; the key comes from RULEFORGE_API_KEY.
    static std::unique_ptr<RemoteOracle> from_config(TaskSpec task, RemoteConfig config) {
        const char* key = std::getenv("RULEFORGE_API_KEY");
        auto transport = std::make_shared<HttpChatTransport>(config.base_url, key ? key : "");
        return std::make_unique<RemoteOracle>(std::move(transport), std::move(task), std::move(config));
    }

    std::size_t max_in_flight() const override { return std::max<std::size_t>(1, config_.max_in_flight); }

    ProposalResult propose_subrules(std::span<const Aspect> existing, std::size_t num,
                                    std::uint64_t variant = 0) override {
        if (num < 1) throw Error(ErrorKind::PreconditionViolation, "num must be at least 1");
        (void)variant;
        ++generation_calls_;
        const auto prompt = prompts::propose(task_, existing, num);
        auto proposals = ask(prompt, config_.generation_temperature, [&](const std::string& reply) {
            std::vector<SubRule> out;
            for (const auto& [aspect, guideline] : response::dimensions(reply)) {
                try {
                    out.emplace_back(Aspect(aspect), Rubric(parse_bands(guideline)));
                } catch (const Error& e) {
                    throw Error(ErrorKind::MalformedResponse, "guideline for '" + aspect + "': " + e.detail());
                }
            }
            return out;
        });
        return accept_proposals(std::move(proposals), existing, num, task_);
    }

    SubRule modify_rubric(const SubRule& sr, Direction direction) override {
        ++generation_calls_;
        return ask(prompts::modify(sr, direction), config_.generation_temperature, [&](const std::string& reply) {
            const auto dims = response::dimensions(reply);
            if (dims.empty()) throw Error(ErrorKind::MalformedResponse, "no guideline in reply");
            try {
                Rubric rubric(parse_bands(dims.front().second), lineage_of(direction), sr.id());
                if (!rubric.covers(task_.score_min, task_.score_max, task_.score_kind))
                    throw Error(ErrorKind::MalformedResponse, "modified guideline does not cover the score range");
                return SubRule(sr.aspect(), std::move(rubric));
            } catch (const Error& e) {
                throw Error(ErrorKind::MalformedResponse, e.detail());
            }
        });
    }

    double score_sample(const LabeledSample& sample, const SubRule& sr) override {
        ++score_calls_;
        return ask(prompts::score_single(sr, task_, sample), config_.scoring_temperature,
                   [&](const std::string& reply) { return clamp_score(response::single_score(reply)); });
    }

    double evaluate_with_rule(const std::string& prompt, const LabeledSample&, const ScoringRule&) override {
        ++score_calls_;
        return ask(prompt, config_.scoring_temperature,
                   [&](const std::string& reply) { return clamp_score(response::single_score(reply)); });
    }

private:
    template <typename Parse>
    auto ask(const std::string& prompt, double temperature, Parse&& parse) -> decltype(parse(std::string{})) {
        ChatRequest request{config_.model, {{"user", prompt}}, temperature};
        std::string last_problem;
        ErrorKind last_kind = ErrorKind::MalformedResponse;
        for (std::size_t attempt = 0; attempt <= config_.retry_budget; ++attempt) {
            std::string reply;
            {
                slots_.acquire();
                struct Release {
                    std::counting_semaphore<1024>& s;
                    ~Release() { s.release(); }
                } release{slots_};
                try {
                    reply = transport_->complete(request);
                } catch (const TransportError& e) {
                    audit(request, nullptr, e.what());
                    last_kind = ErrorKind::OracleUnavailable;
                    last_problem = e.what();
                    if (attempt < config_.retry_budget) std::this_thread::sleep_for(config_.backoff * (1LL << attempt));
                    continue;
                }
            }
            audit(request, &reply, {});
            try {
                return parse(reply);
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::MalformedResponse) throw;
                last_kind = ErrorKind::MalformedResponse;
                last_problem = e.detail();
            }
        }
        throw Error(last_kind, last_problem + " (after " + std::to_string(config_.retry_budget + 1) + " attempts)");
    }

    void audit(const ChatRequest& request, const std::string* reply, const std::string& error) {
        if (config_.audit_path.empty()) return;
        json entry{{"request", to_json(request)}};
        if (reply) entry["response"] = *reply;
        if (!error.empty()) entry["error"] = error;
        std::lock_guard lock(audit_mutex_);
        std::ofstream out(config_.audit_path, std::ios::app);
        out << entry.dump() << "\n";
    }

    std::shared_ptr<ChatTransport> transport_;
    RemoteConfig config_;
    std::counting_semaphore<1024> slots_;
    std::mutex audit_mutex_;
};

} // namespace ruleforge
