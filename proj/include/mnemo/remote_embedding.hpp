#pragma once

#include "mnemo/embeddings.hpp"
#include "mnemo/error.hpp"
#include "mnemo/json_io.hpp"
#include "mnemo/records.hpp"

#include <httplib.h>

#include <chrono>
#include <string>

// Client for an external embedding service.
//
//   POST {endpoint}/embed   {"kind":"text"|"observation","content":<string>}
//   200                     {"vector":[<D reals>]}
//
// Observations travel as the compact JSON of their record form. Any transport
// failure or non-200 status is RemoteUnavailable; a vector of the wrong length
// is DimensionMismatch. Each call opens its own connection, so concurrent
// requests are independent.
namespace mnemo {

class RemoteEmbedder final : public EmbeddingProvider {
public:
    explicit RemoteEmbedder(std::string endpoint, std::size_t dimension = default_embedding_dimension,
                            std::chrono::milliseconds timeout = std::chrono::seconds(10))
        : endpoint_(std::move(endpoint)), dimension_(dimension), timeout_(timeout) {
        if (dimension_ == 0) throw Error(ErrorCode::dimension_mismatch, "D must be > 0");
        while (!endpoint_.empty() && endpoint_.back() == '/') endpoint_.pop_back();
        const auto scheme = endpoint_.find("://");
        const auto slash = endpoint_.find('/', scheme == std::string::npos ? 0 : scheme + 3);
        if (slash == std::string::npos) {
            host_ = endpoint_;
        } else {
            host_ = endpoint_.substr(0, slash);
            prefix_ = endpoint_.substr(slash);
        }
    }

    ProviderKind kind() const noexcept override { return ProviderKind::remote; }
    std::size_t dimension() const noexcept override { return dimension_; }
    const std::string& endpoint() const noexcept { return endpoint_; }

    EmbeddingVector embed_text_impl(std::string_view text) const override { return request("text", text); }

    EmbeddingVector embed_observation_impl(const Observation& o) const override {
        return request("observation", dump_record(to_json(o), RealFormat::exact));
    }

private:
    EmbeddingVector request(std::string_view kind, std::string_view content) const {
        Json body = Json::object();
        body["kind"] = kind;
        body["content"] = content;

        httplib::Client cli(host_);
        const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
        const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - secs);
        cli.set_connection_timeout(secs.count(), usecs.count());
        cli.set_read_timeout(secs.count(), usecs.count());
        cli.set_write_timeout(secs.count(), usecs.count());

        auto res = cli.Post(prefix_ + "/embed", body.dump(), "application/json");
        if (!res) {
            throw Error(ErrorCode::remote_unavailable, endpoint_ + ": " + httplib::to_string(res.error()));
        }
        if (res->status != 200) {
            throw Error(ErrorCode::remote_unavailable, endpoint_ + ": HTTP " + std::to_string(res->status));
        }
        Json reply;
        try {
            reply = Json::parse(res->body);
        } catch (const Json::exception& e) {
            throw Error(ErrorCode::remote_unavailable, std::string("bad response: ") + e.what());
        }
        const auto it = reply.find("vector");
        if (!reply.is_object() || it == reply.end() || !it->is_array()) {
            throw Error(ErrorCode::remote_unavailable, "response lacks a vector");
        }
        EmbeddingVector v;
        v.values.reserve(it->size());
        for (const auto& x : *it) {
            if (!x.is_number() || !std::isfinite(x.get<double>())) {
                throw Error(ErrorCode::remote_unavailable, "non-numeric vector element");
            }
            v.values.push_back(x.get<double>());
        }
        if (v.dimension() != dimension_) {
            throw Error(ErrorCode::dimension_mismatch,
                        "remote returned " + std::to_string(v.dimension()) + ", expected " + std::to_string(dimension_));
        }
        return normalized(std::move(v));
    }

    std::string endpoint_;
    std::string host_;
    std::string prefix_;
    std::size_t dimension_;
    std::chrono::milliseconds timeout_;
};

} // namespace mnemo
