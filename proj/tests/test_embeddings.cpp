#include "support.hpp"

#include <gtest/gtest.h>

#include <thread>

using namespace mnemo;
using mnemo::testing::widget;

TEST(Hashing, MatchesIndependentOracle) {
    const auto fx = load_fixture_as<HashingVectors>("hashing-vectors");
    ASSERT_FALSE(fx.vectors.empty());
    for (const auto& v : fx.vectors) {
        const HashingEmbedder e(v.dimension);
        const auto got = embed_text(e, v.input);
        ASSERT_EQ(got.dimension(), v.dimension);
        // Integer counts divided by one square root: bit-identical across implementations.
        EXPECT_EQ(got.values, v.values) << "input: " << v.input << " D=" << v.dimension;
    }
    for (const auto& p : fx.pairs) {
        const HashingEmbedder e(p.value("dimension", std::size_t{256}));
        const double c = cosine_similarity(embed_text(e, p.at("a").get<std::string>()),
                                           embed_text(e, p.at("b").get<std::string>()));
        EXPECT_NEAR(c, p.at("cosine").get<double>(), 1e-12);
    }
}

TEST(Hashing, UnitNormAndDeterministic) {
    const HashingEmbedder e;
    EXPECT_EQ(e.dimension(), 256u);
    for (const char* s : {"a", "Open the Settings application", "日本語のテキスト", "x\xFFy"}) {
        const auto v = embed_text(e, s);
        EXPECT_NEAR(v.norm(), 1.0, 1e-12) << s;
        EXPECT_EQ(v, embed_text(HashingEmbedder(256), s));
    }
}

TEST(Hashing, AsciiCaseFolding) {
    const HashingEmbedder e;
    EXPECT_EQ(embed_text(e, "SETTINGS"), embed_text(e, "settings"));
    EXPECT_NE(embed_text(e, "ÉTÉ"), embed_text(e, "été"));
}

TEST(Hashing, EmptyTextRejected) {
    const HashingEmbedder e;
    try {
        embed_text(e, "");
        FAIL();
    } catch (const Error& err) {
        EXPECT_EQ(err.code(), ErrorCode::empty_input);
    }
    EXPECT_THROW(HashingEmbedder(0), Error);
}

TEST(Hashing, ObservationUsesWidgetsNotScreenId) {
    const HashingEmbedder e;
    Observation a{"gmail", {widget("x", "button", "Compose", {0, 0, 0.1, 0.1})}, std::nullopt};
    Observation b = a;
    b.screen_id = "different";
    b.widgets[0].box = BoundingBox{0.5, 0.5, 0.6, 0.6};
    EXPECT_EQ(embed_observation(e, a), embed_observation(e, b));
    b.widgets[0].label = "Inbox";
    EXPECT_NE(embed_observation(e, a), embed_observation(e, b));
    EXPECT_TRUE(embed_observation(e, Observation{"bare", {}, std::nullopt}).is_zero());
    EXPECT_EQ(observation_feature_text(a), "button Compose");
}

TEST(Cosine, EdgeCases) {
    const EmbeddingVector a{{1, 0, 0}}, b{{0, 2, 0}}, z{{0, 0, 0}};
    EXPECT_EQ(cosine_similarity(a, b), 0.0);
    EXPECT_EQ(cosine_similarity(a, a.scaled(7)), 1.0);
    EXPECT_EQ(cosine_similarity(a, a.scaled(-1)), -1.0);
    EXPECT_EQ(cosine_similarity(a, z), 0.0);
    EXPECT_THROW(cosine_similarity(a, EmbeddingVector{{1, 0}}), Error);
    EXPECT_EQ(normalized(z), z);
}

namespace {

// In-process embedding service used to exercise the remote client.
class FakeService {
public:
    explicit FakeService(std::size_t dim) : dim_(dim) {
        server_.Post("/v1/embed", [this](const httplib::Request& req, httplib::Response& res) {
            ++calls;
            const auto body = Json::parse(req.body);
            last_kind = body.at("kind").get<std::string>();
            last_content = body.at("content").get<std::string>();
            if (last_content == "fail") {
                res.status = 503;
                return;
            }
            Json v = Json::array();
            const std::size_t n = last_content == "short" ? dim_ - 1 : dim_;
            for (std::size_t i = 0; i < n; ++i) v.push_back(static_cast<double>(i + 1));
            Json out = Json::object();
            out["vector"] = v;
            res.set_content(out.dump(), "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~FakeService() {
        server_.stop();
        thread_.join();
    }

    std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

    std::atomic<int> calls{0};
    std::string last_kind;
    std::string last_content;

private:
    std::size_t dim_;
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

} // namespace

TEST(Remote, RoundTripAgainstLocalService) {
    FakeService svc(4);
    const RemoteEmbedder e(svc.endpoint(), 4, std::chrono::seconds(5));
    EXPECT_EQ(e.kind(), ProviderKind::remote);
    const auto v = embed_text(e, "Open Settings");
    EXPECT_EQ(svc.last_kind, "text");
    EXPECT_EQ(svc.last_content, "Open Settings");
    ASSERT_EQ(v.dimension(), 4u);
    EXPECT_NEAR(v.norm(), 1.0, 1e-12);
    EXPECT_NEAR(v.values[3], 4.0 / std::sqrt(30.0), 1e-15);

    Observation o{"s", {widget("w", "button", "OK", {0, 0, 0.5, 0.5})}, std::nullopt};
    embed_observation(e, o);
    EXPECT_EQ(svc.last_kind, "observation");
    EXPECT_EQ(Json::parse(svc.last_content)["screen_id"], "s");
}

TEST(Remote, FailuresAreTyped) {
    FakeService svc(4);
    const RemoteEmbedder e(svc.endpoint(), 4, std::chrono::seconds(5));
    try {
        embed_text(e, "fail");
        FAIL();
    } catch (const Error& err) {
        EXPECT_EQ(err.code(), ErrorCode::remote_unavailable);
    }
    try {
        embed_text(e, "short");
        FAIL();
    } catch (const Error& err) {
        EXPECT_EQ(err.code(), ErrorCode::dimension_mismatch);
    }
    const RemoteEmbedder dead("http://127.0.0.1:1", 4, std::chrono::milliseconds(300));
    try {
        embed_text(dead, "x");
        FAIL();
    } catch (const Error& err) {
        EXPECT_EQ(err.code(), ErrorCode::remote_unavailable);
    }
}

TEST(Remote, BacksAMemoryRepository) {
    FakeService svc(8);
    auto provider = std::make_shared<RemoteEmbedder>(svc.endpoint(), 8);
    MemoryRepository repo(provider);
    repo.add_semantic_entry("rule", "source task");
    EXPECT_EQ(repo.retrieve_semantic(Instruction{"query"}, 1).size(), 1u);
    EXPECT_GE(svc.calls.load(), 2);
}
