#pragma once

#include "mnemo/json_io.hpp"
#include "mnemo/memory.hpp"
#include "mnemo/records.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <string>

// On-disk layout of a memory repository:
//
//   {dir}/manifest            format version, D, provider kind, counts, checksums
//   {dir}/semantic.jsonl      one semantic entry per line
//   {dir}/experiential.jsonl  one experiential entry per line (keys + summary)
//   {dir}/trajectories.jsonl  the raw trajectories behind experiential entries
//
// Embedding keys are written at full round-trip precision so a reloaded store
// answers queries bit-identically. Checksums are FNV-1a 64 over file bytes.
namespace mnemo {

inline constexpr int store_format_version = 1;

namespace detail {

inline Json vector_json(const EmbeddingVector& v) {
    Json a = Json::array();
    for (double x : v.values) a.push_back(x);
    return a;
}

inline EmbeddingVector vector_from_json(const Json& j) {
    if (!j.is_array()) throw Error(ErrorCode::corrupt_store, "key must be an array");
    EmbeddingVector v;
    v.values.reserve(j.size());
    for (const auto& x : j) {
        if (!x.is_number()) throw Error(ErrorCode::corrupt_store, "key element not a number");
        v.values.push_back(x.get<double>());
    }
    return v;
}

inline const char* store_files[] = {"semantic.jsonl", "experiential.jsonl", "trajectories.jsonl"};

} // namespace detail

inline Json persist(const MemoryRepository& repo, const fs::path& dir) {
    const auto snap = repo.snapshot();
    std::map<std::string, std::string> contents;

    std::vector<Json> sem;
    for (const auto& e : snap.semantic) {
        Json j = Json::object();
        j["entry_id"] = e.id.value;
        j["rule"] = e.rule_text;
        j["source_instruction"] = e.source_instruction;
        j["key"] = detail::vector_json(e.key);
        sem.push_back(std::move(j));
    }
    contents["semantic.jsonl"] = join_records(sem, RealFormat::exact);

    std::vector<Json> exp;
    std::vector<Json> trajs;
    for (const auto& e : snap.experiential) {
        Json j = Json::object();
        j["entry_id"] = e.id.value;
        j["trajectory_id"] = e.trajectory.id;
        j["summary"] = e.summary;
        j["success"] = e.success;
        j["intent_key"] = detail::vector_json(e.intent_key);
        j["task_key"] = detail::vector_json(e.task_key);
        exp.push_back(std::move(j));
        trajs.push_back(to_json(e.trajectory));
    }
    contents["experiential.jsonl"] = join_records(exp, RealFormat::exact);
    contents["trajectories.jsonl"] = join_records(trajs, RealFormat::exact);

    fs::create_directories(dir);
    Json files = Json::object();
    for (const char* name : detail::store_files) {
        const auto& body = contents[name];
        write_file_atomic(dir / name, body);
        Json f = Json::object();
        f["bytes"] = body.size();
        f["checksum"] = "fnv1a64:" + hex64(fnv1a64(body));
        files[name] = std::move(f);
    }

    Json manifest = Json::object();
    manifest["format_version"] = store_format_version;
    manifest["dimension"] = repo.dimension();
    manifest["provider"] = std::string(to_string(repo.provider().kind()));
    manifest["next_id"] = snap.next_id;
    Json counts = Json::object();
    counts["semantic"] = snap.semantic.size();
    counts["experiential"] = snap.experiential.size();
    manifest["counts"] = std::move(counts);
    manifest["files"] = std::move(files);
    write_file_atomic(dir / "manifest", dump_record(manifest) + "\n");
    return manifest;
}

// A missing or empty directory loads as an empty repository.
inline std::unique_ptr<MemoryRepository> load(const fs::path& dir,
                                              std::shared_ptr<const EmbeddingProvider> provider) {
    const auto manifest_path = dir / "manifest";
    if (!fs::exists(manifest_path)) {
        for (const char* name : detail::store_files) {
            if (fs::exists(dir / name)) {
                throw Error(ErrorCode::corrupt_store, std::string("manifest missing but ") + name + " present");
            }
        }
        return std::make_unique<MemoryRepository>(std::move(provider));
    }

    Json manifest;
    try {
        manifest = Json::parse(read_file(manifest_path));
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::corrupt_store, std::string("manifest: ") + e.what());
    }
    const auto field = [&](const Json& obj, const char* key) -> const Json& {
        if (!obj.is_object() || !obj.contains(key)) {
            throw Error(ErrorCode::corrupt_store, std::string("manifest missing ") + key);
        }
        return obj.at(key);
    };
    const auto& ver = field(manifest, "format_version");
    if (!ver.is_number_integer() || ver.get<int>() != store_format_version) {
        throw Error(ErrorCode::version_mismatch, "store format_version " + ver.dump());
    }
    const auto& dim = field(manifest, "dimension");
    if (!dim.is_number_unsigned() || dim.get<std::size_t>() != provider->dimension()) {
        throw Error(ErrorCode::dimension_mismatch,
                    "store D=" + dim.dump() + ", provider D=" + std::to_string(provider->dimension()));
    }
    const auto& kind = field(manifest, "provider");
    if (!kind.is_string() || kind.get<std::string>() != to_string(provider->kind())) {
        throw Error(ErrorCode::version_mismatch, "store built with provider " + kind.dump());
    }

    // Verify every file before parsing any of them.
    std::map<std::string, std::string> bodies;
    const auto& files = field(manifest, "files");
    for (const char* name : detail::store_files) {
        const auto& meta = field(files, name);
        auto body = read_file(dir / name);
        const auto& bytes = field(meta, "bytes");
        const auto& sum = field(meta, "checksum");
        if (!bytes.is_number_unsigned() || bytes.get<std::size_t>() != body.size() ||
            !sum.is_string() || sum.get<std::string>() != "fnv1a64:" + hex64(fnv1a64(body))) {
            throw Error(ErrorCode::corrupt_store, std::string("checksum mismatch in ") + name);
        }
        bodies[name] = std::move(body);
    }

    std::map<std::string, std::vector<Json>> records;
    for (const char* name : detail::store_files) {
        try {
            for (const auto& line : split_lines(bodies[name])) records[name].push_back(Json::parse(line));
        } catch (const Json::exception& e) {
            throw Error(ErrorCode::corrupt_store, std::string(name) + ": " + e.what());
        }
    }

    const auto& counts = field(manifest, "counts");
    const auto& next_id = field(manifest, "next_id");
    if (!next_id.is_number_unsigned()) throw Error(ErrorCode::corrupt_store, "next_id");
    if (field(counts, "semantic") != records["semantic.jsonl"].size() ||
        field(counts, "experiential") != records["experiential.jsonl"].size() ||
        records["trajectories.jsonl"].size() != records["experiential.jsonl"].size()) {
        throw Error(ErrorCode::corrupt_store, "entry counts disagree with manifest");
    }

    MemoryRepository::Snapshot snap;
    snap.next_id = next_id.get<std::uint64_t>();
    try {
        for (const auto& j : records["semantic.jsonl"]) {
            SemanticEntry e;
            e.id = EntryId{field(j, "entry_id").get<std::uint64_t>()};
            e.rule_text = field(j, "rule").get<std::string>();
            e.source_instruction = field(j, "source_instruction").get<std::string>();
            e.key = detail::vector_from_json(field(j, "key"));
            snap.semantic.push_back(std::move(e));
        }
        std::map<std::string, Trajectory> by_id;
        for (const auto& j : records["trajectories.jsonl"]) {
            auto rec = trajectory_record_from_json(j);
            by_id.emplace(rec.trajectory.id, std::move(rec.trajectory));
        }
        for (const auto& j : records["experiential.jsonl"]) {
            ExperientialEntry e;
            e.id = EntryId{field(j, "entry_id").get<std::uint64_t>()};
            const auto tid = field(j, "trajectory_id").get<std::string>();
            auto it = by_id.find(tid);
            if (it == by_id.end()) throw Error(ErrorCode::corrupt_store, "unknown trajectory " + tid);
            e.trajectory = it->second;
            e.summary = field(j, "summary").get<std::string>();
            e.success = field(j, "success").get<bool>();
            e.intent_key = detail::vector_from_json(field(j, "intent_key"));
            e.task_key = detail::vector_from_json(field(j, "task_key"));
            snap.experiential.push_back(std::move(e));
        }
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::corrupt_store, e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::corrupt_store) throw;
        throw Error(ErrorCode::corrupt_store, e.what());
    }
    try {
        return MemoryRepository::from_snapshot(std::move(provider), std::move(snap));
    } catch (const Error& e) {
        if (e.code() == ErrorCode::corrupt_store) throw;
        throw Error(ErrorCode::corrupt_store, e.what());
    }
}

} // namespace mnemo
