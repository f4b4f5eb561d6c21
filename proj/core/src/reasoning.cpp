#include "teaser/reasoning.hpp"

#include <atomic>
#include <fstream>
#include <thread>

#include "teaser/error.hpp"
#include "teaser/jsonl.hpp"
#include "timestamp.hpp"

namespace teaser {

namespace fs = std::filesystem;

nlohmann::json ReasoningRecord::to_json() const {
    nlohmann::json j = {{"instance_id", instance_id},
                        {"generator_tag", generator_tag},
                        {"reasoning_text", reasoning_text},
                        {"status", status == ReasoningStatus::ok ? "ok" : "failed"},
                        {"created_at", created_at}};
    if (!error.empty()) j["error"] = error;
    return j;
}

ReasoningRecord ReasoningRecord::from_json(const nlohmann::json& j) {
    ReasoningRecord r;
    try {
        r.instance_id = j.at("instance_id").get<std::string>();
        r.generator_tag = j.at("generator_tag").get<std::string>();
        r.reasoning_text = j.value("reasoning_text", std::string());
        const std::string status = j.value("status", std::string("ok"));
        if (status == "ok") {
            r.status = ReasoningStatus::ok;
        } else if (status == "failed") {
            r.status = ReasoningStatus::failed;
        } else {
            throw Error(ErrorCode::MalformedRecord, "unknown reasoning status '" + status + "'");
        }
        r.created_at = j.value("created_at", std::string());
        r.error = j.value("error", std::string());
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedRecord, std::string("reasoning record: ") + e.what());
    }
    if (r.status == ReasoningStatus::ok && r.reasoning_text.empty()) {
        throw Error(ErrorCode::MalformedRecord, "ok reasoning record for " + r.instance_id + " has no text");
    }
    return r;
}

ReasoningStore ReasoningStore::load(const fs::path& path) {
    ReasoningStore store;
    jsonl::for_each(
        path, [&](std::size_t, const nlohmann::json& obj) { store.put(ReasoningRecord::from_json(obj)); },
        /*tolerate_torn_tail=*/true);
    return store;
}

ReasoningStore ReasoningStore::open(const fs::path& path) {
    ReasoningStore store = fs::exists(path) ? load(path) : ReasoningStore{};
    store.log_path_ = path;
    return store;
}

bool ReasoningStore::put(ReasoningRecord record) {
    if (record.status == ReasoningStatus::ok && record.reasoning_text.empty()) {
        throw Error(ErrorCode::MalformedRecord, "ok reasoning record for " + record.instance_id + " has no text");
    }
    Key key{record.instance_id, record.generator_tag};
    auto it = records_.find(key);
    if (it != records_.end() && it->second.status == ReasoningStatus::ok &&
        record.status == ReasoningStatus::failed) {
        return false;
    }
    if (log_path_) {
        if (log_path_->has_parent_path()) fs::create_directories(log_path_->parent_path());
        std::ofstream out(*log_path_, std::ios::app | std::ios::binary);
        if (!out) throw Error(ErrorCode::Io, "cannot append to " + log_path_->string());
        out << record.to_json().dump() << '\n';
    }
    records_.insert_or_assign(std::move(key), std::move(record));
    return true;
}

const ReasoningRecord* ReasoningStore::find(std::string_view instance_id, std::string_view generator_tag) const {
    auto it = records_.find(Key{std::string(instance_id), std::string(generator_tag)});
    return it == records_.end() ? nullptr : &it->second;
}

bool ReasoningStore::has_ok(std::string_view instance_id, std::string_view generator_tag) const {
    const ReasoningRecord* r = find(instance_id, generator_tag);
    return r != nullptr && r->status == ReasoningStatus::ok;
}

void ReasoningStore::save(const fs::path& path) const {
    std::vector<nlohmann::json> rows;
    rows.reserve(records_.size());
    for (const auto& [_, rec] : records_) rows.push_back(rec.to_json());
    jsonl::write_all(path, rows);
}

const std::string& get_reasoning(const ReasoningStore& store, std::string_view instance_id,
                                 std::string_view generator_tag) {
    const ReasoningRecord* r = store.find(instance_id, generator_tag);
    const std::string key = std::string(instance_id) + " / " + std::string(generator_tag);
    if (r == nullptr) throw Error(ErrorCode::NotFound, "never generated: " + key);
    if (r->status == ReasoningStatus::failed) throw Error(ErrorCode::NotFound, "generation failed: " + key);
    return r->reasoning_text;
}

ReasoningBuildStats build_reasoning_store(const DatasetSplit& split, ProviderGateway& gateway,
                                          const std::string& generator_tag, ReasoningStore& store,
                                          const ReasoningBuildOptions& options) {
    gateway.check_auth();

    ReasoningBuildStats stats;
    std::vector<const PuzzleInstance*> todo;
    for (const auto& inst : split.instances) {
        if (store.has_ok(inst.id, generator_tag)) {
            ++stats.skipped;
        } else {
            todo.push_back(&inst);
        }
    }
    stats.attempted = todo.size();

    std::mutex store_mu;
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> ok{0};
    std::atomic<std::size_t> failed{0};
    std::exception_ptr fatal;
    std::atomic<bool> abort{false};

    auto record_result = [&](ReasoningRecord rec) {
        (rec.status == ReasoningStatus::ok ? ok : failed)++;
        std::lock_guard lock(store_mu);
        store.put(std::move(rec));
    };

    auto worker = [&] {
        for (;;) {
            if (abort) return;
            const std::size_t i = next++;
            if (i >= todo.size()) return;
            const PuzzleInstance& inst = *todo[i];
            ReasoningRecord rec{inst.id, generator_tag, {}, ReasoningStatus::failed, detail::utc_timestamp(), {}};
            try {
                const RenderedPrompt prompt = render_reasoning_request(inst);
                Completion c = gateway.generate(prompt, options.params);
                if (c.text.empty()) {
                    rec.error = "empty generation";
                } else if (c.text.size() > options.max_length) {
                    rec.error = "generation of " + std::to_string(c.text.size()) + " characters exceeds limit " +
                                std::to_string(options.max_length);
                } else {
                    rec.status = ReasoningStatus::ok;
                    rec.reasoning_text = std::move(c.text);
                }
            } catch (const Error& e) {
                if (e.code() == ErrorCode::AuthMissing) {
                    std::lock_guard lock(store_mu);
                    if (!fatal) fatal = std::current_exception();
                    abort = true;
                    return;
                }
                rec.error = e.what();
            }
            record_result(std::move(rec));
        }
    };

    const std::size_t n_workers = std::max<std::size_t>(1, std::min(options.workers, todo.size()));
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    }
    if (fatal) std::rethrow_exception(fatal);
    stats.ok = ok;
    stats.failed = failed;
    return stats;
}

std::size_t import_reasoning(const fs::path& file, const std::string& generator_tag, ReasoningStore& store) {
    std::size_t imported = 0;
    jsonl::for_each(file, [&](std::size_t line_no, const nlohmann::json& obj) {
        ReasoningRecord rec;
        try {
            rec.instance_id = obj.at("instance_id").get<std::string>();
            rec.reasoning_text = obj.at("reasoning_text").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::MalformedRecord, file.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
        if (rec.reasoning_text.empty()) {
            throw Error(ErrorCode::MalformedRecord,
                        file.string() + ":" + std::to_string(line_no) + ": empty reasoning_text");
        }
        rec.generator_tag = generator_tag;
        rec.status = ReasoningStatus::ok;
        rec.created_at = obj.value("created_at", detail::utc_timestamp());
        store.put(std::move(rec));
        ++imported;
    });
    return imported;
}

void require_reasoning(const ReasoningStore& store, std::span<const std::string> instance_ids,
                       std::string_view generator_tag) {
    for (const auto& id : instance_ids) get_reasoning(store, id, generator_tag);
}

}  // namespace teaser
