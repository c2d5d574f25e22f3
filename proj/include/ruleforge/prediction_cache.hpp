#pragma once

// Persistent (sample, sub-rule) -> score store. Because a rule's prediction
// is the plain mean of its sub-rule scores, extending a cached rule by one
// sub-rule only costs one oracle call per sample.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ruleforge/dataset.hpp"
#include "ruleforge/error.hpp"
#include "ruleforge/oracle.hpp"
#include "ruleforge/rule_model.hpp"

namespace ruleforge {

struct PredictionRecord {
    std::string sample_id;
    SubRuleId subrule_id;
    double score = 0;
    /// Logical timestamp: insertion sequence number within the store.
    std::uint64_t created_at = 0;

    friend bool operator==(const PredictionRecord&, const PredictionRecord&) = default;
};

inline json to_json(const PredictionRecord& r) {
    return json{{"sample_id", r.sample_id}, {"subrule_id", r.subrule_id.value}, {"score", r.score},
                {"created_at", r.created_at}};
}

class PredictionCache {
public:
    using Key = std::pair<std::string, std::string>;

    PredictionCache() = default;
    PredictionCache(const PredictionCache&) = delete;
    PredictionCache& operator=(const PredictionCache&) = delete;

    /// Cached score, or one oracle call whose result is stored. Concurrent
    /// callers for the same cold key share a single oracle call. Failures
    /// are not cached.
    double get_or_score(const LabeledSample& sample, const SubRule& sr, Oracle& oracle) {
        Key key{sample.sample_id, sr.id().value};
        std::shared_future<double> pending;
        std::shared_ptr<std::promise<double>> owner;
        {
            std::lock_guard lock(mutex_);
            if (auto it = records_.find(key); it != records_.end()) {
                ++hits_;
                return it->second.score;
            }
            if (auto it = inflight_.find(key); it != inflight_.end()) {
                ++hits_;
                pending = it->second;
            } else {
                ++oracle_calls_;
                owner = std::make_shared<std::promise<double>>();
                pending = owner->get_future().share();
                inflight_.emplace(key, pending);
            }
        }
        if (!owner) return pending.get();

        try {
            const double score = oracle.score_sample(sample, sr);
            PredictionRecord rec;
            {
                std::lock_guard lock(mutex_);
                rec = PredictionRecord{key.first, sr.id(), score, next_timestamp_++};
                records_.emplace(key, rec);
                inflight_.erase(key);
            }
            journal(rec);
            owner->set_value(score);
            return score;
        } catch (...) {
            {
                std::lock_guard lock(mutex_);
                inflight_.erase(key);
            }
            owner->set_exception(std::current_exception());
            throw;
        }
    }

    std::optional<double> lookup(const std::string& sample_id, const SubRuleId& id) const {
        std::lock_guard lock(mutex_);
        auto it = records_.find(Key{sample_id, id.value});
        if (it == records_.end()) return std::nullopt;
        return it->second.score;
    }

    void insert(PredictionRecord rec) {
        std::lock_guard lock(mutex_);
        next_timestamp_ = std::max(next_timestamp_, rec.created_at + 1);
        Key key{rec.sample_id, rec.subrule_id.value};
        records_.insert_or_assign(std::move(key), std::move(rec));
    }

    std::size_t size() const {
        std::lock_guard lock(mutex_);
        return records_.size();
    }

    std::uint64_t hits() const noexcept { return hits_.load(); }
    std::uint64_t oracle_calls() const noexcept { return oracle_calls_.load(); }

    /// Consistent copy of all records ordered by (sample_id, subrule_id).
    std::vector<PredictionRecord> snapshot() const {
        std::lock_guard lock(mutex_);
        std::vector<PredictionRecord> out;
        out.reserve(records_.size());
        for (const auto& [k, v] : records_) out.push_back(v);
        return out;
    }

    std::map<Key, double> scores() const {
        std::lock_guard lock(mutex_);
        std::map<Key, double> out;
        for (const auto& [k, v] : records_) out.emplace(k, v.score);
        return out;
    }

    /// Write a snapshot as JSONL (one record per line). Written to a
    /// temporary file first, then renamed into place.
    void persist(const std::filesystem::path& path) const {
        const auto records = snapshot();
        const auto tmp = path.string() + ".tmp";
        {
            std::ofstream out(tmp, std::ios::trunc);
            if (!out) throw Error(ErrorKind::ConfigError, "cannot write cache '" + path.string() + "'");
            for (const auto& r : records) out << to_json(r).dump() << "\n";
        }
        std::filesystem::rename(tmp, path);
    }

    /// Load records from a store file. Records before a corrupt line stay
    /// loaded; the corrupt line is reported with its 1-based number.
    void restore(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw Error(ErrorKind::CorruptStore, "cannot open '" + path.string() + "'");
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            try {
                const auto j = json::parse(line);
                insert(PredictionRecord{j.at("sample_id").get<std::string>(),
                                        SubRuleId{j.at("subrule_id").get<std::string>()}, j.at("score").get<double>(),
                                        j.at("created_at").get<std::uint64_t>()});
            } catch (const json::exception& e) {
                throw Error(ErrorKind::CorruptStore, e.what(), line_no);
            }
        }
    }

    /// Append each newly scored record to `path` as it is produced.
    void set_journal(const std::filesystem::path& path) {
        std::lock_guard lock(journal_mutex_);
        journal_.open(path, std::ios::app);
        if (!journal_) throw Error(ErrorKind::ConfigError, "cannot open journal '" + path.string() + "'");
    }

private:
    void journal(const PredictionRecord& rec) {
        std::lock_guard lock(journal_mutex_);
        if (journal_.is_open()) journal_ << to_json(rec).dump() << "\n" << std::flush;
    }

    mutable std::mutex mutex_;
    std::map<Key, PredictionRecord> records_;
    std::map<Key, std::shared_future<double>> inflight_;
    std::uint64_t next_timestamp_ = 0;
    std::atomic<std::uint64_t> hits_{0};
    std::atomic<std::uint64_t> oracle_calls_{0};

    std::mutex journal_mutex_;
    std::ofstream journal_;
};

} // namespace ruleforge
