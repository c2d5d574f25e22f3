#pragma once

// Domain types for aspects, rubrics, sub-rules and scoring rules.
//
// A sub-rule pairs an evaluation aspect with a banded rubric. A scoring rule
// is a set of sub-rules whose aspects are pairwise distinct; it is the state
// the search explores. All types are immutable values once constructed.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <compare>
#include <cstdint>
#include <iomanip>
#include <optional>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ruleforge/error.hpp"
#include "ruleforge/hashing.hpp"

namespace ruleforge {

using json = nlohmann::json;

enum class ScoreKind { Integer, Real };

/// Lowercase, trim and collapse internal whitespace runs to one space.
inline std::string canonicalize_aspect(std::string_view name) {
    std::string out;
    out.reserve(name.size());
    bool pending_space = false;
    for (unsigned char c : name) {
        if (std::isspace(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

class Aspect {
public:
    explicit Aspect(std::string name) : name_(std::move(name)), key_(canonicalize_aspect(name_)) {
        if (key_.empty()) throw Error(ErrorKind::InvalidParameters, "aspect name must be non-empty");
    }

    const std::string& name() const noexcept { return name_; }
    const std::string& canonical_key() const noexcept { return key_; }

    friend bool operator==(const Aspect& a, const Aspect& b) noexcept { return a.key_ == b.key_; }
    friend auto operator<=>(const Aspect& a, const Aspect& b) noexcept { return a.key_ <=> b.key_; }

private:
    std::string name_;
    std::string key_;
};

/// Strongly-typed content hash of a sub-rule (16 lowercase hex digits).
struct SubRuleId {
    std::string value;

    friend bool operator==(const SubRuleId&, const SubRuleId&) = default;
    friend auto operator<=>(const SubRuleId&, const SubRuleId&) = default;
};

enum class Lineage { Initial, Stricter, Lenient };
enum class Direction { Stricter, Lenient };

inline std::string_view to_string(Lineage l) {
    switch (l) {
    case Lineage::Initial: return "initial";
    case Lineage::Stricter: return "stricter";
    case Lineage::Lenient: return "lenient";
    }
    return "initial";
}

inline std::string_view to_string(Direction d) { return d == Direction::Stricter ? "stricter" : "lenient"; }

inline Lineage lineage_from_string(std::string_view s) {
    if (s == "initial") return Lineage::Initial;
    if (s == "stricter") return Lineage::Stricter;
    if (s == "lenient") return Lineage::Lenient;
    throw Error(ErrorKind::ParseError, "unknown lineage '" + std::string(s) + "'");
}

inline Lineage lineage_of(Direction d) noexcept {
    return d == Direction::Stricter ? Lineage::Stricter : Lineage::Lenient;
}

/// Shortest decimal text that reads back to the same double.
inline std::string format_number(double v) {
    if (std::isfinite(v) && v == std::floor(v) && std::fabs(v) < 1e15) {
        return std::to_string(static_cast<long long>(v));
    }
    for (int precision = 1; precision <= 17; ++precision) {
        std::ostringstream os;
        os << std::setprecision(precision) << v;
        if (std::stod(os.str()) == v) return os.str();
    }
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

/// JSON number that keeps integral values integral, so files round-trip
/// byte-for-byte.
inline json number_json(double v) {
    if (std::isfinite(v) && v == std::floor(v) && std::fabs(v) < 9e15) return json(static_cast<std::int64_t>(v));
    return json(v);
}

struct ScoreBand {
    double lo = 0;
    double hi = 0;
    std::string text;

    friend bool operator==(const ScoreBand&, const ScoreBand&) = default;
};

class Rubric {
public:
    Rubric(std::vector<ScoreBand> bands, Lineage lineage = Lineage::Initial,
           std::optional<SubRuleId> parent_id = std::nullopt)
        : bands_(std::move(bands)), lineage_(lineage), parent_id_(std::move(parent_id)) {
        if (bands_.empty()) throw Error(ErrorKind::InvalidRubric, "rubric has no score bands");
        std::stable_sort(bands_.begin(), bands_.end(),
                         [](const ScoreBand& a, const ScoreBand& b) { return a.lo < b.lo; });
        for (std::size_t i = 0; i < bands_.size(); ++i) {
            if (!(bands_[i].lo <= bands_[i].hi))
                throw Error(ErrorKind::InvalidRubric, "band lower bound exceeds upper bound");
            if (i > 0 && bands_[i].lo <= bands_[i - 1].hi)
                throw Error(ErrorKind::InvalidRubric, "score bands overlap");
        }
        if ((lineage_ == Lineage::Initial) != !parent_id_.has_value())
            throw Error(ErrorKind::InvalidRubric, "lineage is Initial iff parent_id is absent");
    }

    const std::vector<ScoreBand>& bands() const noexcept { return bands_; }
    Lineage lineage() const noexcept { return lineage_; }
    const std::optional<SubRuleId>& parent_id() const noexcept { return parent_id_; }

    /// Canonical prose rendering, e.g. "1-2: weak; 3-4: fair".
    std::string text() const {
        std::string out;
        for (const auto& b : bands_) {
            if (!out.empty()) out += "; ";
            out += format_number(b.lo);
            if (b.hi != b.lo) out += "-" + format_number(b.hi);
            out += ": " + b.text;
        }
        return out;
    }

    /// Integer scales need every integer in range inside a band. Real scales
    /// accept unit gaps between bands since guidelines are written on
    /// integer anchors ("1-2", "3-4").
    bool covers(double lo, double hi, ScoreKind kind) const {
        if (kind == ScoreKind::Integer) {
            for (auto v = std::ceil(lo); v <= std::floor(hi); v += 1.0) {
                const bool inside = std::any_of(bands_.begin(), bands_.end(),
                                                [v](const ScoreBand& b) { return b.lo <= v && v <= b.hi; });
                if (!inside) return false;
            }
            return true;
        }
        if (bands_.front().lo > lo || bands_.back().hi < hi) return false;
        for (std::size_t i = 1; i < bands_.size(); ++i) {
            if (bands_[i].lo - bands_[i - 1].hi > 1.0) return false;
        }
        return true;
    }

    friend bool operator==(const Rubric&, const Rubric&) = default;

private:
    std::vector<ScoreBand> bands_;
    Lineage lineage_;
    std::optional<SubRuleId> parent_id_;
};

class SubRule {
public:
    SubRule(Aspect aspect, Rubric rubric)
        : aspect_(std::move(aspect)), rubric_(std::move(rubric)),
          id_{hashing::to_hex(hashing::content_hash(aspect_.canonical_key(), rubric_.text(),
                                                    to_string(rubric_.lineage())))} {}

    const SubRuleId& id() const noexcept { return id_; }
    const Aspect& aspect() const noexcept { return aspect_; }
    const Rubric& rubric() const noexcept { return rubric_; }
    Lineage lineage() const noexcept { return rubric_.lineage(); }

    friend bool operator==(const SubRule& a, const SubRule& b) {
        return a.id_ == b.id_ && a.aspect_.name() == b.aspect_.name() && a.rubric_ == b.rubric_;
    }

private:
    Aspect aspect_;
    Rubric rubric_;
    SubRuleId id_;
};

class ScoringRule {
public:
    ScoringRule() : stable_key_(compute_key({})) {}

    explicit ScoringRule(std::vector<SubRule> subrules) : members_(std::move(subrules)) {
        std::sort(members_.begin(), members_.end(), [](const SubRule& a, const SubRule& b) {
            return a.aspect().canonical_key() < b.aspect().canonical_key();
        });
        for (std::size_t i = 1; i < members_.size(); ++i) {
            if (members_[i].aspect() == members_[i - 1].aspect())
                throw Error(ErrorKind::DuplicateAspect, members_[i].aspect().name());
        }
        stable_key_ = compute_key(members_);
    }

    const std::vector<SubRule>& subrules() const noexcept { return members_; }
    std::size_t size() const noexcept { return members_.size(); }
    bool empty() const noexcept { return members_.empty(); }
    auto begin() const noexcept { return members_.begin(); }
    auto end() const noexcept { return members_.end(); }

    /// Order-independent hash of member ids.
    const std::string& stable_key() const noexcept { return stable_key_; }

    bool has_aspect(const Aspect& a) const {
        return std::any_of(members_.begin(), members_.end(), [&](const SubRule& s) { return s.aspect() == a; });
    }

    const SubRule* find(const SubRuleId& id) const {
        auto it = std::find_if(members_.begin(), members_.end(), [&](const SubRule& s) { return s.id() == id; });
        return it == members_.end() ? nullptr : &*it;
    }

    std::set<std::string> aspect_keys() const {
        std::set<std::string> keys;
        for (const auto& s : members_) keys.insert(s.aspect().canonical_key());
        return keys;
    }

    friend bool operator==(const ScoringRule& a, const ScoringRule& b) { return a.members_ == b.members_; }

private:
    static std::string compute_key(const std::vector<SubRule>& members) {
        std::vector<std::string> ids;
        ids.reserve(members.size());
        for (const auto& m : members) ids.push_back(m.id().value);
        std::sort(ids.begin(), ids.end());
        std::uint64_t h = hashing::fnv_offset;
        for (const auto& id : ids) h = hashing::fnv1a(id + ",", h);
        return hashing::to_hex(hashing::splitmix64(h ^ ids.size()));
    }

    std::vector<SubRule> members_;
    std::string stable_key_;
};

// Actions ------------------------------------------------------------------

struct AddAction {
    SubRule subrule;
};

/// Replace `target` with `replacement` (same aspect, modified rubric).
struct ModifyAction {
    SubRuleId target;
    SubRule replacement;
};

using Action = std::variant<AddAction, ModifyAction>;

inline double set_jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
    if (a.empty() && b.empty()) return 1.0;
    std::size_t inter = 0;
    for (const auto& k : a) inter += b.count(k);
    const std::size_t uni = a.size() + b.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

/// Jaccard similarity of the two rules' aspect sets.
inline double aspect_jaccard(const ScoringRule& a, const ScoringRule& b) {
    return set_jaccard(a.aspect_keys(), b.aspect_keys());
}

inline ScoringRule apply_action(const ScoringRule& state, const Action& action) {
    if (const auto* add = std::get_if<AddAction>(&action)) {
        if (state.has_aspect(add->subrule.aspect()))
            throw Error(ErrorKind::DuplicateAspect, add->subrule.aspect().name());
        std::vector<SubRule> members = state.subrules();
        members.push_back(add->subrule);
        return ScoringRule(std::move(members));
    }
    const auto& mod = std::get<ModifyAction>(action);
    const SubRule* target = state.find(mod.target);
    if (target == nullptr) throw Error(ErrorKind::MissingSubRule, mod.target.value);
    if (!(target->aspect() == mod.replacement.aspect()))
        throw Error(ErrorKind::PreconditionViolation, "modification must keep the aspect");
    if (mod.replacement.rubric().parent_id() != mod.target)
        throw Error(ErrorKind::PreconditionViolation, "modified rubric must name its parent");
    std::vector<SubRule> members;
    members.reserve(state.size());
    for (const auto& m : state) members.push_back(m.id() == mod.target ? mod.replacement : m);
    return ScoringRule(std::move(members));
}

// Guideline parsing ----------------------------------------------------------

/// Parse a prose guideline ("1-2: ...; 3-4: ...", "score_5: ...",
/// "'5-6': '...'") into numeric bands sorted ascending.
inline std::vector<ScoreBand> parse_bands(std::string_view guideline) {
    static const std::regex marker(
        R"((?:score[_ ]?)?(\d+(?:\.\d+)?)(?:\s*(?:-|to)\s*(\d+(?:\.\d+)?))?\s*['"]?\s*:(?!\d))",
        std::regex::icase);
    const std::string text(guideline);
    struct Hit {
        std::size_t start, end;
        double lo, hi;
    };
    std::vector<Hit> hits;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), marker); it != std::sregex_iterator(); ++it) {
        const auto& m = *it;
        const auto pos = static_cast<std::size_t>(m.position(0));
        if (pos > 0) {
            const char prev = text[pos - 1];
            if (!(std::isspace(static_cast<unsigned char>(prev)) || prev == ';' || prev == ',' || prev == '\'' ||
                  prev == '"' || prev == '.' || prev == '{' || prev == '('))
                continue;
        }
        const double lo = std::stod(m.str(1));
        const double hi = m[2].matched ? std::stod(m.str(2)) : lo;
        hits.push_back({pos, pos + static_cast<std::size_t>(m.length(0)), std::min(lo, hi), std::max(lo, hi)});
    }
    if (hits.empty()) throw Error(ErrorKind::InvalidRubric, "no score bands found in guideline");

    auto strip = [](std::string s) {
        const std::string junk = " \t\r\n;,'\"{}";
        const auto b = s.find_first_not_of(junk);
        if (b == std::string::npos) return std::string{};
        const auto e = s.find_last_not_of(junk);
        return s.substr(b, e - b + 1);
    };
    std::vector<ScoreBand> bands;
    for (std::size_t i = 0; i < hits.size(); ++i) {
        const std::size_t stop = i + 1 < hits.size() ? hits[i + 1].start : text.size();
        bands.push_back({hits[i].lo, hits[i].hi, strip(text.substr(hits[i].end, stop - hits[i].end))});
    }
    std::stable_sort(bands.begin(), bands.end(), [](const ScoreBand& a, const ScoreBand& b) { return a.lo < b.lo; });
    return bands;
}

// Rule file format -----------------------------------------------------------

inline json to_json(const SubRule& sr) {
    json bands = json::array();
    for (const auto& b : sr.rubric().bands()) {
        bands.push_back(json{{"lo", number_json(b.lo)}, {"hi", number_json(b.hi)}, {"text", b.text}});
    }
    const auto& parent = sr.rubric().parent_id();
    return json{{"aspect", sr.aspect().name()},
                {"lineage", std::string(to_string(sr.lineage()))},
                {"parent_id", parent ? json(parent->value) : json(nullptr)},
                {"bands", std::move(bands)}};
}

inline SubRule subrule_from_json(const json& j) {
    try {
        std::vector<ScoreBand> bands;
        for (const auto& b : j.at("bands")) {
            bands.push_back({b.at("lo").get<double>(), b.at("hi").get<double>(), b.at("text").get<std::string>()});
        }
        std::optional<SubRuleId> parent;
        if (j.contains("parent_id") && !j.at("parent_id").is_null())
            parent = SubRuleId{j.at("parent_id").get<std::string>()};
        return SubRule(Aspect(j.at("aspect").get<std::string>()),
                       Rubric(std::move(bands), lineage_from_string(j.at("lineage").get<std::string>()),
                              std::move(parent)));
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ParseError, e.what());
    }
}

inline json to_json(const ScoringRule& rule) {
    json subs = json::array();
    for (const auto& sr : rule) subs.push_back(to_json(sr));
    return json{{"subrules", std::move(subs)}};
}

inline ScoringRule rule_from_json(const json& j) {
    if (!j.is_object() || !j.contains("subrules") || !j.at("subrules").is_array())
        throw Error(ErrorKind::ParseError, "rule object needs a 'subrules' array");
    std::vector<SubRule> subs;
    for (const auto& s : j.at("subrules")) subs.push_back(subrule_from_json(s));
    return ScoringRule(std::move(subs));
}

inline std::string serialize_rule(const ScoringRule& rule) { return to_json(rule).dump(2) + "\n"; }

inline ScoringRule parse_rule(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ParseError, e.what());
    }
    return rule_from_json(j);
}

} // namespace ruleforge
