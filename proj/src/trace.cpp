#include "traceval/trace.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <map>
#include <stdexcept>
#include <tuple>

#include "traceval/jsonl.hpp"

namespace traceval::trace {

namespace {

constexpr const char* kFinishTool = "finish";

std::string trimmed(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// Normalized identity used for prefix comparison: cosmetic re-serialization of
// the retained context must not open a boundary.
std::tuple<EventKind, std::string, std::string> normal_key(const Event& e) {
    return {e.kind, trimmed(e.content), e.tool_name.value_or("")};
}

bool same_event(const Event& a, const Event& b) {
    return normal_key(a) == normal_key(b);
}

bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
    static const int d[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (m == 2 && is_leap(y)) return 29;
    return d[m - 1];
}

// Days since 1970-01-01 for a proleptic Gregorian date.
std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

}  // namespace

std::string to_string(EventKind kind) {
    switch (kind) {
        case EventKind::UserMessage: return "user_message";
        case EventKind::AgentAction: return "agent_action";
        case EventKind::Observation: return "observation";
    }
    return "user_message";
}

EventKind event_kind_from_string(const std::string& s) {
    if (s == "user_message") return EventKind::UserMessage;
    if (s == "agent_action") return EventKind::AgentAction;
    if (s == "observation") return EventKind::Observation;
    throw std::invalid_argument("unknown event kind: " + s);
}

json Event::to_json() const {
    json j{{"kind", to_string(kind)}, {"content", content}, {"is_finish", is_finish}};
    if (tool_name) j["tool_name"] = *tool_name;
    return j;
}

Event Event::from_json(const json& j) {
    Event e;
    e.kind = event_kind_from_string(j.at("kind").get<std::string>());
    e.content = j.at("content").get<std::string>();
    if (j.contains("tool_name") && !j["tool_name"].is_null()) {
        e.tool_name = j["tool_name"].get<std::string>();
    }
    if (e.tool_name && e.kind != EventKind::AgentAction) {
        throw std::invalid_argument("tool_name on non-action event");
    }
    e.is_finish = e.kind == EventKind::AgentAction && e.tool_name == kFinishTool;
    return e;
}

json Segment::to_json() const {
    json ev = json::array();
    for (const auto& e : events) ev.push_back(e.to_json());
    json j{{"segment_id", segment_id},
           {"conversation_id", conversation_id},
           {"index_in_conversation", index_in_conversation},
           {"events", std::move(ev)},
           {"finish_observed", finish_observed}};
    if (followup_user_message) j["followup_user_message"] = *followup_user_message;
    return j;
}

Segment Segment::from_json(const json& j) {
    Segment s;
    s.segment_id = j.at("segment_id").get<std::string>();
    s.conversation_id = j.at("conversation_id").get<std::string>();
    s.index_in_conversation = j.at("index_in_conversation").get<std::size_t>();
    for (const auto& e : j.at("events")) s.events.push_back(Event::from_json(e));
    s.finish_observed = j.at("finish_observed").get<bool>();
    if (j.contains("followup_user_message") && !j["followup_user_message"].is_null()) {
        s.followup_user_message = j["followup_user_message"].get<std::string>();
    }
    return s;
}

std::optional<std::int64_t> parse_rfc3339_us(const std::string& text) {
    // YYYY-MM-DDTHH:MM:SS[.frac](Z|±HH:MM)
    int y, mo, d, h, mi, se;
    int n = 0;
    if (std::sscanf(text.c_str(), "%4d-%2d-%2d%*1[Tt ]%2d:%2d:%2d%n",
                    &y, &mo, &d, &h, &mi, &se, &n) != 6 || n != 19) {
        return std::nullopt;
    }
    if (mo < 1 || mo > 12 || d < 1 || d > days_in_month(y, mo)) return std::nullopt;
    if (h > 23 || mi > 59 || se > 60 || h < 0 || mi < 0 || se < 0) return std::nullopt;

    std::size_t pos = 19;
    std::int64_t frac_us = 0;
    if (pos < text.size() && text[pos] == '.') {
        ++pos;
        std::size_t digits = 0;
        std::int64_t scale = 100000;
        while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
            if (digits < 6) frac_us += (text[pos] - '0') * scale;
            scale /= 10;
            ++digits;
            ++pos;
        }
        if (digits == 0) return std::nullopt;
    }

    std::int64_t offset_s = 0;
    if (pos >= text.size()) return std::nullopt;
    char c = text[pos];
    if (c == 'Z' || c == 'z') {
        ++pos;
    } else if (c == '+' || c == '-') {
        int oh, om;
        int m2 = 0;
        if (std::sscanf(text.c_str() + pos + 1, "%2d:%2d%n", &oh, &om, &m2) != 2 || m2 != 5) {
            return std::nullopt;
        }
        if (oh > 23 || om > 59) return std::nullopt;
        offset_s = (c == '+' ? 1 : -1) * (oh * 3600 + om * 60);
        pos += 6;
    } else {
        return std::nullopt;
    }
    if (pos != text.size()) return std::nullopt;

    std::int64_t secs = days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60 + se;
    secs -= offset_s;
    return secs * 1000000 + frac_us;
}

namespace {

CompletionRecord record_from_json(const json& j) {
    CompletionRecord r;
    r.conversation_id = j.at("conversation_id").get<std::string>();
    r.timestamp = j.at("timestamp").get<std::string>();
    auto us = parse_rfc3339_us(r.timestamp);
    if (!us) throw std::invalid_argument("bad timestamp");
    r.timestamp_us = *us;
    r.tool_config_id = j.at("tool_config_id").get<std::string>();
    const auto& msgs = j.at("messages");
    if (!msgs.is_array() || msgs.empty()) {
        throw std::invalid_argument("messages must be a non-empty array");
    }
    for (const auto& m : msgs) r.messages.push_back(Event::from_json(m));
    r.output = Event::from_json(j.at("output"));
    return r;
}

}  // namespace

ParseResult parse_records(std::istream& raw) {
    ParseResult result;
    std::map<std::string, std::size_t> slot;  // conversation_id -> index
    std::vector<jsonl::BadLine> bad;
    jsonl::for_each_line(
        raw,
        [&](std::size_t line_no, json j) {
            try {
                CompletionRecord r = record_from_json(j);
                auto it = slot.find(r.conversation_id);
                if (it == slot.end()) {
                    slot.emplace(r.conversation_id, result.conversations.size());
                    result.conversations.push_back({r.conversation_id, {}});
                    it = slot.find(r.conversation_id);
                }
                result.conversations[it->second].records.push_back(std::move(r));
            } catch (const std::exception& e) {
                result.rejects.push_back({line_no, e.what()});
            }
        },
        bad);
    for (const auto& b : bad) result.rejects.push_back({b.line_no, b.reason});
    std::sort(result.rejects.begin(), result.rejects.end(),
              [](const RecordReject& a, const RecordReject& b2) { return a.line_no < b2.line_no; });
    // Ties on timestamp keep input order.
    for (auto& conv : result.conversations) {
        std::stable_sort(conv.records.begin(), conv.records.end(),
                         [](const CompletionRecord& a, const CompletionRecord& b2) {
                             return a.timestamp_us < b2.timestamp_us;
                         });
    }
    return result;
}

namespace {

bool extends_prefix(const std::vector<Event>& context, const std::vector<Event>& accumulated) {
    if (context.size() < accumulated.size()) return false;
    for (std::size_t i = 0; i < accumulated.size(); ++i) {
        if (!same_event(context[i], accumulated[i])) return false;
    }
    return true;
}

struct SegmentBuilder {
    std::string conversation_id;
    std::vector<Segment> done;
    std::vector<Event> current;
    // Terminal state of the in-progress segment, tracked over agent actions:
    // an explicit finish call, or a plain-text response with no tool call.
    bool last_action_finish = false;
    bool last_action_plain = false;

    bool terminated() const { return last_action_finish || last_action_plain; }

    void close() {
        if (current.empty()) return;
        Segment s;
        s.conversation_id = conversation_id;
        s.index_in_conversation = done.size();
        s.segment_id = conversation_id + "#" + std::to_string(done.size());
        s.events = std::move(current);
        s.finish_observed = last_action_finish || last_action_plain;
        done.push_back(std::move(s));
        current.clear();
        last_action_finish = false;
        last_action_plain = false;
    }

    void feed(const Event& e) {
        if (e.kind == EventKind::UserMessage && terminated() && !current.empty()) {
            close();
        }
        current.push_back(e);
        if (e.kind == EventKind::AgentAction) {
            last_action_finish = e.is_finish;
            last_action_plain = !e.tool_name.has_value();
        }
    }
};

}  // namespace

Trajectory build_trajectory(const std::vector<CompletionRecord>& records) {
    Trajectory t;
    if (records.empty()) return t;
    t.conversation_id = records.front().conversation_id;
    t.source_records = records.size();
    std::vector<Event> episode;
    std::string tool_config = records.front().tool_config_id;
    bool first = true;
    for (const auto& r : records) {
        bool boundary = first || r.tool_config_id != tool_config ||
                        !extends_prefix(r.messages, episode);
        first = false;
        std::size_t from = boundary ? 0 : episode.size();
        if (boundary) episode.clear();
        for (std::size_t i = from; i < r.messages.size(); ++i) {
            episode.push_back(r.messages[i]);
            t.events.push_back(r.messages[i]);
        }
        episode.push_back(r.output);
        t.events.push_back(r.output);
        tool_config = r.tool_config_id;
    }
    return t;
}

std::vector<Segment> extract_segments(const std::vector<CompletionRecord>& records) {
    if (records.empty()) return {};
    for (const auto& r : records) {
        if (r.conversation_id != records.front().conversation_id) {
            throw std::invalid_argument("extract_segments: records span multiple conversations");
        }
    }

    SegmentBuilder builder;
    builder.conversation_id = records.front().conversation_id;
    std::vector<Event> episode;
    std::string tool_config = records.front().tool_config_id;
    bool first = true;
    for (const auto& r : records) {
        bool boundary = first || r.tool_config_id != tool_config ||
                        !extends_prefix(r.messages, episode);
        first = false;
        std::size_t from = 0;
        if (boundary) {
            builder.close();
            episode.clear();
        } else {
            from = episode.size();
        }
        for (std::size_t i = from; i < r.messages.size(); ++i) {
            episode.push_back(r.messages[i]);
            builder.feed(r.messages[i]);
        }
        episode.push_back(r.output);
        builder.feed(r.output);
        tool_config = r.tool_config_id;
    }
    builder.close();

    auto& segments = builder.done;
    for (std::size_t i = 0; i + 1 < segments.size(); ++i) {
        const auto& next = segments[i + 1].events;
        if (!next.empty() && next.front().kind == EventKind::UserMessage) {
            segments[i].followup_user_message = next.front().content;
        }
    }
    return segments;
}

std::string render_event(const Event& event) {
    std::string line;
    switch (event.kind) {
        case EventKind::UserMessage:
            line = "user: ";
            break;
        case EventKind::AgentAction:
            line = event.tool_name ? "agent[tool=" + *event.tool_name + "]: " : "agent: ";
            break;
        case EventKind::Observation:
            line = "observation: ";
            break;
    }
    line += event.content;
    line += '\n';
    return line;
}

std::string render_events(const std::vector<Event>& events) {
    std::string out;
    for (const auto& e : events) out += render_event(e);
    return out;
}

}  // namespace traceval::trace
