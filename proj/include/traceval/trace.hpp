#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace traceval::trace {

using json = nlohmann::json;

enum class EventKind { UserMessage, AgentAction, Observation };

std::string to_string(EventKind kind);
EventKind event_kind_from_string(const std::string& s);

struct Event {
    EventKind kind = EventKind::UserMessage;
    std::string content;
    std::optional<std::string> tool_name;  // present iff the action is a tool call
    bool is_finish = false;                // derived: agent_action calling the finish tool

    json to_json() const;
    static Event from_json(const json& j);
};

// One timestamped completion: the input context plus the agent's response.
struct CompletionRecord {
    std::string conversation_id;
    std::string timestamp;          // RFC 3339, as read
    std::int64_t timestamp_us = 0;  // parsed, UTC microseconds since epoch
    std::string tool_config_id;
    std::vector<Event> messages;
    Event output;
};

struct Trajectory {
    std::string conversation_id;
    std::vector<Event> events;
    std::size_t source_records = 0;
};

struct Segment {
    std::string segment_id;
    std::string conversation_id;
    std::size_t index_in_conversation = 0;
    std::vector<Event> events;  // events[0] is the initiating user message
    bool finish_observed = false;
    std::optional<std::string> followup_user_message;

    json to_json() const;
    static Segment from_json(const json& j);
};

struct RecordReject {
    std::size_t line_no = 0;
    std::string reason;
};

struct ConversationRecords {
    std::string conversation_id;
    std::vector<CompletionRecord> records;  // sorted by timestamp, ties by input order
};

struct ParseResult {
    std::vector<ConversationRecords> conversations;  // ordered by first appearance
    std::vector<RecordReject> rejects;
};

// Returns UTC microseconds since the epoch, or nullopt if `text` is not a
// valid RFC 3339 timestamp.
std::optional<std::int64_t> parse_rfc3339_us(const std::string& text);

ParseResult parse_records(std::istream& raw);

// Prefix-deduplicated reconstruction of one conversation's event stream.
Trajectory build_trajectory(const std::vector<CompletionRecord>& records);

// Splits one conversation's records into segments. Boundaries open on context
// prefix divergence, tool configuration changes, and user messages that arrive
// after the agent has terminated (finish tool call, or a final plain-text
// response as fallback). Throws std::invalid_argument on records from mixed
// conversations.
std::vector<Segment> extract_segments(const std::vector<CompletionRecord>& records);

// Role-tagged single-event rendering shared by the scorer and the annotator.
std::string render_event(const Event& event);

std::string render_events(const std::vector<Event>& events);

}  // namespace traceval::trace
