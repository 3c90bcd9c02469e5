#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "traceval/trace.hpp"

namespace traceval::attribution {

enum class ShaPattern { Creation, FastForward, CoauthorTrailer };

std::string to_string(ShaPattern p);

// A commit SHA seen in tool output under one of the creation patterns.
// Mere mentions of SHAs never become evidence.
struct ShaEvidence {
    std::string sha_text;  // 7-40 lowercase hex chars
    ShaPattern pattern = ShaPattern::Creation;
    std::string segment_id;
    std::size_t source_offset = 0;  // byte offset within the observation text
};

struct LineChange {
    std::string file_path;
    // change_type is always "added": a modification's new content appears as a
    // '+' line, and deletions carry no survivable text.
    std::string normalized_text;

    auto operator<=>(const LineChange&) const = default;
};

using LineChangeSet = std::set<LineChange>;

struct CommitRecord {
    std::string sha;  // 40 hex chars
    std::string message;
    std::string diff;
    LineChangeSet changes;  // parse_diff(diff)
};

struct PullRequestRecord {
    std::string pr_id;
    bool merged = false;
    std::vector<CommitRecord> commits;
    std::string final_diff;
    LineChangeSet final_changes;
};

struct SurvivalLabel {
    std::string segment_id;
    double score = 0.0;
    std::uint64_t lines_total = 0;
    std::uint64_t lines_in_final = 0;
};

std::vector<ShaEvidence> extract_commit_shas(const trace::Segment& segment);

enum class DiscardReason { Unmatched, Ambiguous };

struct DiscardedEvidence {
    ShaEvidence evidence;
    DiscardReason reason = DiscardReason::Unmatched;
    std::size_t candidates = 0;
};

struct MatchResult {
    // segment_id -> matched commit SHAs (full 40-char), within one PR.
    std::map<std::string, std::set<std::string>> segment_commits;
    std::vector<DiscardedEvidence> discards;
};

// Full 40-char equality, or a unique >=7-char prefix. Anything ambiguous is
// discarded rather than guessed.
MatchResult match_shas(const std::vector<ShaEvidence>& evidence,
                       const PullRequestRecord& pr);

// Throws std::runtime_error naming the offending line on malformed hunk headers.
LineChangeSet parse_diff(const std::string& diff);

// nullopt when the commits carry no countable lines.
std::optional<SurvivalLabel> survival(const std::string& segment_id,
                                      const std::vector<const CommitRecord*>& segment_commits,
                                      const LineChangeSet& final_changes);

struct SegmentEvidence {
    std::string segment_id;
    std::vector<ShaEvidence> evidence;
};

struct Hierarchy {
    struct CommitNode {
        std::string sha;
        std::vector<std::string> segment_ids;
    };
    struct PrNode {
        std::string pr_id;
        bool merged = false;
        std::vector<CommitNode> commits;
    };
    struct CommitRef {
        std::string pr_id;
        std::string sha;
        auto operator<=>(const CommitRef&) const = default;
    };

    std::vector<PrNode> prs;
    std::map<std::string, std::set<CommitRef>> segment_commits;
    std::vector<std::string> unlinked_segments;  // no attributable commits
    std::vector<DiscardedEvidence> discards;
};

Hierarchy build_hierarchy(const std::vector<PullRequestRecord>& prs,
                          const std::vector<SegmentEvidence>& segments);

struct SurvivalResult {
    std::vector<SurvivalLabel> labels;
    std::vector<std::string> skipped_no_countable_lines;
};

SurvivalResult compute_survival(const Hierarchy& hierarchy,
                                const std::vector<PullRequestRecord>& prs);

// Fixture layout: <dir>/pr.meta (JSON: pr_id, merged, optional commit order),
// <dir>/commits/<sha>.diff, <dir>/final.diff.
PullRequestRecord load_pr_fixture(const std::filesystem::path& dir);
std::vector<PullRequestRecord> load_pr_fixtures(const std::filesystem::path& root);

}  // namespace traceval::attribution
