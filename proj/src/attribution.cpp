#include "traceval/attribution.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "traceval/jsonl.hpp"

namespace traceval::attribution {

namespace {

bool is_hex_lower(const std::string& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) {
        return std::isdigit(c) || (c >= 'a' && c <= 'f');
    });
}

std::string strip(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::pair<std::size_t, std::string>> split_lines(const std::string& text) {
    std::vector<std::pair<std::size_t, std::string>> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string::npos) {
            if (start < text.size()) lines.emplace_back(start, text.substr(start));
            break;
        }
        lines.emplace_back(start, text.substr(start, end - start));
        start = end + 1;
    }
    return lines;
}

// "[branch SHA] message", optionally "[branch (root-commit) SHA] message".
const std::regex kCreationLine(
    R"(^\s*\[\S+(?: \([^)]*\))? ([0-9a-f]{7,40})\] .*)");
const std::regex kStatsLine(
    R"(^\s*\d+ files? changed.*)");
const std::regex kFastForward(
    R"(Updating [0-9a-f]{7,40}\.\.([0-9a-f]{7,40}))");
const std::regex kCommitHeader(
    R"(^commit ([0-9a-f]{7,40})\b.*)");

void scan_observation(const std::string& text, const std::string& segment_id,
                      std::vector<ShaEvidence>& out) {
    auto lines = split_lines(text);

    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::smatch m;
        if (std::regex_match(lines[i].second, m, kCreationLine)) {
            // Only a creation when git's file-change statistics follow.
            if (i + 1 < lines.size() && std::regex_match(lines[i + 1].second, kStatsLine)) {
                out.push_back({m[1].str(), ShaPattern::Creation, segment_id,
                               lines[i].first + static_cast<std::size_t>(m.position(1))});
            }
        }
    }

    // "Updating SHA1..SHA2" with "Fast-forward" on the same or next line.
    // SHA2 is the new head created by the segment's work; SHA1 is the base.
    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::smatch m;
        if (std::regex_search(lines[i].second, m, kFastForward)) {
            bool ff_here = lines[i].second.find("Fast-forward") != std::string::npos;
            bool ff_next = i + 1 < lines.size() &&
                           strip(lines[i + 1].second).rfind("Fast-forward", 0) == 0;
            if (ff_here || ff_next) {
                out.push_back({m[1].str(), ShaPattern::FastForward, segment_id,
                               lines[i].first + static_cast<std::size_t>(m.position(1))});
            }
        }
    }

    // Commit blocks (git log / show output) carrying the agent co-author trailer.
    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::smatch m;
        if (!std::regex_match(lines[i].second, m, kCommitHeader)) continue;
        std::size_t end = i + 1;
        while (end < lines.size() && !std::regex_match(lines[end].second, kCommitHeader)) ++end;
        for (std::size_t j = i + 1; j < end; ++j) {
            if (lines[j].second.find("Co-authored-by: OpenHands") != std::string::npos) {
                out.push_back({m[1].str(), ShaPattern::CoauthorTrailer, segment_id,
                               lines[i].first + static_cast<std::size_t>(m.position(1))});
                break;
            }
        }
        i = end - 1;
    }
}

}  // namespace

std::string to_string(ShaPattern p) {
    switch (p) {
        case ShaPattern::Creation: return "creation";
        case ShaPattern::FastForward: return "fast_forward";
        case ShaPattern::CoauthorTrailer: return "coauthor_trailer";
    }
    return "creation";
}

std::vector<ShaEvidence> extract_commit_shas(const trace::Segment& segment) {
    std::vector<ShaEvidence> out;
    for (const auto& e : segment.events) {
        if (e.kind != trace::EventKind::Observation) continue;
        scan_observation(e.content, segment.segment_id, out);
    }
    return out;
}

MatchResult match_shas(const std::vector<ShaEvidence>& evidence,
                       const PullRequestRecord& pr) {
    MatchResult result;
    for (const auto& ev : evidence) {
        if (!is_hex_lower(ev.sha_text) || ev.sha_text.size() < 7) {
            result.discards.push_back({ev, DiscardReason::Unmatched, 0});
            continue;
        }
        std::vector<const CommitRecord*> hits;
        for (const auto& c : pr.commits) {
            if (ev.sha_text.size() == 40 ? c.sha == ev.sha_text
                                         : c.sha.rfind(ev.sha_text, 0) == 0) {
                hits.push_back(&c);
            }
        }
        if (hits.size() == 1) {
            result.segment_commits[ev.segment_id].insert(hits.front()->sha);
        } else {
            result.discards.push_back(
                {ev,
                 hits.empty() ? DiscardReason::Unmatched : DiscardReason::Ambiguous,
                 hits.size()});
        }
    }
    return result;
}

LineChangeSet parse_diff(const std::string& diff) {
    LineChangeSet changes;
    std::string current_file;
    bool in_hunk = false;
    static const std::regex hunk_re(R"(^@@ -\d+(,\d+)? \+\d+(,\d+)? @@.*)");

    auto lines = split_lines(diff);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string& line = lines[i].second;
        if (line.rfind("+++ ", 0) == 0) {
            std::string path = strip(line.substr(4));
            if (std::size_t tab = path.find('\t'); tab != std::string::npos) {
                path = path.substr(0, tab);
            }
            if (path.rfind("b/", 0) == 0) path = path.substr(2);
            current_file = (path == "/dev/null") ? "" : path;
            in_hunk = false;
            continue;
        }
        if (line.rfind("--- ", 0) == 0 || line.rfind("diff ", 0) == 0 ||
            line.rfind("index ", 0) == 0) {
            in_hunk = false;
            continue;
        }
        if (line.rfind("@@", 0) == 0) {
            if (!std::regex_match(line, hunk_re)) {
                throw std::runtime_error("parse_diff: malformed hunk header at line " +
                                         std::to_string(i + 1) + ": " + line);
            }
            in_hunk = true;
            continue;
        }
        if (!in_hunk) continue;
        if (line.empty()) continue;
        char tag = line[0];
        if (tag == '+') {
            std::string text = strip(line.substr(1));
            if (!text.empty()) changes.insert({current_file, std::move(text)});
        } else if (tag == '-' || tag == ' ' || tag == '\\') {
            // deletion, context, or "\ No newline at end of file"
        } else {
            in_hunk = false;
        }
    }
    return changes;
}

std::optional<SurvivalLabel> survival(const std::string& segment_id,
                                      const std::vector<const CommitRecord*>& segment_commits,
                                      const LineChangeSet& final_changes) {
    std::uint64_t total = 0;
    std::uint64_t in_final = 0;
    for (const CommitRecord* c : segment_commits) {
        total += c->changes.size();
        for (const auto& lc : c->changes) {
            if (final_changes.count(lc)) ++in_final;
        }
    }
    if (total == 0) return std::nullopt;
    SurvivalLabel label;
    label.segment_id = segment_id;
    label.lines_total = total;
    label.lines_in_final = in_final;
    label.score = static_cast<double>(in_final) / static_cast<double>(total);
    return label;
}

Hierarchy build_hierarchy(const std::vector<PullRequestRecord>& prs,
                          const std::vector<SegmentEvidence>& segments) {
    Hierarchy h;
    std::set<std::string> pr_ids;
    for (const auto& pr : prs) {
        if (!pr_ids.insert(pr.pr_id).second) {
            throw std::invalid_argument("duplicate pr_id: " + pr.pr_id);
        }
    }

    std::vector<ShaEvidence> all_evidence;
    for (const auto& se : segments) {
        all_evidence.insert(all_evidence.end(), se.evidence.begin(), se.evidence.end());
    }

    for (const auto& pr : prs) {
        MatchResult m = match_shas(all_evidence, pr);
        Hierarchy::PrNode node;
        node.pr_id = pr.pr_id;
        node.merged = pr.merged;
        std::map<std::string, std::vector<std::string>> by_sha;
        for (const auto& [seg_id, shas] : m.segment_commits) {
            for (const auto& sha : shas) {
                by_sha[sha].push_back(seg_id);
                h.segment_commits[seg_id].insert({pr.pr_id, sha});
            }
        }
        for (auto& [sha, seg_ids] : by_sha) {
            std::sort(seg_ids.begin(), seg_ids.end());
            node.commits.push_back({sha, std::move(seg_ids)});
        }
        // Unmatched-in-this-PR is expected when several PRs are loaded; only
        // ambiguity is worth reporting per PR.
        for (auto& d : m.discards) {
            if (d.reason == DiscardReason::Ambiguous) h.discards.push_back(std::move(d));
        }
        h.prs.push_back(std::move(node));
    }

    for (const auto& se : segments) {
        if (!h.segment_commits.count(se.segment_id)) {
            h.unlinked_segments.push_back(se.segment_id);
        }
    }
    return h;
}

SurvivalResult compute_survival(const Hierarchy& hierarchy,
                                const std::vector<PullRequestRecord>& prs) {
    std::map<std::string, const PullRequestRecord*> pr_by_id;
    std::map<std::pair<std::string, std::string>, const CommitRecord*> commit_by_ref;
    for (const auto& pr : prs) {
        pr_by_id[pr.pr_id] = &pr;
        for (const auto& c : pr.commits) commit_by_ref[{pr.pr_id, c.sha}] = &c;
    }

    SurvivalResult result;
    for (const auto& [seg_id, refs] : hierarchy.segment_commits) {
        std::uint64_t total = 0;
        std::uint64_t in_final = 0;
        for (const auto& ref : refs) {
            const CommitRecord* c = commit_by_ref.at({ref.pr_id, ref.sha});
            const LineChangeSet& final_set = pr_by_id.at(ref.pr_id)->final_changes;
            total += c->changes.size();
            for (const auto& lc : c->changes) {
                if (final_set.count(lc)) ++in_final;
            }
        }
        if (total == 0) {
            result.skipped_no_countable_lines.push_back(seg_id);
            continue;
        }
        SurvivalLabel label;
        label.segment_id = seg_id;
        label.lines_total = total;
        label.lines_in_final = in_final;
        label.score = static_cast<double>(in_final) / static_cast<double>(total);
        result.labels.push_back(std::move(label));
    }
    return result;
}

PullRequestRecord load_pr_fixture(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    PullRequestRecord pr;
    auto meta = nlohmann::json::parse(jsonl::read_text(dir / "pr.meta"));
    pr.pr_id = meta.at("pr_id").get<std::string>();
    pr.merged = meta.at("merged").get<bool>();

    std::vector<std::string> order;
    if (meta.contains("commits")) {
        for (const auto& s : meta["commits"]) order.push_back(s.get<std::string>());
    } else {
        for (const auto& entry : fs::directory_iterator(dir / "commits")) {
            if (entry.path().extension() == ".diff") {
                order.push_back(entry.path().stem().string());
            }
        }
        std::sort(order.begin(), order.end());
    }

    std::set<std::string> seen;
    for (const auto& sha : order) {
        if (sha.size() != 40 || !is_hex_lower(sha)) {
            throw std::runtime_error("pr fixture " + pr.pr_id + ": bad commit sha " + sha);
        }
        if (!seen.insert(sha).second) {
            throw std::runtime_error("pr fixture " + pr.pr_id + ": duplicate commit " + sha);
        }
        CommitRecord c;
        c.sha = sha;
        c.diff = jsonl::read_text(dir / "commits" / (sha + ".diff"));
        if (meta.contains("messages") && meta["messages"].contains(sha)) {
            c.message = meta["messages"][sha].get<std::string>();
        }
        c.changes = parse_diff(c.diff);
        pr.commits.push_back(std::move(c));
    }

    pr.final_diff = jsonl::read_text(dir / "final.diff");
    pr.final_changes = parse_diff(pr.final_diff);
    return pr;
}

std::vector<PullRequestRecord> load_pr_fixtures(const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    std::vector<fs::path> dirs;
    if (fs::exists(root / "pr.meta")) {
        dirs.push_back(root);
    } else {
        for (const auto& entry : fs::directory_iterator(root)) {
            if (entry.is_directory() && fs::exists(entry.path() / "pr.meta")) {
                dirs.push_back(entry.path());
            }
        }
        std::sort(dirs.begin(), dirs.end());
    }
    std::vector<PullRequestRecord> prs;
    for (const auto& d : dirs) prs.push_back(load_pr_fixture(d));
    return prs;
}

}  // namespace traceval::attribution
