#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "traceval/attribution.hpp"

namespace traceval::labels {

enum class Scheme { BceFloor, BceRound, Mse };

std::string to_string(Scheme s);
Scheme scheme_from_string(const std::string& s);

struct Transformed {
    Scheme scheme = Scheme::BceFloor;
    double target = 0.0;
};

struct OutcomeLabel {
    std::string segment_id;
    std::optional<bool> merge;
    std::optional<double> survival;
    std::optional<std::uint64_t> lines_total;
    std::optional<std::uint64_t> lines_in_final;
    std::optional<Transformed> transformed;
};

// Every segment linked to the PR inherits pr.merged; unlinked segments get none.
std::map<std::string, bool> inherit_merge(const attribution::PullRequestRecord& pr,
                                          const std::vector<std::string>& linked_segments);

// bce_floor: 1 iff score == 1; bce_round: 1 iff score >= 0.5; mse: identity.
// Throws std::invalid_argument outside [0,1].
double transform_survival(double score, Scheme scheme);

// Exact-count variant: survival is a ratio of integers, so the floor test
// never touches float equality.
double transform_survival_exact(std::uint64_t lines_in_final, std::uint64_t lines_total,
                                Scheme scheme);

struct LabelSummary {
    std::size_t conversations = 0;
    std::size_t segments = 0;
    std::size_t survival_labeled = 0;
    std::size_t merge_labeled = 0;
    std::size_t unlabeled = 0;
};

LabelSummary summarize(const std::vector<OutcomeLabel>& labels,
                       std::size_t total_segments, std::size_t total_conversations);

std::string summary_csv(const LabelSummary& s);
std::string summary_table(const LabelSummary& s);

// Collapses per-PR merge inheritance into one label per segment. Segments whose
// linked PRs disagree stay unlabeled; ambiguous credit is worse than none.
std::map<std::string, bool> collapse_merge(
    const std::vector<std::map<std::string, bool>>& per_pr);

}  // namespace traceval::labels
