#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace choiceleak {

inline constexpr std::int64_t kDefaultWindowMs = 10000;

struct Segment {
  std::string id;
  std::int64_t duration_ms = 0;
  std::int64_t chunk_ms = 0;

  bool operator==(const Segment&) const = default;
};

/// A binary question shown at the end of `after_segment`.
///
/// The same question may be reachable from several segments (branches that
/// rejoin the main story), in which case one ChoicePoint is listed per
/// `after_segment` and all of them must agree on the options and window.
struct ChoicePoint {
  std::string qid;
  std::string after_segment;
  std::string default_next;
  std::string alt_next;
  std::int64_t window_ms = kDefaultWindowMs;

  bool operator==(const ChoicePoint&) const = default;
};

struct ScriptGraph {
  std::string entry;
  std::vector<Segment> segments;
  std::vector<ChoicePoint> choices;

  const Segment* find_segment(std::string_view id) const;
  const ChoicePoint* choice_after(std::string_view segment_id) const;
  const ChoicePoint* find_choice(std::string_view qid) const;

  /// Number of distinct questions (qids).
  std::size_t question_count() const;

  bool operator==(const ScriptGraph&) const = default;
};

enum class Branch : std::uint8_t { Default = 0, Alt = 1 };

struct Decision {
  std::string qid;
  Branch taken = Branch::Default;

  auto operator<=>(const Decision&) const = default;
};

/// Decisions in encounter order. Ordering is lexicographic with Default < Alt.
struct ChoicePath {
  std::vector<Decision> decisions;

  std::size_t size() const { return decisions.size(); }
  bool empty() const { return decisions.empty(); }
  auto operator<=>(const ChoicePath&) const = default;
};

std::string_view to_string(Branch b) noexcept;

/// "Q1=D,Q2=A". An empty string is the empty path.
std::string format_path(const ChoicePath& path);
ChoicePath parse_path(std::string_view text);

/// Parses and validates script JSON; throws ParseError or ValidationError.
ScriptGraph load_script(std::string_view json_text);
ScriptGraph load_script_file(const std::string& path);
std::string write_script(const ScriptGraph& graph);

/// Empty iff the graph satisfies every structural invariant. Each message
/// names the offending segment or question.
std::vector<std::string> validate_graph(const ScriptGraph& graph);

/// All distinct choice paths from the entry, in lexicographic order.
///
/// A path ends at a segment without a choice point or after `max_questions`
/// decisions. Truncating a path that already revisited a question (a replay
/// cycle) throws DepthExceeded.
std::vector<ChoicePath> enumerate_paths(const ScriptGraph& graph, std::size_t max_questions);

/// Segment sequence played for `path`; length is 1 + path.size().
/// Throws InconsistentPath if a decision does not match the question met at
/// that position.
std::vector<std::string> segments_for_path(const ScriptGraph& graph, const ChoicePath& path);

/// A linear story: s0 -> Q1 -> {S1, S1'} -> Q2 -> ... with both branches
/// of every question leading to the next one, so it has 2^questions paths.
ScriptGraph make_chain_script(std::size_t questions, std::int64_t segment_ms, std::int64_t chunk_ms,
                              std::int64_t window_ms = kDefaultWindowMs);

}  // namespace choiceleak
