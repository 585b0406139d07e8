#pragma once

// Prompt dataset construction: vague templates, rule-based corruption at two
// levels, and the tab-separated prompt file format.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace punc::promptgen {

class PromptGroup {
 public:
  enum class Kind {
    normal,
    vague,
    corrupt_l1,
    corrupt_l2,
    adversarial,
    ood_remote_sensing,
    ood_texture,
    ood_microscopic,
    custom,
  };

  PromptGroup() = default;
  PromptGroup(Kind kind) : kind_(kind) {}  // NOLINT(google-explicit-constructor)
  static PromptGroup custom(std::string tag);

  /// Accepts the enum names, "custom:<tag>", and treats any other word as a custom tag.
  static PromptGroup parse(std::string_view name);

  Kind kind() const noexcept { return kind_; }
  const std::string& tag() const noexcept { return tag_; }
  std::string name() const;

  bool is_corruption() const noexcept {
    return kind_ == Kind::corrupt_l1 || kind_ == Kind::corrupt_l2;
  }
  bool is_ood() const noexcept {
    return kind_ == Kind::ood_remote_sensing || kind_ == Kind::ood_texture ||
           kind_ == Kind::ood_microscopic;
  }

  friend bool operator==(const PromptGroup&, const PromptGroup&) = default;

 private:
  Kind kind_ = Kind::normal;
  std::string tag_;
};

struct PromptRecord {
  std::string id;
  std::string text;
  PromptGroup group;
  std::optional<std::string> provenance;  // parent id for corruptions

  friend bool operator==(const PromptRecord&, const PromptRecord&) = default;
};

/// Stable id derived from the text: "p" + 16 hex digits of SHA-256.
std::string content_id(std::string_view text);

inline constexpr std::string_view kPlaceholder = "***";

/// One record per (template, class) pair, shuffled deterministically by `seed`,
/// truncated to `count`. Templates must contain exactly one "***".
std::vector<PromptRecord> vague_prompts(const std::vector<std::string>& class_names,
                                        const std::vector<std::string>& templates,
                                        std::size_t count, std::uint64_t seed);

/// Templates used for the vague set when none are given.
std::vector<std::string> default_vague_templates();

struct CorruptionPlan {
  std::uint64_t seed = 0;
  // Per-token probabilities, tried in this order; at most one applies per token.
  double delete_last = 0.05;
  double delete_interior = 0.05;
  double swap_adjacent = 0.05;
  double duplicate_char = 0.05;
  double drop_function_word = 0.10;
  double l2_keep_fraction = 0.5;

  /// Throws ConfigError when a probability is outside [0,1] or keep fraction outside (0,1].
  void validate() const;

  static CorruptionPlan none(std::uint64_t seed = 0);
};

/// Level 1: spelling and grammar noise. Whitespace between surviving words is
/// preserved; at least one word always survives.
std::string corrupt_l1(std::string_view prompt, const CorruptionPlan& plan, std::uint64_t nonce);

/// Level 2: keep ceil(keep_fraction * n) of the n input words, in original order,
/// each with the same character noise level 1 gives it. Joined by single spaces.
std::string corrupt_l2(std::string_view prompt, const CorruptionPlan& plan, std::uint64_t nonce);

/// Whitespace-separated word count.
std::size_t word_count(std::string_view text);

/// Corrupted copies of `normal` records with provenance set and ids "<parent>.l1"/"<parent>.l2".
std::vector<PromptRecord> corrupt_dataset(const std::vector<PromptRecord>& normal,
                                          const CorruptionPlan& plan, PromptGroup::Kind level);

/// Prompt file: UTF-8, one record per line `id<TAB>group<TAB>text[<TAB>parent]`,
/// '#' comment lines and blank lines ignored. An empty id becomes content_id(text)
/// and an empty group becomes `default_group`. Duplicate explicit ids are rejected.
std::vector<PromptRecord> parse_prompt_dataset(std::istream& in, const PromptGroup& default_group);

std::vector<PromptRecord> load_prompt_dataset(const std::filesystem::path& path,
                                              const PromptGroup& default_group);

/// Writes exactly the format read by parse_prompt_dataset. Throws PreconditionError
/// for fields containing tabs or newlines.
void write_prompt_dataset(std::ostream& out, const std::vector<PromptRecord>& records);

void save_prompt_dataset(const std::filesystem::path& path,
                         const std::vector<PromptRecord>& records);

}  // namespace punc::promptgen
