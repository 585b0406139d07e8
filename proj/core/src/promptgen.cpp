#include "punc/promptgen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <set>
#include <unordered_set>

#include "punc/errors.hpp"
#include "punc/hash.hpp"
#include "punc/textsim.hpp"

namespace punc::promptgen {

namespace {

constexpr std::array<std::string_view, 18> kFunctionWords = {
    "a", "an", "the", "of", "in", "on", "at", "to", "for",
    "with", "and", "or", "is", "are", "by", "from", "as", "its"};

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

bool is_function_word(std::string_view word) {
  const auto toks = textsim::tokenize(word);
  if (toks.size() != 1) return false;
  return std::find(kFunctionWords.begin(), kFunctionWords.end(), toks[0]) != kFunctionWords.end();
}

std::vector<std::string> split_code_points(std::string_view word) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < word.size();) {
    std::size_t len = 1;
    const auto b = static_cast<unsigned char>(word[i]);
    if ((b & 0xE0) == 0xC0) len = 2;
    else if ((b & 0xF0) == 0xE0) len = 3;
    else if ((b & 0xF8) == 0xF0) len = 4;
    len = std::min(len, word.size() - i);
    out.emplace_back(word.substr(i, len));
    i += len;
  }
  return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep = "") {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

struct Segmented {
  std::string leading;
  std::string trailing;
  std::vector<std::string> words;
  std::vector<std::string> separators;  // separators[i] precedes words[i]; separators[0] is empty
};

Segmented segment(std::string_view text) {
  Segmented s;
  std::size_t i = 0;
  while (i < text.size() && is_space(text[i])) ++i;
  s.leading = std::string(text.substr(0, i));
  std::string pending_sep;
  while (i < text.size()) {
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    s.separators.push_back(s.words.empty() ? std::string() : pending_sep);
    s.words.emplace_back(text.substr(i, j - i));
    std::size_t k = j;
    while (k < text.size() && is_space(text[k])) ++k;
    pending_sep = std::string(text.substr(j, k - j));
    i = k;
  }
  s.trailing = pending_sep;
  return s;
}

enum Op : std::uint64_t { kDeleteLast = 1, kDeleteInterior, kSwap, kDuplicate, kDropWord };

// Returns nullopt when the word is dropped.
std::optional<std::string> corrupt_word(const std::string& word, std::size_t index,
                                        const CorruptionPlan& plan, std::uint64_t nonce) {
  const std::string key = std::to_string(index);
  auto chars = split_code_points(word);
  const std::size_t len = chars.size();
  auto draw = [&](Op op) { return keyed_uniform(plan.seed, nonce, key, op); };
  auto position = [&](Op op, std::size_t range) {
    return static_cast<std::size_t>(keyed_u64(plan.seed, nonce, key, op + 100) % range);
  };

  if (len > 2 && draw(kDeleteLast) < plan.delete_last) {
    chars.pop_back();
    return join(chars);
  }
  if (len > 2 && draw(kDeleteInterior) < plan.delete_interior) {
    chars.erase(chars.begin() + static_cast<std::ptrdiff_t>(1 + position(kDeleteInterior, len - 2)));
    return join(chars);
  }
  if (len >= 2 && draw(kSwap) < plan.swap_adjacent) {
    const std::size_t p = position(kSwap, len - 1);
    std::swap(chars[p], chars[p + 1]);
    return join(chars);
  }
  if (len >= 1 && draw(kDuplicate) < plan.duplicate_char) {
    const std::size_t p = position(kDuplicate, len);
    chars.insert(chars.begin() + static_cast<std::ptrdiff_t>(p), chars[p]);
    return join(chars);
  }
  if (is_function_word(word) && draw(kDropWord) < plan.drop_function_word) {
    return std::nullopt;
  }
  return word;
}

void check_field(const std::string& value, const char* what) {
  if (value.find_first_of("\t\n\r") != std::string::npos) {
    throw PreconditionError(std::string(what) + " contains a tab or newline: '" + value + "'");
  }
}

}  // namespace

PromptGroup PromptGroup::custom(std::string tag) {
  PromptGroup g(Kind::custom);
  g.tag_ = std::move(tag);
  return g;
}

PromptGroup PromptGroup::parse(std::string_view name) {
  static constexpr std::array<std::pair<std::string_view, Kind>, 8> kNames = {{
      {"normal", Kind::normal},
      {"vague", Kind::vague},
      {"corrupt_l1", Kind::corrupt_l1},
      {"corrupt_l2", Kind::corrupt_l2},
      {"adversarial", Kind::adversarial},
      {"ood_remote_sensing", Kind::ood_remote_sensing},
      {"ood_texture", Kind::ood_texture},
      {"ood_microscopic", Kind::ood_microscopic},
  }};
  for (const auto& [n, k] : kNames) {
    if (n == name) return PromptGroup(k);
  }
  if (name.empty()) throw ParseError("empty group name");
  if (name.starts_with("custom:")) return custom(std::string(name.substr(7)));
  return custom(std::string(name));
}

std::string PromptGroup::name() const {
  switch (kind_) {
    case Kind::normal: return "normal";
    case Kind::vague: return "vague";
    case Kind::corrupt_l1: return "corrupt_l1";
    case Kind::corrupt_l2: return "corrupt_l2";
    case Kind::adversarial: return "adversarial";
    case Kind::ood_remote_sensing: return "ood_remote_sensing";
    case Kind::ood_texture: return "ood_texture";
    case Kind::ood_microscopic: return "ood_microscopic";
    case Kind::custom: return tag_;
  }
  return tag_;
}

std::string content_id(std::string_view text) { return "p" + sha256_hex(text).substr(0, 16); }

std::vector<std::string> default_vague_templates() {
  return {"An image of ***", "A picture of ***"};
}

std::vector<PromptRecord> vague_prompts(const std::vector<std::string>& class_names,
                                        const std::vector<std::string>& templates,
                                        std::size_t count, std::uint64_t seed) {
  for (const auto& t : templates) {
    const auto first = t.find(kPlaceholder);
    if (first == std::string::npos || t.find(kPlaceholder, first + 1) != std::string::npos) {
      throw PreconditionError("template must contain exactly one '***': '" + t + "'");
    }
  }
  std::vector<std::string> texts;
  for (const auto& t : templates) {
    const auto at = t.find(kPlaceholder);
    for (const auto& c : class_names) {
      texts.push_back(t.substr(0, at) + c + t.substr(at + kPlaceholder.size()));
    }
  }
  SplitMix64 rng(mix64(seed ^ 0x7661677565ULL));
  for (std::size_t i = texts.size(); i > 1; --i) {
    std::swap(texts[i - 1], texts[rng.below(i)]);
  }
  texts.resize(std::min(count, texts.size()));

  std::vector<PromptRecord> out;
  std::set<std::string> seen;
  for (auto& text : texts) {
    PromptRecord r;
    r.id = content_id(text);
    for (int k = 2; !seen.insert(r.id).second; ++k) r.id = content_id(text) + "-" + std::to_string(k);
    r.text = std::move(text);
    r.group = PromptGroup::Kind::vague;
    out.push_back(std::move(r));
  }
  return out;
}

void CorruptionPlan::validate() const {
  for (double p : {delete_last, delete_interior, swap_adjacent, duplicate_char, drop_function_word}) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("corruption probabilities must lie in [0,1]");
  }
  if (!(l2_keep_fraction > 0.0 && l2_keep_fraction <= 1.0)) {
    throw ConfigError("l2_keep_fraction must lie in (0,1]");
  }
}

CorruptionPlan CorruptionPlan::none(std::uint64_t seed) {
  CorruptionPlan p;
  p.seed = seed;
  p.delete_last = p.delete_interior = p.swap_adjacent = p.duplicate_char = p.drop_function_word = 0.0;
  p.l2_keep_fraction = 1.0;
  return p;
}

std::size_t word_count(std::string_view text) { return segment(text).words.size(); }

std::string corrupt_l1(std::string_view prompt, const CorruptionPlan& plan, std::uint64_t nonce) {
  plan.validate();
  const Segmented s = segment(prompt);
  std::vector<std::optional<std::string>> words;
  words.reserve(s.words.size());
  for (std::size_t i = 0; i < s.words.size(); ++i) words.push_back(corrupt_word(s.words[i], i, plan, nonce));
  // Never drop every word.
  if (!s.words.empty() && std::none_of(words.begin(), words.end(), [](const auto& w) { return w.has_value(); })) {
    words.back() = s.words.back();
  }
  std::string out = s.leading;
  bool any_kept = false;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (!words[i]) continue;
    if (any_kept) out += s.separators[i];
    out += *words[i];
    any_kept = true;
  }
  out += s.trailing;
  return out;
}

std::string corrupt_l2(std::string_view prompt, const CorruptionPlan& plan, std::uint64_t nonce) {
  plan.validate();
  const std::vector<std::string> words = segment(prompt).words;
  const std::size_t n = words.size();
  if (n == 0) return {};
  // The epsilon guards products like 0.3 * 10 = 3.0000000000000004.
  auto keep = static_cast<std::size_t>(std::ceil(plan.l2_keep_fraction * static_cast<double>(n) - 1e-9));
  keep = std::clamp<std::size_t>(keep, 1, n);

  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  SplitMix64 rng(keyed_u64(plan.seed, nonce, "l2-keep"));
  for (std::size_t i = 0; i < keep; ++i) {
    std::swap(idx[i], idx[i + rng.below(n - i)]);
  }
  idx.resize(keep);
  std::sort(idx.begin(), idx.end());

  // Same per-word noise as level 1 (same keys), minus word dropping.
  CorruptionPlan no_drop = plan;
  no_drop.drop_function_word = 0.0;
  std::vector<std::string> kept;
  kept.reserve(keep);
  for (std::size_t i : idx) kept.push_back(*corrupt_word(words[i], i, no_drop, nonce));
  return join(kept, " ");
}

std::vector<PromptRecord> corrupt_dataset(const std::vector<PromptRecord>& normal,
                                          const CorruptionPlan& plan, PromptGroup::Kind level) {
  if (level != PromptGroup::Kind::corrupt_l1 && level != PromptGroup::Kind::corrupt_l2) {
    throw PreconditionError("corruption level must be corrupt_l1 or corrupt_l2");
  }
  std::vector<PromptRecord> out;
  out.reserve(normal.size());
  for (const auto& r : normal) {
    const std::uint64_t nonce = fnv1a64(r.id);
    PromptRecord c;
    c.group = level;
    c.provenance = r.id;
    if (level == PromptGroup::Kind::corrupt_l1) {
      c.id = r.id + ".l1";
      c.text = corrupt_l1(r.text, plan, nonce);
    } else {
      c.id = r.id + ".l2";
      c.text = corrupt_l2(r.text, plan, nonce);
    }
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<PromptRecord> parse_prompt_dataset(std::istream& in, const PromptGroup& default_group) {
  std::vector<PromptRecord> out;
  std::unordered_set<std::string> explicit_ids;
  std::unordered_set<std::string> all_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (std::all_of(line.begin(), line.end(), is_space)) continue;

    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      const auto tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    PromptRecord r;
    if (fields.size() == 1) {
      r.text = fields[0];
      r.group = default_group;
    } else if (fields.size() == 3 || fields.size() == 4) {
      r.id = fields[0];
      try {
        r.group = fields[1].empty() ? default_group : PromptGroup::parse(fields[1]);
      } catch (const ParseError& e) {
        throw ParseError(e.what(), line_no);
      }
      r.text = fields[2];
      if (fields.size() == 4 && !fields[3].empty()) r.provenance = fields[3];
    } else {
      throw ParseError("expected 3 tab-separated fields (id, group, text), got " +
                           std::to_string(fields.size()),
                       line_no);
    }
    if (r.text.empty()) throw ParseError("empty prompt text", line_no);

    if (!r.id.empty()) {
      if (!explicit_ids.insert(r.id).second) throw ParseError("duplicate id '" + r.id + "'", line_no);
      all_ids.insert(r.id);
    } else {
      const std::string base = content_id(r.text);
      r.id = base;
      for (int k = 2; all_ids.count(r.id); ++k) r.id = base + "-" + std::to_string(k);
      all_ids.insert(r.id);
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<PromptRecord> load_prompt_dataset(const std::filesystem::path& path,
                                              const PromptGroup& default_group) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open prompt file " + path.string());
  try {
    return parse_prompt_dataset(in, default_group);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_prompt_dataset(std::ostream& out, const std::vector<PromptRecord>& records) {
  for (const auto& r : records) {
    check_field(r.id, "id");
    check_field(r.text, "text");
    const std::string group = r.group.name();
    check_field(group, "group");
    out << r.id << '\t' << group << '\t' << r.text;
    if (r.provenance) {
      check_field(*r.provenance, "provenance");
      out << '\t' << *r.provenance;
    }
    out << '\n';
  }
}

void save_prompt_dataset(const std::filesystem::path& path,
                         const std::vector<PromptRecord>& records) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write prompt file " + path.string());
  write_prompt_dataset(out, records);
}

}  // namespace punc::promptgen
