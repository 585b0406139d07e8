#include "punc/conceptworld.hpp"

#include <algorithm>
#include <cstring>

#include "punc/errors.hpp"
#include "punc/hash.hpp"
#include "punc/textsim.hpp"

namespace punc::conceptworld {

namespace {

constexpr std::string_view kMagic = "PCIM";
constexpr unsigned char kVersion = 1;
constexpr std::uint64_t kDropStream = 1;
constexpr std::uint64_t kInjectStream = 2;
constexpr std::uint64_t kPerturbStream = 3;
constexpr std::uint64_t kFreshNonceTag = 0x5245434f4e535452ULL;  // "RECONSTR"

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>((v >> 24) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>(v & 0xff));
}

std::uint32_t get_u32(std::string_view in, std::size_t& pos) {
  if (pos + 4 > in.size()) throw ParseError("pseudo-image payload truncated");
  std::uint32_t v = 0;
  for (int k = 0; k < 4; ++k) v = (v << 8) | static_cast<unsigned char>(in[pos + k]);
  pos += 4;
  return v;
}

void validate_concept_id(const std::string& id) {
  const textsim::TokenSequence toks = textsim::tokenize(id);
  if (toks.size() != 1 || toks[0] != id) {
    throw ConfigError("concept id '" + id +
                      "' is not a normalized token (lowercase, no spaces, no edge punctuation)");
  }
}

}  // namespace

std::size_t ConceptSet::intersection_size(const ConceptSet& other) const {
  std::size_t n = 0;
  auto a = concepts_.begin();
  auto b = other.concepts_.begin();
  while (a != concepts_.end() && b != other.concepts_.end()) {
    if (*a < *b) {
      ++a;
    } else if (*b < *a) {
      ++b;
    } else {
      ++n;
      ++a;
      ++b;
    }
  }
  return n;
}

ConceptWorld::ConceptWorld(std::vector<std::string> vocabulary, std::vector<std::string> known,
                           WorldParams params)
    : vocabulary_(vocabulary.begin(), vocabulary.end()),
      known_(known.begin(), known.end()),
      params_(params) {
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(params_.aleatoric_rate)) throw ConfigError("aleatoric_rate must lie in [0,1]");
  if (!in_unit(params_.epistemic_drop)) throw ConfigError("epistemic_drop must lie in [0,1]");
  if (!(params_.vagueness_k >= 0.0)) throw ConfigError("vagueness_k must be >= 0");
  for (const auto& c : vocabulary_) {
    validate_concept_id(c);
    max_concept_words_ =
        std::max<std::size_t>(max_concept_words_, 1 + std::count(c.begin(), c.end(), '_'));
  }
  for (const auto& c : known_) {
    if (!vocabulary_.contains(c)) throw ConfigError("known concept '" + c + "' not in vocabulary");
  }
}

double ConceptWorld::injection_probability(std::size_t prompt_size) const {
  const double size = static_cast<double>(std::max<std::size_t>(1, prompt_size));
  const double scale = std::max(1.0, params_.vagueness_k / size);
  return std::min(1.0, params_.aleatoric_rate * scale);
}

ConceptSet ConceptWorld::extract(std::string_view text) const {
  const textsim::TokenSequence seq = textsim::tokenize(text);
  const auto& toks = seq.tokens();
  ConceptSet out;
  for (std::size_t i = 0; i < toks.size();) {
    std::size_t matched = 0;
    const std::size_t longest = std::min(max_concept_words_, toks.size() - i);
    for (std::size_t len = longest; len >= 1 && matched == 0; --len) {
      std::string candidate = toks[i];
      for (std::size_t k = 1; k < len; ++k) candidate += "_" + toks[i + k];
      if (vocabulary_.contains(candidate)) {
        out.insert(std::move(candidate));
        matched = len;
      }
    }
    i += matched ? matched : 1;
  }
  return out;
}

ConceptSet generate_concepts(const ConceptSet& prompt_concepts, const ConceptWorld& world,
                             std::uint64_t nonce) {
  const WorldParams& p = world.params();
  ConceptSet out;
  for (const auto& c : prompt_concepts) {
    if (!world.in_vocabulary(c)) {
      throw PreconditionError("concept '" + c + "' is not in the world vocabulary");
    }
    if (world.is_known(c) || keyed_uniform(p.seed, nonce, c, kDropStream) >= p.epistemic_drop) {
      out.insert(c);
    }
  }
  const double inject = world.injection_probability(prompt_concepts.size());
  if (inject > 0.0) {
    for (const auto& c : world.known()) {
      if (prompt_concepts.contains(c)) continue;
      if (keyed_uniform(p.seed, nonce, c, kInjectStream) < inject) out.insert(c);
    }
  }
  return out;
}

ConceptSet perturb_concepts(const ConceptSet& input, const ConceptSet& prompt_concepts,
                            const ConceptWorld& world, std::uint64_t seed, double strength,
                            std::string_view salt) {
  if (!(strength >= 0.0 && strength <= 1.0)) {
    throw PreconditionError("perturbation strength must lie in [0,1]");
  }
  const ConceptSet fresh = generate_concepts(prompt_concepts, world, mix64(seed ^ kFreshNonceTag));
  std::set<std::string> candidates(input.begin(), input.end());
  candidates.insert(fresh.begin(), fresh.end());

  ConceptSet out;
  std::string key;
  for (const auto& c : candidates) {
    key.assign(salt);
    key.push_back('/');
    key += c;
    const bool redraw = keyed_uniform(world.params().seed, seed, key, kPerturbStream) < strength;
    if (redraw ? fresh.contains(c) : input.contains(c)) out.insert(c);
  }
  return out;
}

ConceptPrecisionRecall concept_precision_recall(const ConceptSet& prompt_concepts,
                                                const ConceptSet& image_concepts) {
  const auto common = static_cast<double>(prompt_concepts.intersection_size(image_concepts));
  ConceptPrecisionRecall pr;
  pr.precision = image_concepts.empty() ? 0.0 : common / static_cast<double>(image_concepts.size());
  pr.recall = prompt_concepts.empty() ? 0.0 : common / static_cast<double>(prompt_concepts.size());
  pr.degenerate = image_concepts.empty() || prompt_concepts.empty();
  return pr;
}

double jaccard(const ConceptSet& a, const ConceptSet& b) {
  if (a.empty() && b.empty()) return 1.0;
  const auto common = static_cast<double>(a.intersection_size(b));
  return common / (static_cast<double>(a.size() + b.size()) - common);
}

std::string render_pseudo_image(const ConceptSet& image_concepts, const ConceptWorld& world) {
  std::string out(kMagic);
  out.push_back(static_cast<char>(kVersion));
  put_u32(out, static_cast<std::uint32_t>(image_concepts.size()));
  for (const auto& c : image_concepts) {
    if (!world.in_vocabulary(c)) {
      throw PreconditionError("concept '" + c + "' is not in the world vocabulary");
    }
    put_u32(out, static_cast<std::uint32_t>(c.size()));
    out += c;
  }
  return out;
}

bool is_pseudo_image(std::string_view payload) noexcept {
  return payload.size() >= kMagic.size() + 5 && payload.starts_with(kMagic);
}

ConceptSet decode_pseudo_image(std::string_view payload) {
  if (!is_pseudo_image(payload)) throw ParseError("not a pseudo-image payload");
  std::size_t pos = kMagic.size();
  const auto version = static_cast<unsigned char>(payload[pos++]);
  if (version != kVersion) {
    throw ParseError("unsupported pseudo-image version " + std::to_string(version));
  }
  const std::uint32_t count = get_u32(payload, pos);
  ConceptSet out;
  std::string previous;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t len = get_u32(payload, pos);
    if (len == 0 || pos + len > payload.size()) throw ParseError("pseudo-image entry truncated");
    std::string id(payload.substr(pos, len));
    pos += len;
    if (i > 0 && !(previous < id)) throw ParseError("pseudo-image ids not strictly sorted");
    previous = id;
    out.insert(std::move(id));
  }
  if (pos != payload.size()) throw ParseError("trailing bytes after pseudo-image");
  return out;
}

std::string caption_pseudo_image(std::string_view payload, const ConceptWorld& world) {
  const ConceptSet concepts = decode_pseudo_image(payload);
  std::string out;
  for (const auto& c : concepts) {
    if (!world.in_vocabulary(c)) throw ParseError("pseudo-image concept '" + c + "' unknown to world");
    if (!out.empty()) out.push_back(' ');
    for (char ch : c) out.push_back(ch == '_' ? ' ' : ch);
  }
  return out;
}

}  // namespace punc::conceptworld
