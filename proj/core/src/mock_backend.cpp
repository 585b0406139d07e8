#include "punc/mock_backend.hpp"

#include <cmath>

#include "punc/errors.hpp"
#include "punc/hash.hpp"

namespace punc::backend {

namespace cw = punc::conceptworld;

MockBackend::MockBackend(BackendConfig config, cw::ConceptWorld world, CapabilitySet capabilities,
                         std::size_t embed_dim)
    : Backend(std::move(config)),
      world_(std::move(world)),
      capabilities_(std::move(capabilities)),
      embed_dim_(embed_dim) {
  if (embed_dim_ == 0) throw ConfigError("mock embedding dimension must be >= 1");
}

std::vector<double> MockBackend::token_vector(std::string_view token, std::size_t dim) {
  SplitMix64 rng(mix64(fnv1a64(token) ^ 0x656d626564ULL));
  std::vector<double> v(dim);
  double sq = 0.0;
  do {
    sq = 0.0;
    for (double& x : v) {
      x = rng.normal();
      sq += x * x;
    }
  } while (sq == 0.0);
  const double norm = std::sqrt(sq);
  for (double& x : v) x /= norm;
  return v;
}

cw::ConceptSet MockBackend::decode(const ImageRef& image) const {
  if (!image.has_payload()) {
    throw PreconditionError("mock backend needs an inline payload for image " + image.id);
  }
  try {
    return cw::decode_pseudo_image(image.payload);
  } catch (const ParseError& e) {
    throw PreconditionError(std::string("image is not a pseudo-image: ") + e.what());
  }
}

ImageRef MockBackend::do_generate(std::string_view prompt, std::uint64_t seed) {
  ++calls_;
  const cw::ConceptSet concepts = world_.extract(prompt);
  const cw::ConceptSet image = cw::generate_concepts(concepts, world_, seed);
  return ImageRef::from_payload(cw::render_pseudo_image(image, world_), producer(), seed);
}

std::string MockBackend::do_caption(const ImageRef& image, std::string_view /*instruction*/,
                                    int max_tokens) {
  ++calls_;
  decode(image);
  std::string caption;
  try {
    caption = cw::caption_pseudo_image(image.payload, world_);
  } catch (const ParseError& e) {
    throw PreconditionError(e.what());
  }
  return truncate_caption(caption, max_tokens);
}

std::vector<textsim::EmbeddingMatrix> MockBackend::do_embed(const std::vector<std::string>& texts) {
  ++calls_;
  std::vector<textsim::EmbeddingMatrix> out;
  out.reserve(texts.size());
  for (const auto& text : texts) {
    std::vector<std::vector<double>> rows;
    const textsim::TokenSequence seq = textsim::tokenize(text);
    for (const auto& tok : seq.tokens()) {
      rows.push_back(token_vector(tok, embed_dim_));
    }
    out.emplace_back(std::move(rows), embed_dim_);
  }
  return out;
}

bool MockBackend::do_probe(const ImageRef& image, std::string_view question) {
  ++calls_;
  const cw::ConceptSet present = decode(image);
  for (const auto& c : world_.extract(question)) {
    if (present.contains(c)) return true;
  }
  return false;
}

ImageRef MockBackend::do_reconstruct(const ImageRef& image, const ReconstructionSpec& spec,
                                     std::string_view prompt, std::uint64_t seed) {
  ++calls_;
  const cw::ConceptSet input = decode(image);
  const std::string salt =
      spec.kind == ReconstructionSpec::Kind::noise_to_t ? "noise" : "mask:" + spec.pattern;
  const cw::ConceptSet out =
      cw::perturb_concepts(input, world_.extract(prompt), world_, seed, spec.strength(), salt);
  return ImageRef::from_payload(cw::render_pseudo_image(out, world_), producer(), seed);
}

}  // namespace punc::backend
