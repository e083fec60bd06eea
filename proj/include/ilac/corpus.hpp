#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ilac/model.hpp"
#include "ilac/scene.hpp"
#include "ilac/synthetic.hpp"

namespace ilac {

inline constexpr const char* kCorpusFormat = "ilac-corpus/1";

// One split of a corpus file: the header spec plus its scenes.
struct Corpus {
  GenSpec spec;
  std::string split;  // "train" | "val" | "test" | free-form for converted data
  std::vector<SceneInstance> scenes;
};

// Line-delimited JSON: a header line, then one scene per line. With
// `include_synthesized` false, feature and soft_label fields are omitted;
// readers rebuild them from the header seed.
void write_corpus(const std::filesystem::path& path, const Corpus& corpus, bool include_synthesized = true);
std::string corpus_to_string(const Corpus& corpus, bool include_synthesized = true);

// Throws InputError for missing/empty/malformed files and VersionError for an
// unknown format tag. Absent feature/soft_label fields are synthesized.
Corpus read_corpus(const std::filesystem::path& path);
Corpus parse_corpus(const std::string& text, const std::string& origin = "<memory>");

// Model inputs plus the annotations needed for losses and metrics.
struct Dataset {
  std::vector<SceneInstance> scenes;
  std::vector<GraphInput> inputs;

  std::size_t size() const { return scenes.size(); }
  bool empty() const { return scenes.empty(); }
};

// Scenes with fewer than two objects are dropped (they have no graph).
Dataset make_dataset(const std::vector<SceneInstance>& scenes, const FeatureSpace& space, const ModelConfig& cfg);

}  // namespace ilac
