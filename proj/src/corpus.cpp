#include "ilac/corpus.hpp"

#include <fstream>
#include <sstream>

#include "ilac/errors.hpp"
#include "ilac/json_io.hpp"

namespace ilac {

using nlohmann::json;

namespace {

json scene_to_json(const SceneInstance& scene, bool include_synthesized) {
  json objects = json::array();
  for (const auto& o : scene.objects) {
    json jo{{"label", o.label}, {"bbox", o.bbox.coords()}};
    if (include_synthesized) {
      jo["feature"] = o.feature;
      jo["soft_label"] = o.soft_label;
    }
    objects.push_back(std::move(jo));
  }
  json relations = json::array();
  for (const auto& r : scene.relations) relations.push_back({{"subj", r.subj}, {"obj", r.obj}, {"pred", r.predicate}});
  json j{{"id", scene.id}, {"context_id", nullptr}, {"objects", std::move(objects)}, {"relations", std::move(relations)}};
  if (scene.context_id) j["context_id"] = *scene.context_id;
  return j;
}

SceneInstance scene_from_json(const json& j, const FeatureSpace& space) {
  SceneInstance scene;
  scene.id = j.at("id").get<std::string>();
  if (auto it = j.find("context_id"); it != j.end() && !it->is_null()) scene.context_id = it->get<int>();
  for (const auto& jo : j.at("objects")) {
    SceneObject o;
    o.label = jo.at("label").get<std::size_t>();
    const auto box = jo.at("bbox").get<std::vector<double>>();
    if (box.size() != 4) throw InputError("scene '" + scene.id + "': bbox must have 4 coordinates");
    o.bbox = {box[0], box[1], box[2], box[3]};
    const std::size_t index = scene.objects.size();
    if (o.label >= space.spec().n_obj_classes) {
      throw InputError("scene '" + scene.id + "': object label " + std::to_string(o.label) + " out of range");
    }
    if (auto it = jo.find("feature"); it != jo.end() && !it->is_null()) {
      o.feature = it->get<std::vector<double>>();
    } else {
      o.feature = space.synthesize_feature(scene.id, index, o.label);
    }
    if (auto it = jo.find("soft_label"); it != jo.end() && !it->is_null()) {
      o.soft_label = it->get<std::vector<double>>();
    } else {
      o.soft_label = space.synthesize_soft_label(scene.id, index, o.label);
    }
    scene.objects.push_back(std::move(o));
  }
  for (const auto& jr : j.at("relations")) {
    scene.relations.push_back(
        {jr.at("subj").get<std::size_t>(), jr.at("obj").get<std::size_t>(), jr.at("pred").get<std::size_t>()});
  }
  const auto& spec = space.spec();
  validate_scene(scene, spec.n_obj_classes, spec.n_pred_classes, spec.feat_dim);
  return scene;
}

}  // namespace

std::string corpus_to_string(const Corpus& corpus, bool include_synthesized) {
  std::ostringstream out;
  json header{{"format", kCorpusFormat}, {"spec", corpus.spec}, {"seed", corpus.spec.seed}, {"split", corpus.split}};
  out << header.dump() << '\n';
  for (const auto& scene : corpus.scenes) out << scene_to_json(scene, include_synthesized).dump() << '\n';
  return out.str();
}

void write_corpus(const std::filesystem::path& path, const Corpus& corpus, bool include_synthesized) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open " + path.string() + " for writing");
  out << corpus_to_string(corpus, include_synthesized);
  if (!out) throw InputError("failed writing " + path.string());
}

Corpus parse_corpus(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  Corpus corpus;
  std::optional<FeatureSpace> space;
  try {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      json j = json::parse(line);
      if (!space) {
        const auto format = j.value("format", std::string{});
        if (format != kCorpusFormat) {
          throw VersionError(origin + ": unsupported corpus format '" + format + "' (expected " + kCorpusFormat + ")");
        }
        if (j.contains("spec")) j.at("spec").get_to(corpus.spec);
        if (auto it = j.find("seed"); it != j.end() && !it->is_null()) corpus.spec.seed = it->get<std::uint64_t>();
        corpus.split = j.value("split", std::string{});
        space.emplace(corpus.spec);
        continue;
      }
      corpus.scenes.push_back(scene_from_json(j, *space));
    }
  } catch (const json::exception& e) {
    throw InputError(origin + ":" + std::to_string(line_no) + ": " + e.what());
  } catch (const SpecError& e) {
    throw InputError(origin + ": invalid corpus header spec: " + e.what());
  }
  if (!space) throw InputError(origin + ": empty corpus file (no header line)");
  return corpus;
}

Corpus read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open corpus " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_corpus(buf.str(), path.string());
}

Dataset make_dataset(const std::vector<SceneInstance>& scenes, const FeatureSpace& space, const ModelConfig& cfg) {
  Dataset data;
  for (const auto& scene : scenes) {
    if (scene.n_objects() < 2) continue;
    data.inputs.push_back(make_graph_input(scene, cfg, [&](std::size_t i, std::size_t j) {
      return space.union_box_feature(scene, i, j);
    }));
    data.scenes.push_back(scene);
  }
  return data;
}

}  // namespace ilac
