#pragma once

#include <map>
#include <string>
#include <vector>

#include "owqf/evaluator.hpp"
#include "owqf/feature_world.hpp"
#include "owqf/prompt_simulator.hpp"

namespace owqf {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kSchemaVersion = 1;

std::string read_text(const std::string& path);
// Writes atomically enough for our purposes: creates parent directories and
// throws IoError when the file cannot be written.
void write_text(const std::string& path, const std::string& text);

// One JSON object per line: {image_id, seed, boxes, labels}.
std::string scenes_to_jsonl(const std::vector<Scene>& scenes);
std::vector<Scene> scenes_from_jsonl(const std::string& text);

// {schema, d_text, categories: [{id, name, bucket, embedding_seed}]}.
// Embeddings are regenerated from their seeds on load.
std::string category_table_to_json(const CategoryTable& table);
CategoryTable category_table_from_json(const std::string& text);

// {schema, predictions: [{image_id, box, score, label}]}.
std::string predictions_to_json(const std::vector<Detection>& dets);
std::vector<Detection> predictions_from_json(const std::string& text);

std::string report_to_json(const EvalReport& report, const CategoryTable& table);

// Accepts one {image_id, points: [{x, y, score, label}]} object or an array
// of them. Labels are category ids or names; unknown names map to
// kUnknownLabel.
std::map<std::size_t, std::vector<PromptPoint>> prompts_from_json(
    const std::string& text, const CategoryTable& table);
std::string prompts_to_json(const std::map<std::size_t, std::vector<PromptPoint>>& prompts,
                            const CategoryTable& table);

// JSON array of category ids or names, resolved against the table, sorted
// and deduplicated.
std::vector<std::size_t> category_list_from_json(const std::string& text,
                                                 const CategoryTable& table);

// Minimal reader for LVIS-style annotation files: images with width and
// height, annotations with absolute [x, y, w, h] boxes, categories with a
// frequency letter. Category ids are remapped to table order.
struct LvisData {
  std::vector<Scene> scenes;
  CategoryTable table;
  std::vector<std::size_t> original_ids;  // per table index
};
LvisData lvis_from_json(const std::string& text, std::size_t d_text);

}  // namespace owqf
