#include "owqf/dataset_io.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace owqf {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

json parse(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw IoError(std::string(what) + " is not valid JSON: " + e.what());
  }
}

void check_schema(const json& doc, const char* what) {
  if (!doc.is_object() || !doc.contains("schema") || doc["schema"] != kSchemaVersion)
    throw IoError(std::string(what) + ": expected \"schema\": " +
                  std::to_string(kSchemaVersion));
}

Box box_from(const json& j) {
  if (!j.is_array() || j.size() != 4) throw IoError("a box must be [cx, cy, w, h]");
  return Box::make(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
                   j[3].get<double>());
}

std::size_t resolve_label(const json& j, const CategoryTable& table) {
  if (j.is_number_unsigned()) {
    const auto id = j.get<std::size_t>();
    return id < table.size() ? id : kUnknownLabel;
  }
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    for (const Category& c : table.categories)
      if (c.name == name) return c.id;
    return kUnknownLabel;
  }
  return kUnknownLabel;
}

}  // namespace

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  const std::filesystem::path p(path);
  std::error_code ec;
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("failed while writing " + path);
}

std::string scenes_to_jsonl(const std::vector<Scene>& scenes) {
  std::string out;
  for (const Scene& s : scenes) {
    ordered_json j;
    j["image_id"] = s.image_id;
    j["seed"] = s.seed;
    j["boxes"] = ordered_json::array();
    for (const Box& b : s.gt_boxes) j["boxes"].push_back({b.cx, b.cy, b.w, b.h});
    j["labels"] = s.gt_labels;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<Scene> scenes_from_jsonl(const std::string& text) {
  std::vector<Scene> scenes;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      Scene s;
      s.image_id = j.at("image_id").get<std::size_t>();
      s.seed = j.at("seed").get<std::uint64_t>();
      for (const json& b : j.at("boxes")) s.gt_boxes.push_back(box_from(b));
      s.gt_labels = j.at("labels").get<std::vector<std::size_t>>();
      if (s.gt_labels.size() != s.gt_boxes.size())
        throw IoError("boxes and labels differ in length");
      scenes.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw IoError("dataset line " + std::to_string(lineno) + ": " + e.what());
    } catch (const IoError& e) {
      throw IoError("dataset line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return scenes;
}

std::string category_table_to_json(const CategoryTable& table) {
  ordered_json doc;
  doc["schema"] = kSchemaVersion;
  doc["d_text"] = table.d_text;
  doc["categories"] = ordered_json::array();
  for (const Category& c : table.categories)
    doc["categories"].push_back({{"id", c.id},
                                 {"name", c.name},
                                 {"bucket", bucket_name(c.bucket)},
                                 {"embedding_seed", c.embedding_seed}});
  return doc.dump(2) + "\n";
}

CategoryTable category_table_from_json(const std::string& text) {
  const json doc = parse(text, "category table");
  check_schema(doc, "category table");
  CategoryTable table;
  try {
    table.d_text = doc.at("d_text").get<std::size_t>();
    for (const json& j : doc.at("categories")) {
      Category c;
      c.id = j.at("id").get<std::size_t>();
      c.name = j.at("name").get<std::string>();
      c.bucket = parse_bucket(j.at("bucket").get<std::string>());
      c.embedding_seed = j.at("embedding_seed").get<std::uint64_t>();
      c.embedding = CategoryTable::embedding_for(c.embedding_seed, table.d_text);
      if (c.id != table.categories.size())
        throw IoError("category ids must be 0, 1, 2, ... in order");
      table.categories.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    throw IoError(std::string("category table: ") + e.what());
  }
  return table;
}

std::string predictions_to_json(const std::vector<Detection>& dets) {
  ordered_json doc;
  doc["schema"] = kSchemaVersion;
  doc["predictions"] = ordered_json::array();
  for (const Detection& d : dets)
    doc["predictions"].push_back({{"image_id", d.image_id},
                                  {"box", {d.box.cx, d.box.cy, d.box.w, d.box.h}},
                                  {"score", d.score},
                                  {"label", d.label}});
  return doc.dump(2) + "\n";
}

std::vector<Detection> predictions_from_json(const std::string& text) {
  const json doc = parse(text, "predictions");
  check_schema(doc, "predictions");
  std::vector<Detection> dets;
  try {
    for (const json& j : doc.at("predictions")) {
      Detection d;
      d.image_id = j.at("image_id").get<std::size_t>();
      d.box = box_from(j.at("box"));
      d.score = j.at("score").get<double>();
      d.label = j.at("label").get<std::size_t>();
      dets.push_back(std::move(d));
    }
  } catch (const json::exception& e) {
    throw IoError(std::string("predictions: ") + e.what());
  }
  return dets;
}

std::string report_to_json(const EvalReport& r, const CategoryTable& table) {
  ordered_json doc;
  doc["schema"] = kSchemaVersion;
  doc["mode"] = mode_name(r.mode);
  doc["ap"] = r.ap;
  doc["ap_r"] = r.ap_r;
  doc["ap_c"] = r.ap_c;
  doc["ap_f"] = r.ap_f;
  doc["per_category"] = ordered_json::array();
  for (const CategoryAp& c : r.per_category)
    doc["per_category"].push_back({{"id", c.id},
                                   {"name", table.categories.at(c.id).name},
                                   {"bucket", bucket_name(c.bucket)},
                                   {"n_gt", c.n_gt},
                                   {"n_det", c.n_det},
                                   {"ap", c.ap}});
  return doc.dump(2) + "\n";
}

std::map<std::size_t, std::vector<PromptPoint>> prompts_from_json(
    const std::string& text, const CategoryTable& table) {
  json doc = parse(text, "prompts");
  if (doc.is_object()) doc = json::array({doc});
  if (!doc.is_array()) throw IoError("prompts: expected an object or an array");
  std::map<std::size_t, std::vector<PromptPoint>> out;
  try {
    for (const json& entry : doc) {
      auto& points = out[entry.at("image_id").get<std::size_t>()];
      for (const json& p : entry.at("points")) {
        PromptPoint pt;
        pt.x = p.at("x").get<double>();
        pt.y = p.at("y").get<double>();
        if (!(pt.x >= 0.0 && pt.x <= 1.0 && pt.y >= 0.0 && pt.y <= 1.0))
          throw IoError("prompt point outside the unit square");
        pt.score = p.value("score", 1.0);
        if (p.contains("label")) pt.proposed_label = resolve_label(p["label"], table);
        points.push_back(pt);
      }
    }
  } catch (const json::exception& e) {
    throw IoError(std::string("prompts: ") + e.what());
  }
  return out;
}

std::string prompts_to_json(const std::map<std::size_t, std::vector<PromptPoint>>& prompts,
                            const CategoryTable& table) {
  ordered_json doc = ordered_json::array();
  for (const auto& [id, points] : prompts) {
    ordered_json entry;
    entry["image_id"] = id;
    entry["points"] = ordered_json::array();
    for (const PromptPoint& p : points) {
      ordered_json j{{"x", p.x}, {"y", p.y}, {"score", p.score}};
      if (p.proposed_label < table.size())
        j["label"] = table.categories[p.proposed_label].name;
      entry["points"].push_back(std::move(j));
    }
    doc.push_back(std::move(entry));
  }
  return doc.dump(2) + "\n";
}

std::vector<std::size_t> category_list_from_json(const std::string& text,
                                                 const CategoryTable& table) {
  const json doc = parse(text, "category list");
  if (!doc.is_array()) throw IoError("category list must be a JSON array");
  std::set<std::size_t> ids;
  for (const json& j : doc) {
    const std::size_t id = resolve_label(j, table);
    if (id == kUnknownLabel)
      throw ConsistencyError("category list names unknown category " + j.dump());
    ids.insert(id);
  }
  return {ids.begin(), ids.end()};
}

LvisData lvis_from_json(const std::string& text, std::size_t d_text) {
  const json doc = parse(text, "LVIS annotations");
  LvisData out;
  out.table.d_text = d_text;
  std::map<std::size_t, std::size_t> remap;
  std::map<std::size_t, std::pair<double, double>> sizes;
  std::map<std::size_t, std::size_t> scene_index;
  try {
    auto cats = doc.at("categories");
    std::sort(cats.begin(), cats.end(), [](const json& a, const json& b) {
      return a.at("id").get<std::size_t>() < b.at("id").get<std::size_t>();
    });
    for (const json& c : cats) {
      Category cat;
      cat.id = out.table.categories.size();
      cat.name = c.at("name").get<std::string>();
      cat.bucket = parse_bucket(c.value("frequency", std::string("f")));
      cat.embedding_seed = mix_seed(c.at("id").get<std::size_t>(), 1000);
      cat.embedding = CategoryTable::embedding_for(cat.embedding_seed, d_text);
      remap[c.at("id").get<std::size_t>()] = cat.id;
      out.original_ids.push_back(c.at("id").get<std::size_t>());
      out.table.categories.push_back(std::move(cat));
    }
    for (const json& im : doc.at("images")) {
      const auto id = im.at("id").get<std::size_t>();
      sizes[id] = {im.at("width").get<double>(), im.at("height").get<double>()};
      scene_index[id] = out.scenes.size();
      Scene s;
      s.image_id = id;
      s.seed = id;
      out.scenes.push_back(std::move(s));
    }
    for (const json& a : doc.at("annotations")) {
      const auto img = a.at("image_id").get<std::size_t>();
      const auto cat = a.at("category_id").get<std::size_t>();
      if (!scene_index.count(img) || !remap.count(cat))
        throw ConsistencyError("annotation refers to a missing image or category");
      const auto& bb = a.at("bbox");
      const auto [w, h] = sizes[img];
      const double x = bb.at(0).get<double>() / w, y = bb.at(1).get<double>() / h;
      const double bw = bb.at(2).get<double>() / w, bh = bb.at(3).get<double>() / h;
      Scene& s = out.scenes[scene_index[img]];
      s.gt_boxes.push_back(Box::make(x + bw / 2, y + bh / 2, bw, bh));
      s.gt_labels.push_back(remap[cat]);
    }
  } catch (const json::exception& e) {
    throw IoError(std::string("LVIS annotations: ") + e.what());
  }
  return out;
}

}  // namespace owqf
