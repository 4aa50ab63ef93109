#include "owqf/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <set>

#include <json.hpp>
#include <omp.h>

#include "owqf/dataset_io.hpp"

namespace owqf {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

const char* stage_name(Stage s) { return s == Stage::pretrain ? "pretrain" : "fine_tune"; }

Stage parse_stage(const std::string& s) {
  if (s == "pretrain") return Stage::pretrain;
  if (s == "fine_tune") return Stage::fine_tune;
  throw IoError("unknown training stage '" + s + "'");
}

std::string join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

std::vector<std::size_t> all_ids(const CategoryTable& table) {
  std::vector<std::size_t> ids(table.size());
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  return ids;
}

// Per-image gradients of the trainable tensors, in their listed order.
struct ImageGrad {
  std::vector<std::vector<double>> grads;
  LossReport report;
};

ImageGrad image_gradient(const Detector& det, const std::vector<Tensor>& params,
                         const ImageInputs& img, const Tensor& text,
                         const Toggles& toggles, const RunConfig& cfg, Stage stage,
                         std::uint64_t dn_seed) {
  for (Tensor t : params) t.zero_grad();
  ImageGrad out;
  out.report = image_loss(det, img, text, toggles, cfg.loss, cfg.dn, stage, dn_seed);
  if (out.report.total_tensor.requires_grad()) out.report.total_tensor.backward();
  out.report.total_tensor = Tensor();
  out.grads.reserve(params.size());
  for (const Tensor& t : params) {
    if (t.has_grad())
      out.grads.emplace_back(t.grad().begin(), t.grad().end());
    else
      out.grads.emplace_back(t.size(), 0.0);
  }
  return out;
}

void copy_values(const Detector& from, Detector& to) {
  const auto src = from.parameters();
  auto dst = to.parameters();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const auto s = src[i].tensor.data();
    std::copy(s.begin(), s.end(), dst[i].tensor.mutable_data().begin());
  }
}

double mean_valid(const std::vector<double>& v) {
  double s = 0.0, n = 0.0;
  for (double x : v)
    if (x >= 0.0) {
      s += x;
      n += 1.0;
    }
  return n > 0.0 ? s / n : -1.0;
}

ordered_json report_summary(const EvalReport& r) {
  return {{"ap", r.ap}, {"ap_r", r.ap_r}, {"ap_c", r.ap_c}, {"ap_f", r.ap_f}};
}

Dataset load_dataset(const RunConfig& cfg) {
  const std::string dir = join(cfg.out_dir, "data");
  if (!std::filesystem::exists(join(dir, "categories.json")))
    throw IoError("no dataset under " + dir + "; run 'owqf generate' first");
  Dataset d;
  d.table = category_table_from_json(read_text(join(dir, "categories.json")));
  d.train = scenes_from_jsonl(read_text(join(dir, "train.jsonl")));
  d.eval = scenes_from_jsonl(read_text(join(dir, "eval.jsonl")));
  return d;
}

}  // namespace

Dataset generate_dataset(const RunConfig& cfg) {
  Dataset d;
  const DataConfig& dc = cfg.data;
  d.table = CategoryTable::make({dc.rare, dc.common, dc.frequent}, dc.d_text,
                                mix_seed(cfg.seed, 1));
  const std::size_t total = dc.n_train + dc.n_eval;
  std::vector<Scene> scenes(total);
  const std::uint64_t base = mix_seed(cfg.seed, 2);
#pragma omp parallel for schedule(static)
  for (long i = 0; i < static_cast<long>(total); ++i) {
    const auto id = static_cast<std::size_t>(i);
    const std::uint64_t seed = mix_seed(base, id);
    Rng rng(mix_seed(seed, 3));
    const std::size_t n = std::uniform_int_distribution<std::size_t>(
        dc.min_objects, dc.max_objects)(rng);
    scenes[id] = generate_scene(seed, n, dc.mix, d.table);
    scenes[id].image_id = id;
  }
  d.train.assign(scenes.begin(), scenes.begin() + static_cast<long>(dc.n_train));
  d.eval.assign(scenes.begin() + static_cast<long>(dc.n_train), scenes.end());
  return d;
}

std::uint64_t prompt_seed(const RunConfig& cfg, std::size_t image_id) {
  return mix_seed(mix_seed(cfg.seed, 31), image_id);
}

std::vector<PromptPoint> simulated_prompts(const RunConfig& cfg,
                                           const CategoryTable& table,
                                           const Scene& scene) {
  return simulate_prompts(scene, table, cfg.prompt, prompt_seed(cfg, scene.image_id))
      .points;
}

void Adam::step(std::vector<Tensor>& params,
                const std::vector<std::vector<double>>& grads) {
  if (m.empty()) {
    for (const Tensor& p : params) {
      m.emplace_back(p.size(), 0.0);
      v.emplace_back(p.size(), 0.0);
    }
  }
  ++t;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto x = params[i].mutable_data();
    const auto& g = grads[i];
    for (std::size_t k = 0; k < x.size(); ++k) {
      m[i][k] = beta1 * m[i][k] + (1.0 - beta1) * g[k];
      v[i][k] = beta2 * v[i][k] + (1.0 - beta2) * g[k] * g[k];
      x[k] -= lr * (m[i][k] / c1) / (std::sqrt(v[i][k] / c2) + eps);
    }
  }
}

void train_stage(Detector& det, Stage stage, const RunConfig& cfg,
                 const Dataset& data, std::vector<CurvePoint>& curve,
                 const StepCallback& on_step) {
  const std::size_t steps =
      stage == Stage::pretrain ? cfg.optim.pretrain_steps : cfg.optim.steps;
  if (steps == 0) return;
  if (data.train.empty()) throw ConfigError("training needs at least one image");
  const FeatureWorld world(cfg.world(), data.table);
  const Toggles toggles =
      stage == Stage::fine_tune ? det.toggles : Toggles{false, false, false};
  std::vector<Tensor> params = det.trainable(stage);
  Adam adam;
  adam.lr = cfg.optim.lr;

  const std::size_t threads = cfg.optim.threads;
  std::vector<Detector> replicas;
  std::vector<std::vector<Tensor>> replica_params;
  std::vector<Tensor> texts;
  for (std::size_t t = 0; t < threads; ++t) {
    if (t == 0) {
      texts.push_back(data.table.embeddings());
      continue;
    }
    replicas.push_back(det.clone());
    texts.push_back(data.table.embeddings());
  }
  for (const Detector& r : replicas) replica_params.push_back(r.trainable(stage));

  Rng order_rng(mix_seed(cfg.model_seed, stage == Stage::pretrain ? 11 : 12));
  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = order.size();
  const std::size_t batch = cfg.optim.batch;
  double last_finite = 0.0;

  for (std::size_t step = 1; step <= steps; ++step) {
    std::vector<std::size_t> ids(batch);
    for (std::size_t& id : ids) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), order_rng);
        cursor = 0;
      }
      id = order[cursor++];
    }
    const std::uint64_t step_seed = mix_seed(cfg.model_seed, 1000 + step);
    std::vector<ImageGrad> results(batch);
    auto run = [&](std::size_t b, std::size_t t) {
      const Scene& scene = data.train[ids[b]];
      std::vector<PromptPoint> prompts;
      if (toggles.gs_fusion) prompts = simulated_prompts(cfg, data.table, scene);
      const ImageInputs img = prepare_image(world, scene, std::move(prompts));
      const Detector& model = t == 0 ? det : replicas[t - 1];
      const auto& p = t == 0 ? params : replica_params[t - 1];
      results[b] = image_gradient(model, p, img, texts[t], toggles, cfg, stage,
                                  mix_seed(step_seed, b));
    };
    if (threads > 1) {
#pragma omp parallel for num_threads(static_cast<int>(threads)) schedule(static)
      for (long b = 0; b < static_cast<long>(batch); ++b)
        run(static_cast<std::size_t>(b), static_cast<std::size_t>(omp_get_thread_num()));
    } else {
      for (std::size_t b = 0; b < batch; ++b) run(b, 0);
    }

    std::vector<std::vector<double>> grads(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) grads[i].assign(params[i].size(), 0.0);
    CurvePoint point{stage, step, 0.0, 0.0, 0.0, 0.0};
    for (const ImageGrad& r : results) {
      for (std::size_t i = 0; i < params.size(); ++i)
        for (std::size_t k = 0; k < grads[i].size(); ++k) grads[i][k] += r.grads[i][k];
      point.loss += r.report.total;
      point.grounding_general += r.report.grounding_general;
      point.grounding_specific += r.report.grounding_specific;
      point.denoising += r.report.denoising;
    }
    const double inv = 1.0 / static_cast<double>(batch);
    point.loss *= inv;
    point.grounding_general *= inv;
    point.grounding_specific *= inv;
    point.denoising *= inv;
    if (!std::isfinite(point.loss))
      throw NumericError(std::string("training diverged in ") + stage_name(stage) +
                         " at step " + std::to_string(step) +
                         "; last finite loss was " + std::to_string(last_finite) +
                         " at step " + std::to_string(step - 1));
    last_finite = point.loss;

    double norm2 = 0.0;
    for (auto& g : grads)
      for (double& x : g) {
        x *= inv;
        norm2 += x * x;
      }
    const double norm = std::sqrt(norm2);
    if (cfg.optim.clip_norm > 0.0 && norm > cfg.optim.clip_norm) {
      const double s = cfg.optim.clip_norm / norm;
      for (auto& g : grads)
        for (double& x : g) x *= s;
    }
    adam.step(params, grads);
    for (Detector& r : replicas) copy_values(det, r);
    curve.push_back(point);
    if (on_step) on_step(det, stage, step);
  }
}

Detector pretrain(const RunConfig& cfg, const Dataset& data,
                  std::vector<CurvePoint>& curve, const StepCallback& on_step) {
  Detector det = Detector::init(cfg.model, data.table.d_text, cfg.model_seed);
  train_stage(det, Stage::pretrain, cfg, data, curve, on_step);
  return det;
}

Detector fine_tune(const Detector& pretrained, const RunConfig& cfg,
                   const Dataset& data, std::vector<CurvePoint>& curve,
                   const StepCallback& on_step) {
  Detector det = pretrained.clone();
  det.toggles = cfg.toggles;
  det.begin_fine_tune();
  train_stage(det, Stage::fine_tune, cfg, data, curve, on_step);
  return det;
}

EvalOutput evaluate_mode(const Detector& det, const RunConfig& cfg,
                         const CategoryTable& table,
                         const std::vector<Scene>& scenes, EvalMode mode,
                         const std::vector<std::size_t>& predefined,
                         const PromptMap* prompts) {
  if (mode == EvalMode::open_set && predefined.empty())
    throw ConfigError("open-set evaluation needs a nonempty category list; "
                      "use open-ended mode instead");
  for (std::size_t id : predefined)
    if (id >= table.size())
      throw ConsistencyError("category list names unknown id " + std::to_string(id));
  const FeatureWorld world(cfg.world(), table);
  std::vector<std::vector<Detection>> per_image(scenes.size());
  std::vector<std::size_t> discovered_count(scenes.size(), 0);

#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < static_cast<long>(scenes.size()); ++i) {
    const Scene& scene = scenes[static_cast<std::size_t>(i)];
    std::vector<PromptPoint> points;
    if (prompts) {
      if (auto it = prompts->find(scene.image_id); it != prompts->end()) points = it->second;
    } else {
      points = simulated_prompts(cfg, table, scene);
    }
    std::set<std::size_t> discovered;
    for (const PromptPoint& p : points)
      if (p.proposed_label < table.size()) discovered.insert(p.proposed_label);
    discovered_count[static_cast<std::size_t>(i)] = discovered.size();

    PredictOptions opt;
    opt.toggles = det.toggles;
    opt.top_k = cfg.eval.top_k;
    opt.nms_iou = cfg.eval.nms_iou;
    if (mode == EvalMode::open_set) {
      std::set<std::size_t> cols(predefined.begin(), predefined.end());
      if (det.toggles.gs_fusion) cols.insert(discovered.begin(), discovered.end());
      opt.columns.assign(cols.begin(), cols.end());
      for (std::size_t j = 0; j < opt.columns.size(); ++j)
        if (std::binary_search(predefined.begin(), predefined.end(), opt.columns[j]))
          opt.specific_columns.push_back(j);
    } else {
      opt.columns.assign(discovered.begin(), discovered.end());
    }
    const ImageInputs img = prepare_image(
        world, scene, det.toggles.gs_fusion ? points : std::vector<PromptPoint>{});
    auto dets = predict(det, img, table, opt);
    if (mode == EvalMode::open_ended) dets = open_ended_map(std::move(dets), table);
    per_image[static_cast<std::size_t>(i)] = std::move(dets);
  }

  EvalOutput out;
  std::vector<GroundTruth> gts;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    out.detections.insert(out.detections.end(), per_image[i].begin(), per_image[i].end());
    out.discovered_total += discovered_count[i];
    for (std::size_t k = 0; k < scenes[i].gt_boxes.size(); ++k)
      gts.push_back({scenes[i].image_id, scenes[i].gt_boxes[k], scenes[i].gt_labels[k]});
  }
  EvalConfig ec;
  ec.per_class_cap = cfg.eval.per_class_cap;
  out.report = fixed_ap(out.detections, gts, table, ec);
  out.report.mode = mode;
  return out;
}

std::string checkpoint_to_json(const Detector& det, std::size_t d_text,
                               Stage stage, std::size_t step) {
  const ModelConfig& m = det.config;
  ordered_json doc;
  doc["schema"] = kSchemaVersion;
  doc["stage"] = stage_name(stage);
  doc["step"] = step;
  doc["d_text"] = d_text;
  doc["model"] = {{"dim", m.dim},
                  {"heads", m.heads},
                  {"layers", m.layers},
                  {"levels", m.levels},
                  {"base_grid", m.base_grid},
                  {"noise", m.noise},
                  {"n_learnable", m.n_learnable},
                  {"n_specific", m.n_specific},
                  {"add_point_feature", m.add_point_feature},
                  {"aux_loss", m.aux_loss}};
  doc["toggles"] = {{"gs_fusion", det.toggles.gs_fusion},
                    {"ranked_queries", det.toggles.ranked_queries},
                    {"denoising_points", det.toggles.denoising}};
  doc["params"] = ordered_json::array();
  for (const NamedParam& p : det.parameters())
    doc["params"].push_back({{"name", p.name},
                             {"shape", p.tensor.shape()},
                             {"data", std::vector<double>(p.tensor.data().begin(),
                                                          p.tensor.data().end())}});
  return doc.dump() + "\n";
}

Detector checkpoint_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw IoError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || doc.value("schema", 0) != kSchemaVersion)
    throw IoError("checkpoint: expected \"schema\": 1");
  try {
    const json& mj = doc.at("model");
    ModelConfig m;
    m.dim = mj.at("dim").get<std::size_t>();
    m.heads = mj.at("heads").get<std::size_t>();
    m.layers = mj.at("layers").get<std::size_t>();
    m.levels = mj.at("levels").get<std::size_t>();
    m.base_grid = mj.at("base_grid").get<std::size_t>();
    m.noise = mj.at("noise").get<double>();
    m.n_learnable = mj.at("n_learnable").get<std::size_t>();
    m.n_specific = mj.at("n_specific").get<std::size_t>();
    m.add_point_feature = mj.at("add_point_feature").get<bool>();
    m.aux_loss = mj.at("aux_loss").get<bool>();
    Detector det = Detector::init(m, doc.at("d_text").get<std::size_t>(), 0);
    const json& tj = doc.at("toggles");
    det.toggles = {tj.at("gs_fusion").get<bool>(), tj.at("ranked_queries").get<bool>(),
                   tj.at("denoising_points").get<bool>()};
    auto params = det.parameters();
    const json& pj = doc.at("params");
    if (pj.size() != params.size())
      throw IoError("checkpoint has " + std::to_string(pj.size()) +
                    " tensors, model expects " + std::to_string(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
      const json& e = pj[i];
      if (e.at("name").get<std::string>() != params[i].name ||
          e.at("shape").get<Shape>() != params[i].tensor.shape())
        throw IoError("checkpoint tensor " + e.at("name").get<std::string>() +
                      " does not match " + params[i].name);
      const auto values = e.at("data").get<std::vector<double>>();
      auto dst = params[i].tensor.mutable_data();
      if (values.size() != dst.size()) throw IoError("checkpoint tensor size mismatch");
      std::copy(values.begin(), values.end(), dst.begin());
    }
    det.set_stage(parse_stage(doc.at("stage").get<std::string>()));
    return det;
  } catch (const json::exception& e) {
    throw IoError(std::string("checkpoint: ") + e.what());
  }
}

std::string curve_to_json(const std::vector<CurvePoint>& curve) {
  ordered_json doc;
  doc["schema"] = kSchemaVersion;
  doc["points"] = ordered_json::array();
  for (const CurvePoint& p : curve)
    doc["points"].push_back({{"stage", stage_name(p.stage)},
                             {"step", p.step},
                             {"loss", p.loss},
                             {"grounding_general", p.grounding_general},
                             {"grounding_specific", p.grounding_specific},
                             {"denoising", p.denoising}});
  return doc.dump(2) + "\n";
}

std::vector<std::pair<std::string, Toggles>> ablation_rows() {
  return {{"baseline", {false, false, false}},
          {"+gs_fusion", {true, false, false}},
          {"+ranked_queries", {true, true, false}},
          {"+denoising_points", {true, true, true}}};
}

AblationResult run_ablation(const RunConfig& cfg, const Dataset& data) {
  AblationResult result;
  for (const auto& [name, toggles] : ablation_rows()) {
    AblationRow row;
    row.name = name;
    row.toggles = toggles;
    result.rows.push_back(std::move(row));
  }
  const auto predefined = all_ids(data.table);
  for (std::size_t s = 0; s < cfg.ablation_seeds; ++s) {
    RunConfig run = cfg;
    run.model_seed = cfg.model_seed + s;
    result.model_seeds.push_back(run.model_seed);
    std::vector<CurvePoint> curve;
    const Detector base = pretrain(run, data, curve);
    for (AblationRow& row : result.rows) {
      run.toggles = row.toggles;
      Detector model = fine_tune(base, run, data, curve);
      row.per_seed.push_back(evaluate_mode(model, run, data.table, data.eval,
                                           EvalMode::open_set, predefined)
                                 .report);
      if (&row == &result.rows.back()) result.full_models.push_back(std::move(model));
    }
  }
  for (AblationRow& row : result.rows) {
    std::vector<double> ap, r, c, f;
    for (const EvalReport& e : row.per_seed) {
      ap.push_back(e.ap);
      r.push_back(e.ap_r);
      c.push_back(e.ap_c);
      f.push_back(e.ap_f);
    }
    row.ap = mean_valid(ap);
    row.ap_r = mean_valid(r);
    row.ap_c = mean_valid(c);
    row.ap_f = mean_valid(f);
  }
  return result;
}

std::string ablation_to_json(const AblationResult& result) {
  ordered_json doc;
  doc["schema"] = kSchemaVersion;
  doc["model_seeds"] = result.model_seeds;
  doc["rows"] = ordered_json::array();
  for (const AblationRow& row : result.rows) {
    ordered_json j;
    j["name"] = row.name;
    j["gs_fusion"] = row.toggles.gs_fusion;
    j["ranked_queries"] = row.toggles.ranked_queries;
    j["denoising_points"] = row.toggles.denoising;
    j["ap"] = row.ap;
    j["ap_r"] = row.ap_r;
    j["ap_c"] = row.ap_c;
    j["ap_f"] = row.ap_f;
    j["per_seed"] = ordered_json::array();
    for (std::size_t s = 0; s < row.per_seed.size(); ++s) {
      ordered_json e = report_summary(row.per_seed[s]);
      e["model_seed"] = result.model_seeds[s];
      j["per_seed"].push_back(std::move(e));
    }
    doc["rows"].push_back(std::move(j));
  }
  return doc.dump(2) + "\n";
}

int cmd_generate(const RunConfig& cfg) {
  const Dataset d = generate_dataset(cfg);
  const std::string dir = join(cfg.out_dir, "data");
  write_text(join(dir, "train.jsonl"), scenes_to_jsonl(d.train));
  write_text(join(dir, "eval.jsonl"), scenes_to_jsonl(d.eval));
  write_text(join(dir, "categories.json"), category_table_to_json(d.table));
  std::printf("wrote %zu train and %zu eval images, %zu categories to %s\n",
              d.train.size(), d.eval.size(), d.table.size(), dir.c_str());
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  const Dataset data = load_dataset(cfg);
  if (data.table.d_text != cfg.data.d_text)
    throw ConfigError("data.d_text differs from the generated category table");
  std::vector<CurvePoint> curve;
  const std::size_t every = cfg.optim.checkpoint_every;
  const std::size_t d_text = data.table.d_text;
  const StepCallback save = [&](const Detector& det, Stage stage, std::size_t step) {
    if (every == 0 || step % every != 0) return;
    write_text(join(cfg.out_dir, std::string("checkpoints/") + stage_name(stage) +
                                     "_step" + std::to_string(step) + ".json"),
               checkpoint_to_json(det, d_text, stage, step));
  };
  const Detector base = pretrain(cfg, data, curve, save);
  write_text(join(cfg.out_dir, "pretrain_checkpoint.json"),
             checkpoint_to_json(base, d_text, Stage::pretrain, cfg.optim.pretrain_steps));
  const Detector model = fine_tune(base, cfg, data, curve, save);
  write_text(join(cfg.out_dir, "checkpoint.json"),
             checkpoint_to_json(model, d_text, Stage::fine_tune, cfg.optim.steps));
  write_text(join(cfg.out_dir, "loss_curve.json"), curve_to_json(curve));
  if (!curve.empty())
    std::printf("trained %zu + %zu steps, final loss %.6f\n", cfg.optim.pretrain_steps,
                cfg.optim.steps, curve.back().loss);
  return 0;
}

int cmd_eval(const RunConfig& cfg, const EvalArgs& args) {
  const Dataset data = load_dataset(cfg);
  const std::string ckpt = args.checkpoint_path.empty()
                               ? join(cfg.out_dir, "checkpoint.json")
                               : args.checkpoint_path;
  const Detector det = checkpoint_from_json(read_text(ckpt));
  std::vector<std::size_t> list;
  if (!args.category_list_path.empty())
    list = category_list_from_json(read_text(args.category_list_path), data.table);
  const ModeRoute route = route_mode(args.mode, list);
  if (route.list_ignored)
    std::fprintf(stderr, "warning: open-ended mode ignores --category-list\n");
  if (route.mode == EvalMode::open_ended) list.clear();
  std::optional<PromptMap> prompts;
  if (!args.prompts_path.empty())
    prompts = prompts_from_json(read_text(args.prompts_path), data.table);
  const EvalOutput out = evaluate_mode(det, cfg, data.table, data.eval, route.mode, list,
                                       prompts ? &*prompts : nullptr);
  const std::string tag = mode_name(route.mode);
  write_text(join(cfg.out_dir, "report_" + tag + ".json"),
             report_to_json(out.report, data.table));
  write_text(join(cfg.out_dir, "predictions_" + tag + ".json"),
             predictions_to_json(out.detections));
  std::printf("%s: AP %.4f  AP_r %.4f  AP_c %.4f  AP_f %.4f\n", tag.c_str(),
              out.report.ap, out.report.ap_r, out.report.ap_c, out.report.ap_f);
  return 0;
}

int cmd_ablate(const RunConfig& cfg) {
  const Dataset data = generate_dataset(cfg);
  const AblationResult result = run_ablation(cfg, data);
  write_text(join(cfg.out_dir, "ablation.json"), ablation_to_json(result));
  for (const AblationRow& row : result.rows)
    std::printf("%-18s AP %.4f  AP_r %.4f  AP_c %.4f\n", row.name.c_str(), row.ap,
                row.ap_r, row.ap_c);
  return 0;
}

}  // namespace owqf
