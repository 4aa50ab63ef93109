#include "owqf/detector.hpp"

#include <algorithm>
#include <numeric>

namespace owqf {

namespace {

template <class D, class F>
void visit_params(D& d, F&& f) {
  auto linear = [&](const std::string& name, auto& l) {
    f(name + ".weight", l.weight);
    f(name + ".bias", l.bias);
  };
  auto norm = [&](const std::string& name, auto& n) {
    f(name + ".gain", n.gain);
    f(name + ".bias", n.bias);
  };
  auto mlp = [&](const std::string& name, auto& m) {
    linear(name + ".hidden", m.hidden);
    linear(name + ".out", m.out);
  };
  auto attention = [&](const std::string& name, auto& a) {
    linear(name + ".query", a.query);
    linear(name + ".key", a.key);
    linear(name + ".value", a.value);
    linear(name + ".output", a.output);
  };
  for (std::size_t i = 0; i < d.stack.layers.size(); ++i) {
    auto& l = d.stack.layers[i];
    const std::string p = "decoder.layer" + std::to_string(i) + ".";
    attention(p + "self_attn", l.self_attn);
    norm(p + "self_norm", l.self_norm);
    attention(p + "text_attn", l.text_attn);
    norm(p + "text_norm", l.text_norm);
    attention(p + "image_attn", l.image_attn);
    norm(p + "image_norm", l.image_norm);
    mlp(p + "ffn", l.ffn);
    norm(p + "ffn_norm", l.ffn_norm);
    mlp(p + "box_head_general", l.box_head_general);
    mlp(p + "box_head_specific", l.box_head_specific);
  }
  linear("cls.query_proj", d.stack.cls.query_proj);
  linear("cls.text_proj", d.stack.cls.text_proj);
  linear("selector.memory_proj", d.selector.memory_proj);
  norm("selector.memory_norm", d.selector.memory_norm);
  f(std::string("selector.content_bank"), d.selector.content_bank);
  mlp("initial_box_head", d.initial_box_head);
  linear("adapter.proj", d.adapter.proj);
  norm("adapter.norm", d.adapter.norm);
  f(std::string("bank.embeddings"), d.bank.embeddings);
}

Linear clone_linear(const Linear& l) { return {l.weight.clone(), l.bias.clone()}; }

std::vector<std::pair<double, double>> coordinates(const auto& points) {
  std::vector<std::pair<double, double>> xy;
  xy.reserve(points.size());
  for (const auto& p : points) xy.emplace_back(p.x, p.y);
  return xy;
}

}  // namespace

ImageInputs prepare_image(const FeatureWorld& world, const Scene& scene,
                          std::vector<PromptPoint> prompts) {
  ImageInputs img;
  img.scene = scene;
  img.pyramid = world.render(scene);
  img.tokens = img.pyramid.tokens();
  img.cells = img.pyramid.token_cells();
  img.prompts = std::move(prompts);
  return img;
}

Detector Detector::init(const ModelConfig& cfg, std::size_t d_text,
                        std::uint64_t seed) {
  Rng rng(seed);
  Detector d;
  d.config = cfg;
  d.stack = DecoderStack::init(cfg.layers, cfg.dim, cfg.heads, d_text, rng);
  d.selector = SpecificSelector::init(cfg.n_specific, cfg.dim, rng);
  d.initial_box_head = {Linear::xavier(cfg.dim, cfg.dim, rng), Linear::zero(cfg.dim, 4)};
  d.adapter = {Linear::xavier(cfg.dim, cfg.dim, rng), LayerNormParams::identity(cfg.dim)};
  d.bank = LearnableQueryBank::init(cfg.n_learnable, cfg.dim, rng);
  d.set_stage(Stage::pretrain);
  return d;
}

std::vector<NamedParam> Detector::parameters() const {
  std::vector<NamedParam> out;
  visit_params(*this, [&](const std::string& name, const Tensor& t) {
    out.push_back({name, t});
  });
  return out;
}

Detector Detector::clone() const {
  Detector copy = *this;
  visit_params(copy, [](const std::string&, Tensor& t) { t = t.clone(); });
  return copy;
}

void Detector::begin_fine_tune() {
  adapter.proj = clone_linear(selector.memory_proj);
  adapter.norm = {selector.memory_norm.gain.clone(), selector.memory_norm.bias.clone()};
  for (FusionLayer& l : stack.layers)
    l.box_head_general = {clone_linear(l.box_head_specific.hidden),
                          clone_linear(l.box_head_specific.out)};
  set_stage(Stage::fine_tune);
}

std::vector<Tensor> Detector::trainable(Stage stage) const {
  std::vector<Tensor> out;
  if (stage == Stage::fine_tune) {
    for (const ParamGroup& g : freeze_mask(stack))
      out.insert(out.end(), g.tensors.begin(), g.tensors.end());
    out.push_back(bank.embeddings);
    for (const Tensor* t : {&adapter.proj.weight, &adapter.proj.bias,
                            &adapter.norm.gain, &adapter.norm.bias})
      out.push_back(*t);
    return out;
  }
  for (const NamedParam& p : parameters()) {
    const bool point_path = p.name.starts_with("adapter.") ||
                            p.name.starts_with("bank.") ||
                            p.name.find("box_head_general") != std::string::npos;
    if (!point_path) out.push_back(p.tensor);
  }
  return out;
}

void Detector::set_stage(Stage stage) {
  for (NamedParam& p : parameters()) p.tensor.set_requires_grad(false);
  for (Tensor& t : trainable(stage)) t.set_requires_grad(true);
}

ForwardResult forward(const Detector& det, const ImageInputs& img,
                      const Tensor& text_embeddings, const ForwardOptions& opt) {
  const ModelConfig& mc = det.config;
  const DecoderContext ctx =
      DecoderContext::make(det.stack, img.tokens, img.cells, text_embeddings);
  const PointHeads heads{&det.adapter, &det.initial_box_head, &det.stack.cls,
                         ctx.text_keys};
  const std::size_t levels = img.pyramid.levels.size();

  ForwardResult r;
  r.specific = build_specific_queries(img.pyramid, img.tokens, img.cells,
                                      det.selector, det.initial_box_head,
                                      det.stack.cls, ctx.text_keys,
                                      mc.n_specific, opt.specific_columns);
  QueryBank qb;
  qb.specific = r.specific.partition;
  qb.general = QueryPartition::empty(mc.dim);
  qb.denoising = QueryPartition::empty(mc.dim);

  const bool fusion = opt.toggles.gs_fusion;
  if (fusion && !img.prompts.empty()) {
    const auto xy = coordinates(img.prompts);
    r.prompt_boxes = points_to_initial_boxes(interpolate_points(img.pyramid, xy),
                                             levels, xy, heads);
    std::vector<double> map_scores;
    for (const PromptPoint& p : img.prompts) map_scores.push_back(p.score);
    r.general = compose_general_queries(
        det.bank, rank_and_match(map_scores, det.bank.size()), r.prompt_boxes.boxes,
        r.prompt_boxes.features, opt.toggles.ranked_queries, mc.add_point_feature);
    qb.general = r.general.partition;
  }

  SquareMask mask;
  if (fusion && !opt.dn_points.empty()) {
    const auto xy = coordinates(opt.dn_points);
    r.dn_boxes = points_to_initial_boxes(interpolate_points(img.pyramid, xy),
                                         levels, xy, heads);
    std::vector<QueryPartition> parts;
    std::size_t begin = 0;
    while (begin < opt.dn_points.size()) {
      std::size_t end = begin;
      while (end < opt.dn_points.size() &&
             opt.dn_points[end].group == opt.dn_points[begin].group)
        ++end;
      const std::vector<double> scores(r.dn_boxes.scores.begin() + begin,
                                       r.dn_boxes.scores.begin() + end);
      RankedMatch match = rank_and_match(scores, det.bank.size());
      for (std::size_t& i : match.order) {
        i += begin;
        r.dn_rows.push_back(i);
        r.dn_order.push_back(opt.dn_points[i]);
      }
      r.dn_group_sizes.push_back(match.order.size());
      parts.push_back(compose_general_queries(det.bank, match, r.dn_boxes.boxes,
                                              r.dn_boxes.features,
                                              opt.toggles.ranked_queries,
                                              mc.add_point_feature)
                          .partition);
      begin = end;
    }
    std::vector<Tensor> queries, boxes;
    for (const QueryPartition& p : parts) {
      queries.push_back(p.queries);
      boxes.push_back(p.boxes);
    }
    qb.denoising = {concat_rows(queries), concat_rows(boxes)};
    mask = denoising_attention_mask(qb.general.size(), qb.specific.size(),
                                    r.dn_group_sizes);
  }
  r.decoded = decode(det.stack, qb, ctx, mask);
  return r;
}

LossReport image_loss(const Detector& det, const ImageInputs& img,
                      const Tensor& text_embeddings, const Toggles& toggles,
                      const LossConfig& loss, const DenoisingConfig& dn,
                      Stage stage, std::uint64_t dn_seed) {
  const Scene& scene = img.scene;
  ForwardOptions opt;
  opt.toggles = toggles;
  if (stage == Stage::pretrain) opt.toggles = {false, false, false};
  if (opt.toggles.gs_fusion && opt.toggles.denoising && !scene.gt_boxes.empty()) {
    Rng rng(dn_seed);
    opt.dn_points = sample_group(scene.gt_boxes, dn, rng);
  }
  const ForwardResult f = forward(det, img, text_embeddings, opt);
  const auto& layers = f.decoded.layers;
  const bool aux = det.config.aux_loss;
  const std::size_t first_layer = aux || layers.empty() ? 0 : layers.size() - 1;

  TermBreakdown terms;
  auto ground = [&](const Tensor& boxes, const Tensor& logits) {
    GroundingResult g = grounding_loss(boxes, logits, scene.gt_boxes,
                                       scene.gt_labels, loss.weights, loss.focal);
    terms += g.terms;
    return g.loss;
  };
  auto accumulate = [](Tensor& acc, const Tensor& t) {
    acc = acc.defined() ? add(acc, t) : t;
  };

  Tensor specific;
  if (aux || layers.empty())
    accumulate(specific, ground(f.specific.partition.boxes, f.specific.selected_logits));
  for (std::size_t l = first_layer; l < layers.size(); ++l)
    accumulate(specific, ground(layers[l].specific.boxes, layers[l].specific.logits));
  if (stage == Stage::pretrain)
    accumulate(specific, ground(f.specific.token_boxes, f.specific.token_logits));

  LossInputs in;
  in.grounding_specific = specific;
  in.dn_weight = loss.dn_weight;
  in.include_empty_general = loss.include_empty_general;
  const std::size_t m = f.general.partition.size();
  if (opt.toggles.gs_fusion) {
    in.general_empty = m == 0;
    Tensor general = Tensor::scalar(0.0);
    if (m > 0) {
      if (aux || layers.empty())
        general = add(general,
                      ground(gather_rows(f.prompt_boxes.boxes, f.general.source_points),
                             gather_rows(f.prompt_boxes.logits, f.general.source_points)));
      for (std::size_t l = first_layer; l < layers.size(); ++l)
        general = add(general, ground(layers[l].general.boxes, layers[l].general.logits));
    }
    in.grounding_general = general;
  }
  if (!f.dn_order.empty()) {
    Tensor d;
    auto denoise = [&](const Tensor& boxes, const Tensor& logits) {
      GroundingResult g = denoising_loss(boxes, logits, f.dn_order, scene.gt_boxes,
                                         scene.gt_labels, loss.weights, loss.focal);
      terms += g.terms;
      accumulate(d, g.loss);
    };
    if (aux || layers.empty()) {
      denoise(gather_rows(f.dn_boxes.boxes, f.dn_rows),
              gather_rows(f.dn_boxes.logits, f.dn_rows));
    }
    for (std::size_t l = first_layer; l < layers.size(); ++l)
      denoise(layers[l].denoising.boxes, layers[l].denoising.logits);
    in.denoising = d;
  }
  in.terms = terms;
  return total_loss(in);
}

std::vector<Detection> class_nms(std::vector<Detection> dets, double iou_threshold) {
  std::vector<Detection> kept;
  for (Detection& d : dets) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
      return k.label == d.label && iou(k.box, d.box) > iou_threshold;
    });
    if (!suppressed) kept.push_back(std::move(d));
  }
  return kept;
}

std::vector<Detection> predict(const Detector& det, const ImageInputs& img,
                               const CategoryTable& table,
                               const PredictOptions& opt) {
  if (opt.columns.empty()) return {};
  NoGradGuard no_grad;
  ForwardOptions fo;
  fo.toggles = opt.toggles;
  fo.specific_columns = opt.specific_columns;
  const ForwardResult f = forward(det, img, table.embeddings(opt.columns), fo);

  const QueryBank& fin = f.decoded.final;
  const std::size_t m = fin.general.size(), s = fin.specific.size();
  const std::size_t c = opt.columns.size();
  const auto general_boxes = tensor_to_boxes(fin.general.boxes);
  const auto specific_boxes = tensor_to_boxes(fin.specific.boxes);
  std::vector<char> specific_ok(c, opt.specific_columns.empty() ? 1 : 0);
  for (std::size_t j : opt.specific_columns) specific_ok.at(j) = 1;

  struct Candidate {
    double score;
    std::size_t row, col;
  };
  std::vector<Candidate> cands;
  cands.reserve((m + s) * c);
  for (std::size_t r = 0; r < m + s; ++r)
    for (std::size_t j = 0; j < c; ++j) {
      if (r >= m && !specific_ok[j]) continue;
      cands.push_back({sigmoid(f.decoded.logits.at(r, j)), r, j});
    }
  std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    return a.score > b.score;
  });
  if (cands.size() > opt.top_k) cands.resize(opt.top_k);

  std::vector<Detection> dets;
  dets.reserve(cands.size());
  for (const Candidate& k : cands) {
    Detection d;
    d.image_id = img.scene.image_id;
    d.box = k.row < m ? general_boxes[k.row] : specific_boxes[k.row - m];
    d.score = k.score;
    d.label = opt.columns[k.col];
    d.embedding = table.categories.at(d.label).embedding;
    dets.push_back(std::move(d));
  }
  return class_nms(std::move(dets), opt.nms_iou);
}

}  // namespace owqf
