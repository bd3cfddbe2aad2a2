#include "ham/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "ham/common.hpp"

namespace ham {

void PipelineConfig::validate() const {
    if (!(m >= 1 && m <= n && n <= l))
        throw ValueError("need 1 <= M <= N <= L");
    if (c == 0 || heads == 0 || c % heads != 0)
        throw ValueError("model width must be a positive multiple of the head count");
    if (r < 1) throw ValueError("resolution must be at least 1");
    if (t < 1) throw ValueError("sentence limit must be at least 1");
    if (placm_depth < 1) throw ValueError("depth must be at least 1");
    if (mask_ratio < 0.0 || mask_ratio > 1.0)
        throw ValueError("mask ratio must lie in [0, 1]");
}

std::string PipelineConfig::to_json() const {
    nlohmann::json j;
    j["l"] = l;
    j["n"] = n;
    j["m"] = m;
    j["c"] = c;
    j["t"] = t;
    j["r"] = r;
    j["heads"] = heads;
    j["placm_depth"] = placm_depth;
    j["mask_ratio"] = mask_ratio;
    j["seed"] = seed;
    return j.dump();
}

PipelineConfig PipelineConfig::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw FormatError("config must be a JSON object", 0);
    PipelineConfig cfg;
    for (const auto& [key, value] : j.items()) {
        if (key == "l") cfg.l = value.get<std::size_t>();
        else if (key == "n") cfg.n = value.get<std::size_t>();
        else if (key == "m") cfg.m = value.get<std::size_t>();
        else if (key == "c") cfg.c = value.get<std::size_t>();
        else if (key == "t") cfg.t = value.get<std::size_t>();
        else if (key == "r") cfg.r = value.get<std::size_t>();
        else if (key == "heads") cfg.heads = value.get<std::size_t>();
        else if (key == "placm_depth") cfg.placm_depth = value.get<std::size_t>();
        else if (key == "mask_ratio") cfg.mask_ratio = value.get<double>();
        else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
        else throw ValueError("unknown config key: " + key);
    }
    cfg.validate();
    return cfg;
}

PipelineConfig PipelineConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json(buf.str());
}

HamWeights HamWeights::random(const PipelineConfig& config, std::size_t vocab_size,
                              std::size_t n_classes) {
    config.validate();
    const std::size_t c = config.c;
    HamWeights w;
    w.embedding = make_embedding_table(vocab_size, c, config.seed);
    {
        Rng rng(derive_seed(config.seed, "language.gru"));
        w.gru = GruWeights::random(c, c, rng);
    }
    {
        Rng rng(derive_seed(config.seed, "pos.key"));
        w.pos_key = PosEmbedWeights::random(3, c, rng);
    }
    {
        Rng rng(derive_seed(config.seed, "pos.proposal"));
        w.pos_proposal = PosEmbedWeights::random(9, c, rng);
    }
    auto stage = [&](const std::string& name) {
        Rng rng(derive_seed(config.seed, name));
        return MhaWeights::random(c, config.heads, rng);
    };
    auto branch = [&](const std::string& prefix) {
        PlacmWeights p;
        for (std::size_t l = 0; l < config.placm_depth; ++l) {
            const std::string base = prefix + ".l" + std::to_string(l);
            p.word_stages.push_back(
                {stage(base + ".word.self"), stage(base + ".word.cross")});
            p.sentence_stages.push_back(
                {stage(base + ".sentence.self"), stage(base + ".sentence.cross")});
        }
        return p;
    };
    w.smgm.global = branch("placm.global");
    w.smgm.local = branch("placm.local");
    {
        Rng rng(derive_seed(config.seed, "head.match"));
        w.match = MatchMlpWeights::random(c, rng);
    }
    {
        Rng rng(derive_seed(config.seed, "head.objectness"));
        w.objectness_w.resize(c);
        const double s = 1.0 / std::sqrt(static_cast<double>(c));
        for (auto& v : w.objectness_w) v = rng.next_normal() * s;
        w.objectness_b = rng.next_normal() * s;
    }
    {
        Rng rng(derive_seed(config.seed, "head.cls"));
        w.cls_w = Mat::random_normal(c, n_classes, rng,
                                     1.0 / std::sqrt(static_cast<double>(c)));
        w.cls_b.assign(n_classes, 0.0);
    }
    return w;
}

void HamWeights::save(const std::string& path) const {
    TensorFile file;
    file.put("embed.table", NamedTensor::from_mat(embedding));
    gru.put(file, "gru");
    pos_key.put(file, "pos.key");
    pos_proposal.put(file, "pos.proposal");
    smgm.put(file);
    match.put(file, "head.match");
    file.put("head.objectness.w", NamedTensor::from_vector(objectness_w));
    const std::vector<double> ob{objectness_b};
    file.put("head.objectness.b", NamedTensor::from_vector(ob));
    file.put("head.cls.w", NamedTensor::from_mat(cls_w));
    file.put("head.cls.b", NamedTensor::from_vector(cls_b));
    file.save(path);
}

HamWeights HamWeights::load(const std::string& path, const PipelineConfig& config) {
    const TensorFile file = TensorFile::load(path);
    HamWeights w;
    w.embedding = file.get("embed.table").to_mat();
    w.gru = GruWeights::from_file(file, "gru");
    w.pos_key = PosEmbedWeights::from_file(file, "pos.key");
    w.pos_proposal = PosEmbedWeights::from_file(file, "pos.proposal");
    w.smgm = SmgmWeights::from_file(file, config.heads);
    w.match = MatchMlpWeights::from_file(file, "head.match");
    w.objectness_w = file.get("head.objectness.w").to_vector();
    w.objectness_b = file.get("head.objectness.b").to_vector().at(0);
    w.cls_w = file.get("head.cls.w").to_mat();
    w.cls_b = file.get("head.cls.b").to_vector();
    return w;
}

SceneForward scene_forward(const Scene& scene, const PipelineConfig& config,
                           const HamWeights& weights) {
    config.validate();
    if (config.n > scene.cloud.count)
        throw SizeError("config asks for more key points than the scene has");

    SceneForward sf;
    const SampleResult keys_sample = concentration_sampling(scene.cloud, config.n, 0);
    sf.keys = build_key_point_set(scene, keys_sample.indices, config.c, config.seed);
    sf.keys.features =
        add(sf.keys.features, positional_embed_points(sf.keys.points, nullptr,
                                                      weights.pos_key));

    sf.proposals = select_proposals(sf.keys, config.m);
    Mat box_info(sf.proposals.count(), 6);
    for (std::size_t i = 0; i < sf.proposals.count(); ++i) {
        const Box3& b = sf.proposals.boxes[i];
        box_info.at(i, 0) = b.center.x;
        box_info.at(i, 1) = b.center.y;
        box_info.at(i, 2) = b.center.z;
        box_info.at(i, 3) = b.size.x;
        box_info.at(i, 4) = b.size.y;
        box_info.at(i, 5) = b.size.z;
    }
    sf.proposals.features =
        add(sf.proposals.features,
            positional_embed_points(sf.proposals.points, &box_info,
                                    weights.pos_proposal));

    sf.partition = build_partition(scene.bounds_min, scene.bounds_max, config.r,
                                   sf.keys.points, sf.proposals.points);

    sf.objectness.resize(sf.proposals.count());
    for (std::size_t i = 0; i < sf.proposals.count(); ++i) {
        double s = weights.objectness_b;
        for (std::size_t k = 0; k < config.c; ++k)
            s += sf.proposals.features.at(i, k) * weights.objectness_w[k];
        sf.objectness[i] = 1.0 / (1.0 + std::exp(-s));
    }
    return sf;
}

QueryForward forward_query(const Scene& scene, const SceneForward& sf,
                           const QueryRecord& query, const PipelineConfig& config,
                           const HamWeights& weights, const Vocabulary& vocab) {
    const auto tokens = tokenize(query.text, vocab, config.t);
    Mat emb = embed(tokens, weights.embedding);
    const Mat pe = positional_embed_text(emb.rows(), config.c);
    emb = add(emb, pe);
    const LanguageEmbedding lang = gru_encode(emb, weights.gru, config.t);

    const SmgmOutput smgm = smgm_forward(sf.proposals.features, sf.keys.features,
                                         lang, weights.smgm, sf.partition);
    QueryForward out;
    out.match = match_scores(smgm.fused, weights.match, sf.proposals.boxes);

    if (!query.target_instance_ids.empty()) {
        const SceneObject* target = scene.find_instance(query.target_instance_ids[0]);
        if (!target)
            throw ValueError("query targets unknown instance " +
                             std::to_string(query.target_instance_ids[0]));
        const auto labels = assign_labels(sf.proposals.boxes, target->box);
        const double l_match = matching_loss(out.match.logits, labels);
        const double l_det = det_loss_simplified(sf.proposals, scene, sf.objectness);
        const double l_cls =
            cls_loss(lang.sentence, weights.cls_w, weights.cls_b, target->class_id);
        out.loss = total_loss(l_det, l_match, l_cls);
    }
    return out;
}

EvalReport evaluate_queries(const Scene& scene, const std::vector<QueryRecord>& queries,
                            const PipelineConfig& config, const HamWeights& weights,
                            const Vocabulary& vocab) {
    if (queries.empty()) throw SizeError("no queries to evaluate");
    const SceneForward sf = scene_forward(scene, config, weights);
    EvalReport report;
    report.n_queries = queries.size();
    std::vector<Box3> pred, gt;
    for (const auto& q : queries) {
        const QueryForward f = forward_query(scene, sf, q, config, weights, vocab);
        const SceneObject* target = scene.find_instance(q.target_instance_ids.at(0));
        if (!target)
            throw ValueError("query targets unknown instance " +
                             std::to_string(q.target_instance_ids[0]));
        pred.push_back(f.match.best_box);
        gt.push_back(target->box);
        report.per_query_iou.push_back(iou3d(f.match.best_box, target->box));
    }
    report.acc_at_025 = acc_at_iou(pred, gt, 0.25);
    report.acc_at_05 = acc_at_iou(pred, gt, 0.5);
    return report;
}

}  // namespace ham
