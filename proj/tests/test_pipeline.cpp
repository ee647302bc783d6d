#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <thread>

#include "doctest.h"
#include "roiattn/ablation.hpp"
#include "roiattn/boxcodec.hpp"
#include "roiattn/ops.hpp"
#include "roiattn/train.hpp"
#include "support/oracles.hpp"

using namespace roiattn;

namespace {

std::string read_file(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

DetectionConfig tiny_config() {
    DetectionConfig cfg;
    cfg.train_scenes = 6;
    cfg.val_scenes = 4;
    cfg.epochs = 2;
    cfg.lr_decay_epochs = {1};
    cfg.backbone_channels = 8;
    cfg.fc_hidden = 16;
    cfg.reg_mid = 8;
    cfg.reg_expand = 12;
    cfg.d = 4;
    return cfg;
}

}  // namespace

TEST_SUITE_BEGIN("pipeline");

TEST_CASE("scene generation is bit-deterministic") {
    const SyntheticScene a = generate_scene(9001);
    const SyntheticScene b = generate_scene(9001);
    CHECK(a.image.values() == b.image.values());
    REQUIRE(a.objects.size() == b.objects.size());
    for (size_t i = 0; i < a.objects.size(); ++i) {
        CHECK(a.objects[i].cls == b.objects[i].cls);
        CHECK(a.objects[i].box.x1 == b.objects[i].box.x1);
        CHECK(a.objects[i].box.y2 == b.objects[i].box.y2);
    }
    const SyntheticScene c = generate_scene(9002);
    CHECK(a.image.values() != c.image.values());
}

TEST_CASE("scene census: object counts, class coverage, box invariants") {
    int class_count[kNumClasses] = {0, 0, 0, 0};
    for (int i = 0; i < 1000; ++i) {
        const SyntheticScene s = generate_scene(mix_seed(31337, uint64_t(i)));
        CHECK(s.objects.size() >= 1);
        CHECK(s.objects.size() <= 6);
        for (const SceneObject& o : s.objects) {
            REQUIRE(o.cls >= 0);
            REQUIRE(o.cls < kNumClasses);
            ++class_count[o.cls];
            CHECK(o.box.valid());
            CHECK(o.box.x1 >= 0.0f);
            CHECK(o.box.y1 >= 0.0f);
            CHECK(o.box.x2 <= float(kImageSize));
            CHECK(o.box.y2 <= float(kImageSize));
        }
        bool pixels_in_range = true;
        for (int64_t p = 0; p < s.image.numel(); ++p) {
            const float v = s.image.data()[p];
            pixels_in_range = pixels_in_range && v >= 0.0f && v <= 1.0f;
        }
        REQUIRE(pixels_in_range);
    }
    for (int c = 0; c < kNumClasses; ++c) {
        CHECK(class_count[c] >= 50);
    }
}

TEST_CASE("zero-jitter proposals equal the ground truth") {
    const SyntheticScene scene = generate_scene(555);
    ProposalConfig cfg;
    cfg.center_jitter = 0.0f;
    cfg.scale_lo = cfg.scale_hi = 1.0f;
    cfg.positives_per_gt = 2;
    cfg.negatives = 0;
    const auto proposals = make_proposals(scene, 1, cfg);
    REQUIRE(proposals.size() == scene.objects.size() * 2);
    for (size_t i = 0; i < proposals.size(); ++i) {
        const BoxXYXY& gt = scene.objects[i / 2].box;
        CHECK(proposals[i].x1 == doctest::Approx(gt.x1).epsilon(1e-6));
        CHECK(proposals[i].y1 == doctest::Approx(gt.y1).epsilon(1e-6));
        CHECK(proposals[i].x2 == doctest::Approx(gt.x2).epsilon(1e-6));
        CHECK(proposals[i].y2 == doctest::Approx(gt.y2).epsilon(1e-6));
    }
}

TEST_CASE("proposal count follows the construction") {
    const SyntheticScene scene = generate_scene(556);
    const auto proposals = make_proposals(scene, 2);
    CHECK(proposals.size() == scene.objects.size() * 8 + 24);
}

TEST_CASE("jittered positives keep IoU >= 0.5 with their source (10k draws)") {
    // Positives only, across many scenes and seeds.
    ProposalConfig cfg;
    cfg.negatives = 0;
    int draws = 0;
    double worst = 1.0;
    for (int s = 0; draws < 10000; ++s) {
        const SyntheticScene scene = generate_scene(mix_seed(777, uint64_t(s)));
        const auto proposals = make_proposals(scene, mix_seed(778, uint64_t(s)), cfg);
        for (size_t i = 0; i < proposals.size(); ++i) {
            const BoxXYXY& gt = scene.objects[i / size_t(cfg.positives_per_gt)].box;
            const double iou = box_iou(proposals[i], gt);
            worst = std::min(worst, iou);
            ++draws;
        }
    }
    CHECK(draws >= 10000);
    CHECK_MESSAGE(worst >= 0.5, "worst IoU ", worst);
}

TEST_CASE("assignment and box-delta codec") {
    // proposal == GT: zero deltas, labeled with the class.
    std::vector<SceneObject> gt{{2, {10, 20, 40, 60}}};
    std::vector<BoxXYXY> proposals{{10, 20, 40, 60}, {100, 100, 120, 120}};
    const TrainingSample sample = assign_and_encode(proposals, gt);
    REQUIRE(sample.labels.size() == 2);
    CHECK(sample.labels[0] == 2);
    CHECK(sample.labels[1] == kBackgroundClass);
    REQUIRE(sample.foreground == std::vector<int>{0});
    for (float d : sample.target_deltas[0]) CHECK(d == doctest::Approx(0.0f));

    // IoU basics.
    CHECK(box_iou({0, 0, 10, 10}, {20, 20, 30, 30}) == 0.0);
    CHECK(box_iou({0, 0, 10, 10}, {0, 0, 10, 10}) == 1.0);

    // Round trip over random box pairs.
    Rng rng(601);
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        auto rand_box = [&] {
            const double x1 = rng.uniform(0.0, 100.0);
            const double y1 = rng.uniform(0.0, 100.0);
            return BoxXYXY{float(x1), float(y1), float(x1 + rng.uniform(4.0, 27.0)),
                           float(y1 + rng.uniform(4.0, 27.0))};
        };
        const BoxXYXY p = rand_box();
        const BoxXYXY g = rand_box();
        const BoxXYXY back = decode_box_delta(p, encode_box_delta(p, g), 128, 128);
        worst = std::max({worst, std::abs(double(back.x1) - g.x1), std::abs(double(back.y1) - g.y1),
                          std::abs(double(back.x2) - g.x2), std::abs(double(back.y2) - g.y2)});
    }
    CHECK_MESSAGE(worst < 1e-5, "worst round-trip error ", worst);
}

TEST_CASE("detection loss: saturation, uniform logits, gradients") {
    std::vector<SceneObject> gt{{1, {10, 10, 50, 50}}};
    std::vector<BoxXYXY> proposals{{10, 10, 50, 50}, {70, 70, 100, 100}};
    const TrainingSample sample = assign_and_encode(proposals, gt);

    // Perfect logits + exact deltas: loss under 1e-3.
    Tensor logits = Tensor::zeros({2, 5});
    logits.data()[1] = 1e6f;                    // row 0 -> class 1
    logits.data()[5 + kBackgroundClass] = 1e6f; // row 1 -> background
    Tensor deltas = Tensor::zeros({2, 4});
    HeadOutput perfect{logits, deltas};
    CHECK(detection_loss(perfect, sample).total.data()[0] < 1e-3f);

    // Uniform logits: cross-entropy term is ln 5.
    HeadOutput uniform{Tensor::zeros({2, 5}), Tensor::zeros({2, 4})};
    const LossBreakdown lb = detection_loss(uniform, sample);
    CHECK(std::abs(double(lb.cls_term) - std::log(5.0)) < 1e-5);
    CHECK(lb.total.data()[0] >= 0.0f);

    // Gradient check against finite differences on a small batch.
    Rng rng(602);
    Tensor glogits = Tensor::randn({2, 5}, rng, 1.0, true);
    Tensor gdeltas = Tensor::randn({2, 4}, rng, 1.0, true);
    auto res = oracle::check_gradients(
        [&] {
            HeadOutput out{glogits, gdeltas};
            return detection_loss(out, sample).total;
        },
        {glogits, gdeltas}, rng);
    CHECK_MESSAGE(res.ok, res.message);
}

TEST_CASE("evaluate_map: perfect detections give AP = AP50 = AP75 = 1") {
    std::vector<GtBox> gts;
    std::vector<Detection> dets;
    Rng rng(603);
    for (int img = 0; img < 3; ++img) {
        for (int k = 0; k < 3; ++k) {
            const float x = float(rng.uniform(0.0, 80.0));
            const float y = float(rng.uniform(0.0, 80.0));
            BoxXYXY b{x, y, x + 20, y + 20};
            const int cls = rng.uniform_int(0, kNumClasses - 1);
            gts.push_back({img, cls, b});
            dets.push_back({img, cls, 1.0f, b});
        }
    }
    const ApReport r = evaluate_map(dets, gts, coco_thresholds(), kNumClasses);
    CHECK(r.ap == doctest::Approx(1.0));
    CHECK(r.ap50 == doctest::Approx(1.0));
    CHECK(r.ap75 == doctest::Approx(1.0));
}

TEST_CASE("evaluate_map: IoU 0.6 detection counts at AP50 but not AP75") {
    std::vector<GtBox> gts{{0, 0, {0, 0, 10, 10}}};
    // 10×6 overlap on a 10×10 box: IoU 0.6.
    std::vector<Detection> dets{{0, 0, 0.9f, {0, 0, 10, 6}}};
    const ApReport r = evaluate_map(dets, gts, coco_thresholds(), kNumClasses);
    CHECK(r.ap50 == doctest::Approx(1.0));
    CHECK(r.ap75 == doctest::Approx(0.0));
}

TEST_CASE("evaluate_map: hand-computed 3-detection/2-GT case") {
    std::vector<GtBox> gts{{0, 0, {0, 0, 10, 10}}, {0, 0, {20, 20, 30, 30}}};
    std::vector<Detection> dets{
        {0, 0, 0.9f, {0, 0, 10, 10}},     // TP
        {0, 0, 0.8f, {50, 50, 60, 60}},   // FP
        {0, 0, 0.7f, {20, 20, 30, 30}},   // TP
    };
    const ApReport r = evaluate_map(dets, gts, {0.5}, kNumClasses);
    // Precision points 1, 1/2, 2/3 at recalls 0.5, 0.5, 1.0:
    // 51 recall points at precision 1, 50 at 2/3.
    const double expect = (51.0 * 1.0 + 50.0 * (2.0 / 3.0)) / 101.0;
    CHECK(r.ap50 == doctest::Approx(expect).epsilon(1e-9));

    // And the brute-force oracle agrees.
    std::vector<oracle::NaiveDet> nd;
    for (size_t i = 0; i < dets.size(); ++i) {
        nd.push_back({dets[i].image_id, dets[i].cls, dets[i].score, dets[i].box});
    }
    std::vector<oracle::NaiveGt> ng;
    for (const GtBox& g : gts) ng.push_back({g.image_id, g.cls, g.box});
    const auto naive = oracle::naive_evaluate_map(nd, ng, {0.5}, kNumClasses);
    CHECK(r.ap50 == doctest::Approx(naive.ap50).epsilon(1e-12));
}

TEST_CASE("evaluate_map matches the brute-force oracle on small instances") {
    Rng rng(604);
    for (int trial = 0; trial < 200; ++trial) {
        const int n_gt = rng.uniform_int(1, 5);
        const int n_det = rng.uniform_int(0, 5);
        std::vector<GtBox> gts;
        std::vector<Detection> dets;
        std::vector<oracle::NaiveGt> ng;
        std::vector<oracle::NaiveDet> nd;
        for (int i = 0; i < n_gt; ++i) {
            const int img = rng.uniform_int(0, 2);
            const int cls = rng.uniform_int(0, kNumClasses - 1);
            const float x = float(rng.uniform(0.0, 60.0));
            const float y = float(rng.uniform(0.0, 60.0));
            BoxXYXY b{x, y, x + float(rng.uniform(5.0, 30.0)), y + float(rng.uniform(5.0, 30.0))};
            gts.push_back({img, cls, b});
            ng.push_back({img, cls, b});
        }
        for (int i = 0; i < n_det; ++i) {
            const int img = rng.uniform_int(0, 2);
            const int cls = rng.uniform_int(0, kNumClasses - 1);
            // Half the detections perturb a GT box, half are random.
            BoxXYXY b;
            if (!gts.empty() && rng.uniform() < 0.5) {
                const BoxXYXY& src = gts[size_t(rng.uniform_int(0, int(gts.size()) - 1))].box;
                const float dx = float(rng.uniform(-4.0, 4.0));
                const float dy = float(rng.uniform(-4.0, 4.0));
                b = {src.x1 + dx, src.y1 + dy, src.x2 + dx, src.y2 + dy};
            } else {
                const float x = float(rng.uniform(0.0, 60.0));
                const float y = float(rng.uniform(0.0, 60.0));
                b = {x, y, x + float(rng.uniform(5.0, 30.0)), y + float(rng.uniform(5.0, 30.0))};
            }
            const float score = float(rng.uniform(0.05, 1.0));
            dets.push_back({img, cls, score, b});
            nd.push_back({img, cls, score, b});
        }
        const ApReport r = evaluate_map(dets, gts, coco_thresholds(), kNumClasses);
        const auto naive = oracle::naive_evaluate_map(nd, ng, coco_thresholds(), kNumClasses);
        CHECK(r.ap == doctest::Approx(naive.ap).epsilon(1e-12));
        CHECK(r.ap50 == doctest::Approx(naive.ap50).epsilon(1e-12));
        CHECK(r.ap75 == doctest::Approx(naive.ap75).epsilon(1e-12));
    }
}

TEST_CASE("classification crops come from the raw feature map") {
    DetectionConfig cfg = tiny_config();
    cfg.use_pos_encoding = true;
    const DetectionModel model = DetectionModel::init(cfg);
    const SyntheticScene scene = generate_scene(605);
    const auto proposals = make_proposals(scene, 606);
    ForwardTrace trace;
    model.forward(scene.image, proposals, &trace);
    CHECK(trace.cls_source.same_storage(trace.base_features));
    CHECK_FALSE(trace.reg_source.same_storage(trace.base_features));
    CHECK(trace.reg_source.shape() == trace.base_features.shape());
}

TEST_CASE("positional encoding requires the double head") {
    DetectionConfig cfg = tiny_config();
    cfg.use_double_head = false;
    cfg.use_pos_encoding = true;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("lr = 0 leaves parameters unchanged after an epoch") {
    DetectionConfig cfg = tiny_config();
    cfg.lr = 0.0f;
    cfg.epochs = 1;
    const auto dir = std::filesystem::temp_directory_path() / "roiattn_lr0";
    std::filesystem::remove_all(dir);

    TrainOptions opts;
    opts.out_dir = dir;
    const TrainResult trained = train(cfg, opts);

    const DetectionModel fresh = DetectionModel::init(cfg);
    const auto before = fresh.parameters();
    const auto after = trained.model.parameters();
    REQUIRE(before.size() == after.size());
    for (size_t i = 0; i < before.size(); ++i) {
        CHECK(before[i].name == after[i].name);
        CHECK(before[i].tensor.values() == after[i].tensor.values());
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("overfit: 8 fixed scenes, 200 iterations, loss drops 10x") {
    DetectionConfig cfg = tiny_config();
    cfg.lr = 0.01f;
    cfg.fc_hidden = 24;
    cfg.reg_expand = 16;
    const DetectionModel model = DetectionModel::init(cfg);
    std::vector<NamedParam> params = model.parameters();
    std::vector<Tensor> tensors;
    for (auto& p : params) tensors.push_back(p.tensor);
    SgdOptimizer opt(tensors, cfg.lr, cfg.momentum, cfg.weight_decay);

    std::vector<SyntheticScene> scenes;
    std::vector<TrainingSample> samples;
    for (int i = 0; i < 8; ++i) {
        scenes.push_back(generate_scene(mix_seed(607, uint64_t(i))));
        samples.push_back(assign_and_encode(
            make_proposals(scenes.back(), mix_seed(608, uint64_t(i))), scenes.back().objects));
    }

    double first_loss = 0.0, last_loss = 0.0;
    for (int it = 0; it < 200; ++it) {
        const int idx = it % 8;
        Tape tape;
        TapeScope scope(tape);
        const HeadOutput out = model.forward(scenes[size_t(idx)].image,
                                             samples[size_t(idx)].proposals);
        LossBreakdown lb = detection_loss(out, samples[size_t(idx)]);
        if (it == 0) first_loss = lb.total.data()[0];
        last_loss = lb.total.data()[0];
        tape.backward(lb.total);
        opt.step();
        opt.zero_grad();
    }
    CHECK_MESSAGE(last_loss <= first_loss / 10.0, "first ", first_loss, " last ", last_loss);
}

TEST_CASE("train is deterministic: byte-identical metrics and checkpoints") {
    DetectionConfig cfg = tiny_config();
    const auto base = std::filesystem::temp_directory_path();
    const auto dir_a = base / "roiattn_det_a";
    const auto dir_b = base / "roiattn_det_b";
    std::filesystem::remove_all(dir_a);
    std::filesystem::remove_all(dir_b);

    TrainOptions oa;
    oa.out_dir = dir_a;
    TrainOptions ob;
    ob.out_dir = dir_b;
    train(cfg, oa);
    train(cfg, ob);

    CHECK(read_file(dir_a / "metrics.csv") == read_file(dir_b / "metrics.csv"));
    CHECK(read_file(dir_a / "checkpoint.ratn") == read_file(dir_b / "checkpoint.ratn"));
    CHECK(read_file(dir_a / "metrics.csv").rfind("epoch,loss,mAP,AP50,AP75\n", 0) == 0);
    std::filesystem::remove_all(dir_a);
    std::filesystem::remove_all(dir_b);
}

TEST_CASE("checkpoints restore a model exactly") {
    DetectionConfig cfg = tiny_config();
    cfg.epochs = 1;
    const TrainResult r = train(cfg);
    const auto dir = std::filesystem::temp_directory_path() / "roiattn_restore";
    std::filesystem::create_directories(dir);
    const auto path = dir / "model.ratn";
    save_checkpoint(path, r.model.parameters());

    DetectionModel fresh = DetectionModel::init(cfg);
    fresh.load(load_checkpoint(path));
    const SyntheticScene scene = generate_scene(611);
    const auto proposals = make_proposals(scene, 612);
    const HeadOutput a = r.model.forward(scene.image, proposals);
    const HeadOutput b = fresh.forward(scene.image, proposals);
    CHECK(a.class_logits.values() == b.class_logits.values());
    CHECK(a.box_deltas.values() == b.box_deltas.values());
    std::filesystem::remove_all(dir);
}

TEST_CASE("scene dump writes parsable PPM and annotations") {
    const auto dir = std::filesystem::temp_directory_path() / "roiattn_dump";
    std::filesystem::remove_all(dir);
    dump_scenes(dir, 2, 613);
    const std::string ppm = read_file(dir / "scene_00000.ppm");
    CHECK(ppm.rfind("P6\n128 128\n255\n", 0) == 0);
    CHECK(ppm.size() == 15 + size_t(128) * 128 * 3);

    std::ifstream ann(dir / "scene_00000.txt");
    int cls;
    float x1, y1, x2, y2;
    int rows = 0;
    while (ann >> cls >> x1 >> y1 >> x2 >> y2) {
        CHECK(cls >= 0);
        CHECK(cls < kNumClasses);
        CHECK(x2 > x1);
        CHECK(y2 > y1);
        ++rows;
    }
    const SyntheticScene scene = generate_scene(mix_seed(613, 0));
    CHECK(rows == int(scene.objects.size()));
    std::filesystem::remove_all(dir);
}

TEST_CASE("head ablation variants wire different architectures") {
    DetectionConfig cfg = tiny_config();

    cfg.use_double_head = false;
    cfg.use_pos_encoding = false;
    cfg.attach_attention_cls = false;
    cfg.attach_attention_reg = false;
    const auto base_params = DetectionModel::init(cfg).parameters();
    std::set<std::string> base_names;
    for (auto& p : base_params) base_names.insert(p.name);
    CHECK(base_names.count("single_head.fc1.weight") == 1);
    CHECK(base_names.count("single_head.attention.block0.key_memory") == 0);
    CHECK(base_names.count("posenc.weight") == 0);

    cfg.attach_attention_cls = cfg.attach_attention_reg = true;
    const auto attn_params = DetectionModel::init(cfg).parameters();
    std::set<std::string> attn_names;
    for (auto& p : attn_params) attn_names.insert(p.name);
    CHECK(attn_names.count("single_head.attention.block0.key_memory") == 1);

    cfg.use_double_head = true;
    cfg.use_pos_encoding = true;
    const auto full_params = DetectionModel::init(cfg).parameters();
    std::set<std::string> full_names;
    for (auto& p : full_params) full_names.insert(p.name);
    CHECK(full_names.count("head.attention.block0.key_memory") == 1);
    CHECK(full_names.count("head.reg_block1.conv1x1.weight") == 1);
    CHECK(full_names.count("posenc.weight") == 1);

    // Only cls. / Only reg. rows: attention attaches to exactly one branch.
    cfg.use_pos_encoding = false;
    cfg.attach_attention_cls = true;
    cfg.attach_attention_reg = false;
    const DetectionModel only_cls = DetectionModel::init(cfg);
    const SyntheticScene scene = generate_scene(614);
    const auto proposals = make_proposals(scene, 615);
    const HeadOutput out_cls = only_cls.forward(scene.image, proposals);
    CHECK(out_cls.class_logits.dim(0) == int(proposals.size()));
}

TEST_CASE("classes without ground truth are excluded from the means") {
    std::vector<GtBox> gts{{0, 0, {0, 0, 10, 10}}, {0, 1, {20, 20, 30, 30}}};
    std::vector<Detection> dets{
        {0, 0, 0.9f, {0, 0, 10, 10}},   // perfect for class 0
        {0, 2, 0.8f, {40, 40, 50, 50}}, // class 2 has no ground truth
    };
    const ApReport r = evaluate_map(dets, gts, coco_thresholds(), kNumClasses);
    CHECK(r.per_class_ap[0] == doctest::Approx(1.0));
    CHECK(r.per_class_ap[1] == doctest::Approx(0.0));  // has GT, no detection
    CHECK(r.per_class_ap[2] == -1.0);                  // excluded
    CHECK(r.per_class_ap[3] == -1.0);
    CHECK(r.ap == doctest::Approx(0.5));  // mean over classes 0 and 1 only
}

TEST_CASE("grid ablation runs 12 deterministic cells on a micro schedule") {
    DetectionConfig base = tiny_config();
    base.train_scenes = 4;
    base.val_scenes = 2;
    base.epochs = 1;
    base.lr_decay_epochs = {1};
    const auto cells_a = run_grid_ablation(base);
    const auto cells_b = run_grid_ablation(base);
    REQUIRE(cells_a.size() == 12);
    for (size_t i = 0; i < 12; ++i) {
        CHECK(cells_a[i].d == cells_b[i].d);
        CHECK(cells_a[i].depth == cells_b[i].depth);
        CHECK(cells_a[i].ap == cells_b[i].ap);
        CHECK(cells_a[i].ap50 == cells_b[i].ap50);
    }
    CHECK(ablation_csv(cells_a) == ablation_csv(cells_b));
}

TEST_CASE("concurrent per-scene forwards against shared parameters") {
    DetectionConfig cfg = tiny_config();
    const DetectionModel model = DetectionModel::init(cfg);

    std::vector<SyntheticScene> scenes;
    std::vector<std::vector<BoxXYXY>> proposals;
    for (int i = 0; i < 4; ++i) {
        scenes.push_back(generate_scene(mix_seed(616, uint64_t(i))));
        proposals.push_back(make_proposals(scenes.back(), mix_seed(617, uint64_t(i))));
    }

    std::vector<HeadOutput> sequential;
    for (int i = 0; i < 4; ++i) {
        sequential.push_back(model.forward(scenes[size_t(i)].image, proposals[size_t(i)]));
    }

    std::vector<HeadOutput> threaded(4);
    std::vector<std::thread> workers;
    for (int i = 0; i < 4; ++i) {
        workers.emplace_back([&, i] {
            threaded[size_t(i)] = model.forward(scenes[size_t(i)].image, proposals[size_t(i)]);
        });
    }
    for (auto& t : workers) t.join();

    for (int i = 0; i < 4; ++i) {
        CHECK(threaded[size_t(i)].class_logits.values() ==
              sequential[size_t(i)].class_logits.values());
        CHECK(threaded[size_t(i)].box_deltas.values() ==
              sequential[size_t(i)].box_deltas.values());
    }
}

TEST_CASE("grid ablation reference values and csv shape") {
    CHECK(reference_grid_ap(10, 1) == doctest::Approx(45.4));
    CHECK(reference_grid_ap(80, 3) == doctest::Approx(45.1));
    CHECK_THROWS_AS(reference_grid_ap(15, 1), ConfigError);

    std::vector<AblationCell> cells;
    for (int d : ablation_d_values()) {
        for (int depth : ablation_depth_values()) {
            cells.push_back({d, depth, 0.5, 0.9, 0.4, reference_grid_ap(d, depth)});
        }
    }
    CHECK(cells.size() == 12);
    const std::string csv = ablation_csv(cells);
    CHECK(csv.rfind("d,depth,AP,AP50,AP75,paper_AP\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 13);
    CHECK(csv.find("10,1,") != std::string::npos);
    CHECK(csv.find(",45.4\n") != std::string::npos);
}

TEST_SUITE_END();
