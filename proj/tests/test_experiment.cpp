#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "nnlab/errors.hpp"
#include "nnlab/experiment.hpp"
#include "nnlab/hash.hpp"
#include "nnlab/svg.hpp"

using namespace nnlab;
using nnlab::exp::ExperimentConfig;
using nnlab::exp::RunManifest;
using testutil::TempDir;

namespace testutil {

// tag-balance checker for the SVG well-formedness contract
bool xml_well_formed(const std::string& text) {
    std::vector<std::string> stack;
    std::size_t i = 0;
    if (text.rfind("<?xml", 0) == 0) {
        i = text.find("?>");
        if (i == std::string::npos) return false;
        i += 2;
    }
    while (i < text.size()) {
        if (text[i] != '<') {
            ++i;
            continue;
        }
        std::size_t end = text.find('>', i);
        if (end == std::string::npos) return false;
        std::string tag = text.substr(i + 1, end - i - 1);
        i = end + 1;
        if (tag.empty()) return false;
        if (tag[0] == '!' || tag[0] == '?') continue;
        if (tag[0] == '/') {
            if (stack.empty() || stack.back() != tag.substr(1)) return false;
            stack.pop_back();
            continue;
        }
        const bool self_closing = tag.back() == '/';
        if (self_closing) tag.pop_back();
        std::string name;
        for (char c : tag) {
            if (std::isspace(static_cast<unsigned char>(c))) break;
            name += c;
        }
        if (name.empty()) return false;
        // attribute quotes must balance
        if (std::count(tag.begin(), tag.end(), '"') % 2 != 0) return false;
        if (!self_closing) stack.push_back(name);
    }
    return stack.empty();
}

} // namespace testutil

namespace {

ExperimentConfig tiny_train_config(const std::string& out_dir) {
    ExperimentConfig cfg;
    cfg.kind = "train";
    cfg.dataset.kind = "synth";
    cfg.dataset.synth.num_classes = 3;
    cfg.dataset.synth.per_class = 15;
    cfg.dataset.synth.dims = 4;
    cfg.dataset.synth.seed = 5;
    cfg.dataset.synth_test_per_class = 10;
    cfg.arch = "mlp-small";
    cfg.hidden = 16;
    cfg.seeds = {1};
    cfg.epochs = 5;
    cfg.batch_size = 8;
    cfg.lr = 0.05;
    cfg.out_dir = out_dir;
    return cfg;
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("config hash tracks semantic fields only") {
    ExperimentConfig a = tiny_train_config("/tmp/x");
    ExperimentConfig b = a;
    CHECK(a.config_hash() == b.config_hash());
    b.out_dir = "/tmp/elsewhere";
    CHECK(a.config_hash() == b.config_hash());
    b.seeds = {2};
    CHECK(a.config_hash() != b.config_hash());
    ExperimentConfig c = a;
    c.lr = 0.02;
    CHECK(a.config_hash() != c.config_hash());
    ExperimentConfig d = a;
    d.noise_seed = 99;
    CHECK(a.config_hash() != d.config_hash());
}

TEST_CASE("config validation rejects bad noise levels and empty seed lists") {
    ExperimentConfig cfg = tiny_train_config("/tmp/x");
    cfg.noise_levels = {1.5};
    CHECK_THROWS_AS(cfg.validate(), config_error);
    cfg.noise_levels = {0.25, 0.25, 0.5}; // duplicate
    CHECK_THROWS_AS(cfg.validate(), config_error);
    cfg.noise_levels = {};
    cfg.seeds = {};
    CHECK_THROWS_AS(cfg.validate(), config_error);

    ExperimentConfig sweep = tiny_train_config("/tmp/x");
    sweep.kind = "noise-sweep";
    sweep.noise_levels = {0.0, 0.5}; // too few
    sweep.seeds = {1, 2};
    CHECK_THROWS_AS(sweep.validate(), config_error);
    sweep.noise_levels = {0.0, 0.5, 1.0};
    sweep.seeds = {1};
    CHECK_THROWS_AS(sweep.validate(), config_error);

    ExperimentConfig study = tiny_train_config("/tmp/x");
    study.kind = "seed-study";
    study.seeds = {1};
    CHECK_THROWS_AS(study.validate(), config_error);
}

TEST_CASE("cmd_train: artifacts exist, manifest verifies, reruns are bitwise identical") {
    TempDir tmp("nnlab_cmd_train");
    ExperimentConfig cfg = tiny_train_config(tmp.path);
    RunManifest m1 = exp::cmd_train(cfg);
    CHECK(m1.kind == "train");
    m1.verify(tmp.path);
    CHECK(m1.config_hash == cfg.config_hash());

    const std::string report = tmp.file("report_s1_p0.csv");
    const std::string model = tmp.file("model_s1_p0.nnck");
    const std::string rep_bytes = slurp(report);
    const std::string model_bytes = slurp(model);
    CHECK(rep_bytes.rfind("epoch,train_acc,test_acc,loss,g_bar\n", 0) == 0);

    RunManifest m2 = exp::cmd_train(cfg);
    CHECK(slurp(report) == rep_bytes);
    CHECK(slurp(model) == model_bytes);
    CHECK(m2.config_hash == m1.config_hash);

    // manifest reads back
    RunManifest read = RunManifest::read(tmp.path);
    CHECK(read.config_hash == m1.config_hash);
    CHECK(read.artifacts.size() == m1.artifacts.size());
}

TEST_CASE("cmd_train covers every (seed, noise) pair requested") {
    TempDir tmp("nnlab_cmd_train_grid");
    ExperimentConfig cfg = tiny_train_config(tmp.path);
    cfg.seeds = {1, 2};
    cfg.noise_levels = {0.0, 1.0};
    cfg.epochs = 2;
    RunManifest m = exp::cmd_train(cfg);
    for (const char* name : {"model_s1_p0.nnck", "model_s2_p0.nnck", "model_s1_p1.nnck",
                             "model_s2_p1.nnck", "report_s2_p1.csv"})
        CHECK(std::filesystem::exists(tmp.file(name)));
    m.verify(tmp.path);
    // the trained model loads back
    Network net = load_checkpoint(tmp.file("model_s1_p0.nnck"));
    CHECK(net.desc.num_classes == 3);
}

TEST_CASE("cmd_seed_study emits the combined csv and an overlay svg") {
    TempDir tmp("nnlab_cmd_study");
    ExperimentConfig cfg = tiny_train_config(tmp.path);
    cfg.kind = "seed-study";
    cfg.seeds = {1, 2, 3};
    cfg.epochs = 20;
    RunManifest m = exp::cmd_seed_study(cfg);
    m.verify(tmp.path);
    const std::string csv = slurp(tmp.file("seed_study.csv"));
    CHECK(csv.rfind("seed,epoch,train_acc,g_bar\n", 0) == 0);
    // one row per (seed, epoch)
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 3 * 20);

    // true-label curves cross 1.5x chance at nearly the same epoch
    std::istringstream rows(csv.substr(csv.find('\n') + 1));
    std::string line;
    std::map<int, int> first_cross;
    while (std::getline(rows, line)) {
        int seed = 0, epoch = 0;
        double acc = 0, g = 0;
        REQUIRE(std::sscanf(line.c_str(), "%d,%d,%lf,%lf", &seed, &epoch, &acc, &g) == 4);
        if (acc > 1.5 / 3.0 && !first_cross.count(seed)) first_cross[seed] = epoch;
    }
    REQUIRE(first_cross.size() == 3);
    int lo = 1000, hi = 0;
    for (auto [seed, epoch] : first_cross) {
        lo = std::min(lo, epoch);
        hi = std::max(hi, epoch);
    }
    CHECK(hi - lo <= 2); // 10% of the epoch budget

    const std::string svg = slurp(tmp.file("seed_study.svg"));
    CHECK(testutil::xml_well_formed(svg));
    CHECK(std::count(svg.begin(), svg.end(), '<') > 10);
}

TEST_CASE("cmd_train_gan writes both checkpoints and the report") {
    TempDir tmp("nnlab_cmd_gan");
    ExperimentConfig cfg = tiny_train_config(tmp.path);
    cfg.kind = "train-gan";
    cfg.dataset.synth.dims = 2;
    cfg.latent_dim = 4;
    cfg.hidden = 16;
    cfg.gan_epochs = 3;
    cfg.gan_batch_size = 8;
    RunManifest m = exp::cmd_train_gan(cfg);
    m.verify(tmp.path);
    Network gen = load_checkpoint(tmp.file("gen.nnck"));
    CHECK(gen.desc.role == Role::Generator);
    const std::string csv = slurp(tmp.file("gan_report.csv"));
    CHECK(csv.rfind("epoch,d_loss,g_loss,d_acc\n", 0) == 0);
}

TEST_CASE("cmd_dissect: probe == reference gives a zero bar") {
    TempDir tmp("nnlab_cmd_dissect");
    ExperimentConfig train_cfg = tiny_train_config(tmp.path + "/models");
    exp::cmd_train(train_cfg);

    ExperimentConfig cfg = tiny_train_config(tmp.path);
    cfg.kind = "dissect";
    cfg.reference = tmp.path + "/models/model_s1_p0.nnck";
    cfg.probes = {tmp.path + "/models/model_s1_p0.nnck"};
    cfg.generator = "analytic";
    cfg.dissect_seeds = 2;
    cfg.ascent_iterations = 25;
    cfg.export_patterns = 1;
    RunManifest m = exp::cmd_dissect(cfg);
    m.verify(tmp.path);
    DissectionResult res =
        read_dissection_csv(tmp.file("dissect_model_s1_p0_vs_model_s1_p0.csv"));
    CHECK(res.dist_mean <= 1e-12);
    CHECK(std::filesystem::exists(tmp.file("dissimilarity.svg")));
    CHECK(std::filesystem::exists(tmp.file("pattern_model_s1_p0_c0_s0.csv")));
    CHECK(testutil::xml_well_formed(slurp(tmp.file("dissimilarity.svg"))));
}

TEST_CASE("cmd_dissect: missing generator checkpoint is an io error") {
    TempDir tmp("nnlab_cmd_dissect_bad");
    ExperimentConfig train_cfg = tiny_train_config(tmp.path + "/models");
    exp::cmd_train(train_cfg);
    ExperimentConfig cfg = tiny_train_config(tmp.path);
    cfg.kind = "dissect";
    cfg.reference = tmp.path + "/models/model_s1_p0.nnck";
    cfg.probes = {cfg.reference};
    cfg.generator = tmp.path + "/does_not_exist.nnck";
    CHECK_THROWS_AS(exp::cmd_dissect(cfg), io_error);
}

TEST_CASE("cmd_noise_sweep produces one csv row per level and a line svg") {
    TempDir tmp("nnlab_cmd_sweep");
    ExperimentConfig cfg = tiny_train_config(tmp.path);
    cfg.kind = "noise-sweep";
    cfg.seeds = {1, 2};
    cfg.noise_levels = {0.0, 0.5, 1.0};
    cfg.epochs = 3;
    cfg.dissect_seeds = 1;
    cfg.ascent_iterations = 10;
    RunManifest m = exp::cmd_noise_sweep(cfg);
    m.verify(tmp.path);
    const std::string csv = slurp(tmp.file("sweep.csv"));
    CHECK(csv.rfind("noise_level,dist_mean,dist_variance\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
    CHECK(testutil::xml_well_formed(slurp(tmp.file("sweep.svg"))));
}

TEST_CASE("cmd_report regenerates figures from training csvs") {
    TempDir tmp("nnlab_cmd_report");
    ExperimentConfig cfg = tiny_train_config(tmp.path);
    exp::cmd_train(cfg);
    ExperimentConfig rcfg;
    rcfg.kind = "report";
    rcfg.out_dir = tmp.path;
    RunManifest m = exp::cmd_report(rcfg);
    CHECK(!m.artifacts.empty());
    CHECK(std::filesystem::exists(tmp.file("report_s1_p0.svg")));
    CHECK(testutil::xml_well_formed(slurp(tmp.file("report_s1_p0.svg"))));
}

TEST_CASE("svg: single 3-point series renders one polyline with 3 pairs") {
    svg::LinePlotSpec spec;
    spec.title = "t";
    spec.xlabel = "x";
    spec.ylabel = "y";
    spec.series = {{"s", {{0.0, 1.0}, {1.0, 2.0}, {2.0, 0.5}}}};
    const std::string out = svg::render_line_plot(spec);
    CHECK(testutil::xml_well_formed(out));
    std::size_t n_polylines = 0, pos = 0;
    while ((pos = out.find("<polyline", pos)) != std::string::npos) {
        ++n_polylines;
        pos += 9;
    }
    CHECK(n_polylines == 1);
    const std::size_t pts = out.find("points=\"");
    REQUIRE(pts != std::string::npos);
    const std::string coords = out.substr(pts + 8, out.find('"', pts + 8) - pts - 8);
    CHECK(std::count(coords.begin(), coords.end(), ',') == 3);
}

TEST_CASE("svg: bar chart draws one rect and one whisker line per bar") {
    svg::BarChartSpec spec;
    spec.title = "bars";
    spec.ylabel = "v";
    spec.bars = {{"a", 1.0, 0.2, 0}, {"b", 2.5, 0.1, 1}};
    const std::string out = svg::render_bar_chart(spec);
    CHECK(testutil::xml_well_formed(out));
    std::size_t rects = 0, pos = 0;
    while ((pos = out.find("<rect", pos)) != std::string::npos) {
        ++rects;
        pos += 5;
    }
    // one background rect + frame rect + one per bar
    CHECK(rects == 2 + 2);
    std::size_t whiskers = 0;
    pos = 0;
    while ((pos = out.find("stroke=\"#000000\"", pos)) != std::string::npos) {
        ++whiskers;
        pos += 10;
    }
    CHECK(whiskers == 2);
}

TEST_CASE("svg: empty series are rejected") {
    svg::LinePlotSpec spec;
    CHECK_THROWS_AS(svg::render_line_plot(spec), config_error);
    spec.series = {{"s", {}}};
    CHECK_THROWS_AS(svg::render_line_plot(spec), config_error);
    svg::BarChartSpec bars;
    CHECK_THROWS_AS(svg::render_bar_chart(bars), config_error);
}

TEST_CASE("descriptor file can stand in for a preset") {
    TempDir tmp("nnlab_arch_file");
    ExperimentConfig cfg = tiny_train_config(tmp.path);
    PresetOptions opt;
    opt.input_shape = {4};
    opt.num_classes = 3;
    opt.hidden = 8;
    const ArchitectureDescriptor d = make_preset("mlp-small", opt);
    {
        std::ofstream f(tmp.file("arch.txt"));
        f << d.to_text();
    }
    cfg.arch = "file:" + tmp.file("arch.txt");
    RunManifest m = exp::cmd_train(cfg);
    m.verify(tmp.path);
}
