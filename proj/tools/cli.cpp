#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "ddsr/errors.hpp"
#include "ddsr/image_io.hpp"
#include "ddsr/metrics.hpp"
#include "ddsr/pipeline.hpp"
#include "ddsr/resample.hpp"
#include "ddsr/srcnn.hpp"
#include "ddsr/synthetic.hpp"

#ifndef DDSR_VERSION
#define DDSR_VERSION "0.0.0"
#endif

namespace ddsr::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Globals {
    std::uint64_t seed = 1;
    int threads = 1;
    fs::path out_dir = ".";
};

class Stopwatch {
public:
    void lap(const std::string& stage) {
        const auto now = std::chrono::steady_clock::now();
        timings_[stage] = std::chrono::duration<double>(now - last_).count();
        last_ = now;
    }
    json to_json() const { return timings_; }

private:
    std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
    json timings_ = json::object();
};

fs::path resolve(const Globals& g, const fs::path& p) { return p.is_absolute() ? p : g.out_dir / p; }

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + path.string());
    f << text;
    if (!f) throw IoError("write failed: " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

// Everything except "timings" is a pure function of inputs, flags and seed.
void write_manifest(const Globals& g, const std::string& command, json inputs, json config, const Stopwatch& sw) {
    json m;
    m["command"] = command;
    m["inputs"] = std::move(inputs);
    m["config"] = std::move(config);
    m["seed"] = g.seed;
    m["threads"] = g.threads;
    m["version"] = DDSR_VERSION;
    m["timings"] = sw.to_json();
    write_json(g.out_dir / (command + "_manifest.json"), m);
}

std::vector<fs::path> depth_files(const std::vector<std::string>& sources) {
    std::vector<fs::path> out;
    for (const auto& s : sources) {
        const fs::path p(s);
        if (fs::is_directory(p)) {
            std::vector<fs::path> found;
            for (const auto& e : fs::directory_iterator(p)) {
                const auto ext = e.path().extension().string();
                if (e.is_regular_file() && (ext == ".pfm" || ext == ".pgm")) found.push_back(e.path());
            }
            std::sort(found.begin(), found.end());
            out.insert(out.end(), found.begin(), found.end());
        } else if (fs::exists(p)) {
            out.push_back(p);
        } else {
            throw IoError("no such file or directory: " + s);
        }
    }
    return out;
}

std::vector<fs::path> png_files(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
    std::vector<fs::path> found;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".png") found.push_back(e.path());
    std::sort(found.begin(), found.end());
    return found;
}

std::vector<std::string> path_strings(const std::vector<fs::path>& paths) {
    std::vector<std::string> out;
    for (const auto& p : paths) out.push_back(p.generic_string());
    return out;
}

ColorImage crop(const ColorImage& img, int w, int h) {
    if (img.width < w || img.height < h) {
        throw DimensionError(fmt::format("color image {}x{} is smaller than {}x{}", img.width, img.height, w, h));
    }
    ColorImage out{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h * 3)};
    for (int y = 0; y < h; ++y)
        std::copy_n(img.rgb.begin() + (static_cast<std::ptrdiff_t>(y) * img.width) * 3, w * 3,
                    out.rgb.begin() + static_cast<std::ptrdiff_t>(y) * w * 3);
    return out;
}

DepthMap crop(const DepthMap& map, int w, int h) {
    std::vector<double> v;
    v.reserve(static_cast<std::size_t>(w) * h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) v.push_back(map.at(x, y));
    return DepthMap(w, h, std::move(v), map.scale());
}

const std::map<std::string, DegradeMethod> kDegradeMethods{{"decimate", DegradeMethod::decimate},
                                                           {"box", DegradeMethod::box}};
const std::map<std::string, Optimizer> kOptimizers{{"adam", Optimizer::adam}, {"sgd", Optimizer::sgd}};

json refine_json(const RefineConfig& r, const SmoothnessConfig& s) {
    return {{"lambda1", r.lambda1},       {"lambda2", r.lambda2},       {"irls_iters", r.irls_iters},
            {"irls_tol", r.irls_tol},     {"cg_tol", r.cg_tol},         {"cg_max_iters", r.cg_max_iters},
            {"jacobi", r.jacobi},         {"tv_epsilon", r.tv_epsilon}, {"value_scale", r.value_scale},
            {"window", s.window},         {"sigma_floor", s.sigma_floor}};
}

void add_refine_options(CLI::App* cmd, PipelineConfig& pc) {
    cmd->add_option("--lambda1", pc.refine.lambda1, "Smoothness prior weight")->check(CLI::NonNegativeNumber);
    cmd->add_option("--lambda2", pc.refine.lambda2, "Total-variation prior weight")->check(CLI::NonNegativeNumber);
    cmd->add_option("--irls-iters", pc.refine.irls_iters, "Outer IRLS iterations")->check(CLI::PositiveNumber);
    cmd->add_option("--tv-epsilon", pc.refine.tv_epsilon, "TV smoothing floor, relative to the depth range")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--window", pc.smoothness.window, "Smoothness window size (odd)");
    cmd->add_flag("--jacobi", pc.refine.jacobi, "Jacobi-preconditioned conjugate gradient");
}

// ---------------------------------------------------------------------------

struct DegradeArgs {
    std::string in;
    int factor = 2;
    std::string method = "decimate";
    std::string out = "lr.pfm";
};

void cmd_degrade(const Globals& g, const DegradeArgs& a, std::ostream& out) {
    Stopwatch sw;
    const auto hr = load_depth(a.in);
    sw.lap("load");
    const auto res = degrade(hr, ScaleFactor(a.factor), kDegradeMethods.at(a.method));
    const auto path = resolve(g, a.out);
    save_depth(res.lr, path, depth_format_for(path));
    sw.lap("degrade");
    write_manifest(g, "degrade", {{"hr", a.in}},
                   {{"factor", a.factor},
                    {"method", a.method},
                    {"output", path.generic_string()},
                    {"cropped", {res.cropped_width, res.cropped_height}}},
                   sw);
    out << fmt::format("{}x{} -> {}x{} written to {}\n", hr.width(), hr.height(), res.lr.width(), res.lr.height(),
                       path.string());
}

// ---------------------------------------------------------------------------

struct TrainArgs {
    std::vector<std::string> data;
    int factor = 2;
    int units = 2;
    std::string method = "decimate";
    std::string optimizer = "adam";
    std::string out = "weights.ddsr";
    TrainConfig cfg;
};

json report_json(const TrainReport& r) {
    return {{"initial_loss", r.initial_loss}, {"final_loss", r.final_loss}, {"epoch_loss", r.epoch_loss}};
}

void cmd_train(const Globals& g, TrainArgs a, std::ostream& out) {
    Stopwatch sw;
    const auto files = depth_files(a.data);
    if (files.empty()) throw ConfigError("training corpus is empty: no .pfm or .pgm files found");
    std::vector<DepthMap> corpus;
    for (const auto& f : files) corpus.push_back(load_depth(f));
    sw.lap("load");

    a.cfg.seed = g.seed;
    a.cfg.threads = g.threads;
    a.cfg.optimizer = kOptimizers.at(a.optimizer);
    ProgressiveReport rep;
    const auto net =
        train_progressive(corpus, ScaleFactor(a.factor), a.units, a.cfg, kDegradeMethods.at(a.method), &rep);
    sw.lap("train");

    const auto weights_path = resolve(g, a.out);
    save_weights(net, weights_path);
    json curves;
    curves["units"] = json::array();
    for (const auto& u : rep.units) curves["units"].push_back(report_json(u));
    if (a.cfg.fine_tune_epochs > 0) curves["fine_tune"] = report_json(rep.fine_tune);
    curves["pairs_per_unit"] = rep.pairs_per_unit;
    write_json(g.out_dir / "loss_curves.json", curves);
    sw.lap("save");

    const auto& c = a.cfg;
    write_manifest(g, "train", {{"corpus", path_strings(files)}},
                   {{"factor", a.factor},
                    {"units", a.units},
                    {"degrade_method", a.method},
                    {"optimizer", a.optimizer},
                    {"learning_rate", c.learning_rate},
                    {"last_layer_lr_scale", c.last_layer_lr_scale},
                    {"epochs", c.epochs},
                    {"batch", c.batch},
                    {"sub_image", c.sub_image},
                    {"stride", c.stride},
                    {"init_stddev", c.init_stddev},
                    {"later_unit_init", c.later_unit_init == LaterUnitInit::pass_through ? "pass_through" : "gaussian"},
                    {"fine_tune_epochs", c.fine_tune_epochs},
                    {"depth_norm", net.depth_norm},
                    {"weights", weights_path.generic_string()}},
                   sw);
    for (std::size_t k = 0; k < rep.units.size(); ++k) {
        out << fmt::format("unit {}: loss {:.6g} -> {:.6g}\n", k + 1, rep.units[k].initial_loss,
                           rep.units[k].final_loss);
    }
    out << "weights written to " << weights_path.string() << "\n";
}

// ---------------------------------------------------------------------------

struct SrArgs {
    std::string in;
    std::string weights;
    int factor = 2;
    std::string guide;
    bool no_refine = false;
    bool dump_stages = false;
    std::string out = "sr.pfm";
    PipelineConfig pc;
};

void cmd_sr(const Globals& g, SrArgs a, std::ostream& out) {
    Stopwatch sw;
    const auto lr = load_depth(a.in);
    const auto net = load_weights(a.weights);
    std::optional<ColorImage> color;
    if (!a.guide.empty()) color = load_png(a.guide);
    sw.lap("load");

    a.pc.refine_enabled = !a.no_refine;
    a.pc.threads = g.threads;
    const auto res = super_resolve(lr, ScaleFactor(a.factor), net, color, a.pc);
    sw.lap("super_resolve");

    const auto path = resolve(g, a.out);
    save_depth(res.output(), path, depth_format_for(path));
    if (a.dump_stages) {
        const auto dir = g.out_dir / "stages";
        fs::create_directories(dir);
        save_depth(res.bicubic, dir / "bicubic.pfm");
        for (std::size_t k = 0; k < res.unit_outputs.size(); ++k)
            save_depth(res.unit_outputs[k], dir / fmt::format("unit{}.pfm", k + 1));
        if (res.refined) save_depth(*res.refined, dir / "refined.pfm");
    }
    if (res.refined) write_text(g.out_dir / "refine_trace.jsonl", res.trace.to_json_lines());
    sw.lap("save");

    json cfg = refine_json(a.pc.refine, a.pc.smoothness);
    cfg["factor"] = a.factor;
    cfg["refine"] = !a.no_refine;
    cfg["guidance"] = a.no_refine ? "none" : (res.guidance == GuidanceMode::color ? "color" : "self");
    cfg["output"] = path.generic_string();
    write_manifest(g, "sr", {{"lr", a.in}, {"weights", a.weights}, {"guide", a.guide}}, cfg, sw);
    out << fmt::format("{}x{} -> {}x{} written to {}\n", lr.width(), lr.height(), res.output().width(),
                       res.output().height(), path.string());
}

// ---------------------------------------------------------------------------

struct EvalArgs {
    std::vector<std::string> gt;
    int factor = 2;
    std::string weights;
    std::vector<std::string> methods;
    std::string color_dir;
    std::string method = "decimate";
    bool dump = false;
    PipelineConfig pc;
};

const std::set<std::string> kEvalMethods{"nn", "bicubic", "cnn_only", "full", "full_self", "full_color", "gt"};

void cmd_eval(const Globals& g, EvalArgs a, std::ostream& out) {
    Stopwatch sw;
    const auto files = depth_files(a.gt);
    if (files.empty()) throw ConfigError("no ground-truth depth files found");
    if (a.methods.empty()) {
        a.methods = {"nn", "bicubic"};
        if (!a.weights.empty()) {
            a.methods.push_back("cnn_only");
            a.methods.push_back("full");
        }
    }
    bool needs_net = false;
    for (const auto& m : a.methods) {
        if (!kEvalMethods.count(m)) throw ConfigError("unknown method: " + m);
        if (m != "nn" && m != "bicubic" && m != "gt") needs_net = true;
        if (m == "full_color" && a.color_dir.empty()) throw ConfigError("full_color needs --color-dir");
    }
    std::optional<NetworkWeights> net;
    if (needs_net) {
        if (a.weights.empty()) throw ConfigError("methods " + fmt::format("{}", fmt::join(a.methods, ",")) +
                                                 " need --weights");
        net = load_weights(a.weights);
    }
    a.pc.threads = g.threads;
    const ScaleFactor factor(a.factor);
    const auto dump_root = g.out_dir / "eval_dump";

    std::string csv = "image,method,rmse,mae,ssim\n";
    json rows = json::array();
    for (const auto& file : files) {
        const auto hr = load_depth(file);
        const auto deg = degrade(hr, factor, kDegradeMethods.at(a.method));
        const auto gt = crop(hr, deg.cropped_width, deg.cropped_height);
        const int w = gt.width(), h = gt.height();
        const std::string name = file.stem().string();

        std::optional<ColorImage> color;
        if (!a.color_dir.empty()) {
            const auto cpath = fs::path(a.color_dir) / (name + ".png");
            if (fs::exists(cpath)) color = crop(load_png(cpath), w, h);
        }

        std::optional<DepthMap> cnn;
        auto cnn_output = [&]() -> const DepthMap& {
            if (!cnn) cnn = progressive_forward(deg.lr, factor, *net);
            return *cnn;
        };
        auto refined = [&](bool use_color) {
            const auto& unary = cnn_output();
            if (use_color && !color) throw IoError("no color image for " + name + " in " + a.color_dir);
            const auto guide = use_color ? guidance_from_color(*color) : guidance_from_depth(unary);
            return refine_depth(unary, guide, net->depth_norm, a.pc.smoothness, a.pc.refine, nullptr, g.threads);
        };

        if (a.dump) {
            fs::create_directories(dump_root / name);
            save_depth(gt, dump_root / name / "gt.pfm");
        }
        for (const auto& m : a.methods) {
            DepthMap pred;
            if (m == "nn") pred = resize_nearest(deg.lr, w, h);
            else if (m == "bicubic") pred = resize_bicubic(deg.lr, w, h);
            else if (m == "cnn_only") pred = cnn_output();
            else if (m == "full_self") pred = refined(false);
            else if (m == "full_color") pred = refined(true);
            else if (m == "full") pred = refined(color.has_value());
            else pred = gt;
            const auto r = evaluate(pred, gt);
            csv += fmt::format("{},{},{},{},{}\n", name, m, r.rmse, r.mae, r.ssim);
            rows.push_back({{"image", name}, {"method", m}, {"rmse", r.rmse}, {"mae", r.mae}, {"ssim", r.ssim}});
            if (a.dump) save_depth(pred, dump_root / name / (m + ".pfm"));
            out << fmt::format("{:<16} {:<10} rmse {:.6g}  mae {:.6g}  ssim {:.4f}\n", name, m, r.rmse, r.mae,
                               r.ssim);
        }
    }
    sw.lap("evaluate");
    write_text(g.out_dir / "eval.csv", csv);
    write_json(g.out_dir / "eval.json", {{"factor", a.factor}, {"rows", rows}});

    json cfg = refine_json(a.pc.refine, a.pc.smoothness);
    cfg["factor"] = a.factor;
    cfg["methods"] = a.methods;
    cfg["degrade_method"] = a.method;
    write_manifest(g, "eval", {{"gt", path_strings(files)}, {"weights", a.weights}, {"color_dir", a.color_dir}}, cfg,
                   sw);
}

// ---------------------------------------------------------------------------

struct StatsArgs {
    std::vector<std::string> depth;
    std::string color_dir;
    int bins = 200;
};

json fit_json(const LaplaceFit& f, std::size_t images) {
    return {{"location", f.location}, {"scale", f.scale},         {"fit_rmse", f.fit_rmse}, {"samples", f.samples},
            {"images", images},       {"histogram", f.histogram}, {"density", f.density}};
}

void cmd_stats(const Globals& g, const StatsArgs& a, std::ostream& out) {
    Stopwatch sw;
    const auto files = depth_files(a.depth);
    if (files.empty()) throw ConfigError("no depth files found");
    std::vector<DepthMap> maps;
    for (const auto& f : files) maps.push_back(load_depth(f));
    json report;
    report["bins"] = a.bins;
    const auto depth_fit = gradient_laplace_fit(maps, a.bins);
    report["depth"] = fit_json(depth_fit, maps.size());
    out << fmt::format("depth: location {:.4g} scale {:.4g} fit_rmse {:.4g} ({} images)\n", depth_fit.location,
                       depth_fit.scale, depth_fit.fit_rmse, maps.size());

    std::vector<std::string> color_inputs;
    if (!a.color_dir.empty()) {
        const auto pngs = png_files(a.color_dir);
        if (pngs.empty()) throw ConfigError("no .png files in " + a.color_dir);
        std::vector<DepthMap> lumas;
        for (const auto& p : pngs) {
            const auto gimg = guidance_from_color(load_png(p));
            lumas.emplace_back(gimg.width(), gimg.height(),
                               std::vector<double>(gimg.values().begin(), gimg.values().end()));
        }
        const auto color_fit = gradient_laplace_fit(lumas, a.bins);
        report["color"] = fit_json(color_fit, lumas.size());
        color_inputs = path_strings(pngs);
        out << fmt::format("color: location {:.4g} scale {:.4g} fit_rmse {:.4g} ({} images)\n", color_fit.location,
                           color_fit.scale, color_fit.fit_rmse, lumas.size());
    }
    sw.lap("fit");
    write_json(g.out_dir / "stats.json", report);
    write_manifest(g, "stats", {{"depth", path_strings(files)}, {"color", color_inputs}}, {{"bins", a.bins}}, sw);
}

// ---------------------------------------------------------------------------

struct SynthArgs {
    std::string kind = "scenes";
    int count = 8;
    int width = 64;
    int height = 64;
    double noise = 0.01;
    double step = 0.05;
};

void cmd_synth(const Globals& g, const SynthArgs& a, std::ostream& out) {
    Stopwatch sw;
    std::vector<std::string> written;
    if (a.kind == "scenes") {
        SceneOptions opts;
        opts.width = a.width;
        opts.height = a.height;
        opts.noise_sigma = a.noise;
        const auto scenes = make_scenes(opts, a.count, g.seed);
        for (std::size_t i = 0; i < scenes.size(); ++i) {
            const auto stem = fmt::format("scene_{:03}", i);
            save_depth(scenes[i].depth, g.out_dir / (stem + ".pfm"));
            save_png(scenes[i].color, g.out_dir / (stem + ".png"));
            written.push_back(stem);
        }
    } else {
        const auto maps = a.kind == "laplace" ? laplace_gradient_corpus(a.count, a.width, a.height, a.step, g.seed)
                                              : uniform_gradient_corpus(a.count, a.width, a.height, a.step, g.seed);
        for (std::size_t i = 0; i < maps.size(); ++i) {
            const auto stem = fmt::format("map_{:03}", i);
            save_depth(maps[i], g.out_dir / (stem + ".pfm"));
            written.push_back(stem);
        }
    }
    sw.lap("generate");
    write_manifest(g, "synth", json::object(),
                   {{"kind", a.kind},
                    {"count", a.count},
                    {"width", a.width},
                    {"height", a.height},
                    {"noise", a.noise},
                    {"step", a.step},
                    {"files", written}},
                   sw);
    out << fmt::format("{} {} written to {}\n", written.size(), a.kind, g.out_dir.string());
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Depth map super-resolution: progressive CNN + smoothness/TV refinement", "ddsr"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--config", "", "key=value file with option defaults (command line wins)");

    Globals g;
    app.add_option("--seed", g.seed, "Seed for every random choice");
    app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
    app.add_option("--out-dir", g.out_dir, "Directory for outputs, reports and manifests");

    const auto factor_check = CLI::IsMember({2, 3, 4, 8});
    const auto degrade_check = CLI::IsMember({"decimate", "box"});

    DegradeArgs da;
    auto* degrade_cmd = app.add_subcommand("degrade", "Build a low-resolution map from a high-resolution one");
    degrade_cmd->add_option("--in", da.in, "High-resolution depth (.pfm/.pgm)")->required();
    degrade_cmd->add_option("--factor", da.factor, "Scale factor")->check(factor_check);
    degrade_cmd->add_option("--method", da.method, "decimate or box")->check(degrade_check);
    degrade_cmd->add_option("--out", da.out, "Output path (relative paths go under --out-dir)");

    TrainArgs ta;
    auto* train_cmd = app.add_subcommand("train", "Train the progressive network on high-resolution maps");
    train_cmd->add_option("--data", ta.data, "Depth files or directories")->required();
    train_cmd->add_option("--factor", ta.factor, "Scale factor")->check(factor_check);
    train_cmd->add_option("--units", ta.units, "Number of mapping units")->check(CLI::PositiveNumber);
    train_cmd->add_option("--epochs", ta.cfg.epochs, "Epochs per unit");
    train_cmd->add_option("--lr", ta.cfg.learning_rate, "Learning rate");
    train_cmd->add_option("--last-layer-lr-scale", ta.cfg.last_layer_lr_scale, "Rate multiplier for layer 3");
    train_cmd->add_option("--batch", ta.cfg.batch, "Minibatch size");
    train_cmd->add_option("--sub-image", ta.cfg.sub_image, "Training patch size");
    train_cmd->add_option("--stride", ta.cfg.stride, "Training patch stride");
    train_cmd->add_option("--fine-tune-epochs", ta.cfg.fine_tune_epochs, "Joint fine-tune epochs after training");
    train_cmd->add_option("--optimizer", ta.optimizer, "adam or sgd")->check(CLI::IsMember({"adam", "sgd"}));
    train_cmd->add_option("--method", ta.method, "Degradation: decimate or box")->check(degrade_check);
    train_cmd->add_option("--out", ta.out, "Weights path (relative paths go under --out-dir)");

    SrArgs sa;
    auto* sr_cmd = app.add_subcommand("sr", "Super-resolve a low-resolution depth map");
    sr_cmd->add_option("--in", sa.in, "Low-resolution depth (.pfm/.pgm)")->required();
    sr_cmd->add_option("--weights", sa.weights, "Trained weights file")->required();
    sr_cmd->add_option("--factor", sa.factor, "Scale factor")->check(factor_check);
    sr_cmd->add_option("--guide", sa.guide, "Registered color image (.png) at the output resolution");
    sr_cmd->add_flag("--no-refine", sa.no_refine, "Stop after the CNN stages");
    sr_cmd->add_flag("--dump-stages", sa.dump_stages, "Write bicubic/unit/refined stages to <out-dir>/stages");
    sr_cmd->add_option("--out", sa.out, "Output path (relative paths go under --out-dir)");
    add_refine_options(sr_cmd, sa.pc);

    EvalArgs ea;
    auto* eval_cmd = app.add_subcommand("eval", "Compare methods against ground truth");
    eval_cmd->add_option("--gt", ea.gt, "Ground-truth depth files or directories")->required();
    eval_cmd->add_option("--factor", ea.factor, "Scale factor")->check(factor_check);
    eval_cmd->add_option("--weights", ea.weights, "Trained weights (needed by CNN methods)");
    eval_cmd->add_option("--methods", ea.methods, "Comma list of nn,bicubic,cnn_only,full,full_self,full_color,gt")
        ->delimiter(',');
    eval_cmd->add_option("--color-dir", ea.color_dir, "Directory of <image>.png color images");
    eval_cmd->add_option("--method", ea.method, "Degradation: decimate or box")->check(degrade_check);
    eval_cmd->add_flag("--dump", ea.dump, "Write every prediction to <out-dir>/eval_dump");
    add_refine_options(eval_cmd, ea.pc);

    StatsArgs st;
    auto* stats_cmd = app.add_subcommand("stats", "Laplace fit of gradient histograms");
    stats_cmd->add_option("--depth", st.depth, "Depth files or directories")->required();
    stats_cmd->add_option("--color-dir", st.color_dir, "Directory of color .png images");
    stats_cmd->add_option("--bins", st.bins, "Histogram bins over [-1, 1]")->check(CLI::PositiveNumber);

    SynthArgs sy;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic corpus");
    synth_cmd->add_option("--kind", sy.kind, "scenes, laplace or uniform")
        ->check(CLI::IsMember({"scenes", "laplace", "uniform"}));
    synth_cmd->add_option("--count", sy.count, "Number of maps")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--width", sy.width, "Width")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--height", sy.height, "Height")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--noise", sy.noise, "Depth noise sigma (scenes)")->check(CLI::NonNegativeNumber);
    synth_cmd->add_option("--step", sy.step, "Gradient scale (laplace/uniform)")->check(CLI::PositiveNumber);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e, out, err);
        err << "usage error: " << e.what() << "\n";
        return 2;
    }

    try {
        fs::create_directories(g.out_dir);
        if (*degrade_cmd) cmd_degrade(g, da, out);
        else if (*train_cmd) cmd_train(g, ta, out);
        else if (*sr_cmd) cmd_sr(g, sa, out);
        else if (*eval_cmd) cmd_eval(g, ea, out);
        else if (*stats_cmd) cmd_stats(g, st, out);
        else if (*synth_cmd) cmd_synth(g, sy, out);
    } catch (const ConfigError& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace ddsr::cli
