#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "ddsr/errors.hpp"
#include "ddsr/resample.hpp"
#include "ddsr/srcnn.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace ddsr;

namespace {

Tensor3 random_tensor(std::mt19937_64& rng, int c, int h, int w) {
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    Tensor3 t(c, h, w);
    for (double& v : t.data) v = d(rng);
    return t;
}

ConvLayer random_layer(std::mt19937_64& rng, int k, int in, int out, Activation act) {
    ConvLayer l(k, k, in, out, act);
    std::normal_distribution<double> d(0.0, 0.5);
    for (double& v : l.weights) v = d(rng);
    for (double& v : l.bias) v = d(rng);
    return l;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

// Smooth random field in [0, 1] built from a few sinusoids.
DepthMap smooth_field(std::mt19937_64& rng, int w, int h) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double fx = 0.05 + 0.2 * u(rng), fy = 0.05 + 0.2 * u(rng), ph = 6.0 * u(rng);
    std::vector<double> v(static_cast<std::size_t>(w) * h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            v[static_cast<std::size_t>(y * w + x)] = 0.5 + 0.25 * std::sin(fx * x + ph) + 0.2 * std::cos(fy * y);
    return DepthMap(w, h, std::move(v));
}

std::vector<TrainingPair> identity_pairs(std::mt19937_64& rng, int count, const TrainConfig& cfg) {
    std::vector<TrainingPair> out;
    while (static_cast<int>(out.size()) < count) {
        const auto m = smooth_field(rng, cfg.sub_image, cfg.sub_image);
        auto p = extract_subimages(m, m, cfg);
        out.insert(out.end(), p.begin(), p.end());
    }
    out.resize(static_cast<std::size_t>(count));
    return out;
}

}  // namespace

TEST_CASE("convolution matches direct evaluation") {
    std::mt19937_64 rng(17);
    for (int t = 0; t < 20; ++t) {
        const int k = 1 + 2 * static_cast<int>(rng() % 3);
        const int in = 1 + static_cast<int>(rng() % 3), out = 1 + static_cast<int>(rng() % 4);
        const auto act = t % 2 ? Activation::relu : Activation::linear;
        const auto layer = random_layer(rng, k, in, out, act);
        const auto x = random_tensor(rng, in, 6 + static_cast<int>(rng() % 6), 6 + static_cast<int>(rng() % 6));

        const auto valid = conv_forward(x, layer, Padding::valid);
        const auto ref = oracle::conv_valid(x, layer);
        CHECK(valid.height == ref.height);
        CHECK(valid.width == ref.width);
        CHECK(max_abs_diff(valid.data, ref.data) <= 1e-12);

        const auto same = conv_forward(x, layer, Padding::replicate_same);
        const auto ref_same = oracle::conv_replicate(x, layer);
        CHECK(same.height == x.height);
        CHECK(same.width == x.width);
        CHECK(max_abs_diff(same.data, ref_same.data) <= 1e-12);
    }
    const ConvLayer l(3, 3, 2, 1, Activation::linear);
    CHECK_THROWS_AS(conv_forward(Tensor3(1, 5, 5), l, Padding::valid), DimensionError);
}

TEST_CASE("valid interior agrees with replicate-padded output") {
    std::mt19937_64 rng(23);
    UnitArchitecture arch{{5, 1, 3}, 6, 4};
    auto unit = UnitWeights::random(arch, 5, 0.3);
    for (auto& l : unit.layers)
        for (double& b : l.bias) b = 0.05;
    const auto m = testutil::random_map(rng, 15, 14, 0.0, 1.0);
    const auto same = unit_forward(m, unit);
    const Tensor3 in(1, m.height(), m.width(), std::vector<double>(m.values().begin(), m.values().end()));
    const auto valid = chain_forward_valid(in, std::span<const UnitWeights>(&unit, 1));
    const int margin = arch.margin();
    REQUIRE(valid.width == m.width() - 2 * margin);
    for (int y = 0; y < valid.height; ++y)
        for (int x = 0; x < valid.width; ++x)
            CHECK(std::abs(valid.at(0, y, x) - same.at(x + margin, y + margin)) <= 1e-12);
}

TEST_CASE("loss and gradients") {
    SUBCASE("exact targets give zero loss and zero gradients") {
        const UnitArchitecture arch{{3, 1, 3}, 2, 2};
        const auto unit = UnitWeights::pass_through(arch);
        std::mt19937_64 rng(1);
        TrainConfig cfg;
        cfg.architecture = arch;
        cfg.sub_image = 9;
        const auto m = testutil::random_map(rng, 9, 9, 0.0, 1.0);
        const auto pairs = extract_subimages(m, m, cfg);
        const auto lg = loss_and_gradients(pairs, unit);
        CHECK(lg.loss == 0.0);
        for (const auto& l : lg.gradients[0].layers) {
            for (double g : l.weights) CHECK(g == 0.0);
            for (double g : l.bias) CHECK(g == 0.0);
        }
    }
    SUBCASE("one-pixel linear path differentiated by hand") {
        const UnitArchitecture arch{{1, 1, 1}, 1, 1};
        UnitWeights unit = UnitWeights::zeros(arch);
        for (auto& l : unit.layers) l.weights[0] = 1.0;
        TrainingPair p{1, 1, {1.0}, {0.0}};
        const auto lg = loss_and_gradients(std::span<const TrainingPair>(&p, 1), unit);
        CHECK(lg.loss == 1.0);
        CHECK(lg.gradients[0].layers[2].weights[0] == 2.0);
        CHECK(lg.gradients[0].layers[2].bias[0] == 2.0);
        CHECK(lg.gradients[0].layers[0].weights[0] == 2.0);
    }
    SUBCASE("backprop matches central finite differences") {
        std::mt19937_64 rng(2718);
        for (int t = 0; t < 20; ++t) {
            const auto r = gradcheck::run_tiny_unit(rng);
            CHECK(r.checked > 0);
            CHECK(r.worst_relative <= gradcheck::kRelativeTolerance);
        }
    }
    SUBCASE("chained units match finite differences") {
        std::mt19937_64 rng(99);
        const auto r = gradcheck::run_tiny_chain(rng);
        CHECK(r.worst_relative <= gradcheck::kRelativeTolerance);
    }
    SUBCASE("gradient accumulation does not depend on threads") {
        std::mt19937_64 rng(5);
        const UnitArchitecture arch{{3, 1, 3}, 4, 3};
        const auto unit = UnitWeights::random(arch, 3, 0.4);
        TrainConfig cfg;
        cfg.architecture = arch;
        cfg.sub_image = 9;
        cfg.stride = 3;
        const auto m = testutil::random_map(rng, 21, 21, 0.0, 1.0);
        const auto pairs = extract_subimages(m, testutil::random_map(rng, 21, 21, 0.0, 1.0), cfg);
        const auto a = loss_and_gradients(pairs, unit, 1);
        const auto b = loss_and_gradients(pairs, unit, 4);
        CHECK(a.loss == b.loss);
        CHECK(a.gradients == b.gradients);
    }
    CHECK_THROWS_AS(loss_and_gradients(std::vector<TrainingPair>{}, UnitWeights::zeros()), DimensionError);
}

TEST_CASE("sub-image extraction") {
    std::mt19937_64 rng(12);
    const auto hr = testutil::random_map(rng, 64, 50, 0.0, 1.0);
    const auto in = testutil::random_map(rng, 64, 50, 0.0, 1.0);
    TrainConfig cfg;
    const auto pairs = extract_subimages(hr, in, cfg);
    CHECK(pairs.size() == 3 * 2);
    const auto& p = pairs[4];  // second row, second column
    CHECK(p.input_size == 33);
    CHECK(p.target_size == 21);
    CHECK(p.input[0] == in.at(14, 14));
    CHECK(p.target[0] == hr.at(20, 20));
    CHECK(p.target[21 * 21 - 1] == hr.at(40, 40));
    CHECK_THROWS_AS(extract_subimages(DepthMap(20, 20, 0.0), DepthMap(20, 20, 0.0), cfg), DimensionError);
    CHECK_THROWS_AS(extract_subimages(hr, DepthMap(10, 10, 0.0), cfg), DimensionError);
}

TEST_CASE("training") {
    std::mt19937_64 rng(8);
    TrainConfig cfg;
    cfg.epochs = 50;
    const auto data = identity_pairs(rng, 16, cfg);

    SUBCASE("identity pairs are learned") {
        TrainReport rep;
        const auto unit = train_unit(data, cfg, 42, &rep);
        CHECK(rep.epoch_loss.size() == 50);
        CHECK(rep.final_loss < 0.5 * rep.initial_loss);
        const auto again = train_unit(data, cfg, 42);
        CHECK(unit == again);
    }
    SUBCASE("zero learning rate leaves the weights alone") {
        TrainConfig frozen = cfg;
        frozen.learning_rate = 0.0;
        frozen.epochs = 2;
        CHECK(train_unit(data, frozen, 7) == UnitWeights::random(cfg.architecture, 7, cfg.init_stddev));
        frozen.optimizer = Optimizer::sgd;
        CHECK(train_unit(data, frozen, 7) == UnitWeights::random(cfg.architecture, 7, cfg.init_stddev));
    }
    SUBCASE("thread count does not change the result") {
        TrainConfig small = cfg;
        small.epochs = 2;
        small.threads = 1;
        const auto a = train_unit(data, small, 3);
        small.threads = 3;
        CHECK(train_unit(data, small, 3) == a);
    }
    SUBCASE("configuration errors") {
        CHECK_THROWS_AS(train_unit(std::vector<TrainingPair>{}, cfg, 1), ConfigError);
        TrainConfig bad = cfg;
        bad.learning_rate = -1e-3;
        CHECK_THROWS_AS(train_unit(data, bad, 1), ConfigError);
        bad = cfg;
        bad.epochs = 0;
        CHECK_THROWS_AS(train_unit(data, bad, 1), ConfigError);
        bad = cfg;
        bad.sub_image = 12;
        CHECK_THROWS_AS(bad.validate(), ConfigError);
    }
}

TEST_CASE("progressive composition") {
    SUBCASE("pass-through units reproduce bicubic exactly") {
        std::mt19937_64 rng(4);
        const auto lr = testutil::random_map(rng, 10, 9, 0.0, 8.0);
        for (double norm : {1.0, 8.0}) {
            NetworkWeights net{{UnitWeights::pass_through(), UnitWeights::pass_through()}, norm};
            std::vector<DepthMap> stages;
            const auto out = progressive_forward(lr, ScaleFactor(2), net, &stages);
            const auto bic = resize_bicubic(lr, 20, 18);
            CHECK(out == bic);
            REQUIRE(stages.size() == 3);
            CHECK(stages[0] == bic);
        }
        const auto c = progressive_forward(DepthMap(8, 8, 0.4), ScaleFactor(4),
                                           NetworkWeights{{UnitWeights::pass_through()}, 1.0});
        for (double v : c.values()) CHECK(v == 0.4);
        CHECK_THROWS_AS(progressive_forward(DepthMap(8, 8, 0.4), ScaleFactor(2), NetworkWeights{}), DimensionError);
    }
    SUBCASE("a constant corpus trains to near identity") {
        std::vector<DepthMap> corpus;
        for (double v : {2.0, 3.0, 4.0, 5.0}) corpus.emplace_back(40, 40, v);
        TrainConfig cfg;
        cfg.epochs = 200;
        cfg.stride = 7;
        ProgressiveReport rep;
        const auto net = train_progressive(corpus, ScaleFactor(2), 1, cfg, DegradeMethod::decimate, &rep);
        CHECK(net.units.size() == 1);
        CHECK(net.depth_norm == 5.0);
        CHECK(rep.units.size() == 1);
        const DepthMap held(40, 40, 3.5);
        const auto lr = degrade(held, ScaleFactor(2)).lr;
        CHECK(oracle::rmse(progressive_forward(lr, ScaleFactor(2), net), held) < 0.05);
    }
    CHECK_THROWS_AS(train_progressive(std::vector<DepthMap>{}, ScaleFactor(2), 2, TrainConfig{}), ConfigError);
}

TEST_CASE("pass-through construction") {
    std::mt19937_64 rng(70);
    const auto unit = UnitWeights::pass_through();
    unit.validate();
    const auto m = testutil::random_map(rng, 16, 16, -3.0, 3.0);
    CHECK(unit_forward(m, unit) == m);
    CHECK_THROWS_AS(UnitWeights::pass_through(UnitArchitecture{{9, 1, 5}, 1, 32}), DimensionError);
    CHECK_THROWS_AS(unit_forward(DepthMap(12, 12, 0.0), unit), DimensionError);
}

TEST_CASE("weights file") {
    testutil::TempDir dir;
    const auto path = dir.path() / "w.ddsr";
    NetworkWeights net{{UnitWeights::random({}, 1, 0.1), UnitWeights::random({{3, 1, 3}, 4, 2}, 2, 0.1)}, 3.25};
    net.units[0].layers[1].bias[5] = -0.125;
    save_weights(net, path);
    CHECK(load_weights(path) == net);

    SUBCASE("header layout") {
        std::ifstream f(path, std::ios::binary);
        char magic[4];
        std::uint32_t version = 0, units = 0;
        double norm = 0;
        f.read(magic, 4);
        f.read(reinterpret_cast<char*>(&version), 4);
        f.read(reinterpret_cast<char*>(&units), 4);
        f.read(reinterpret_cast<char*>(&norm), 8);
        CHECK(std::string(magic, 4) == "DDSR");
        CHECK(version == 1);
        CHECK(units == 2);
        CHECK(norm == 3.25);
    }
    SUBCASE("corrupt files") {
        const auto size = std::filesystem::file_size(path);
        std::filesystem::resize_file(path, size - 3);
        CHECK_THROWS_AS(load_weights(path), FormatError);

        save_weights(net, path);
        {
            std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
            f.write("XXXX", 4);
        }
        CHECK_THROWS_AS(load_weights(path), FormatError);

        save_weights(net, path);
        {
            std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
            f.seekp(4);
            const std::uint32_t v = 2;
            f.write(reinterpret_cast<const char*>(&v), 4);
        }
        CHECK_THROWS_AS(load_weights(path), FormatError);
        CHECK_THROWS_AS(load_weights(dir.path() / "absent"), IoError);
    }
}
