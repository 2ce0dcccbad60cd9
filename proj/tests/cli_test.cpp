#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

#include "reflect/cli.hpp"
#include "test_support.hpp"

using namespace reflect;
using reflect::testing::TempDir;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args, const fs::path& stdout_file = "/dev/null") {
    const std::string cmd = std::string(REFLECT_CLI_PATH) + " " + args + " > '" + stdout_file.string() + "' 2>/dev/null";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<nlohmann::json> read_jsonl(const fs::path& p) {
    std::vector<nlohmann::json> out;
    std::ifstream in(p);
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) out.push_back(nlohmann::json::parse(line));
    return out;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    std::vector<std::vector<std::string>> rows;
    std::ifstream in(p);
    for (std::string line; std::getline(in, line);) {
        std::vector<std::string> cols;
        std::stringstream ss(line);
        for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
        if (!line.empty() && line.back() == ',') cols.emplace_back();
        rows.push_back(cols);
    }
    return rows;
}

class CliTest : public ::testing::Test {
protected:
    TempDir dir{"cli"};
    std::mt19937_64 rng{101};

    fs::path write_random(const std::string& name, Shape s) {
        save_image(reflect::testing::random_8bit_image(s, rng), dir / name);
        return dir / name;
    }
};

} // namespace

TEST_F(CliTest, ZeroLambdaReEncodesTheInput) {
    const auto in = write_random("in.png", Shape{24, 20, 3});
    cli::SuppressArgs a;
    a.input = in;
    a.output = dir / "out.png";
    a.params.lambda = 0.0;
    ASSERT_EQ(cli::cmd_suppress(a), 0);
    EXPECT_EQ(read_file_bytes(a.output), encode_png(load_image(in)));
    ASSERT_EQ(run_cli("suppress " + q(in) + " " + q(dir / "out2.png") + " --lambda 0"), 0);
    EXPECT_EQ(read_file_bytes(dir / "out2.png"), read_file_bytes(a.output));
}

TEST_F(CliTest, SuppressIsDeterministic) {
    const auto in = write_random("in.png", Shape{16, 16, 3});
    const std::string flags = " --beta-max 1 --threads 2";
    ASSERT_EQ(run_cli("suppress " + q(in) + " " + q(dir / "a.png") + flags), 0);
    ASSERT_EQ(run_cli("suppress " + q(in) + " " + q(dir / "b.png") + flags), 0);
    EXPECT_EQ(read_file_bytes(dir / "a.png"), read_file_bytes(dir / "b.png"));
}

TEST_F(CliTest, TraceHasOneRecordPerBeta) {
    const auto in = write_random("in.png", Shape{16, 16, 1});
    ASSERT_EQ(run_cli("suppress " + q(in) + " " + q(dir / "o.png") + " --trace " + q(dir / "t.jsonl")), 0);
    const auto recs = read_jsonl(dir / "t.jsonl");
    const auto betas = beta_schedule(SolverParams{});
    ASSERT_EQ(recs.size(), betas.size());
    for (std::size_t n = 0; n < recs.size(); ++n) {
        EXPECT_EQ(recs[n]["iter"].get<std::size_t>(), n);
        EXPECT_DOUBLE_EQ(recs[n]["beta"].get<double>(), betas[n]);
        for (const char* key : {"objective", "aux_objective", "inner_iters", "ms"}) EXPECT_TRUE(recs[n].contains(key));
    }
    EXPECT_LE(recs.back()["beta"].get<double>(), 1e5);
}

TEST_F(CliTest, MaskHandling) {
    const auto in = write_random("in.png", Shape{12, 12, 1});
    save_image(ImageBuffer(Shape{6, 6, 1}, 1.0), dir / "small.png");
    // strict-required without a mask is a usage error.
    EXPECT_EQ(run_cli("suppress " + q(in) + " " + q(dir / "o.png") + " --mask-policy strict-required"), 1);
    // strict rejects a mismatched mask, nearest resamples it.
    EXPECT_EQ(run_cli("suppress " + q(in) + " " + q(dir / "o.png") + " --mask " + q(dir / "small.png")), 2);
    EXPECT_EQ(run_cli("suppress " + q(in) + " " + q(dir / "o.png") + " --beta-max 1 --mask-policy nearest --mask " +
                      q(dir / "small.png")),
              0);
}

TEST_F(CliTest, ZeroMaskLeavesTheImageAlmostUnchanged) {
    const auto in = write_random("in.png", Shape{16, 16, 1});
    save_image(ImageBuffer(Shape{16, 16, 1}, 0.0), dir / "black.png");
    cli::SuppressArgs a;
    a.input = in;
    a.output = dir / "out.png";
    a.mask = dir / "black.png";
    ASSERT_EQ(cli::cmd_suppress(a), 0);
    // phi = 0 keeps every gradient, so the start point is already optimal.
    EXPECT_EQ(read_file_bytes(a.output), encode_png(load_image(in)));
}

TEST_F(CliTest, ExitCodes) {
    const auto in = write_random("in.png", Shape{8, 8, 1});
    EXPECT_EQ(run_cli(""), 1);
    EXPECT_EQ(run_cli("frobnicate"), 1);
    EXPECT_EQ(run_cli("suppress " + q(in) + " " + q(dir / "o.png") + " --lambda -1"), 1);
    EXPECT_EQ(run_cli("suppress " + q(in) + " " + q(dir / "o.png") + " --kappa 0.5"), 1);
    EXPECT_EQ(run_cli("suppress " + q(dir / "missing.png") + " " + q(dir / "o.png")), 2);
    std::ofstream(dir / "junk.png") << "not an image";
    EXPECT_EQ(run_cli("suppress " + q(dir / "junk.png") + " " + q(dir / "o.png")), 2);
    EXPECT_EQ(run_cli("suppress " + q(in) + " " + q(dir / "o.png") + " --adam-step 1e300 --inner-tol 0"), 3);
    EXPECT_EQ(run_cli("--help"), 0);
}

TEST_F(CliTest, HelpListsDefaults) {
    ASSERT_EQ(run_cli("suppress --help", dir / "help.txt"), 0);
    const std::string help = slurp(dir / "help.txt");
    for (const char* s : {"--lambda", "0.002", "--gamma", "0.012", "--beta-max", "100000", "--kappa", "--adam-step",
                          "--inner-iters", "--inner-tol", "--mask-policy", "--trace", "--threads"}) {
        EXPECT_NE(help.find(s), std::string::npos) << s;
    }
}

TEST_F(CliTest, ConfigFileSitsBetweenDefaultsAndFlags) {
    const auto in = write_random("in.png", Shape{10, 10, 1});
    std::ofstream(dir / "cfg.ini") << "[suppress]\nbeta-min = 1\nbeta-max = 8\n";
    const std::string base = "--config " + q(dir / "cfg.ini") + " suppress " + q(in) + " " + q(dir / "o.png");
    ASSERT_EQ(run_cli(base + " --trace " + q(dir / "a.jsonl")), 0);
    const auto from_file = read_jsonl(dir / "a.jsonl");
    ASSERT_EQ(from_file.size(), 4u);
    EXPECT_EQ(from_file.front()["beta"].get<double>(), 1.0);
    EXPECT_EQ(from_file.back()["beta"].get<double>(), 8.0);

    ASSERT_EQ(run_cli(base + " --beta-max 2 --trace " + q(dir / "b.jsonl")), 0);
    EXPECT_EQ(read_jsonl(dir / "b.jsonl").size(), 2u);
}

TEST_F(CliTest, EvaluateIdenticalFiles) {
    const auto a = write_random("a.png", Shape{25, 25, 3});
    std::ostringstream out, err;
    ASSERT_EQ(cli::cmd_evaluate({a, a, 1.0}, out, err), 0);
    const auto j = nlohmann::json::parse(out.str());
    EXPECT_EQ(j["slmse"].get<double>(), 1.0);
    EXPECT_DOUBLE_EQ(j["ssim"].get<double>(), 1.0);
    EXPECT_EQ(j["psnr"], "perfect");
}

TEST_F(CliTest, EvaluateUniformOffset) {
    save_image(ImageBuffer(Shape{10, 10, 1}, 0.2), dir / "a.png");
    save_image(ImageBuffer(Shape{10, 10, 1}, 0.7), dir / "b.png");
    ASSERT_EQ(run_cli("evaluate " + q(dir / "a.png") + " " + q(dir / "b.png"), dir / "out.json"), 0);
    const auto j = nlohmann::json::parse(slurp(dir / "out.json"));
    // 8-bit quantization: 51/255 and 179/255 differ by 128/255.
    const double diff = 128.0 / 255.0;
    EXPECT_NEAR(j["psnr"].get<double>(), 10.0 * std::log10(1.0 / (diff * diff)), 1e-10);
    EXPECT_NEAR(j["psnr"].get<double>(), 6.0206, 0.05);
}

TEST_F(CliTest, EvaluateDimensionMismatch) {
    const auto a = write_random("a.png", Shape{10, 10, 1});
    const auto b = write_random("b.png", Shape{10, 11, 1});
    std::ostringstream out, err;
    EXPECT_EQ(cli::cmd_evaluate({a, b, 1.0}, out, err), 2);
    EXPECT_NE(err.str().find("evaluate"), std::string::npos);
}

TEST_F(CliTest, BatchOfIdenticalPairs) {
    const auto a = write_random("a.png", Shape{12, 12, 3});
    const auto b = write_random("b.png", Shape{12, 12, 3});
    std::ofstream(dir / "m.csv") << "# input,truth\na.png,a.png\nb.png,b.png\n";
    cli::BatchArgs args;
    args.manifest = dir / "m.csv";
    args.report = dir / "r.csv";
    args.no_solve = true;
    ASSERT_EQ(cli::cmd_batch(args), 0);
    const auto rows = read_csv(dir / "r.csv");
    ASSERT_EQ(rows.size(), 4u);
    EXPECT_EQ(rows[0], (std::vector<std::string>{"input", "truth", "slmse", "ssim", "psnr"}));
    EXPECT_EQ(rows[3][0], "mean");
    EXPECT_EQ(std::stod(rows[3][2]), 1.0);
    EXPECT_DOUBLE_EQ(std::stod(rows[3][3]), 1.0);
    EXPECT_EQ(rows[3][4], "inf");
}

TEST_F(CliTest, BatchEmptyManifestIsAnError) {
    std::ofstream(dir / "m.csv") << "# nothing here\n\n";
    cli::BatchArgs args;
    args.manifest = dir / "m.csv";
    args.report = dir / "r.csv";
    std::ostringstream err;
    EXPECT_EQ(cli::cmd_batch(args, err), 1);
}

TEST_F(CliTest, BatchMeansAreRowAverages) {
    std::ofstream m(dir / "m.csv");
    for (int k = 0; k < 3; ++k) {
        const auto t = make_piecewise_constant(Shape{24, 24, 3}, 200 + k);
        const auto y = compose_scene(t, make_blob_reflection(t.shape(), 200 + k), SyntheticSceneParams{});
        save_image(t, dir / ("t" + std::to_string(k) + ".png"));
        save_image(y, dir / ("y" + std::to_string(k) + ".png"));
        m << "y" << k << ".png,t" << k << ".png\n";
    }
    m.close();
    ASSERT_EQ(run_cli("batch " + q(dir / "m.csv") + " " + q(dir / "r.csv") + " --beta-max 1 --threads 3 --output-dir " +
                      q(dir / "out")),
              0);
    const auto rows = read_csv(dir / "r.csv");
    ASSERT_EQ(rows.size(), 5u);
    for (int k = 0; k < 3; ++k) {
        // Row order follows the manifest.
        EXPECT_EQ(fs::path(rows[1 + k][0]).filename(), "y" + std::to_string(k) + ".png");
        EXPECT_TRUE(fs::exists(dir / "out" / ("y" + std::to_string(k) + ".png")));
    }
    for (int col = 2; col <= 4; ++col) {
        double sum = 0.0;
        for (int k = 1; k <= 3; ++k) sum += std::stod(rows[k][col]);
        EXPECT_NEAR(std::stod(rows[4][col]), sum / 3.0, 1e-12);
    }
    // Per-row scores are those of the written images.
    const auto restored = load_image(dir / "out" / "y1.png");
    EXPECT_NEAR(std::stod(rows[2][4]), psnr(load_image(dir / "t1.png"), restored), 1e-12);
}

TEST_F(CliTest, ManifestParsing) {
    std::ofstream(dir / "m.csv") << "a.png, b.png\n  # comment\n/abs/x.png,y.png,mask.png\n";
    const auto rows = cli::read_manifest(dir / "m.csv");
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0].input, dir / "a.png");
    EXPECT_EQ(rows[0].truth, dir / "b.png");
    EXPECT_FALSE(rows[0].mask);
    EXPECT_EQ(rows[1].input, fs::path("/abs/x.png"));
    EXPECT_EQ(*rows[1].mask, dir / "mask.png");
    std::ofstream(dir / "bad.csv") << "only-one-column\n";
    EXPECT_THROW(cli::read_manifest(dir / "bad.csv"), ParameterError);
}

TEST_F(CliTest, SynthWritesTheComposedScene) {
    ASSERT_EQ(run_cli("synth --out-y " + q(dir / "y.png") + " --out-t " + q(dir / "t.png") +
                      " --height 32 --width 28 --channels 1 --seed 4"),
              0);
    const auto t = load_image(dir / "t.png");
    const auto y = load_image(dir / "y.png");
    ASSERT_EQ(t.shape(), (Shape{32, 28, 1}));
    SyntheticSceneParams p;
    p.seed = 4;
    const auto t_ref = make_piecewise_constant(t.shape(), 4);
    const auto y_ref = compose_scene(t_ref, make_blob_reflection(t.shape(), 4), p);
    for (std::size_t k = 0; k < y.size(); ++k) {
        EXPECT_EQ(y.values()[k], quantize8(y_ref.values()[k]) / 255.0);
        EXPECT_EQ(t.values()[k], quantize8(t_ref.values()[k]) / 255.0);
    }
}

TEST_F(CliTest, SynthEndpointsFromFiles) {
    const auto t = write_random("t.png", Shape{10, 10, 3});
    save_image(ImageBuffer(Shape{10, 10, 3}, 0.4), dir / "r.png");
    ASSERT_EQ(run_cli("synth --t " + q(t) + " --r " + q(dir / "r.png") + " --w 1 --out-y " + q(dir / "y.png") +
                      " --out-t " + q(dir / "t2.png")),
              0);
    EXPECT_EQ(load_image(dir / "y.png"), load_image(t));
    ASSERT_EQ(run_cli("synth --t " + q(t) + " --r " + q(dir / "r.png") + " --w 0 --out-y " + q(dir / "y0.png") +
                      " --out-t " + q(dir / "t3.png")),
              0);
    const auto y0 = load_image(dir / "y0.png");
    for (double v : y0.values()) EXPECT_EQ(v, 102.0 / 255.0);
    EXPECT_EQ(run_cli("synth --w 2 --out-y " + q(dir / "y.png") + " --out-t " + q(dir / "t.png")), 1);
}

TEST(Params, JsonRoundTripAndErrors) {
    SolverParams p;
    p.lambda = 0.01;
    p.inner_iters = 7;
    const auto back = params_from_json(params_to_json(p));
    EXPECT_EQ(back.lambda, 0.01);
    EXPECT_EQ(back.inner_iters, 7u);
    EXPECT_EQ(back.resolved_beta_min(), 0.02);
    EXPECT_THROW(params_from_json(nlohmann::json{{"lamda", 1.0}}), ParameterError);
    EXPECT_THROW(params_from_json(nlohmann::json{{"lambda", "big"}}), ParameterError);
    EXPECT_THROW(params_from_json(nlohmann::json{{"kappa", 0.5}}), ParameterError);
    EXPECT_THROW(params_from_json(nlohmann::json{{"inner_iters", 2.5}}), ParameterError);
    EXPECT_THROW(params_from_json(nlohmann::json::array()), ParameterError);
}

TEST(Threads, EnvironmentCap) {
    ::setenv("REFLECT_THREADS", "2", 1);
    EXPECT_EQ(resolve_threads(8), 2u);
    EXPECT_EQ(resolve_threads(1), 1u);
    EXPECT_LE(resolve_threads(0), 2u);
    ::unsetenv("REFLECT_THREADS");
    EXPECT_GE(resolve_threads(0), 1u);
}
