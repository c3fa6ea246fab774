#include <gtest/gtest.h>

#include <cstdlib>
#include <random>
#include <sys/wait.h>

#include "grrail/gmm.hpp"
#include "grrail/phantom.hpp"
#include "grrail/pipeline.hpp"
#include "grrail/tables.hpp"
#include "scratch_dir.hpp"

using namespace grrail;
namespace fs = std::filesystem;

namespace {

struct RunResult {
    int status = -1;
    std::string out, err;
};

RunResult run_cli(const std::string& args, const ScratchDir& dir) {
    const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
    const std::string cmd = std::string(GRRAIL_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
    const int raw = std::system(cmd.c_str());
    RunResult r;
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.out = detail::read_file(out);
    r.err = detail::read_file(err);
    return r;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

PhantomSpec three_regions(std::uint64_t seed, double separation_sd) {
    PhantomSpec s;
    s.dims = {24, 24, 24};
    s.semi_axes = {10, 10, 10};
    s.cls = PhantomClass::heterogeneous;
    s.seed = seed;
    s.regions = {{50.0, 4.0, 0.0}, {50.0 + separation_sd * 4.0, 4.0, 0.0}, {50.0 + 2 * separation_sd * 4.0, 4.0, 0.0}};
    return s;
}

}  // namespace

TEST(Phantom, ConstantRegionIsConstant) {
    PhantomSpec s;
    s.dims = {20, 20, 20};
    s.semi_axes = {8, 7, 6};
    s.regions = {{75.0, 0.0, 0.0}};
    s.background = -3.0;
    const auto ph = generate_phantom(s);
    EXPECT_EQ(ph.label, 0);
    for (std::size_t i = 0; i < ph.volume.values.size(); ++i) EXPECT_EQ(ph.volume.values[i], ph.mask.flags[i] ? 75.0 : -3.0);
    EXPECT_GT(ph.mask.count(), 1000u);
}

TEST(Phantom, SeedReproducibility) {
    auto s = cohort_member_spec(5, 3, PhantomClass::heterogeneous, {{24, 24, 24}, 2.0});
    const auto a = generate_phantom(s), b = generate_phantom(s);
    EXPECT_EQ(a.volume.values, b.volume.values);
    EXPECT_EQ(a.region, b.region);
    s.seed += 1;
    EXPECT_NE(generate_phantom(s).volume.values, a.volume.values);
}

TEST(Phantom, CohortSpecsAreValid) {
    for (std::size_t i = 0; i < 50; ++i) {
        const auto cls = i % 2 ? PhantomClass::heterogeneous : PhantomClass::homogeneous;
        const auto s = cohort_member_spec(11, i, cls);
        EXPECT_NO_THROW(s.validate());
        EXPECT_EQ(s.cls, cls);
        if (cls == PhantomClass::homogeneous) EXPECT_EQ(s.regions.size(), 1u);
        else EXPECT_GE(s.regions.size(), 3u);
    }
}

TEST(Phantom, ThreeWellSeparatedRegionsAreRecovered) {
    int hits = 0;
    for (std::uint64_t trial = 0; trial < 100; ++trial) {
        const auto ph = generate_phantom(three_regions(trial, 5.0));
        const auto voxels = ph.mask.voxels();
        std::vector<double> values;
        for (auto v : voxels) values.push_back(ph.volume.values[v]);
        hits += cluster_values(ph.volume.dims, voxels, values, 5, trial).selected_components == 3;
    }
    EXPECT_GE(hits, 90);
}

TEST(Phantom, InvalidSpecsAreRejected) {
    auto bad = three_regions(1, 5.0);
    bad.regions.pop_back();
    EXPECT_THROW(generate_phantom(bad), Error);  // heterogeneous needs k >= 3
    bad = three_regions(1, 2.0);
    EXPECT_THROW(generate_phantom(bad), Error);  // means too close
    bad = three_regions(1, 5.0);
    bad.cls = PhantomClass::homogeneous;
    EXPECT_THROW(generate_phantom(bad), Error);
    bad = three_regions(1, 5.0);
    bad.semi_axes = {1.5, 5, 5};
    try {
        generate_phantom(bad);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), "semi-axes too small");
    }
}

TEST(Manifest, RoundTripAndRelativePaths) {
    ScratchDir dir("manifest");
    std::vector<ManifestEntry> entries{{"a", dir / "v/a.hdr", dir / "m/a.hdr", 0, false},
                                       {"b", dir / "v/b.hdr", dir / "m/b.hdr", 1, true}};
    write_manifest(dir / "manifest.csv", entries);
    const std::string text = detail::read_file(dir / "manifest.csv");
    EXPECT_EQ(text, "subject_id,volume,mask,label,split\na,v/a.hdr,m/a.hdr,0,train\nb,v/b.hdr,m/b.hdr,1,test\n");
    const auto back = read_manifest(dir / "manifest.csv");
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[1].volume, dir / "v/b.hdr");
    EXPECT_TRUE(back[1].test);
    EXPECT_EQ(back[1].label, 1);
}

TEST(Manifest, MalformedInputsAreRejected) {
    ScratchDir dir("manifest_bad");
    const std::vector<std::string> bad{
        "subject,volume,mask,label,split\na,v,m,0,train\n",
        "subject_id,volume,mask,label,split\na,v,m,2,train\n",
        "subject_id,volume,mask,label,split\na,v,m,0,validation\n",
        "subject_id,volume,mask,label,split\na,v,m,0,train\na,v,m,1,train\n",
        "subject_id,volume,mask,label,split\na,v,m,0\n",
        "subject_id,volume,mask,label,split\n",
    };
    for (const auto& text : bad) {
        detail::write_file(dir / "m.csv", text);
        try {
            read_manifest(dir / "m.csv");
            ADD_FAILURE() << text;
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), "malformed manifest") << text;
        }
    }
}

TEST(FeatureTableIo, RoundTripIsExact) {
    ScratchDir dir("table");
    FeatureTable t;
    t.features = {"x", "y"};
    t.ids = {"s1", "s2"};
    t.values = {{0.1, -1e-300}, {1.0 / 3.0, 12345.678}};
    write_feature_table(dir / "t.csv", t);
    const auto back = read_feature_table(dir / "t.csv");
    EXPECT_EQ(back.features, t.features);
    EXPECT_EQ(back.ids, t.ids);
    EXPECT_EQ(back.values, t.values);
}

TEST(Config, KeyValueParsing) {
    ScratchDir dir("config");
    detail::write_file(dir / "c.cfg", "# comment\nbins = 8\n\nseed=42\n");
    const auto kv = read_config(dir / "c.cfg");
    ASSERT_EQ(kv.size(), 2u);
    EXPECT_EQ(kv[0], (std::pair<std::string, std::string>{"bins", "8"}));
    EXPECT_EQ(kv[1], (std::pair<std::string, std::string>{"seed", "42"}));
}

TEST(CohortPlan, ClassesAndSplits) {
    CohortPlan plan;
    plan.n = 80;
    plan.seed = 3;
    const auto m = plan_cohort(plan);
    std::size_t test[2] = {0, 0}, count[2] = {0, 0};
    for (const auto& e : m) {
        ++count[e.label];
        test[e.label] += e.test;
    }
    EXPECT_EQ(count[0], 40u);
    EXPECT_EQ(count[1], 40u);
    EXPECT_EQ(test[0], 10u);
    EXPECT_EQ(test[1], 10u);
    EXPECT_EQ(m.front().id, "sub-000");
}

class Cli : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = new ScratchDir("cli");
        const auto r = run_cli("phantom-cohort --n 6 --size 16 --seed 4 --out " + q(*dir_ / "cohort"), *dir_);
        ASSERT_EQ(r.status, 0) << r.err;
    }
    static void TearDownTestSuite() {
        delete dir_;
        dir_ = nullptr;
    }
    static ScratchDir* dir_;
};

ScratchDir* Cli::dir_ = nullptr;

TEST_F(Cli, CohortHasManifestAndVolumes) {
    const auto m = read_manifest(*dir_ / "cohort/manifest.csv");
    ASSERT_EQ(m.size(), 6u);
    for (const auto& e : m) {
        EXPECT_TRUE(fs::exists(e.volume));
        EXPECT_TRUE(fs::exists(e.mask));
    }
    EXPECT_TRUE(fs::exists(*dir_ / "cohort/cohort.json"));
}

TEST_F(Cli, DescriptorTableShapeAndThreadIndependence) {
    const auto manifest = q(*dir_ / "cohort/manifest.csv");
    auto r = run_cli("descriptor --manifest " + manifest + " --out " + q(*dir_ / "g1.csv") + " --seed 9 --threads 1", *dir_);
    ASSERT_EQ(r.status, 0) << r.err;
    r = run_cli("descriptor --manifest " + manifest + " --out " + q(*dir_ / "g2.csv") + " --run-manifest " +
                    q(*dir_ / "g2.run.json") + " --seed 9 --threads 3",
                *dir_);
    ASSERT_EQ(r.status, 0) << r.err;
    const auto t = read_feature_table(*dir_ / "g1.csv");
    EXPECT_EQ(t.features.size(), 195u);
    EXPECT_EQ(t.ids.size(), 6u);
    EXPECT_EQ(detail::read_file(*dir_ / "g1.csv"), detail::read_file(*dir_ / "g2.csv"));
    EXPECT_EQ(detail::read_file(*dir_ / "g1.run.json"), detail::read_file(*dir_ / "g2.run.json"));
}

TEST_F(Cli, ConfigFileAndOverrides) {
    detail::write_file(*dir_ / "run.cfg", "kind=radiomics\nbins=8\nseed=5\n");
    const auto manifest = q(*dir_ / "cohort/manifest.csv");
    auto r = run_cli("descriptor --config " + q(*dir_ / "run.cfg") + " --manifest " + manifest + " --out " +
                         q(*dir_ / "r.csv") + " --bins 12",
                     *dir_);
    ASSERT_EQ(r.status, 0) << r.err;
    const auto j = nlohmann::json::parse(detail::read_file(*dir_ / "r.run.json"));
    EXPECT_EQ(j["kind"], "radiomics");
    EXPECT_EQ(j["config"]["bins"], 12);
    EXPECT_EQ(j["config"]["seed"], 5);
    EXPECT_EQ(read_feature_table(*dir_ / "r.csv").features.size(), 65u);
}

TEST_F(Cli, ErrorsAreJsonWithStatus) {
    auto r = run_cli("descriptor --manifest " + q(*dir_ / "missing.csv") + " --out " + q(*dir_ / "x.csv"), *dir_);
    EXPECT_EQ(r.status, 1);
    auto j = nlohmann::json::parse(r.err);
    EXPECT_TRUE(j.contains("error"));
    EXPECT_TRUE(j.contains("message"));

    detail::write_file(*dir_ / "bad.cfg", "no_such_option=1\n");
    r = run_cli("descriptor --config " + q(*dir_ / "bad.cfg") + " --manifest a --out b", *dir_);
    EXPECT_EQ(r.status, 2);
    j = nlohmann::json::parse(r.err);
    EXPECT_EQ(j["error"], "unknown config key");

    r = run_cli("descriptor --manifest a", *dir_);
    EXPECT_EQ(r.status, 2);
    EXPECT_EQ(nlohmann::json::parse(r.err)["error"], "usage error");
}

TEST_F(Cli, StatsZTest) {
    const auto r = run_cli("stats --acc1 0.7826086956521739 --n1 46 --acc2 0.5869565217391304 --n2 46", *dir_);
    ASSERT_EQ(r.status, 0) << r.err;
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_NEAR(j["z"].get<double>(), 2.019, 0.005);
}

TEST_F(Cli, ExtractClusterGraphPlotChain) {
    const auto m = read_manifest(*dir_ / "cohort/manifest.csv");
    const auto maps = *dir_ / "maps";
    auto r = run_cli("extract --volume " + q(m.back().volume) + " --mask " + q(m.back().mask) + " --bins 8 --out " + q(maps), *dir_);
    ASSERT_EQ(r.status, 0) << r.err;
    EXPECT_TRUE(fs::exists(maps / "contrast.hdr"));
    r = run_cli("cluster --map " + q(maps / "contrast.hdr") + " --mask " + q(maps / "mask.hdr") + " --seed 3 --out " +
                    q(*dir_ / "clusters"),
                *dir_);
    ASSERT_EQ(r.status, 0) << r.err;
    r = run_cli("graph --map " + q(maps / "contrast.hdr") + " --labels " + q(*dir_ / "clusters/labels.hdr") + " --out " +
                    q(*dir_ / "graph.json"),
                *dir_);
    ASSERT_EQ(r.status, 0) << r.err;
    const auto g = nlohmann::json::parse(detail::read_file(*dir_ / "graph.json"));
    EXPECT_EQ(g["metrics"].size(), 15u);
    r = run_cli("plot --graph " + q(*dir_ / "graph.json") + " --out " + q(*dir_ / "graph.ppm"), *dir_);
    ASSERT_EQ(r.status, 0) << r.err;
    EXPECT_EQ(detail::read_file(*dir_ / "graph.ppm").substr(0, 2), "P6");
}

TEST(CliSmoke, ClassifyProducesReport) {
    ScratchDir dir("cli_classify");
    auto r = run_cli("phantom-cohort --n 40 --size 16 --seed 8 --out " + q(dir / "cohort"), dir);
    ASSERT_EQ(r.status, 0) << r.err;
    r = run_cli("descriptor --kind intensity --manifest " + q(dir / "cohort/manifest.csv") + " --out " + q(dir / "f.csv"), dir);
    ASSERT_EQ(r.status, 0) << r.err;
    r = run_cli("classify --features " + q(dir / "f.csv") + " --manifest " + q(dir / "cohort/manifest.csv") +
                    " --trees 50 --target-k 5 --repeats 3 --out " + q(dir / "report"),
                dir);
    ASSERT_EQ(r.status, 0) << r.err;
    const auto j = nlohmann::json::parse(detail::read_file(dir / "report/report.json"));
    ASSERT_TRUE(j.contains("auc"));
    EXPECT_GE(j["auc"].get<double>(), 0.0);
    EXPECT_LE(j["auc"].get<double>(), 1.0);
    const auto rows = detail::read_csv(dir / "report/report.csv");
    ASSERT_EQ(rows.size(), 41u);
    EXPECT_EQ(rows[0], (std::vector<std::string>{"subject_id", "label", "test", "fold", "probability", "predicted"}));
}
