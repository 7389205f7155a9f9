#include "hsdf/cli/cli.hpp"
#include "hsdf/geom/io.hpp"

#include "support.hpp"

#include <doctest.h>

#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

using namespace hsdf;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

int run(std::vector<std::string> args) { return cli::run(args); }

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Relative path -> contents of every regular file except run.json, whose
// config records the output path.
std::map<std::string, std::string> tree(const fs::path& root)
{
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file() && e.path().filename() != "run.json") {
            files[fs::relative(e.path(), root).generic_string()] = slurp(e.path());
        }
    }
    return files;
}

json run_config(const fs::path& dir)
{
    json cfg = io::read_json(dir / "run.json").at("config");
    cfg.erase("out");
    return cfg;
}

std::vector<std::string> small_dataset(const fs::path& out, const std::string& seed = "7")
{
    return {"synth-dataset", "--seed",         seed, "--n",          "6",   "--n-test",       "2",
            "--image-size",  "32",             "--grid", "16",        "--model-k-id", "3", "--model-shapes", "6",
            "--out",         out.string()};
}

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

} // namespace

TEST_CASE("usage errors exit with 1 and help with 0")
{
    test::TempDir tmp("cli_usage");
    const std::string out = (tmp / "o").string();
    CHECK(run({}) == 1);
    CHECK(run({"bogus"}) == 1);
    CHECK(run({"--help"}) == 0);
    CHECK(run({"synth-shape", "--help"}) == 0);
    CHECK(run({"synth-shape"}) == 1);
    CHECK(run({"synth-shape", "--seed", "abc", "--out", out}) == 1);
    CHECK(run({"synth-shape", "--grid", "1.5", "--out", out}) == 1);
    CHECK(run({"synth-shape", "--wat", "1", "--out", out}) == 1);
    CHECK(run({"synth-shape", "--config", (tmp / "missing.json").string(), "--out", out}) != 0);
    CHECK(run({"train", "--data", out, "--levels", "foo", "--out", out}) == 1);
    CHECK_FALSE(fs::exists(tmp / "o" / "run.json"));
}

TEST_CASE("runtime failures exit with 2")
{
    test::TempDir tmp("cli_runtime");
    const std::string cam = (tmp / "camera.json").string();
    write_text(cam, "{}");
    CHECK(run({"render", "--mesh", (tmp / "nope.obj").string(), "--camera", cam, "--out", (tmp / "r").string()}) == 2);
    CHECK(run({"eval", "--pred", (tmp / "a").string(), "--gt", (tmp / "b").string(), "--out", (tmp / "e").string()}) ==
          2);
}

TEST_CASE("synth-shape writes its outputs and a run record")
{
    test::TempDir tmp("cli_shape");
    REQUIRE(run({"synth-shape", "--seed", "3", "--grid", "16", "--out", (tmp / "a").string()}) == 0);
    for (const char* f : {"shape.json", "mesh.obj", "shape.sdf", "run.json"}) {
        CHECK(fs::exists(tmp / "a" / f));
    }
    const json rec = io::read_json(tmp / "a" / "run.json");
    CHECK(rec.at("command") == "synth-shape");
    CHECK(rec.at("seed") == 3);
    CHECK(rec.at("config").at("grid") == 16);
    for (const char* k : {"hsdf", "eigen", "cli11", "compiler"}) {
        CHECK(rec.at("versions").contains(k));
    }
    CHECK(fs::file_size(tmp / "a" / "shape.sdf") > 0);

    REQUIRE(run({"synth-shape", "--seed", "4", "--grid", "0", "--out", (tmp / "b").string()}) == 0);
    CHECK_FALSE(fs::exists(tmp / "b" / "shape.sdf"));
    CHECK(slurp(tmp / "a" / "shape.json") != slurp(tmp / "b" / "shape.json"));
}

TEST_CASE("config file sits between defaults and flags")
{
    test::TempDir tmp("cli_config");
    const fs::path cfg = tmp / "cfg.json";
    write_text(cfg, R"({"seed": 11, "grid": 8, "min_bumps": 1, "max_bumps": 2})");

    REQUIRE(run({"synth-shape", "--config", cfg.string(), "--out", (tmp / "a").string()}) == 0);
    json c = run_config(tmp / "a");
    CHECK(c.at("seed") == 11);
    CHECK(c.at("grid") == 8);
    CHECK(c.at("rings") == 40);

    REQUIRE(run({"synth-shape", "--config", cfg.string(), "--grid", "12", "--out", (tmp / "b").string()}) == 0);
    c = run_config(tmp / "b");
    CHECK(c.at("seed") == 11);
    CHECK(c.at("grid") == 12);

    write_text(tmp / "unknown.json", R"({"sead": 1})");
    CHECK(run({"synth-shape", "--config", (tmp / "unknown.json").string(), "--out", (tmp / "c").string()}) == 1);
    write_text(tmp / "typed.json", R"({"grid": "many"})");
    CHECK(run({"synth-shape", "--config", (tmp / "typed.json").string(), "--out", (tmp / "d").string()}) == 1);
    write_text(tmp / "broken.json", "{");
    CHECK(run({"synth-shape", "--config", (tmp / "broken.json").string(), "--out", (tmp / "e").string()}) != 0);
}

TEST_CASE("dashed and underscore flag spellings are equivalent")
{
    test::TempDir tmp("cli_spelling");
    REQUIRE(run({"synth-shape", "--seed", "5", "--grid", "0", "--min-bumps", "2", "--box-mm", "200", "--out",
                 (tmp / "a").string()}) == 0);
    REQUIRE(run({"synth-shape", "--seed", "5", "--grid", "0", "--min_bumps", "2", "--box_mm", "200", "--out",
                 (tmp / "b").string()}) == 0);
    CHECK(run_config(tmp / "a") == run_config(tmp / "b"));
    CHECK(tree(tmp / "a") == tree(tmp / "b"));
}

TEST_CASE("synth-dataset is reproducible under a fixed seed")
{
    test::TempDir tmp("cli_dataset");
    REQUIRE(run(small_dataset(tmp / "a")) == 0);
    REQUIRE(run(small_dataset(tmp / "b")) == 0);
    REQUIRE(run(small_dataset(tmp / "c", "8")) == 0);

    const auto a = tree(tmp / "a");
    CHECK(a.size() > 6 * 10);
    CHECK(a == tree(tmp / "b"));
    CHECK(a != tree(tmp / "c"));
    CHECK(run_config(tmp / "a") == run_config(tmp / "b"));
    CHECK(fs::exists(tmp / "a" / "model.json"));

    const json m = io::read_json(tmp / "a" / "manifest.json");
    int n_test = 0;
    for (const auto& s : m.at("samples")) {
        n_test += s.at("split") == "test";
    }
    CHECK(m.at("samples").size() == 6);
    CHECK(n_test == 2);

    CHECK(run({"synth-dataset", "--n", "2", "--n-test", "3", "--out", (tmp / "d").string()}) == 1);
}

TEST_CASE("eval of ground truth against itself is perfect")
{
    test::TempDir tmp("cli_eval");
    const fs::path ds = tmp / "ds";
    REQUIRE(run(small_dataset(ds)) == 0);
    REQUIRE(run({"eval", "--pred", ds.string(), "--gt", ds.string(), "--cd-samples", "2000", "--out",
                 (tmp / "e").string()}) == 0);
    const json r = io::read_json(tmp / "e" / "report.json");
    const std::string dump = r.dump();
    CAPTURE(dump);
    CHECK(r.at("success_rate").get<double>() == doctest::Approx(100.0));
    int buckets = 0;
    for (const auto& b : r.at("buckets")) {
        if (b.at("pairs").get<int>() == 0) {
            continue;
        }
        ++buckets;
        CHECK(b.at("cd").get<double>() < 1e-9);
        CHECK(b.at("mne").get<double>() < 1e-9);
        CHECK(b.at("cr").get<double>() == doctest::Approx(100.0));
    }
    CHECK(buckets > 0);
    CHECK(fs::exists(tmp / "e" / "report.txt"));
}

TEST_CASE("data commands run end to end on a small dataset")
{
    test::TempDir tmp("cli_data");
    const fs::path ds = tmp / "ds";
    REQUIRE(run(small_dataset(ds)) == 0);
    const fs::path s = ds / "pairs" / "s0002";

    REQUIRE(run({"render", "--mesh", (s / "mesh.obj").string(), "--camera", (s / "camera.json").string(), "--out",
                 (tmp / "render").string()}) == 0);
    for (const char* f : {"image.png", "mask.png", "depth.pfm", "front_normal.pfm", "back_normal.pfm"}) {
        CHECK(fs::exists(tmp / "render" / f));
    }
    // Same mesh and camera as the dataset renderer, so the mask must match.
    CHECK(slurp(tmp / "render" / "mask.png") == slurp(s / "mask.png"));

    REQUIRE(run({"blend", "--source", (s / "image.png").string(), "--target",
                 (ds / "pairs" / "s0004" / "image.png").string(), "--mask", (s / "mask.png").string(), "--out",
                 (tmp / "blend").string()}) == 0);
    CHECK(fs::exists(tmp / "blend" / "blended.png"));
    CHECK(io::read_json(tmp / "blend" / "blend.json").contains("max_residual"));

    REQUIRE(run({"fit", "--model", (ds / "model.json").string(), "--landmarks", (s / "landmarks.json").string(),
                 "--camera", (s / "camera.json").string(), "--out", (tmp / "fit").string()}) == 0);
    CHECK(fs::exists(tmp / "fit" / "params.json"));
    CHECK(fs::exists(tmp / "fit" / "mesh.obj"));

    REQUIRE(run({"make-pairs", "--dataset", ds.string(), "--grid", "16", "--out", (tmp / "mp").string()}) == 0);
    const json mp = io::read_json(tmp / "mp" / "manifest.json");
    CHECK(mp.at("samples").size() + mp.at("rejected").size() == 6);
    for (const auto& e : mp.at("samples")) {
        const fs::path dir = tmp / "mp" / "pairs" / e.at("id").get<std::string>();
        CHECK(fs::exists(dir / "image.png"));
        CHECK(fs::exists(dir / "mesh.obj"));
        CHECK(fs::exists(dir / "gt.sdf"));
    }
}

TEST_CASE("model commands run end to end and training is reproducible")
{
    test::TempDir tmp("cli_model");
    const fs::path ds = tmp / "ds";
    REQUIRE(run(small_dataset(ds)) == 0);
    const auto train = [&](const fs::path& out) {
        return run({"train", "--data", ds.string(), "--seed", "2", "--epochs", "2", "--batch-images", "2",
                    "--points-per-image", "64", "--pool-per-image", "256", "--lr", "0.01", "--out", out.string()});
    };
    REQUIRE(train(tmp / "w1") == 0);
    REQUIRE(train(tmp / "w2") == 0);
    for (const char* f : {"base.ckpt", "fine.ckpt", "normal.ckpt", "base_loss.csv"}) {
        CHECK(fs::exists(tmp / "w1" / f));
    }
    CHECK(tree(tmp / "w1") == tree(tmp / "w2"));

    REQUIRE(run({"train", "--data", ds.string(), "--levels", "base", "--epochs", "1", "--points-per-image", "64",
                 "--pool-per-image", "256", "--out", (tmp / "wb").string()}) == 0);
    CHECK(fs::exists(tmp / "wb" / "base.ckpt"));
    CHECK_FALSE(fs::exists(tmp / "wb" / "fine.ckpt"));
    // A base-only checkpoint cannot serve the full hierarchy.
    CHECK(run({"reconstruct", "--weights", (tmp / "wb").string(), "--data", ds.string(), "--grid", "16", "--out",
               (tmp / "bad").string()}) == 2);

    REQUIRE(run({"reconstruct", "--weights", (tmp / "w1").string(), "--data", ds.string(), "--grid", "16",
                 "--keep-field", "--out", (tmp / "rc").string()}) == 0);
    const json rc = io::read_json(tmp / "rc" / "manifest.json");
    REQUIRE(rc.at("samples").size() == 2);
    for (const auto& e : rc.at("samples")) {
        const fs::path dir = tmp / "rc" / e.at("id").get<std::string>();
        CHECK(e.at("split") == "test");
        CHECK(fs::exists(dir / "result.json"));
        CHECK(fs::exists(dir / "mesh.obj"));
    }

    REQUIRE(run({"eval", "--pred", (tmp / "rc").string(), "--gt", ds.string(), "--split", "test", "--method", "Tiny",
                 "--out", (tmp / "ev").string()}) == 0);
    REQUIRE(run({"eval", "--pred", ds.string(), "--gt", ds.string(), "--split", "test", "--method", "Truth", "--out",
                 (tmp / "ev0").string()}) == 0);
    const std::string reports = (tmp / "ev" / "report.json").string() + "," + (tmp / "ev0" / "report.json").string();
    REQUIRE(run({"report", "--reports", reports, "--out", (tmp / "rp").string()}) == 0);
    const std::string table = slurp(tmp / "rp" / "table.txt");
    CHECK(table.find("Tiny") != std::string::npos);
    CHECK(table.find("Truth") != std::string::npos);
    CHECK(table.find("Succ.") != std::string::npos);

    REQUIRE(run({"gradcheck", "--network", "base", "--size", "16", "--points", "6", "--out",
                 (tmp / "gc").string()}) == 0);
    const json gc = io::read_json(tmp / "gc" / "gradcheck.json");
    CHECK(gc.at("results").at("base").at("pass") == true);
}
