#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "ditto/io.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const std::string kCli = DITTO_CLI_PATH;

struct CmdResult {
    int exit_code;
    std::string output;
};

CmdResult run(const std::string& args) {
    const fs::path tmp = fs::temp_directory_path() /
                         ("ditto_cli_out_" + std::to_string(::getpid()) + ".txt");
    const std::string cmd = kCli + " " + args + " > " + tmp.string() + " 2>&1";
    const int raw = std::system(cmd.c_str());
    CmdResult res;
    res.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    res.output = ditto::read_text(tmp);
    fs::remove(tmp);
    return res;
}

fs::path work_dir() {
    static const fs::path dir =
        fs::temp_directory_path() / ("ditto_cli_work_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    return dir;
}

bool same_bytes(const fs::path& a, const fs::path& b) {
    const auto ba = ditto::read_bytes(a);
    const auto bb = ditto::read_bytes(b);
    return ba == bb;
}

}  // namespace

TEST_CASE("cli: gen-data is byte-identical under a fixed seed") {
    const auto d1 = work_dir() / "data1";
    const auto d2 = work_dir() / "data2";
    const std::string flags =
        " --pde burgers --nu 0.01 --t-final 0.5 --steps 4 --grid 32 --count 4 --seed 7 --out ";
    CHECK(run("gen-data" + flags + d1.string()).exit_code == 0);
    CHECK(run("gen-data" + flags + d2.string()).exit_code == 0);
    CHECK(same_bytes(d1 / "manifest.json", d2 / "manifest.json"));
    CHECK(same_bytes(d1 / "traj_00000.f32", d2 / "traj_00000.f32"));
    CHECK(same_bytes(d1 / "traj_00003.f32", d2 / "traj_00003.f32"));
}

TEST_CASE("cli: unknown flags and bad configs exit nonzero with usage text") {
    const auto res = run("gen-data --frobnicate 3");
    CHECK(res.exit_code == 2);
    const auto res2 = run("definitely-not-a-subcommand");
    CHECK(res2.exit_code == 2);
}

TEST_CASE("cli: validate-config echoes defaults and aggregates range errors") {
    const auto cfg_dir = work_dir();
    SUBCASE("empty file: full default echo") {
        const auto p = cfg_dir / "empty.json";
        ditto::atomic_write(p, std::string(""));
        const auto res = run("validate-config --config " + p.string());
        CHECK(res.exit_code == 0);
        const json echo = json::parse(res.output);
        CHECK(echo.at("preset") == "burgers-nu0.01");
        CHECK(echo.contains("model"));
        CHECK(echo.contains("training"));
        CHECK(echo.at("training").at("alpha") == 0.1);
        CHECK(echo.at("pde").at("n_steps") == 50);
    }
    SUBCASE("alpha above 1 is a range error naming the constraint") {
        const auto p = cfg_dir / "alpha.json";
        ditto::atomic_write(p, std::string(R"({"training": {"alpha": 1.5}})"));
        const auto res = run("validate-config --config " + p.string());
        CHECK(res.exit_code == 2);
        CHECK(res.output.find("alpha") != std::string::npos);
        CHECK(res.output.find("0 < alpha <= 1") != std::string::npos);
    }
    SUBCASE("lf = 0 is a range error citing the bundling bounds") {
        const auto p = cfg_dir / "lf.json";
        ditto::atomic_write(p, std::string(R"({"training": {"strategy": "bundled", "lf": 0}})"));
        const auto res = run("validate-config --config " + p.string());
        CHECK(res.exit_code == 2);
        CHECK(res.output.find("1 <= lf <= nt") != std::string::npos);
    }
    SUBCASE("unknown keys are hard errors") {
        const auto p = cfg_dir / "unk.json";
        ditto::atomic_write(p, std::string(R"({"training": {"warmup": 5}})"));
        const auto res = run("validate-config --config " + p.string());
        CHECK(res.exit_code == 2);
        CHECK(res.output.find("unknown key 'warmup'") != std::string::npos);
    }
    SUBCASE("schema version mismatch is an explicit migration error") {
        const auto p = cfg_dir / "schema.json";
        ditto::atomic_write(p, std::string(R"({"schema_version": 99})"));
        const auto res = run("validate-config --config " + p.string());
        CHECK(res.exit_code == 2);
        CHECK(res.output.find("migrate") != std::string::npos);
    }
}

TEST_CASE("cli: micro train -> eval -> report round trip") {
    const auto dir = work_dir();
    const auto data = dir / "micro_data";
    CHECK(run("gen-data --pde burgers --nu 0.05 --t-final 0.5 --steps 4 --grid 16 "
              "--count 8 --seed 3 --out " +
              data.string())
              .exit_code == 0);

    const auto cfg = dir / "micro.json";
    ditto::atomic_write(cfg, std::string(R"({
      "pde": {"n_steps": 4, "grid": [16], "t_final": 0.5, "viscosity": 0.05},
      "model": {"grid": [16], "levels": 2, "base_channels": 4,
                 "channel_mults": [1, 2], "attention_levels": [1],
                 "res_blocks_per_level": 1, "d_emb": 8, "mlp_hidden": 16,
                 "norm_groups": 4, "time_scale": 100.0},
      "training": {"strategy": "subsampled", "alpha": 0.5, "epochs": 2,
                    "batch_size": 8, "seed": 5}
    })"));
    const auto train_out = dir / "micro_run";
    const auto tr = run("train --config " + cfg.string() + " --data " + data.string() +
                        " --out " + train_out.string());
    CHECK(tr.exit_code == 0);
    CHECK(fs::exists(train_out / "checkpoint.ckpt"));
    CHECK(fs::exists(train_out / "history.csv"));
    CHECK(fs::exists(train_out / "run.json"));
    {
        const json run_meta = json::parse(ditto::read_text(train_out / "run.json"));
        CHECK(run_meta.at("command") == "train");
        CHECK(run_meta.contains("config"));
        CHECK(run_meta.contains("wall_time_s"));
    }

    const auto eval_out = dir / "micro_eval";
    const auto ev = run("eval --checkpoint " + (train_out / "checkpoint.ckpt").string() +
                        " --data " + data.string() +
                        " --mode superres --fine-steps 8 --nt 2 --nt 4 --nt 8 --out " +
                        eval_out.string());
    CHECK(ev.exit_code == 0);
    const auto report = ditto::read_text(eval_out / "report.csv");
    CHECK(report.find("nt_test") != std::string::npos);
    // one row per requested resolution
    CHECK(std::count(report.begin(), report.end(), '\n') == 4);

    const auto rep_out = dir / "micro_report";
    const auto rp = run("report --in " + (eval_out / "report.csv").string() + " --out " +
                        rep_out.string() + " --plot");
    CHECK(rp.exit_code == 0);
    CHECK(fs::exists(rep_out / "errors_vs_nt_test.svg"));
}

TEST_CASE("cli: report --plot draws one curve per lf scenario") {
    const auto dir = work_dir();
    std::string csv = "scenario,variant,axis,axis_value,mean,std\n";
    for (const int lf : {1, 5, 20})
        for (int step = 0; step <= 3; ++step)
            csv += "ns/lf=" + std::to_string(lf) + ",ditto,step," + std::to_string(step) +
                   "," + std::to_string(0.01 * lf * step) + ",0\n";
    const auto in = dir / "sweep.csv";
    ditto::atomic_write(in, csv);
    const auto out = dir / "sweep_plots";
    CHECK(run("report --in " + in.string() + " --out " + out.string() + " --plot")
              .exit_code == 0);
    const std::string svg = ditto::read_text(out / "errors_vs_step.svg");
    CHECK(std::count(svg.begin(), svg.end(), '\n') > 10);
    std::size_t polylines = 0, pos = 0;
    while ((pos = svg.find("<polyline", pos)) != std::string::npos) {
        ++polylines;
        pos += 9;
    }
    CHECK(polylines == 3);
}

TEST_CASE("cli: DITTO_SEED overrides the data seed") {
    const auto dir = work_dir();
    const auto a = dir / "env_a";
    const auto b = dir / "env_b";
    const std::string flags =
        " --pde burgers --nu 0.05 --t-final 0.5 --steps 2 --grid 16 --count 4 --seed 1 --out ";
    ::setenv("DITTO_SEED", "4242", 1);
    CHECK(run("gen-data" + flags + a.string()).exit_code == 0);
    ::unsetenv("DITTO_SEED");
    CHECK(run("gen-data" + flags + b.string()).exit_code == 0);
    CHECK_FALSE(same_bytes(a / "traj_00000.f32", b / "traj_00000.f32"));
    const json meta = json::parse(ditto::read_text(a / "run.json"));
    CHECK(meta.at("seed") == 4242);
}
