#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <unistd.h>

#include "ditto/dataset.hpp"
#include "ditto/io.hpp"

using namespace ditto;

namespace {

PdeConfig small_burgers() {
    PdeConfig cfg;
    cfg.kind = PdeKind::burgers;
    cfg.viscosity = 0.01;
    cfg.t_final = 0.5;
    cfg.n_steps = 5;
    cfg.grid = {32};
    return cfg;
}

std::filesystem::path temp_dir(const char* tag) {
    auto p = std::filesystem::temp_directory_path() /
             (std::string("ditto_test_") + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(p);
    return p;
}

}  // namespace

TEST_CASE("assemble_pairs: counts and construction identity") {
    DatasetBundle b = generate_dataset(small_burgers(), 10, 42);
    const PairSet ps = assemble_pairs(b);
    CHECK(ps.size() == 10 * 5);  // M * T, t_0 excluded

    // Every pair's target is the stored snapshot at its timestamp.
    for (std::size_t i = 0; i < ps.size(); ++i) {
        const auto& it = ps.items[i];
        CHECK(ps.target(i) == b.trajectories[it.traj].snapshot(it.step));
        CHECK(ps.time(i) == b.trajectories[it.traj].times[it.step]);
    }

    // Lossless: pairs regroup into the original trajectories.
    std::vector<std::vector<bool>> seen(10, std::vector<bool>(6, false));
    for (const auto& it : ps.items) seen[it.traj][it.step] = true;
    for (std::size_t m = 0; m < 10; ++m)
        for (std::size_t n = 1; n <= 5; ++n) CHECK(seen[m][n]);
}

TEST_CASE("assemble_pairs: minimal M=1, T=1 case") {
    PdeConfig cfg = small_burgers();
    cfg.n_steps = 1;
    DatasetBundle b = generate_dataset(cfg, 1, 7);
    CHECK(assemble_pairs(b).size() == 1);
}

TEST_CASE("split_dataset: exact 80:10:10 partition, deterministic") {
    DatasetBundle b = generate_dataset(small_burgers(), 20, 3);
    split_dataset(b, {0.8, 0.1, 0.1}, 99);
    CHECK(b.indices_of(Split::train).size() == 16);
    CHECK(b.indices_of(Split::val).size() == 2);
    CHECK(b.indices_of(Split::test).size() == 2);

    auto tags = b.split;
    split_dataset(b, {0.8, 0.1, 0.1}, 99);
    CHECK(b.split == tags);  // same seed -> identical assignment

    split_dataset(b, {1.0, 0.0, 0.0}, 99);
    CHECK(b.indices_of(Split::train).size() == 20);

    CHECK_THROWS(split_dataset(b, {0.5, 0.4, 0.2}, 1));  // does not sum to 1
    DatasetBundle tiny = generate_dataset(small_burgers(), 2, 5);
    CHECK_THROWS(split_dataset(tiny, {0.8, 0.1, 0.1}, 1));  // fewer than buckets
}

TEST_CASE("generate_dataset: parallel workers match the serial run") {
    DatasetBundle a = generate_dataset(small_burgers(), 6, 11, 1);
    DatasetBundle b = generate_dataset(small_burgers(), 6, 11, 3);
    REQUIRE(a.size() == b.size());
    for (std::size_t m = 0; m < a.size(); ++m) {
        CHECK(a.seeds[m] == b.seeds[m]);
        for (std::size_t i = 0; i < a.trajectories[m].fields.size(); ++i)
            CHECK(a.trajectories[m].fields[i] == b.trajectories[m].fields[i]);
    }
}

TEST_CASE("inject_noise: gamma=0 is bit-identical, gamma>0 has the right std") {
    DatasetBundle b = generate_dataset(small_burgers(), 4, 13);
    split_dataset(b, {0.5, 0.25, 0.25}, 1);
    const double sigma_d = dataset_std(b, Split::train);
    CHECK(sigma_d > 0.0);

    const Tensor& f = b.trajectories[0].fields;
    SUBCASE("zero level") {
        NoiseConfig cfg{0.0, sigma_d, 123};
        const Tensor g = inject_noise(f, cfg);
        for (std::size_t i = 0; i < f.size(); ++i) CHECK(g[i] == f[i]);
    }
    SUBCASE("negative level rejected") {
        NoiseConfig cfg{-0.1, sigma_d, 123};
        CHECK_THROWS(inject_noise(f, cfg));
    }
    SUBCASE("empirical std of (out - in) is gamma sigma_d within 1%") {
        Tensor big({1000000});
        NoiseConfig cfg{0.5, 2.0, 77};
        const Tensor g = inject_noise(big, cfg);
        double ss = 0.0;
        for (std::size_t i = 0; i < big.size(); ++i) ss += g[i] * g[i];
        const double sd = std::sqrt(ss / static_cast<double>(big.size()));
        CHECK(sd == doctest::Approx(0.5 * 2.0).epsilon(0.01));
    }
    SUBCASE("independent-sum variance on white-noise input") {
        // Input is itself N(0, sigma^2); at gamma=1 the noisy output has
        // variance sigma^2 (1 + 1) by independence.
        const double sigma = 1.5;
        Tensor zero({400000});
        const Tensor white = inject_noise(zero, NoiseConfig{1.0, sigma, 101});
        const Tensor noisy = inject_noise(white, NoiseConfig{1.0, sigma, 202});
        double ss = 0.0;
        for (std::size_t i = 0; i < noisy.size(); ++i) ss += noisy[i] * noisy[i];
        const double var = ss / static_cast<double>(noisy.size());
        CHECK(var == doctest::Approx(2.0 * sigma * sigma).epsilon(0.01));
    }
}

TEST_CASE("inject_noise: commutes with dataset concatenation under per-stream seeds") {
    Tensor a({1000}), b({1000});
    for (std::size_t i = 0; i < 1000; ++i) {
        a[i] = 0.1 * static_cast<double>(i);
        b[i] = -0.2 * static_cast<double>(i);
    }
    NoiseConfig cfg{0.3, 1.0, 55};
    const Tensor na = inject_noise(a, cfg, /*stream=*/0);
    const Tensor nb = inject_noise(b, cfg, /*stream=*/1);

    // Concatenate then noise with the same per-stream seeds.
    Tensor cat({2000});
    for (std::size_t i = 0; i < 1000; ++i) { cat[i] = a[i]; cat[1000 + i] = b[i]; }
    const Tensor ncat_a = inject_noise(a, cfg, 0);
    const Tensor ncat_b = inject_noise(b, cfg, 1);
    for (std::size_t i = 0; i < 1000; ++i) {
        CHECK(ncat_a[i] == na[i]);
        CHECK(ncat_b[i] == nb[i]);
    }
}

TEST_CASE("dataset container: save/load round-trip with checksums") {
    const auto dir = temp_dir("container");
    DatasetBundle b = generate_dataset(small_burgers(), 5, 21);
    split_dataset(b, {0.6, 0.2, 0.2}, 2);
    save_dataset(b, dir);

    const DatasetBundle c = load_dataset(dir);
    REQUIRE(c.size() == b.size());
    CHECK(c.config.t_final == b.config.t_final);
    for (std::size_t m = 0; m < b.size(); ++m) {
        CHECK(c.split[m] == b.split[m]);
        CHECK(c.seeds[m] == b.seeds[m]);
        // Storage is f32; loading twice must be bit-stable.
        for (std::size_t i = 0; i < c.trajectories[m].fields.size(); ++i) {
            const float want = static_cast<float>(b.trajectories[m].fields[i]);
            CHECK(static_cast<float>(c.trajectories[m].fields[i]) == want);
        }
    }

    // Corrupt one payload byte: the checksum must catch it.
    auto bytes = read_bytes(dir / "traj_00000.f32");
    bytes[8] ^= std::byte{0x40};
    atomic_write(dir / "traj_00000.f32", bytes);
    CHECK_THROWS_WITH_AS(load_dataset(dir), doctest::Contains("checksum"),
                         std::runtime_error);
    std::filesystem::remove_all(dir);
}

TEST_CASE("regenerate_at_resolution: same ICs, finer snapshot grid") {
    PdeConfig cfg = small_burgers();
    cfg.n_steps = 4;
    DatasetBundle b = generate_dataset(cfg, 3, 9);
    const auto fine = regenerate_at_resolution(b, {0, 2}, 8);
    REQUIRE(fine.size() == 2);
    CHECK(fine[0].n_snapshots() == 9);
    // Snapshot 0 is the same initial condition.
    for (std::size_t i = 0; i < b.trajectories[0].field_size(); ++i)
        CHECK(fine[0].snapshot(0)[i] == doctest::Approx(b.trajectories[0].snapshot(0)[i]));
    // Every 2nd fine snapshot lands on a coarse time.
    for (std::size_t s = 0; s <= 4; ++s)
        CHECK(fine[0].times[2 * s] == doctest::Approx(b.trajectories[0].times[s]));
}
