#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "homog/io.hpp"
#include "homog/sha1.hpp"

namespace fs = std::filesystem;
using homog::CorrectorField;
using homog::format_double;
using homog::IoError;
using homog::Sha1;
using homog::SpaceTimeField;

namespace {

// unique scratch directory, removed on scope exit
struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("homog-io-test-" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

CorrectorField sample_corrector() {
    CorrectorField chi;
    chi.dim = 2;
    chi.n_y = 5;
    chi.n_s = 3;
    chi.regime = homog::Regime::Critical;
    chi.comp.assign(2, std::vector<double>(static_cast<std::size_t>(5) * 5 * 3));
    std::mt19937 rng(99);
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    for (auto& c : chi.comp)
        for (double& v : c) v = dist(rng);
    chi.comp[0][7] = 0.1 + 0.2;  // a value with a non-terminating binary tail
    return chi;
}

SpaceTimeField sample_field() {
    SpaceTimeField u;
    u.dim = 1;
    u.n_x = 6;
    u.n_t = 4;
    u.lo = {0.25, 0.0};
    u.hi = {1.75, 1.0};
    u.T = 0.5;
    u.data.resize(24);
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (double& v : u.data) v = dist(rng);
    return u;
}

}  // namespace

TEST_CASE("sha1 matches the published test vectors") {
    CHECK(Sha1::hash("abc") == "a9993e364706816aba3e25717850c26c9cd0d89d");
    CHECK(Sha1::hash("") == "da39a3ee5e6b4b0d3255bfef95601890afd80709");
    CHECK(Sha1::hash("The quick brown fox jumps over the lazy dog") ==
          "2fd4e1c67a2d28fced849ee1bb76e7391b93eb12");
    const std::string million(1000000, 'a');
    CHECK(Sha1::hash(million) == "34aa973cd4c4daa4f61eeb2bdbad27316534016f");
}

TEST_CASE("incremental sha1 equals one-shot hashing") {
    const std::string msg =
        "abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq";  // 56 bytes
    CHECK(Sha1::hash(msg) == "84983e441c3bd26ebaae4aa1f95129e5e54670f1");
    Sha1 h;
    h.update(msg.substr(0, 13));
    h.update(msg.substr(13, 1));
    h.update(msg.substr(14));
    CHECK(h.hex_digest() == Sha1::hash(msg));
    h.reset();
    h.update(msg);
    CHECK(h.hex_digest() == Sha1::hash(msg));
}

TEST_CASE("format_double round-trips through parsing") {
    for (double v : {0.1, 1.0 / 3.0, 1.7320508075688772, -0.0, 4096.0, 2.2250738585072014e-308,
                     1.3e300, -7.25}) {
        const std::string s = format_double(v);
        const double back = std::strtod(s.c_str(), nullptr);
        CHECK(back == v);
    }
    CHECK(format_double(1.0) == "1");
    CHECK(format_double(0.5) == "0.5");
}

TEST_CASE("atomic_write creates parents and leaves no temp files") {
    TempDir tmp;
    const fs::path target = tmp.path / "a" / "b" / "out.bin";
    homog::atomic_write(target, "payload");
    CHECK(homog::read_file(target) == "payload");
    homog::atomic_write(target, "second");
    CHECK(homog::read_file(target) == "second");
    int entries = 0;
    for (const auto& e : fs::directory_iterator(target.parent_path())) {
        (void)e;
        ++entries;
    }
    CHECK(entries == 1);  // the .tmp staging file is gone
    CHECK_THROWS_AS(homog::read_file(tmp.path / "missing.bin"), IoError);
}

TEST_CASE("corrector containers round-trip bitwise") {
    TempDir tmp;
    const auto chi = sample_corrector();
    const fs::path p = tmp.path / "chi.bin";
    homog::write_corrector(p, chi);
    const auto back = homog::read_corrector(p);
    CHECK(back.dim == chi.dim);
    CHECK(back.n_y == chi.n_y);
    CHECK(back.n_s == chi.n_s);
    CHECK(back.regime == chi.regime);
    REQUIRE(back.comp.size() == chi.comp.size());
    for (std::size_t j = 0; j < chi.comp.size(); ++j) CHECK(back.comp[j] == chi.comp[j]);
    // byte-stable serialization
    CHECK(homog::serialize_corrector(back) == homog::serialize_corrector(chi));
}

TEST_CASE("field containers round-trip bitwise") {
    TempDir tmp;
    const auto u = sample_field();
    const fs::path p = tmp.path / "u.bin";
    homog::write_field(p, u);
    const auto back = homog::read_field(p);
    CHECK(back.dim == u.dim);
    CHECK(back.n_x == u.n_x);
    CHECK(back.n_t == u.n_t);
    CHECK(back.lo[0] == u.lo[0]);
    CHECK(back.hi[0] == u.hi[0]);
    CHECK(back.T == u.T);
    CHECK(back.data == u.data);
}

TEST_CASE("corrupt containers are rejected with a clear error") {
    TempDir tmp;
    const auto chi = sample_corrector();
    const std::string good = homog::serialize_corrector(chi);

    const fs::path p = tmp.path / "bad.bin";
    homog::atomic_write(p, std::string_view(good).substr(0, good.size() - 5));
    CHECK_THROWS_AS(homog::read_corrector(p), IoError);

    homog::atomic_write(p, good + "x");
    CHECK_THROWS_AS(homog::read_corrector(p), IoError);

    std::string wrong_magic = good;
    wrong_magic[0] = 'X';
    homog::atomic_write(p, wrong_magic);
    CHECK_THROWS_AS(homog::read_corrector(p), IoError);

    std::string bad_dim = good;
    bad_dim[8] = 9;  // dim field right after the magic
    homog::atomic_write(p, bad_dim);
    CHECK_THROWS_AS(homog::read_corrector(p), IoError);

    const auto u = sample_field();
    homog::atomic_write(p, homog::serialize_field(u));
    CHECK_THROWS_AS(homog::read_corrector(p), IoError);  // field magic, corrector reader
}

TEST_CASE("raw f64 arrays validate their byte length") {
    TempDir tmp;
    const fs::path p = tmp.path / "tab.bin";
    std::string bytes;
    const std::vector<double> vals{1.0, -2.5, 3.25};
    bytes.append(reinterpret_cast<const char*>(vals.data()), vals.size() * sizeof(double));
    homog::atomic_write(p, bytes);
    CHECK(homog::read_f64_array(p) == vals);

    homog::atomic_write(p, bytes + "abc");
    CHECK_THROWS_AS(homog::read_f64_array(p), IoError);
}

TEST_CASE("csv lines join cells with commas") {
    CHECK(homog::csv_line({"a", "b", "c"}) == "a,b,c\n");
    CHECK(homog::csv_line({"solo"}) == "solo\n");
    CHECK(homog::csv_line({}) == "\n");
}
