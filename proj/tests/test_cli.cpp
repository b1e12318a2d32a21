#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

struct Result {
    int code = -1;
    std::string out;
};

Result run(const fs::path& dir, const std::string& args) {
    const fs::path out = dir / "stdout.txt";
    const std::string cmd = "cd '" + dir.string() + "' && '" AVGQ_CLI "' " + args + " > '" + out.string() +
                            "' 2> '" + (dir / "stderr.txt").string() + "'";
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(out);
    std::ostringstream os;
    os << in.rdbuf();
    r.out = os.str();
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

fs::path fresh(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("avgq-cli-" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

bool has_line(const std::string& out, const std::string& line) {
    return ("\n" + out).find("\n" + line + "\n") != std::string::npos;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("generate") {
    const auto dir = fresh("generate");
    auto r = run(dir, "generate --dense -d 20 -r 5 --seed 42");
    CHECK(r.code == 0);
    CHECK(has_line(r.out, "proper: true"));
    CHECK(fs::exists(dir / "dense-20x5-s42.mdp"));

    r = run(dir, "generate --sparse --zero-fraction 0.5 -d 20 -r 5 --seed 7");
    CHECK(r.code == 0);
    CHECK(fs::exists(dir / "sparse-20x5-s7.mdp"));

    CHECK(run(dir, "generate --sparse -d 20").code == 2);
    CHECK(run(dir, "generate -d").code == 2);
    CHECK(run(dir, "generate --dense --sparse --zero-fraction 0.1").code == 2);
    CHECK(run(dir, "").code == 2);
    fs::remove_all(dir);
}

TEST_CASE("solve rejects an improper instance") {
    const auto dir = fresh("improper");
    std::ofstream(dir / "trap.mdp") << "avgq-mdp 1\nstates 2\nactions 2\nref_state 0\ngenerator manual\n"
                                       "seed 0\nzero_fraction 0\ntransitions\n0 1\n0 1\n1 0\n0 1\n"
                                       "costs\n1 1\n1 1\nend\n";
    CHECK(run(dir, "solve trap.mdp").code == 3);
    fs::remove_all(dir);
}

TEST_CASE("solve") {
    const auto dir = fresh("solve");
    fs::copy_file(AVGQ_DATA "/cycle2.mdp", dir / "cycle2.mdp");
    auto r = run(dir, "solve cycle2.mdp");
    CHECK(r.code == 0);
    CHECK(has_line(r.out, "beta: 2"));
    CHECK(fs::exists(dir / "cycle2.solve.json"));

    std::ofstream(dir / "bad.mdp") << "avgq-mdp 1\nstates 2\nactions one\n";
    CHECK(run(dir, "solve bad.mdp").code == 2);
    CHECK(run(dir, "solve missing.mdp").code == 2);

    REQUIRE(run(dir, "generate").code == 0);
    r = run(dir, "solve");
    CHECK(r.code == 0);
    const auto first = slurp(dir / "dense-20x5-s42.solve.json");
    const auto again = run(dir, "solve");
    CHECK(again.out == r.out);
    CHECK(slurp(dir / "dense-20x5-s42.solve.json") == first);
    fs::remove_all(dir);
}

TEST_CASE("train, compare and output directory") {
    const auto dir = fresh("train");
    fs::copy_file(AVGQ_DATA "/cycle2.mdp", dir / "cycle2.mdp");
    auto r = run(dir, "train cycle2.mdp --algo ssp --steps 0");
    CHECK(r.code == 0);
    CHECK(has_line(r.out, "final_lambda: 0"));

    r = run(dir, "train cycle2.mdp --algo rvi --steps 20000 --seed 5 --out sub");
    CHECK(r.code == 0);
    CHECK(fs::exists(dir / "sub" / "cycle2.rvi.s5.trace.csv"));
    CHECK(fs::exists(dir / "sub" / "cycle2.solve.json"));

    r = run(dir, "compare cycle2.mdp --steps 100000");
    CHECK(r.code == 0);
    CHECK(fs::exists(dir / "cycle2.compare.s0.json"));
    CHECK(fs::exists(dir / "cycle2.compare.s0.csv"));
    CHECK(fs::exists(dir / "cycle2.compare.s0.ssp.trace.csv"));
    CHECK(fs::exists(dir / "cycle2.compare.s0.rvi.trace.csv"));

    CHECK(run(dir, "train cycle2.mdp --algo sarsa").code == 2);
    fs::remove_all(dir);
}

TEST_CASE("environment output directory and config file") {
    const auto dir = fresh("config");
    fs::copy_file(AVGQ_DATA "/cycle2.mdp", dir / "cycle2.mdp");
    std::ofstream(dir / "exp.json") << R"({"format": "avgq-experiment", "version": 1,
        "instance": "cycle2.mdp", "seed": 9, "steps": 3000, "algo": "rvi"})";
    auto r = run(dir, "--config exp.json train");
    CHECK(r.code == 0);
    CHECK(has_line(r.out, "seed: 9"));
    CHECK(has_line(r.out, "steps: 3000"));
    CHECK(has_line(r.out, "algorithm: rvi"));

    r = run(dir, "--config exp.json train --seed 4 --algo ssp");
    CHECK(has_line(r.out, "seed: 4"));
    CHECK(has_line(r.out, "algorithm: ssp"));

    const std::string cmd = "cd '" + dir.string() + "' && AVGQ_OUT_DIR=envout '" AVGQ_CLI "' solve cycle2.mdp > /dev/null";
    CHECK(std::system(cmd.c_str()) == 0);
    CHECK(fs::exists(dir / "envout" / "cycle2.solve.json"));

    std::ofstream(dir / "broken.json") << "{ not json";
    CHECK(run(dir, "--config broken.json solve cycle2.mdp").code == 2);
    fs::remove_all(dir);
}

TEST_CASE("validate-bounds on the cycle") {
    const auto dir = fresh("bounds");
    fs::copy_file(AVGQ_DATA "/cycle2.mdp", dir / "cycle2.mdp");
    const auto r = run(dir, "validate-bounds cycle2.mdp -R 200 --steps 100000 --jobs 2");
    CHECK(r.code == 0);
    CHECK(has_line(r.out, "assert exceedance_monotone_in_delta: pass"));
    CHECK(has_line(r.out, "assert median_error_non_increasing: pass"));
    CHECK(has_line(r.out, "assert lemma1_all_runs: pass"));
    CHECK(fs::exists(dir / "cycle2.envelope.s0.json"));
    CHECK(fs::exists(dir / "cycle2.envelope.s0.csv"));
    CHECK(run(dir, "validate-bounds cycle2.mdp -R 50").code == 2);
    fs::remove_all(dir);
}

}  // TEST_SUITE
