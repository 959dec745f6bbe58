#include "helpers.hpp"

#include "cpaem/csv.hpp"
#include "cpaem/datasets.hpp"
#include "cpaem/errors.hpp"
#include "cpaem/network_io.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace cpaem;
using namespace testnets;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("cpaem_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

bool bit_equal(const Mat& a, const Mat& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() &&
           std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

struct Run {
    int code;
    std::string out;
};

Run cli(const fs::path& dir, const std::string& args) {
    const std::string cmd = "cd '" + dir.string() + "' && '" CPAEM_CLI_PATH "' " + args + " > stdout.txt 2> stderr.txt";
    const int status = std::system(cmd.c_str());
    std::ifstream in(dir / "stdout.txt");
    std::stringstream ss;
    ss << in.rdbuf();
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

nlohmann::json read_json(const fs::path& p) {
    std::ifstream in(p);
    return nlohmann::json::parse(in);
}

}  // namespace

TEST_SUITE("io") {
    TEST_CASE("model JSON round-trips bit for bit") {
        const fs::path dir = scratch_dir("json");
        for (const char* spec : {"1-8-2 relu", "2-4-4-3 leaky_relu:0.2", "2-5-2 abs"}) {
            const auto net = random_net(spec, 31);
            const NoiseModel noise(m({{0.1 / 3.0, 1e-17}, {1e-17, std::nextafter(0.2, 1.0)}}).topLeftCorner(net.output_dim() > 1 ? 2 : 1, net.output_dim() > 1 ? 2 : 1),
                                   Mat::Identity(net.latent_dim(), net.latent_dim()) * (1.0 / 7.0));
            const std::optional<NoiseModel> nz = net.output_dim() == 2 ? std::optional<NoiseModel>(noise) : std::nullopt;
            const std::string path = (dir / "m.json").string();
            save_model(path, net, nz);
            const ModelDocument doc = load_model(path);
            REQUIRE(doc.net.depth() == net.depth());
            for (int l = 1; l <= net.depth(); ++l) {
                CHECK(bit_equal(doc.net.layer(l).weight, net.layer(l).weight));
                CHECK(bit_equal(doc.net.layer(l).bias, net.layer(l).bias));
                CHECK(doc.net.layer(l).activation.kind == net.layer(l).activation.kind);
                CHECK(doc.net.layer(l).activation.eta == net.layer(l).activation.eta);
            }
            CHECK(doc.noise.has_value() == nz.has_value());
            if (nz) CHECK(bit_equal(doc.noise->sigma_x().matrix(), nz->sigma_x().matrix()));
        }
    }

    TEST_CASE("malformed model documents are rejected") {
        CHECK_THROWS_AS(network_from_json(nlohmann::json::parse(R"({"latent_dim": 1})")), InputError);
        CHECK_THROWS_AS(network_from_json(nlohmann::json::parse(
                            R"({"latent_dim": 2, "layers": [{"weight": [[1.0]], "bias": [0.0], "activation": "identity"}]})")),
                        InputError);
        CHECK_THROWS_AS(network_from_json(nlohmann::json::parse(
                            R"({"latent_dim": 1, "layers": [{"weight": [[1.0],[2.0]], "bias": [0.0], "activation": "identity"}]})")),
                        InputError);
        CHECK_THROWS_AS(load_model("/nonexistent/model.json"), InputError);
    }

    TEST_CASE("CSV") {
        const fs::path dir = scratch_dir("csv");
        const std::string path = (dir / "d.csv").string();
        const std::vector<Vec> rows{v({0.1, -2.5e-300}), v({1.0 / 3.0, 123456789.125})};
        write_csv(path, rows, {"a", "b"});
        const auto back = read_csv(path, true);
        REQUIRE(back.size() == 2);
        for (std::size_t i = 0; i < 2; ++i) CHECK(bit_equal(back[i], rows[i]));
        std::ofstream(dir / "bad.csv") << "1,2\n3\n";
        CHECK_THROWS_AS(read_csv((dir / "bad.csv").string()), InputError);
        std::ofstream(dir / "nan.csv") << "1,abc\n";
        CHECK_THROWS_AS(read_csv((dir / "nan.csv").string()), InputError);
        CHECK(format_double(0.1) == "0.10000000000000001");
        CHECK(parse_vector("0.5, -1e-3,2").size() == 3);
        CHECK_THROWS_AS(parse_vector("0.5,,2"), InputError);
    }

    TEST_CASE("net specs and datasets") {
        const NetSpec a = parse_net_spec("1-4-4-2 leaky_relu:0.2");
        CHECK(a.dims == std::vector<int>{1, 4, 4, 2});
        CHECK(a.activation.kind == ActivationKind::LeakyRelu);
        CHECK(a.activation.eta == 0.2);
        const auto net = random_network(a, 7);
        CHECK(net.depth() == 3);
        CHECK(net.layer(3).activation.kind == ActivationKind::Identity);
        CHECK_THROWS_AS(parse_net_spec("1-x-2 relu"), InputError);
        CHECK_THROWS_AS(parse_net_spec("1 relu"), InputError);
        CHECK_THROWS_AS(parse_net_spec("1-4-2 relu:0.2"), InputError);
        CHECK_THROWS_AS(parse_net_spec("1-4-2 leaky_relu:1.5"), InputError);
        CHECK_THROWS_AS(parse_net_spec("1-4-2 tanh"), InputError);
        CHECK(bit_equal(random_network(a, 7).layer(1).weight, net.layer(1).weight));

        const auto circ = circle_dataset(100, 0.05, 3);
        CHECK(circ.size() == 100);
        for (const Vec& x : circ) CHECK(std::fabs(x.norm() - 1.0) < 0.2);
        CHECK_THROWS_AS(circle_dataset(0, 0.05, 3), InputError);
        const auto wave = wave_dataset(200, WaveParams{}, 1);
        for (const Vec& x : wave) {
            CHECK(std::fabs(x[0]) <= M_PI);
            CHECK(std::fabs(x[1] - std::sin(2 * x[0])) < 0.3);
        }

        const Mat w = m({{1.0, 0.5}, {-0.3, 0.8}});
        const auto lin = linear_net(w, v({0.0, 0.0}));
        const NoiseModel noise = NoiseModel::isotropic(2, 0.1, 2);
        const auto xs = model_dataset(100000, lin, noise, 9);
        Mat cov = Mat::Zero(2, 2);
        Vec mean = Vec::Zero(2);
        for (const Vec& x : xs) mean += x;
        mean /= static_cast<double>(xs.size());
        for (const Vec& x : xs) cov += (x - mean) * (x - mean).transpose();
        cov /= static_cast<double>(xs.size() - 1);
        const Mat expected = 0.1 * Mat::Identity(2, 2) + w * w.transpose();
        CHECK(((cov - expected).array().abs() / expected.array().abs().max(0.2)).maxCoeff() < 0.05);
    }
}

TEST_SUITE("cli") {
    TEST_CASE("gen-net is deterministic and writes a sidecar") {
        const fs::path dir = scratch_dir("cli_gen");
        CHECK(cli(dir, "gen-net --spec '1-8-2 relu' --seed 7 --out a.json").code == 0);
        CHECK(cli(dir, "gen-net --spec '1-8-2 relu' --seed 7 --out b.json").code == 0);
        std::ifstream a(dir / "a.json"), b(dir / "b.json");
        std::stringstream sa, sb;
        sa << a.rdbuf();
        sb << b.rdbuf();
        CHECK(sa.str() == sb.str());
        const auto side = read_json(dir / "a.json.run.json");
        CHECK(side["command"] == "gen-net");
        CHECK(side["seed"] == 7);
        CHECK(side["spec"] == "1-8-2 relu");
        CHECK(cli(dir, "gen-net --spec '1-4-4-2 leaky_relu:0.2' --out c.json").code == 0);
        CHECK(load_model((dir / "c.json").string()).net.depth() == 3);
        CHECK(cli(dir, "gen-net --spec '1-0-2 relu' --out d.json").code == 1);
    }

    TEST_CASE("exit codes") {
        const fs::path dir = scratch_dir("cli_exit");
        CHECK(cli(dir, "").code == 1);
        CHECK(cli(dir, "no-such-command").code == 1);
        CHECK(cli(dir, "partition --model missing.json").code == 1);
        CHECK(cli(dir, "gen-data --kind circle --n 0 --out d.csv").code == 1);
        CHECK(cli(dir, "gen-data --kind spiral --n 5 --out d.csv").code == 1);
        CHECK(cli(dir, "gen-net --spec '2-8-2 relu' --seed 1 --out m.json").code == 0);
        CHECK(cli(dir, "partition --model m.json --bounding-radius 100 --sidecar p.run.json --out p.json").code == 0);
        // region cap is a resource failure; a 2-64-64 net has far more than one region
        CHECK(cli(dir, "gen-net --spec '2-64-64-2 relu' --seed 1 --out big.json").code == 0);
        CHECK(cli(dir, "partition --model big.json --max-regions 5").code == 3);
        save_model((dir / "knot.json").string(), knot_net(), NoiseModel::isotropic(1, 0.1, 1));
        CHECK(cli(dir, "posterior --model knot.json --x 1e200").code == 2);
        CHECK(cli(dir, "--help").code == 0);
    }

    TEST_CASE("partition, marginal and posterior") {
        const fs::path dir = scratch_dir("cli_infer");
        save_model((dir / "knot.json").string(), knot_net(), NoiseModel::isotropic(1, 0.1, 1));
        CHECK(cli(dir, "partition --model knot.json --out part.json").code == 0);
        const auto part = read_json(dir / "part.json");
        REQUIRE(part.is_array());
        CHECK(part.size() == 2);
        CHECK(part[0].contains("code"));
        CHECK(part[0]["affine"].contains("A"));
        CHECK(part[0]["clipped"] == true);
        CHECK(fs::exists(dir / "part.json.run.json"));

        std::ofstream(dir / "x.csv") << "0.5\n1.5\n";
        CHECK(cli(dir, "marginal --model knot.json --data x.csv --out lp.csv").code == 0);
        const auto lp = read_csv((dir / "lp.csv").string(), true);
        REQUIRE(lp.size() == 2);
        CHECK(std::isfinite(lp[0][0]));
        CHECK(cli(dir, "marginal --model knot.json --grid -3,6,91 --out grid.csv").code == 0);
        const auto grid = read_csv((dir / "grid.csv").string(), true);
        CHECK(grid.size() == 91);
        double integral = 0.0;
        for (const Vec& r : grid) integral += std::exp(r[1]) * 0.1;
        CHECK(std::fabs(integral - 1.0) < 1e-3);
        CHECK(cli(dir, "marginal --model knot.json --out lp.csv").code == 1);

        const Run post = cli(dir, "posterior --model knot.json --x 1.0 --out post.json --grid-out pg.csv --grid-n 101");
        CHECK(post.code == 0);
        CHECK(post.out.find("weight") != std::string::npos);
        const auto pj = read_json(dir / "post.json");
        CHECK(pj["regions"].size() == 2);
        CHECK(std::fabs(pj["regions"][0]["weight"].get<double>() - 0.5) < 1e-10);
        CHECK(read_csv((dir / "pg.csv").string(), true).size() == 101);
        CHECK(cli(dir, "posterior --model knot.json --x 1.0,2.0").code == 1);
    }

    TEST_CASE("train-em and oracle-check") {
        const fs::path dir = scratch_dir("cli_train");
        CHECK(cli(dir, "gen-data --kind circle --n 30 --seed 3 --out circle.csv").code == 0);
        CHECK(read_csv((dir / "circle.csv").string()).size() == 30);
        CHECK(cli(dir, "gen-net --spec '1-4-2 relu' --seed 2 --out init.json").code == 0);
        CHECK(cli(dir, "train-em --model init.json --data circle.csv --out trained.json --trace nll.csv --iters 4 --tol 0").code == 0);
        const auto trace = read_csv((dir / "nll.csv").string(), true);
        REQUIRE(trace.size() == 5);
        CHECK(trace[0].size() == 4);
        for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i][1] <= trace[i - 1][1] + 1e-8);
        CHECK(load_model((dir / "trained.json").string()).noise.has_value());
        const auto side = read_json(dir / "trained.json.run.json");
        CHECK(side["iters"] == 4);
        CHECK(side["update"] == "sigma_x,biases,weights");
        CHECK(cli(dir, "train-em --model init.json --data circle.csv --out t2.json --update bogus").code == 1);

        const Run mc = cli(dir, "oracle-check --model trained.json --x 0.6,0.8 --what marginal --n 200000 --seed 7");
        CHECK(mc.code == 0);
        CHECK(mc.out.find("PASS") != std::string::npos);
        CHECK(cli(dir, "oracle-check --model trained.json --what mass --n 200000").code == 0);
        CHECK(cli(dir, "oracle-check --model trained.json --x 0.6,0.8 --what moments --n 200000").code == 0);
        CHECK(cli(dir, "oracle-check --model trained.json --x 0.6,0.8 --what bogus").code == 1);
        CHECK(fs::exists(dir / "cpaem-oracle-check.run.json"));
    }
}
