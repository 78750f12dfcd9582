#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>

#include "doctest.h"
#include "oracles/oracles.hpp"
#include "support.hpp"

#include "ivpseudo/dataset.hpp"
#include "ivpseudo/errors.hpp"
#include "ivpseudo/rng.hpp"

using namespace ivpseudo;

namespace {

std::filesystem::path temp_file(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "ivpseudo_unit";
    std::filesystem::create_directories(dir);
    return dir / name;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    f << text;
}

}  // namespace

TEST_CASE("load_csv maps named columns and keeps the rest as candidates in file order") {
    const auto path = temp_file("four_rows.csv");
    write_text(path, "d,y,z1,z2\n1,2,3,4\n5,6,7,8\n9,10,11,12\n13,14,15,16\n");
    const Dataset ds = load_csv(path.string(), "d", "y");
    CHECK(ds.n() == 4);
    CHECK(ds.p() == 2);
    CHECK_FALSE(ds.X.has_value());
    CHECK_FALSE(ds.centered);
    CHECK(ds.pseudo_mask == std::vector<bool>{false, false});
    CHECK(ds.z_names == std::vector<std::string>{"z1", "z2"});
    CHECK(ds.D(2) == 9.0);
    CHECK(ds.Y(3) == 14.0);
    CHECK(ds.Z(1, 1) == 8.0);
}

TEST_CASE("load_csv pulls covariates out of the candidate set") {
    const Dataset ds = parse_csv("z1,x,d,y,z2\n1,2,3,4,5\n6,7,8,9,10\n", "d", "y", {"x"});
    REQUIRE(ds.X.has_value());
    CHECK(ds.X->cols() == 1);
    CHECK((*ds.X)(1, 0) == 7.0);
    CHECK(ds.z_names == std::vector<std::string>{"z1", "z2"});
    CHECK(ds.Z(1, 1) == 10.0);
}

TEST_CASE("missing outcome column is a configuration error naming it") {
    try {
        parse_csv("d,z1\n1,2\n3,4\n", "d", "y");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("'y'") != std::string::npos);
    }
}

TEST_CASE("non-numeric cell reports its row and column") {
    try {
        parse_csv("d,y,z1\n1,2,3\n4,NA,6\n", "d", "y");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.row() == 3);
        CHECK(e.column() == 2);
        CHECK(std::string(e.what()).find("NA") != std::string::npos);
    }
}

TEST_CASE("ragged rows and single-row files are rejected") {
    CHECK_THROWS_AS(parse_csv("d,y,z1\n1,2\n3,4,5\n", "d", "y"), ParseError);
    CHECK_THROWS_AS(parse_csv("d,y,z1\n1,2,3\n", "d", "y"), DataError);
    CHECK_THROWS_AS(parse_csv("d,y,d\n1,2,3\n4,5,6\n", "d", "y"), ConfigError);
    CHECK_THROWS_AS(load_csv(temp_file("does_not_exist.csv").string(), "d", "y"), IoError);
}

TEST_CASE("scientific notation, quoting and surrounding blanks parse") {
    const Dataset ds = parse_csv("\"d\", y ,z\n1e-3, -2.5E2 ,\"3\"\n4,5,6\n", "d", "y");
    CHECK(ds.D(0) == doctest::Approx(1e-3));
    CHECK(ds.Y(0) == -250.0);
    CHECK(ds.Z(0, 0) == 3.0);
}

TEST_CASE("make_dataset validates shapes and finiteness") {
    Matrix Z = Matrix::Ones(3, 2);
    CHECK_THROWS_AS(make_dataset(Z, Vector::Ones(2), Vector::Ones(3)), DimensionError);
    Vector D = Vector::Ones(3);
    D(1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(make_dataset(Z, D, Vector::Ones(3)), DataError);
    CHECK_THROWS_AS(make_dataset(Matrix::Ones(1, 2), Vector::Ones(1), Vector::Ones(1)), DataError);
}

TEST_CASE("center subtracts means and is idempotent") {
    Matrix Z(2, 1);
    Z << 1, 3;
    Dataset ds = center(make_dataset(Z, Vector::Ones(2), Vector::Ones(2)));
    CHECK(ds.Z(0, 0) == -1.0);
    CHECK(ds.Z(1, 0) == 1.0);
    CHECK(ds.centered);

    Matrix C(3, 1);
    C << 5, 5, 5;
    const Dataset flat = center(make_dataset(C, Vector::LinSpaced(3, 0, 2), Vector::Ones(3)));
    CHECK(flat.Z.cwiseAbs().maxCoeff() == 0.0);

    const Dataset a = center(make_dataset(testsupport::gaussian(40, 5, 1) * 3.0 + Matrix::Constant(40, 5, 7.0),
                                          testsupport::gaussian_vec(40, 2), testsupport::gaussian_vec(40, 3),
                                          testsupport::gaussian(40, 2, 4)));
    const Dataset b = center(a);
    CHECK((a.Z - b.Z).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((a.D - b.D).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((*a.X - *b.X).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(a.Z.colwise().mean().cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("partial_out_covariates with orthogonal X leaves data unchanged") {
    const Index n = 8;
    Matrix X(n, 1);
    X << 1, -1, 1, -1, 1, -1, 1, -1;
    Matrix Z(n, 2);
    Z << 1, 2, 1, 2, 3, 0, 3, 0, -4, 1, -4, 1, 0, -3, 0, -3;
    const Vector D = Z.col(0) * 0.5;
    const Vector Y = Z.col(1) - Z.col(0);
    Dataset ds = center(make_dataset(Z, D, Y, X));
    const Dataset out = partial_out_covariates(ds);
    CHECK_FALSE(out.X.has_value());
    CHECK((out.Z - ds.Z).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((out.D - ds.D).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((out.Y - ds.Y).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("partial_out_covariates zeroes an exposure that is a combination of X") {
    const Matrix X = testsupport::centered(testsupport::gaussian(30, 3, 11));
    Vector c(3);
    c << 0.5, -2.0, 1.25;
    const Dataset ds = center(make_dataset(testsupport::gaussian(30, 4, 12), X * c, testsupport::gaussian_vec(30, 13), X));
    const Dataset out = partial_out_covariates(ds);
    CHECK(out.D.cwiseAbs().maxCoeff() <= 1e-10);
    const Matrix inner = ds.X->transpose() * out.Z;
    for (Index j = 0; j < out.Z.cols(); ++j)
        for (Index k = 0; k < X.cols(); ++k)
            CHECK(std::abs(inner(k, j)) <= 1e-8 * std::max(1.0, X.col(k).norm() * out.Z.col(j).norm()));
}

TEST_CASE("partial_out_covariates residuals match a normal-equations oracle") {
    Matrix X(6, 1);
    X << -2.5, -1.5, -0.5, 0.5, 1.5, 2.5;
    Vector D(6);
    D << 1.0, -3.0, 2.0, 0.5, 4.0, -4.5;  // sums to zero
    const Dataset ds = make_dataset(Matrix::Identity(6, 2) - Matrix::Constant(6, 2, 1.0 / 6.0), D, D, X);
    Dataset cds = ds;
    cds.centered = true;
    const Dataset out = partial_out_covariates(cds);
    const Vector b = oracle::oracle_ols(X, D);
    const Vector expected = D - X * b;
    CHECK((out.D - expected).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("rank-deficient covariates are a linear-algebra error") {
    Matrix X(5, 2);
    X.col(0) << 1, 2, 3, 4, 5;
    X.col(1) = 2.0 * X.col(0);
    const Dataset ds = center(make_dataset(testsupport::gaussian(5, 2, 3), Vector::LinSpaced(5, 0, 1),
                                           Vector::LinSpaced(5, 1, 0), X));
    CHECK_THROWS_AS(partial_out_covariates(ds), LinearAlgebraError);
}

TEST_CASE("CSV export and reload round-trips values") {
    Dataset ds = make_dataset(testsupport::gaussian(12, 3, 21) * 1e3, testsupport::gaussian_vec(12, 22) * 1e-7,
                              testsupport::gaussian_vec(12, 23), testsupport::gaussian(12, 1, 24));
    ds.Z(0, 0) = 1.0 / 3.0;
    ds.x_names = {"age"};
    const auto path = temp_file("roundtrip.csv");
    write_csv(ds, path.string(), "exposure", "outcome");
    const Dataset back = load_csv(path.string(), "exposure", "outcome", {"age"});
    auto rel = [](double a, double b) { return std::abs(a - b) <= 1e-15 * std::max(std::abs(a), std::abs(b)); };
    for (Index i = 0; i < ds.n(); ++i) {
        CHECK(rel(ds.D(i), back.D(i)));
        CHECK(rel(ds.Y(i), back.Y(i)));
        CHECK(rel((*ds.X)(i, 0), (*back.X)(i, 0)));
        for (Index j = 0; j < ds.p(); ++j) CHECK(rel(ds.Z(i, j), back.Z(i, j)));
    }
}

TEST_CASE("scale_columns gives unit variance and leaves constant columns alone") {
    Matrix Z = testsupport::gaussian(50, 3, 31) * 4.0;
    Z.col(2).setZero();
    const Dataset ds = scale_columns(center(make_dataset(Z, testsupport::gaussian_vec(50, 32), testsupport::gaussian_vec(50, 33))));
    CHECK(ds.Z.col(0).squaredNorm() / 50.0 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ds.Z.col(2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("RngStream sequences are keyed by seed and stream") {
    RngStream a(42, 7), b(42, 7), c(42, 8), d(43, 7);
    std::vector<std::uint64_t> va, vb, vc, vd;
    for (int i = 0; i < 16; ++i) {
        va.push_back(a.next_u64());
        vb.push_back(b.next_u64());
        vc.push_back(c.next_u64());
        vd.push_back(d.next_u64());
    }
    CHECK(va == vb);
    CHECK(va != vc);
    CHECK(va != vd);
    CHECK(RngStream(1, 2).derive(3).next_u64() == RngStream(1, 2).derive(3).next_u64());
    CHECK(RngStream(1, 2).derive(3).next_u64() != RngStream(1, 2).derive(4).next_u64());
}

TEST_CASE("RngStream draws have the expected ranges and moments") {
    RngStream r(5, 0);
    double sum = 0.0, sq = 0.0;
    const int m = 200000;
    for (int i = 0; i < m; ++i) {
        const double u = r.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        const double z = r.normal();
        sum += z;
        sq += z * z;
    }
    CHECK(std::abs(sum / m) < 0.01);
    CHECK(std::abs(sq / m - 1.0) < 0.02);
    for (int i = 0; i < 1000; ++i) REQUIRE(r.uniform_index(7) < 7);

    const auto perm = r.permutation(100);
    std::set<std::size_t> seen(perm.begin(), perm.end());
    CHECK(seen.size() == 100);
    CHECK(*seen.rbegin() == 99);
}

TEST_CASE("distinct streams are uncorrelated") {
    RngStream a(9, 0), b(9, 1);
    const int m = 100000;
    double cross = 0.0;
    for (int i = 0; i < m; ++i) cross += a.normal() * b.normal();
    CHECK(std::abs(cross / m) < 4.0 / std::sqrt(static_cast<double>(m)));
}
