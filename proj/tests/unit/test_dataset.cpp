#include <doctest.h>

#include <fstream>

#include "helpers.hpp"
#include "labelshift/dataset.hpp"
#include "labelshift/error.hpp"

using namespace labelshift;

namespace {

std::filesystem::path write_file(const std::filesystem::path& dir, const std::string& name,
                                 const std::string& text) {
  const auto path = dir / name;
  std::ofstream(path) << text;
  return path;
}

std::string error_of(const std::filesystem::path& path, const std::string& column = "label") {
  try {
    load_csv(path, column, false);
  } catch (const ValidationError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_SUITE("dataset") {
  TEST_CASE("labels are re-encoded in ascending order") {
    const auto dir = testutil::scratch("dataset-encode");
    const auto path = write_file(dir, "a.csv", "x,label\n0.5,9\n1.5,5\n");
    const auto loaded = load_csv(path, "label", false);
    CHECK(loaded.data.num_classes == 2);
    CHECK(loaded.data.labels == std::vector<int>{1, 0});
    CHECK(loaded.data.class_values == std::vector<std::int64_t>{5, 9});
    CHECK(loaded.data.feature_names == std::vector<std::string>{"x"});
    CHECK(loaded.data.class_name(1) == "9");
    CHECK_FALSE(loaded.standardizer.has_value());
  }

  TEST_CASE("label column may sit anywhere and cells may be quoted or padded") {
    const auto dir = testutil::scratch("dataset-layout");
    const auto path = write_file(dir, "a.csv", "\"y\", a ,b\n3, 1.0, 2.0\n\n-1,3.0,4e0\n");
    const auto d = load_csv(path, "y", false).data;
    CHECK(d.labels == std::vector<int>{1, 0});
    CHECK(d.feature_names == std::vector<std::string>{"a", "b"});
    CHECK(d.features(1, 1) == 4.0);
  }

  TEST_CASE("standardization maps constant columns to zero") {
    const auto dir = testutil::scratch("dataset-std");
    const auto path = write_file(dir, "a.csv", "x,c,label\n1,7,0\n2,7,1\n3,7,0\n");
    const auto loaded = load_csv(path, "label", true);
    REQUIRE(loaded.standardizer.has_value());
    const auto& x = loaded.data.features;
    for (std::size_t i = 0; i < 3; ++i) CHECK(x(i, 1) == 0.0);
    CHECK(x(0, 0) + x(1, 0) + x(2, 0) == doctest::Approx(0.0));
    const double var = (x(0, 0) * x(0, 0) + x(1, 0) * x(1, 0) + x(2, 0) * x(2, 0)) / 3.0;
    CHECK(var == doctest::Approx(1.0));
    CHECK(loaded.standardizer->mean[0] == doctest::Approx(2.0));
    CHECK(loaded.standardizer->scale[1] == doctest::Approx(1e-6));

    // Saved statistics carry over to new data.
    const Matrix y = loaded.standardizer->apply(Matrix{{2.0, 8.0}});
    CHECK(y(0, 0) == doctest::Approx(0.0));
    CHECK(y(0, 1) == doctest::Approx(1e6));
    CHECK_THROWS_AS(loaded.standardizer->apply(Matrix{{1.0}}), ValidationError);
  }

  TEST_CASE("malformed files") {
    const auto dir = testutil::scratch("dataset-errors");
    CHECK(error_of(write_file(dir, "header.csv", "x,label\n")).find("no data rows") != std::string::npos);
    CHECK(error_of(write_file(dir, "empty.csv", "")).find("empty") != std::string::npos);
    CHECK(error_of(dir / "missing.csv").find("missing.csv") != std::string::npos);
    CHECK(error_of(write_file(dir, "single.csv", "x,label\n1,4\n2,4\n")).find("single class") != std::string::npos);

    const std::string bad_cell = error_of(write_file(dir, "cell.csv", "x,label\n1,0\nabc,1\n"));
    CHECK(bad_cell.find(":3: column 1") != std::string::npos);
    CHECK(bad_cell.find("'abc'") != std::string::npos);

    const std::string bad_label = error_of(write_file(dir, "lab.csv", "x,label\n1,0\n2,1.5\n"));
    CHECK(bad_label.find(":3: column 2") != std::string::npos);

    CHECK(error_of(write_file(dir, "ragged.csv", "x,label\n1,0\n2\n")).find(":3: expected 2 cells") !=
          std::string::npos);
    CHECK(error_of(write_file(dir, "nan.csv", "x,label\n1,0\nnan,1\n")).find("column 1") != std::string::npos);
    CHECK(error_of(write_file(dir, "nolabel.csv", "x,y\n1,0\n2,1\n")).find("label column") != std::string::npos);
    CHECK(error_of(write_file(dir, "nofeat.csv", "label\n1\n0\n")).find("no feature") != std::string::npos);
  }

  TEST_CASE("write then read round-trips exactly") {
    const auto dir = testutil::scratch("dataset-roundtrip");
    const Matrix x{{0.1, -2.5e-7}, {1.0 / 3.0, 12345.678}, {-0.0, 1e300}};
    const std::vector<std::int64_t> labels{7, -2, 7};
    write_csv(dir / "a.csv", x, {"u", "v"}, &labels, "cls");
    const auto d = load_csv(dir / "a.csv", "cls", false).data;
    CHECK(d.features.data()[1] == x.data()[1]);
    for (std::size_t i = 0; i < x.data().size(); ++i) CHECK(d.features.data()[i] == x.data()[i]);
    CHECK(d.labels == std::vector<int>{1, 0, 1});
    CHECK(d.class_values == std::vector<std::int64_t>{-2, 7});

    write_csv(dir / "b.csv", x, {"u", "v"}, nullptr, "cls");
    const auto t = load_feature_csv(dir / "b.csv", "cls");
    CHECK(t.names == std::vector<std::string>{"u", "v"});
    CHECK(t.features.rows() == 3);
    const auto dropped = load_feature_csv(dir / "a.csv", "cls");
    CHECK(dropped.features.cols() == 2);
  }

  TEST_CASE("validate and subset") {
    Dataset d;
    d.features = Matrix{{0.0}, {1.0}, {2.0}};
    d.labels = {0, 1, 1};
    d.num_classes = 2;
    CHECK_NOTHROW(d.validate());
    CHECK(d.class_counts() == std::vector<std::size_t>{1, 2});
    const std::vector<std::size_t> idx{2, 0};
    const Dataset s = d.subset(idx);
    CHECK(s.labels == std::vector<int>{1, 0});
    CHECK(s.features(0, 0) == 2.0);
    CHECK(s.class_name(1) == "#1");

    Dataset bad = d;
    bad.labels[0] = 2;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = d;
    bad.features(1, 0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = d;
    bad.labels.pop_back();
    CHECK_THROWS_AS(bad.validate(), ValidationError);
  }
}
