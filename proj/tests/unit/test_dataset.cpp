#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "coxmix/dataset.hpp"
#include "coxmix/error.hpp"
#include "oracles.hpp"

using namespace coxmix;

namespace {

SurvivalDataset column_dataset(std::vector<double> column) {
    std::vector<SurvivalRecord> recs;
    for (std::size_t i = 0; i < column.size(); ++i) {
        recs.push_back({{column[i]}, static_cast<double>(i + 1), 1, std::nullopt});
    }
    return SurvivalDataset(std::move(recs), {"x"});
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("load_csv reads a small file back") {
    oracle::TempDir dir;
    oracle::write_file(dir / "d.csv", "age,time,event\n0.5,1,1\n1.5,2,1\n2.5,3,0\n");
    const auto ds = load_csv(dir / "d.csv", {});
    REQUIRE(ds.size() == 3);
    CHECK(ds.dim() == 1);
    CHECK(ds.feature_names() == std::vector<std::string>{"age"});
    CHECK(ds.times() == std::vector<double>{1, 2, 3});
    CHECK(ds.events() == std::vector<int>{1, 1, 0});
    CHECK(ds[2].features[0] == 2.5);
    CHECK_FALSE(ds.has_groups());
}

TEST_CASE("load_csv names the offending row for a bad event value") {
    oracle::TempDir dir;
    oracle::write_file(dir / "d.csv",
                       "x,time,event\n1,1,1\n1,2,0\n1,3,1\n1,4,1\n1,5,2\n1,6,0\n");
    try {
        (void)load_csv(dir / "d.csv", {});
        FAIL("expected a DataError");
    } catch (const DataError& e) {
        CHECK(e.row() == 5);
        CHECK(std::string(e.what()).find("row 5") != std::string::npos);
    }
}

TEST_CASE("load_csv rejects non-numeric time and missing values") {
    oracle::TempDir dir;
    oracle::write_file(dir / "a.csv", "x,time,event\n1,abc,1\n");
    CHECK_THROWS_AS((void)load_csv(dir / "a.csv", {}), DataError);

    oracle::write_file(dir / "b.csv", "x,time,event\n1,1,1\nNA,2,0\n3,3,1\n");
    CHECK_THROWS_AS((void)load_csv(dir / "b.csv", {}), DataError);
    CsvSchema drop;
    drop.drop_missing = true;
    const auto ds = load_csv(dir / "b.csv", drop);
    CHECK(ds.size() == 2);
    CHECK(ds.times() == std::vector<double>{1, 3});
}

TEST_CASE("load_csv handles custom columns, groups and dropped columns") {
    oracle::TempDir dir;
    oracle::write_file(dir / "d.csv", "id,T,E,sex,a\n7,1.5,1,F,2\n8,2.5,0,M,3\n");
    CsvSchema s;
    s.time_col = "T";
    s.event_col = "E";
    s.group_col = "sex";
    s.drop_columns = {"id"};
    const auto ds = load_csv(dir / "d.csv", s);
    CHECK(ds.feature_names() == std::vector<std::string>{"a"});
    REQUIRE(ds.has_groups());
    CHECK(*ds[0].group == "F");
    CHECK(*ds[1].group == "M");

    s.drop_columns = {"nope"};
    CHECK_THROWS_AS((void)load_csv(dir / "d.csv", s), DataError);
}

TEST_CASE("write_csv then load_csv round-trips exactly") {
    oracle::TempDir dir;
    std::vector<SurvivalRecord> recs{{{0.1, 1.0 / 3.0}, 0.7, 1, std::string("A")},
                                     {{-2.5e-7, 4.0}, 1.25, 0, std::string("B")}};
    const SurvivalDataset ds(recs, {"u", "v"});
    write_csv(ds, dir / "o.csv");
    CsvSchema s;
    s.group_col = "group";
    const auto back = load_csv(dir / "o.csv", s);
    REQUIRE(back.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(back[i].features == ds[i].features);
        CHECK(back[i].time == ds[i].time);
        CHECK(back[i].event == ds[i].event);
        CHECK(back[i].group == ds[i].group);
    }
}

TEST_CASE("standardize uses the N-1 standard deviation") {
    const auto res = standardize(column_dataset({1.0, 3.0}));
    CHECK(res.stats.mean[0] == doctest::Approx(2.0));
    CHECK(res.stats.scale[0] == doctest::Approx(std::sqrt(2.0)));
    // [1, 3] has sample sd sqrt(2); standardized values are -1/sqrt2, 1/sqrt2.
    CHECK(res.dataset[0].features[0] == doctest::Approx(-1.0 / std::sqrt(2.0)));

    // A column with sample sd exactly 1 maps to [-1, 1] (mean 2, std 1 in the N-1 convention).
    const auto unit = standardize(column_dataset({1.0, 2.0, 3.0}));
    CHECK(unit.stats.scale[0] == doctest::Approx(1.0));
    CHECK(unit.dataset[0].features[0] == doctest::Approx(-1.0));
    CHECK(unit.dataset[2].features[0] == doctest::Approx(1.0));
}

TEST_CASE("standardize: moments, idempotence and constant columns") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd(3.0, 2.0);
    std::vector<double> col(200);
    for (auto& v : col) v = nd(rng);
    const auto once = standardize(column_dataset(col));
    double mean = 0.0;
    for (const auto& r : once.dataset.records()) mean += r.features[0];
    mean /= 200.0;
    double ss = 0.0;
    for (const auto& r : once.dataset.records()) ss += std::pow(r.features[0] - mean, 2);
    CHECK(std::abs(mean) < 1e-9);
    CHECK(std::abs(std::sqrt(ss / 199.0) - 1.0) < 1e-9);

    const auto twice = standardize(once.dataset);
    for (std::size_t i = 0; i < 200; ++i) {
        CHECK(std::abs(twice.dataset[i].features[0] - once.dataset[i].features[0]) < 1e-9);
    }

    const auto flat = standardize(column_dataset({5, 5, 5}));
    for (const auto& r : flat.dataset.records()) CHECK(r.features[0] == 0.0);
    CHECK(flat.stats.scale[0] == 1.0);
}

TEST_CASE("apply_standardization reuses training statistics") {
    const auto train = standardize(column_dataset({1.0, 2.0, 3.0}));
    const auto test = apply_standardization(column_dataset({4.0}), train.stats);
    CHECK(test[0].features[0] == doctest::Approx(2.0));
    REQUIRE(test.standardization());
    CHECK(test.standardization()->mean == train.stats.mean);
}

TEST_CASE("event_quantiles is lower nearest rank over uncensored times") {
    std::vector<double> t(100);
    std::iota(t.begin(), t.end(), 1.0);
    std::vector<int> e(100, 1);
    const double p50[] = {0.5};
    CHECK(event_quantiles(t, e, p50)[0] == 50.0);
    const double quart[] = {0.25, 0.5, 0.75};
    CHECK(event_quantiles(t, e, quart) == std::vector<double>{25, 50, 75});

    // Appending censored rows never changes the answer.
    auto t2 = t;
    auto e2 = e;
    for (int i = 0; i < 50; ++i) {
        t2.push_back(0.5 + i);
        e2.push_back(0);
    }
    CHECK(event_quantiles(t2, e2, quart) == event_quantiles(t, e, quart));

    std::vector<int> none(100, 0);
    CHECK_THROWS_AS((void)event_quantiles(t, none, p50), DataError);
}

TEST_CASE("k_fold_split balance, partition and determinism") {
    const auto s10 = k_fold_split(10, 5, 3);
    for (int f = 0; f < 5; ++f) CHECK(s10.test_indices(f).size() == 2);

    const auto s7 = k_fold_split(7, 5, 3);
    std::multiset<std::size_t> sizes;
    for (int f = 0; f < 5; ++f) sizes.insert(s7.test_indices(f).size());
    CHECK(sizes == std::multiset<std::size_t>{1, 1, 1, 2, 2});

    const auto again = k_fold_split(7, 5, 3);
    CHECK(again.fold_of == s7.fold_of);

    for (int f = 0; f < 5; ++f) {
        auto test = s7.test_indices(f);
        auto train = s7.train_indices(f);
        CHECK(test.size() + train.size() == 7);
        for (auto i : test) CHECK(std::find(train.begin(), train.end(), i) == train.end());
    }
    CHECK_THROWS_AS((void)k_fold_split(3, 5, 0), DataError);
    CHECK_THROWS_AS((void)k_fold_split(10, 1, 0), DataError);
}

TEST_CASE("dataset construction validates records") {
    CHECK_THROWS_AS(SurvivalDataset({{{1.0}, -1.0, 1, std::nullopt}}, {"x"}), DataError);
    CHECK_THROWS_AS(SurvivalDataset({{{1.0}, 1.0, 3, std::nullopt}}, {"x"}), DataError);
    CHECK_THROWS_AS(SurvivalDataset({{{1.0, 2.0}, 1.0, 1, std::nullopt}}, {"x"}), DataError);
}

TEST_CASE("subset and drop_features") {
    std::vector<SurvivalRecord> recs{{{1, 2}, 1, 1, std::nullopt}, {{3, 4}, 2, 0, std::nullopt},
                                     {{5, 6}, 3, 1, std::nullopt}};
    const SurvivalDataset ds(recs, {"a", "b"});
    const std::size_t pick[] = {2, 0};
    const auto sub = ds.subset(pick);
    CHECK(sub.times() == std::vector<double>{3, 1});
    const std::string drop[] = {"a"};
    const auto slim = ds.drop_features(drop);
    CHECK(slim.feature_names() == std::vector<std::string>{"b"});
    CHECK(slim[1].features == std::vector<double>{4});
    const auto m = ds.feature_matrix();
    CHECK(m(2, 1) == 6.0);
}

}  // TEST_SUITE
