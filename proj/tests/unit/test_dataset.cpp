#include <prevmle/dataset.hpp>

#include "banknote_fixture.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <sstream>

using namespace prevmle;

namespace {

std::vector<BanknoteRecord> parse(const std::string& text, LoadOptions options = {}) {
    std::istringstream in(text);
    return load_banknote(in, options);
}

} // namespace

TEST(LoadBanknote, ParsesRowsAndLabels) {
    const auto records = parse("3.6216,8.6661,-2.8073,-0.44699,0\n-1.3971,3.3191,-1.3927,-1.9948,1\n");
    ASSERT_EQ(records.size(), 2U);
    EXPECT_EQ(records[0], (BanknoteRecord{3.6216, 8.6661, -2.8073, -0.44699, Label::negative}));
    EXPECT_EQ(records[1].label, Label::positive);
    const auto counts = count_classes(records);
    EXPECT_EQ(counts.positive, 1U);
    EXPECT_EQ(counts.negative, 1U);
}

TEST(LoadBanknote, MalformedRowNamesTheRow) {
    try {
        parse("1,2,3,4,0\n1,2,x,4,1\n1,2,3,4,1\n");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::malformed_input);
        EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos) << e.what();
    }
    try {
        parse("1,2,3,4,0\n1,2,3,4\n");
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos) << e.what();
    }
    EXPECT_THROW(parse("1,2,3,4,2\n"), Error);
}

TEST(LoadBanknote, EmptyInputAndHeaders) {
    try {
        parse("\n\n");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::empty_input);
    }
    const std::string with_header = "variance,skewness,curtosis,entropy,class\n1,2,3,4,1\n";
    EXPECT_THROW(parse(with_header), Error);
    EXPECT_EQ(parse(with_header, {.allow_header = true}).size(), 1U);
}

TEST(LoadBanknote, ToleratesWindowsLineEndingsAndBlankTail) {
    const auto records = parse("1,2,3,4,0\r\n5,6,7,8,1\r\n\r\n");
    EXPECT_EQ(records.size(), 2U);
}

TEST(LoadBanknote, PositiveClassConvention) {
    const auto flipped = parse("1,2,3,4,0\n", {.positive_class = 0});
    EXPECT_EQ(flipped[0].label, Label::positive);
}

TEST(LoadBanknote, ParseSerializeRoundTripPreservesText) {
    Rng rng(6);
    std::ostringstream file;
    for (int i = 0; i < 500; ++i) {
        // values printed like the distributed file: up to five decimals
        for (int c = 0; c < 4; ++c) {
            const auto scaled = static_cast<long long>(rng.below(2000000)) - 1000000;
            file << fmt::format("{}", static_cast<double>(scaled) / 1e5) << ',';
        }
        file << rng.below(2) << '\n';
    }
    const auto records = parse(file.str());
    std::ostringstream again;
    write_banknote(again, records);
    EXPECT_EQ(again.str(), file.str());
}

TEST(SelectFeatures, OrderAndDimension) {
    const std::vector<BanknoteRecord> one{{1.0, 2.0, 3.0, 4.0, Label::positive}};
    const std::vector<BanknoteFeature> ck{BanknoteFeature::curtosis, BanknoteFeature::skewness};
    const auto s = select_features(one, ck);
    EXPECT_EQ(s[0].features, (std::vector<double>{3.0, 2.0}));
    EXPECT_EQ(s[0].label, Label::positive);

    const std::vector<std::string> two{"skewness", "curtosis"};
    EXPECT_EQ(select_features(one, two)[0].features.size(), 2U);
    const std::vector<std::string> all{"variance", "skewness", "curtosis", "entropy"};
    EXPECT_EQ(select_features(one, all)[0].features, (std::vector<double>{1.0, 2.0, 3.0, 4.0}));

    const std::vector<std::string> bad{"skewness", "kurtosis"};
    try {
        select_features(one, bad);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::unknown_feature);
    }
}

TEST(TrainSplit, DefaultCountsAndPartition) {
    const auto data = fixtures::banknote_like(1);
    const auto split = make_train_split(data, {.seed = 3});
    EXPECT_EQ(split.train.size(), 411U);
    EXPECT_EQ(count_classes(split.train), (ClassCounts{195, 216}));
    const auto all = count_classes(data);
    EXPECT_EQ(count_classes(split.holdout), (ClassCounts{all.positive - 195, all.negative - 216}));

    std::set<std::size_t> seen(split.train_indices.begin(), split.train_indices.end());
    for (auto i : split.holdout_indices) {
        EXPECT_TRUE(seen.insert(i).second) << "index " << i << " in both splits";
    }
    EXPECT_EQ(seen.size(), data.size());
    for (std::size_t k = 0; k < split.train.size(); ++k) {
        EXPECT_EQ(split.train[k], data[split.train_indices[k]]);
    }
}

TEST(TrainSplit, SeededAndReplayable) {
    const auto data = fixtures::banknote_like(2);
    const auto a = make_train_split(data, {.seed = 9});
    const auto b = make_train_split(data, {.seed = 9});
    const auto c = make_train_split(data, {.seed = 10});
    EXPECT_EQ(a.train_indices, b.train_indices);
    EXPECT_NE(a.train_indices, c.train_indices);

    const auto manifest = split_manifest(a, {.seed = 9});
    EXPECT_EQ(manifest.at("seed"), 9);
    EXPECT_EQ(manifest.at("train_indices").template get<std::vector<std::size_t>>(), a.train_indices);
    EXPECT_EQ(manifest.at("train_counts").at("positive"), 195);
    EXPECT_EQ(manifest.at("holdout_counts").at("negative"), 762 - 216);
}

TEST(TrainSplit, InsufficientRecords) {
    const auto small = fixtures::banknote_like(3, 300, 100);
    try {
        make_train_split(small, {});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::insufficient_records);
    }
    EXPECT_THROW(make_train_split(small, {.train_total = 10, .train_positives = 5, .train_negatives = 6}), Error);
}

TEST(EvalSet, ExactCompositionWithReplacement) {
    const auto data = fixtures::banknote_like(4);
    const std::vector<BanknoteFeature> f{BanknoteFeature::skewness, BanknoteFeature::curtosis};
    const auto holdout = select_features(make_train_split(data, {.seed = 1}).holdout, f);

    const auto half = make_eval_set(holdout, 0.5, 500, 1);
    EXPECT_EQ(count_classes(half), (ClassCounts{250, 250}));

    const auto heavy = make_eval_set(holdout, 0.9, 500, 2);
    const auto holdout_pos = count_classes(holdout).positive;
    EXPECT_EQ(count_classes(heavy).positive, 450U);
    EXPECT_GT(450U, holdout_pos); // more positives than the pool holds: replacement is required

    const auto x = make_eval_set(holdout, 0.3, 200, 5);
    const auto y = make_eval_set(holdout, 0.3, 200, 6);
    EXPECT_EQ(count_classes(x), count_classes(y));
    std::multiset<std::vector<double>> mx;
    std::multiset<std::vector<double>> my;
    for (const auto& s : x) mx.insert(s.features);
    for (const auto& s : y) my.insert(s.features);
    EXPECT_NE(mx, my);

    const auto again = make_eval_set(holdout, 0.3, 200, 5);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(x[i].features, again[i].features);
}

TEST(EvalSet, TrueProportionIsExact) {
    const auto data = fixtures::banknote_like(5);
    const std::vector<BanknoteFeature> f{BanknoteFeature::variance};
    const auto holdout = select_features(data, f);
    for (double pi : {0.0, 0.1, 0.33, 0.5, 0.9, 1.0}) {
        for (std::size_t size : {1U, 7U, 333U}) {
            const auto set = make_eval_set(holdout, pi, size, 3);
            EXPECT_EQ(count_classes(set).positive,
                      static_cast<std::size_t>(std::llround(static_cast<double>(size) * pi)));
        }
    }
}

TEST(EvalSet, MissingClass) {
    const std::vector<LabeledSample> negatives{{{1.0}, Label::negative}, {{2.0}, Label::negative}};
    try {
        make_eval_set(negatives, 0.5, 10, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::single_class);
    }
}
