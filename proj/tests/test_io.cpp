#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "ecgad/errors.hpp"
#include "ecgad/io.hpp"
#include "ecgad/rng.hpp"
#include "ecgad/synth.hpp"
#include "testutil.hpp"

using namespace ecgad;

TEST_CASE("native record store round trip") {
    testutil::TempDir tmp("store");
    SynthesisSpec spec;
    spec.anomalies.push_back({AnomalyKind::StShift, 3, 5, 0.25});
    EcgRecord rec = synthesize_ecg(spec, 5);
    rec.record_id = "roundtrip";
    io::save_record(rec, tmp.path());
    EcgRecord back = io::load_record(tmp.path(), "roundtrip");

    CHECK(back.record_id == rec.record_id);
    CHECK(back.fs == rec.fs);
    CHECK(back.samples() == rec.samples());
    CHECK(back.labels == rec.labels);
    CHECK(back.has_labels);
    CHECK(back.anomaly_mask == rec.anomaly_mask);
    CHECK(back.attributes.heart_rate == doctest::Approx(rec.attributes.heart_rate).epsilon(1e-12));
    // samples survive the f32 quantization exactly on reload
    for (int i = 0; i < rec.samples(); ++i)
        CHECK(back.channels(0, i) ==
              static_cast<double>(static_cast<float>(rec.channels(0, i))));
}

TEST_CASE("list_records is sorted and complete") {
    testutil::TempDir tmp("list");
    for (const char* id : {"b_rec", "a_rec", "c_rec"}) {
        SynthesisSpec spec;
        EcgRecord rec = synthesize_ecg(spec, 1);
        rec.record_id = id;
        io::save_record(rec, tmp.path());
    }
    auto ids = io::list_records(tmp.path());
    REQUIRE(ids.size() == 3);
    CHECK(ids[0] == "a_rec");
    CHECK(ids[2] == "c_rec");
}

TEST_CASE("wfdb16: documented hand-decoded example") {
    // header: one signal, fs 500, gain 1000, baseline 0; data bytes E8 03
    // little-endian 0x03E8 = 1000 adc units -> (1000 - 0)/1000 = 1.000 mV
    testutil::TempDir tmp("wfdb_hand");
    {
        std::ofstream hea(tmp.path() + "/hand.hea");
        hea << "hand 1 500 1\n";
        hea << "hand.dat 16 1000(0)/mV 16 0 0 0 0 lead_ii\n";
    }
    {
        std::ofstream dat(tmp.path() + "/hand.dat", std::ios::binary);
        const unsigned char bytes[2] = {0xE8, 0x03};
        dat.write(reinterpret_cast<const char*>(bytes), 2);
    }
    EcgRecord rec = io::read_wfdb16(tmp.path() + "/hand.hea");
    CHECK(rec.record_id == "hand");
    CHECK(rec.fs == 500.0);
    CHECK(rec.n_channels() == 1);
    CHECK(rec.samples() == 1);
    CHECK(rec.channels(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("wfdb16: truncated data file is a corrupt-record error") {
    testutil::TempDir tmp("wfdb_trunc");
    {
        std::ofstream hea(tmp.path() + "/t.hea");
        hea << "t 2 500 10\n";
        hea << "t.dat 16 1000(0)/mV 16 0 0 0 0 ch0\n";
        hea << "t.dat 16 1000(0)/mV 16 0 0 0 0 ch1\n";
    }
    {
        std::ofstream dat(tmp.path() + "/t.dat", std::ios::binary);
        std::vector<char> bytes(2 * 2 * 10 - 2, 0);  // two bytes short
        dat.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    CHECK_THROWS_AS(io::read_wfdb16(tmp.path() + "/t.hea"), DataError);
}

TEST_CASE("wfdb16: unsupported format code is rejected explicitly") {
    testutil::TempDir tmp("wfdb_fmt");
    {
        std::ofstream hea(tmp.path() + "/f.hea");
        hea << "f 1 500 4\n";
        hea << "f.dat 212 200/mV 12 0 0 0 0 ch0\n";
    }
    try {
        io::read_wfdb16(tmp.path() + "/f.hea");
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("format 212") != std::string::npos);
    }
}

TEST_CASE("wfdb16: write-read round trip is bit-exact in the adc domain") {
    testutil::TempDir tmp("wfdb_rt");
    SynthesisSpec spec;
    EcgRecord rec = synthesize_ecg(spec, 9);
    rec.record_id = "rt";
    io::write_wfdb16(rec, tmp.path(), 1000.0, 0);
    EcgRecord back = io::read_wfdb16(tmp.path() + "/rt.hea");
    REQUIRE(back.samples() == rec.samples());
    for (int i = 0; i < rec.samples(); ++i) {
        const double adc = std::round(rec.channels(0, i) * 1000.0);
        CHECK(back.channels(0, i) * 1000.0 == doctest::Approx(adc).epsilon(1e-12));
    }
    // writing the read-back record again reproduces identical bytes
    EcgRecord again = back;
    again.record_id = "rt2";
    io::write_wfdb16(again, tmp.path(), 1000.0, 0);
    CHECK(io::fnv1a_file(tmp.path() + "/rt.dat") == io::fnv1a_file(tmp.path() + "/rt2.dat"));
}

TEST_CASE("wfdb16: byte-level oracle on random buffers") {
    testutil::TempDir tmp("wfdb_rand");
    Rng rng(123);
    for (int trial = 0; trial < 25; ++trial) {
        const int n_sig = rng.uniform_int(1, 3);
        const int n_samples = rng.uniform_int(1, 50);
        const double gain = 100.0 * rng.uniform_int(1, 20);
        const int baseline = rng.uniform_int(-500, 500);
        const std::string name = "r" + std::to_string(trial);
        {
            std::ofstream hea(tmp.path() + "/" + name + ".hea");
            hea << name << " " << n_sig << " 360 " << n_samples << "\n";
            for (int s = 0; s < n_sig; ++s)
                hea << name << ".dat 16 " << gain << "(" << baseline << ")/mV 16 0 0 0 0 ch" << s
                    << "\n";
        }
        std::vector<unsigned char> bytes(static_cast<size_t>(n_sig) * n_samples * 2);
        for (auto& b : bytes) b = static_cast<unsigned char>(rng.uniform_int(0, 255));
        {
            std::ofstream dat(tmp.path() + "/" + name + ".dat", std::ios::binary);
            dat.write(reinterpret_cast<const char*>(bytes.data()),
                      static_cast<std::streamsize>(bytes.size()));
        }
        EcgRecord rec = io::read_wfdb16(tmp.path() + "/" + name + ".hea");

        // independent two's-complement decode
        for (int t = 0; t < n_samples; ++t)
            for (int s = 0; s < n_sig; ++s) {
                const size_t off = (static_cast<size_t>(t) * n_sig + s) * 2;
                int v = bytes[off] | (bytes[off + 1] << 8);
                if (v >= 32768) v -= 65536;
                const double phys = (static_cast<double>(v) - baseline) / gain;
                CHECK(rec.channels(s, t) == phys);
            }
    }
}

TEST_CASE("label schema encodes multi-hot vectors") {
    io::LabelSchema schema({"a", "b", "c"});
    CHECK(schema.encode({}).sum() == 0.0);
    CHECK(schema.encode({"a", "b", "c"}).sum() == 3.0);
    Eigen::VectorXd y1 = schema.encode({"c", "a"});
    Eigen::VectorXd y2 = schema.encode({"a", "c"});
    CHECK(y1 == y2);
    CHECK(y1[0] == 1.0);
    CHECK(y1[1] == 0.0);
    CHECK_THROWS_AS(schema.encode({"zzz"}), DataError);
}

TEST_CASE("label schema round trips through its file format") {
    testutil::TempDir tmp("schema");
    io::LabelSchema schema({"normal", "st_elevation", "wide_qrs"});
    schema.save(tmp.path() + "/schema.txt");
    io::LabelSchema back = io::LabelSchema::from_file(tmp.path() + "/schema.txt");
    CHECK(back.names() == schema.names());
    CHECK(back.index_of("wide_qrs") == 2);
}

TEST_CASE("normalization: z-scores on the train split, invertible, isolated") {
    std::vector<EcgRecord> train;
    CohortSpec cohort;
    for (int i = 0; i < 10; ++i) {
        EcgRecord rec = synthesize_ecg(sample_spec(cohort, 55, i), 100 + i);
        rec.record_id = "t" + std::to_string(i);
        train.push_back(rec);
    }
    io::NormalizationStats stats = io::fit_normalization(train);

    // attribute equal to the train mean maps to 0
    AttributeVector mean_attrs;
    for (int i = 0; i < AttributeVector::kCount; ++i) mean_attrs.set(i, stats.mean[i]);
    mean_attrs.sex = 1.0;
    Eigen::VectorXd t = io::apply_normalization(stats, mean_attrs);
    for (int i = 0; i < AttributeVector::kCount; ++i) {
        if (std::string(AttributeVector::name(i)) == "sex")
            CHECK(t[i] == 1.0);
        else
            CHECK(t[i] == doctest::Approx(0.0).epsilon(1e-12));
    }

    // invert(apply(x)) == x
    const AttributeVector& a = train[3].attributes;
    Eigen::VectorXd z = io::apply_normalization(stats, a);
    AttributeVector back = io::invert_normalization(stats, z);
    for (int i = 0; i < AttributeVector::kCount; ++i)
        CHECK(back.get(i) == doctest::Approx(a.get(i)).epsilon(1e-12));

    // stats depend only on the records passed in: recomputing from the same
    // train split after "mutating validation data" changes nothing
    io::NormalizationStats stats2 = io::fit_normalization(train);
    CHECK(stats.mean == stats2.mean);
    CHECK(stats.std == stats2.std);
}

TEST_CASE("degenerate attributes are rejected") {
    std::vector<EcgRecord> train;
    for (int i = 0; i < 4; ++i) {
        SynthesisSpec spec;  // identical parameters -> zero variance everywhere
        spec.rr_jitter = 1e-9;
        EcgRecord rec = synthesize_ecg(spec, 4);
        rec.record_id = "same" + std::to_string(i);
        train.push_back(rec);
    }
    CHECK_THROWS_AS(io::fit_normalization(train), DataError);
}

TEST_CASE("splits reject duplicated ids") {
    io::DatasetSplit split;
    split.train = {"a", "b"};
    split.val = {"c"};
    split.test = {"b"};
    CHECK_THROWS_AS(split.check_disjoint(), DataError);
}

TEST_CASE("split manifests round trip") {
    testutil::TempDir tmp("split");
    io::DatasetSplit split;
    split.train = {"a", "b"};
    split.val = {"c"};
    split.test = {"d", "e"};
    split.save(tmp.path() + "/split.txt");
    io::DatasetSplit back = io::DatasetSplit::from_file(tmp.path() + "/split.txt");
    CHECK(back.train == split.train);
    CHECK(back.val == split.val);
    CHECK(back.test == split.test);
}

TEST_CASE("tier thresholds partition all classes") {
    std::vector<EcgRecord> train;
    auto add = [&](const std::string& label, int count) {
        for (int i = 0; i < count; ++i) {
            EcgRecord rec;
            rec.record_id = label + std::to_string(i);
            rec.fs = 500.0;
            rec.channels = Eigen::MatrixXd::Zero(1, 10);
            rec.has_labels = true;
            rec.labels = {label};
            train.push_back(rec);
        }
    };
    add("common_class", 80);
    add("uncommon_class", 20);
    add("rare_class", 4);
    auto tiers = io::tier_classes(train, 10, 50);
    CHECK(tiers.at("common_class") == io::RarityTier::Common);
    CHECK(tiers.at("uncommon_class") == io::RarityTier::Uncommon);
    CHECK(tiers.at("rare_class") == io::RarityTier::Rare);
    CHECK(tiers.size() == 3);

    // stability: recomputation is identical
    auto tiers2 = io::tier_classes(train, 10, 50);
    CHECK(tiers == tiers2);

    // a zero-count class is rare by definition (absent classes simply have
    // no entry; count 0 < low would tier rare)
    auto empty = io::tier_classes({}, 10, 50);
    CHECK(empty.empty());
}

TEST_CASE("dataset checksum changes with content") {
    testutil::TempDir tmp("ck");
    SynthesisSpec spec;
    EcgRecord rec = synthesize_ecg(spec, 1);
    rec.record_id = "x";
    io::save_record(rec, tmp.path());
    const uint64_t h1 = io::dataset_checksum(tmp.path());
    rec.channels(0, 0) += 1.0;
    io::save_record(rec, tmp.path());
    CHECK(io::dataset_checksum(tmp.path()) != h1);
}
