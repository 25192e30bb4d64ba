#include "ecgad/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ecgad/config.hpp"
#include "ecgad/errors.hpp"

namespace fs = std::filesystem;

namespace ecgad::io {

namespace {

float read_le_f32(const unsigned char* p) {
    uint32_t bits = static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
                    (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
    float f;
    std::memcpy(&f, &bits, sizeof(f));
    return f;
}

void write_le_f32(std::ofstream& out, float f) {
    uint32_t bits;
    std::memcpy(&bits, &f, sizeof(bits));
    unsigned char p[4] = {static_cast<unsigned char>(bits), static_cast<unsigned char>(bits >> 8),
                          static_cast<unsigned char>(bits >> 16),
                          static_cast<unsigned char>(bits >> 24)};
    out.write(reinterpret_cast<const char*>(p), 4);
}

int16_t read_le_i16(const unsigned char* p) {
    const uint16_t bits = static_cast<uint16_t>(p[0] | (p[1] << 8));
    return static_cast<int16_t>(bits);
}

std::string join_labels(const std::vector<std::string>& labels) {
    std::string out;
    for (size_t i = 0; i < labels.size(); ++i) {
        if (i) out += ",";
        out += labels[i];
    }
    return out;
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    size_t pos = 0;
    while (pos <= s.size()) {
        size_t comma = s.find(',', pos);
        if (comma == std::string::npos) comma = s.size();
        std::string item = s.substr(pos, comma - pos);
        if (!item.empty()) out.push_back(item);
        pos = comma + 1;
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Native store
// ---------------------------------------------------------------------------

void save_record(const EcgRecord& record, const std::string& dir) {
    record.validate();
    require(!record.record_id.empty(), "save_record: record_id empty");
    fs::create_directories(dir);
    const std::string base = (fs::path(dir) / record.record_id).string();

    std::ofstream hdr(base + ".hdr");
    if (!hdr) throw DataError("cannot write header: " + base + ".hdr");
    hdr << "id " << record.record_id << "\n";
    hdr << "fs " << format_double(record.fs) << "\n";
    hdr << "channels " << record.n_channels() << "\n";
    hdr << "samples " << record.samples() << "\n";
    for (int i = 0; i < AttributeVector::kCount; ++i) {
        const double v = record.attributes.get(i);
        if (!std::isnan(v)) hdr << "attr " << AttributeVector::name(i) << " " << format_double(v) << "\n";
    }
    if (record.has_labels) hdr << "labels " << join_labels(record.labels) << "\n";
    // run-length encode the mask as half-open spans
    if (!record.anomaly_mask.empty()) {
        const auto& m = record.anomaly_mask;
        size_t i = 0;
        while (i < m.size()) {
            if (!m[i]) {
                ++i;
                continue;
            }
            size_t j = i;
            while (j < m.size() && m[j]) ++j;
            hdr << "mask " << i << " " << j << "\n";
            i = j;
        }
    }

    std::ofstream dat(base + ".f32", std::ios::binary);
    if (!dat) throw DataError("cannot write samples: " + base + ".f32");
    for (int c = 0; c < record.n_channels(); ++c)
        for (int s = 0; s < record.samples(); ++s)
            write_le_f32(dat, static_cast<float>(record.channels(c, s)));
}

EcgRecord load_record(const std::string& dir, const std::string& record_id) {
    const std::string base = (fs::path(dir) / record_id).string();
    std::ifstream hdr(base + ".hdr");
    if (!hdr) throw DataError("missing record header: " + base + ".hdr");

    EcgRecord rec;
    int channels = -1, samples = -1;
    std::vector<std::pair<size_t, size_t>> spans;
    std::string line;
    while (std::getline(hdr, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "id") {
            ls >> rec.record_id;
        } else if (tag == "fs") {
            ls >> rec.fs;
        } else if (tag == "channels") {
            ls >> channels;
        } else if (tag == "samples") {
            ls >> samples;
        } else if (tag == "attr") {
            std::string name;
            double v;
            ls >> name >> v;
            bool found = false;
            for (int i = 0; i < AttributeVector::kCount; ++i)
                if (name == AttributeVector::name(i)) {
                    rec.attributes.set(i, v);
                    found = true;
                }
            if (!found) throw DataError("unknown attribute in " + base + ".hdr: " + name);
        } else if (tag == "labels") {
            rec.has_labels = true;
            std::string rest;
            std::getline(ls, rest);
            size_t b = rest.find_first_not_of(' ');
            rec.labels = split_csv(b == std::string::npos ? "" : rest.substr(b));
        } else if (tag == "mask") {
            size_t a, b;
            ls >> a >> b;
            spans.emplace_back(a, b);
        } else {
            throw DataError("bad header line in " + base + ".hdr: " + line);
        }
    }
    if (rec.record_id.empty() || channels <= 0 || samples <= 0 || rec.fs <= 0)
        throw DataError("incomplete record header: " + base + ".hdr");

    std::ifstream dat(base + ".f32", std::ios::binary);
    if (!dat) throw DataError("missing sample file: " + base + ".f32");
    dat.seekg(0, std::ios::end);
    const auto size = static_cast<size_t>(dat.tellg());
    dat.seekg(0);
    const size_t expected = static_cast<size_t>(channels) * samples * 4;
    if (size != expected)
        throw DataError("sample file size mismatch for " + base + ".f32 (expected " +
                        std::to_string(expected) + " bytes, found " + std::to_string(size) + ")");
    std::vector<unsigned char> buf(size);
    dat.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(size));

    rec.channels.resize(channels, samples);
    size_t off = 0;
    for (int c = 0; c < channels; ++c)
        for (int s = 0; s < samples; ++s, off += 4)
            rec.channels(c, s) = static_cast<double>(read_le_f32(buf.data() + off));

    if (!spans.empty()) {
        rec.anomaly_mask.assign(static_cast<size_t>(samples), 0);
        for (auto [a, b] : spans) {
            if (b > static_cast<size_t>(samples) || a > b)
                throw DataError("bad mask span in " + base + ".hdr");
            for (size_t i = a; i < b; ++i) rec.anomaly_mask[i] = 1;
        }
    }
    rec.validate();
    return rec;
}

std::vector<std::string> list_records(const std::string& dir) {
    std::vector<std::string> ids;
    if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir);
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.path().extension() == ".hdr") ids.push_back(entry.path().stem().string());
    std::sort(ids.begin(), ids.end());
    return ids;
}

std::vector<EcgRecord> load_records(const std::string& dir) {
    std::vector<EcgRecord> out;
    for (const auto& id : list_records(dir)) out.push_back(load_record(dir, id));
    return out;
}

// ---------------------------------------------------------------------------
// WFDB format 16
// ---------------------------------------------------------------------------

namespace {

struct WfdbSignalSpec {
    std::string file;
    int format = 0;
    double gain = 200.0;  // WFDB default ADC gain
    int baseline = 0;
};

}  // namespace

EcgRecord read_wfdb16(const std::string& header_path) {
    std::ifstream hdr(header_path);
    if (!hdr) throw DataError("cannot open WFDB header: " + header_path);

    std::string line;
    // skip comments/blank lines before the record line
    do {
        if (!std::getline(hdr, line)) throw DataError("empty WFDB header: " + header_path);
    } while (line.empty() || line[0] == '#');

    std::istringstream rl(line);
    std::string rec_name;
    int n_sig = 0;
    double fs = 250.0;  // WFDB default
    long long n_samples = 0;
    rl >> rec_name >> n_sig;
    if (rl.fail() || n_sig <= 0) throw DataError("bad WFDB record line: " + line);
    if (!(rl >> fs)) fs = 250.0;
    if (!(rl >> n_samples)) n_samples = 0;
    // record name may carry /segments or extra fields; keep the base token
    size_t slash = rec_name.find('/');
    if (slash != std::string::npos) rec_name = rec_name.substr(0, slash);

    std::vector<WfdbSignalSpec> sigs;
    for (int i = 0; i < n_sig; ++i) {
        do {
            if (!std::getline(hdr, line))
                throw DataError("WFDB header truncated (signal lines): " + header_path);
        } while (line.empty() || line[0] == '#');
        std::istringstream sl(line);
        WfdbSignalSpec s;
        std::string fmt_tok, gain_tok;
        sl >> s.file >> fmt_tok >> gain_tok;
        if (sl.fail() && gain_tok.empty()) gain_tok = "200";
        // format token may carry xNNN/ :skew/ +offset suffixes
        size_t pos = 0;
        while (pos < fmt_tok.size() && (std::isdigit(static_cast<unsigned char>(fmt_tok[pos])) ||
                                        (pos == 0 && fmt_tok[pos] == '-')))
            ++pos;
        try {
            s.format = std::stoi(fmt_tok.substr(0, pos));
        } catch (const std::exception&) {
            throw DataError("bad WFDB format token: " + fmt_tok);
        }
        if (s.format != 16)
            throw DataError("unsupported WFDB format " + std::to_string(s.format) +
                            " (only format 16 is supported)");
        // gain token: gain(baseline)/units, all parts optional
        if (!gain_tok.empty()) {
            std::string g = gain_tok;
            size_t slash2 = g.find('/');
            if (slash2 != std::string::npos) g = g.substr(0, slash2);
            size_t paren = g.find('(');
            if (paren != std::string::npos) {
                size_t close = g.find(')', paren);
                if (close == std::string::npos) throw DataError("bad WFDB gain token: " + gain_tok);
                s.baseline = std::stoi(g.substr(paren + 1, close - paren - 1));
                g = g.substr(0, paren);
            }
            if (!g.empty()) s.gain = std::stod(g);
            if (s.gain == 0.0) s.gain = 200.0;
        }
        sigs.push_back(s);
    }

    const fs::path dir = fs::path(header_path).parent_path();

    // group signals by data file; samples are interleaved by signal within
    // each file, in header order
    std::map<std::string, std::vector<int>> by_file;  // file -> signal indices
    for (int i = 0; i < n_sig; ++i) by_file[sigs[i].file].push_back(i);

    EcgRecord rec;
    rec.record_id = rec_name;
    rec.fs = fs;

    // first pass to determine n_samples when the header omits it
    if (n_samples <= 0) {
        const auto& [file0, idxs0] = *by_file.begin();
        const auto sz = fs::file_size(dir / file0);
        n_samples = static_cast<long long>(sz / (2 * idxs0.size()));
    }
    rec.channels.resize(n_sig, n_samples);

    for (const auto& [file, idxs] : by_file) {
        const fs::path path = dir / file;
        std::ifstream dat(path, std::ios::binary);
        if (!dat) throw DataError("missing WFDB data file: " + path.string());
        dat.seekg(0, std::ios::end);
        const auto size = static_cast<size_t>(dat.tellg());
        dat.seekg(0);
        const size_t expected = static_cast<size_t>(n_samples) * idxs.size() * 2;
        if (size != expected)
            throw DataError("corrupt WFDB record: " + path.string() + " has " +
                            std::to_string(size) + " bytes, expected " + std::to_string(expected));
        std::vector<unsigned char> buf(size);
        dat.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(size));
        size_t off = 0;
        for (long long t = 0; t < n_samples; ++t)
            for (int local = 0; local < static_cast<int>(idxs.size()); ++local, off += 2) {
                const int sig = idxs[local];
                const int16_t adc = read_le_i16(buf.data() + off);
                rec.channels(sig, t) = (static_cast<double>(adc) - sigs[sig].baseline) / sigs[sig].gain;
            }
    }
    return rec;
}

void write_wfdb16(const EcgRecord& record, const std::string& dir, double gain, int baseline) {
    record.validate();
    fs::create_directories(dir);
    const std::string dat_name = record.record_id + ".dat";
    {
        std::ofstream hdr(fs::path(dir) / (record.record_id + ".hea"));
        if (!hdr) throw DataError("cannot write WFDB header");
        hdr << record.record_id << " " << record.n_channels() << " " << format_double(record.fs)
            << " " << record.samples() << "\n";
        for (int c = 0; c < record.n_channels(); ++c)
            hdr << dat_name << " 16 " << format_double(gain) << "(" << baseline << ")/mV 16 0 0 0 0 ch"
                << c << "\n";
    }
    std::ofstream dat(fs::path(dir) / dat_name, std::ios::binary);
    if (!dat) throw DataError("cannot write WFDB data file");
    for (int t = 0; t < record.samples(); ++t)
        for (int c = 0; c < record.n_channels(); ++c) {
            double adc = std::round(record.channels(c, t) * gain + baseline);
            adc = std::clamp(adc, -32768.0, 32767.0);
            const auto v = static_cast<int16_t>(adc);
            const auto bits = static_cast<uint16_t>(v);
            unsigned char p[2] = {static_cast<unsigned char>(bits & 0xff),
                                  static_cast<unsigned char>(bits >> 8)};
            dat.write(reinterpret_cast<const char*>(p), 2);
        }
}

// ---------------------------------------------------------------------------
// Labels
// ---------------------------------------------------------------------------

LabelSchema::LabelSchema(std::vector<std::string> class_names) : names_(std::move(class_names)) {
    for (int i = 0; i < static_cast<int>(names_.size()); ++i) {
        if (index_.count(names_[i])) throw DataError("duplicate class name: " + names_[i]);
        index_[names_[i]] = i;
    }
}

LabelSchema LabelSchema::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open label schema: " + path);
    std::vector<std::string> names;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) names.push_back(line);
    }
    return LabelSchema(std::move(names));
}

void LabelSchema::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write label schema: " + path);
    for (const auto& n : names_) out << n << "\n";
}

LabelSchema LabelSchema::infer(const std::vector<EcgRecord>& records) {
    std::vector<std::string> names;
    for (const auto& r : records)
        for (const auto& l : r.labels)
            if (std::find(names.begin(), names.end(), l) == names.end()) names.push_back(l);
    std::sort(names.begin(), names.end());
    return LabelSchema(std::move(names));
}

int LabelSchema::index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw DataError("label not in schema: " + name);
    return it->second;
}

Eigen::VectorXd LabelSchema::encode(const std::vector<std::string>& labels) const {
    Eigen::VectorXd y = Eigen::VectorXd::Zero(n_classes());
    for (const auto& l : labels) y[index_of(l)] = 1.0;
    return y;
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

void NormalizationStats::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write normalization stats: " + path);
    for (int i = 0; i < AttributeVector::kCount; ++i)
        out << AttributeVector::name(i) << " " << format_double(mean[i]) << " "
            << format_double(std[i]) << "\n";
}

NormalizationStats NormalizationStats::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open normalization stats: " + path);
    NormalizationStats s;
    s.mean = Eigen::VectorXd::Zero(AttributeVector::kCount);
    s.std = Eigen::VectorXd::Ones(AttributeVector::kCount);
    std::string name;
    double m, sd;
    while (in >> name >> m >> sd) {
        for (int i = 0; i < AttributeVector::kCount; ++i)
            if (name == AttributeVector::name(i)) {
                s.mean[i] = m;
                s.std[i] = sd;
            }
    }
    return s;
}

NormalizationStats fit_normalization(const std::vector<EcgRecord>& train_records) {
    require(train_records.size() >= 2, "fit_normalization: need at least 2 training records");
    NormalizationStats s;
    s.mean = Eigen::VectorXd::Zero(AttributeVector::kCount);
    s.std = Eigen::VectorXd::Ones(AttributeVector::kCount);
    for (int i = 0; i < AttributeVector::kCount; ++i) {
        if (std::string(AttributeVector::name(i)) == "sex") continue;  // passthrough
        double sum = 0.0;
        int n = 0;
        for (const auto& r : train_records) {
            const double v = r.attributes.get(i);
            if (!std::isnan(v)) {
                sum += v;
                ++n;
            }
        }
        if (n < 2) throw DataError(std::string("fit_normalization: attribute `") +
                                   AttributeVector::name(i) + "` has too few values");
        const double mean = sum / n;
        double ss = 0.0;
        for (const auto& r : train_records) {
            const double v = r.attributes.get(i);
            if (!std::isnan(v)) ss += (v - mean) * (v - mean);
        }
        const double sd = std::sqrt(ss / n);
        if (sd <= 0.0)
            throw DataError(std::string("fit_normalization: attribute `") +
                            AttributeVector::name(i) + "` is degenerate (zero variance)");
        s.mean[i] = mean;
        s.std[i] = sd;
    }
    return s;
}

Eigen::VectorXd apply_normalization(const NormalizationStats& stats, const AttributeVector& attrs) {
    Eigen::VectorXd t(AttributeVector::kCount);
    for (int i = 0; i < AttributeVector::kCount; ++i) {
        const double v = attrs.get(i);
        if (std::string(AttributeVector::name(i)) == "sex") {
            t[i] = std::isnan(v) ? 0.5 : v;  // unknown sex sits between the codes
        } else if (std::isnan(v)) {
            t[i] = 0.0;  // train-mean imputation in z-space
        } else {
            t[i] = (v - stats.mean[i]) / stats.std[i];
        }
    }
    return t;
}

AttributeVector invert_normalization(const NormalizationStats& stats, const Eigen::VectorXd& t) {
    require(t.size() == AttributeVector::kCount, "invert_normalization: bad vector length");
    AttributeVector a;
    for (int i = 0; i < AttributeVector::kCount; ++i) {
        if (std::string(AttributeVector::name(i)) == "sex")
            a.set(i, t[i]);
        else
            a.set(i, t[i] * stats.std[i] + stats.mean[i]);
    }
    return a;
}

// ---------------------------------------------------------------------------
// Splits & tiers
// ---------------------------------------------------------------------------

void DatasetSplit::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write split manifest: " + path);
    for (const auto& id : train) out << "train " << id << "\n";
    for (const auto& id : val) out << "val " << id << "\n";
    for (const auto& id : test) out << "test " << id << "\n";
}

DatasetSplit DatasetSplit::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open split manifest: " + path);
    DatasetSplit s;
    std::string part, id;
    while (in >> part >> id) {
        if (part == "train")
            s.train.push_back(id);
        else if (part == "val")
            s.val.push_back(id);
        else if (part == "test")
            s.test.push_back(id);
        else
            throw DataError("bad split line: " + part);
    }
    s.check_disjoint();
    return s;
}

void DatasetSplit::check_disjoint() const {
    std::map<std::string, int> seen;
    for (const auto& id : train) ++seen[id];
    for (const auto& id : val) ++seen[id];
    for (const auto& id : test) ++seen[id];
    for (const auto& [id, n] : seen)
        if (n > 1) throw DataError("record in multiple splits: " + id);
}

const char* tier_name(RarityTier t) {
    switch (t) {
        case RarityTier::Common: return "common";
        case RarityTier::Uncommon: return "uncommon";
        case RarityTier::Rare: return "rare";
    }
    throw ContractError("bad tier");
}

std::map<std::string, RarityTier> tier_classes(const std::vector<EcgRecord>& train_records,
                                               int low, int high) {
    require(low <= high, "tier_classes: thresholds out of order");
    std::map<std::string, int> counts;
    for (const auto& r : train_records)
        for (const auto& l : r.labels) ++counts[l];
    std::map<std::string, RarityTier> tiers;
    for (const auto& [name, count] : counts) {
        if (count < low)
            tiers[name] = RarityTier::Rare;
        else if (count > high)
            tiers[name] = RarityTier::Common;
        else
            tiers[name] = RarityTier::Uncommon;
    }
    return tiers;
}

// ---------------------------------------------------------------------------
// Checksums
// ---------------------------------------------------------------------------

uint64_t fnv1a_bytes(const void* data, size_t size, uint64_t seed) {
    const auto* p = static_cast<const unsigned char*>(data);
    uint64_t h = seed;
    for (size_t i = 0; i < size; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

uint64_t fnv1a_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file for checksum: " + path);
    uint64_t h = 0xcbf29ce484222325ULL;
    char buf[65536];
    while (in) {
        in.read(buf, sizeof(buf));
        h = fnv1a_bytes(buf, static_cast<size_t>(in.gcount()), h);
    }
    return h;
}

uint64_t dataset_checksum(const std::string& dir) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& id : list_records(dir)) {
        h = fnv1a_bytes(id.data(), id.size(), h);
        for (const char* ext : {".hdr", ".f32"}) {
            const std::string path = (fs::path(dir) / (id + ext)).string();
            const uint64_t fh = fnv1a_file(path);
            h = fnv1a_bytes(&fh, sizeof(fh), h);
        }
    }
    return h;
}

}  // namespace ecgad::io
