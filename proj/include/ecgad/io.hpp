#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ecgad/signal.hpp"

namespace ecgad::io {

// ---------------------------------------------------------------------------
// Native record store
//
// <id>.hdr   text sidecar: id, fs, channels, samples, `attr <name> <v>`
//            lines, one `labels ...` line (comma-separated, may be empty),
//            and `mask <begin> <end>` span lines (half-open, samples).
// <id>.f32   raw little-endian float32 samples, channel-major.
// ---------------------------------------------------------------------------

void save_record(const EcgRecord& record, const std::string& dir);
EcgRecord load_record(const std::string& dir, const std::string& record_id);

// Sorted record ids found in a directory (by .hdr presence).
std::vector<std::string> list_records(const std::string& dir);
std::vector<EcgRecord> load_records(const std::string& dir);

// ---------------------------------------------------------------------------
// WFDB (format 16 only)
// ---------------------------------------------------------------------------

// Reads a WFDB header + its format-16 data file(s): little-endian signed
// 16-bit samples interleaved by signal within each data file; physical
// value = (adc - baseline) / gain. Unsupported formats and truncated data
// raise errors.
EcgRecord read_wfdb16(const std::string& header_path);

// Minimal format-16 writer (single .dat); used for round trips and fixtures.
void write_wfdb16(const EcgRecord& record, const std::string& dir, double gain = 1000.0,
                  int baseline = 0);

// ---------------------------------------------------------------------------
// Labels
// ---------------------------------------------------------------------------

class LabelSchema {
public:
    LabelSchema() = default;
    explicit LabelSchema(std::vector<std::string> class_names);

    static LabelSchema from_file(const std::string& path);
    void save(const std::string& path) const;
    // All labels observed across records, sorted.
    static LabelSchema infer(const std::vector<EcgRecord>& records);

    int n_classes() const { return static_cast<int>(names_.size()); }
    const std::vector<std::string>& names() const { return names_; }
    int index_of(const std::string& name) const;  // throws DataError when unknown

    Eigen::VectorXd encode(const std::vector<std::string>& labels) const;

private:
    std::vector<std::string> names_;
    std::map<std::string, int> index_;
};

// ---------------------------------------------------------------------------
// Attribute normalization (train-split statistics only)
// ---------------------------------------------------------------------------

struct NormalizationStats {
    // Per-attribute mean/std; sex passes through untouched as 0/1.
    Eigen::VectorXd mean;  // length AttributeVector::kCount
    Eigen::VectorXd std;

    void save(const std::string& path) const;
    static NormalizationStats from_file(const std::string& path);
};

NormalizationStats fit_normalization(const std::vector<EcgRecord>& train_records);
// z-scores numeric attributes (missing ones impute to the train mean, i.e.
// zero after scaling); invertible via invert_normalization.
Eigen::VectorXd apply_normalization(const NormalizationStats& stats, const AttributeVector& attrs);
AttributeVector invert_normalization(const NormalizationStats& stats, const Eigen::VectorXd& t);

// ---------------------------------------------------------------------------
// Splits & rarity tiers
// ---------------------------------------------------------------------------

struct DatasetSplit {
    std::vector<std::string> train, val, test;

    void save(const std::string& path) const;
    static DatasetSplit from_file(const std::string& path);
    void check_disjoint() const;
};

enum class RarityTier { Common, Uncommon, Rare };
const char* tier_name(RarityTier t);

// Tiering by training-split label counts: count < low -> rare,
// count > high -> common, otherwise uncommon.
std::map<std::string, RarityTier> tier_classes(const std::vector<EcgRecord>& train_records,
                                               int low = 10, int high = 50);

// ---------------------------------------------------------------------------
// Checksums (manifests)
// ---------------------------------------------------------------------------

uint64_t fnv1a_file(const std::string& path);
uint64_t fnv1a_bytes(const void* data, size_t size, uint64_t seed = 0xcbf29ce484222325ULL);
// Combined digest over every record file in a directory, order-stable.
uint64_t dataset_checksum(const std::string& dir);

}  // namespace ecgad::io
