#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "kanmlp/labels.hpp"
#include "kanmlp/numerics.hpp"

namespace kanmlp {

inline constexpr std::size_t kEmbeddingDim = 512;
inline constexpr std::uint16_t kDatasetFormatVersion = 1;
// Records further than this from unit L2 norm draw a validation warning.
inline constexpr double kNormTolerance = 1e-4;

struct EmbeddingRecord {
    std::string id;
    int label = 0;  // kReal / kGenerated
    std::string source;
    std::vector<double> embedding;

    bool operator==(const EmbeddingRecord&) const = default;
};

struct Dataset {
    std::size_t dim = kEmbeddingDim;
    std::vector<EmbeddingRecord> records;

    std::size_t size() const noexcept { return records.size(); }
    bool empty() const noexcept { return records.empty(); }
    bool operator==(const Dataset&) const = default;
};

Matrix feature_matrix(const Dataset& data);
Matrix feature_matrix(const Dataset& data, std::span<const std::size_t> rows);
std::vector<int> label_vector(const Dataset& data);

std::string label_name(int label);  // "real" / "generated"
int parse_label(const std::string& name);

// Hard checks (dimension, finiteness, binary label); throws DimensionError /
// InputError naming the record id.
void validate_record(const EmbeddingRecord& record, std::size_t dim);
// Soft check: one message per record whose L2 norm is off unity by more than tolerance.
std::vector<std::string> norm_warnings(const Dataset& data, double tolerance = kNormTolerance);

// ---- text format: one JSON object per line -----------------------------------
// {"id": str, "label": "real"|"generated", "source": str, "embedding": [dim numbers]}

Dataset load_jsonl(const std::string& path, std::size_t dim = kEmbeddingDim);
void write_jsonl(const Dataset& data, const std::string& path);

// ---- binary format ------------------------------------------------------------
// "KEMB" | u16 version | u32 dim | u64 count | records
// record: u16 id length | id | u8 label | u16 source length | source | dim x f32
// Little-endian throughout. Embeddings are stored as float32 and widened on load.

std::vector<std::uint8_t> encode_bin(const Dataset& data);
Dataset decode_bin(std::span<const std::uint8_t> bytes);
Dataset load_bin(const std::string& path);
void write_bin(const Dataset& data, const std::string& path);

// Dispatches on the leading magic bytes (binary) or falls back to JSON lines.
Dataset load_dataset(const std::string& path, std::size_t dim = kEmbeddingDim);
// ".bin" / ".kemb" write binary, anything else JSON lines.
void write_dataset(const Dataset& data, const std::string& path);

// ---- manifests and splits ---------------------------------------------------

struct SplitSpec {
    double train_fraction = 0.8;
    double validation_fraction = 0.1;
    std::uint64_t seed = 0;
    bool stratify = true;

    void validate() const;
};

struct DatasetManifest {
    std::map<std::string, std::size_t> per_source;
    std::size_t real = 0;
    std::size_t generated = 0;
    std::size_t total = 0;
    std::optional<SplitSpec> split;
};

DatasetManifest summarize(const Dataset& data);
void print_manifest(const DatasetManifest& manifest, std::ostream& out);

struct DatasetSplit {
    Dataset train;
    Dataset validation;
    Dataset holdout;  // whatever the two fractions leave over
};

// Per label (when stratified): seeded shuffle, then the first round(n * train)
// records go to train and the next round(n * validation) to validation. Each
// split keeps the input order. Throws SplitError if a label has fewer than 2 records.
DatasetSplit stratified_split(const Dataset& data, const SplitSpec& spec);

// ---- synthetic data -----------------------------------------------------------

// Fixed unit direction (independent of any run seed) separating the synthetic classes.
std::vector<double> synthetic_direction(std::size_t dim);

// Class means at +/- (separation / 2) * synthetic_direction(dim), isotropic unit
// noise, every vector then L2-normalized. Records alternate Real, Generated.
Dataset synthetic_gaussians(std::size_t n_per_class, std::size_t dim, double separation,
                            std::uint64_t seed);

}  // namespace kanmlp
