#include "kanmlp/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>

#include "json.hpp"
#include "kanmlp/byte_io.hpp"
#include "kanmlp/error.hpp"

namespace kanmlp {

Matrix feature_matrix(const Dataset& data) {
    Matrix x(data.size(), data.dim);
    for (std::size_t r = 0; r < data.size(); ++r) {
        std::copy(data.records[r].embedding.begin(), data.records[r].embedding.end(),
                  x.row(r).begin());
    }
    return x;
}

Matrix feature_matrix(const Dataset& data, std::span<const std::size_t> rows) {
    Matrix x(rows.size(), data.dim);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& e = data.records[rows[r]].embedding;
        std::copy(e.begin(), e.end(), x.row(r).begin());
    }
    return x;
}

std::vector<int> label_vector(const Dataset& data) {
    std::vector<int> y(data.size());
    for (std::size_t r = 0; r < data.size(); ++r) y[r] = data.records[r].label;
    return y;
}

std::string label_name(int label) {
    if (label == kReal) return "real";
    if (label == kGenerated) return "generated";
    throw InputError("label " + std::to_string(label) + " is not 0 (real) or 1 (generated)");
}

int parse_label(const std::string& name) {
    if (name == "real") return kReal;
    if (name == "generated") return kGenerated;
    throw InputError("unknown label '" + name + "' (expected 'real' or 'generated')");
}

void validate_record(const EmbeddingRecord& record, std::size_t dim) {
    if (record.embedding.size() != dim) {
        throw DimensionError("record '" + record.id + "' has " +
                             std::to_string(record.embedding.size()) + " values, expected " +
                             std::to_string(dim));
    }
    if (!all_finite(record.embedding)) {
        throw InputError("record '" + record.id + "' has non-finite embedding values");
    }
    if (record.label != kReal && record.label != kGenerated) {
        throw InputError("record '" + record.id + "' has label " + std::to_string(record.label));
    }
}

std::vector<std::string> norm_warnings(const Dataset& data, double tolerance) {
    std::vector<std::string> out;
    for (const auto& r : data.records) {
        double sq = 0.0;
        for (double v : r.embedding) sq += v * v;
        const double norm = std::sqrt(sq);
        if (std::abs(norm - 1.0) > tolerance) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.6g", norm);
            out.push_back("record '" + r.id + "' has L2 norm " + buf + " (expected 1)");
        }
    }
    return out;
}

// ---- text format -------------------------------------------------------------

Dataset load_jsonl(const std::string& path, std::size_t dim) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open dataset " + path);
    Dataset data;
    data.dim = dim;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto where = [&] { return path + ":" + std::to_string(line_no) + ": "; };
        EmbeddingRecord rec;
        try {
            const auto j = nlohmann::json::parse(line);
            rec.id = j.at("id").get<std::string>();
            rec.label = parse_label(j.at("label").get<std::string>());
            rec.source = j.at("source").get<std::string>();
            const auto& emb = j.at("embedding");
            if (!emb.is_array()) throw FormatError("embedding is not an array");
            rec.embedding.reserve(emb.size());
            for (const auto& v : emb) {
                if (!v.is_number()) throw FormatError("embedding holds a non-number");
                rec.embedding.push_back(v.get<double>());
            }
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(where() + "malformed record: " + e.what());
        } catch (const FormatError& e) {
            throw FormatError(where() + e.what());
        } catch (const InputError& e) {
            throw FormatError(where() + e.what());
        }
        if (data.dim == 0) data.dim = rec.embedding.size();
        try {
            validate_record(rec, data.dim);
        } catch (const DimensionError& e) {
            throw DimensionError(where() + e.what());
        }
        data.records.push_back(std::move(rec));
    }
    if (data.dim == 0) data.dim = kEmbeddingDim;
    return data;
}

void write_jsonl(const Dataset& data, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw InputError("cannot write dataset " + path);
    for (const auto& r : data.records) {
        validate_record(r, data.dim);
        nlohmann::ordered_json j;
        j["id"] = r.id;
        j["label"] = label_name(r.label);
        j["source"] = r.source;
        j["embedding"] = r.embedding;
        out << j.dump() << '\n';
    }
    if (!out) throw InputError("failed writing dataset " + path);
}

// ---- binary format -----------------------------------------------------------

namespace {

constexpr std::string_view kDatasetMagic = "KEMB";

void put_string16(ByteWriter& w, const std::string& s, const char* what) {
    if (s.size() > 0xFFFF) throw InputError(std::string(what) + " longer than 65535 bytes: " + s);
    w.u16(static_cast<std::uint16_t>(s.size()));
    w.raw(s);
}

}  // namespace

std::vector<std::uint8_t> encode_bin(const Dataset& data) {
    if (data.dim > 0xFFFFFFFFu) throw InputError("dimension does not fit in 32 bits");
    ByteWriter w;
    w.raw(kDatasetMagic);
    w.u16(kDatasetFormatVersion);
    w.u32(static_cast<std::uint32_t>(data.dim));
    w.u64(data.size());
    for (const auto& r : data.records) {
        validate_record(r, data.dim);
        put_string16(w, r.id, "record id");
        w.u8(static_cast<std::uint8_t>(r.label));
        put_string16(w, r.source, "source tag");
        for (double v : r.embedding) w.f32(static_cast<float>(v));
    }
    return std::move(w).take();
}

Dataset decode_bin(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    if (bytes.size() < kDatasetMagic.size() ||
        r.raw(kDatasetMagic.size(), "magic") != kDatasetMagic) {
        throw FormatError("not an embedding file: bad magic at byte offset 0");
    }
    const std::size_t version_at = r.offset();
    const std::uint16_t version = r.u16();
    if (version != kDatasetFormatVersion) {
        throw FormatError("unsupported embedding format version " + std::to_string(version) +
                          " at byte offset " + std::to_string(version_at));
    }
    Dataset data;
    data.dim = r.u32();
    const std::uint64_t count = r.u64();
    // Every record needs at least 5 header bytes plus 4 per value.
    const std::uint64_t min_record = 5 + 4 * static_cast<std::uint64_t>(data.dim);
    if (count > r.remaining() / min_record + 1) {
        r.fail("record count " + std::to_string(count) + " exceeds what the file can hold");
    }
    data.records.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        EmbeddingRecord rec;
        rec.id = r.raw(r.u16(), "record id");
        const std::size_t label_at = r.offset();
        rec.label = r.u8();
        if (rec.label != kReal && rec.label != kGenerated) {
            throw FormatError("record '" + rec.id + "' has label byte " + std::to_string(rec.label) +
                              " at byte offset " + std::to_string(label_at));
        }
        rec.source = r.raw(r.u16(), "source tag");
        rec.embedding.resize(data.dim);
        for (auto& v : rec.embedding) v = static_cast<double>(r.f32());
        if (!all_finite(rec.embedding)) r.fail("record '" + rec.id + "' has non-finite values");
        data.records.push_back(std::move(rec));
    }
    if (r.remaining() != 0) r.fail("trailing bytes after the last record");
    return data;
}

Dataset load_bin(const std::string& path) {
    const auto bytes = read_file_bytes(path);
    try {
        return decode_bin(bytes);
    } catch (const FormatError& e) {
        throw FormatError(path + ": " + e.what());
    }
}

void write_bin(const Dataset& data, const std::string& path) {
    write_file_bytes(path, encode_bin(data));
}

Dataset load_dataset(const std::string& path, std::size_t dim) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open dataset " + path);
    char magic[4] = {};
    in.read(magic, 4);
    if (in.gcount() == 4 && std::string_view(magic, 4) == kDatasetMagic) {
        Dataset data = load_bin(path);
        if (dim != 0 && data.dim != dim) {
            throw DimensionError(path + ": embeddings have dimension " + std::to_string(data.dim) +
                                 ", expected " + std::to_string(dim));
        }
        return data;
    }
    return load_jsonl(path, dim);
}

void write_dataset(const Dataset& data, const std::string& path) {
    const auto ends_with = [&](std::string_view suffix) {
        return path.size() >= suffix.size() &&
               path.compare(path.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    if (ends_with(".bin") || ends_with(".kemb")) {
        write_bin(data, path);
    } else {
        write_jsonl(data, path);
    }
}

// ---- manifests and splits ----------------------------------------------------

void SplitSpec::validate() const {
    if (!(train_fraction > 0.0) || !(validation_fraction >= 0.0) ||
        train_fraction + validation_fraction > 1.0 + 1e-12) {
        throw InputError("split fractions must satisfy train > 0, validation >= 0, sum <= 1");
    }
}

DatasetManifest summarize(const Dataset& data) {
    DatasetManifest m;
    for (const auto& r : data.records) {
        ++m.per_source[r.source];
        (r.label == kGenerated ? m.generated : m.real) += 1;
        ++m.total;
    }
    return m;
}

void print_manifest(const DatasetManifest& manifest, std::ostream& out) {
    std::size_t width = 9;
    for (const auto& [source, _] : manifest.per_source) width = std::max(width, source.size());
    const auto row = [&](const std::string& name, std::size_t count) {
        out << std::left << std::setw(static_cast<int>(width) + 2) << name << std::right
            << std::setw(8) << count << '\n';
    };
    out << std::left << std::setw(static_cast<int>(width) + 2) << "source" << std::right
        << std::setw(8) << "images" << '\n';
    for (const auto& [source, count] : manifest.per_source) row(source, count);
    out << std::string(width + 10, '-') << '\n';
    row("real", manifest.real);
    row("generated", manifest.generated);
    row("total", manifest.total);
    if (manifest.split) {
        out << "split: train " << manifest.split->train_fraction << ", validation "
            << manifest.split->validation_fraction << ", seed " << manifest.split->seed
            << (manifest.split->stratify ? ", stratified" : "") << '\n';
    }
}

DatasetSplit stratified_split(const Dataset& data, const SplitSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    std::vector<std::vector<std::size_t>> groups;
    if (spec.stratify) {
        groups.resize(2);
        for (std::size_t i = 0; i < data.size(); ++i)
            groups[static_cast<std::size_t>(data.records[i].label)].push_back(i);
        for (int label : {kReal, kGenerated}) {
            if (groups[static_cast<std::size_t>(label)].size() < 2) {
                throw SplitError("cannot stratify: label '" + label_name(label) + "' has " +
                                 std::to_string(groups[static_cast<std::size_t>(label)].size()) +
                                 " records (need at least 2)");
            }
        }
    } else {
        groups.emplace_back(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) groups[0][i] = i;
    }

    std::vector<std::size_t> train, validation, holdout;
    for (auto& group : groups) {
        shuffle(std::span(group), rng);
        const double n = static_cast<double>(group.size());
        const auto n_train = std::min(group.size(), static_cast<std::size_t>(std::llround(n * spec.train_fraction)));
        const auto n_val = std::min(group.size() - n_train,
                                    static_cast<std::size_t>(std::llround(n * spec.validation_fraction)));
        train.insert(train.end(), group.begin(), group.begin() + static_cast<std::ptrdiff_t>(n_train));
        validation.insert(validation.end(), group.begin() + static_cast<std::ptrdiff_t>(n_train),
                          group.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
        holdout.insert(holdout.end(), group.begin() + static_cast<std::ptrdiff_t>(n_train + n_val),
                       group.end());
    }

    const auto take = [&](std::vector<std::size_t>& idx) {
        std::sort(idx.begin(), idx.end());
        Dataset d;
        d.dim = data.dim;
        d.records.reserve(idx.size());
        for (auto i : idx) d.records.push_back(data.records[i]);
        return d;
    };
    return {take(train), take(validation), take(holdout)};
}

// ---- synthetic data ----------------------------------------------------------

namespace {

void normalize(std::vector<double>& v) {
    double sq = 0.0;
    for (double x : v) sq += x * x;
    const double inv = 1.0 / std::sqrt(sq);
    for (double& x : v) x *= inv;
}

}  // namespace

std::vector<double> synthetic_direction(std::size_t dim) {
    Rng rng(0x4B414E2D4D4C50ULL);
    auto u = rng_normal(rng, dim, 0.0, 1.0);
    normalize(u);
    return u;
}

Dataset synthetic_gaussians(std::size_t n_per_class, std::size_t dim, double separation,
                            std::uint64_t seed) {
    if (!(separation >= 0.0)) throw InputError("separation must be non-negative");
    if (dim == 0) throw InputError("synthetic dimension must be positive");
    const auto u = synthetic_direction(dim);
    Rng rng(seed);
    Dataset data;
    data.dim = dim;
    data.records.reserve(2 * n_per_class);
    for (std::size_t i = 0; i < n_per_class; ++i) {
        for (int label : {kReal, kGenerated}) {
            const double shift = (label == kGenerated ? 0.5 : -0.5) * separation;
            auto v = rng_normal(rng, dim, 0.0, 1.0);
            for (std::size_t d = 0; d < dim; ++d) v[d] += shift * u[d];
            normalize(v);
            char id[32];
            std::snprintf(id, sizeof id, "syn-%06zu", data.records.size());
            data.records.push_back({id, label, "synthetic", std::move(v)});
        }
    }
    return data;
}

}  // namespace kanmlp
