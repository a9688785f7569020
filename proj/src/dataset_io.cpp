#include "aemu/dataset_io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <json.hpp>

#include "aemu/errors.hpp"
#include "aemu/schema.hpp"

namespace aemu {

namespace {

constexpr char kMagic[5] = {'A', 'E', 'M', 'U', '1'};
constexpr int kColumns = kNumInputs + kNumOutputs;

// On-disk numbers are little-endian; this codebase targets little-endian
// hosts and the loader verifies the magic, so a byte-order mismatch fails
// loudly rather than silently.
static_assert(std::endian::native == std::endian::little,
              "dataset format assumes a little-endian host");

template <typename T>
void write_pod(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& path) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw DataError(path + ": truncated dataset file");
    return v;
}

std::string meta_to_json(const DatasetMeta& meta) {
    nlohmann::ordered_json j;
    j["id"] = meta.id;
    j["seed"] = meta.seed;
    if (!meta.params_json.empty()) j["params"] = nlohmann::ordered_json::parse(meta.params_json);
    return j.dump();
}

DatasetMeta meta_from_json(const std::string& text, const std::string& path) {
    DatasetMeta meta;
    if (text.empty()) return meta;
    try {
        const auto j = nlohmann::ordered_json::parse(text);
        meta.id = j.value("id", "");
        meta.seed = j.value("seed", std::uint64_t{0});
        if (j.contains("params")) meta.params_json = j.at("params").dump();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path + ": bad metadata block: " + e.what());
    }
    return meta;
}

void format_value(std::string& out, double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, res.ptr); // shortest round-trip representation
}

} // namespace

void save_dataset_binary(const Dataset& ds, const std::filesystem::path& path) {
    if (ds.inputs.cols != kNumInputs || ds.targets.cols != kNumOutputs ||
        ds.inputs.rows != ds.targets.rows)
        throw DataError("save_dataset: matrix shapes do not match the schema");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    out.write(kMagic, sizeof(kMagic));
    write_pod<std::uint32_t>(out, kDatasetVersion);
    write_pod<std::uint64_t>(out, schema_hash());
    write_pod<std::uint64_t>(out, ds.rows());
    const std::string meta = meta_to_json(ds.meta);
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(meta.size()));
    out.write(meta.data(), static_cast<std::streamsize>(meta.size()));
    for (std::size_t i = 0; i < ds.rows(); ++i) {
        out.write(reinterpret_cast<const char*>(ds.inputs.row(i)), kNumInputs * sizeof(double));
        out.write(reinterpret_cast<const char*>(ds.targets.row(i)), kNumOutputs * sizeof(double));
    }
    if (!out) throw DataError("write failed for '" + path.string() + "'");
}

Dataset load_dataset_binary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open dataset '" + path.string() + "'");
    char magic[5];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw DataError(path.string() + ": not an AEMU1 dataset");
    if (read_pod<std::uint32_t>(in, path.string()) != kDatasetVersion)
        throw DataError(path.string() + ": unsupported dataset version");
    if (read_pod<std::uint64_t>(in, path.string()) != schema_hash())
        throw DataError(path.string() + ": schema hash mismatch (stale or foreign dataset)");
    const std::uint64_t rows = read_pod<std::uint64_t>(in, path.string());
    if (rows == 0) throw DataError(path.string() + ": empty dataset");
    const std::uint32_t meta_len = read_pod<std::uint32_t>(in, path.string());
    std::string meta_text(meta_len, '\0');
    in.read(meta_text.data(), meta_len);
    if (!in) throw DataError(path.string() + ": truncated dataset file");

    Dataset ds;
    ds.meta = meta_from_json(meta_text, path.string());
    ds.inputs.resize(rows, kNumInputs);
    ds.targets.resize(rows, kNumOutputs);
    for (std::size_t i = 0; i < rows; ++i) {
        in.read(reinterpret_cast<char*>(ds.inputs.row(i)), kNumInputs * sizeof(double));
        in.read(reinterpret_cast<char*>(ds.targets.row(i)), kNumOutputs * sizeof(double));
    }
    if (!in) throw DataError(path.string() + ": payload shorter than the declared row count");
    // payload must end exactly at rows*60*8 bytes
    in.peek();
    if (!in.eof()) throw DataError(path.string() + ": trailing bytes after the payload");
    return ds;
}

void save_dataset_csv(const Dataset& ds, const std::filesystem::path& path) {
    if (ds.inputs.cols != kNumInputs || ds.targets.cols != kNumOutputs ||
        ds.inputs.rows != ds.targets.rows)
        throw DataError("save_dataset: matrix shapes do not match the schema");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");

    std::string text = "#meta " + meta_to_json(ds.meta) + "\n";
    const auto& cols = canonical_columns();
    for (int c = 0; c < kColumns; ++c) {
        if (c) text += ',';
        text += cols[c];
    }
    text += '\n';
    for (std::size_t i = 0; i < ds.rows(); ++i) {
        const double* x = ds.inputs.row(i);
        const double* y = ds.targets.row(i);
        for (int c = 0; c < kNumInputs; ++c) {
            if (c) text += ',';
            format_value(text, x[c]);
        }
        for (int c = 0; c < kNumOutputs; ++c) {
            text += ',';
            format_value(text, y[c]);
        }
        text += '\n';
        if (text.size() > (1u << 20)) {
            out.write(text.data(), static_cast<std::streamsize>(text.size()));
            text.clear();
        }
    }
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw DataError("write failed for '" + path.string() + "'");
}

Dataset load_dataset_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open dataset '" + path.string() + "'");

    std::string line;
    if (!std::getline(in, line)) throw DataError(path.string() + ": empty file");

    Dataset ds;
    if (line.rfind("#meta ", 0) == 0) {
        ds.meta = meta_from_json(line.substr(6), path.string());
        if (!std::getline(in, line)) throw DataError(path.string() + ": missing header row");
    }
    // header must match the canonical column list byte for byte
    std::string expected;
    const auto& cols = canonical_columns();
    for (int c = 0; c < kColumns; ++c) {
        if (c) expected += ',';
        expected += cols[c];
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != expected)
        throw SchemaError(path.string() + ": CSV header does not match the canonical columns");
    if (ds.meta.id.empty()) ds.meta.id = "csv:" + path.filename().string();

    std::vector<double> values;
    values.reserve(1u << 16);
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const char* p = line.data();
        const char* endp = p + line.size();
        int count = 0;
        while (true) {
            double v;
            const auto res = std::from_chars(p, endp, v);
            if (res.ec != std::errc())
                throw DataError(path.string() + ": bad number in row " + std::to_string(rows + 1));
            values.push_back(v);
            ++count;
            p = res.ptr;
            if (p == endp) break;
            if (*p != ',')
                throw DataError(path.string() + ": expected ',' in row " + std::to_string(rows + 1));
            ++p;
        }
        if (count != kColumns)
            throw DataError(path.string() + ": row " + std::to_string(rows + 1) + " has " +
                            std::to_string(count) + " columns, expected 60");
        ++rows;
    }
    if (rows == 0) throw DataError(path.string() + ": no data rows");

    ds.inputs.resize(rows, kNumInputs);
    ds.targets.resize(rows, kNumOutputs);
    for (std::size_t i = 0; i < rows; ++i) {
        const double* src = values.data() + i * kColumns;
        std::copy(src, src + kNumInputs, ds.inputs.row(i));
        std::copy(src + kNumInputs, src + kColumns, ds.targets.row(i));
    }
    return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
    if (path.extension() == ".csv")
        save_dataset_csv(ds, path);
    else
        save_dataset_binary(ds, path);
}

Dataset load_dataset(const std::filesystem::path& path) {
    if (path.extension() == ".csv") return load_dataset_csv(path);
    return load_dataset_binary(path);
}

} // namespace aemu
