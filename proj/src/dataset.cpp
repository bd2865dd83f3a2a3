#include "arim/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "arim/binary_io.hpp"
#include "arim/error.hpp"
#include "arim/parallel.hpp"

namespace arim {

namespace {

constexpr char kRecordMagic[] = "ARIM2";

// Index lists are written as comma-separated runs, "a-b" for consecutive spans.
std::string encode_indices(const std::vector<std::size_t>& idx) {
    std::string out;
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && idx[j + 1] == idx[j] + 1) ++j;
        if (!out.empty()) out += ',';
        out += std::to_string(idx[i]);
        if (j > i) out += '-' + std::to_string(idx[j]);
        i = j + 1;
    }
    return out;
}

std::vector<std::size_t> decode_indices(const std::string& text, const std::string& key) {
    std::vector<std::size_t> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find(',', pos);
        if (end == std::string::npos) end = text.size();
        std::string tok = text.substr(pos, end - pos);
        tok.erase(0, tok.find_first_not_of(" \t"));
        tok.erase(tok.find_last_not_of(" \t") + 1);
        if (!tok.empty()) {
            try {
                const auto dash = tok.find('-');
                const std::size_t a = std::stoull(tok.substr(0, dash));
                const std::size_t b = dash == std::string::npos ? a : std::stoull(tok.substr(dash + 1));
                if (b < a) throw ConfigError("descending run");
                for (std::size_t v = a; v <= b; ++v) out.push_back(v);
            } catch (const std::exception&) {
                throw ConfigError("malformed index list for '" + key + "': '" + tok + "'");
            }
        }
        pos = end + 1;
    }
    return out;
}

float f32(double v) { return static_cast<float>(v); }

} // namespace

std::string record_file_name(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "sample_%06zu.bin", index);
    return buf;
}

std::filesystem::path DatasetManifest::record_path(std::size_t index) const {
    return root / record_file_name(index);
}

void DatasetManifest::validate_split() const {
    std::vector<std::uint8_t> seen(sample_count, 0);
    for (const auto* list : {&train, &validation, &test}) {
        for (std::size_t i : *list) {
            if (i >= sample_count) throw ConfigError("split index " + std::to_string(i) + " out of range");
            if (seen[i]++) throw ConfigError("split index " + std::to_string(i) + " appears twice");
        }
    }
    if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
        throw ConfigError("split does not cover every sample");
    }
}

KeyValueConfig DatasetManifest::to_config() const {
    KeyValueConfig kv;
    generation.write_to(kv);
    stft.write_to(kv);
    kv.set("format", "arim-dataset");
    kv.set("version", std::to_string(version));
    kv.set("base_seed", std::to_string(base_seed));
    kv.set("sample_count", std::to_string(sample_count));
    kv.set("test_fraction", format_double(test_fraction));
    kv.set("split_train", encode_indices(train));
    kv.set("split_validation", encode_indices(validation));
    kv.set("split_test", encode_indices(test));
    return kv;
}

DatasetManifest DatasetManifest::from_config(const KeyValueConfig& kv) {
    DatasetManifest m;
    if (kv.get_string("format").value_or("arim-dataset") != "arim-dataset") {
        throw FormatError("not a dataset manifest");
    }
    m.version = static_cast<std::uint32_t>(kv.get_int_or("version", kManifestVersion));
    if (m.version != kManifestVersion) {
        throw FormatError("unsupported manifest version " + std::to_string(m.version));
    }
    m.generation = GenerationConfig::from_config(kv);
    m.stft = StftConfig::from_config(kv);
    m.base_seed = static_cast<std::uint64_t>(kv.get_int_or("base_seed", 0));
    const long long count = kv.get_int_or("sample_count", 0);
    if (count < 0) throw ConfigError("sample_count must be non-negative");
    m.sample_count = static_cast<std::size_t>(count);
    m.test_fraction = kv.get_double_or("test_fraction", m.test_fraction);
    m.train = decode_indices(kv.get_string("split_train").value_or(""), "split_train");
    m.validation = decode_indices(kv.get_string("split_validation").value_or(""), "split_validation");
    m.test = decode_indices(kv.get_string("split_test").value_or(""), "split_test");
    return m;
}

void DatasetManifest::save(const std::filesystem::path& path) const { to_config().save(path); }

DatasetManifest DatasetManifest::load(const std::filesystem::path& path) {
    const auto file = std::filesystem::is_directory(path) ? path / kManifestFileName : path;
    DatasetManifest m = from_config(KeyValueConfig::load(file));
    m.root = file.parent_path();
    if (!m.train.empty() || !m.validation.empty() || !m.test.empty()) m.validate_split();
    return m;
}

// ---------------------------------------------------------------------------
// Records

void write_sample(const std::filesystem::path& path, const ScenarioSample& s) {
    using namespace binary;
    if (s.clean_signal.size() != s.interfered_signal.size()) {
        throw ShapeError("write_sample: clean and interfered signals differ in length");
    }
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw PersistenceError("cannot write record " + tmp);
        write_bytes(out, kRecordMagic, 5);
        write_u32(out, kRecordVersion);
        write_u32(out, static_cast<std::uint32_t>(s.clean_signal.size()));
        for (const auto* sig : {&s.clean_signal, &s.interfered_signal}) {
            for (const auto& z : *sig) {
                write_f32(out, f32(z.real()));
                write_f32(out, f32(z.imag()));
            }
        }
        write_u32(out, static_cast<std::uint32_t>(s.targets.size()));
        for (const auto& t : s.targets) {
            write_f32(out, f32(t.distance_m));
            write_f32(out, f32(t.amplitude));
            write_f32(out, f32(t.phase_rad));
        }
        write_u32(out, static_cast<std::uint32_t>(s.interferers.size()));
        for (const auto& i : s.interferers) {
            write_f32(out, f32(i.slope_ratio));
            write_f32(out, f32(i.sir_db));
            write_f32(out, f32(i.center_time_s));
            write_f32(out, f32(i.phase_rad));
        }
        write_f32(out, f32(s.snr_db));
        if (!out) throw PersistenceError("write failed for record " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw PersistenceError("cannot move record into place at " + path.string() + ": " + ec.message());
}

ScenarioSample read_sample_file(const std::filesystem::path& path) {
    using namespace binary;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw PersistenceError("cannot open record " + path.string());
    const std::string what = "record " + path.string();
    expect_magic(in, kRecordMagic, what);
    const auto version = read_u32(in, what);
    if (version != kRecordVersion) {
        throw FormatError("unsupported version " + std::to_string(version) + " in " + what);
    }
    const auto n = read_u32(in, what);
    if (n > (1u << 24)) throw FormatError("implausible signal length in " + what);
    ScenarioSample s;
    for (auto* sig : {&s.clean_signal, &s.interfered_signal}) {
        sig->resize(n);
        for (auto& z : *sig) {
            const double re = read_f32(in, what);
            const double im = read_f32(in, what);
            z = {re, im};
        }
    }
    const auto nt = read_u32(in, what);
    if (nt > 4096) throw FormatError("implausible target count in " + what);
    s.targets.resize(nt);
    for (auto& t : s.targets) {
        t.distance_m = read_f32(in, what);
        t.amplitude = read_f32(in, what);
        t.phase_rad = read_f32(in, what);
    }
    const auto ni = read_u32(in, what);
    if (ni > 4096) throw FormatError("implausible interferer count in " + what);
    s.interferers.resize(ni);
    for (auto& i : s.interferers) {
        i.slope_ratio = read_f32(in, what);
        i.sir_db = read_f32(in, what);
        i.center_time_s = read_f32(in, what);
        i.phase_rad = read_f32(in, what);
    }
    s.snr_db = read_f32(in, what);
    return s;
}

namespace {

// Kept out of line: GCC 11's SLP vectorizer drops the narrowing when this is
// inlined into consecutive struct-field stores.
[[gnu::noinline]] double round_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

} // namespace

ScenarioSample quantize_sample(const ScenarioSample& s) {
    ScenarioSample q = s;
    const auto r = round_f32;
    for (auto* sig : {&q.clean_signal, &q.interfered_signal}) {
        for (auto& z : *sig) z = {r(z.real()), r(z.imag())};
    }
    for (auto& t : q.targets) {
        t.distance_m = r(t.distance_m);
        t.amplitude = r(t.amplitude);
        t.phase_rad = r(t.phase_rad);
    }
    for (auto& i : q.interferers) {
        i.slope_ratio = r(i.slope_ratio);
        i.sir_db = r(i.sir_db);
        i.center_time_s = r(i.center_time_s);
        i.phase_rad = r(i.phase_rad);
    }
    q.snr_db = r(q.snr_db);
    return q;
}

ScenarioSample regenerate_sample(const DatasetManifest& manifest, std::size_t index) {
    Rng rng(sample_seed(manifest.base_seed, index));
    return sample_scenario(manifest.generation, rng);
}

// ---------------------------------------------------------------------------
// Generation and splits

namespace {

void write_all(DatasetManifest& m, const std::filesystem::path& out_dir) {
    if (m.sample_count == 0) throw ConfigError("sample_count must be at least 1");
    m.generation.validate();
    m.stft.validate(m.generation.radar.samples_per_chirp());
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec || !std::filesystem::is_directory(out_dir)) {
        throw PersistenceError("cannot create output directory " + out_dir.string());
    }
    m.root = out_dir;
    parallel_for(m.sample_count, [&](std::size_t i) { write_sample(m.record_path(i), regenerate_sample(m, i)); });
    m.validate_split();
    m.save(out_dir / kManifestFileName);
}

} // namespace

DatasetManifest generate_dataset(DatasetManifest manifest, const std::filesystem::path& out_dir) {
    if (!(manifest.test_fraction >= 0 && manifest.test_fraction <= 1)) {
        throw ConfigError("test_fraction must be in [0, 1]");
    }
    const auto n = manifest.sample_count;
    const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * manifest.test_fraction));
    manifest.train.resize(n - n_test);
    std::iota(manifest.train.begin(), manifest.train.end(), std::size_t{0});
    manifest.validation.clear();
    manifest.test.resize(n_test);
    std::iota(manifest.test.begin(), manifest.test.end(), n - n_test);
    write_all(manifest, out_dir);
    return manifest;
}

DatasetManifest split_dataset(DatasetManifest manifest, double validation_fraction, std::uint64_t seed) {
    if (!(validation_fraction >= 0 && validation_fraction < 1)) {
        throw ConfigError("validation_fraction must be in [0, 1)");
    }
    std::vector<std::size_t> pool = manifest.train;
    pool.insert(pool.end(), manifest.validation.begin(), manifest.validation.end());
    std::sort(pool.begin(), pool.end());
    Rng rng(seed);
    for (std::size_t i = pool.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
        std::swap(pool[i - 1], pool[j]);
    }
    const auto n_val = static_cast<std::size_t>(std::floor(validation_fraction * static_cast<double>(pool.size())));
    manifest.validation.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_val));
    manifest.train.assign(pool.begin() + static_cast<std::ptrdiff_t>(n_val), pool.end());
    std::sort(manifest.validation.begin(), manifest.validation.end());
    std::sort(manifest.train.begin(), manifest.train.end());
    return manifest;
}

ScenarioSample read_sample(const DatasetManifest& manifest, std::size_t index) {
    if (index >= manifest.sample_count) {
        throw RangeError("sample index " + std::to_string(index) + " out of range [0, " +
                         std::to_string(manifest.sample_count) + ")");
    }
    return read_sample_file(manifest.record_path(index));
}

std::vector<ScenarioSample> read_samples(const DatasetManifest& manifest, std::span<const std::size_t> indices) {
    std::vector<ScenarioSample> out(indices.size());
    parallel_for(indices.size(), [&](std::size_t i) { out[i] = read_sample(manifest, indices[i]); });
    return out;
}

DatasetManifest generate_ood_testset(DatasetManifest manifest, const std::vector<int>& interferer_counts,
                                     std::size_t count, const std::filesystem::path& out_dir) {
    manifest.generation.interferer_counts = interferer_counts;
    manifest.sample_count = count;
    manifest.test_fraction = 1.0;
    manifest.train.clear();
    manifest.validation.clear();
    manifest.test.resize(count);
    std::iota(manifest.test.begin(), manifest.test.end(), std::size_t{0});
    write_all(manifest, out_dir);
    return manifest;
}

} // namespace arim
