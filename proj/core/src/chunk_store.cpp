#include "intra/chunk_store.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <unordered_set>

#include "intra/binio.hpp"
#include "intra/error.hpp"

namespace intra {

namespace {

constexpr char kPoolMagic[8] = {'I', 'N', 'T', 'R', 'A', 'P', 'L', '1'};
constexpr uint32_t kPoolVersion = 1;
constexpr size_t kHeaderBytes = 8 + 4 + 1 + 4 + 4 + 8 + 8;
constexpr size_t kDirEntryBytes = 8 + 4 + 8 + 8;

size_t row_bytes(Precision p, int d) { return p == Precision::f32 ? 4u * d : 4u + static_cast<size_t>(d); }

void put_row(ByteWriter& out, const Eigen::Ref<const Eigen::RowVectorXd>& row, Precision p) {
    if (p == Precision::f32) {
        for (Eigen::Index j = 0; j < row.size(); ++j) out.put<float>(static_cast<float>(row[j]));
        return;
    }
    const QuantizedRow q = quantize_row(row);
    out.put<float>(q.scale);
    out.put_bytes(q.values.data(), q.values.size());
}

void get_row(ByteReader& in, Eigen::Ref<Eigen::RowVectorXd> row, Precision p) {
    if (p == Precision::f32) {
        for (Eigen::Index j = 0; j < row.size(); ++j) row[j] = static_cast<double>(in.get<float>());
        return;
    }
    QuantizedRow q;
    q.scale = in.get<float>();
    q.values.resize(static_cast<size_t>(row.size()));
    in.get_bytes(q.values.data(), q.values.size());
    row = dequantize_row(q);
}

}  // namespace

size_t ChunkPool::index_of(int64_t id) const {
    auto it = lookup_.find(id);
    if (it == lookup_.end()) fail(Errc::data, "chunk id " + std::to_string(id) + " is not in the pool");
    return it->second;
}

void ChunkPool::rebuild_lookup() {
    lookup_.clear();
    for (size_t i = 0; i < ids.size(); ++i) {
        if (!lookup_.emplace(ids[i], i).second) fail(Errc::data, "duplicate chunk id " + std::to_string(ids[i]));
    }
}

Mat encode_chunk(const ModelWeights& model, const std::vector<int>& tokens) {
    Mat kbar = rms_norm_rows(encode(model, tokens), model.cfg.rmsnorm_eps);
    round_to_f32(kbar);
    return kbar;
}

ChunkPool build_pool(const std::vector<Chunk>& chunks, const ModelWeights& model) {
    ChunkPool pool;
    pool.d = model.cfg.d;
    std::unordered_set<int64_t> seen;
    size_t n = 0;
    for (const auto& c : chunks) {
        require(!c.tokens.empty(), Errc::data, "chunk " + std::to_string(c.id) + " is empty");
        require(seen.insert(c.id).second, Errc::data, "duplicate chunk id " + std::to_string(c.id));
        n += c.tokens.size();
    }
    pool.rows.resize(static_cast<Eigen::Index>(n), pool.d);
    pool.offsets.assign(1, 0);
    for (const auto& c : chunks) {
        const Mat kbar = encode_chunk(model, c.tokens);
        pool.rows.middleRows(static_cast<Eigen::Index>(pool.offsets.back()), kbar.rows()) = kbar;
        pool.ids.push_back(c.id);
        pool.offsets.push_back(pool.offsets.back() + static_cast<size_t>(kbar.rows()));
    }
    pool.rebuild_lookup();
    return pool;
}

std::vector<int> segment_sizes(int L_c, int L_p) {
    require(L_c >= 1 && L_p >= 1, Errc::config, "segment_sizes: lengths must be >= 1");
    const int n = std::min(L_p, L_c);
    std::vector<int> s(n, L_c / n);
    for (int j = 0; j < L_c % n; ++j) ++s[j];
    return s;
}

Mat mean_pool(const Mat& kbar, int L_p) {
    const auto sizes = segment_sizes(static_cast<int>(kbar.rows()), L_p);
    Mat out(static_cast<Eigen::Index>(sizes.size()), kbar.cols());
    Eigen::Index start = 0;
    for (size_t j = 0; j < sizes.size(); ++j) {
        out.row(static_cast<Eigen::Index>(j)) = kbar.middleRows(start, sizes[j]).colwise().mean();
        start += sizes[j];
    }
    return out;
}

PooledIndex build_pooled(const ChunkPool& pool, int L_p) {
    require(L_p >= 1, Errc::config, "L_p must be >= 1");
    PooledIndex idx;
    idx.L_p = L_p;
    idx.offsets.assign(1, 0);
    for (size_t i = 0; i < pool.M(); ++i)
        idx.offsets.push_back(idx.offsets.back() + std::min<size_t>(static_cast<size_t>(L_p), pool.length(i)));
    idx.rows.resize(static_cast<Eigen::Index>(idx.offsets.back()), pool.d);
    for (size_t i = 0; i < pool.M(); ++i) {
        Mat p = mean_pool(pool.chunk_rows(i), L_p);
        round_to_f32(p);
        idx.rows.middleRows(static_cast<Eigen::Index>(idx.offsets[i]), p.rows()) = p;
    }
    return idx;
}

QuantizedRow quantize_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
    require(row.allFinite(), Errc::non_finite, "quantize_row: non-finite value");
    QuantizedRow q;
    const double mx = row.size() ? row.cwiseAbs().maxCoeff() : 0.0;
    q.scale = mx > 0.0 ? static_cast<float>(mx / 127.0) : 1.0f;
    q.values.resize(static_cast<size_t>(row.size()));
    for (Eigen::Index j = 0; j < row.size(); ++j) {
        double v = std::nearbyint(row[j] / static_cast<double>(q.scale));  // ties to even
        v = std::clamp(v, -127.0, 127.0);
        q.values[static_cast<size_t>(j)] = static_cast<int8_t>(v);
    }
    return q;
}

Eigen::RowVectorXd dequantize_row(const QuantizedRow& q) {
    Eigen::RowVectorXd r(static_cast<Eigen::Index>(q.values.size()));
    for (size_t j = 0; j < q.values.size(); ++j)
        r[static_cast<Eigen::Index>(j)] = static_cast<double>(q.scale) * q.values[j];
    return r;
}

Precision parse_precision(const std::string& s) {
    if (s == "f32") return Precision::f32;
    if (s == "int8") return Precision::int8;
    fail(Errc::config, "unknown precision '" + s + "' (expected f32 or int8)");
}

const char* precision_name(Precision p) { return p == Precision::f32 ? "f32" : "int8"; }

void save_pool(const ChunkPool& pool, const PooledIndex& pooled, const std::string& path, Precision precision) {
    require(pooled.M() == pool.M(), Errc::internal, "pooled index does not match pool");
    const size_t M = pool.M(), rb = row_bytes(precision, pool.d);
    ByteWriter out;
    out.put_bytes(kPoolMagic, 8);
    out.put<uint32_t>(kPoolVersion);
    out.put<uint8_t>(static_cast<uint8_t>(precision));
    out.put<uint32_t>(static_cast<uint32_t>(pool.d));
    out.put<uint32_t>(static_cast<uint32_t>(pooled.L_p));
    out.put<uint64_t>(M);
    out.put<uint64_t>(pool.N());
    const uint64_t full_base = kHeaderBytes + M * kDirEntryBytes;
    const uint64_t pooled_base = full_base + pool.N() * rb;
    for (size_t i = 0; i < M; ++i) {
        out.put<uint64_t>(static_cast<uint64_t>(pool.ids[i]));
        out.put<uint32_t>(static_cast<uint32_t>(pool.length(i)));
        out.put<uint64_t>(full_base + pool.offsets[i] * rb);
        out.put<uint64_t>(pooled_base + pooled.offsets[i] * rb);
    }
    for (Eigen::Index r = 0; r < pool.rows.rows(); ++r) put_row(out, pool.rows.row(r), precision);
    for (Eigen::Index r = 0; r < pooled.rows.rows(); ++r) put_row(out, pooled.rows.row(r), precision);
    write_file_atomic(path, out.bytes().data(), out.size());
}

LoadedPool load_pool(const std::string& path) {
    ByteReader in(read_file(path));
    if (in.size() < 8) fail(Errc::truncated, "pool file " + path + " is truncated");
    char magic[8];
    in.get_bytes(magic, 8);
    if (std::memcmp(magic, kPoolMagic, 8) != 0) fail(Errc::bad_magic, "bad magic in pool file " + path);
    const auto version = in.get<uint32_t>();
    if (version != kPoolVersion) fail(Errc::bad_version, "unsupported pool version " + std::to_string(version));
    const auto dtype = in.get<uint8_t>();
    require(dtype <= 1, Errc::data, "unknown pool dtype " + std::to_string(dtype));
    LoadedPool lp;
    lp.precision = static_cast<Precision>(dtype);
    const auto d = in.get<uint32_t>();
    const auto L_p = in.get<uint32_t>();
    const auto M = in.get<uint64_t>();
    const auto N = in.get<uint64_t>();
    require(d >= 1 && L_p >= 1, Errc::data, "pool header has zero d or L_p");
    const size_t rb = row_bytes(lp.precision, static_cast<int>(d));
    if (M > in.size() / kDirEntryBytes) fail(Errc::truncated, "pool directory is truncated");

    std::vector<uint32_t> lens(M);
    std::vector<uint64_t> full_off(M), pooled_off(M);
    auto& pool = lp.pool;
    pool.d = static_cast<int>(d);
    pool.ids.resize(M);
    pool.offsets.assign(1, 0);
    lp.pooled.L_p = static_cast<int>(L_p);
    lp.pooled.offsets.assign(1, 0);
    for (size_t i = 0; i < M; ++i) {
        pool.ids[i] = static_cast<int64_t>(in.get<uint64_t>());
        lens[i] = in.get<uint32_t>();
        require(lens[i] >= 1, Errc::data, "pool directory has an empty chunk");
        full_off[i] = in.get<uint64_t>();
        pooled_off[i] = in.get<uint64_t>();
        pool.offsets.push_back(pool.offsets.back() + lens[i]);
        lp.pooled.offsets.push_back(lp.pooled.offsets.back() + std::min<size_t>(L_p, lens[i]));
    }
    require(pool.offsets.back() == N, Errc::data, "pool token count does not match header");
    const uint64_t pooled_rows = lp.pooled.offsets.back();
    if (in.pos() + (N + pooled_rows) * rb > in.size()) fail(Errc::truncated, "pool payload is truncated");

    pool.rows.resize(static_cast<Eigen::Index>(N), d);
    lp.pooled.rows.resize(static_cast<Eigen::Index>(pooled_rows), d);
    for (size_t i = 0; i < M; ++i) {
        in.seek(full_off[i]);
        for (size_t r = pool.offsets[i]; r < pool.offsets[i + 1]; ++r)
            get_row(in, pool.rows.row(static_cast<Eigen::Index>(r)), lp.precision);
        in.seek(pooled_off[i]);
        for (size_t r = lp.pooled.offsets[i]; r < lp.pooled.offsets[i + 1]; ++r)
            get_row(in, lp.pooled.rows.row(static_cast<Eigen::Index>(r)), lp.precision);
    }
    pool.rebuild_lookup();
    return lp;
}

double storage_bytes(double N, int d, int bytes_per_element) { return N * d * bytes_per_element; }

double kv_compression_ratio(int layers, int n_kv, int d_h, int d) {
    return 2.0 * layers * n_kv * d_h / static_cast<double>(d);
}

PoolStats pool_stats(const ChunkPool& pool, const ModelConfig& cfg) {
    PoolStats s;
    s.N = pool.N();
    s.M = pool.M();
    s.d = pool.d;
    s.bytes_f32 = storage_bytes(static_cast<double>(s.N), pool.d, 4);
    s.bytes_int8 = storage_bytes(static_cast<double>(s.N), pool.d, 1);
    s.kv_compression = kv_compression_ratio(cfg.L_dec, cfg.n_kv, cfg.d_h, cfg.d);
    return s;
}

}  // namespace intra
