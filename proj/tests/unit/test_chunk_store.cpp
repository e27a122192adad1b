#include <cmath>
#include <cstring>

#include "doctest.h"
#include "helpers.hpp"
#include "intra/binio.hpp"
#include "intra/chunk_store.hpp"
#include "intra/error.hpp"

using namespace intra;

namespace {

std::vector<Chunk> three_chunks() {
    return {{10, {4, 5, 6, 7}}, {11, {8, 9, 10, 11, 12}}, {12, {13, 14, 15, 16, 17, 18}}};
}

}  // namespace

TEST_CASE("build_pool bookkeeping and normalization") {
    const ModelWeights w = init_random(toy_config(), 1);
    const ChunkPool pool = build_pool(three_chunks(), w);
    CHECK(pool.M() == 3);
    CHECK(pool.N() == 15);
    CHECK(pool.length(1) == 5);
    CHECK(pool.index_of(12) == 2);
    CHECK_THROWS_AS(pool.index_of(99), Error);
    for (Eigen::Index r = 0; r < pool.rows.rows(); ++r)
        CHECK(std::abs(pool.rows.row(r).squaredNorm() / pool.d - 1.0) <= 1e-3);

    auto dup = three_chunks();
    dup[2].id = 10;
    CHECK_THROWS_AS(build_pool(dup, w), Error);
    auto empty = three_chunks();
    empty[0].tokens.clear();
    CHECK_THROWS_AS(build_pool(empty, w), Error);
}

TEST_CASE("mean pooling segments") {
    CHECK(segment_sizes(5, 2) == std::vector<int>{3, 2});
    CHECK(segment_sizes(7, 3) == std::vector<int>{3, 2, 2});
    CHECK(segment_sizes(3, 8) == std::vector<int>{1, 1, 1});

    Mat k(4, 2);
    k << 1, 2, 3, 4, 5, 6, 7, 8;
    Mat p = mean_pool(k, 2);
    Mat want(2, 2);
    want << 2, 3, 6, 7;
    CHECK((p - want).cwiseAbs().maxCoeff() == 0.0);
    CHECK((mean_pool(k, 4) - k).cwiseAbs().maxCoeff() == 0.0);
    CHECK((mean_pool(k, 9) - k).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("int8 quantization") {
    Eigen::RowVectorXd z = Eigen::RowVectorXd::Zero(5);
    QuantizedRow qz = quantize_row(z);
    CHECK(qz.scale == 1.0f);
    for (auto v : qz.values) CHECK(v == 0);
    CHECK((dequantize_row(qz) - z).cwiseAbs().maxCoeff() == 0.0);

    Eigen::RowVectorXd r(2);
    r << -1.27, 1.27;
    QuantizedRow q = quantize_row(r);
    CHECK(q.scale == 0.01f);
    CHECK(q.values[0] == -127);
    CHECK(q.values[1] == 127);
    // 0.01f · 127 = 1.269999971613288 (reference computed in float64 from the float scale).
    CHECK(dequantize_row(q)[1] == doctest::Approx(1.269999971613288).epsilon(1e-15));
    CHECK(std::abs(dequantize_row(q)[1] - 1.27) <= q.scale / 2);

    const Mat rows = testing_util::random_mat(200, 16, 3);
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
        const QuantizedRow qi = quantize_row(rows.row(i));
        const double bound = qi.scale / 2.0 + 1e-7 * rows.row(i).cwiseAbs().maxCoeff();
        CHECK((dequantize_row(qi) - rows.row(i)).cwiseAbs().maxCoeff() <= bound);
    }
}

TEST_CASE("pool file round trips") {
    const std::string dir = testing_util::scratch_dir("pool");
    const ModelWeights w = init_random(toy_config(), 2);
    const auto chunks = testing_util::random_chunks(20, 9, w.cfg.vocab_size, 4);
    const ChunkPool pool = build_pool(chunks, w);
    const PooledIndex pooled = build_pooled(pool, 3);

    save_pool(pool, pooled, dir + "/a.pool", Precision::f32);
    const LoadedPool a = load_pool(dir + "/a.pool");
    CHECK(a.precision == Precision::f32);
    CHECK(a.pool.ids == pool.ids);
    CHECK(a.pool.offsets == pool.offsets);
    CHECK(a.pooled.offsets == pooled.offsets);
    CHECK(std::memcmp(a.pool.rows.data(), pool.rows.data(), sizeof(double) * pool.rows.size()) == 0);
    CHECK(std::memcmp(a.pooled.rows.data(), pooled.rows.data(), sizeof(double) * pooled.rows.size()) == 0);

    // Same inputs, same bytes.
    save_pool(build_pool(chunks, w), build_pooled(build_pool(chunks, w), 3), dir + "/b.pool", Precision::f32);
    CHECK(read_file(dir + "/a.pool") == read_file(dir + "/b.pool"));

    save_pool(pool, pooled, dir + "/q.pool", Precision::int8);
    const LoadedPool q = load_pool(dir + "/q.pool");
    CHECK(q.precision == Precision::int8);
    for (Eigen::Index r = 0; r < pool.rows.rows(); ++r) {
        const double scale = quantize_row(pool.rows.row(r)).scale;
        CHECK((q.pool.rows.row(r) - pool.rows.row(r)).cwiseAbs().maxCoeff() <= scale / 2 + 1e-6);
    }

    auto bytes = read_file(dir + "/a.pool");
    bytes[3] ^= 0x5a;
    write_file_atomic(dir + "/bad.pool", bytes.data(), bytes.size());
    try {
        load_pool(dir + "/bad.pool");
        FAIL("expected bad magic");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::bad_magic);
    }
    auto cut = read_file(dir + "/a.pool");
    cut.resize(cut.size() - 10);
    write_file_atomic(dir + "/cut.pool", cut.data(), cut.size());
    try {
        load_pool(dir + "/cut.pool");
        FAIL("expected truncation");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::truncated);
    }
    auto ver = read_file(dir + "/a.pool");
    ver[8] = 9;
    write_file_atomic(dir + "/ver.pool", ver.data(), ver.size());
    try {
        load_pool(dir + "/ver.pool");
        FAIL("expected bad version");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::bad_version);
    }
}

TEST_CASE("storage and KV compression arithmetic") {
    CHECK(storage_bytes(1e9, 2560, 1) == doctest::Approx(2.56e12));
    // L = 34 with n_kv·d_h = d / 2.5, expressed with d = 2560 and n_kv·d_h = 1024.
    CHECK(kv_compression_ratio(34, 8, 128, 2560) == doctest::Approx(27.2));
    CHECK(kv_compression_ratio(2, 2, 8, 32) == doctest::Approx(2.0));
    const ModelWeights w = init_random(toy_config(), 1);
    const PoolStats s = pool_stats(build_pool(three_chunks(), w), w.cfg);
    CHECK(s.N == 15);
    CHECK(s.bytes_f32 == 15 * 32 * 4);
    CHECK(s.kv_compression == doctest::Approx(2.0));
}
