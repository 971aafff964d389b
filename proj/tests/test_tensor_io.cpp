#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include <hdf5.h>

#include "gridcast/tensor_io.hpp"
#include "test_support.hpp"

using namespace gridcast;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() : path(fs::temp_directory_path() / "gridcast_io_test") {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("hdf5 round-trip preserves shape and bytes") {
    TempDir tmp;
    std::mt19937_64 rng(3);
    const ByteTensor t = testsupport::random_tensor(rng, {5, 4, 3, 8});

    const fs::path path = tmp.path / "a.h5";
    write_tensor_hdf5(path, t);
    CHECK(read_tensor_hdf5(path) == t);
}

TEST_CASE("hdf5 compression does not change the payload") {
    TempDir tmp;
    std::mt19937_64 rng(4);
    const ByteTensor t = testsupport::random_tensor(rng, {16, 9, 7, 8});

    const fs::path plain = tmp.path / "plain.h5";
    const fs::path packed = tmp.path / "packed.h5";
    write_tensor_hdf5(plain, t, false);
    write_tensor_hdf5(packed, t, true);
    CHECK(read_tensor_hdf5(plain) == t);
    CHECK(read_tensor_hdf5(packed) == t);
}

TEST_CASE("flat container round-trip") {
    TempDir tmp;
    std::mt19937_64 rng(5);
    for (const auto& shape : std::vector<std::vector<std::size_t>>{
             {7}, {3, 5}, {2, 3, 4, 8}, {1, 1, 1}, {288, 2, 2, 8}}) {
        const ByteTensor t = testsupport::random_tensor(rng, shape);
        const fs::path path = tmp.path / "t.t4c";
        write_tensor_flat(path, t);
        CHECK(read_tensor_flat(path) == t);
    }
}

TEST_CASE("read_tensor sniffs the container from the signature") {
    TempDir tmp;
    std::mt19937_64 rng(6);
    const ByteTensor t = testsupport::random_tensor(rng, {4, 4, 8});

    // HDF5 bytes behind a non-hdf5 extension are still read as HDF5.
    const fs::path sneaky = tmp.path / "movie.bin";
    write_tensor_hdf5(sneaky, t);
    CHECK(read_tensor(sneaky) == t);

    const fs::path flat = tmp.path / "movie.t4c";
    write_tensor_flat(flat, t);
    CHECK(read_tensor(flat) == t);
}

TEST_CASE("write_tensor picks the container from the extension") {
    TempDir tmp;
    std::mt19937_64 rng(7);
    const ByteTensor t = testsupport::random_tensor(rng, {3, 3, 8});

    const fs::path h5 = tmp.path / "x.h5";
    write_tensor(h5, t);
    CHECK(detail::has_hdf5_signature(h5));
    CHECK(read_tensor(h5) == t);

    const fs::path hdf5 = tmp.path / "x.hdf5";
    write_tensor(hdf5, t);
    CHECK(detail::has_hdf5_signature(hdf5));

    const fs::path flat = tmp.path / "x.t4c";
    write_tensor(flat, t);
    std::ifstream in(flat, std::ios::binary);
    char magic[4] = {};
    in.read(magic, 4);
    CHECK(std::string(magic, 4) == "T4CT");
    CHECK(read_tensor(flat) == t);
}

TEST_CASE("missing file and missing dataset raise distinct errors") {
    TempDir tmp;
    CHECK_THROWS_AS(read_tensor(tmp.path / "nope.h5"), TensorIoError);

    // An HDF5 file whose only dataset has the wrong name.
    const fs::path path = tmp.path / "wrong_name.h5";
    {
        detail::SilenceHdf5Errors quiet;
        hid_t file = H5Fcreate(path.string().c_str(), H5F_ACC_TRUNC, H5P_DEFAULT, H5P_DEFAULT);
        REQUIRE(file >= 0);
        hsize_t dims[1] = {4};
        hid_t space = H5Screate_simple(1, dims, nullptr);
        hid_t dset = H5Dcreate2(file, "other", H5T_NATIVE_UINT8, space, H5P_DEFAULT, H5P_DEFAULT,
                                H5P_DEFAULT);
        std::uint8_t data[4] = {1, 2, 3, 4};
        H5Dwrite(dset, H5T_NATIVE_UINT8, H5S_ALL, H5S_ALL, H5P_DEFAULT, data);
        H5Dclose(dset);
        H5Sclose(space);
        H5Fclose(file);
    }
    CHECK_THROWS_AS(read_tensor(path), MissingDatasetError);
}

TEST_CASE("non-uint8 datasets raise a dtype error") {
    TempDir tmp;
    const fs::path path = tmp.path / "wrong_type.h5";
    {
        detail::SilenceHdf5Errors quiet;
        hid_t file = H5Fcreate(path.string().c_str(), H5F_ACC_TRUNC, H5P_DEFAULT, H5P_DEFAULT);
        REQUIRE(file >= 0);
        hsize_t dims[1] = {4};
        hid_t space = H5Screate_simple(1, dims, nullptr);
        hid_t dset = H5Dcreate2(file, "array", H5T_NATIVE_INT32, space, H5P_DEFAULT, H5P_DEFAULT,
                                H5P_DEFAULT);
        std::int32_t data[4] = {1, 2, 3, 4};
        H5Dwrite(dset, H5T_NATIVE_INT32, H5S_ALL, H5S_ALL, H5P_DEFAULT, data);
        H5Dclose(dset);
        H5Sclose(space);
        H5Fclose(file);
    }
    CHECK_THROWS_AS(read_tensor(path), DtypeMismatchError);
}

TEST_CASE("corrupt flat files raise specific errors") {
    TempDir tmp;
    std::mt19937_64 rng(8);
    const ByteTensor t = testsupport::random_tensor(rng, {6, 5});
    const fs::path path = tmp.path / "t.t4c";
    write_tensor_flat(path, t);

    SECTION("truncated payload") {
        const auto full = fs::file_size(path);
        fs::resize_file(path, full - 3);
        CHECK_THROWS_AS(read_tensor_flat(path), TruncatedPayloadError);
    }
    SECTION("truncated header") {
        fs::resize_file(path, 7);
        CHECK_THROWS_AS(read_tensor_flat(path), TruncatedPayloadError);
    }
    SECTION("bad magic") {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.write("NOPE", 4);
        f.close();
        CHECK_THROWS_AS(read_tensor_flat(path), TensorIoError);
    }
}

TEST_CASE("string attributes round-trip on the root group") {
    TempDir tmp;
    std::mt19937_64 rng(9);
    const ByteTensor t = testsupport::random_tensor(rng, {3, 2});
    const fs::path path = tmp.path / "attrs.h5";
    write_tensor(path, t);

    write_hdf5_string_attr(path, "sampler", "some-scheme/v1");
    write_hdf5_string_attr(path, "seed", "12345");

    auto sampler = read_hdf5_string_attr(path, "sampler");
    REQUIRE(sampler.has_value());
    CHECK(*sampler == "some-scheme/v1");
    auto seed = read_hdf5_string_attr(path, "seed");
    REQUIRE(seed.has_value());
    CHECK(*seed == "12345");
    CHECK_FALSE(read_hdf5_string_attr(path, "missing").has_value());

    // Overwriting replaces the value.
    write_hdf5_string_attr(path, "seed", "67890");
    seed = read_hdf5_string_attr(path, "seed");
    REQUIRE(seed.has_value());
    CHECK(*seed == "67890");

    // The payload is untouched by attribute writes.
    CHECK(read_tensor(path) == t);
}

TEST_CASE("random tensors survive both containers") {
    TempDir tmp;
    std::mt19937_64 rng(10);
    for (int i = 0; i < 10; ++i) {
        std::vector<std::size_t> shape;
        const int rank = 1 + static_cast<int>(rng() % 4);
        for (int d = 0; d < rank; ++d) shape.push_back(1 + rng() % 6);
        const ByteTensor t = testsupport::random_tensor(rng, shape);

        const fs::path h5 = tmp.path / ("rt" + std::to_string(i) + ".h5");
        const fs::path flat = tmp.path / ("rt" + std::to_string(i) + ".t4c");
        write_tensor(h5, t);
        write_tensor(flat, t);
        CHECK(read_tensor(h5) == t);
        CHECK(read_tensor(flat) == t);
    }
}
