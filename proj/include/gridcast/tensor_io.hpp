#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <hdf5.h>

#include "gridcast/tensor.hpp"

namespace gridcast {

struct TensorIoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// HDF5 file exists but holds no "array" dataset.
struct MissingDatasetError : TensorIoError {
    using TensorIoError::TensorIoError;
};

/// Stored element type is not uint8.
struct DtypeMismatchError : TensorIoError {
    using TensorIoError::TensorIoError;
};

/// Flat container shorter than its header promises.
struct TruncatedPayloadError : TensorIoError {
    using TensorIoError::TensorIoError;
};

namespace detail {

inline constexpr char kFlatMagic[4] = {'T', '4', 'C', 'T'};
inline constexpr const char* kDatasetName = "array";

struct HidCloser {
    herr_t (*close)(hid_t) = nullptr;
    hid_t id = H5I_INVALID_HID;

    HidCloser(herr_t (*c)(hid_t), hid_t i) : close(c), id(i) {}
    ~HidCloser() {
        if (id >= 0 && close) close(id);
    }
    HidCloser(const HidCloser&) = delete;
    HidCloser& operator=(const HidCloser&) = delete;
};

struct SilenceHdf5Errors {
    H5E_auto2_t func = nullptr;
    void* client = nullptr;

    SilenceHdf5Errors() {
        H5Eget_auto2(H5E_DEFAULT, &func, &client);
        H5Eset_auto2(H5E_DEFAULT, nullptr, nullptr);
    }
    ~SilenceHdf5Errors() { H5Eset_auto2(H5E_DEFAULT, func, client); }
};

inline bool has_hdf5_signature(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return false;
    unsigned char sig[8] = {};
    in.read(reinterpret_cast<char*>(sig), 8);
    static const unsigned char h5sig[8] = {0x89, 'H', 'D', 'F', '\r', '\n', 0x1a, '\n'};
    return in.gcount() == 8 && std::memcmp(sig, h5sig, 8) == 0;
}

}  // namespace detail

/// Read a uint8 tensor from an HDF5 file's "array" dataset.
inline ByteTensor read_tensor_hdf5(const std::filesystem::path& path) {
    detail::SilenceHdf5Errors quiet;
    hid_t file = H5Fopen(path.string().c_str(), H5F_ACC_RDONLY, H5P_DEFAULT);
    if (file < 0) throw TensorIoError("cannot open HDF5 file: " + path.string());
    detail::HidCloser file_guard(H5Fclose, file);

    if (H5Lexists(file, detail::kDatasetName, H5P_DEFAULT) <= 0) {
        throw MissingDatasetError("no \"array\" dataset in " + path.string());
    }
    hid_t dset = H5Dopen2(file, detail::kDatasetName, H5P_DEFAULT);
    if (dset < 0) throw MissingDatasetError("no \"array\" dataset in " + path.string());
    detail::HidCloser dset_guard(H5Dclose, dset);

    hid_t dtype = H5Dget_type(dset);
    detail::HidCloser dtype_guard(H5Tclose, dtype);
    if (H5Tget_class(dtype) != H5T_INTEGER || H5Tget_size(dtype) != 1 ||
        H5Tget_sign(dtype) != H5T_SGN_NONE) {
        throw DtypeMismatchError("dataset \"array\" in " + path.string() + " is not uint8");
    }

    hid_t space = H5Dget_space(dset);
    detail::HidCloser space_guard(H5Sclose, space);
    int rank = H5Sget_simple_extent_ndims(space);
    if (rank < 0) throw TensorIoError("bad dataspace in " + path.string());
    std::vector<hsize_t> hdims(static_cast<std::size_t>(rank));
    H5Sget_simple_extent_dims(space, hdims.data(), nullptr);

    std::vector<std::size_t> shape(hdims.begin(), hdims.end());
    ByteTensor t(shape);
    if (H5Dread(dset, H5T_NATIVE_UINT8, H5S_ALL, H5S_ALL, H5P_DEFAULT, t.data()) < 0) {
        throw TensorIoError("failed reading dataset from " + path.string());
    }
    return t;
}

/// Write a uint8 tensor to an HDF5 file as dataset "array".
inline void write_tensor_hdf5(const std::filesystem::path& path, const ByteTensor& t,
                              bool compress = true) {
    detail::SilenceHdf5Errors quiet;
    hid_t file = H5Fcreate(path.string().c_str(), H5F_ACC_TRUNC, H5P_DEFAULT, H5P_DEFAULT);
    if (file < 0) throw TensorIoError("cannot create HDF5 file: " + path.string());
    detail::HidCloser file_guard(H5Fclose, file);

    std::vector<hsize_t> hdims(t.shape().begin(), t.shape().end());
    hid_t space = H5Screate_simple(static_cast<int>(hdims.size()), hdims.data(), nullptr);
    detail::HidCloser space_guard(H5Sclose, space);

    hid_t dcpl = H5Pcreate(H5P_DATASET_CREATE);
    detail::HidCloser dcpl_guard(H5Pclose, dcpl);
    if (compress) {
        // One chunk per leading-axis slice keeps chunks comfortably sized for
        // (288, rows, cols, 8) movies while still compressing well.
        std::vector<hsize_t> chunk = hdims;
        if (chunk.size() > 1) chunk[0] = 1;
        H5Pset_chunk(dcpl, static_cast<int>(chunk.size()), chunk.data());
        H5Pset_deflate(dcpl, 6);
    }

    hid_t dset = H5Dcreate2(file, detail::kDatasetName, H5T_NATIVE_UINT8, space, H5P_DEFAULT,
                            dcpl, H5P_DEFAULT);
    if (dset < 0) throw TensorIoError("cannot create dataset in " + path.string());
    detail::HidCloser dset_guard(H5Dclose, dset);

    if (H5Dwrite(dset, H5T_NATIVE_UINT8, H5S_ALL, H5S_ALL, H5P_DEFAULT, t.data()) < 0) {
        throw TensorIoError("failed writing dataset to " + path.string());
    }
}

/// Read the flat fallback container: "T4CT", u8 rank, rank u64 LE dims,
/// row-major uint8 payload.
inline ByteTensor read_tensor_flat(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw TensorIoError("cannot open file: " + path.string());

    char magic[4] = {};
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, detail::kFlatMagic, 4) != 0) {
        throw TensorIoError("bad magic in " + path.string());
    }
    std::uint8_t rank = 0;
    in.read(reinterpret_cast<char*>(&rank), 1);
    if (in.gcount() != 1) throw TruncatedPayloadError("truncated header in " + path.string());

    std::vector<std::size_t> shape(rank);
    for (std::uint8_t i = 0; i < rank; ++i) {
        unsigned char raw[8];
        in.read(reinterpret_cast<char*>(raw), 8);
        if (in.gcount() != 8) throw TruncatedPayloadError("truncated header in " + path.string());
        std::uint64_t d = 0;
        for (int b = 7; b >= 0; --b) d = (d << 8) | raw[b];
        shape[i] = static_cast<std::size_t>(d);
    }

    ByteTensor t(shape);
    in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size()));
    if (static_cast<std::size_t>(in.gcount()) != t.size()) {
        throw TruncatedPayloadError("truncated payload in " + path.string());
    }
    return t;
}

inline void write_tensor_flat(const std::filesystem::path& path, const ByteTensor& t) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw TensorIoError("cannot create file: " + path.string());

    out.write(detail::kFlatMagic, 4);
    std::uint8_t rank = static_cast<std::uint8_t>(t.rank());
    out.write(reinterpret_cast<const char*>(&rank), 1);
    for (std::size_t d : t.shape()) {
        std::uint64_t v = d;
        unsigned char raw[8];
        for (int b = 0; b < 8; ++b) raw[b] = static_cast<unsigned char>((v >> (8 * b)) & 0xff);
        out.write(reinterpret_cast<const char*>(raw), 8);
    }
    out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size()));
    if (!out) throw TensorIoError("failed writing " + path.string());
}

/// Attach (or replace) a fixed-length string attribute on the root group of
/// an existing HDF5 file. Used for provenance notes like sampler identifiers.
inline void write_hdf5_string_attr(const std::filesystem::path& path, const std::string& name,
                                   const std::string& value) {
    detail::SilenceHdf5Errors quiet;
    hid_t file = H5Fopen(path.string().c_str(), H5F_ACC_RDWR, H5P_DEFAULT);
    if (file < 0) throw TensorIoError("cannot open HDF5 file: " + path.string());
    detail::HidCloser file_guard(H5Fclose, file);
    hid_t root = H5Gopen2(file, "/", H5P_DEFAULT);
    detail::HidCloser root_guard(H5Gclose, root);

    hid_t type = H5Tcopy(H5T_C_S1);
    detail::HidCloser type_guard(H5Tclose, type);
    H5Tset_size(type, value.empty() ? 1 : value.size());
    hid_t space = H5Screate(H5S_SCALAR);
    detail::HidCloser space_guard(H5Sclose, space);

    if (H5Aexists(root, name.c_str()) > 0) H5Adelete(root, name.c_str());
    hid_t attr = H5Acreate2(root, name.c_str(), type, space, H5P_DEFAULT, H5P_DEFAULT);
    if (attr < 0) throw TensorIoError("cannot create attribute " + name + " in " + path.string());
    detail::HidCloser attr_guard(H5Aclose, attr);
    const char empty = '\0';
    if (H5Awrite(attr, type, value.empty() ? &empty : value.data()) < 0) {
        throw TensorIoError("failed writing attribute " + name + " in " + path.string());
    }
}

inline std::optional<std::string> read_hdf5_string_attr(const std::filesystem::path& path,
                                                        const std::string& name) {
    detail::SilenceHdf5Errors quiet;
    hid_t file = H5Fopen(path.string().c_str(), H5F_ACC_RDONLY, H5P_DEFAULT);
    if (file < 0) return std::nullopt;
    detail::HidCloser file_guard(H5Fclose, file);
    hid_t root = H5Gopen2(file, "/", H5P_DEFAULT);
    detail::HidCloser root_guard(H5Gclose, root);
    if (H5Aexists(root, name.c_str()) <= 0) return std::nullopt;

    hid_t attr = H5Aopen(root, name.c_str(), H5P_DEFAULT);
    if (attr < 0) return std::nullopt;
    detail::HidCloser attr_guard(H5Aclose, attr);
    hid_t type = H5Aget_type(attr);
    detail::HidCloser type_guard(H5Tclose, type);
    if (H5Tget_class(type) != H5T_STRING) return std::nullopt;

    std::string out(H5Tget_size(type), '\0');
    if (H5Aread(attr, type, out.data()) < 0) return std::nullopt;
    while (!out.empty() && out.back() == '\0') out.pop_back();
    return out;
}

/// Read a tensor, sniffing the container from the file signature.
inline ByteTensor read_tensor(const std::filesystem::path& path) {
    if (detail::has_hdf5_signature(path)) return read_tensor_hdf5(path);
    return read_tensor_flat(path);
}

/// Write a tensor, picking the container from the extension:
/// .h5/.hdf5 use HDF5, anything else the flat container.
inline void write_tensor(const std::filesystem::path& path, const ByteTensor& t,
                         bool compress = true) {
    const auto ext = path.extension().string();
    if (ext == ".h5" || ext == ".hdf5") {
        write_tensor_hdf5(path, t, compress);
    } else {
        write_tensor_flat(path, t);
    }
}

}  // namespace gridcast
