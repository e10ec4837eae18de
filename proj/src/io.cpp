// Copyright 2026 The tickets Authors
// SPDX-License-Identifier: Apache-2.0

#include "tickets/io.hpp"

#include <array>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>
#include <unistd.h>

namespace tickets::io {
namespace {

std::string to_hex(const unsigned char* d, unsigned n) {
    std::ostringstream os;
    for (unsigned i = 0; i < n; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(d[i]);
    return os.str();
}

std::filesystem::path temp_sibling(const std::filesystem::path& path) {
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    return tmp;
}

}  // namespace

std::vector<char> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path.string());
    return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void atomic_write(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto tmp = temp_sibling(path);
    try {
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) throw std::runtime_error("cannot write " + tmp.string());
            body(out);
            out.flush();
            if (!out) throw std::runtime_error("write failed for " + tmp.string());
        }
        std::filesystem::rename(tmp, path);
    } catch (...) {
        std::error_code ec;
        std::filesystem::remove(tmp, ec);
        throw;
    }
}

void atomic_write_bytes(const std::filesystem::path& path, const std::vector<char>& bytes) {
    atomic_write(path, [&](std::ostream& out) { out.write(bytes.data(), static_cast<std::streamsize>(bytes.size())); });
}

std::string sha256_hex(std::string_view data) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned len = 0;
    EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr);
    return to_hex(md.data(), len);
}

std::string sha256_file(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    return sha256_hex(std::string_view(bytes.data(), bytes.size()));
}

}  // namespace tickets::io
