// Copyright 2026 The tickets Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "tickets/errors.hpp"

namespace tickets::io {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

// Append-only little-endian byte buffer.
class ByteWriter {
public:
    template <typename T>
    void put(T value) {
        static_assert(std::is_trivially_copyable_v<T>);
        const auto* p = reinterpret_cast<const char*>(&value);
        bytes_.insert(bytes_.end(), p, p + sizeof(T));
    }
    void put_bytes(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
    void put_string(std::string_view s) {
        put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
        put_bytes(s);
    }
    const std::vector<char>& bytes() const noexcept { return bytes_; }

private:
    std::vector<char> bytes_;
};

// Bounds-checked reader; every overrun is a ParseError.
class ByteReader {
public:
    ByteReader(const char* data, std::size_t size, std::string what)
        : data_(data), size_(size), what_(std::move(what)) {}

    template <typename T>
    T get() {
        static_assert(std::is_trivially_copyable_v<T>);
        need(sizeof(T));
        T v;
        std::memcpy(&v, data_ + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::string get_bytes(std::size_t n) {
        need(n);
        std::string s(data_ + pos_, n);
        pos_ += n;
        return s;
    }
    std::string get_string(std::size_t max_len = 1u << 24) {
        const auto n = get<std::uint32_t>();
        if (n > max_len) throw ParseError(what_ + ": string length out of range");
        return get_bytes(n);
    }
    bool at_end() const noexcept { return pos_ == size_; }
    std::size_t remaining() const noexcept { return size_ - pos_; }
    void expect_end() const {
        if (!at_end()) throw ParseError(what_ + ": trailing bytes after payload");
    }

private:
    void need(std::size_t n) const {
        if (size_ - pos_ < n) throw ParseError(what_ + ": truncated file");
    }

    const char* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
    std::string what_;
};

std::vector<char> read_file(const std::filesystem::path& path);

// Writes through a temporary sibling and renames on success, so readers never observe
// a partial file.
void atomic_write(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body);
void atomic_write_bytes(const std::filesystem::path& path, const std::vector<char>& bytes);

// Hex SHA-256 of a file's contents.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_hex(std::string_view data);

}  // namespace tickets::io
