#pragma once

// SHA-256 of dataset files, via OpenSSL. Link OpenSSL::Crypto.

#include <prevmle/error.hpp>

#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <memory>
#include <string>
#include <string_view>

namespace prevmle {

class Sha256 {
public:
    Sha256() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
        detail::require(ctx_ && EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) == 1, Errc::io_error,
                        "cannot initialise SHA-256");
    }

    void update(std::string_view bytes) {
        detail::require(EVP_DigestUpdate(ctx_.get(), bytes.data(), bytes.size()) == 1, Errc::io_error,
                        "SHA-256 update failed");
    }

    /// Lower-case hex digest. The object is spent afterwards.
    std::string hex() {
        std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
        unsigned int len = 0;
        detail::require(EVP_DigestFinal_ex(ctx_.get(), digest.data(), &len) == 1, Errc::io_error,
                        "SHA-256 finalisation failed");
        static constexpr char digits[] = "0123456789abcdef";
        std::string out;
        for (unsigned int i = 0; i < len; ++i) {
            out += digits[digest[i] >> 4];
            out += digits[digest[i] & 0xf];
        }
        return out;
    }

private:
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

inline std::string sha256_hex(std::string_view bytes) {
    Sha256 h;
    h.update(bytes);
    return h.hex();
}

inline std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    detail::require(static_cast<bool>(in), Errc::io_error, "cannot open " + path);
    Sha256 h;
    std::array<char, 1 << 16> buffer{};
    while (in) {
        in.read(buffer.data(), buffer.size());
        h.update(std::string_view(buffer.data(), static_cast<std::size_t>(in.gcount())));
    }
    return h.hex();
}

} // namespace prevmle
