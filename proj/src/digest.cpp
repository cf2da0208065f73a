#include "glucast/digest.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <memory>

namespace glucast {

std::string sha256_hex(std::string_view bytes) {
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), md.data(), &len) != 1) {
        throw std::runtime_error("SHA-256 digest failed");
    }
    std::string hex;
    hex.reserve(2 * len);
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", md[i]);
        hex += buf;
    }
    return hex;
}

std::string series_digest(const TimeSeries& series) {
    std::string text;
    char buf[64];
    for (const auto& s : series.samples()) {
        std::snprintf(buf, sizeof buf, "%lld,%.17g\n", static_cast<long long>(s.timestamp), s.value);
        text += buf;
    }
    return sha256_hex(text);
}

}  // namespace glucast
