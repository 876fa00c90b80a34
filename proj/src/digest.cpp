#include "culturekit/digest.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>

#include "culturekit/errors.hpp"

namespace culturekit::digest {

namespace {

std::string to_hex(const unsigned char* bytes, size_t len) {
  static const char* hexdigits = "0123456789abcdef";
  std::string out(len * 2, '0');
  for (size_t i = 0; i < len; ++i) {
    out[2 * i] = hexdigits[bytes[i] >> 4];
    out[2 * i + 1] = hexdigits[bytes[i] & 0xf];
  }
  return out;
}

struct Sha256 {
  EVP_MD_CTX* ctx = nullptr;
  Sha256() {
    ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1)
      throw DataError("sha256: failed to initialize digest context");
  }
  ~Sha256() { EVP_MD_CTX_free(ctx); }
  void update(const void* data, size_t len) {
    if (EVP_DigestUpdate(ctx, data, len) != 1) throw DataError("sha256: digest update failed");
  }
  std::string finish() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx, md.data(), &len) != 1)
      throw DataError("sha256: digest finalize failed");
    return to_hex(md.data(), len);
  }
};

}  // namespace

std::string sha256_hex(std::string_view data) {
  Sha256 h;
  h.update(data.data(), data.size());
  return h.finish();
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("sha256: cannot open file: " + path.string());
  Sha256 h;
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    std::streamsize got = in.gcount();
    if (got > 0) h.update(buf.data(), static_cast<size_t>(got));
  }
  return h.finish();
}

}  // namespace culturekit::digest
