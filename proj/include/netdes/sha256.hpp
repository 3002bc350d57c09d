#pragma once

#include <cstdint>
#include <string>

namespace netdes {

// Minimal FIPS 180-4 SHA-256, used to fingerprint instance files and bind
// trained models to a network topology. Verified against the standard test
// vectors in the unit tests.
class Sha256 {
public:
    Sha256();
    void update(const void* data, std::size_t len);
    // Finalizes and returns the digest as lowercase hex. The object must not
    // be updated afterwards.
    std::string hex_digest();

    static std::string of_string(const std::string& s);
    static std::string of_file(const std::string& path);

private:
    void process_block(const std::uint8_t* block);

    std::uint32_t state_[8];
    std::uint64_t bit_count_ = 0;
    std::uint8_t buffer_[64];
    std::size_t buffer_len_ = 0;
};

}  // namespace netdes
