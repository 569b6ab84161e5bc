#pragma once
#include <cstdint>
#include <optional>
#include <string>

namespace ambient {

// Hex-encoded SHA-256 of arbitrary bytes.
std::string sha256_hex(const std::string& data);

// Hex-encoded HMAC-SHA256. Used for continuity-token signatures; the key is a
// run-local secret, never persisted.
std::string hmac_sha256_hex(const std::string& key, const std::string& data);

// URL-safe base64 without padding.
std::string base64url_encode(const std::string& bytes);
std::optional<std::string> base64url_decode(const std::string& text);

}  // namespace ambient
