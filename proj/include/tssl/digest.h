// include/tssl/digest.h

// Copyright 2026  The tssl Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef TSSL_DIGEST_H_
#define TSSL_DIGEST_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace tssl {

/// Lower-case hex SHA-256 of a byte string.
std::string Sha256Hex(std::string_view bytes);

/// Lower-case hex SHA-256 of a file's contents.
std::string FileDigest(const std::filesystem::path& path);

/// First 8 bytes of the SHA-256, big-endian, as an integer.
uint64_t Digest64(std::string_view bytes);

}  // namespace tssl

#endif  // TSSL_DIGEST_H_
