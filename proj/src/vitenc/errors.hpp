#pragma once

#include <stdexcept>
#include <string>

namespace vitenc {

// Image dimensions incompatible with a requested block size.
class InvalidGeometry : public std::runtime_error {
public:
    explicit InvalidGeometry(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or unsupported PPM/PGM data.
class ImageFormatError : public std::runtime_error {
public:
    explicit ImageFormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed model archive: bad framing, manifest, or tensor table. Messages
// name the offending tensor when one is known.
class ArchiveError : public std::runtime_error {
public:
    explicit ArchiveError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace vitenc
