#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include "cfreg/features.hpp"
#include "cfreg/geometry.hpp"
#include "cfreg/registration.hpp"

namespace cfreg {

enum class CloudFormat { ply_ascii, ply_binary_le, xyz };

/// Reads x, y, z of every vertex. PLY (ascii or binary little endian, any
/// numeric property type, other elements skipped) is recognized by its magic
/// line; anything else is parsed as whitespace-separated xyz text where lines
/// starting with '#' are comments.
/// Throws IoError if the file cannot be read and FormatError (with line or
/// byte offset) for malformed headers, truncated bodies and count mismatches.
PointCloud read_cloud(const std::filesystem::path& path);

/// Parses in-memory file content; `name` only labels diagnostics.
PointCloud parse_cloud(std::string_view content, std::string_view name = "<memory>");

/// Binary PLY stores float64 coordinates; text formats use 17 significant digits.
void write_cloud(const PointCloud& cloud, const std::filesystem::path& path, CloudFormat format);

/// .xyz/.txt map to xyz text, everything else to binary PLY.
CloudFormat format_from_extension(const std::filesystem::path& path);

/// Shortest round-trip-safe rendering with 17 significant digits.
std::string format_double(double value);

/// 4x4 homogeneous matrix, row-major, one row per line.
std::string format_transform(const RigidTransformd& t);
RigidTransformd parse_transform(std::string_view text);
void write_transform(const RigidTransformd& t, const std::filesystem::path& path);
RigidTransformd read_transform(const std::filesystem::path& path);

/// Columns: x,y,z,nx,ny,nz,surface_variation,valid.
void write_normals_csv(std::ostream& os, const PointCloud& cloud, const NormalSet& normals);
/// One row per point, 33 columns (alpha_0..alpha_10, phi_0.., theta_0..).
void write_descriptors_csv(std::ostream& os, const DescriptorSet& descriptors);

/// Structured diagnostics of a registration run as a JSON document.
std::string diagnostics_json(const RegistrationResult& result);

}  // namespace cfreg
