#include "cfreg/io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "cfreg/error.hpp"

namespace cfreg {

namespace {

static_assert(std::endian::native == std::endian::little,
              "binary PLY support assumes a little-endian host");

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading " + path.string());
  return std::move(ss).str();
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    const std::size_t b = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t' && s[i] != '\r') ++i;
    if (i > b) out.push_back(s.substr(b, i - b));
  }
  return out;
}

std::optional<double> to_double(std::string_view s) {
  double v;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<long long> to_integer(std::string_view s) {
  long long v;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

[[noreturn]] void fail(std::string_view name, std::string_view where, std::string_view what) {
  throw FormatError(std::string(name) + ": " + std::string(where) + ": " + std::string(what));
}

std::string at_line(std::size_t line) { return "line " + std::to_string(line); }
std::string at_byte(std::size_t offset) { return "byte offset " + std::to_string(offset); }

// --- PLY ---------------------------------------------------------------------

enum class PlyType { i8, u8, i16, u16, i32, u32, f32, f64 };

std::optional<PlyType> ply_type(std::string_view s) {
  if (s == "char" || s == "int8") return PlyType::i8;
  if (s == "uchar" || s == "uint8") return PlyType::u8;
  if (s == "short" || s == "int16") return PlyType::i16;
  if (s == "ushort" || s == "uint16") return PlyType::u16;
  if (s == "int" || s == "int32") return PlyType::i32;
  if (s == "uint" || s == "uint32") return PlyType::u32;
  if (s == "float" || s == "float32") return PlyType::f32;
  if (s == "double" || s == "float64") return PlyType::f64;
  return std::nullopt;
}

std::size_t ply_size(PlyType t) {
  switch (t) {
    case PlyType::i8:
    case PlyType::u8:
      return 1;
    case PlyType::i16:
    case PlyType::u16:
      return 2;
    case PlyType::i32:
    case PlyType::u32:
    case PlyType::f32:
      return 4;
    case PlyType::f64:
      return 8;
  }
  return 0;
}

template <typename T>
T load(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

double ply_load(PlyType t, const char* p) {
  switch (t) {
    case PlyType::i8: return load<std::int8_t>(p);
    case PlyType::u8: return load<std::uint8_t>(p);
    case PlyType::i16: return load<std::int16_t>(p);
    case PlyType::u16: return load<std::uint16_t>(p);
    case PlyType::i32: return load<std::int32_t>(p);
    case PlyType::u32: return load<std::uint32_t>(p);
    case PlyType::f32: return load<float>(p);
    case PlyType::f64: return load<double>(p);
  }
  return 0.0;
}

struct PlyProperty {
  std::string name;
  PlyType type = PlyType::f32;
  bool is_list = false;
  PlyType count_type = PlyType::u8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

struct PlyHeader {
  bool binary = false;
  std::vector<PlyElement> elements;
  std::size_t body_offset = 0;
  std::size_t body_line = 0;  // 1-based line number of the first body line
};

PlyHeader parse_ply_header(std::string_view content, std::string_view name) {
  PlyHeader h;
  std::size_t pos = 0, line_no = 0;
  bool have_format = false;
  while (true) {
    if (pos >= content.size()) fail(name, at_line(line_no + 1), "header ends before end_header");
    const auto nl = content.find('\n', pos);
    const auto raw = content.substr(pos, nl == std::string_view::npos ? nl : nl - pos);
    pos = nl == std::string_view::npos ? content.size() : nl + 1;
    ++line_no;
    const auto tok = split_ws(trim(raw));
    if (line_no == 1) {
      if (tok.size() != 1 || tok[0] != "ply") fail(name, at_line(1), "missing 'ply' magic");
      continue;
    }
    if (tok.empty()) continue;
    const auto key = tok[0];
    if (key == "comment" || key == "obj_info") continue;
    if (key == "end_header") break;
    if (key == "format") {
      if (tok.size() != 3) fail(name, at_line(line_no), "malformed format line");
      if (tok[1] == "ascii") {
        h.binary = false;
      } else if (tok[1] == "binary_little_endian") {
        h.binary = true;
      } else if (tok[1] == "binary_big_endian") {
        fail(name, at_line(line_no), "binary_big_endian PLY is not supported");
      } else {
        fail(name, at_line(line_no), "unknown format '" + std::string(tok[1]) + "'");
      }
      have_format = true;
    } else if (key == "element") {
      const auto n = tok.size() == 3 ? to_integer(tok[2]) : std::nullopt;
      if (!n || *n < 0) fail(name, at_line(line_no), "malformed element line");
      h.elements.push_back({std::string(tok[1]), static_cast<std::size_t>(*n), {}});
    } else if (key == "property") {
      if (h.elements.empty()) fail(name, at_line(line_no), "property before any element");
      PlyProperty prop;
      if (tok.size() == 5 && tok[1] == "list") {
        const auto ct = ply_type(tok[2]);
        const auto it = ply_type(tok[3]);
        if (!ct || !it) fail(name, at_line(line_no), "unknown list property type");
        prop = {std::string(tok[4]), *it, true, *ct};
      } else if (tok.size() == 3) {
        const auto t = ply_type(tok[1]);
        if (!t) fail(name, at_line(line_no), "unknown property type '" + std::string(tok[1]) + "'");
        prop = {std::string(tok[2]), *t, false, PlyType::u8};
      } else {
        fail(name, at_line(line_no), "malformed property line");
      }
      h.elements.back().properties.push_back(prop);
    } else {
      fail(name, at_line(line_no), "unexpected header keyword '" + std::string(key) + "'");
    }
  }
  if (!have_format) fail(name, at_line(line_no), "header has no format line");
  h.body_offset = pos;
  h.body_line = line_no + 1;
  return h;
}

struct XyzSlots {
  int x = -1, y = -1, z = -1;
};

XyzSlots locate_xyz(const PlyElement& vertex, std::string_view name) {
  XyzSlots s;
  for (int i = 0; i < static_cast<int>(vertex.properties.size()); ++i) {
    const auto& p = vertex.properties[i];
    if (p.is_list) continue;
    if (p.name == "x") s.x = i;
    if (p.name == "y") s.y = i;
    if (p.name == "z") s.z = i;
  }
  if (s.x < 0 || s.y < 0 || s.z < 0) fail(name, "header", "vertex element lacks x, y or z");
  return s;
}

PointCloud parse_ply_ascii(std::string_view content, const PlyHeader& h, std::string_view name) {
  PointCloud cloud;
  std::size_t pos = h.body_offset, line_no = h.body_line - 1;
  auto next_line = [&]() -> std::optional<std::string_view> {
    while (pos < content.size()) {
      const auto nl = content.find('\n', pos);
      const auto raw = content.substr(pos, nl == std::string_view::npos ? nl : nl - pos);
      pos = nl == std::string_view::npos ? content.size() : nl + 1;
      ++line_no;
      const auto t = trim(raw);
      if (!t.empty()) return t;
    }
    return std::nullopt;
  };

  for (const auto& el : h.elements) {
    const bool is_vertex = el.name == "vertex";
    XyzSlots slots;
    if (is_vertex) {
      slots = locate_xyz(el, name);
      cloud.reserve(el.count);
    }
    for (std::size_t r = 0; r < el.count; ++r) {
      const auto line = next_line();
      if (!line) {
        fail(name, at_line(line_no + 1),
             "truncated body: element '" + el.name + "' declares " + std::to_string(el.count) +
                 " rows, found " + std::to_string(r));
      }
      const auto tok = split_ws(*line);
      std::size_t t = 0;
      std::array<double, 3> xyz{};
      for (int pi = 0; pi < static_cast<int>(el.properties.size()); ++pi) {
        const auto& p = el.properties[pi];
        std::size_t n_values = 1;
        if (p.is_list) {
          const auto n = t < tok.size() ? to_integer(tok[t]) : std::nullopt;
          if (!n || *n < 0) fail(name, at_line(line_no), "bad list count");
          n_values = static_cast<std::size_t>(*n);
          ++t;
        }
        if (t + n_values > tok.size()) {
          fail(name, at_line(line_no), "count mismatch: row has too few values");
        }
        if (is_vertex && !p.is_list && (pi == slots.x || pi == slots.y || pi == slots.z)) {
          const auto v = to_double(tok[t]);
          if (!v) fail(name, at_line(line_no), "not a number: '" + std::string(tok[t]) + "'");
          xyz[pi == slots.x ? 0 : pi == slots.y ? 1 : 2] = *v;
        }
        t += n_values;
      }
      if (t != tok.size()) fail(name, at_line(line_no), "count mismatch: row has extra values");
      if (is_vertex) cloud.emplace_back(xyz[0], xyz[1], xyz[2]);
    }
  }
  if (next_line()) fail(name, at_line(line_no), "count mismatch: data beyond declared elements");
  return cloud;
}

PointCloud parse_ply_binary(std::string_view content, const PlyHeader& h, std::string_view name) {
  PointCloud cloud;
  std::size_t pos = h.body_offset;
  auto need = [&](std::size_t bytes, const PlyElement& el, std::size_t row) {
    if (pos + bytes > content.size()) {
      fail(name, at_byte(pos),
           "truncated body in element '" + el.name + "' row " + std::to_string(row) + " of " +
               std::to_string(el.count));
    }
  };
  for (const auto& el : h.elements) {
    const bool is_vertex = el.name == "vertex";
    XyzSlots slots;
    if (is_vertex) {
      slots = locate_xyz(el, name);
      cloud.reserve(el.count);
    }
    for (std::size_t r = 0; r < el.count; ++r) {
      std::array<double, 3> xyz{};
      for (int pi = 0; pi < static_cast<int>(el.properties.size()); ++pi) {
        const auto& p = el.properties[pi];
        if (p.is_list) {
          need(ply_size(p.count_type), el, r);
          const double n = ply_load(p.count_type, content.data() + pos);
          if (n < 0) fail(name, at_byte(pos), "negative list count");
          pos += ply_size(p.count_type);
          const std::size_t bytes = static_cast<std::size_t>(n) * ply_size(p.type);
          need(bytes, el, r);
          pos += bytes;
          continue;
        }
        need(ply_size(p.type), el, r);
        if (is_vertex && (pi == slots.x || pi == slots.y || pi == slots.z)) {
          xyz[pi == slots.x ? 0 : pi == slots.y ? 1 : 2] = ply_load(p.type, content.data() + pos);
        }
        pos += ply_size(p.type);
      }
      if (is_vertex) cloud.emplace_back(xyz[0], xyz[1], xyz[2]);
    }
  }
  if (!trim(content.substr(pos)).empty()) {
    fail(name, at_byte(pos), "count mismatch: data beyond declared elements");
  }
  return cloud;
}

PointCloud parse_xyz(std::string_view content, std::string_view name) {
  PointCloud cloud;
  std::size_t pos = 0, line_no = 0;
  while (pos < content.size()) {
    const auto nl = content.find('\n', pos);
    const auto raw = content.substr(pos, nl == std::string_view::npos ? nl : nl - pos);
    pos = nl == std::string_view::npos ? content.size() : nl + 1;
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto tok = split_ws(line);
    if (tok.size() == 1) {  // comma separated
      tok.clear();
      std::size_t b = 0;
      while (b <= line.size()) {
        const auto c = line.find(',', b);
        tok.push_back(trim(line.substr(b, c == std::string_view::npos ? c : c - b)));
        if (c == std::string_view::npos) break;
        b = c + 1;
      }
    }
    if (tok.size() < 3) fail(name, at_line(line_no), "expected at least 3 coordinates");
    Point3 p;
    for (int i = 0; i < 3; ++i) {
      const auto v = to_double(tok[i]);
      if (!v) fail(name, at_line(line_no), "not a number: '" + std::string(tok[i]) + "'");
      p(i) = *v;
    }
    cloud.push_back(p);
  }
  return cloud;
}

void write_all(const std::filesystem::path& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("error writing " + path.string());
}

}  // namespace

std::string format_double(double value) {
  std::array<char, 64> buf;
  const auto [ptr, ec] =
      std::to_chars(buf.data(), buf.data() + buf.size(), value, std::chars_format::general, 17);
  return std::string(buf.data(), ptr);
}

PointCloud parse_cloud(std::string_view content, std::string_view name) {
  PointCloud cloud;
  if (content.starts_with("ply\n") || content.starts_with("ply\r")) {
    const auto h = parse_ply_header(content, name);
    bool has_vertex = false;
    for (const auto& el : h.elements) has_vertex = has_vertex || el.name == "vertex";
    if (!has_vertex) fail(name, "header", "no vertex element");
    cloud = h.binary ? parse_ply_binary(content, h, name) : parse_ply_ascii(content, h, name);
  } else {
    cloud = parse_xyz(content, name);
  }
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (!cloud[i].allFinite()) fail(name, "vertex " + std::to_string(i), "non-finite coordinate");
  }
  return cloud;
}

PointCloud read_cloud(const std::filesystem::path& path) {
  const std::string content = read_file(path);
  return parse_cloud(content, path.string());
}

CloudFormat format_from_extension(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".xyz" || ext == ".txt") return CloudFormat::xyz;
  return CloudFormat::ply_binary_le;
}

void write_cloud(const PointCloud& cloud, const std::filesystem::path& path, CloudFormat format) {
  std::string out;
  if (format == CloudFormat::xyz) {
    for (const auto& p : cloud) {
      out += format_double(p.x()) + ' ' + format_double(p.y()) + ' ' + format_double(p.z()) + '\n';
    }
  } else {
    const bool binary = format == CloudFormat::ply_binary_le;
    out = "ply\nformat ";
    out += binary ? "binary_little_endian" : "ascii";
    out += " 1.0\nelement vertex " + std::to_string(cloud.size()) +
           "\nproperty double x\nproperty double y\nproperty double z\nend_header\n";
    if (binary) {
      const std::size_t header = out.size();
      out.resize(header + cloud.size() * 3 * sizeof(double));
      char* dst = out.data() + header;
      for (const auto& p : cloud) {
        const double xyz[3] = {p.x(), p.y(), p.z()};
        std::memcpy(dst, xyz, sizeof xyz);
        dst += sizeof xyz;
      }
    } else {
      for (const auto& p : cloud) {
        out +=
            format_double(p.x()) + ' ' + format_double(p.y()) + ' ' + format_double(p.z()) + '\n';
      }
    }
  }
  write_all(path, out);
}

std::string format_transform(const RigidTransformd& t) {
  const Eigen::Matrix4d m = t.matrix();
  std::string out;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      out += format_double(m(r, c));
      out += c == 3 ? '\n' : ' ';
    }
  }
  return out;
}

RigidTransformd parse_transform(std::string_view text) {
  std::vector<double> values;
  std::size_t line_no = 0, pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    const auto line = trim(text.substr(pos, nl == std::string_view::npos ? nl : nl - pos));
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    for (auto tok : split_ws(line)) {
      const auto v = to_double(tok);
      if (!v) fail("transform", at_line(line_no), "not a number: '" + std::string(tok) + "'");
      values.push_back(*v);
    }
  }
  if (values.size() != 16) {
    fail("transform", "body", "expected 16 values, found " + std::to_string(values.size()));
  }
  Eigen::Matrix4d m;
  for (int i = 0; i < 16; ++i) m(i / 4, i % 4) = values[i];
  return RigidTransformd::from_matrix(m);
}

void write_transform(const RigidTransformd& t, const std::filesystem::path& path) {
  write_all(path, format_transform(t));
}

RigidTransformd read_transform(const std::filesystem::path& path) {
  return parse_transform(read_file(path));
}

void write_normals_csv(std::ostream& os, const PointCloud& cloud, const NormalSet& normals) {
  os << "x,y,z,nx,ny,nz,surface_variation,valid\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud[i];
    const auto& n = normals.normals[i];
    os << format_double(p.x()) << ',' << format_double(p.y()) << ',' << format_double(p.z()) << ','
       << format_double(n.x()) << ',' << format_double(n.y()) << ',' << format_double(n.z()) << ','
       << format_double(normals.surface_variation[i]) << ',' << int(normals.valid[i]) << '\n';
  }
}

void write_descriptors_csv(std::ostream& os, const DescriptorSet& descriptors) {
  static constexpr const char* kBlock[3] = {"alpha", "phi", "theta"};
  for (int c = 0; c < kDescriptorSize; ++c) {
    os << kBlock[c / kBinsPerFeature] << '_' << (c % kBinsPerFeature)
       << (c + 1 == kDescriptorSize ? '\n' : ',');
  }
  for (const auto& d : descriptors.descriptors) {
    for (int c = 0; c < kDescriptorSize; ++c) {
      os << format_double(d(c)) << (c + 1 == kDescriptorSize ? '\n' : ',');
    }
  }
}

std::string diagnostics_json(const RegistrationResult& r) {
  nlohmann::ordered_json j;
  j["algorithm"] = r.algorithm;
  std::vector<std::vector<double>> m(4, std::vector<double>(4));
  const Eigen::Matrix4d mat = r.transform.matrix();
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) m[a][b] = mat(a, b);
  j["transform"] = m;
  j["weight_sum"] = r.weight_sum;
  j["pair_count"] = r.pair_count;
  j["singular_values"] = {r.singular_values(0), r.singular_values(1), r.singular_values(2)};
  j["reflection_corrected"] = r.reflection_corrected;
  j["ill_conditioned"] = r.ill_conditioned;
  if (r.algorithm == "cfk") {
    j["keypoints"] = {{"source", r.keypoints_source}, {"target", r.keypoints_target}};
  }
  if (r.algorithm == "icp") {
    j["iterations"] = r.iterations;
    j["fitness"] = r.fitness;
    j["termination"] = r.termination;
  }
  j["timing_ms"] = {{"normals", r.timing.normals_ms},       {"features", r.timing.features_ms},
                    {"keypoints", r.timing.keypoints_ms},   {"accumulate", r.timing.accumulate_ms},
                    {"solve", r.timing.solve_ms},           {"total", r.timing.total_ms}};
  return j.dump(2) + "\n";
}

}  // namespace cfreg
