#include "i2preg/io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "i2preg/error.hpp"

namespace i2preg::io {
namespace {

std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for reading");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  return out;
}

void put_f32(std::ostream& out, double value) {
  const auto f = static_cast<float>(value);
  auto bits = std::bit_cast<std::uint32_t>(f);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
  char buf[4];
  std::memcpy(buf, &bits, 4);
  out.write(buf, 4);
}

double get_f32(std::istream& in) {
  char buf[4];
  if (!in.read(buf, 4)) throw Error(ErrorCode::ParseError, "truncated float32 payload");
  std::uint32_t bits = 0;
  std::memcpy(&bits, buf, 4);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
  return static_cast<double>(std::bit_cast<float>(bits));
}

void read_header(std::istream& in, const std::string& tag, int& a, int& b) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "missing " + tag + " header");
  std::istringstream hs(line);
  std::string got;
  if (!(hs >> got >> a >> b) || got != tag || a <= 0 || b <= 0) {
    throw Error(ErrorCode::ParseError, "malformed header line '" + line + "', expected '" + tag + " <w> <h>'");
  }
}

std::ostream& full_precision(std::ostream& out) {
  return out << std::setprecision(std::numeric_limits<double>::max_digits10);
}

}  // namespace

PointCloud read_ply(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("ply", 0) != 0) {
    throw Error(ErrorCode::ParseError, path.string() + ": not a PLY file");
  }
  std::size_t vertex_count = 0;
  bool in_vertex = false;
  int prop_count = 0;
  int ix = -1;
  int iy = -1;
  int iz = -1;
  bool header_done = false;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt != "ascii") throw Error(ErrorCode::ParseError, "only ASCII PLY is supported");
    } else if (word == "element") {
      std::string name;
      std::size_t count = 0;
      ls >> name >> count;
      in_vertex = name == "vertex";
      if (in_vertex) vertex_count = count;
    } else if (word == "property" && in_vertex) {
      std::string type;
      std::string name;
      ls >> type >> name;
      if (type == "list") throw Error(ErrorCode::ParseError, "list properties on vertices are not supported");
      if (name == "x") ix = prop_count;
      if (name == "y") iy = prop_count;
      if (name == "z") iz = prop_count;
      ++prop_count;
    } else if (word == "end_header") {
      header_done = true;
      break;
    }
  }
  if (!header_done || ix < 0 || iy < 0 || iz < 0) {
    throw Error(ErrorCode::ParseError, path.string() + ": PLY header lacks vertex x/y/z");
  }
  PointCloud cloud;
  cloud.points.reserve(vertex_count);
  std::vector<double> row(static_cast<std::size_t>(prop_count));
  for (std::size_t i = 0; i < vertex_count; ++i) {
    if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, path.string() + ": truncated vertex list");
    std::istringstream ls(line);
    for (auto& value : row) {
      if (!(ls >> value)) throw Error(ErrorCode::ParseError, path.string() + ": bad vertex line '" + line + "'");
    }
    Vec3 p(row[static_cast<std::size_t>(ix)], row[static_cast<std::size_t>(iy)], row[static_cast<std::size_t>(iz)]);
    if (!p.allFinite()) throw Error(ErrorCode::ParseError, path.string() + ": non-finite vertex");
    cloud.points.push_back(p);
  }
  return cloud;
}

void write_ply(const std::filesystem::path& path, const PointCloud& cloud) {
  auto out = open_out(path);
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size()
      << "\nproperty double x\nproperty double y\nproperty double z\nend_header\n";
  full_precision(out);
  for (const auto& p : cloud.points) out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

PointCloud read_xyz(const std::filesystem::path& path) {
  auto in = open_in(path);
  PointCloud cloud;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    Vec3 p;
    if (!(ls >> p.x())) continue;  // blank line
    if (!(ls >> p.y() >> p.z()) || !p.allFinite()) {
      throw Error(ErrorCode::ParseError, path.string() + ": bad point line '" + line + "'");
    }
    cloud.points.push_back(p);
  }
  return cloud;
}

void write_xyz(const std::filesystem::path& path, const PointCloud& cloud) {
  auto out = open_out(path);
  full_precision(out);
  for (const auto& p : cloud.points) out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

PointCloud read_cloud(const std::filesystem::path& path) {
  return path.extension() == ".ply" ? read_ply(path) : read_xyz(path);
}

DepthMap read_depth(std::istream& in) {
  int w = 0;
  int h = 0;
  read_header(in, "DEPTH", w, h);
  DepthMap depth(w, h);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) depth.set(u, v, get_f32(in));
  }
  return depth;
}

void write_depth(std::ostream& out, const DepthMap& depth) {
  out << "DEPTH " << depth.width() << ' ' << depth.height() << '\n';
  for (int v = 0; v < depth.height(); ++v) {
    for (int u = 0; u < depth.width(); ++u) {
      put_f32(out, depth.valid(u, v) ? depth.at(u, v) : std::numeric_limits<double>::quiet_NaN());
    }
  }
}

DepthMap read_depth(const std::filesystem::path& path) {
  auto in = open_in(path, std::ios::in | std::ios::binary);
  return read_depth(in);
}

void write_depth(const std::filesystem::path& path, const DepthMap& depth) {
  auto out = open_out(path, std::ios::out | std::ios::binary);
  write_depth(out, depth);
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

NormalField read_normals(std::istream& in) {
  int w = 0;
  int h = 0;
  read_header(in, "NORMAL", w, h);
  NormalField field = NormalField::for_image(w, h);
  for (std::size_t i = 0; i < field.size(); ++i) {
    Vec3 n;
    n.x() = get_f32(in);
    n.y() = get_f32(in);
    n.z() = get_f32(in);
    if (n.allFinite()) {
      field.normals[i] = n;
      field.valid[i] = 1;
    }
  }
  return field;
}

void write_normals(std::ostream& out, const NormalField& field) {
  out << "NORMAL " << field.width << ' ' << field.height << '\n';
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < field.size(); ++i) {
    const bool ok = field.valid[i] != 0;
    for (int c = 0; c < 3; ++c) put_f32(out, ok ? field.normals[i][c] : nan);
  }
}

NormalField read_normals(const std::filesystem::path& path) {
  auto in = open_in(path, std::ios::in | std::ios::binary);
  return read_normals(in);
}

void write_normals(const std::filesystem::path& path, const NormalField& field) {
  auto out = open_out(path, std::ios::out | std::ios::binary);
  write_normals(out, field);
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

std::vector<Correspondence> read_correspondences(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("u,v,point_index,score", 0) != 0) {
    throw Error(ErrorCode::ParseError, path.string() + ": expected header u,v,point_index,score");
  }
  std::vector<Correspondence> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    for (char& ch : line) {
      if (ch == ',') ch = ' ';
    }
    std::istringstream ls(line);
    Correspondence c;
    if (!(ls >> c.pixel.x() >> c.pixel.y() >> c.point_index >> c.score)) {
      throw Error(ErrorCode::ParseError, path.string() + ":" + std::to_string(line_no) + ": malformed row");
    }
    out.push_back(c);
  }
  return out;
}

void write_correspondences(const std::filesystem::path& path, std::span<const Correspondence> corrs) {
  auto out = open_out(path);
  full_precision(out);
  out << "u,v,point_index,score\n";
  for (const auto& c : corrs) {
    out << c.pixel.x() << ',' << c.pixel.y() << ',' << c.point_index << ',' << c.score << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

}  // namespace i2preg::io
