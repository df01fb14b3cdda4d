#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "semican/io.hpp"

namespace semican {

namespace {

enum class PlyType { i8, u8, i16, u16, i32, u32, f32, f64 };

PlyType parse_type(const std::string& name, const fs::path& path) {
  if (name == "char" || name == "int8") return PlyType::i8;
  if (name == "uchar" || name == "uint8") return PlyType::u8;
  if (name == "short" || name == "int16") return PlyType::i16;
  if (name == "ushort" || name == "uint16") return PlyType::u16;
  if (name == "int" || name == "int32") return PlyType::i32;
  if (name == "uint" || name == "uint32") return PlyType::u32;
  if (name == "float" || name == "float32") return PlyType::f32;
  if (name == "double" || name == "float64") return PlyType::f64;
  throw Error(ErrorCode::MalformedFile, path.string() + ": unknown PLY type '" + name + "'");
}

std::size_t type_size(PlyType t) {
  switch (t) {
    case PlyType::i8:
    case PlyType::u8: return 1;
    case PlyType::i16:
    case PlyType::u16: return 2;
    case PlyType::i32:
    case PlyType::u32:
    case PlyType::f32: return 4;
    case PlyType::f64: return 8;
  }
  return 1;
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

  int find(const std::string& prop) const {
    for (std::size_t i = 0; i < properties.size(); ++i) {
      if (properties[i].name == prop) return static_cast<int>(i);
    }
    return -1;
  }
};

/// Sequential value reader over the PLY body in either encoding.
class PlyBody {
 public:
  PlyBody(const std::string& data, std::size_t offset, bool binary, const fs::path& path)
      : data_(data), pos_(offset), binary_(binary), path_(path) {
    if (!binary_) text_.str(data_.substr(offset));
  }

  double read(PlyType t) {
    if (!binary_) {
      double v;
      if (!(text_ >> v)) fail();
      return v;
    }
    const std::size_t n = type_size(t);
    if (pos_ + n > data_.size()) fail();
    std::uint64_t raw = 0;
    std::memcpy(&raw, data_.data() + pos_, n);  // little-endian host assumed below
    pos_ += n;
    static_assert(std::endian::native == std::endian::little, "binary PLY reading assumes a little-endian host");
    switch (t) {
      case PlyType::i8: return static_cast<std::int8_t>(raw);
      case PlyType::u8: return static_cast<std::uint8_t>(raw);
      case PlyType::i16: return static_cast<std::int16_t>(raw);
      case PlyType::u16: return static_cast<std::uint16_t>(raw);
      case PlyType::i32: return static_cast<std::int32_t>(raw);
      case PlyType::u32: return static_cast<std::uint32_t>(raw);
      case PlyType::f32: return std::bit_cast<float>(static_cast<std::uint32_t>(raw));
      case PlyType::f64: return std::bit_cast<double>(raw);
    }
    return 0.0;
  }

 private:
  [[noreturn]] void fail() const { throw Error(ErrorCode::MalformedFile, path_.string() + ": truncated PLY body"); }

  const std::string& data_;
  std::size_t pos_;
  bool binary_;
  std::istringstream text_;
  const fs::path& path_;
};

struct PlyFile {
  std::string data;
  std::vector<PlyElement> elements;
  std::size_t body_offset = 0;
  bool binary = false;
};

PlyFile parse_header(const fs::path& path) {
  PlyFile f;
  f.data = read_text_file(path);
  const std::string marker = "end_header";
  const auto end = f.data.find(marker);
  if (f.data.rfind("ply", 0) != 0 || end == std::string::npos) {
    throw Error(ErrorCode::MalformedFile, path.string() + " is not a PLY file");
  }
  std::size_t body = end + marker.size();
  if (body < f.data.size() && f.data[body] == '\r') ++body;
  if (body < f.data.size() && f.data[body] == '\n') ++body;
  f.body_offset = body;

  std::istringstream header(f.data.substr(0, end));
  std::string line;
  bool have_format = false;
  while (std::getline(header, line)) {
    std::istringstream tok(line);
    std::string kw;
    tok >> kw;
    if (kw == "format") {
      std::string enc;
      tok >> enc;
      if (enc == "ascii") {
        f.binary = false;
      } else if (enc == "binary_little_endian") {
        f.binary = true;
      } else {
        throw Error(ErrorCode::MalformedFile, path.string() + ": unsupported PLY encoding '" + enc + "'");
      }
      have_format = true;
    } else if (kw == "element") {
      PlyElement e;
      if (!(tok >> e.name >> e.count)) throw Error(ErrorCode::MalformedFile, path.string() + ": bad element line");
      f.elements.push_back(e);
    } else if (kw == "property") {
      if (f.elements.empty()) throw Error(ErrorCode::MalformedFile, path.string() + ": property before element");
      PlyProperty p;
      std::string type;
      tok >> type;
      if (type == "list") {
        std::string count_type, item_type;
        tok >> count_type >> item_type >> p.name;
        p.is_list = true;
        p.count_type = parse_type(count_type, path);
        p.type = parse_type(item_type, path);
      } else {
        p.type = parse_type(type, path);
        tok >> p.name;
      }
      f.elements.back().properties.push_back(p);
    }
  }
  if (!have_format) throw Error(ErrorCode::MalformedFile, path.string() + ": missing format line");
  return f;
}

struct PlyData {
  std::vector<std::vector<double>> vertex_values;  // per vertex, scalar properties in order
  const PlyElement* vertex = nullptr;
  std::vector<std::vector<int>> faces;
};

PlyData read_body(const PlyFile& f, const fs::path& path) {
  PlyData out;
  PlyBody body(f.data, f.body_offset, f.binary, path);
  for (const auto& e : f.elements) {
    const bool is_vertex = e.name == "vertex";
    const bool is_face = e.name == "face";
    if (is_vertex) out.vertex = &e;
    for (std::size_t i = 0; i < e.count; ++i) {
      std::vector<double> scalars;
      for (const auto& p : e.properties) {
        if (p.is_list) {
          const auto n = static_cast<long long>(body.read(p.count_type));
          if (n < 0) throw Error(ErrorCode::MalformedFile, path.string() + ": negative list length");
          std::vector<int> items(static_cast<std::size_t>(n));
          for (auto& item : items) item = static_cast<int>(body.read(p.type));
          if (is_face && (p.name == "vertex_indices" || p.name == "vertex_index")) out.faces.push_back(std::move(items));
          scalars.push_back(0.0);
        } else {
          scalars.push_back(body.read(p.type));
        }
      }
      if (is_vertex) out.vertex_values.push_back(std::move(scalars));
    }
  }
  if (out.vertex == nullptr) throw Error(ErrorCode::MalformedFile, path.string() + ": no vertex element");
  return out;
}

void append_le(std::string& out, const void* value, std::size_t n) {
  out.append(static_cast<const char*>(value), n);
}

}  // namespace

PointCloud read_ply_cloud(const fs::path& path) {
  const PlyFile f = parse_header(path);
  const PlyData d = read_body(f, path);
  const int ix = d.vertex->find("x"), iy = d.vertex->find("y"), iz = d.vertex->find("z");
  if (ix < 0 || iy < 0 || iz < 0) throw Error(ErrorCode::MalformedFile, path.string() + ": vertices lack x/y/z");
  const int ii = d.vertex->find("intensity");
  PointCloud cloud;
  cloud.frame_id = path.stem().string();
  for (const auto& v : d.vertex_values) {
    if (ii >= 0) {
      cloud.push_back(Point3(v[ix], v[iy], v[iz]), static_cast<float>(v[ii]));
    } else {
      cloud.push_back(Point3(v[ix], v[iy], v[iz]));
    }
  }
  cloud.validate();
  return cloud;
}

TriangleMesh read_ply_mesh(const fs::path& path) {
  const PlyFile f = parse_header(path);
  const PlyData d = read_body(f, path);
  const int ix = d.vertex->find("x"), iy = d.vertex->find("y"), iz = d.vertex->find("z");
  if (ix < 0 || iy < 0 || iz < 0) throw Error(ErrorCode::MalformedFile, path.string() + ": vertices lack x/y/z");
  const int nx = d.vertex->find("nx"), ny = d.vertex->find("ny"), nz = d.vertex->find("nz");
  TriangleMesh mesh;
  for (const auto& v : d.vertex_values) mesh.vertices.emplace_back(v[ix], v[iy], v[iz]);
  const int n = static_cast<int>(mesh.vertices.size());
  for (const auto& face : d.faces) {
    for (const int idx : face) {
      if (idx < 0 || idx >= n) throw Error(ErrorCode::MalformedFile, path.string() + ": face index out of range");
    }
    for (std::size_t k = 1; k + 1 < face.size(); ++k) mesh.triangles.push_back({face[0], face[k], face[k + 1]});
  }
  if (nx >= 0 && ny >= 0 && nz >= 0) {
    for (const auto& v : d.vertex_values) {
      Eigen::Vector3d nrm(v[nx], v[ny], v[nz]);
      mesh.normals.push_back(nrm.norm() > 0.0 ? Eigen::Vector3d(nrm.normalized()) : Eigen::Vector3d::UnitZ());
    }
  } else {
    mesh.normals.assign(mesh.vertices.size(), Eigen::Vector3d::Zero());
    for (const auto& t : mesh.triangles) {
      const Eigen::Vector3d fn =
          (mesh.vertices[t[1]] - mesh.vertices[t[0]]).cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]);
      for (const int i : t) mesh.normals[i] += fn;
    }
    for (auto& nrm : mesh.normals) nrm = nrm.norm() > 0.0 ? Eigen::Vector3d(nrm.normalized()) : Eigen::Vector3d::UnitZ();
  }
  return mesh;
}

void write_ply(const fs::path& path, const PointCloud& cloud, PlyEncoding encoding) {
  cloud.validate();
  const bool binary = encoding == PlyEncoding::binary_little_endian;
  std::ostringstream head;
  head << "ply\nformat " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n"
       << "element vertex " << cloud.size() << "\n"
       << "property double x\nproperty double y\nproperty double z\n";
  if (cloud.has_intensity()) head << "property float intensity\n";
  head << "end_header\n";
  std::string out = head.str();
  if (binary) {
    static_assert(std::endian::native == std::endian::little, "binary PLY writing assumes a little-endian host");
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      for (int k = 0; k < 3; ++k) append_le(out, &cloud.points[i][k], 8);
      if (cloud.has_intensity()) append_le(out, &cloud.intensity[i], 4);
    }
  } else {
    std::ostringstream body;
    body << std::setprecision(17);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      body << cloud.points[i].x() << ' ' << cloud.points[i].y() << ' ' << cloud.points[i].z();
      if (cloud.has_intensity()) body << ' ' << std::setprecision(9) << cloud.intensity[i] << std::setprecision(17);
      body << '\n';
    }
    out += body.str();
  }
  write_text_file(path, out);
}

void write_ply(const fs::path& path, const TriangleMesh& mesh, PlyEncoding encoding) {
  const bool binary = encoding == PlyEncoding::binary_little_endian;
  const bool normals = mesh.normals.size() == mesh.vertices.size();
  std::ostringstream head;
  head << "ply\nformat " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n"
       << "element vertex " << mesh.vertices.size() << "\n"
       << "property double x\nproperty double y\nproperty double z\n";
  if (normals) head << "property double nx\nproperty double ny\nproperty double nz\n";
  head << "element face " << mesh.triangles.size() << "\n"
       << "property list uchar int vertex_indices\nend_header\n";
  std::string out = head.str();
  if (binary) {
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
      for (int k = 0; k < 3; ++k) append_le(out, &mesh.vertices[i][k], 8);
      if (normals) {
        for (int k = 0; k < 3; ++k) append_le(out, &mesh.normals[i][k], 8);
      }
    }
    for (const auto& t : mesh.triangles) {
      const std::uint8_t three = 3;
      append_le(out, &three, 1);
      for (const int v : t) {
        const std::int32_t idx = v;
        append_le(out, &idx, 4);
      }
    }
  } else {
    std::ostringstream body;
    body << std::setprecision(17);
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
      body << mesh.vertices[i].x() << ' ' << mesh.vertices[i].y() << ' ' << mesh.vertices[i].z();
      if (normals) body << ' ' << mesh.normals[i].x() << ' ' << mesh.normals[i].y() << ' ' << mesh.normals[i].z();
      body << '\n';
    }
    for (const auto& t : mesh.triangles) body << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
    out += body.str();
  }
  write_text_file(path, out);
}

}  // namespace semican
