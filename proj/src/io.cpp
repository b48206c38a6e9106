#include "patx/io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "patx/rng.hpp"

namespace patx::io {

namespace fs = std::filesystem;

std::vector<unsigned char> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path.string());
  in.seekg(0, std::ios::end);
  const auto n = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  std::vector<unsigned char> buf(n);
  if (n > 0) in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
  if (!in) throw std::runtime_error("short read: " + path.string());
  return buf;
}

void write_file(const fs::path& path, const void* data, std::size_t n) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write file: " + path.string());
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out) throw std::runtime_error("short write: " + path.string());
}

void write_text(const fs::path& path, const std::string& text) {
  write_file(path, text.data(), text.size());
}

std::string read_text(const fs::path& path) {
  auto buf = read_file(path);
  return std::string(buf.begin(), buf.end());
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  write_text(path, j.dump(2) + "\n");
}

nlohmann::json read_json(const fs::path& path) {
  return nlohmann::json::parse(read_text(path));
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

std::uint64_t file_hash(const fs::path& path) {
  auto buf = read_file(path);
  return fnv1a64(buf.data(), buf.size());
}

// ---------------------------------------------------------------------------
// npy

std::size_t NpyArray::element_count() const {
  std::size_t n = shape.empty() ? 0 : 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

namespace {

int dtype_size(const std::string& d) {
  if (d.size() != 2) throw std::runtime_error("npy: unsupported dtype " + d);
  return d[1] - '0';
}

std::string normalize_descr(std::string descr) {
  // strip quotes and byte-order chars; keep e.g. f4 / u1 / i2
  std::string out;
  for (char c : descr)
    if (c != '\'' && c != '"' && c != '<' && c != '|' && c != '=') out += c;
  if (out.size() != 2 || (out[0] != 'f' && out[0] != 'i' && out[0] != 'u'))
    throw std::runtime_error("npy: unsupported dtype " + descr);
  return out;
}

void write_npy_raw(const fs::path& path, const std::vector<int>& shape,
                   const std::string& descr, const void* data, std::size_t nbytes) {
  std::ostringstream shp;
  shp << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) shp << shape[i] << (shape.size() == 1 ? "," : (i + 1 < shape.size() ? ", " : ""));
  shp << ")";
  std::string header =
      "{'descr': '" + descr + "', 'fortran_order': False, 'shape': " + shp.str() + ", }";
  // pad so magic(6)+ver(2)+hlen(2)+header is a multiple of 64, ending in \n
  const std::size_t base = 10 + header.size() + 1;
  const std::size_t pad = (64 - base % 64) % 64;
  header.append(pad, ' ');
  header += '\n';
  std::string out;
  out += "\x93NUMPY";
  out += '\x01';
  out += '\x00';
  const auto hlen = static_cast<std::uint16_t>(header.size());
  out += static_cast<char>(hlen & 0xff);
  out += static_cast<char>(hlen >> 8);
  out += header;
  out.append(static_cast<const char*>(data), nbytes);
  write_file(path, out.data(), out.size());
}

}  // namespace

NpyArray load_npy(const fs::path& path) {
  auto buf = read_file(path);
  if (buf.size() < 12 || std::memcmp(buf.data(), "\x93NUMPY", 6) != 0)
    throw std::runtime_error("not an npy file: " + path.string());
  const int major = buf[6];
  std::size_t hlen, hoff;
  if (major == 1) {
    hlen = buf[8] | (buf[9] << 8);
    hoff = 10;
  } else {
    hlen = buf[8] | (buf[9] << 8) | (static_cast<std::size_t>(buf[10]) << 16) |
           (static_cast<std::size_t>(buf[11]) << 24);
    hoff = 12;
  }
  if (buf.size() < hoff + hlen) throw std::runtime_error("truncated npy header: " + path.string());
  const std::string header(buf.begin() + static_cast<long>(hoff),
                           buf.begin() + static_cast<long>(hoff + hlen));

  auto find_value = [&](const std::string& key) -> std::string {
    const auto kpos = header.find("'" + key + "'");
    if (kpos == std::string::npos) throw std::runtime_error("npy: missing key " + key);
    auto pos = header.find(':', kpos);
    ++pos;
    while (pos < header.size() && header[pos] == ' ') ++pos;
    std::size_t end = pos;
    if (header[pos] == '(') {
      end = header.find(')', pos) + 1;
    } else {
      end = header.find_first_of(",}", pos);
    }
    return header.substr(pos, end - pos);
  };

  NpyArray a;
  a.dtype = normalize_descr(find_value("descr"));
  if (find_value("fortran_order").find("True") != std::string::npos)
    throw std::runtime_error("npy: fortran order not supported: " + path.string());
  const std::string shp = find_value("shape");
  int cur = -1;
  for (char c : shp) {
    if (c >= '0' && c <= '9') {
      cur = (cur < 0 ? 0 : cur) * 10 + (c - '0');
    } else if (cur >= 0) {
      a.shape.push_back(cur);
      cur = -1;
    }
  }
  if (cur >= 0) a.shape.push_back(cur);

  const std::size_t nbytes = a.element_count() * static_cast<std::size_t>(dtype_size(a.dtype));
  if (buf.size() < hoff + hlen + nbytes)
    throw std::runtime_error("truncated npy payload: " + path.string());
  a.raw.assign(buf.begin() + static_cast<long>(hoff + hlen),
               buf.begin() + static_cast<long>(hoff + hlen + nbytes));
  return a;
}

namespace {

template <typename Out, typename In>
Tensor<Out> convert(const NpyArray& a) {
  Tensor<Out> t(a.shape);
  const In* src = reinterpret_cast<const In*>(a.raw.data());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<Out>(src[i]);
  return t;
}

template <typename Out>
Tensor<Out> dispatch(const NpyArray& a) {
  if (a.dtype == "f4") return convert<Out, float>(a);
  if (a.dtype == "f8") return convert<Out, double>(a);
  if (a.dtype == "i1") return convert<Out, std::int8_t>(a);
  if (a.dtype == "i2") return convert<Out, std::int16_t>(a);
  if (a.dtype == "i4") return convert<Out, std::int32_t>(a);
  if (a.dtype == "i8") return convert<Out, std::int64_t>(a);
  if (a.dtype == "u1") return convert<Out, std::uint8_t>(a);
  if (a.dtype == "u2") return convert<Out, std::uint16_t>(a);
  if (a.dtype == "u4") return convert<Out, std::uint32_t>(a);
  if (a.dtype == "u8") return convert<Out, std::uint64_t>(a);
  throw std::runtime_error("npy: unsupported dtype " + a.dtype);
}

}  // namespace

Tensor<float> npy_as_f32(const NpyArray& a) { return dispatch<float>(a); }
Tensor<int> npy_as_i32(const NpyArray& a) { return dispatch<int>(a); }
Tensor<std::uint8_t> npy_as_u8(const NpyArray& a) { return dispatch<std::uint8_t>(a); }

void save_npy(const fs::path& path, const Tensor<float>& t) {
  write_npy_raw(path, t.shape(), "<f4", t.data(), t.size() * 4);
}
void save_npy(const fs::path& path, const Tensor<std::uint8_t>& t) {
  write_npy_raw(path, t.shape(), "|u1", t.data(), t.size());
}
void save_npy(const fs::path& path, const Tensor<int>& t) {
  write_npy_raw(path, t.shape(), "<i4", t.data(), t.size() * 4);
}

// ---------------------------------------------------------------------------
// PNG

namespace {

void push_be32(std::vector<unsigned char>& v, std::uint32_t x) {
  v.push_back(static_cast<unsigned char>(x >> 24));
  v.push_back(static_cast<unsigned char>(x >> 16));
  v.push_back(static_cast<unsigned char>(x >> 8));
  v.push_back(static_cast<unsigned char>(x));
}

void push_chunk(std::vector<unsigned char>& out, const char type[4],
                const std::vector<unsigned char>& data) {
  push_be32(out, static_cast<std::uint32_t>(data.size()));
  std::vector<unsigned char> body(type, type + 4);
  body.insert(body.end(), data.begin(), data.end());
  out.insert(out.end(), body.begin(), body.end());
  push_be32(out, crc32(body.data(), body.size()));
}

std::uint32_t adler32(const unsigned char* data, std::size_t n) {
  std::uint32_t a = 1, b = 0;
  for (std::size_t i = 0; i < n; ++i) {
    a = (a + data[i]) % 65521;
    b = (b + a) % 65521;
  }
  return (b << 16) | a;
}

// zlib stream of stored (uncompressed) deflate blocks
std::vector<unsigned char> zlib_stored(const std::vector<unsigned char>& raw) {
  std::vector<unsigned char> z;
  z.push_back(0x78);
  z.push_back(0x01);
  std::size_t off = 0;
  do {
    const std::size_t len = std::min<std::size_t>(raw.size() - off, 65535);
    const bool final = off + len == raw.size();
    z.push_back(final ? 1 : 0);
    z.push_back(static_cast<unsigned char>(len & 0xff));
    z.push_back(static_cast<unsigned char>(len >> 8));
    z.push_back(static_cast<unsigned char>(~len & 0xff));
    z.push_back(static_cast<unsigned char>((~len >> 8) & 0xff));
    z.insert(z.end(), raw.begin() + static_cast<long>(off),
             raw.begin() + static_cast<long>(off + len));
    off += len;
  } while (off < raw.size());
  push_be32(z, adler32(raw.data(), raw.size()));
  return z;
}

}  // namespace

void write_png_rgb8(const fs::path& path, int height, int width,
                    const std::vector<unsigned char>& rgb) {
  if (rgb.size() != static_cast<std::size_t>(height) * width * 3)
    throw std::invalid_argument("write_png_rgb8: buffer size mismatch");
  std::vector<unsigned char> out = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  std::vector<unsigned char> ihdr;
  push_be32(ihdr, static_cast<std::uint32_t>(width));
  push_be32(ihdr, static_cast<std::uint32_t>(height));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(2);   // RGB
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  push_chunk(out, "IHDR", ihdr);

  std::vector<unsigned char> scan;
  scan.reserve(static_cast<std::size_t>(height) * (1 + 3 * width));
  for (int r = 0; r < height; ++r) {
    scan.push_back(0);  // filter: none
    const auto* row = rgb.data() + static_cast<std::size_t>(r) * width * 3;
    scan.insert(scan.end(), row, row + static_cast<std::size_t>(width) * 3);
  }
  push_chunk(out, "IDAT", zlib_stored(scan));
  push_chunk(out, "IEND", {});
  write_file(path, out.data(), out.size());
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {
constexpr char kCkptMagic[8] = {'P', 'X', 'C', 'K', 'P', 'T', '0', '1'};
}

void save_checkpoint(const fs::path& file, const nlohmann::json& manifest,
                     const std::vector<NamedTensor>& tensors) {
  std::vector<unsigned char> payload;
  nlohmann::json table = nlohmann::json::array();
  for (const auto& t : tensors) {
    nlohmann::json e;
    e["name"] = t.name;
    e["shape"] = t.shape;
    e["offset"] = payload.size();
    e["count"] = t.data.size();
    table.push_back(e);
    const auto* p = reinterpret_cast<const unsigned char*>(t.data.data());
    payload.insert(payload.end(), p, p + t.data.size() * sizeof(float));
  }

  nlohmann::json header;
  header["manifest"] = manifest;
  header["tensors"] = table;
  header["payload_crc32"] = crc32(payload.data(), payload.size());
  const std::string hstr = header.dump();

  std::vector<unsigned char> out(kCkptMagic, kCkptMagic + 8);
  const auto hlen = static_cast<std::uint32_t>(hstr.size());
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(hlen >> (8 * i)));
  out.insert(out.end(), hstr.begin(), hstr.end());
  out.insert(out.end(), payload.begin(), payload.end());
  write_file(file, out.data(), out.size());
  write_json(fs::path(file).concat(".json"), manifest);
}

Checkpoint load_checkpoint(const fs::path& file) {
  auto buf = read_file(file);
  if (buf.size() < 12 || std::memcmp(buf.data(), kCkptMagic, 8) != 0)
    throw std::runtime_error("not a checkpoint file: " + file.string());
  std::uint32_t hlen = 0;
  for (int i = 0; i < 4; ++i) hlen |= static_cast<std::uint32_t>(buf[8 + i]) << (8 * i);
  if (buf.size() < 12 + hlen) throw std::runtime_error("truncated checkpoint: " + file.string());
  const nlohmann::json header = nlohmann::json::parse(
      std::string(buf.begin() + 12, buf.begin() + 12 + hlen));

  const unsigned char* payload = buf.data() + 12 + hlen;
  const std::size_t payload_size = buf.size() - 12 - hlen;
  const std::uint32_t want = header.at("payload_crc32").get<std::uint32_t>();
  const std::uint32_t got = crc32(payload, payload_size);
  if (want != got)
    throw std::runtime_error("checksum mismatch in checkpoint " + file.string() +
                             " (stored " + std::to_string(want) + ", computed " +
                             std::to_string(got) + ")");

  Checkpoint ck;
  ck.manifest = header.at("manifest");
  for (const auto& e : header.at("tensors")) {
    NamedTensor t;
    t.name = e.at("name").get<std::string>();
    t.shape = e.at("shape").get<std::vector<int>>();
    const auto off = e.at("offset").get<std::size_t>();
    const auto count = e.at("count").get<std::size_t>();
    if (off + count * sizeof(float) > payload_size)
      throw std::runtime_error("corrupt tensor table in checkpoint " + file.string());
    t.data.resize(count);
    std::memcpy(t.data.data(), payload + off, count * sizeof(float));
    ck.tensors.push_back(std::move(t));
  }
  return ck;
}

}  // namespace patx::io
