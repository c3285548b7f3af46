#ifndef KCR_CHECKPOINT_HPP
#define KCR_CHECKPOINT_HPP

// Checkpoint (.kcm) layout, all integers little-endian:
//
//   "KCR1"                      4-byte magic
//   u32 header_length
//   header                      UTF-8 key=value lines describing ModelConfig
//   payload                     f32 parameters, layer order, kernel then bias
//   u32 crc32                   over everything after the magic
//
// Header keys: format, input (HxWxC), classes, class.<i> (percent-escaped
// name), layer.<i> (kind plus space-separated settings).

#include <zlib.h>

#include <bit>
#include <cctype>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "kcr/error.hpp"
#include "kcr/model.hpp"

namespace kcr {

inline constexpr char kCheckpointMagic[4] = {'K', 'C', 'R', '1'};
inline constexpr int kCheckpointFormat = 1;

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
  return std::uint32_t{p[0]} | std::uint32_t{p[1]} << 8 | std::uint32_t{p[2]} << 16 | std::uint32_t{p[3]} << 24;
}

inline std::uint32_t crc32_of(const std::uint8_t* data, std::size_t n) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  while (n > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(n, std::numeric_limits<uInt>::max()));
    crc = ::crc32(crc, data, chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '%' || c == '\n' || c == '\r') {
      static const char* hex = "0123456789ABCDEF";
      out += '%';
      out += hex[(static_cast<unsigned char>(c) >> 4) & 0xF];
      out += hex[static_cast<unsigned char>(c) & 0xF];
    } else {
      out += c;
    }
  }
  return out;
}

inline std::string unescape(const std::string& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '%') {
      if (i + 2 >= s.size() || !std::isxdigit(static_cast<unsigned char>(s[i + 1])) ||
          !std::isxdigit(static_cast<unsigned char>(s[i + 2]))) {
        throw CheckpointError(CheckpointError::Kind::Malformed, "checkpoint: bad escape in header");
      }
      out += static_cast<char>(std::stoi(s.substr(i + 1, 2), nullptr, 16));
      i += 2;
    } else {
      out += s[i];
    }
  }
  return out;
}

inline std::string double_text(double v) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return os.str();
}

inline std::string layer_text(const LayerSpec& s) {
  switch (s.kind) {
    case LayerKind::Rescaling: return "rescaling scale=" + double_text(s.scale);
    case LayerKind::Conv2D:
      return "conv2d filters=" + std::to_string(s.filters) + " kernel=" + std::to_string(s.kernel) +
             " stride=" + std::to_string(s.stride) + " padding=" + (s.padding == Padding::Same ? "same" : "valid");
    case LayerKind::MaxPool2D: return "maxpool2d pool=" + std::to_string(s.pool) + " stride=" + std::to_string(s.stride);
    case LayerKind::ReLU: return "relu";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::Dense: return "dense units=" + std::to_string(s.units);
    case LayerKind::Dropout: return "dropout rate=" + double_text(s.rate);
    case LayerKind::Softmax: return "softmax";
  }
  return "";
}

[[noreturn]] inline void malformed(const std::string& why) {
  throw CheckpointError(CheckpointError::Kind::Malformed, "checkpoint: malformed header (" + why + ")");
}

inline std::size_t parse_size(const std::string& s) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &pos);
  } catch (const std::exception&) {
    malformed("bad integer '" + s + "'");
  }
  if (pos != s.size()) malformed("bad integer '" + s + "'");
  return static_cast<std::size_t>(v);
}

inline double parse_double(const std::string& s) {
  std::istringstream is(s);
  is.imbue(std::locale::classic());
  double v = 0;
  if (!(is >> v) || !is.eof()) malformed("bad number '" + s + "'");
  return v;
}

inline LayerSpec parse_layer(const std::string& text) {
  std::istringstream is(text);
  std::string kind;
  is >> kind;
  std::map<std::string, std::string> kv;
  for (std::string tok; is >> tok;) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) malformed("layer setting '" + tok + "'");
    kv[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  auto need = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) malformed("layer '" + kind + "' lacks " + key);
    return it->second;
  };
  if (kind == "rescaling") return LayerSpec::rescaling(parse_double(need("scale")));
  if (kind == "conv2d") {
    const std::string& pad = need("padding");
    if (pad != "same" && pad != "valid") malformed("padding '" + pad + "'");
    return LayerSpec::conv(parse_size(need("filters")), parse_size(need("kernel")), parse_size(need("stride")),
                           pad == "same" ? Padding::Same : Padding::Valid);
  }
  if (kind == "maxpool2d") return LayerSpec::maxpool(parse_size(need("pool")), parse_size(need("stride")));
  if (kind == "relu") return LayerSpec::relu();
  if (kind == "flatten") return LayerSpec::flatten();
  if (kind == "dense") return LayerSpec::dense(parse_size(need("units")));
  if (kind == "dropout") return LayerSpec::dropout(parse_double(need("rate")));
  if (kind == "softmax") return LayerSpec::softmax();
  malformed("unknown layer kind '" + kind + "'");
}

inline std::string encode_header(const ModelConfig& c) {
  std::ostringstream os;
  const Shape& in = c.input_shape;
  os << "format=" << kCheckpointFormat << '\n';
  os << "input=" << in[0] << 'x' << in[1] << 'x' << in[2] << '\n';
  os << "classes=" << c.num_classes << '\n';
  for (std::size_t i = 0; i < c.class_names.size(); ++i) os << "class." << i << '=' << escape(c.class_names[i]) << '\n';
  for (std::size_t i = 0; i < c.layers.size(); ++i) os << "layer." << i << '=' << layer_text(c.layers[i]) << '\n';
  return os.str();
}

inline ModelConfig decode_header(const std::string& text) {
  std::map<std::string, std::string> kv;
  if (text.empty() || text.back() != '\n') malformed("header does not end with a newline");
  std::istringstream is(text);
  for (std::string line; std::getline(is, line);) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) malformed("line without '='");
    if (!kv.emplace(line.substr(0, eq), line.substr(eq + 1)).second) malformed("duplicate key");
  }
  auto it = kv.find("format");
  if (it == kv.end()) malformed("no format key");
  if (it->second != std::to_string(kCheckpointFormat)) {
    throw CheckpointError(CheckpointError::Kind::Version,
                          "checkpoint: format version " + it->second + " is not supported (expected " +
                              std::to_string(kCheckpointFormat) + ")");
  }
  ModelConfig c;
  if (!kv.count("input") || !kv.count("classes")) malformed("missing input or classes");
  {
    std::vector<std::size_t> dims;
    std::string in = kv["input"], part;
    std::istringstream ds(in);
    while (std::getline(ds, part, 'x')) dims.push_back(parse_size(part));
    if (dims.size() != 3) malformed("input shape '" + in + "'");
    try {
      c.input_shape = Shape(dims);
    } catch (const ShapeError&) {
      malformed("input shape '" + in + "'");
    }
  }
  c.num_classes = parse_size(kv["classes"]);
  for (std::size_t i = 0; kv.count("class." + std::to_string(i)); ++i) {
    c.class_names.push_back(unescape(kv["class." + std::to_string(i)]));
  }
  for (std::size_t i = 0; kv.count("layer." + std::to_string(i)); ++i) {
    c.layers.push_back(parse_layer(kv["layer." + std::to_string(i)]));
  }
  if (kv.size() != 3 + c.class_names.size() + c.layers.size()) malformed("unexpected header keys");
  return c;
}

}  // namespace detail

/// Serializes the model's configuration and parameters (as 32-bit floats).
template <typename T>
std::vector<std::uint8_t> checkpoint_bytes(SequentialModel<T>& model) {
  std::vector<std::uint8_t> out(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  const std::string header = detail::encode_header(model.config());
  detail::put_u32(out, static_cast<std::uint32_t>(header.size()));
  out.insert(out.end(), header.begin(), header.end());
  for (Param<T>* p : model.params()) {
    for (T v : p->value.data()) detail::put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  const std::uint32_t crc = detail::crc32_of(out.data() + 4, out.size() - 4);
  detail::put_u32(out, crc);
  return out;
}

template <typename T = float>
SequentialModel<T> checkpoint_from_bytes(std::span<const std::uint8_t> bytes) {
  using Kind = CheckpointError::Kind;
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw CheckpointError(Kind::NotACheckpoint, "not a checkpoint (bad magic)");
  }
  if (bytes.size() < 12) throw CheckpointError(Kind::Truncated, "checkpoint: truncated header");
  const std::uint32_t stored_crc = detail::get_u32(bytes.data() + bytes.size() - 4);
  const bool crc_ok = detail::crc32_of(bytes.data() + 4, bytes.size() - 8) == stored_crc;
  const std::size_t header_len = detail::get_u32(bytes.data() + 4);
  if (header_len > bytes.size() - 12) {
    if (!crc_ok) throw CheckpointError(Kind::Checksum, "checkpoint: checksum mismatch");
    throw CheckpointError(Kind::Malformed, "checkpoint: header length exceeds file size");
  }

  // Parse first so a short file reports truncation; any parse failure on a
  // file whose checksum is off is reported as the checksum failure it is.
  std::optional<SequentialModel<T>> model;
  try {
    const std::string header(reinterpret_cast<const char*>(bytes.data() + 8), header_len);
    model.emplace(SequentialModel<T>::build(detail::decode_header(header), 0));
  } catch (const CheckpointError&) {
    if (!crc_ok) throw CheckpointError(Kind::Checksum, "checkpoint: checksum mismatch");
    throw;
  } catch (const Error& e) {
    if (!crc_ok) throw CheckpointError(Kind::Checksum, "checkpoint: checksum mismatch");
    throw CheckpointError(Kind::Malformed, std::string("checkpoint: invalid model description: ") + e.what());
  }
  const std::size_t payload = model->total_params() * 4;
  const std::size_t expected = 8 + header_len + payload + 4;
  if (bytes.size() < expected) throw CheckpointError(Kind::Truncated, "checkpoint: truncated payload");
  if (bytes.size() > expected) {
    if (!crc_ok) throw CheckpointError(Kind::Checksum, "checkpoint: checksum mismatch");
    throw CheckpointError(Kind::Malformed, "checkpoint: trailing bytes after payload");
  }
  if (!crc_ok) throw CheckpointError(Kind::Checksum, "checkpoint: checksum mismatch");

  const std::uint8_t* p = bytes.data() + 8 + header_len;
  for (Param<T>* param : model->params()) {
    for (T& v : param->value.data()) {
      v = static_cast<T>(std::bit_cast<float>(detail::get_u32(p)));
      p += 4;
    }
  }
  return std::move(*model);
}

template <typename T>
void save_checkpoint(SequentialModel<T>& model, const std::filesystem::path& path) {
  const auto bytes = checkpoint_bytes(model);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw CheckpointError(CheckpointError::Kind::Io, "cannot write checkpoint " + path.string());
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw CheckpointError(CheckpointError::Kind::Io, "failed writing checkpoint " + path.string());
}

template <typename T = float>
SequentialModel<T> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError(CheckpointError::Kind::Io, "cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return checkpoint_from_bytes<T>(bytes);
}

}  // namespace kcr

#endif  // KCR_CHECKPOINT_HPP
