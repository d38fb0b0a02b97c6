#include "leosop/capture_io.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <array>
#include <bit>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "leosop/errors.hpp"

namespace leosop {
namespace {

using nlohmann::json;

std::int16_t load_le16(const unsigned char* p) {
  return static_cast<std::int16_t>(static_cast<std::uint16_t>(p[0]) |
                                   (static_cast<std::uint16_t>(p[1]) << 8));
}

void store_le16(std::int16_t v, unsigned char* p) {
  const auto u = static_cast<std::uint16_t>(v);
  p[0] = static_cast<unsigned char>(u & 0xff);
  p[1] = static_cast<unsigned char>(u >> 8);
}

std::string errno_text() { return std::strerror(errno); }

}  // namespace

void CaptureMeta::validate() const {
  if (!(sample_rate_hz > 0.0) || !std::isfinite(sample_rate_hz))
    throw ConfigError("capture metadata: sample_rate_hz must be > 0");
  if (!std::isfinite(center_freq_hz))
    throw ConfigError("capture metadata: center_freq_hz must be finite");
  if (!(gain > 0.0) || !std::isfinite(gain))
    throw ConfigError("capture metadata: gain must be > 0");
}

CaptureMeta CaptureMeta::for_duration(double sample_rate_hz, double center_freq_hz,
                                      double duration_s) {
  CaptureMeta meta;
  meta.sample_rate_hz = sample_rate_hz;
  meta.center_freq_hz = center_freq_hz;
  meta.sample_count = static_cast<std::uint64_t>(std::llround(sample_rate_hz * duration_s));
  meta.validate();
  return meta;
}

std::size_t frame_length(double frame_period_s, double sample_period_s) {
  if (!(frame_period_s > 0.0) || !(sample_period_s > 0.0))
    throw ConfigError("frame_length: periods must be positive");
  // std::llround rounds half away from zero
  return static_cast<std::size_t>(std::llround(frame_period_s / sample_period_s));
}

std::filesystem::path sidecar_path(const std::filesystem::path& data_path) {
  auto p = data_path;
  p += ".meta.json";
  return p;
}

void write_metadata(const std::filesystem::path& data_path, const CaptureMeta& meta) {
  json j;
  j["sample_rate_hz"] = meta.sample_rate_hz;
  j["center_freq_hz"] = meta.center_freq_hz;
  j["start_time_utc"] = meta.start_time_utc;
  j["quantization"] = "int16";
  j["byte_order"] = "little_endian";
  j["iq_order"] = "IQ";
  j["sample_count"] = meta.sample_count;
  j["gain"] = meta.gain;
  j["extra"] = meta.extra;
  std::ofstream out(sidecar_path(data_path));
  if (!out) throw IoError("cannot write metadata " + sidecar_path(data_path).string());
  out << j.dump(2) << '\n';
}

CaptureMeta read_metadata(const std::filesystem::path& data_path) {
  const auto path = sidecar_path(data_path);
  std::ifstream in(path);
  if (!in) throw IoError("missing capture metadata " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError("malformed capture metadata " + path.string() + ": " + e.what());
  }
  CaptureMeta meta;
  try {
    meta.sample_rate_hz = j.at("sample_rate_hz").get<double>();
    meta.center_freq_hz = j.at("center_freq_hz").get<double>();
    meta.start_time_utc = j.at("start_time_utc").get<double>();
    if (j.at("quantization").get<std::string>() != "int16")
      throw IoError("unsupported quantization in " + path.string());
    if (j.value("byte_order", "little_endian") != "little_endian" ||
        j.value("iq_order", "IQ") != "IQ")
      throw IoError("unsupported sample layout in " + path.string());
    meta.sample_count = j.value("sample_count", std::uint64_t{0});
    meta.gain = j.value("gain", 1.0);
    if (j.contains("extra")) meta.extra = j.at("extra").get<std::map<std::string, std::string>>();
  } catch (const json::exception& e) {
    throw IoError("invalid capture metadata " + path.string() + ": " + e.what());
  }
  meta.validate();
  return meta;
}

CaptureReader::CaptureReader(const std::filesystem::path& path, CaptureMeta meta)
    : meta_(std::move(meta)) {
  meta_.validate();
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec))
    throw IoError("capture file not found: " + path.string());
  const auto bytes = std::filesystem::file_size(path, ec);
  if (ec) throw IoError("cannot stat " + path.string() + ": " + ec.message());
  if (bytes % CaptureMeta::kBytesPerSample != 0)
    throw IoError("capture size " + std::to_string(bytes) +
                  " bytes is not a multiple of 4: " + path.string());
  const std::uint64_t samples = bytes / CaptureMeta::kBytesPerSample;
  if (meta_.sample_count != samples)
    throw IoError("capture metadata declares " + std::to_string(meta_.sample_count) +
                  " samples (" + std::to_string(meta_.data_bytes()) + " bytes) but " +
                  path.string() + " holds " + std::to_string(samples));
  fd_ = ::open(path.c_str(), O_RDONLY);
  if (fd_ < 0) throw IoError("cannot open " + path.string() + ": " + errno_text());
}

CaptureReader::CaptureReader(const std::filesystem::path& path)
    : CaptureReader(path, read_metadata(path)) {}

CaptureReader::~CaptureReader() {
  if (fd_ >= 0) ::close(fd_);
}

CaptureReader::CaptureReader(CaptureReader&& other) noexcept
    : fd_(std::exchange(other.fd_, -1)), meta_(std::move(other.meta_)) {}

CaptureReader& CaptureReader::operator=(CaptureReader&& other) noexcept {
  if (this != &other) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = std::exchange(other.fd_, -1);
    meta_ = std::move(other.meta_);
  }
  return *this;
}

std::uint64_t CaptureReader::frame_count(std::size_t frame_len) const {
  return frame_len == 0 ? 0 : meta_.sample_count / frame_len;
}

ComplexVector CaptureReader::read_samples(std::uint64_t offset, std::size_t count) const {
  if (offset > meta_.sample_count || count > meta_.sample_count - offset)
    throw IoError("read beyond end of capture (offset " + std::to_string(offset) +
                  ", count " + std::to_string(count) + ", total " +
                  std::to_string(meta_.sample_count) + ")");
  std::vector<unsigned char> raw(count * CaptureMeta::kBytesPerSample);
  std::size_t done = 0;
  const auto base = static_cast<off_t>(offset * CaptureMeta::kBytesPerSample);
  while (done < raw.size()) {
    const auto n = ::pread(fd_, raw.data() + done, raw.size() - done,
                           base + static_cast<off_t>(done));
    if (n < 0) {
      if (errno == EINTR) continue;
      throw IoError("read failed: " + errno_text());
    }
    if (n == 0) throw IoError("unexpected end of capture file");
    done += static_cast<std::size_t>(n);
  }
  ComplexVector out(count);
  const double scale = 1.0 / meta_.gain;
  for (std::size_t i = 0; i < count; ++i) {
    const unsigned char* p = raw.data() + i * CaptureMeta::kBytesPerSample;
    out[i] = Complex(load_le16(p) * scale, load_le16(p + 2) * scale);
  }
  return out;
}

FrameSignal CaptureReader::read_frame(std::uint64_t k, std::size_t frame_len) const {
  if (frame_len == 0) throw ConfigError("read_frame: frame length must be positive");
  if ((k + 1) * frame_len > meta_.sample_count)
    throw IoError("frame " + std::to_string(k) + " out of range (" +
                  std::to_string(frame_count(frame_len)) + " frames of " +
                  std::to_string(frame_len) + " samples)");
  return FrameSignal{read_samples(k * frame_len, frame_len), k};
}

std::int16_t quantize_int16(double value, bool& clipped) {
  constexpr double lo = std::numeric_limits<std::int16_t>::min();
  constexpr double hi = std::numeric_limits<std::int16_t>::max();
  const double r = std::round(value);  // half away from zero
  clipped = !(r >= lo && r <= hi);
  if (std::isnan(r)) return 0;
  return static_cast<std::int16_t>(r < lo ? lo : (r > hi ? hi : r));
}

CaptureWriter::CaptureWriter(const std::filesystem::path& path, CaptureMeta meta,
                             WriteOptions options)
    : path_(path), meta_(std::move(meta)), options_(options) {
  if (!(options_.gain > 0.0)) throw ConfigError("write gain must be > 0");
  if (options_.clip_tolerance < 0.0 || options_.clip_tolerance > 1.0)
    throw ConfigError("clip tolerance must lie in [0, 1]");
  meta_.gain = options_.gain;
  meta_.validate();
  file_ = std::fopen(path.c_str(), "wb");
  if (file_ == nullptr) throw IoError("cannot create " + path.string() + ": " + errno_text());
}

CaptureWriter::~CaptureWriter() {
  if (!closed_) {
    try {
      close();
    } catch (...) {
    }
  }
}

void CaptureWriter::write(std::span<const Complex> samples) {
  if (closed_) throw IoError("write on closed capture writer");
  std::vector<unsigned char> raw(samples.size() * CaptureMeta::kBytesPerSample);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    bool ci = false;
    bool cq = false;
    const auto iv = quantize_int16(samples[i].real() * options_.gain, ci);
    const auto qv = quantize_int16(samples[i].imag() * options_.gain, cq);
    if (ci || cq) ++clipped_;
    store_le16(iv, raw.data() + i * 4);
    store_le16(qv, raw.data() + i * 4 + 2);
  }
  if (!raw.empty() && std::fwrite(raw.data(), 1, raw.size(), file_) != raw.size())
    throw IoError("write failed on " + path_.string() + ": " + errno_text());
  written_ += samples.size();
}

void CaptureWriter::close() {
  if (closed_) return;
  closed_ = true;
  const bool ok = std::fclose(file_) == 0;
  file_ = nullptr;
  if (!ok) throw IoError("close failed on " + path_.string());
  meta_.sample_count = written_;
  write_metadata(path_, meta_);
  const double allowed = options_.clip_tolerance * static_cast<double>(written_);
  if (static_cast<double>(clipped_) > allowed)
    throw IoError(std::to_string(clipped_) + " of " + std::to_string(written_) +
                  " samples clipped to int16 range in " + path_.string());
}

void write_capture(const std::filesystem::path& path, CaptureMeta meta,
                   std::span<const Complex> samples, WriteOptions options) {
  CaptureWriter writer(path, std::move(meta), options);
  writer.write(samples);
  writer.close();
}

}  // namespace leosop
