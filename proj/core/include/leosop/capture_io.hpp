#pragma once

// Raw IQ capture files: headerless little-endian interleaved int16 I,Q with a
// JSON sidecar (`<data>.meta.json`) describing sample rate, carrier and start
// time. Samples are converted to complex<double> using raw integer values
// divided by the declared gain (1.0 for recorder output).

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>

#include "leosop/types.hpp"

namespace leosop {

enum class Quantization { int16 };

struct CaptureMeta {
  double sample_rate_hz = 0.0;
  double center_freq_hz = 0.0;
  double start_time_utc = 0.0;
  Quantization quantization = Quantization::int16;
  std::uint64_t sample_count = 0;
  /// float sample = raw int16 / gain
  double gain = 1.0;
  /// Free-form string/number annotations carried in the sidecar
  /// (frame length, frame stride, beacon ambiguities, ...).
  std::map<std::string, std::string> extra;

  static constexpr std::uint64_t kBytesPerSample = 4;

  std::uint64_t data_bytes() const { return sample_count * kBytesPerSample; }

  /// Throws ConfigError when an invariant is violated.
  void validate() const;

  /// Metadata for a recording of `duration_s` seconds at `sample_rate_hz`.
  static CaptureMeta for_duration(double sample_rate_hz, double center_freq_hz,
                                  double duration_s);
};

struct FrameSignal {
  ComplexVector samples;
  std::uint64_t frame_index = 0;
};

/// Samples per frame, round(frame_period / sample_period) with ties away from zero.
std::size_t frame_length(double frame_period_s, double sample_period_s);

std::filesystem::path sidecar_path(const std::filesystem::path& data_path);
void write_metadata(const std::filesystem::path& data_path, const CaptureMeta& meta);
CaptureMeta read_metadata(const std::filesystem::path& data_path);

/// Random-access reader. Reads go through pread(), so one reader may be shared
/// across threads.
class CaptureReader {
 public:
  /// Opens `path` and checks it against `meta`. Throws IoError for a missing
  /// file, a size that is not a multiple of 4 bytes, or a sample_count that
  /// disagrees with the file size.
  CaptureReader(const std::filesystem::path& path, CaptureMeta meta);
  /// Same, with metadata loaded from the sidecar.
  explicit CaptureReader(const std::filesystem::path& path);
  ~CaptureReader();

  CaptureReader(const CaptureReader&) = delete;
  CaptureReader& operator=(const CaptureReader&) = delete;
  CaptureReader(CaptureReader&& other) noexcept;
  CaptureReader& operator=(CaptureReader&& other) noexcept;

  const CaptureMeta& meta() const { return meta_; }
  std::uint64_t sample_count() const { return meta_.sample_count; }
  std::uint64_t frame_count(std::size_t frame_len) const;

  ComplexVector read_samples(std::uint64_t offset, std::size_t count) const;

  /// Frame k covers samples [k*frame_len, (k+1)*frame_len).
  FrameSignal read_frame(std::uint64_t k, std::size_t frame_len) const;

 private:
  int fd_ = -1;
  CaptureMeta meta_;
};

struct WriteOptions {
  /// Stored int16 = round(sample * gain).
  double gain = 1.0;
  /// Maximum fraction of clipped samples before close() throws.
  double clip_tolerance = 0.0;
};

/// Append-only writer; the sidecar is written on close().
class CaptureWriter {
 public:
  CaptureWriter(const std::filesystem::path& path, CaptureMeta meta,
                WriteOptions options = {});
  ~CaptureWriter();

  CaptureWriter(const CaptureWriter&) = delete;
  CaptureWriter& operator=(const CaptureWriter&) = delete;

  void write(std::span<const Complex> samples);

  /// Flushes data and sidecar. Throws IoError when the clipped fraction
  /// exceeds the configured tolerance (the files are still written).
  void close();

  std::uint64_t samples_written() const { return written_; }
  std::uint64_t clipped_samples() const { return clipped_; }

 private:
  std::filesystem::path path_;
  CaptureMeta meta_;
  WriteOptions options_;
  std::FILE* file_ = nullptr;
  std::uint64_t written_ = 0;
  std::uint64_t clipped_ = 0;
  bool closed_ = false;
};

void write_capture(const std::filesystem::path& path, CaptureMeta meta,
                   std::span<const Complex> samples, WriteOptions options = {});

/// int16 conversion used by the writer, rounding half away from zero.
/// Sets `clipped` when the value saturated.
std::int16_t quantize_int16(double value, bool& clipped);

}  // namespace leosop
