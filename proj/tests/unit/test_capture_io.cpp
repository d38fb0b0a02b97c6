#include <doctest.h>

#include <fstream>
#include <random>

#include "leosop/capture_io.hpp"
#include "leosop/errors.hpp"
#include "leosop/scenario.hpp"
#include "test_support.hpp"

using namespace leosop;
namespace lt = leosop::testing;

namespace {

CaptureMeta basic_meta(std::uint64_t n) {
  CaptureMeta m;
  m.sample_rate_hz = 1e6;
  m.center_freq_hz = 11.325e9;
  m.sample_count = n;
  return m;
}

void write_bytes(const std::filesystem::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("16-byte file holds four samples") {
  const auto dir = lt::scratch_dir("cio");
  write_bytes(dir / "a.iq", std::vector<std::uint8_t>(16, 0));
  const CaptureReader r(dir / "a.iq", basic_meta(4));
  CHECK(r.sample_count() == 4);
}

TEST_CASE("sample count must agree with file size") {
  const auto dir = lt::scratch_dir("cio");
  write_bytes(dir / "a.iq", std::vector<std::uint8_t>(16, 0));
  CHECK_THROWS_AS(CaptureReader(dir / "a.iq", basic_meta(5)), IoError);
  write_bytes(dir / "odd.iq", std::vector<std::uint8_t>(6, 0));
  CHECK_THROWS_AS(CaptureReader(dir / "odd.iq", basic_meta(1)), IoError);
  CHECK_THROWS_AS(CaptureReader(dir / "missing.iq", basic_meta(1)), IoError);
}

TEST_CASE("600 s at 100 MS/s is 240e9 bytes and a truncated file is rejected") {
  const CaptureMeta m = CaptureMeta::for_duration(100e6, 11.325e9, 600.0);
  CHECK(m.sample_count == 60'000'000'000ull);
  CHECK(m.data_bytes() == 240'000'000'000ull);
  const auto dir = lt::scratch_dir("cio");
  write_bytes(dir / "trunc.iq", std::vector<std::uint8_t>(4096, 0));
  CHECK_THROWS_AS(CaptureReader(dir / "trunc.iq", m), IoError);
}

TEST_CASE("single sample is little-endian I then Q") {
  const auto dir = lt::scratch_dir("cio");
  const ComplexVector x{{1.0, 2.0}};
  write_capture(dir / "one.iq", basic_meta(1), x);
  CHECK(read_bytes(dir / "one.iq") == std::vector<std::uint8_t>{0x01, 0x00, 0x02, 0x00});
}

TEST_CASE("empty stream gives an empty data file with valid metadata") {
  const auto dir = lt::scratch_dir("cio");
  write_capture(dir / "empty.iq", basic_meta(0), ComplexVector{});
  CHECK(std::filesystem::file_size(dir / "empty.iq") == 0);
  const CaptureMeta m = read_metadata(dir / "empty.iq");
  CHECK(m.sample_count == 0);
  CHECK(m.sample_rate_hz == 1e6);
  const CaptureReader r(dir / "empty.iq");
  CHECK(r.frame_count(10) == 0);
}

TEST_CASE("frame 0 decodes the leading samples in order") {
  const auto dir = lt::scratch_dir("cio");
  std::vector<std::uint8_t> bytes;
  std::vector<Complex> expect;
  for (int i = 0; i < 8; ++i) {
    const std::int16_t I = static_cast<std::int16_t>(100 * i - 300);
    const std::int16_t Q = static_cast<std::int16_t>(-7 * i + 1);
    for (std::int16_t v : {I, Q}) {
      const auto u = static_cast<std::uint16_t>(v);
      bytes.push_back(static_cast<std::uint8_t>(u & 0xff));
      bytes.push_back(static_cast<std::uint8_t>(u >> 8));
    }
    expect.emplace_back(I, Q);
  }
  write_bytes(dir / "k.iq", bytes);
  const CaptureReader r(dir / "k.iq", basic_meta(8));
  const FrameSignal f0 = r.read_frame(0, 4);
  const FrameSignal f1 = r.read_frame(1, 4);
  REQUIRE(f0.samples.size() == 4);
  REQUIRE(f1.samples.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(f0.samples[i] == expect[i]);
    CHECK(f1.samples[i] == expect[4 + i]);
  }
  CHECK(f1.frame_index == 1);
  CHECK_THROWS(r.read_frame(2, 4));
}

TEST_CASE("write then read of 1e6 integer-valued samples is lossless") {
  const auto dir = lt::scratch_dir("cio");
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> u(-32768, 32767);
  ComplexVector x(1'000'000);
  for (auto& v : x) v = {static_cast<double>(u(rng)), static_cast<double>(u(rng))};
  write_capture(dir / "big.iq", basic_meta(x.size()), x);
  const CaptureReader r(dir / "big.iq");
  const ComplexVector y = r.read_samples(0, x.size());
  CHECK(y == x);
}

TEST_CASE("gain scales stored values and is undone on read") {
  const auto dir = lt::scratch_dir("cio");
  const ComplexVector x{{0.25, -0.5}, {1.0, 0.0}};
  WriteOptions w;
  w.gain = 1000.0;
  CaptureMeta m = basic_meta(2);
  write_capture(dir / "g.iq", m, x, w);
  const CaptureReader r(dir / "g.iq");
  CHECK(r.meta().gain == 1000.0);
  CHECK(r.read_samples(0, 2) == x);
}

TEST_CASE("clipping beyond tolerance is an error") {
  const auto dir = lt::scratch_dir("cio");
  const ComplexVector x{{40000.0, 0.0}, {1.0, 1.0}};
  CHECK_THROWS_AS(write_capture(dir / "c.iq", basic_meta(2), x), IoError);
  bool clipped = false;
  CHECK(quantize_int16(-40000.0, clipped) == -32768);
  CHECK(clipped);
  clipped = false;
  CHECK(quantize_int16(2.5, clipped) == 3);
  CHECK(quantize_int16(-2.5, clipped) == -3);
  CHECK_FALSE(clipped);
}

TEST_CASE("sidecar round-trips extra annotations") {
  const auto dir = lt::scratch_dir("cio");
  CaptureMeta m = basic_meta(0);
  m.start_time_utc = 12.5;
  m.extra["frame_len"] = "5000";
  write_metadata(dir / "m.iq", m);
  const CaptureMeta back = read_metadata(dir / "m.iq");
  CHECK(back.start_time_utc == 12.5);
  CHECK(back.extra.at("frame_len") == "5000");
  CHECK(sidecar_path(dir / "m.iq").filename() == "m.iq.meta.json");
}

TEST_CASE("frame length rounds half away from zero") {
  CHECK(frame_length(1.0 / 750.0, 1.0 / 3.75e6) == 5000);
  CHECK(frame_length(2.5, 1.0) == 3);
  CHECK(frame_length(1.0 / 750.0, 1.0 / 240e6) == 320000);
}

TEST_CASE("simulated frames survive int16 quantization within half a step") {
  const auto dir = lt::scratch_dir("cio");
  const BeaconSpec spec = desk_beacon_spec(2);
  ScenarioConfig sc;
  sc.K_frames = 3;
  sc.fixed_dynamics = FixedDynamics{1234.0, -50.0, 0.4, 321, "SIM"};
  sc.snr_db = 0.0;
  const SyntheticCapture cap = synthesize_capture(sc, spec, build_beacon(spec));
  WriteOptions w;
  w.clip_tolerance = 1e-3;
  write_capture(dir / "s.iq", cap.meta, cap.concatenated(), w);
  const CaptureReader r(dir / "s.iq");
  CHECK(r.frame_count(spec.frame_len) == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    const FrameSignal f = r.read_frame(k, spec.frame_len);
    double worst = 0.0;
    for (std::size_t i = 0; i < f.samples.size(); ++i) {
      const Complex d = f.samples[i] - cap.frames[k].samples[i];
      worst = std::max({worst, std::abs(d.real()), std::abs(d.imag())});
    }
    CHECK(worst <= 0.5);
  }
}
