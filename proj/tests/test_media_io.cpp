#include "vidcensor/media_io.hpp"

#include <gtest/gtest.h>

#include <string>

#include "support/test_util.hpp"

namespace vc = vidcensor;
using vc::testing::random_frame;
using vc::testing::random_track;

namespace {

std::vector<std::uint8_t> bytes_of(const std::string& s) {
  return std::vector<std::uint8_t>(s.begin(), s.end());
}

TEST(ReadY4m, Parses8BitC444Header) {
  std::string data = "YUV4MPEG2 W2 H2 F10:1 C444\n";
  data += "FRAME\n";
  data += std::string(12, static_cast<char>(128));  // 3 planes of 4 bytes
  const auto stream = vc::read_y4m(bytes_of(data));
  ASSERT_EQ(stream.frames.size(), 1u);
  EXPECT_EQ(stream.frame_rate, (vc::FrameRate{10, 1}));
  EXPECT_EQ(stream.frames[0].width, 2u);
  EXPECT_EQ(stream.frames[0].height, 2u);
}

TEST(ReadY4m, GrayPointMapsToGrayRgb) {
  std::string data = "YUV4MPEG2 W2 H2 F10:1 C444\n";
  data += "FRAME\n";
  data += std::string(12, static_cast<char>(128));
  const auto stream = vc::read_y4m(bytes_of(data));
  for (std::uint8_t v : stream.frames[0].pixels) EXPECT_EQ(v, 128);
}

TEST(ReadY4m, BadMagicRejected) {
  try {
    vc::read_y4m(bytes_of("MPEG4 W2 H2\nFRAME\n"));
    FAIL() << "expected InputError";
  } catch (const vc::InputError& e) {
    EXPECT_NE(std::string(e.what()).find("not a Y4M stream"),
              std::string::npos);
  }
}

TEST(ReadY4m, MissingFrameMarkerIsTruncatedStream) {
  std::string data = "YUV4MPEG2 W2 H2 F10:1 C444\n";
  data += "BLOB\n";
  data += std::string(12, '\0');
  try {
    vc::read_y4m(bytes_of(data));
    FAIL() << "expected InputError";
  } catch (const vc::InputError& e) {
    EXPECT_NE(std::string(e.what()).find("truncated stream"),
              std::string::npos);
  }
}

TEST(ReadY4m, ShortPayloadIsTruncatedStream) {
  std::string data = "YUV4MPEG2 W2 H2 F10:1 C444\nFRAME\n";
  data += std::string(5, '\0');  // needs 12
  try {
    vc::read_y4m(bytes_of(data));
    FAIL() << "expected InputError";
  } catch (const vc::InputError& e) {
    EXPECT_NE(std::string(e.what()).find("truncated stream"),
              std::string::npos);
  }
}

TEST(ReadY4m, UnsupportedColorspaceRejected) {
  EXPECT_THROW(vc::read_y4m(bytes_of("YUV4MPEG2 W2 H2 F10:1 C422\nFRAME\n")),
               vc::InputError);
}

TEST(ReadY4m, C420ChromaIsUpsampled) {
  // 2x2 frame: Y plane 4 bytes, one chroma sample per plane.
  std::string data = "YUV4MPEG2 W2 H2 F25:1 C420\n";
  data += "FRAME\n";
  const char y[4] = {76, 76, 76, 76};
  data.append(y, 4);
  data += static_cast<char>(84);   // Cb
  data += static_cast<char>(255);  // Cr
  const auto stream = vc::read_y4m(bytes_of(data));
  // BT.601 inverse of (76, 84, 255): a strong red for every pixel.
  for (std::size_t px = 0; px < 4; ++px) {
    EXPECT_EQ(stream.frames[0].pixels[px * 3 + 0], 254);
    EXPECT_EQ(stream.frames[0].pixels[px * 3 + 1], 0);
    EXPECT_EQ(stream.frames[0].pixels[px * 3 + 2], 0);
  }
}

TEST(WriteY4m, HeaderCarriesGeometry) {
  const std::vector<vc::Frame> frames = {vc::make_frame(2, 2, 10)};
  const auto bytes = vc::write_y4m({10, 1}, frames);
  const std::string text(bytes.begin(), bytes.end());
  EXPECT_EQ(text.rfind("YUV4MPEG2 W2 H2", 0), 0u);
}

TEST(WriteY4m, EmptyFrameListRejected) {
  EXPECT_THROW(vc::write_y4m({10, 1}, {}), vc::InputError);
}

TEST(WriteY4m, MixedDimensionsRejected) {
  const std::vector<vc::Frame> frames = {vc::make_frame(2, 2),
                                         vc::make_frame(4, 2)};
  try {
    vc::write_y4m({10, 1}, frames);
    FAIL() << "expected InputError";
  } catch (const vc::InputError& e) {
    EXPECT_NE(std::string(e.what()).find("incompatible frames"),
              std::string::npos);
  }
}

TEST(Y4mRoundtrip, RandomFramesAreBitExact) {
  vc::SplitMix64 rng(31);
  for (int trial = 0; trial < 8; ++trial) {
    std::vector<vc::Frame> frames;
    const std::uint32_t w = 1 + rng.next_below(12);
    const std::uint32_t h = 1 + rng.next_below(12);
    const std::size_t count = 1 + rng.next_below(4);
    for (std::size_t i = 0; i < count; ++i) {
      frames.push_back(random_frame(w, h, rng));
    }
    const vc::FrameRate rate{static_cast<std::uint32_t>(1 + rng.next_below(60)),
                             static_cast<std::uint32_t>(1 + rng.next_below(2))};
    const auto stream = vc::read_y4m(vc::write_y4m(rate, frames));
    EXPECT_EQ(stream.frame_rate, rate);
    EXPECT_EQ(stream.frames, frames);
  }
}

TEST(Y4mRoundtrip, SaturatedCornersSurvive) {
  // Pure red/blue push full-range chroma to 255.5; the 16-bit plane layout
  // must carry that without clamping.
  vc::Frame f = vc::make_frame(2, 1);
  f.pixels = {255, 0, 0, 0, 0, 255};
  const auto stream = vc::read_y4m(vc::write_y4m({1, 1}, {f}));
  EXPECT_EQ(stream.frames[0].pixels, f.pixels);
}

TEST(ReadWav, SilentSecondHasExpectedShape) {
  vc::AudioTrack track;
  track.sample_rate = 8000;
  track.samples.assign(8000, 0);
  const auto parsed = vc::read_wav(vc::write_wav(track));
  EXPECT_EQ(parsed.sample_rate, 8000u);
  EXPECT_EQ(parsed.samples.size(), 8000u);
  EXPECT_NEAR(parsed.duration_seconds(), 1.0, 1e-12);
}

TEST(WavRoundtrip, RandomSamplesAreBitExact) {
  vc::SplitMix64 rng(32);
  for (int trial = 0; trial < 10; ++trial) {
    const auto track = random_track(
        static_cast<std::uint32_t>(4000 + rng.next_below(44100)),
        rng.next_below(5000), rng);
    EXPECT_EQ(vc::read_wav(vc::write_wav(track)), track);
  }
}

TEST(WavRoundtrip, CanonicalBytesAreStable) {
  vc::SplitMix64 rng(33);
  const auto track = random_track(22050, 977, rng);
  const auto bytes = vc::write_wav(track);
  EXPECT_EQ(vc::write_wav(vc::read_wav(bytes)), bytes);
}

TEST(ReadWav, FloatFormatRejected) {
  vc::AudioTrack track;
  track.sample_rate = 8000;
  track.samples.assign(16, 0);
  auto bytes = vc::write_wav(track);
  bytes[20] = 3;  // fmt code IEEE float
  try {
    vc::read_wav(bytes);
    FAIL() << "expected InputError";
  } catch (const vc::InputError& e) {
    EXPECT_NE(std::string(e.what()).find("unsupported WAV variant"),
              std::string::npos);
  }
}

TEST(ReadWav, StereoRejected) {
  vc::AudioTrack track;
  track.sample_rate = 8000;
  track.samples.assign(16, 0);
  auto bytes = vc::write_wav(track);
  bytes[22] = 2;  // channel count
  EXPECT_THROW(vc::read_wav(bytes), vc::InputError);
}

TEST(ReadWav, BadRiffRejected) {
  try {
    vc::read_wav(bytes_of("RIFX....WAVE"));
    FAIL() << "expected InputError";
  } catch (const vc::InputError& e) {
    EXPECT_NE(std::string(e.what()).find("not a WAV file"),
              std::string::npos);
  }
}

TEST(ReadWav, UnknownChunksAreSkipped) {
  vc::AudioTrack track;
  track.sample_rate = 8000;
  track.samples = {1, -2, 3, -4};
  auto bytes = vc::write_wav(track);
  // Splice a LIST chunk between fmt and data.
  const std::string extra("LIST\x04\x00\x00\x00INFO", 12);
  bytes.insert(bytes.begin() + 36, extra.begin(), extra.end());
  // Patch the RIFF size.
  const std::uint32_t riff = static_cast<std::uint32_t>(bytes.size() - 8);
  bytes[4] = riff & 0xFF;
  bytes[5] = (riff >> 8) & 0xFF;
  bytes[6] = (riff >> 16) & 0xFF;
  bytes[7] = (riff >> 24) & 0xFF;
  EXPECT_EQ(vc::read_wav(bytes), track);
}

TEST(ReadY4m, AbsurdDimensionsRejected) {
  const std::string data =
      "YUV4MPEG2 W4294967295 H4294967295 F1:1 C444\nFRAME\n";
  try {
    vc::read_y4m(bytes_of(data));
    FAIL() << "expected InputError";
  } catch (const vc::InputError& e) {
    EXPECT_NE(std::string(e.what()).find("dimensions out of range"),
              std::string::npos);
  }
}

// Random single-byte mutations must produce clean errors or parsed data,
// never crashes or reads past the buffer.
TEST(Fuzz, MutatedStreamsNeverCrash) {
  vc::SplitMix64 rng(34);
  vc::AudioTrack track = random_track(8000, 300, rng);
  const auto wav = vc::write_wav(track);
  const auto y4m = vc::write_y4m({10, 1}, {random_frame(6, 4, rng)});

  for (int trial = 0; trial < 400; ++trial) {
    auto mutated = trial % 2 == 0 ? wav : y4m;
    const std::size_t pos = rng.next_below(mutated.size());
    mutated[pos] = static_cast<std::uint8_t>(rng.next_below(256));
    const std::size_t cut = rng.next_below(mutated.size() + 1);
    mutated.resize(cut);
    try {
      if (trial % 2 == 0) {
        (void)vc::read_wav(mutated);
      } else {
        (void)vc::read_y4m(mutated);
      }
    } catch (const vc::InputError&) {
      // expected for most mutations
    }
  }
}

}  // namespace
