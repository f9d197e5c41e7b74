#include "aasist3/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

namespace aasist3 {

const char* wav_error_name(WavError e) {
  switch (e) {
    case WavError::kBadHeader: return "bad-header";
    case WavError::kNotPcm: return "not-pcm";
    case WavError::kBadChannels: return "bad-channels";
    case WavError::kBadRate: return "bad-rate";
    case WavError::kBadDepth: return "bad-depth";
    case WavError::kTruncated: return "truncated";
  }
  return "unknown";
}

namespace {

std::uint16_t u16le(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u16le(std::ofstream& out, std::uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
  out.write(b, 2);
}

void put_u32le(std::ofstream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

void read_exact(std::ifstream& in, unsigned char* buf, std::size_t n, const std::string& path) {
  in.read(reinterpret_cast<char*>(buf), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw WavException(WavError::kTruncated, path + ": unexpected end of file");
  }
}

}  // namespace

AudioSignal read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw WavException(WavError::kBadHeader, path + ": cannot open file");
  }
  unsigned char hdr[12];
  read_exact(in, hdr, 12, path);
  if (std::memcmp(hdr, "RIFF", 4) != 0 || std::memcmp(hdr + 8, "WAVE", 4) != 0) {
    throw WavException(WavError::kBadHeader, path + ": not a RIFF/WAVE file");
  }

  bool have_fmt = false;
  std::vector<std::int16_t> pcm;
  bool have_data = false;
  while (!have_data) {
    unsigned char chunk_hdr[8];
    in.read(reinterpret_cast<char*>(chunk_hdr), 8);
    if (in.gcount() == 0 && in.eof()) break;
    if (in.gcount() != 8) {
      throw WavException(WavError::kTruncated, path + ": unexpected end of file");
    }
    const std::uint32_t size = u32le(chunk_hdr + 4);
    if (std::memcmp(chunk_hdr, "fmt ", 4) == 0) {
      if (size < 16) throw WavException(WavError::kBadHeader, path + ": fmt chunk too small");
      std::vector<unsigned char> fmt(size);
      read_exact(in, fmt.data(), size, path);
      const std::uint16_t format = u16le(fmt.data());
      const std::uint16_t channels = u16le(fmt.data() + 2);
      const std::uint32_t rate = u32le(fmt.data() + 4);
      const std::uint16_t bits = u16le(fmt.data() + 14);
      if (format != 1) {
        throw WavException(WavError::kNotPcm,
                           path + ": format tag " + std::to_string(format) + ", expected PCM");
      }
      if (channels != 1) {
        throw WavException(WavError::kBadChannels,
                           path + ": " + std::to_string(channels) + " channels, expected mono");
      }
      if (rate != 16000) {
        throw WavException(WavError::kBadRate,
                           path + ": sample rate " + std::to_string(rate) + ", expected 16000");
      }
      if (bits != 16) {
        throw WavException(WavError::kBadDepth,
                           path + ": " + std::to_string(bits) + " bits, expected 16");
      }
      have_fmt = true;
    } else if (std::memcmp(chunk_hdr, "data", 4) == 0) {
      if (!have_fmt) {
        throw WavException(WavError::kBadHeader, path + ": data chunk before fmt chunk");
      }
      if (size % 2 != 0) {
        throw WavException(WavError::kBadHeader, path + ": odd data chunk size");
      }
      pcm.resize(size / 2);
      read_exact(in, reinterpret_cast<unsigned char*>(pcm.data()), size, path);
      have_data = true;
    } else {
      // Skip unknown chunks (LIST, fact, ...), honoring RIFF word padding.
      in.seekg(size + (size % 2), std::ios::cur);
      if (!in) throw WavException(WavError::kTruncated, path + ": unexpected end of file");
    }
  }
  if (!have_data) {
    throw WavException(WavError::kBadHeader, path + ": no data chunk");
  }

  AudioSignal signal;
  signal.sample_rate = 16000;
  signal.samples.resize(pcm.size());
  for (std::size_t i = 0; i < pcm.size(); ++i) {
    signal.samples[i] = static_cast<double>(pcm[i]) / 32768.0;
  }
  return signal;
}

void write_wav(const std::string& path, const AudioSignal& signal) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_wav: cannot open " + path);
  const std::uint32_t n = static_cast<std::uint32_t>(signal.samples.size());
  const std::uint32_t data_bytes = n * 2;
  const std::uint32_t rate = static_cast<std::uint32_t>(signal.sample_rate);

  out.write("RIFF", 4);
  put_u32le(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  put_u32le(out, 16);
  put_u16le(out, 1);  // PCM
  put_u16le(out, 1);  // mono
  put_u32le(out, rate);
  put_u32le(out, rate * 2);  // byte rate
  put_u16le(out, 2);         // block align
  put_u16le(out, 16);        // bits per sample
  out.write("data", 4);
  put_u32le(out, data_bytes);
  for (double v : signal.samples) {
    long q = std::lround(v * 32768.0);
    q = std::clamp(q, -32768L, 32767L);
    put_u16le(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  if (!out) throw std::runtime_error("write_wav: failed writing " + path);
}

}  // namespace aasist3
