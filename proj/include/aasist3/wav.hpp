#pragma once

// Strict RIFF/WAVE reader and writer for the only format the pipeline
// accepts: PCM, 16-bit, mono, 16 kHz.

#include <stdexcept>
#include <string>

#include "aasist3/audio.hpp"

namespace aasist3 {

enum class WavError {
  kBadHeader,    // not a RIFF/WAVE file or malformed chunk layout
  kNotPcm,       // compressed or float formats
  kBadChannels,  // anything but mono
  kBadRate,      // anything but 16 kHz
  kBadDepth,     // anything but 16-bit
  kTruncated,    // file ends inside a declared chunk
};

const char* wav_error_name(WavError e);

class WavException : public std::runtime_error {
 public:
  WavException(WavError code, const std::string& message)
      : std::runtime_error(message), code_(code) {}
  WavError code() const { return code_; }

 private:
  WavError code_;
};

// Integer samples are scaled by 1/32768 into [-1, 1).
AudioSignal read_wav(const std::string& path);

// Writes PCM16; samples are rounded and clamped to the int16 range.
void write_wav(const std::string& path, const AudioSignal& signal);

}  // namespace aasist3
