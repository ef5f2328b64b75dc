#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace planprobe::prompts {

// Height-guessing task. The apostrophe in "person's" is U+2019.
inline constexpr std::string_view kHeightGuessPreamble =
    "You are simulating guesses of adult heights (in centimeters) for individuals randomly "
    "drawn from the UK population. In each round, output a single integer as your guess for "
    "the random person\xE2\x80\x99s height. Continue producing guesses one after another, "
    "separated by commas, with no explanations or extra text: ";

// Gaussian-continuation task.
inline constexpr std::string_view kSamplingPreamble =
    "You are sampling integers from a distribution. You will see some samples that has already "
    "been drawn from this distribution and your task is to continue sampling integers from this "
    "distribution, separated by commas, with no explanations or extra text. Please continue the "
    "sampling: ";

inline constexpr std::string_view kSeparator = ", ";

/// "<preamble><start>, "
inline std::string height_guess_prompt(std::int64_t starting_value) {
  std::string out(kHeightGuessPreamble);
  out += std::to_string(starting_value);
  out += kSeparator;
  return out;
}

/// "<preamble>v1, v2, ..., vn, "
inline std::string sampling_prompt(std::span<const std::int64_t> samples) {
  std::string out(kSamplingPreamble);
  for (auto v : samples) {
    out += std::to_string(v);
    out += kSeparator;
  }
  return out;
}

}  // namespace planprobe::prompts
