// Copyright 2026 The LayerScope Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "layerscope/arch.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <optional>
#include <stdexcept>

#include "layerscope/errors.hpp"

namespace layerscope {
namespace {

std::optional<std::size_t> parse_number(std::string_view text) {
  if (text.empty()) return std::nullopt;
  std::size_t value = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size()) return std::nullopt;
  return value;
}

bool ends_with(std::string_view text, std::string_view suffix) {
  return text.size() >= suffix.size() && text.substr(text.size() - suffix.size()) == suffix;
}

std::size_t percent_of(double rate) { return static_cast<std::size_t>(std::lround(rate * 100.0)); }

LayerSpec parse_token(std::string_view token, std::size_t index) {
  auto fail = [&](const std::string& why) -> ParseError {
    return ParseError("token " + std::to_string(index) + " '" + std::string(token) + "': " + why,
                      index);
  };
  auto positive = [&](std::string_view digits, const char* what) {
    const auto n = parse_number(digits);
    if (!n) throw fail(std::string("expected a number of ") + what);
    if (*n == 0) throw fail(std::string(what) + " must be at least 1");
    return *n;
  };

  LayerSpec spec;
  if (token == "MP") {
    spec.kind = LayerKind::kMaxPool;
  } else if (token.size() > 1 && token.front() == 'D') {
    const auto pct = parse_number(token.substr(1));
    if (!pct) throw fail("expected dropout percent");
    if (*pct >= 100) throw fail("dropout rate must be below 100%");
    spec.kind = LayerKind::kDropout;
    spec.rate = static_cast<double>(*pct) / 100.0;
  } else if (ends_with(token, "FC")) {
    spec.kind = LayerKind::kFullyConnected;
    spec.size = positive(token.substr(0, token.size() - 2), "units");
  } else if (ends_with(token, "SM")) {
    spec.kind = LayerKind::kFullyConnected;
    spec.softmax_head = true;
    spec.size = positive(token.substr(0, token.size() - 2), "classes");
  } else if (const auto c = token.find('C'); c != std::string_view::npos) {
    spec.kind = LayerKind::kConv;
    spec.size = positive(token.substr(0, c), "filters");
    spec.kernel = positive(token.substr(c + 1), "kernel size");
    if (spec.kernel % 2 == 0) throw fail("kernel size must be odd");
  } else {
    throw fail("unknown layer token");
  }
  return spec;
}

}  // namespace

std::string LayerSpec::token() const {
  switch (kind) {
    case LayerKind::kConv:
      return std::to_string(size) + "C" + std::to_string(kernel);
    case LayerKind::kMaxPool:
      return "MP";
    case LayerKind::kDropout:
      return "D" + std::to_string(percent_of(rate));
    case LayerKind::kFullyConnected:
      return std::to_string(size) + (softmax_head ? "SM" : "FC");
  }
  return "?";
}

std::string LayerSpec::label() const {
  switch (kind) {
    case LayerKind::kConv:
      return "C";
    case LayerKind::kMaxPool:
      return "MP";
    case LayerKind::kDropout:
      return "D";
    case LayerKind::kFullyConnected:
      return softmax_head ? "SM" : "FC";
  }
  return "?";
}

std::vector<LayerSpec> parse_arch(std::string_view arch) {
  std::vector<LayerSpec> specs;
  std::size_t index = 1;
  std::size_t start = 0;
  while (true) {
    const std::size_t dash = arch.find('-', start);
    const std::string_view token =
        arch.substr(start, dash == std::string_view::npos ? std::string_view::npos : dash - start);
    if (token.empty()) throw ParseError("empty token at position " + std::to_string(index), index);
    if (!specs.empty() && specs.back().softmax_head) {
      throw ParseError("token " + std::to_string(index - 1) +
                           ": softmax head must be the last layer",
                       index - 1);
    }
    specs.push_back(parse_token(token, index));
    if (dash == std::string_view::npos) break;
    start = dash + 1;
    ++index;
  }
  if (!specs.back().softmax_head) {
    throw ParseError("architecture must end with a softmax head (<n>SM)", specs.size());
  }
  return specs;
}

std::string format_arch(std::span<const LayerSpec> specs) {
  std::string out;
  for (const LayerSpec& spec : specs) {
    if (!out.empty()) out += '-';
    out += spec.token();
  }
  return out;
}

std::vector<LayerSpec> with_dropout_before_fc(std::vector<LayerSpec> specs, double rate) {
  if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("dropout rate must be in [0,1)");
  if (std::abs(rate * 100.0 - static_cast<double>(percent_of(rate))) > 1e-9) {
    throw std::invalid_argument("dropout rate must be a whole percent");
  }
  if (rate == 0.0) return specs;
  const bool has_dropout = std::any_of(specs.begin(), specs.end(), [](const LayerSpec& s) {
    return s.kind == LayerKind::kDropout;
  });
  if (has_dropout) return specs;
  const auto fc = std::find_if(specs.begin(), specs.end(), [](const LayerSpec& s) {
    return s.kind == LayerKind::kFullyConnected;
  });
  if (fc == specs.begin()) return specs;
  LayerSpec dropout;
  dropout.kind = LayerKind::kDropout;
  dropout.rate = rate;
  specs.insert(fc, dropout);
  return specs;
}

std::size_t count_param_layers(std::span<const LayerSpec> specs) {
  return static_cast<std::size_t>(
      std::count_if(specs.begin(), specs.end(), [](const LayerSpec& s) { return s.has_params(); }));
}

}  // namespace layerscope
