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


#ifndef LAYERSCOPE_PROTOCOL_HPP_
#define LAYERSCOPE_PROTOCOL_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace layerscope {

// Frames on the host/worker stream: u32 type, u64 payload length, payload.
// All integers and doubles little-endian.
enum class MessageType : std::uint32_t {
  kInit = 1,          // host -> worker: suffix model and plan
  kForwardAct = 2,    // host -> worker: cut activations and labels
  kLoss = 3,          // worker -> host: per-sample losses
  kBackwardGrad = 4,  // worker -> host: gradient w.r.t. cut activations
  kStepDone = 5,      // worker -> host: ready after init
  kShutdown = 6,      // host -> worker
  kParams = 7,        // worker -> host: compute seconds, final secure parameters
  kError = 8,         // worker -> host: WorkerError, then worker exits
};

const char* to_string(MessageType type);

inline constexpr std::size_t kFrameHeaderBytes = 4 + 8;

struct Frame {
  MessageType type = MessageType::kError;
  std::vector<std::uint8_t> payload;
};

// Payload of a kError frame.
struct WorkerError {
  enum class Kind : std::uint32_t { kOther = 0, kBudget = 1 };
  Kind kind = Kind::kOther;
  std::uint64_t total_bytes = 0;  // kBudget only
  std::uint64_t budget_bytes = 0;
  std::string message;
};

std::vector<std::uint8_t> encode_worker_error(const WorkerError& error);
WorkerError decode_worker_error(std::span<const std::uint8_t> payload);

// Blocking, framed I/O on a connected stream socket. Does not own the fd.
// Counts every byte moved so protocol accounting can be checked against
// the wire. Throws BoundaryError on EOF, short I/O or an unexpected type.
class Channel {
 public:
  explicit Channel(int fd) : fd_(fd) {}

  void send(MessageType type, std::span<const std::uint8_t> payload);
  Frame receive();
  // receive() that insists on `type`; a kError frame is reported with its
  // reason.
  Frame expect(MessageType type);

  std::uint64_t bytes_sent() const { return bytes_sent_; }
  std::uint64_t bytes_received() const { return bytes_received_; }

 private:
  void write_all(const std::uint8_t* data, std::size_t size);
  void read_all(std::uint8_t* data, std::size_t size);

  int fd_;
  std::uint64_t bytes_sent_ = 0;
  std::uint64_t bytes_received_ = 0;
};

// Fixed per-batch metadata: three frame headers, FORWARD_ACT's
// (epoch, batch, count, elems), LOSS's (count, correct) and BACKWARD_GRAD's
// (count, elems).
inline constexpr std::uint64_t kBatchFramingBytes = 3 * kFrameHeaderBytes + 4 * 8 + 2 * 8 + 2 * 8;

// Bytes crossing the boundary for one training batch of `batch` samples
// with `cut_elems` activation elements each: activations out, one loss per
// sample back, activation gradients back, plus framing and i32 labels.
inline constexpr std::uint64_t boundary_bytes(std::uint64_t batch, std::uint64_t cut_elems) {
  return batch * (cut_elems + 1 + cut_elems) * 8 + kBatchFramingBytes + 4 * batch;
}

}  // namespace layerscope

#endif  // LAYERSCOPE_PROTOCOL_HPP_
