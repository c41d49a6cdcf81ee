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


#include "layerscope/protocol.hpp"

#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <string>

#include "layerscope/bytes.hpp"
#include "layerscope/errors.hpp"

namespace layerscope {
namespace {

// Frames larger than this indicate a desynchronized stream.
constexpr std::uint64_t kMaxPayload = std::uint64_t{1} << 34;

}  // namespace

const char* to_string(MessageType type) {
  switch (type) {
    case MessageType::kInit:
      return "INIT";
    case MessageType::kForwardAct:
      return "FORWARD_ACT";
    case MessageType::kLoss:
      return "LOSS";
    case MessageType::kBackwardGrad:
      return "BACKWARD_GRAD";
    case MessageType::kStepDone:
      return "STEP_DONE";
    case MessageType::kShutdown:
      return "SHUTDOWN";
    case MessageType::kParams:
      return "PARAMS";
    case MessageType::kError:
      return "ERROR";
  }
  return "UNKNOWN";
}

void Channel::write_all(const std::uint8_t* data, std::size_t size) {
  while (size > 0) {
    const ssize_t n = ::send(fd_, data, size, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw BoundaryError(std::string("boundary write failed: ") + std::strerror(errno));
    }
    data += n;
    size -= static_cast<std::size_t>(n);
    bytes_sent_ += static_cast<std::uint64_t>(n);
  }
}

void Channel::read_all(std::uint8_t* data, std::size_t size) {
  while (size > 0) {
    const ssize_t n = ::read(fd_, data, size);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw BoundaryError(std::string("boundary read failed: ") + std::strerror(errno));
    }
    if (n == 0) throw BoundaryError("boundary closed by peer");
    data += n;
    size -= static_cast<std::size_t>(n);
    bytes_received_ += static_cast<std::uint64_t>(n);
  }
}

void Channel::send(MessageType type, std::span<const std::uint8_t> payload) {
  ByteWriter header;
  header.u32(static_cast<std::uint32_t>(type));
  header.u64(payload.size());
  write_all(header.buffer().data(), header.size());
  write_all(payload.data(), payload.size());
}

Frame Channel::receive() {
  std::uint8_t raw[kFrameHeaderBytes];
  read_all(raw, sizeof(raw));
  ByteReader header(raw);
  const std::uint32_t type = header.u32();
  const std::uint64_t length = header.u64();
  if (type < static_cast<std::uint32_t>(MessageType::kInit) ||
      type > static_cast<std::uint32_t>(MessageType::kError) || length > kMaxPayload) {
    throw BoundaryError("boundary desync: frame type " + std::to_string(type) + ", length " +
                        std::to_string(length));
  }
  Frame frame;
  frame.type = static_cast<MessageType>(type);
  frame.payload.resize(length);
  read_all(frame.payload.data(), length);
  return frame;
}

Frame Channel::expect(MessageType type) {
  Frame frame = receive();
  if (frame.type == type) return frame;
  if (frame.type == MessageType::kError) {
    throw BoundaryError("worker error: " + decode_worker_error(frame.payload).message);
  }
  throw BoundaryError(std::string("boundary desync: expected ") + to_string(type) + ", got " +
                      to_string(frame.type));
}

std::vector<std::uint8_t> encode_worker_error(const WorkerError& error) {
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(error.kind));
  w.u64(error.total_bytes);
  w.u64(error.budget_bytes);
  w.str(error.message);
  return w.take();
}

WorkerError decode_worker_error(std::span<const std::uint8_t> payload) {
  WorkerError e;
  try {
    ByteReader r(payload);
    e.kind = static_cast<WorkerError::Kind>(r.u32());
    e.total_bytes = r.u64();
    e.budget_bytes = r.u64();
    e.message = r.str();
  } catch (const std::out_of_range&) {
    e.kind = WorkerError::Kind::kOther;
    e.message = "malformed ERROR frame";
  }
  return e;
}

}  // namespace layerscope
