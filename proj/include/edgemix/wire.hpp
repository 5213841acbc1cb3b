/*
 * Copyright 2026 The edgemix Authors. All Rights Reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *       http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Length-prefixed binary protocol for running the inference server in a
// separate process. Every frame is u32 length (type byte plus body), u8
// type, body; all integers big-endian.
//
//   0x01 OffloadRequest    u32 frame_id, u8 tau_d | mode flags, u8 lambda,
//                          u8 beta, u16 mask_len, mask bytes, u32 payload_kib_x10
//   0x02 InferenceResponse u32 frame_id, u16 n_boxes, n x (4 x f32, u32 id),
//                          u32 inference_us
//
// Mode flags: 0x80 masked frame (TrackRoI), 0x40 uniform downsample (TrackUD).

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "edgemix/bytes.hpp"
#include "edgemix/client.hpp"
#include "edgemix/error.hpp"
#include "edgemix/grid.hpp"
#include "edgemix/serversim.hpp"

namespace edgemix::wire {

inline constexpr std::uint8_t kOffloadRequest = 0x01;
inline constexpr std::uint8_t kInferenceResponse = 0x02;
inline constexpr std::uint8_t kFlagMasked = 0x80;
inline constexpr std::uint8_t kFlagUniform = 0x40;
inline constexpr std::uint32_t kMaxFrameBytes = 1u << 20;

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct OffloadRequest {
  std::uint32_t frame_id = 0;
  OffloadPlan plan;
  std::uint32_t payload_kib_x10 = 0;

  double payload_kib() const noexcept { return payload_kib_x10 / 10.0; }
};

struct InferenceResponse {
  std::uint32_t frame_id = 0;
  BoxList boxes;
  std::uint32_t inference_us = 0;

  double inference_ms() const noexcept { return inference_us / 1000.0; }
};

inline std::uint32_t payload_to_wire(double kib) {
  if (!(kib >= 0.0) || kib * 10.0 > 4.0e9) throw InvalidArgument("payload size not representable on the wire");
  return static_cast<std::uint32_t>(std::llround(kib * 10.0));
}

inline std::uint32_t inference_to_wire(double ms) {
  if (!(ms >= 0.0) || ms > 4.0e6) throw InvalidArgument("inference time not representable on the wire");
  return static_cast<std::uint32_t>(std::llround(ms * 1000.0));
}

// Frame bodies, without the length prefix.
inline std::vector<std::uint8_t> encode(const OffloadRequest& m) {
  if (m.plan.mask.size() > 0xFFFF * 8u) throw InvalidArgument("mask too long for the wire");
  ByteWriter w;
  w.u8(kOffloadRequest);
  w.u32(m.frame_id);
  std::uint8_t tau = static_cast<std::uint8_t>(m.plan.config.tau_d);
  if (m.plan.mode == FrameMode::kMasked) tau |= kFlagMasked;
  if (m.plan.mode == FrameMode::kUniform) tau |= kFlagUniform;
  w.u8(tau);
  w.u8(static_cast<std::uint8_t>(m.plan.config.lambda_q));
  w.u8(static_cast<std::uint8_t>(m.plan.config.beta));
  const auto mask = pack_mask(m.plan.mask);
  w.u16(static_cast<std::uint16_t>(mask.size()));
  w.bytes(mask);
  w.u32(m.payload_kib_x10);
  return w.take();
}

inline std::vector<std::uint8_t> encode(const InferenceResponse& m) {
  if (m.boxes.size() > 0xFFFF) throw InvalidArgument("too many boxes for the wire");
  ByteWriter w;
  w.u8(kInferenceResponse);
  w.u32(m.frame_id);
  w.u16(static_cast<std::uint16_t>(m.boxes.size()));
  for (const auto& b : m.boxes) {
    w.f32(static_cast<float>(b.box.x));
    w.f32(static_cast<float>(b.box.y));
    w.f32(static_cast<float>(b.box.w));
    w.f32(static_cast<float>(b.box.h));
    w.u32(b.id);
  }
  w.u32(m.inference_us);
  return w.take();
}

inline std::uint8_t frame_type(std::span<const std::uint8_t> body) {
  if (body.empty()) throw ParseError("empty wire frame");
  return body[0];
}

// region_count sizes the decoded mask; the byte length must match it.
inline OffloadRequest decode_request(std::span<const std::uint8_t> body, std::size_t region_count) {
  ByteReader r(body);
  if (r.u8() != kOffloadRequest) throw ParseError("expected OffloadRequest");
  OffloadRequest m;
  m.frame_id = r.u32();
  const std::uint8_t tau = r.u8();
  if ((tau & kFlagMasked) && (tau & kFlagUniform)) throw ParseError("request sets both masked and uniform flags");
  m.plan.mode = (tau & kFlagMasked) ? FrameMode::kMasked : (tau & kFlagUniform) ? FrameMode::kUniform : FrameMode::kMixed;
  m.plan.config.tau_d = tau & 0x3F;
  m.plan.config.lambda_q = r.u8();
  m.plan.config.beta = r.u8();
  const std::uint16_t mask_len = r.u16();
  if (mask_len != (region_count + 7) / 8) throw ParseError("mask length does not match the region grid");
  m.plan.mask = unpack_mask(r.bytes(mask_len), region_count);
  m.payload_kib_x10 = r.u32();
  if (!r.done()) throw ParseError("trailing bytes after OffloadRequest");
  try {
    validate(m.plan.config);
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("bad configuration on the wire: ") + e.what());
  }
  return m;
}

inline InferenceResponse decode_response(std::span<const std::uint8_t> body) {
  ByteReader r(body);
  if (r.u8() != kInferenceResponse) throw ParseError("expected InferenceResponse");
  InferenceResponse m;
  m.frame_id = r.u32();
  const std::uint16_t n = r.u16();
  m.boxes.reserve(n);
  for (std::uint16_t i = 0; i < n; ++i) {
    LabeledBox b;
    b.box.x = r.f32();
    b.box.y = r.f32();
    b.box.w = r.f32();
    b.box.h = r.f32();
    b.id = r.u32();
    m.boxes.push_back(b);
  }
  m.inference_us = r.u32();
  if (!r.done()) throw ParseError("trailing bytes after InferenceResponse");
  return m;
}

// ---------------------------------------------------------------------------
// POSIX stream transport.

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) noexcept : fd_(fd) {}
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  Socket(Socket&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Socket& operator=(Socket&& o) noexcept {
    if (this != &o) {
      close();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  ~Socket() { close(); }

  int fd() const noexcept { return fd_; }
  bool valid() const noexcept { return fd_ >= 0; }
  void close() noexcept {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

namespace detail {

[[noreturn]] inline void sys_fail(const std::string& what) {
  throw TransportError(what + ": " + std::strerror(errno));
}

inline void write_all(int fd, const std::uint8_t* p, std::size_t n) {
  while (n > 0) {
    const ssize_t k = ::send(fd, p, n, MSG_NOSIGNAL);
    if (k < 0) {
      if (errno == EINTR) continue;
      sys_fail("send");
    }
    p += k;
    n -= static_cast<std::size_t>(k);
  }
}

// false on clean EOF before the first byte.
inline bool read_all(int fd, std::uint8_t* p, std::size_t n) {
  std::size_t got = 0;
  while (got < n) {
    const ssize_t k = ::recv(fd, p + got, n - got, 0);
    if (k < 0) {
      if (errno == EINTR) continue;
      sys_fail("recv");
    }
    if (k == 0) {
      if (got == 0) return false;
      throw TransportError("connection closed mid-frame");
    }
    got += static_cast<std::size_t>(k);
  }
  return true;
}

inline sockaddr_in loopback_addr(const std::string& host, std::uint16_t port) {
  sockaddr_in a{};
  a.sin_family = AF_INET;
  a.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &a.sin_addr) != 1) throw ConfigError("not an IPv4 address: " + host);
  return a;
}

}  // namespace detail

inline void send_frame(const Socket& s, std::span<const std::uint8_t> body) {
  if (body.size() > kMaxFrameBytes) throw InvalidArgument("wire frame too large");
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(body.size()));
  detail::write_all(s.fd(), w.data().data(), w.data().size());
  detail::write_all(s.fd(), body.data(), body.size());
}

// std::nullopt on orderly shutdown by the peer.
inline std::optional<std::vector<std::uint8_t>> recv_frame(const Socket& s) {
  std::uint8_t hdr[4];
  if (!detail::read_all(s.fd(), hdr, 4)) return std::nullopt;
  ByteReader r(hdr);
  const std::uint32_t len = r.u32();
  if (len == 0 || len > kMaxFrameBytes) throw ParseError("bad wire frame length " + std::to_string(len));
  std::vector<std::uint8_t> body(len);
  if (!detail::read_all(s.fd(), body.data(), len)) throw TransportError("connection closed mid-frame");
  return body;
}

inline Socket connect_to(const std::string& host, std::uint16_t port) {
  Socket s(::socket(AF_INET, SOCK_STREAM, 0));
  if (!s.valid()) detail::sys_fail("socket");
  const auto addr = detail::loopback_addr(host, port);
  if (::connect(s.fd(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
    detail::sys_fail("connect " + host + ":" + std::to_string(port));
  }
  const int one = 1;
  ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return s;
}

class Listener {
 public:
  // port 0 picks an ephemeral port; see port().
  explicit Listener(std::uint16_t port, const std::string& host = "127.0.0.1") {
    sock_ = Socket(::socket(AF_INET, SOCK_STREAM, 0));
    if (!sock_.valid()) detail::sys_fail("socket");
    const int one = 1;
    ::setsockopt(sock_.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    auto addr = detail::loopback_addr(host, port);
    if (::bind(sock_.fd(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) detail::sys_fail("bind");
    if (::listen(sock_.fd(), 4) != 0) detail::sys_fail("listen");
    socklen_t len = sizeof addr;
    if (::getsockname(sock_.fd(), reinterpret_cast<sockaddr*>(&addr), &len) != 0) detail::sys_fail("getsockname");
    port_ = ntohs(addr.sin_port);
  }

  std::uint16_t port() const noexcept { return port_; }

  Socket accept() const {
    for (;;) {
      const int fd = ::accept(sock_.fd(), nullptr, nullptr);
      if (fd >= 0) {
        const int one = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
        return Socket(fd);
      }
      if (errno != EINTR) detail::sys_fail("accept");
    }
  }

 private:
  Socket sock_;
  std::uint16_t port_ = 0;
};

// ---------------------------------------------------------------------------
// Endpoints.

// Client side: one request in flight, strictly alternating.
class SocketBackend final : public InferenceBackend {
 public:
  SocketBackend(Socket s, GridGeometry geom) : sock_(std::move(s)), geom_(geom) {}

  InferenceReply infer(const OffloadPlan& plan, int frame_id, double payload_kib) override {
    if (frame_id < 0) throw InvalidArgument("negative frame_id");
    OffloadRequest req{static_cast<std::uint32_t>(frame_id), plan, payload_to_wire(payload_kib)};
    send_frame(sock_, encode(req));
    auto body = recv_frame(sock_);
    if (!body) throw TransportError("server closed the connection");
    auto resp = decode_response(*body);
    if (resp.frame_id != req.frame_id) throw ParseError("response frame_id does not match the request");
    return {std::move(resp.boxes), resp.inference_ms()};
  }

  const GridGeometry& geometry() const noexcept { return geom_; }

 private:
  Socket sock_;
  GridGeometry geom_;
};

// Server side: answers requests on one connection until the peer hangs up.
// Returns the number of requests served.
inline std::size_t serve_connection(const Socket& s, InferenceBackend& backend, const GridGeometry& geom) {
  std::size_t served = 0;
  while (auto body = recv_frame(s)) {
    if (frame_type(*body) != kOffloadRequest) throw ParseError("server expects OffloadRequest frames");
    const auto req = decode_request(*body, static_cast<std::size_t>(geom.region_count));
    validate_plan(req.plan, geom);
    auto reply = backend.infer(req.plan, static_cast<int>(req.frame_id), req.payload_kib());
    InferenceResponse resp{req.frame_id, std::move(reply.boxes), inference_to_wire(reply.inference_ms)};
    send_frame(s, encode(resp));
    ++served;
  }
  return served;
}

}  // namespace edgemix::wire
