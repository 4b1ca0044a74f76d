#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>

#include "head3d/io.hpp"
#include "head3d/pipeline.hpp"

namespace head3d {

struct PoseLimits {
  double angle_deg = 60.0;
  double translation_m = 0.5;  ///< bound on the norm of (tx, ty, tz)
};

struct HttpResponse {
  int status = 200;
  std::string content_type;
  std::string body;
};

using QueryParams = std::multimap<std::string, std::string>;

/// status 400 for malformed input, 422 for well-formed but out-of-range.
class QueryError : public std::runtime_error {
 public:
  QueryError(int status, const std::string& what) : std::runtime_error(what), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

/// Read-only view-synthesis backend over one loaded session. handle() is a
/// pure function of (session, request) and safe to call concurrently.
class NovelViewService {
 public:
  explicit NovelViewService(Session session, TransferConfig config = {}, PoseLimits limits = {});

  HttpResponse handle(const std::string& path, const QueryParams& query) const;

  /// Parses and range-checks the novel-view query (degrees and meters,
  /// missing values 0). Throws QueryError.
  EulerPose parse_pose(const QueryParams& query) const;
  std::vector<std::uint8_t> render_png(const EulerPose& pose) const;

  const Session& session() const { return session_; }
  const PoseLimits& limits() const { return limits_; }

 private:
  Session session_;
  TransferConfig config_;
  PoseLimits limits_;
  std::string canonical_png_;
  std::string depth_png_;
};

struct ServeOptions {
  std::string bind = "127.0.0.1:8008";
  int threads = 8;
  /// Static viewer build to serve at "/"; a built-in page otherwise.
  std::filesystem::path assets;
};

/// Host and port of "host:port"; port 0 asks for an ephemeral port.
std::pair<std::string, int> parse_bind(const std::string& bind);

class HttpServer {
 public:
  HttpServer(std::shared_ptr<const NovelViewService> service, ServeOptions options);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// False when the address cannot be bound.
  bool bind();
  /// Serves on the bound socket until stop().
  bool listen();
  void wait_until_ready() const;
  void stop();
  int port() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace head3d
