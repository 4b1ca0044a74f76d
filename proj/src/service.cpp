#include "head3d/service.hpp"

#include <httplib.h>

#include <charconv>
#include <cmath>
#include <set>

namespace head3d {

namespace {

const char* const kPoseKeys[] = {"yaw", "pitch", "roll", "tx", "ty", "tz"};

const char kIndexPage[] = R"(<!doctype html>
<html><head><meta charset="utf-8"><title>head3d</title>
<style>body{font-family:sans-serif;margin:1em}img{width:256px;height:256px;image-rendering:pixelated;margin-right:8px}
label{display:inline-block;width:3em}#err{color:#b00}</style></head>
<body>
<div><img id="view" alt="novel view"><img src="/api/canonical" alt="canonical"><img src="/api/canonical/depth" alt="depth"></div>
<div id="controls"></div><div id="err"></div>
<script>
const keys = ["yaw", "pitch", "roll", "tx", "ty", "tz"];
let timer = null, seq = 0;
function update() {
  const q = keys.map(k => k + "=" + document.getElementById(k).value).join("&");
  const id = ++seq;
  fetch("/api/novel-view?" + q).then(r => r.ok ? r.blob() : r.json().then(e => { throw new Error(e.error); }))
    .then(b => { if (id === seq) { document.getElementById("view").src = URL.createObjectURL(b); err.textContent = ""; } })
    .catch(e => { if (id === seq) err.textContent = e.message; });
}
fetch("/api/meta").then(r => r.json()).then(m => {
  const box = document.getElementById("controls");
  for (const k of keys) {
    const [lo, hi] = m.pose_limits[k];
    const step = k.startsWith("t") ? 0.005 : 1;
    box.insertAdjacentHTML("beforeend",
      `<div><label>${k}</label><input type="range" id="${k}" min="${lo}" max="${hi}" step="${step}" value="0"></div>`);
    document.getElementById(k).addEventListener("input", () => { clearTimeout(timer); timer = setTimeout(update, 80); });
  }
  update();
});
</script></body></html>
)";

HttpResponse json_response(int status, const nlohmann::json& j) { return {status, "application/json", j.dump()}; }

HttpResponse error_response(int status, const std::string& message) {
  return json_response(status, {{"error", message}, {"status", status}});
}

std::string to_string(const std::vector<std::uint8_t>& bytes) { return {bytes.begin(), bytes.end()}; }

double parse_number(const std::string& key, const std::string& text) {
  double x = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  if (!text.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, x);
  if (text.empty() || ec != std::errc() || ptr != last || !std::isfinite(x))
    throw QueryError(400, "parameter '" + key + "' is not a finite number: '" + text + "'");
  return x;
}

}  // namespace

NovelViewService::NovelViewService(Session session, TransferConfig config, PoseLimits limits)
    : session_(std::move(session)), config_(std::move(config)), limits_(limits) {
  if (!session_.reference.depth || !session_.reference.mask || !session_.reference.pose)
    throw std::invalid_argument("service: session reference frame lacks depth, mask or pose");
  // Requests already run concurrently; keep each one single-threaded.
  config_.exec = Exec::serial;
  canonical_png_ = to_string(encode_png(session_.canonical.rgb));
  depth_png_ = to_string(encode_png(depth_visualization(mask_depth(session_.canonical.depth, session_.canonical.valid))));
}

EulerPose NovelViewService::parse_pose(const QueryParams& query) const {
  static const std::set<std::string> allowed(std::begin(kPoseKeys), std::end(kPoseKeys));
  double values[6] = {0, 0, 0, 0, 0, 0};
  std::set<std::string> seen;
  for (const auto& [key, text] : query) {
    if (!allowed.count(key)) throw QueryError(400, "unknown parameter '" + key + "'");
    if (!seen.insert(key).second) throw QueryError(400, "parameter '" + key + "' given twice");
    const auto idx = std::find(std::begin(kPoseKeys), std::end(kPoseKeys), key) - std::begin(kPoseKeys);
    values[idx] = parse_number(key, text);
  }
  for (int k = 0; k < 3; ++k)
    if (std::abs(values[k]) > limits_.angle_deg)
      throw QueryError(422, std::string(kPoseKeys[k]) + " outside +-" + std::to_string(limits_.angle_deg) + " degrees");
  const Eigen::Vector3d t(values[3], values[4], values[5]);
  if (t.norm() > limits_.translation_m)
    throw QueryError(422, "translation norm exceeds " + std::to_string(limits_.translation_m) + " m");
  return {values[0], values[1], values[2], t};
}

std::vector<std::uint8_t> NovelViewService::render_png(const EulerPose& pose) const {
  const Pose p = head_pose(pose, session_.pivot_depth);
  return encode_png(novel_view(session_.canonical, p, session_.reference, session_.K, config_));
}

HttpResponse NovelViewService::handle(const std::string& path, const QueryParams& query) const {
  try {
    if (path == "/api/novel-view") {
      const EulerPose pose = parse_pose(query);
      try {
        return {200, "image/png", to_string(render_png(pose))};
      } catch (const std::invalid_argument& e) {
        throw QueryError(422, e.what());
      }
    }
    if (path == "/api/meta") {
      const double a = limits_.angle_deg, t = limits_.translation_m;
      return json_response(200, {{"width", session_.K.width},
                                 {"height", session_.K.height},
                                 {"fov", session_.fov_deg},
                                 {"created", session_.created},
                                 {"pose_limits",
                                  {{"yaw", {-a, a}},
                                   {"pitch", {-a, a}},
                                   {"roll", {-a, a}},
                                   {"tx", {-t, t}},
                                   {"ty", {-t, t}},
                                   {"tz", {-t, t}},
                                   {"translation_norm", t}}}});
    }
    if (path == "/api/canonical") return {200, "image/png", canonical_png_};
    if (path == "/api/canonical/depth") return {200, "image/png", depth_png_};
    if (path == "/" || path == "/index.html") return {200, "text/html; charset=utf-8", kIndexPage};
    return error_response(404, "no such endpoint: " + path);
  } catch (const QueryError& e) {
    return error_response(e.status(), e.what());
  } catch (const std::exception& e) {
    return error_response(500, e.what());
  }
}

std::pair<std::string, int> parse_bind(const std::string& bind) {
  const auto colon = bind.rfind(':');
  if (colon == std::string::npos || colon == 0) throw std::invalid_argument("bind address must be host:port");
  const std::string host = bind.substr(0, colon), port_text = bind.substr(colon + 1);
  int port = -1;
  const auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
  if (ec != std::errc() || ptr != port_text.data() + port_text.size() || port < 0 || port > 65535)
    throw std::invalid_argument("bad port in bind address: " + bind);
  return {host, port};
}

struct HttpServer::Impl {
  std::shared_ptr<const NovelViewService> service;
  ServeOptions options;
  httplib::Server server;
  int port = -1;
};

HttpServer::HttpServer(std::shared_ptr<const NovelViewService> service, ServeOptions options)
    : impl_(std::make_unique<Impl>()) {
  impl_->service = std::move(service);
  impl_->options = std::move(options);
  const int threads = std::max(1, impl_->options.threads);
  impl_->server.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };

  auto forward = [svc = impl_->service](const httplib::Request& req, httplib::Response& res) {
    QueryParams query(req.params.begin(), req.params.end());
    const HttpResponse r = svc->handle(req.path, query);
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  if (!impl_->options.assets.empty()) {
    if (!impl_->server.set_mount_point("/", impl_->options.assets.string()))
      throw std::invalid_argument("viewer assets directory not found: " + impl_->options.assets.string());
  } else {
    impl_->server.Get("/", forward);
    impl_->server.Get("/index.html", forward);
  }
  impl_->server.Get("/api/.*", forward);
  impl_->server.Post(".*", [](const httplib::Request&, httplib::Response& res) {
    const HttpResponse r = error_response(405, "read-only service; use GET");
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  });
}

HttpServer::~HttpServer() { stop(); }

bool HttpServer::bind() {
  const auto [host, port] = parse_bind(impl_->options.bind);
  if (port == 0) {
    impl_->port = impl_->server.bind_to_any_port(host);
  } else {
    impl_->port = impl_->server.bind_to_port(host, port) ? port : -1;
  }
  return impl_->port >= 0;
}

bool HttpServer::listen() { return impl_->server.listen_after_bind(); }

void HttpServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

int HttpServer::port() const { return impl_->port; }

}  // namespace head3d
