#include "head3d/cli.hpp"

#include <omp.h>

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "head3d/io.hpp"
#include "head3d/pipeline.hpp"
#include "head3d/service.hpp"

namespace head3d {

namespace fs = std::filesystem;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Common {
  int threads = 0;
  bool json = false;
  std::string out;
};

struct CameraFlags {
  int width = 128;
  int height = 128;
  double fov = 10.0;
};

struct ModelFlags {
  int n = 5;
  bool mean_canonical = false;
  bool no_canonical_head = false;
  std::string estimator = "oracle";
  std::string sampling = "uniform";
  unsigned seed = 0;
};

void add_camera(CLI::App* app, CameraFlags& c, bool size) {
  if (size) {
    app->add_option("--width", c.width, "Frame width in pixels")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--height", c.height, "Frame height in pixels")->check(CLI::PositiveNumber)->capture_default_str();
  }
  app->add_option("--fov", c.fov, "Horizontal field of view in degrees, in (0, 180)")
      ->check([](const std::string& s) {
        double x = 0.0;
        try {
          x = std::stod(s);
        } catch (...) {
          return std::string("fov must be a number");
        }
        return x > 0.0 && x < 180.0 ? std::string() : std::string("fov must lie in (0, 180)");
      })
      ->capture_default_str();
}

void add_model(CLI::App* app, ModelFlags& m, bool estimator) {
  app->add_option("--n", m.n, "Number of reference frames")->check(CLI::PositiveNumber)->capture_default_str();
  app->add_flag("--mean-canonical", m.mean_canonical, "Average warped references instead of recurrent aggregation");
  app->add_flag("--no-canonical-head", m.no_canonical_head, "Drop the transformed canonical head from fusion");
  if (estimator)
    app->add_option("--estimator", m.estimator, "Driving pose estimator")
        ->check(CLI::IsMember({"oracle", "photometric"}))
        ->capture_default_str();
  app->add_option("--sampling", m.sampling, "Reference selection")
      ->check(CLI::IsMember({"uniform", "random"}))
      ->capture_default_str();
  app->add_option("--seed", m.seed, "Seed for random reference selection")->capture_default_str();
}

TransferConfig make_config(const ModelFlags& m) {
  TransferConfig c;
  c.n = m.n;
  c.use_mean_canonical = m.mean_canonical;
  c.disable_canonical_head = m.no_canonical_head;
  c.estimator = m.estimator == "photometric" ? PoseEstimator::photometric : PoseEstimator::oracle;
  c.sampling = m.sampling == "random" ? ReferenceSampling::seeded_random : ReferenceSampling::uniform;
  c.seed = m.seed;
  return c;
}

nlohmann::json config_json(const TransferConfig& c) {
  return {{"n", c.n},
          {"use_mean_canonical", c.use_mean_canonical},
          {"disable_canonical_head", c.disable_canonical_head},
          {"estimator", c.estimator == PoseEstimator::photometric ? "photometric" : "oracle"},
          {"sampling", c.sampling == ReferenceSampling::seeded_random ? "random" : "uniform"},
          {"seed", c.seed}};
}

/// --out, else $HEAD3D_OUT/<subcommand>.
fs::path output_dir(const Common& common, const std::string& subcommand) {
  if (!common.out.empty()) return common.out;
  if (const char* env = std::getenv("HEAD3D_OUT"); env && *env) return fs::path(env) / subcommand;
  throw UsageError(subcommand + ": --out is required (or set HEAD3D_OUT)");
}

CameraIntrinsics video_intrinsics(const fs::path& dir, const VideoSequence& seq, const CLI::App* app,
                                  const CameraFlags& flags, double& fov) {
  fov = flags.fov;
  if (app->count("--fov") == 0)
    if (const auto cam = read_video_camera(dir)) fov = cam->fov_deg;
  return intrinsics_from_fov(seq.front().rgb.width(), seq.front().rgb.height(), fov);
}

TrajectorySpec trajectory_from(const nlohmann::json& scene_json, int frames) {
  TrajectorySpec t = default_ablation_trajectory();
  t.frames = frames;
  if (scene_json.contains("trajectory")) {
    t.keys.clear();
    for (const auto& k : scene_json.at("trajectory")) {
      EulerPose e;
      e.yaw = k.value("yaw", 0.0);
      e.pitch = k.value("pitch", 0.0);
      e.roll = k.value("roll", 0.0);
      if (k.contains("t")) e.t = {k["t"][0].get<double>(), k["t"][1].get<double>(), k["t"][2].get<double>()};
      t.keys.push_back(e);
    }
    if (t.keys.empty()) throw UsageError("scene trajectory has no keys");
  }
  return t;
}

std::string fixed(double x, int digits) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << x;
  return s.str();
}

void emit(std::ostream& out, const Common& common, const nlohmann::json& summary, const std::string& human) {
  if (common.json)
    out << summary.dump(2) << '\n';
  else
    out << human;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Canonical-head geometry engine: synthetic rendering, canonical estimation, motion transfer and "
               "pose-controllable novel views."};
  app.require_subcommand(1);
  Common common;
  app.add_option("--threads", common.threads, "Cap on worker threads (0 = runtime default)")
      ->check(CLI::NonNegativeNumber);
  app.add_flag("--json", common.json, "Print the JSON summary instead of the human-readable lines");

  auto add_out = [&](CLI::App* sub) {
    sub->add_option("--out", common.out, "Output directory (default $HEAD3D_OUT/<subcommand>)");
  };

  // render-synthetic
  CLI::App* render = app.add_subcommand("render-synthetic", "Render an oracle video of the synthetic head scene");
  std::string scene_path;
  int frames = 40;
  CameraFlags render_cam;
  render->add_option("--config", scene_path, "Scene JSON (defaults for missing keys)")->check(CLI::ExistingFile);
  render->add_option("--frames", frames, "Frame count")->check(CLI::PositiveNumber)->capture_default_str();
  add_camera(render, render_cam, true);
  add_out(render);

  // estimate-canonical
  CLI::App* estimate = app.add_subcommand("estimate-canonical", "Build a canonical-head session from a subject video");
  std::string subject_dir;
  ModelFlags est_model;
  CameraFlags est_cam;
  double pivot = 1.0;
  estimate->add_option("--subject", subject_dir, "Subject video directory")->required()->check(CLI::ExistingDirectory);
  estimate->add_option("--pivot", pivot, "Head-center depth used for user poses")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  add_model(estimate, est_model, false);
  add_camera(estimate, est_cam, false);
  add_out(estimate);

  // transfer
  CLI::App* transfer_cmd = app.add_subcommand("transfer", "Drive the subject head with the motion of another video");
  std::string driving_dir;
  ModelFlags tr_model;
  CameraFlags tr_cam;
  bool save_attention = false;
  transfer_cmd->add_option("--subject", subject_dir, "Subject video directory")->required()->check(CLI::ExistingDirectory);
  transfer_cmd->add_option("--driving", driving_dir, "Driving video directory")->required()->check(CLI::ExistingDirectory);
  transfer_cmd->add_flag("--save-attention", save_attention, "Also write attention heat maps per frame");
  add_model(transfer_cmd, tr_model, true);
  add_camera(transfer_cmd, tr_cam, false);
  add_out(transfer_cmd);

  // novel-view
  CLI::App* novel = app.add_subcommand("novel-view", "Render the session head under a user pose");
  std::string session_dir;
  EulerPose user_pose;
  double tx = 0.0, ty = 0.0, tz = 0.0;
  novel->add_option("--session", session_dir, "Session directory")->required()->check(CLI::ExistingDirectory);
  novel->add_option("--yaw", user_pose.yaw, "Degrees")->capture_default_str();
  novel->add_option("--pitch", user_pose.pitch, "Degrees")->capture_default_str();
  novel->add_option("--roll", user_pose.roll, "Degrees")->capture_default_str();
  novel->add_option("--tx", tx, "Meters")->capture_default_str();
  novel->add_option("--ty", ty, "Meters")->capture_default_str();
  novel->add_option("--tz", tz, "Meters")->capture_default_str();
  add_out(novel);

  // metrics
  CLI::App* metrics = app.add_subcommand("metrics", "Mean squared error and PSNR between two videos");
  std::string dir_a, dir_b;
  metrics->add_option("--a", dir_a, "First video directory")->required()->check(CLI::ExistingDirectory);
  metrics->add_option("--b", dir_b, "Second video directory")->required()->check(CLI::ExistingDirectory);
  metrics->add_option("--out", common.out, "Optional directory for summary.json");

  // ablation
  CLI::App* ablation = app.add_subcommand("ablation", "Reference-count and variant sweep on the synthetic scene");
  std::vector<int> n_values{1, 3, 5};
  CameraFlags abl_cam;
  ablation->add_option("--config", scene_path, "Scene JSON")->check(CLI::ExistingFile);
  ablation->add_option("--frames", frames, "Frame count")->check(CLI::PositiveNumber)->capture_default_str();
  ablation->add_option("--n-values", n_values, "Reference counts")->delimiter(',')->check(CLI::PositiveNumber);
  add_camera(ablation, abl_cam, true);
  add_out(ablation);

  // serve
  CLI::App* serve = app.add_subcommand("serve", "HTTP backend for interactive novel views");
  ServeOptions serve_opts;
  std::string assets;
  serve->add_option("--session", session_dir, "Session directory")->required()->check(CLI::ExistingDirectory);
  serve->add_option("--bind", serve_opts.bind, "host:port")->capture_default_str();
  serve->add_option("--assets", assets, "Static viewer build served at /")->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();  // delegates to the selected subcommand
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  if (common.threads > 0) omp_set_num_threads(common.threads);

  try {
    if (render->parsed()) {
      const fs::path dir = output_dir(common, "render-synthetic");
      const nlohmann::json scene_json = scene_path.empty() ? nlohmann::json::object() : read_json(scene_path);
      const SyntheticScene scene = scene_from_json(scene_json);
      const TrajectorySpec traj = trajectory_from(scene_json, frames);
      const CameraIntrinsics K = intrinsics_from_fov(render_cam.width, render_cam.height, render_cam.fov);
      const VideoSequence seq = render_sequence(scene, traj, K);
      const VideoCamera cam{K.width, K.height, render_cam.fov};
      write_video(dir, seq, &cam);
      write_json(dir / "scene.json", scene_to_json(scene));
      const nlohmann::json summary = {{"command", "render-synthetic"}, {"frames", seq.size()},
                                      {"width", K.width},            {"height", K.height},
                                      {"fov", render_cam.fov},       {"out", dir.string()}};
      write_json(dir / "summary.json", summary);
      emit(out, common, summary, "rendered " + std::to_string(seq.size()) + " frames to " + dir.string() + "\n");
      return 0;
    }

    if (estimate->parsed()) {
      const fs::path dir = output_dir(common, "estimate-canonical");
      const VideoSequence subject = read_video(subject_dir);
      double fov = 0.0;
      const CameraIntrinsics K = video_intrinsics(subject_dir, subject, estimate, est_cam, fov);
      const TransferConfig cfg = make_config(est_model);
      const ReferenceChoice choice = select_references(static_cast<int>(subject.size()), cfg);
      Session s;
      s.canonical = build_canonical(subject, choice.references, K, cfg);
      s.reference = subject.at(choice.s_ref);
      s.K = K;
      s.fov_deg = fov;
      s.pivot_depth = pivot;
      s.created = utc_timestamp();
      save_session(dir, s);
      const nlohmann::json summary = {{"command", "estimate-canonical"},
                                      {"references", choice.references},
                                      {"s_ref", choice.s_ref},
                                      {"valid_pixels", s.canonical.valid.count()},
                                      {"config", config_json(cfg)},
                                      {"out", dir.string()}};
      write_json(dir / "summary.json", summary);
      emit(out, common, summary,
           "canonical head from " + std::to_string(choice.references.size()) + " references written to " +
               dir.string() + "\n");
      return 0;
    }

    if (transfer_cmd->parsed()) {
      const fs::path dir = output_dir(common, "transfer");
      const VideoSequence subject = read_video(subject_dir);
      const VideoSequence driving = read_video(driving_dir);
      double fov = 0.0;
      const CameraIntrinsics K = video_intrinsics(subject_dir, subject, transfer_cmd, tr_cam, fov);
      const TransferConfig cfg = make_config(tr_model);
      const TransferResult r = transfer(subject, driving, cfg, K);
      const VideoCamera cam{K.width, K.height, fov};
      write_video(dir, r.frames, &cam);
      nlohmann::json frames_json = nlohmann::json::array();
      std::vector<std::vector<std::string>> rows;
      for (std::size_t i = 0; i < r.frames.size(); ++i) {
        const double psnr = psnr_from_mse(masked_mse(r.frames[i].rgb, driving[i].rgb, *r.frames[i].mask));
        nlohmann::json f = {{"index", i}, {"psnr", psnr}, {"flagged", r.reports[i].flagged}};
        if (r.reports[i].flagged) f["error"] = r.reports[i].error;
        if (!r.reports[i].flagged) f["pose"] = pose_to_json(r.reports[i].pose);
        if (r.reports[i].estimate) {
          f["solver_residual"] = r.reports[i].estimate->residual;
          f["solver_converged"] = r.reports[i].estimate->converged;
        }
        frames_json.push_back(f);
        rows.push_back({std::to_string(i), fixed(psnr, 2), r.reports[i].flagged ? "yes" : "no"});
        if (save_attention && !r.reports[i].flagged) {
          const SynthesizedFrame s = synthesize_view(r.canonical, subject.at(r.choice.s_ref), r.reports[i].pose, K, cfg);
          char name[64];
          std::snprintf(name, sizeof name, "attention_%04zu_", i);
          write_png(dir / (std::string(name) + "head.png"), attention_heatmap(s.prediction.attention.head));
          write_png(dir / (std::string(name) + "ref.png"), attention_heatmap(s.prediction.attention.ref));
          write_png(dir / (std::string(name) + "dec.png"), attention_heatmap(s.prediction.attention.dec));
        }
      }
      const nlohmann::json summary = {{"command", "transfer"},
                                      {"frames", frames_json},
                                      {"references", r.choice.references},
                                      {"s_ref", r.choice.s_ref},
                                      {"config", config_json(cfg)},
                                      {"out", dir.string()}};
      write_json(dir / "report.json", summary);
      const std::string table = format_table({"frame", "psnr_db", "flagged"}, rows);
      {
        std::ofstream t(dir / "report.txt");
        t << table;
      }
      emit(out, common, summary, table);
      return 0;
    }

    if (novel->parsed()) {
      const fs::path dir = output_dir(common, "novel-view");
      const Session s = load_session(session_dir);
      user_pose.t = {tx, ty, tz};
      const NovelViewService svc(s);
      const std::vector<std::uint8_t> png = svc.render_png(user_pose);
      fs::create_directories(dir);
      {
        std::ofstream f(dir / "novel_view.png", std::ios::binary);
        f.write(reinterpret_cast<const char*>(png.data()), static_cast<std::streamsize>(png.size()));
        if (!f) throw IoError("cannot write " + (dir / "novel_view.png").string());
      }
      const nlohmann::json summary = {
          {"command", "novel-view"},
          {"pose", {{"yaw", user_pose.yaw}, {"pitch", user_pose.pitch}, {"roll", user_pose.roll}, {"t", {tx, ty, tz}}}},
          {"out", (dir / "novel_view.png").string()}};
      write_json(dir / "summary.json", summary);
      emit(out, common, summary, "wrote " + (dir / "novel_view.png").string() + "\n");
      return 0;
    }

    if (metrics->parsed()) {
      const VideoSequence a = read_video(dir_a), b = read_video(dir_b);
      const double mse = metric_mse(a, b), psnr = psnr_from_mse(mse);
      const nlohmann::json summary = {{"command", "metrics"}, {"frames", a.size()}, {"mse", mse}, {"psnr", psnr}};
      if (!common.out.empty()) {
        fs::create_directories(common.out);
        write_json(fs::path(common.out) / "summary.json", summary);
      }
      std::ostringstream human;
      human << "mse " << mse << "\npsnr " << fixed(psnr, 2) << " dB\n";
      emit(out, common, summary, human.str());
      return 0;
    }

    if (ablation->parsed()) {
      const fs::path dir = output_dir(common, "ablation");
      const nlohmann::json scene_json = scene_path.empty() ? nlohmann::json::object() : read_json(scene_path);
      const SyntheticScene scene = scene_from_json(scene_json);
      const TrajectorySpec traj = trajectory_from(scene_json, frames);
      const CameraIntrinsics K = intrinsics_from_fov(abl_cam.width, abl_cam.height, abl_cam.fov);
      const AblationReport rep = ablation_run(scene, traj, n_values, K);
      nlohmann::json rows_json = nlohmann::json::array();
      std::vector<std::vector<std::string>> rows;
      for (const AblationRow& row : rep.rows) {
        rows_json.push_back({{"label", row.label},
                             {"n", row.n},
                             {"use_mean_canonical", row.use_mean_canonical},
                             {"disable_canonical_head", row.disable_canonical_head},
                             {"mse", row.mse},
                             {"psnr", row.psnr},
                             {"min_frame_psnr", row.min_frame_psnr}});
        rows.push_back({row.label, fixed(row.mse, 6), fixed(row.psnr, 2), fixed(row.min_frame_psnr, 2)});
      }
      fs::create_directories(dir);
      const nlohmann::json summary = {{"command", "ablation"}, {"frames", frames}, {"rows", rows_json}};
      write_json(dir / "report.json", summary);
      const std::string table = format_table({"variant", "mse", "psnr_db", "min_frame_psnr_db"}, rows);
      {
        std::ofstream t(dir / "table.txt");
        t << table;
      }
      emit(out, common, summary, table);
      return 0;
    }

    if (serve->parsed()) {
      serve_opts.assets = assets;
      if (common.threads > 0) serve_opts.threads = common.threads;
      auto svc = std::make_shared<const NovelViewService>(load_session(session_dir));
      HttpServer server(svc, serve_opts);
      if (!server.bind()) throw std::runtime_error("cannot bind " + serve_opts.bind);
      out << "serving " << session_dir << " on http://" << parse_bind(serve_opts.bind).first << ':' << server.port()
          << "/" << std::endl;
      return server.listen() ? 0 : 2;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace head3d
