#include <benchmark/benchmark.h>

#include "head3d/pipeline.hpp"

using namespace head3d;

namespace {

Exec exec_of(const benchmark::State& state) { return state.range(0) ? Exec::parallel : Exec::serial; }

void label(benchmark::State& state) { state.SetLabel(state.range(0) ? "parallel" : "serial"); }

const CameraIntrinsics& camera() {
  static const CameraIntrinsics K = intrinsics_from_fov(256, 256, 10.0);
  return K;
}

const Render& frame() {
  static const Render r = render_frame(SyntheticScene{}, scene_pose(SyntheticScene{}, {12.0, -4.0}), camera());
  return r;
}

void BM_render_frame(benchmark::State& state) {
  const SyntheticScene scene;
  const Pose pose = scene_pose(scene, {10.0});
  for (auto _ : state) benchmark::DoNotOptimize(render_frame(scene, pose, camera(), exec_of(state)));
  label(state);
}

void BM_backward_flow_and_warp(benchmark::State& state) {
  const Pose pose = scene_pose(SyntheticScene{}, {8.0});
  for (auto _ : state) {
    const FlowField flow = backward_flow_field(frame().depth, pose, camera(), exec_of(state));
    benchmark::DoNotOptimize(warp_image_backward(frame().rgb, flow, exec_of(state)));
  }
  label(state);
}

void BM_forward_splat(benchmark::State& state) {
  const DepthMap depth = mask_depth(frame().depth, frame().head);
  const Pose pose = scene_pose(SyntheticScene{}, {12.0, -4.0});
  for (auto _ : state) benchmark::DoNotOptimize(forward_warp_image(frame().rgb, depth, pose, camera(), {}, exec_of(state)));
  label(state);
}

void BM_convlstm_step(benchmark::State& state) {
  const ConvLSTMCell cell = ConvLSTMCell::pass_through(4, 0.02);
  const FeatureMap x = encode_head(frame().rgb, frame().head);
  const AggregatorState s0 = AggregatorState::zeros(x.width(), x.height(), 4);
  for (auto _ : state) benchmark::DoNotOptimize(convlstm_step(cell, x, s0, exec_of(state)));
  label(state);
}

void BM_synthesize_view(benchmark::State& state) {
  static const VideoSequence video = [] {
    TrajectorySpec t;
    t.keys = {{-20.0}, {20.0}};
    t.frames = 5;
    return render_sequence(SyntheticScene{}, t, camera());
  }();
  TransferConfig cfg;
  cfg.exec = exec_of(state);
  static const CanonicalHead canonical = build_canonical(video, {0, 1, 2, 3, 4}, camera(), TransferConfig{});
  const Pose pose = scene_pose(SyntheticScene{}, {15.0, 5.0});
  for (auto _ : state) benchmark::DoNotOptimize(synthesize_view(canonical, video[2], pose, camera(), cfg));
  label(state);
}

}  // namespace

BENCHMARK(BM_render_frame)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_backward_flow_and_warp)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_forward_splat)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_convlstm_step)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_synthesize_view)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
