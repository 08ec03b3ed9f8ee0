// Timing comparison of the per-pixel kernels: naive serial reference vs the
// production Serial and Parallel lanes. All three must agree bit for bit
// (the tests enforce it); this target reports throughput.

#include <cstdio>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#else
#include <chrono>
#endif

#include "ref/ref_kernels.hpp"
#include "rgbd/synth.hpp"

using namespace rgbd;

namespace {

double now_s() {
#ifdef _OPENMP
  return omp_get_wtime();
#else
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
#endif
}

template <class F>
double best_of(int reps, F&& f) {
  double best = 1e30;
  for (int i = 0; i < reps; ++i) {
    double t0 = now_s();
    f();
    best = std::min(best, now_s() - t0);
  }
  return best;
}

void report(const std::string& name, double ref_s, double serial_s, double par_s) {
  std::printf("%-18s %10.2f ms %10.2f ms %10.2f ms   x%.2f\n", name.c_str(), ref_s * 1e3,
              serial_s * 1e3, par_s * 1e3, par_s > 0 ? serial_s / par_s : 0.0);
}

}  // namespace

int main(int argc, char** argv) {
  int w = 640, h = 480, reps = 3;
  if (argc > 1) w = std::stoi(argv[1]);
  if (argc > 2) h = std::stoi(argv[2]);
  if (argc > 3) reps = std::stoi(argv[3]);

  SceneSpec spec;
  spec.image_width = w;
  spec.image_height = h;
  spec.camera.pitch_deg = 18;
  spec.objects.push_back({0, -0.5, 2.2, 0.0, 0.35, 0.35, 0.35, {200, 80, 80}});
  spec.objects.push_back({1, 0.6, 2.6, 0.0, 0.2, 0.6, 0.2, {80, 200, 80}});
  spec.objects.push_back({2, 0.0, 3.2, 0.0, 0.55, 0.1, 0.4, {80, 80, 200}});
  spec.noise.depth_sigma = 0.002;
  SyntheticScene scene = render(spec);

  std::printf("kernel timings at %dx%d (best of %d)\n", w, h, reps);
#ifdef _OPENMP
  std::printf("openmp threads: %d\n", omp_get_max_threads());
#else
  std::printf("openmp: not enabled\n");
#endif
  std::printf("%-18s %13s %13s %13s   %s\n", "kernel", "reference", "serial", "parallel",
              "speedup");

  PointCloud cloud;
  report("unproject",
         best_of(reps, [&] { cloud = ref::unproject(scene.depth, scene.intrinsics); }),
         best_of(reps, [&] { cloud = unproject(scene.depth, scene.intrinsics, Exec::Serial); }),
         best_of(reps, [&] { cloud = unproject(scene.depth, scene.intrinsics, Exec::Parallel); }));

  NormalParams np;
  NormalMap normals;
  report("estimate_normals",
         best_of(reps, [&] { normals = ref::estimate_normals(cloud, np); }),
         best_of(reps, [&] { normals = estimate_normals(cloud, np, Exec::Serial); }),
         best_of(reps, [&] { normals = estimate_normals(cloud, np, Exec::Parallel); }));

  GravityEstimate grav = estimate_gravity(normals);

  report("disparity_map", best_of(reps, [&] { ref::disparity_map(scene.depth); }),
         best_of(reps, [&] { disparity_map(scene.depth, Exec::Serial); }),
         best_of(reps, [&] { disparity_map(scene.depth, Exec::Parallel); }));

  report("height_map", best_of(reps, [&] { ref::height_map(cloud, grav.g); }),
         best_of(reps, [&] { height_map(cloud, grav.g, 0.0, Exec::Serial); }),
         best_of(reps, [&] { height_map(cloud, grav.g, 0.0, Exec::Parallel); }));

  PropertyMap angle;
  report("angle_map", best_of(reps, [&] { angle = ref::angle_map(normals, grav.g); }),
         best_of(reps, [&] { angle = angle_map(normals, grav.g, Exec::Serial); }),
         best_of(reps, [&] { angle = angle_map(normals, grav.g, Exec::Parallel); }));

  report("scale_to_bytes", best_of(reps, [&] { ref::scale_to_bytes(angle); }),
         best_of(reps, [&] { scale_to_bytes(angle, std::nullopt, Exec::Serial); }),
         best_of(reps, [&] { scale_to_bytes(angle, std::nullopt, Exec::Parallel); }));

  report("render_scene", best_of(reps, [&] { render(spec, Exec::Serial); }),
         best_of(reps, [&] { render(spec, Exec::Serial); }),
         best_of(reps, [&] { render(spec, Exec::Parallel); }));
  return 0;
}
