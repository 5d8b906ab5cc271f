#include "lumisplat/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <set>

#include "lumisplat/errors.hpp"
#include "lumisplat/renderer.hpp"
#include "lumisplat/rng.hpp"
#include "lumisplat/tone_curve.hpp"

namespace lumisplat {

namespace {

using nlohmann::json;

constexpr std::uint64_t kDegradeStream = 0xde64;
constexpr std::uint64_t kContentStream = 0x5ce2;

// World y-up; cameras look at the origin from a ring.
Camera ring_camera(const DatasetSpec& spec, int index, int total) {
  const double angle = 2.0 * M_PI * index / total;
  const Eigen::Vector3d eye(spec.ring_radius * std::cos(angle), spec.ring_height,
                            spec.ring_radius * std::sin(angle));
  return make_lookat_camera(spec.width, spec.height, spec.fov_x, eye,
                            Eigen::Vector3d::Zero());
}

// Every (total/test)-th ring position, offset to the middle of its stride,
// is held out for testing.
std::set<int> test_indices(const DatasetSpec& spec) {
  std::set<int> held;
  if (spec.test_views <= 0) return held;
  const int total = spec.train_views + spec.test_views;
  const int stride = std::max(total / spec.test_views, 1);
  for (int j = 0; j < spec.test_views; ++j) held.insert((stride / 2 + j * stride) % total);
  return held;
}

// OpenGL-style camera-to-world (x right, y up, z backward) from the
// pipeline's x-right/y-down/z-forward world-to-camera.
json transform_matrix_json(const Camera& cam) {
  const Mat3 r_c2w = cam.rotation().transpose();
  const Eigen::Vector3d eye = -r_c2w * cam.translation();
  Mat3 gl = r_c2w;
  gl.col(1) = -gl.col(1);
  gl.col(2) = -gl.col(2);
  json rows = json::array();
  for (int r = 0; r < 3; ++r)
    rows.push_back(json::array({gl(r, 0), gl(r, 1), gl(r, 2), eye[r]}));
  rows.push_back(json::array({0.0, 0.0, 0.0, 1.0}));
  return rows;
}

Camera camera_from_transform(const json& matrix, double fov_x, int width, int height) {
  Mat3 gl;
  Eigen::Vector3d eye;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) gl(r, c) = matrix.at(r).at(c).get<double>();
    eye[r] = matrix.at(r).at(3).get<double>();
  }
  Mat3 r_c2w = gl;
  r_c2w.col(1) = -r_c2w.col(1);
  r_c2w.col(2) = -r_c2w.col(2);

  Camera cam;
  cam.width = width;
  cam.height = height;
  cam.fx = 0.5 * width / std::tan(0.5 * fov_x);
  cam.fy = cam.fx;
  cam.cx = width / 2.0;
  cam.cy = height / 2.0;
  cam.world_to_camera = Mat4::Identity();
  cam.world_to_camera.topLeftCorner<3, 3>() = r_c2w.transpose();
  cam.world_to_camera.topRightCorner<3, 1>() = -r_c2w.transpose() * eye;
  if (!cam.valid()) throw DataError("transforms file: camera matrix is not a rigid pose");
  return cam;
}

json load_json(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path.string());
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw DataError("malformed JSON in " + path.string() + ": " + e.what());
  }
  return j;
}

}  // namespace

DegradationParams sample_degradation(const std::string& preset, std::uint64_t seed,
                                     int view_index) {
  Rng rng(derive_seed(seed, kDegradeStream, static_cast<std::uint64_t>(view_index)));
  DegradationParams p;
  if (preset == "lowlight") {
    p.s = rng.uniform(0.15, 0.25);
    p.gamma = rng.uniform(1.8, 2.4);
  } else if (preset == "overexposure") {
    p.s = rng.uniform(2.0, 3.0);
    p.gamma = rng.uniform(0.45, 0.6);
  } else if (preset == "varying") {
    p.s = rng.uniform(0.3, 1.4);
    p.gamma = rng.uniform(0.8, 1.25);
  } else if (preset == "identity") {
    p.s = 1.0;
    p.gamma = 1.0;
  } else {
    throw DataError("unknown degradation preset: " + preset);
  }
  return p;
}

Image degrade(const Image& in, const DegradationParams& p) {
  Image out(in.width, in.height);
  for (size_t i = 0; i < in.data.size(); ++i)
    out.data[i] = std::clamp(std::pow(p.s * in.data[i], p.gamma), 0.0, 1.0);
  return out;
}

GaussianCloud make_ground_truth_scene(const DatasetSpec& spec) {
  GaussianCloud cloud;
  const int total = spec.backdrop_gaussians + spec.content_gaussians;
  cloud.resize(total);

  // Backdrop: a shell of large Gaussians enclosing the ring, with a smooth
  // deterministic color field so every view sees structure, not void.
  Rng shell_rng(derive_seed(spec.seed, kContentStream, 1));
  for (int i = 0; i < spec.backdrop_gaussians; ++i) {
    Eigen::Vector3d dir(shell_rng.normal(), shell_rng.normal(), shell_rng.normal());
    dir.normalize();
    cloud.positions[i] = dir * spec.backdrop_radius;
    cloud.log_scales[i] = Vec3::Constant(std::log(0.45));
    cloud.rotations[i] = Vec4(1, 0, 0, 0);
    cloud.opacity_logits[i] = logit(0.92);
    for (int c = 0; c < 3; ++c) {
      const double phase = 2.1 * dir.x() + 1.3 * dir.y() + 1.7 * dir.z() + 2.0 * c;
      cloud.color_logits[i][c] = logit(0.45 + 0.22 * std::sin(phase));
    }
    cloud.gains[i] = Vec3::Ones();
    cloud.offsets[i] = Vec3::Zero();
  }

  Rng rng(derive_seed(spec.seed, kContentStream, 0));
  for (int i = spec.backdrop_gaussians; i < total; ++i) {
    cloud.positions[i] =
        Vec3(rng.uniform(-1.1, 1.1), rng.uniform(-1.1, 1.1), rng.uniform(-1.1, 1.1));
    cloud.log_scales[i] = Vec3(std::log(rng.uniform(0.07, 0.22)),
                               std::log(rng.uniform(0.07, 0.22)),
                               std::log(rng.uniform(0.07, 0.22)));
    Vec4 q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    cloud.rotations[i] = q.normalized();
    cloud.opacity_logits[i] = logit(rng.uniform(0.55, 0.92));
    cloud.color_logits[i] = Vec3(logit(rng.uniform(0.15, 0.9)), logit(rng.uniform(0.15, 0.9)),
                                 logit(rng.uniform(0.15, 0.9)));
    cloud.gains[i] = Vec3::Ones();
    cloud.offsets[i] = Vec3::Zero();
  }
  return cloud;
}

void synth_dataset(const DatasetSpec& spec, const std::filesystem::path& out_dir) {
  if (spec.train_views < 2) throw DataError("synth_dataset: need at least 2 training views");
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "train", ec);
  std::filesystem::create_directories(out_dir / "train_clean", ec);
  std::filesystem::create_directories(out_dir / "test", ec);
  if (!std::filesystem::is_directory(out_dir / "train"))
    throw DataError("synth_dataset: cannot create output directory " + out_dir.string());

  const GaussianCloud scene = make_ground_truth_scene(spec);
  const std::set<int> held = test_indices(spec);
  const int total = spec.train_views + spec.test_views;

  json train_frames = json::array(), test_frames = json::array();
  json degradations = json::array();
  int train_id = 0, test_id = 0;
  for (int i = 0; i < total; ++i) {
    const Camera cam = ring_camera(spec, i, total);
    const RenderOutput out = render(project(scene, cam), cam, Vec3::Zero());
    Image clean = out.image_in;
    for (double& v : clean.data) v = std::clamp(v, 0.0, 1.0);

    json frame;
    frame["transform_matrix"] = transform_matrix_json(cam);
    if (held.count(i)) {
      const std::string rel = "./test/r_" + std::to_string(test_id) + ".png";
      frame["file_path"] = rel;
      write_png(out_dir / rel, clean);
      test_frames.push_back(frame);
      ++test_id;
    } else {
      const DegradationParams p = sample_degradation(spec.preset, spec.seed, train_id);
      const std::string rel = "./train/r_" + std::to_string(train_id) + ".png";
      frame["file_path"] = rel;
      write_png(out_dir / rel, degrade(clean, p));
      write_png(out_dir / ("./train_clean/r_" + std::to_string(train_id) + ".png"), clean);
      train_frames.push_back(frame);
      degradations.push_back(
          {{"id", train_id}, {"file", rel}, {"s", p.s}, {"gamma", p.gamma}});
      ++train_id;
    }
  }

  const auto write_transforms = [&](const std::string& name, const json& frames) {
    json root;
    root["camera_angle_x"] = spec.fov_x;
    root["w"] = spec.width;
    root["h"] = spec.height;
    root["frames"] = frames;
    std::ofstream os(out_dir / name);
    if (!os) throw DataError("synth_dataset: cannot write " + name);
    os << root.dump(2) << "\n";
  };
  write_transforms("transforms_train.json", train_frames);
  write_transforms("transforms_test.json", test_frames);

  json sidecar;
  sidecar["preset"] = spec.preset;
  sidecar["seed"] = spec.seed;
  sidecar["views"] = degradations;
  std::ofstream os(out_dir / "degradation.json");
  if (!os) throw DataError("synth_dataset: cannot write degradation.json");
  os << sidecar.dump(2) << "\n";
}

std::vector<ViewRecord> load_views(const std::filesystem::path& dataset_dir,
                                   const std::string& split) {
  const std::filesystem::path tf = dataset_dir / ("transforms_" + split + ".json");
  const json root = load_json(tf);
  if (!root.contains("frames") || !root.at("frames").is_array() || root.at("frames").empty())
    throw DataError("transforms file has no frames: " + tf.string());
  const double fov_x = root.at("camera_angle_x").get<double>();

  std::vector<ViewRecord> views;
  int id = 0;
  for (const json& frame : root.at("frames")) {
    ViewRecord v;
    v.id = id++;
    std::string rel = frame.at("file_path").get<std::string>();
    v.name = std::filesystem::path(rel).stem().string();
    const std::filesystem::path img_path = dataset_dir / rel;
    if (!std::filesystem::exists(img_path))
      throw DataError("missing image for view " + std::to_string(v.id) + ": " +
                      img_path.string());
    v.image = read_png(img_path);
    const int w = root.contains("w") ? root.at("w").get<int>() : v.image.width;
    const int h = root.contains("h") ? root.at("h").get<int>() : v.image.height;
    if (v.image.width != w || v.image.height != h)
      throw DataError("image dimensions mismatch for view " + std::to_string(v.id));
    v.camera = camera_from_transform(frame.at("transform_matrix"), fov_x, w, h);
    v.he_target = he_cdf_target(v.image);
    views.push_back(std::move(v));
  }
  return views;
}

std::vector<std::pair<std::string, Camera>> load_cameras(
    const std::filesystem::path& transforms_file) {
  const json root = load_json(transforms_file);
  if (!root.contains("frames") || !root.at("frames").is_array())
    throw DataError("transforms file has no frames: " + transforms_file.string());
  const double fov_x = root.at("camera_angle_x").get<double>();
  if (!root.contains("w") || !root.contains("h"))
    throw DataError("transforms file must carry w/h for camera-only loading: " +
                    transforms_file.string());
  const int w = root.at("w").get<int>();
  const int h = root.at("h").get<int>();

  std::vector<std::pair<std::string, Camera>> cams;
  for (const json& frame : root.at("frames")) {
    const std::string name =
        std::filesystem::path(frame.at("file_path").get<std::string>()).stem().string();
    cams.emplace_back(name, camera_from_transform(frame.at("transform_matrix"), fov_x, w, h));
  }
  return cams;
}

}  // namespace lumisplat
