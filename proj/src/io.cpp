#include "handfit/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace handfit {

using nlohmann::json;

namespace {

json parse_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

// Field accessors that turn nlohmann's type errors into ParseError with the
// offending field name.
template <typename T>
T field(const json& j, const std::string& key) {
  if (!j.contains(key)) throw ParseError("missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError("field '" + key + "': " + e.what());
  }
}

template <typename T>
T field_or(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  return field<T>(j, key);
}

Eigen::Vector3d vec3(const json& j, const std::string& key) {
  const auto v = field<std::vector<double>>(j, key);
  if (v.size() != 3) throw ParseError("field '" + key + "' must have 3 entries");
  return {v[0], v[1], v[2]};
}

json to_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

template <typename Derived>
std::vector<double> to_std(const Eigen::MatrixBase<Derived>& v) {
  return std::vector<double>(v.derived().data(), v.derived().data() + v.size());
}

}  // namespace

SkeletonAssets load_skeleton(const std::filesystem::path& path) {
  const json j = parse_file(path);
  SkeletonAssets a;

  for (const json& jj : field<json>(j, "joints")) {
    JointDef d;
    d.name = field<std::string>(jj, "name");
    d.parent = field<int>(jj, "parent");
    a.topo.joints.push_back(d);
  }
  for (const json& jb : field<json>(j, "bones")) {
    BoneDef b;
    b.parent_joint = field<int>(jb, "parent_joint");
    b.child_joint = field<int>(jb, "child_joint");
    b.rest_dir = vec3(jb, "rest_dir");
    a.topo.bones.push_back(b);
  }
  for (const json& jd : field<json>(j, "dofs")) {
    DofDef d;
    d.name = field<std::string>(jd, "name");
    d.joint = field<int>(jd, "joint");
    d.axis = vec3(jd, "axis");
    d.limit_lo = field<double>(jd, "limit_lo");
    d.limit_hi = field<double>(jd, "limit_hi");
    a.topo.dofs.push_back(d);
  }
  a.topo.finalize();
  a.limits = a.topo.limit_table();

  const json jm = field<json>(j, "bone_model");
  const auto b_avg = field<std::vector<double>>(jm, "b_avg");
  if (b_avg.size() != kBoneCount) throw ValidationError("b_avg must have 20 entries");
  for (int i = 0; i < kBoneCount; ++i) {
    if (!(b_avg[i] > 0.0)) throw ValidationError("b_avg entries must be positive");
    a.bone_model.b_avg[i] = b_avg[i];
  }
  const auto m = field<std::vector<std::vector<double>>>(jm, "m_pca");
  if (m.size() != kBoneCount) throw ValidationError("m_pca must be a 20x20 matrix");
  for (int r = 0; r < kBoneCount; ++r) {
    if (m[r].size() != kBoneCount) throw ValidationError("m_pca must be a 20x20 matrix");
    for (int c = 0; c < kBoneCount; ++c) a.bone_model.m_pca(r, c) = m[r][c];
  }

  for (const json& jb : field<json>(j, "blobs")) {
    Blob3D b;
    b.bone_index = field<int>(jb, "bone_index");
    b.t = field<double>(jb, "t");
    b.sigma_mm = field<double>(jb, "sigma_mm");
    if (b.bone_index < 0 || b.bone_index >= kBoneCount)
      throw ValidationError("blob bone_index out of range");
    if (b.t < 0.0 || b.t > 1.0) throw ValidationError("blob t must be in [0,1]");
    if (!(b.sigma_mm > 0.0)) throw ValidationError("blob sigma_mm must be positive");
    a.blobs.push_back(b);
  }
  if (a.blobs.empty()) throw ValidationError("skeleton file must define at least one blob");
  return a;
}

CameraFile load_camera(const std::filesystem::path& path) {
  const json j = parse_file(path);
  CameraFile c;
  c.cam.fx = field<double>(j, "fx");
  c.cam.fy = field<double>(j, "fy");
  c.cam.cx = field<double>(j, "cx");
  c.cam.cy = field<double>(j, "cy");
  c.width = field_or<int>(j, "width", 0);
  c.height = field_or<int>(j, "height", 0);
  if (!(c.cam.fx > 0.0) || !(c.cam.fy > 0.0))
    throw ValidationError("camera fx and fy must be positive");
  return c;
}

std::vector<FrameAnnotation> load_annotations(const std::filesystem::path& path) {
  const json j = parse_file(path);
  std::vector<FrameAnnotation> out;
  for (const json& jf : field<json>(j, "frames")) {
    FrameAnnotation f;
    f.name = field_or<std::string>(jf, "name", "");
    f.crop_center = vec3(jf, "crop_center");
    if (jf.contains("targets")) {
      for (const json& jt : jf.at("targets")) {
        JointTarget t;
        t.joint_index = field<int>(jt, "joint_index");
        const std::string kind = field<std::string>(jt, "kind");
        if (kind == "2d") {
          t.kind = TargetKind::Point2D;
          const auto v = field<std::vector<double>>(jt, "value");
          if (v.size() != 2) throw ParseError("2d target value must have 2 entries");
          t.value = {v[0], v[1], 0.0};
        } else if (kind == "3d") {
          t.kind = TargetKind::Point3D;
          t.value = vec3(jt, "value");
        } else {
          throw ParseError("target kind must be '2d' or '3d'");
        }
        t.visible = field_or<bool>(jt, "visible", true);
        if (t.joint_index < 0 || t.joint_index >= kJointCount)
          throw ValidationError("target joint_index out of range");
        f.targets.push_back(t);
      }
    }
    out.push_back(std::move(f));
  }
  return out;
}

RunConfig load_config(const std::filesystem::path& path) {
  const json j = parse_file(path);
  RunConfig c;
  if (j.contains("weights")) {
    const json jw = j.at("weights");
    c.weights.lambda_dissim = field_or<double>(jw, "lambda_dissim", c.weights.lambda_dissim);
    c.weights.lambda_collision =
        field_or<double>(jw, "lambda_collision", c.weights.lambda_collision);
    c.weights.lambda_bone = field_or<double>(jw, "lambda_bone", c.weights.lambda_bone);
    c.weights.lambda_lim = field_or<double>(jw, "lambda_lim", c.weights.lambda_lim);
    c.weights.lambda_joint = field_or<double>(jw, "lambda_joint", c.weights.lambda_joint);
    c.weights.slack_mm = field_or<double>(jw, "slack_mm", c.weights.slack_mm);
    for (auto [name, value] :
         {std::pair<const char*, double>{"lambda_dissim", c.weights.lambda_dissim},
          {"lambda_collision", c.weights.lambda_collision},
          {"lambda_bone", c.weights.lambda_bone},
          {"lambda_lim", c.weights.lambda_lim},
          {"lambda_joint", c.weights.lambda_joint},
          {"slack_mm", c.weights.slack_mm}}) {
      if (value < 0.0)
        throw ValidationError(std::string(name) + " must be nonnegative");
    }
  }
  c.quadtree_c_mm = field_or<double>(j, "quadtree_c_mm", c.quadtree_c_mm);
  c.crop_side_mm = field_or<double>(j, "crop_side_mm", c.crop_side_mm);
  c.image_size = field_or<int>(j, "image_size", c.image_size);
  if (!(c.quadtree_c_mm > 0.0)) throw ValidationError("quadtree_c_mm must be positive");
  if (!(c.crop_side_mm > 0.0)) throw ValidationError("crop_side_mm must be positive");
  if (c.image_size < 1) throw ValidationError("image_size must be >= 1");
  if (j.contains("fit")) {
    const json jf = j.at("fit");
    c.fit.max_iters = field_or<int>(jf, "max_iters", c.fit.max_iters);
    c.fit.step_size = field_or<double>(jf, "step_size", c.fit.step_size);
    c.fit.beta1 = field_or<double>(jf, "beta1", c.fit.beta1);
    c.fit.beta2 = field_or<double>(jf, "beta2", c.fit.beta2);
    c.fit.tolerance = field_or<double>(jf, "tolerance", c.fit.tolerance);
    c.fit.patience = field_or<int>(jf, "patience", c.fit.patience);
    c.fit.max_halvings = field_or<int>(jf, "max_halvings", c.fit.max_halvings);
    c.fit.translation_scale =
        field_or<double>(jf, "translation_scale", c.fit.translation_scale);
    if (c.fit.max_iters < 1) throw ValidationError("fit.max_iters must be >= 1");
    if (!(c.fit.step_size > 0.0)) throw ValidationError("fit.step_size must be positive");
  }
  return c;
}

PoseFile load_pose(const std::filesystem::path& path) {
  const json j = parse_file(path);
  PoseFile p;
  const auto theta = field<std::vector<double>>(j, "theta");
  if (theta.size() != kPoseDofCount) throw ValidationError("theta must have 26 entries");
  for (int i = 0; i < kPoseDofCount; ++i) p.theta.theta[i] = theta[i];
  const auto beta = field_or<std::vector<double>>(j, "beta", std::vector<double>(20, 0.0));
  if (beta.size() != kShapeDofCount) throw ValidationError("beta must have 20 entries");
  for (int i = 0; i < kShapeDofCount; ++i) p.beta.beta[i] = beta[i];
  if (!p.theta.theta.allFinite() || !p.beta.beta.allFinite())
    throw ValidationError("pose parameters must be finite");
  return p;
}

GroundTruth load_ground_truth(const std::filesystem::path& path) {
  const json j = parse_file(path);
  GroundTruth gt;
  const auto joints = field<std::vector<std::vector<double>>>(j, "joints");
  if (joints.size() != kJointCount) throw ValidationError("joints must have 21 entries");
  for (int i = 0; i < kJointCount; ++i) {
    if (joints[i].size() != 3) throw ParseError("joint entries must have 3 coordinates");
    gt.joints[i] = {joints[i][0], joints[i][1], joints[i][2]};
  }
  const auto theta = field<std::vector<double>>(j, "theta");
  const auto beta = field<std::vector<double>>(j, "beta");
  if (theta.size() != kPoseDofCount || beta.size() != kShapeDofCount)
    throw ValidationError("ground truth theta/beta have wrong length");
  for (int i = 0; i < kPoseDofCount; ++i) gt.theta.theta[i] = theta[i];
  for (int i = 0; i < kShapeDofCount; ++i) gt.beta.beta[i] = beta[i];
  return gt;
}

FitResult load_fit_result(const std::filesystem::path& path) {
  const json j = parse_file(path);
  FitResult r;
  const auto theta = field<std::vector<double>>(j, "theta");
  const auto beta = field<std::vector<double>>(j, "beta");
  if (theta.size() != kPoseDofCount || beta.size() != kShapeDofCount)
    throw ValidationError("fit result theta/beta have wrong length");
  for (int i = 0; i < kPoseDofCount; ++i) r.theta.theta[i] = theta[i];
  for (int i = 0; i < kShapeDofCount; ++i) r.beta.beta[i] = beta[i];
  r.iterations = field_or<int>(j, "iterations", 0);
  r.seed_index = field_or<int>(j, "seed_index", -1);
  if (j.contains("energy")) {
    const json je = j.at("energy");
    r.report.e_total = field_or<double>(je, "total", 0.0);
    r.report.e_dissim = field_or<double>(je, "dissim", 0.0);
    r.report.e_collision = field_or<double>(je, "collision", 0.0);
    r.report.e_bone = field_or<double>(je, "bone", 0.0);
    r.report.e_lim = field_or<double>(je, "lim", 0.0);
    r.report.e_joint = field_or<double>(je, "joint", 0.0);
  }
  return r;
}

void save_fit_result(const std::filesystem::path& path, const FitResult& result,
                     const JointArray& joints) {
  json j;
  j["theta"] = to_std(result.theta.theta);
  j["beta"] = to_std(result.beta.beta);
  j["iterations"] = result.iterations;
  j["seed_index"] = result.seed_index;
  j["energy"] = {{"total", result.report.e_total},   {"dissim", result.report.e_dissim},
                 {"collision", result.report.e_collision}, {"bone", result.report.e_bone},
                 {"lim", result.report.e_lim},       {"joint", result.report.e_joint}};
  json jj = json::array();
  for (const Eigen::Vector3d& p : joints) jj.push_back(to_json(p));
  j["joints"] = jj;
  atomic_write(path, j.dump(2) + "\n");
}

void save_ground_truth(const std::filesystem::path& path, const GroundTruth& gt) {
  json j;
  json jj = json::array();
  for (const Eigen::Vector3d& p : gt.joints) jj.push_back(to_json(p));
  j["joints"] = jj;
  j["theta"] = to_std(gt.theta.theta);
  j["beta"] = to_std(gt.beta.beta);
  atomic_write(path, j.dump(2) + "\n");
}

namespace {

constexpr char kRawMagic[4] = {'R', 'D', 'F', '1'};

DepthImage load_depth_pgm(std::istream& in, const std::string& name) {
  std::string magic;
  in >> magic;
  if (magic != "P5") throw ParseError(name + ": expected P5 PGM");
  int width = 0, height = 0, maxval = 0;
  in >> width >> height >> maxval;
  if (!in || width < 1 || height < 1) throw ParseError(name + ": bad PGM header");
  if (maxval != 65535) throw ParseError(name + ": depth PGM requires maxval 65535");
  in.get();  // single whitespace after maxval
  DepthImage img;
  img.width = width;
  img.height = height;
  img.depth_mm.resize(static_cast<size_t>(width) * height);
  std::vector<unsigned char> buf(img.depth_mm.size() * 2);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (static_cast<size_t>(in.gcount()) != buf.size())
    throw ParseError(name + ": truncated PGM payload");
  for (size_t i = 0; i < img.depth_mm.size(); ++i) {
    const unsigned v = (static_cast<unsigned>(buf[2 * i]) << 8) | buf[2 * i + 1];
    img.depth_mm[i] = static_cast<double>(v);
  }
  return img;
}

DepthImage load_depth_raw(std::istream& in, const std::string& name) {
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kRawMagic, 4) != 0)
    throw ParseError(name + ": expected RDF1 magic");
  uint32_t wh[2];
  in.read(reinterpret_cast<char*>(wh), 8);
  if (in.gcount() != 8) throw ParseError(name + ": truncated RDF1 header");
  DepthImage img;
  img.width = static_cast<int>(wh[0]);
  img.height = static_cast<int>(wh[1]);
  if (img.width < 1 || img.height < 1) throw ParseError(name + ": bad RDF1 size");
  img.depth_mm.resize(static_cast<size_t>(img.width) * img.height);
  std::vector<float> buf(img.depth_mm.size());
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (static_cast<size_t>(in.gcount()) != buf.size() * sizeof(float))
    throw ParseError(name + ": truncated RDF1 payload");
  for (size_t i = 0; i < buf.size(); ++i) img.depth_mm[i] = buf[i];
  return img;
}

}  // namespace

DepthImage load_depth(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  const int first = in.peek();
  if (first == 'P') return load_depth_pgm(in, path.string());
  if (first == 'R') return load_depth_raw(in, path.string());
  throw ParseError(path.string() + ": unknown depth format (expected P5 or RDF1)");
}

void save_depth_pgm(const std::filesystem::path& path, const DepthImage& img) {
  std::ostringstream out;
  out << "P5\n" << img.width << " " << img.height << "\n65535\n";
  for (double d : img.depth_mm) {
    long v = d <= 0.0 ? 0 : std::lround(d);
    v = std::clamp(v, 0L, 65535L);
    out.put(static_cast<char>((v >> 8) & 0xff));
    out.put(static_cast<char>(v & 0xff));
  }
  atomic_write(path, out.str());
}

void save_depth_raw(const std::filesystem::path& path, const DepthImage& img) {
  std::string bytes;
  bytes.reserve(12 + img.depth_mm.size() * sizeof(float));
  bytes.append(kRawMagic, 4);
  const uint32_t wh[2] = {static_cast<uint32_t>(img.width), static_cast<uint32_t>(img.height)};
  bytes.append(reinterpret_cast<const char*>(wh), 8);
  std::vector<float> buf(img.depth_mm.begin(), img.depth_mm.end());
  bytes.append(reinterpret_cast<const char*>(buf.data()), buf.size() * sizeof(float));
  atomic_write(path, bytes);
}

void atomic_write(const std::filesystem::path& path, const std::string& bytes) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ParseError("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw ParseError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace handfit
