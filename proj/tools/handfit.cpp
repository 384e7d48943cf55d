// handfit: fit / render / eval / quadtree-dump / energy-report over the
// volumetric-Gaussian hand model. File formats and defaults are documented in
// the repository README.

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "handfit/depth_encode.hpp"
#include "handfit/energy.hpp"
#include "handfit/fitter.hpp"
#include "handfit/io.hpp"
#include "handfit/metrics.hpp"
#include "handfit/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace handfit;

namespace {

struct CommonOpts {
  std::string config_path;
  bool json_out = false;
};

RunConfig resolve_config(const CommonOpts& opts) {
  std::string path = opts.config_path;
  if (path.empty()) {
    if (const char* env = std::getenv("HANDFIT_CONFIG")) path = env;
  }
  if (path.empty()) return RunConfig{};
  return load_config(path);
}

std::vector<fs::path> depth_files(const fs::path& root) {
  std::vector<fs::path> files;
  if (fs::is_directory(root)) {
    for (const auto& e : fs::directory_iterator(root)) {
      const std::string ext = e.path().extension().string();
      if (ext == ".pgm" || ext == ".rdf") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(root);
  }
  if (files.empty()) throw ValidationError("no depth files under " + root.string());
  return files;
}

// Frame name used to match annotations and ground-truth files.
std::string frame_stem(const fs::path& p) {
  std::string stem = p.stem().string();
  for (const char* suffix : {".fit", ".gt"}) {
    if (stem.size() > std::strlen(suffix) &&
        stem.compare(stem.size() - std::strlen(suffix), std::string::npos, suffix) == 0) {
      stem.resize(stem.size() - std::strlen(suffix));
    }
  }
  return stem;
}

const FrameAnnotation* find_annotation(const std::vector<FrameAnnotation>& anns,
                                       const std::string& stem) {
  for (const auto& a : anns) {
    if (a.name == stem) return &a;
  }
  if (anns.size() == 1 && anns[0].name.empty()) return &anns[0];
  return nullptr;
}

JointArray fk_joints(const SkeletonAssets& assets, const PoseParams& theta,
                     const BoneCoeffs& beta) {
  const BoneVec len = decode_bones(assets.bone_model, beta);
  return forward_kinematics(assets.topo, theta, len).joints;
}

// ------------------------------------------------------------------ fit ---

struct FitCli {
  std::string depth, camera, skeleton, annotations, out;
  std::vector<double> crop_center;
  double slack = -1.0;   // <0: keep config value
  double quadtree_c = -1.0;
  int threads = 1;
};

int run_fit(const FitCli& cli, const CommonOpts& opts) {
  RunConfig cfg = resolve_config(opts);
  if (cli.slack >= 0.0) cfg.weights.slack_mm = cli.slack;
  if (cli.quadtree_c > 0.0) cfg.quadtree_c_mm = cli.quadtree_c;

  const SkeletonAssets assets = load_skeleton(cli.skeleton);
  const CameraFile cam = load_camera(cli.camera);
  std::vector<FrameAnnotation> anns;
  if (!cli.annotations.empty()) anns = load_annotations(cli.annotations);

  const auto files = depth_files(cli.depth);
  const bool dir_mode = fs::is_directory(cli.depth);
  if (dir_mode && !fs::is_directory(cli.out)) fs::create_directories(cli.out);

  const auto exclusions = collision_exclusions(assets.topo, assets.blobs);

  struct FrameOut {
    json summary;
  };
  std::vector<FrameOut> results(files.size());
  std::atomic<size_t> next{0};
  std::atomic<bool> failed{false};
  std::string first_error_class, first_error_msg;
  std::mutex err_mutex;

  auto worker = [&]() {
    for (size_t i = next.fetch_add(1); i < files.size(); i = next.fetch_add(1)) {
      if (failed.load()) return;
      try {
        const fs::path& file = files[i];
        const std::string stem = frame_stem(file);
        const DepthImage raw = load_depth(file);

        Eigen::Vector3d center;
        const FrameAnnotation* ann = find_annotation(anns, stem);
        if (cli.crop_center.size() == 3) {
          center = {cli.crop_center[0], cli.crop_center[1], cli.crop_center[2]};
        } else if (ann != nullptr) {
          center = ann->crop_center;
        } else {
          throw ValidationError("no crop center for frame " + stem +
                                " (pass --crop-center or an annotation file)");
        }

        const DepthFrame frame =
            preprocess(raw, cam.cam, center, cfg.crop_side_mm, cfg.image_size);
        const std::vector<ImageBlob> blobs = quadtree_encode(frame, cfg.quadtree_c_mm);
        const double self_sim = blobs.empty() ? 0.0 : image_self_similarity(blobs);
        const std::vector<JointTarget>* targets = ann != nullptr ? &ann->targets : nullptr;

        EnergyInputs in;
        in.topo = &assets.topo;
        in.bone_model = &assets.bone_model;
        in.limits = &assets.limits;
        in.blobs = &assets.blobs;
        in.collision_excluded = &exclusions;
        in.image_blobs = &blobs;
        in.image_self_sim = self_sim;
        in.crop_cam = frame.crop_cam;
        in.targets = targets;
        in.target_cam = cam.cam;
        in.weights = cfg.weights;

        FitConfig fit_cfg = cfg.fit;
        if (fit_cfg.seeds.empty())
          fit_cfg.seeds = default_seeds(assets.topo, assets.bone_model, frame.crop_center);

        const FitResult fit = fit_frame(in, fit_cfg);
        const JointArray joints = fk_joints(assets, fit.theta, fit.beta);

        const fs::path out_path =
            dir_mode ? fs::path(cli.out) / (stem + ".fit.json") : fs::path(cli.out);
        save_fit_result(out_path, fit, joints);

        json s;
        s["frame"] = stem;
        s["energy"] = fit.report.e_total;
        s["iterations"] = fit.iterations;
        s["seed_index"] = fit.seed_index;
        s["out"] = out_path.string();
        results[i].summary = std::move(s);
      } catch (const Error& e) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!failed.exchange(true)) {
          first_error_class = e.error_class();
          first_error_msg = e.what();
        }
        return;
      }
    }
  };

  const int n_threads = std::max(1, std::min<int>(cli.threads, files.size()));
  std::vector<std::thread> pool;
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failed.load()) throw Error(first_error_class, first_error_msg);

  if (opts.json_out) {
    json out = json::array();
    for (const auto& r : results) out.push_back(r.summary);
    std::cout << out.dump(2) << "\n";
  } else {
    for (const auto& r : results) {
      std::cout << r.summary["frame"].get<std::string>() << ": energy "
                << r.summary["energy"].get<double>() << ", "
                << r.summary["iterations"].get<int>() << " iterations -> "
                << r.summary["out"].get<std::string>() << "\n";
    }
  }
  return 0;
}

// --------------------------------------------------------------- render ---

struct RenderCli {
  std::string skeleton, pose, camera, out, gt, preset;
  double noise_sigma = 0.0;
  unsigned seed = 0;
};

int run_render(const RenderCli& cli, const CommonOpts& opts) {
  const SkeletonAssets assets = load_skeleton(cli.skeleton);
  const CameraFile cam = load_camera(cli.camera);
  if (cam.width <= 0 || cam.height <= 0)
    throw ValidationError("render needs width/height in the camera file");

  PoseFile pose;
  if (!cli.pose.empty()) {
    pose = load_pose(cli.pose);
  } else if (!cli.preset.empty()) {
    auto seeds = default_seeds(assets.topo, assets.bone_model, {0.0, 40.0, 500.0});
    const std::vector<std::string> names = {"flat", "curl", "fist", "pinch", "spread"};
    const auto it = std::find(names.begin(), names.end(), cli.preset);
    if (it == names.end()) throw ValidationError("unknown pose preset " + cli.preset);
    pose.theta = seeds[it - names.begin()].theta;
  } else {
    throw ValidationError("render needs --pose or --preset");
  }

  RenderSpec spec;
  spec.cam = cam.cam;
  spec.width = cam.width;
  spec.height = cam.height;
  spec.noise_sigma_mm = cli.noise_sigma;
  spec.noise_seed = cli.seed;

  const RenderOutput out =
      render_depth(assets.topo, assets.bone_model, pose.theta, pose.beta, assets.blobs, spec);
  if (fs::path(cli.out).extension() == ".rdf") {
    save_depth_raw(cli.out, out.depth);
  } else {
    save_depth_pgm(cli.out, out.depth);
  }
  if (!cli.gt.empty()) {
    GroundTruth gt;
    gt.joints = out.joints;
    gt.theta = out.theta;
    gt.beta = out.beta;
    save_ground_truth(cli.gt, gt);
  }
  if (opts.json_out) {
    json j;
    j["coverage"] = out.coverage;
    j["out"] = cli.out;
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << "rendered " << out.coverage << " foreground pixels -> " << cli.out << "\n";
  }
  return 0;
}

// ----------------------------------------------------------------- eval ---

struct EvalCli {
  std::string pred, gt, cloud_from, camera, report;
  double quadtree_c = -1.0;
};

int run_eval(const EvalCli& cli, const CommonOpts& opts) {
  RunConfig cfg = resolve_config(opts);

  std::vector<std::pair<fs::path, fs::path>> pairs;  // (pred, gt)
  if (fs::is_directory(cli.pred)) {
    for (const auto& e : fs::directory_iterator(cli.pred)) {
      if (e.path().extension() != ".json") continue;
      const std::string stem = frame_stem(e.path());
      const fs::path gt_path = fs::path(cli.gt) / (stem + ".gt.json");
      if (fs::exists(gt_path)) pairs.emplace_back(e.path(), gt_path);
    }
    std::sort(pairs.begin(), pairs.end());
  } else {
    pairs.emplace_back(cli.pred, cli.gt);
  }
  if (pairs.empty()) throw ValidationError("no prediction/ground-truth pairs found");

  std::optional<CameraFile> cam;
  if (!cli.camera.empty()) cam = load_camera(cli.camera);

  std::vector<JointArray> preds, gts;
  std::vector<double> max_errors;
  std::vector<double> mdpc_avgs, mdpc_medians;
  json frames = json::array();
  for (const auto& [pred_path, gt_path] : pairs) {
    const FitResult fit = load_fit_result(pred_path);
    const GroundTruth gt = load_ground_truth(gt_path);

    // Joints come from the saved file when present so eval does not need the
    // skeleton; fall back to an error if absent.
    const json j = json::parse(std::ifstream(pred_path));
    if (!j.contains("joints")) throw ValidationError("fit result lacks joint positions");
    JointArray joints;
    for (int i = 0; i < kJointCount; ++i) {
      const auto& v = j.at("joints").at(i);
      joints[i] = {v.at(0).get<double>(), v.at(1).get<double>(), v.at(2).get<double>()};
    }
    preds.push_back(joints);
    gts.push_back(gt.joints);

    double max_err = 0.0;
    for (int k = 0; k < kJointCount; ++k)
      max_err = std::max(max_err, (joints[k] - gt.joints[k]).norm());
    max_errors.push_back(max_err);

    json frame;
    frame["pred"] = pred_path.string();
    frame["max_joint_error_mm"] = max_err;

    if (!cli.cloud_from.empty()) {
      if (!cam) throw MissingIntrinsics("--cloud-from needs --camera");
      const std::string stem = frame_stem(pred_path);
      fs::path depth_path;
      for (const char* ext : {".rdf", ".pgm"}) {
        const fs::path p = fs::path(cli.cloud_from) / (stem + ext);
        if (fs::exists(p)) depth_path = p;
      }
      if (depth_path.empty())
        throw ValidationError("no depth file for frame " + stem + " under " + cli.cloud_from);
      const DepthImage raw = load_depth(depth_path);
      Eigen::Vector3d center = Eigen::Vector3d::Zero();
      for (const auto& p : gt.joints) center += p;
      center /= kJointCount;
      const DepthFrame frame_px =
          preprocess(raw, cam->cam, center, cfg.crop_side_mm, cfg.image_size);
      const auto cloud = frame_point_cloud(frame_px);
      const MdpcResult m = mdpc(joints, cloud);
      mdpc_avgs.push_back(m.average);
      mdpc_medians.push_back(m.median);
      frame["mdpc_avg_mm"] = m.average;
      frame["mdpc_median_mm"] = m.median;
    }
    frames.push_back(std::move(frame));
  }

  std::vector<double> thresholds;
  for (double t = 0.0; t <= 80.0; t += 5.0) thresholds.push_back(t);
  const auto curve = pcf_curve(max_errors, thresholds);

  json report;
  report["frame_count"] = pairs.size();
  report["mean_per_joint_error_mm"] = mean_per_joint_error(preds, gts);
  report["pcf_thresholds_mm"] = thresholds;
  report["pcf"] = curve;
  if (!mdpc_avgs.empty()) {
    const auto mean = [](const std::vector<double>& v) {
      double s = 0.0;
      for (double x : v) s += x;
      return s / v.size();
    };
    report["mdpc_avg_mm"] = mean(mdpc_avgs);
    report["mdpc_median_mm"] = mean(mdpc_medians);
  }
  report["frames"] = frames;

  if (!cli.report.empty()) atomic_write(cli.report, report.dump(2) + "\n");
  if (opts.json_out) {
    std::cout << report.dump(2) << "\n";
  } else {
    std::cout << "frames: " << pairs.size()
              << "\nmean per-joint error: " << report["mean_per_joint_error_mm"].get<double>()
              << " mm\n";
    if (!mdpc_avgs.empty())
      std::cout << "mdpc avg: " << report["mdpc_avg_mm"].get<double>() << " mm\n";
  }
  return 0;
}

// -------------------------------------------------------- quadtree-dump ---

struct DumpCli {
  std::string depth, camera, annotations, out;
  std::vector<double> crop_center;
  double c_mm = -1.0;
};

int run_quadtree_dump(const DumpCli& cli, const CommonOpts& opts) {
  RunConfig cfg = resolve_config(opts);
  if (cli.c_mm > 0.0) cfg.quadtree_c_mm = cli.c_mm;
  const CameraFile cam = load_camera(cli.camera);
  const DepthImage raw = load_depth(cli.depth);

  Eigen::Vector3d center;
  if (cli.crop_center.size() == 3) {
    center = {cli.crop_center[0], cli.crop_center[1], cli.crop_center[2]};
  } else if (!cli.annotations.empty()) {
    const auto anns = load_annotations(cli.annotations);
    const FrameAnnotation* ann = find_annotation(anns, frame_stem(cli.depth));
    if (ann == nullptr) throw ValidationError("no annotation entry for this frame");
    center = ann->crop_center;
  } else {
    throw ValidationError("pass --crop-center or --annotations");
  }

  const DepthFrame frame = preprocess(raw, cam.cam, center, cfg.crop_side_mm, cfg.image_size);
  const auto blobs = quadtree_encode(frame, cfg.quadtree_c_mm);

  json out = json::array();
  for (const ImageBlob& b : blobs) {
    out.push_back({{"mu_px", {b.mu_px.x(), b.mu_px.y()}},
                   {"sigma_px", b.sigma_px},
                   {"z_mm", b.z_mm}});
  }
  json doc;
  doc["c_mm"] = cfg.quadtree_c_mm;
  doc["blob_count"] = blobs.size();
  doc["blobs"] = out;
  if (!cli.out.empty()) {
    atomic_write(cli.out, doc.dump(2) + "\n");
    if (!opts.json_out) std::cout << blobs.size() << " blobs -> " << cli.out << "\n";
    else std::cout << doc.dump(2) << "\n";
  } else {
    std::cout << doc.dump(2) << "\n";
  }
  return 0;
}

// -------------------------------------------------------- energy-report ---

struct EnergyCli {
  std::string depth, camera, skeleton, pose, annotations;
  std::vector<double> crop_center;
  double slack = -1.0;
};

int run_energy_report(const EnergyCli& cli, const CommonOpts& opts) {
  RunConfig cfg = resolve_config(opts);
  if (cli.slack >= 0.0) cfg.weights.slack_mm = cli.slack;
  const SkeletonAssets assets = load_skeleton(cli.skeleton);
  const CameraFile cam = load_camera(cli.camera);
  const DepthImage raw = load_depth(cli.depth);
  const PoseFile pose = load_pose(cli.pose);

  std::vector<FrameAnnotation> anns;
  const FrameAnnotation* ann = nullptr;
  if (!cli.annotations.empty()) {
    anns = load_annotations(cli.annotations);
    ann = find_annotation(anns, frame_stem(cli.depth));
  }
  Eigen::Vector3d center;
  if (cli.crop_center.size() == 3) {
    center = {cli.crop_center[0], cli.crop_center[1], cli.crop_center[2]};
  } else if (ann != nullptr) {
    center = ann->crop_center;
  } else {
    throw ValidationError("pass --crop-center or --annotations");
  }

  const DepthFrame frame = preprocess(raw, cam.cam, center, cfg.crop_side_mm, cfg.image_size);
  const auto blobs = quadtree_encode(frame, cfg.quadtree_c_mm);
  const auto exclusions = collision_exclusions(assets.topo, assets.blobs);

  EnergyInputs in;
  in.topo = &assets.topo;
  in.bone_model = &assets.bone_model;
  in.limits = &assets.limits;
  in.blobs = &assets.blobs;
  in.collision_excluded = &exclusions;
  in.image_blobs = &blobs;
  in.crop_cam = frame.crop_cam;
  in.targets = ann != nullptr ? &ann->targets : nullptr;
  in.target_cam = cam.cam;
  in.weights = cfg.weights;

  const EnergyReport rep = total_energy(in, pose.theta, pose.beta, true);
  json j;
  j["e_total"] = rep.e_total;
  j["e_dissim"] = rep.e_dissim;
  j["e_collision"] = rep.e_collision;
  j["e_bone"] = rep.e_bone;
  j["e_lim"] = rep.e_lim;
  j["e_joint"] = rep.e_joint;
  j["grad_inf_norm"] = rep.grad.cwiseAbs().maxCoeff();
  j["image_blob_count"] = blobs.size();
  if (opts.json_out) {
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << "E_total     " << rep.e_total << "\nE_dissim    " << rep.e_dissim
              << "\nE_collision " << rep.e_collision << "\nE_bone      " << rep.e_bone
              << "\nE_lim       " << rep.e_lim << "\nE_joint     " << rep.e_joint
              << "\n|grad|_inf  " << rep.grad.cwiseAbs().maxCoeff() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hand pose and shape fitting on depth images"};
  app.require_subcommand(1);
  CommonOpts common;
  app.add_option("--config", common.config_path,
                 "run configuration JSON (default: $HANDFIT_CONFIG)");
  app.add_flag("--json", common.json_out, "machine-readable stdout");

  FitCli fit_cli;
  CLI::App* fit = app.add_subcommand("fit", "fit pose and shape to depth frames");
  fit->add_option("--depth", fit_cli.depth, "depth file or directory")->required();
  fit->add_option("--camera", fit_cli.camera, "camera intrinsics JSON")->required();
  fit->add_option("--skeleton", fit_cli.skeleton, "skeleton definition JSON")->required();
  fit->add_option("--annotations", fit_cli.annotations, "annotation JSON");
  fit->add_option("--crop-center", fit_cli.crop_center, "crop center x y z (mm)")
      ->expected(3);
  fit->add_option("--slack", fit_cli.slack, "slack radius in mm");
  fit->add_option("--quadtree-c", fit_cli.quadtree_c, "quadtree threshold in mm");
  fit->add_option("--threads", fit_cli.threads, "worker threads for directories");
  fit->add_option("--out", fit_cli.out, "output file or directory")->required();

  RenderCli render_cli;
  CLI::App* render = app.add_subcommand("render", "render a synthetic depth frame");
  render->add_option("--skeleton", render_cli.skeleton)->required();
  render->add_option("--pose", render_cli.pose, "pose JSON (theta, beta)");
  render->add_option("--preset", render_cli.preset, "flat|curl|fist|pinch|spread");
  render->add_option("--camera", render_cli.camera)->required();
  render->add_option("--noise-sigma", render_cli.noise_sigma, "depth noise sigma (mm)");
  render->add_option("--noise-seed", render_cli.seed);
  render->add_option("--out", render_cli.out, "depth output (.pgm or .rdf)")->required();
  render->add_option("--gt", render_cli.gt, "ground-truth JSON output");

  EvalCli eval_cli;
  CLI::App* eval = app.add_subcommand("eval", "evaluate fits against ground truth");
  eval->add_option("--pred", eval_cli.pred, "fit result JSON or directory")->required();
  eval->add_option("--gt", eval_cli.gt, "ground truth JSON or directory")->required();
  eval->add_option("--cloud-from", eval_cli.cloud_from, "depth directory for MDPC");
  eval->add_option("--camera", eval_cli.camera, "camera (needed for --cloud-from)");
  eval->add_option("--report", eval_cli.report, "report JSON output");

  DumpCli dump_cli;
  CLI::App* dump = app.add_subcommand("quadtree-dump", "encode a frame and dump the blobs");
  dump->add_option("--depth", dump_cli.depth)->required();
  dump->add_option("--camera", dump_cli.camera)->required();
  dump->add_option("--annotations", dump_cli.annotations);
  dump->add_option("--crop-center", dump_cli.crop_center)->expected(3);
  dump->add_option("--c", dump_cli.c_mm, "threshold in mm");
  dump->add_option("--out", dump_cli.out, "output JSON (stdout when omitted)");

  EnergyCli energy_cli;
  CLI::App* energy = app.add_subcommand("energy-report", "per-term energies for a pose");
  energy->add_option("--depth", energy_cli.depth)->required();
  energy->add_option("--camera", energy_cli.camera)->required();
  energy->add_option("--skeleton", energy_cli.skeleton)->required();
  energy->add_option("--pose", energy_cli.pose)->required();
  energy->add_option("--annotations", energy_cli.annotations);
  energy->add_option("--crop-center", energy_cli.crop_center)->expected(3);
  energy->add_option("--slack", energy_cli.slack);

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit->parsed()) return run_fit(fit_cli, common);
    if (render->parsed()) return run_render(render_cli, common);
    if (eval->parsed()) return run_eval(eval_cli, common);
    if (dump->parsed()) return run_quadtree_dump(dump_cli, common);
    if (energy->parsed()) return run_energy_report(energy_cli, common);
  } catch (const Error& e) {
    if (common.json_out) {
      json j;
      j["error"] = {{"class", e.error_class()}, {"message", e.what()}};
      std::cout << j.dump(2) << "\n";
    }
    std::cerr << "error: " << e.error_class() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: Internal: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
