#include "i2preg/cli/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "i2preg/cli/pipeline.hpp"
#include "i2preg/error.hpp"
#include "i2preg/io.hpp"
#include "i2preg/losses.hpp"
#include "i2preg/metrics.hpp"
#include "i2preg/normals.hpp"
#include "i2preg/random.hpp"

namespace i2preg::cli {

namespace {

using nlohmann::json;

PipelineConfig read_config(const ConfigArgs& a) { return load_config(a.file, a.overrides); }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw Error(ErrorCode::IoError, "cannot create " + dir.string());
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

json pose_json(const PoseEstimate& est) {
  std::vector<double> r;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) r.push_back(est.transform.rotation(a, b));
  const Vec3& t = est.transform.translation;
  return {{"rotation", r},
          {"translation", {t.x(), t.y(), t.z()}},
          {"inliers", est.inlier_count()},
          {"mean_reproj_px", est.mean_reprojection_error}};
}

RigidTransform pose_from_json(const json& j, const std::string& where) {
  RigidTransform t;
  try {
    const auto r = j.at("rotation").get<std::vector<double>>();
    const auto tr = j.at("translation").get<std::vector<double>>();
    if (r.size() != 9 || tr.size() != 3) throw Error(ErrorCode::ParseError, where + ": bad array lengths");
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) t.rotation(a, b) = r[static_cast<std::size_t>(a * 3 + b)];
    t.translation = {tr[0], tr[1], tr[2]};
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, where + ": " + e.what());
  }
  return t;
}

std::string patch_pairs_csv(const std::vector<PatchMatch>& pairs) {
  std::ostringstream out;
  out << std::setprecision(17) << "img_patch,cloud_patch,score\n";
  for (const auto& p : pairs) out << p.img_patch << ',' << p.cloud_patch << ',' << p.score << '\n';
  return out.str();
}

std::vector<PatchMatch> read_patch_pairs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<PatchMatch> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    PatchMatch p;
    if (!(ls >> p.img_patch >> p.cloud_patch >> p.score)) throw Error(ErrorCode::ParseError, path.string() + ": bad row");
    out.push_back(p);
  }
  return out;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json aggregate_json(const std::vector<double>& values) {
  const Aggregate a = aggregate(values);
  return {{"mean", a.count > 0 ? json(a.mean) : json(nullptr)},
          {"median", a.count > 0 ? json(a.median) : json(nullptr)},
          {"count", a.count}};
}

// Derivative of f along `dir` (already tangent to the unit rows of x),
// by central differences with re-normalized perturbed rows.
template <typename Fn>
double tangent_fd(const FeatureMatrix& x, const FeatureMatrix& dir, double h, Fn&& f) {
  const FeatureMatrix plus = normalize_rows(x + h * dir);
  const FeatureMatrix minus = normalize_rows(x - h * dir);
  return (f(plus) - f(minus)) / (2.0 * h);
}

FeatureMatrix tangent_direction(const FeatureMatrix& x, Rng& rng) {
  FeatureMatrix d(x.rows(), x.cols());
  std::normal_distribution<double> n(0.0, 1.0);
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    for (Eigen::Index j = 0; j < d.cols(); ++j) d(i, j) = n(rng);
    d.row(i) -= d.row(i).dot(x.row(i)) * x.row(i);
  }
  return d;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}); }

}  // namespace

std::vector<std::string> default_sweep_values(const std::string& sweep) {
  if (sweep == "gaussian_sigma") return {"0", "0.005", "0.01", "0.015"};
  if (sweep == "mask_ratio") return {"0", "0.1", "0.2", "0.3", "0.4"};
  if (sweep == "k") return {"2", "4", "8", "16"};
  if (sweep == "warmup") return {"10:20", "0:0", "5:15", "20:30"};
  throw Error(ErrorCode::InvalidArgument, "unknown sweep '" + sweep + "' (gaussian_sigma, mask_ratio, k, warmup)");
}

PipelineConfig apply_sweep(const PipelineConfig& cfg, const std::string& sweep, const std::string& value) {
  PipelineConfig out = cfg;
  try {
    std::size_t used = 0;
    if (sweep == "gaussian_sigma") {
      out.corruption.gaussian_sigma_m = std::stod(value, &used);
    } else if (sweep == "mask_ratio") {
      out.corruption.mask_ratio = std::stod(value, &used);
    } else if (sweep == "k") {
      const long k = std::stol(value, &used);
      if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
      out.k_neighbors = static_cast<std::size_t>(k);
    } else if (sweep == "warmup") {
      const auto colon = value.find(':');
      if (colon == std::string::npos) throw Error(ErrorCode::InvalidArgument, "warmup values look like start:end");
      out.warmup.start_epoch = std::stoi(value.substr(0, colon));
      out.warmup.end_epoch = std::stoi(value.substr(colon + 1), &used);
      used += colon + 1;
    } else {
      default_sweep_values(sweep);
    }
    if (used != value.size()) throw Error(ErrorCode::InvalidArgument, "trailing characters");
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::InvalidArgument, "bad value '" + value + "' for sweep " + sweep);
  }
  out.validate();
  return out;
}

int cmd_synth(const SynthArgs& args) {
  const PipelineConfig cfg = read_config(args.config);
  const SyntheticScene scene = generate_scene(cfg.scene, cfg.seed);
  save_scene_bundle(args.out_dir, scene);
  std::cout << "scene " << args.out_dir.string() << ": " << scene.cloud.size() << " points, "
            << scene.gt_correspondences.size() << " visible correspondences\n";
  return kExitOk;
}

int cmd_register(const RegisterArgs& args) {
  const PipelineConfig cfg = read_config(args.config);
  const SyntheticScene scene = load_scene_bundle(args.scene_dir);
  const RegistrationResult result = register_scene(scene, cfg, args.write_losses);

  ensure_dir(args.out_dir);
  io::write_correspondences(args.out_dir / "correspondences.csv", result.correspondences);
  write_text(args.out_dir / "patch_pairs.csv", patch_pairs_csv(result.coarse));
  if (args.write_losses) {
    json records = json::array();
    for (const auto& l : result.losses) {
      records.push_back({{"name", l.name}, {"value", l.value}, {"epoch", l.epoch}, {"weight", l.weight}});
    }
    write_text(args.out_dir / "losses.json", records.dump(2) + "\n");
  }
  const auto pose_path = args.out_dir / "pose.json";
  if (!result.pose) {
    std::filesystem::remove(pose_path);
    std::cerr << "registration failed: NoConsensus (" << result.correspondences.size() << " correspondences)\n";
    return kExitNoConsensus;
  }
  write_text(pose_path, pose_json(*result.pose).dump(2) + "\n");
  std::cout << "registered with " << result.pose->inlier_count() << "/" << result.correspondences.size()
            << " inliers, mean reprojection " << result.pose->mean_reprojection_error << " px\n";
  return kExitOk;
}

int cmd_eval(const EvalArgs& args) {
  if (args.scene_dirs.size() != args.result_dirs.size()) {
    throw Error(ErrorCode::LengthMismatch, "need one result directory per scene directory");
  }
  if (args.scene_dirs.empty()) throw Error(ErrorCode::EmptyInput, "no scenes to evaluate");
  const PipelineConfig cfg = read_config(args.config);
  const auto& thr = cfg.thresholds;

  json scenes = json::array();
  std::vector<double> irs, rmses, pirs, rres, rtes, rmse_ok;
  for (std::size_t s = 0; s < args.scene_dirs.size(); ++s) {
    const SyntheticScene scene = load_scene_bundle(args.scene_dirs[s]);
    const auto& rdir = args.result_dirs[s];
    if (!std::filesystem::is_directory(rdir)) throw Error(ErrorCode::IoError, rdir.string() + " is not a directory");
    const auto corrs = io::read_correspondences(rdir / "correspondences.csv");

    SceneEvaluation ev;
    ev.inlier_ratio = corrs.empty() ? 0.0
                                    : inlier_ratio(corrs, scene.cloud, scene.depth, scene.intrinsics,
                                                   scene.gt_transform, thr.tau1_m);
    ev.fmr_flag = ev.inlier_ratio > thr.tau2;
    if (std::filesystem::exists(rdir / "pose.json")) {
      const RigidTransform est = pose_from_json(read_json_file(rdir / "pose.json"), (rdir / "pose.json").string());
      ev.rmse_m = registration_rmse(scene.cloud, est, scene.gt_transform);
      ev.rr_flag = *ev.rmse_m < thr.tau3_m;
      ev.rre_deg = relative_rotation_error(scene.gt_transform.rotation, project_to_rotation(est.rotation));
      ev.rte_m = relative_translation_error(scene.gt_transform.translation, est.translation);
    }
    const auto pairs_path = rdir / "patch_pairs.csv";
    if (std::filesystem::exists(pairs_path)) {
      const auto coarse = read_patch_pairs(pairs_path);
      const Patches patches = make_patches(scene, cfg);
      std::vector<PatchPair> overlaps;
      std::vector<Vec2> px;
      for (const auto& pm : coarse) {
        if (pm.img_patch < 0 || static_cast<std::size_t>(pm.img_patch) >= patches.image.size() ||
            pm.cloud_patch < 0 || static_cast<std::size_t>(pm.cloud_patch) >= patches.cloud.size()) {
          throw Error(ErrorCode::ParseError, pairs_path.string() + ": patch id out of range for this config");
        }
        const auto& rows = patches.image[static_cast<std::size_t>(pm.img_patch)];
        const auto& points = patches.cloud[static_cast<std::size_t>(pm.cloud_patch)];
        if (rows.empty() || points.empty()) continue;
        px.clear();
        for (int r : rows) px.push_back(scene.gt_correspondences[static_cast<std::size_t>(r)].pixel);
        PatchPair pp = patch_overlap(px, points, scene.cloud, scene.depth, scene.intrinsics, scene.gt_transform);
        pp.img_patch_id = pm.img_patch;
        pp.cloud_patch_id = pm.cloud_patch;
        overlaps.push_back(pp);
      }
      if (!overlaps.empty()) ev.pir = patch_inlier_ratio(overlaps, thr.pir_overlap);
    }

    irs.push_back(ev.inlier_ratio);
    rmse_ok.push_back(ev.rmse_m ? *ev.rmse_m : std::numeric_limits<double>::infinity());
    pirs.push_back(ev.pir);
    if (ev.rmse_m) rmses.push_back(*ev.rmse_m);
    if (ev.rre_deg) rres.push_back(*ev.rre_deg);
    if (ev.rte_m) rtes.push_back(*ev.rte_m);
    scenes.push_back({{"scene", args.scene_dirs[s].filename().string()},
                      {"inlier_ratio", ev.inlier_ratio},
                      {"fmr", ev.fmr_flag},
                      {"rmse_m", optional_json(ev.rmse_m)},
                      {"rr", ev.rr_flag},
                      {"pir", ev.pir},
                      {"rre_deg", optional_json(ev.rre_deg)},
                      {"rte_m", optional_json(ev.rte_m)}});
  }

  json report;
  report["thresholds"] = {{"tau1", thr.tau1_m}, {"tau2", thr.tau2}, {"tau3", thr.tau3_m}, {"pir_overlap", thr.pir_overlap}};
  report["scenes"] = scenes;
  report["aggregate"] = {{"IR", aggregate_json(irs)},
                         {"FMR", feature_matching_recall(irs, thr.tau2)},
                         {"RR", registration_recall(rmse_ok, thr.tau3_m)},
                         {"PIR", aggregate_json(pirs)},
                         {"RMSE_m", aggregate_json(rmses)},
                         {"RRE_deg", aggregate_json(rres)},
                         {"RTE_m", aggregate_json(rtes)}};
  const std::string text = report.dump(2) + "\n";
  if (args.out.empty()) {
    std::cout << text;
  } else {
    write_text(args.out, text);
  }
  return kExitOk;
}

int cmd_ablate(const AblateArgs& args) {
  const PipelineConfig base = read_config(args.config);
  const auto values = args.values.empty() ? default_sweep_values(args.sweep) : args.values;
  if (values.empty()) throw Error(ErrorCode::InvalidArgument, "empty sweep");
  if (args.jobs < 1) throw Error(ErrorCode::InvalidArgument, "--jobs must be >= 1");
  std::vector<PipelineConfig> settings;
  for (const auto& v : values) settings.push_back(apply_sweep(base, args.sweep, v));

  const auto batch = static_cast<std::size_t>(base.batch_size);
  std::vector<SyntheticScene> scenes(batch);
  std::vector<SceneScore> scores(batch);
  auto parallel_for = [&](auto&& body) {
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(args.jobs), batch);
    if (workers <= 1) {
      for (std::size_t s = 0; s < batch; ++s) body(s);
      return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t s = w; s < batch; s += workers) body(s);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  };
  parallel_for([&](std::size_t s) { scenes[s] = generate_scene(base.scene, derive_seed(base.seed, s)); });

  std::ostringstream csv;
  csv << std::setprecision(10) << "setting,IR,FMR,RR\n";
  for (std::size_t i = 0; i < settings.size(); ++i) {
    parallel_for([&](std::size_t s) {
      PipelineConfig cfg = settings[i];
      cfg.corruption.seed = derive_seed(base.corruption.seed, s);
      cfg.ransac.seed = derive_seed(base.ransac.seed, s);
      scores[s] = score_registration(scenes[s], register_scene(scenes[s], cfg), cfg.thresholds);
    });
    std::vector<double> irs, rmses;
    for (const auto& sc : scores) {
      irs.push_back(sc.inlier_ratio);
      rmses.push_back(sc.rmse_m ? *sc.rmse_m : std::numeric_limits<double>::infinity());
    }
    const double mean_ir = aggregate(irs).mean;
    csv << values[i] << ',' << mean_ir << ',' << feature_matching_recall(irs, base.thresholds.tau2) << ','
        << registration_recall(rmses, base.thresholds.tau3_m) << '\n';
  }
  if (args.out.empty()) {
    std::cout << csv.str();
  } else {
    write_text(args.out, csv.str());
  }
  return kExitOk;
}

int cmd_normals(const NormalsArgs& args) {
  if (args.cloud.empty() == args.depth.empty()) {
    throw Error(ErrorCode::InvalidArgument, "give exactly one of --cloud or --depth");
  }
  NormalField field;
  if (!args.depth.empty()) {
    field = depth_to_normals(io::read_depth(args.depth));
  } else {
    const PointCloud cloud = io::read_cloud(args.cloud);
    if (args.adaptive) {
      const auto sizes = adaptive_neighborhood_sizes(cloud, args.k);
      field = estimate_point_normals(cloud, sizes);
    } else {
      field = estimate_point_normals(cloud, args.k);
    }
  }
  io::write_normals(args.out, field);
  std::cout << field.valid_count() << "/" << field.size() << " valid normals\n";
  return kExitOk;
}

int cmd_losses(const LossesArgs& args) {
  if (args.trials < 1 || args.max_size < 2) throw Error(ErrorCode::InvalidArgument, "need trials >= 1 and size >= 2");
  Rng rng = make_rng(args.seed, 0x1055);
  std::uniform_int_distribution<int> size(2, args.max_size);
  constexpr double kStep = 1e-5;
  constexpr double kTol = 1e-4;
  double worst_normal = 0.0;
  double worst_gdc = 0.0;
  double worst_circle = 0.0;

  for (int t = 0; t < args.trials; ++t) {
    // Normal loss: predicted normals as free 3-vectors.
    const int n = size(rng);
    NormalField pred = NormalField::for_cloud(static_cast<std::size_t>(n));
    NormalField target = NormalField::for_cloud(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      pred.normals[static_cast<std::size_t>(i)] = random_unit_vector(rng, 3);
      target.normals[static_cast<std::size_t>(i)] = random_unit_vector(rng, 3);
      pred.valid[static_cast<std::size_t>(i)] = 1;
      target.valid[static_cast<std::size_t>(i)] = (i == 0 || rng() % 4 != 0) ? 1 : 0;
    }
    const NormalLoss nl = normal_consistency_loss(pred, target);
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < 3; ++c) {
        NormalField p = pred;
        NormalField m = pred;
        p.normals[static_cast<std::size_t>(i)][c] += kStep;
        m.normals[static_cast<std::size_t>(i)][c] -= kStep;
        const double fd =
            (normal_consistency_loss(p, target).value - normal_consistency_loss(m, target).value) / (2.0 * kStep);
        worst_normal = std::max(worst_normal, rel_err(nl.gradient[static_cast<std::size_t>(i)][c], fd));
      }
    }

    // GDC loss: directional derivatives along the unit-row tangent space.
    const int rows = size(rng);
    const int chans = size(rng);
    FeatureField a{normalize_rows(FeatureMatrix::NullaryExpr(rows, chans, [&] { return std::normal_distribution<double>()(rng); })),
                   Carrier::Image};
    FeatureField b{normalize_rows(FeatureMatrix::NullaryExpr(rows, chans, [&] { return std::normal_distribution<double>()(rng); })),
                   Carrier::Cloud};
    const GdcLoss g = gdc_loss(a, b);
    for (int d = 0; d < 4; ++d) {
      const FeatureMatrix da = tangent_direction(a.vectors, rng);
      const FeatureMatrix db = tangent_direction(b.vectors, rng);
      const double fa = tangent_fd(a.vectors, da, kStep, [&](const FeatureMatrix& x) {
        return gdc_loss(FeatureField{x, Carrier::Image}, b).value;
      });
      const double fb = tangent_fd(b.vectors, db, kStep, [&](const FeatureMatrix& x) {
        return gdc_loss(a, FeatureField{x, Carrier::Cloud}).value;
      });
      worst_gdc = std::max(worst_gdc, rel_err(g.grad_image.cwiseProduct(da).sum(), fa));
      worst_gdc = std::max(worst_gdc, rel_err(g.grad_cloud.cwiseProduct(db).sum(), fb));
    }

    // Circle loss: log-sum-exp form against the term-by-term form.
    std::uniform_real_distribution<double> dist(0.0, 2.0);
    std::vector<double> pos(static_cast<std::size_t>(size(rng)));
    std::vector<double> neg(static_cast<std::size_t>(size(rng)));
    for (auto& v : pos) v = dist(rng);
    for (auto& v : neg) v = dist(rng);
    const double naive = circle_loss_naive(pos, neg);
    if (std::isfinite(naive)) worst_circle = std::max(worst_circle, std::abs(circle_loss(pos, neg) - naive));
  }

  const bool ok = worst_normal < kTol && worst_gdc < kTol && worst_circle < 1e-9;
  json report = {{"trials", args.trials},
                 {"normal_grad_max_rel_err", worst_normal},
                 {"gdc_grad_max_rel_err", worst_gdc},
                 {"circle_lse_vs_naive_max_abs_diff", worst_circle},
                 {"warmup_10_20", {warmup_weight(5), warmup_weight(15), warmup_weight(25)}},
                 {"passed", ok}};
  const std::string text = report.dump(2) + "\n";
  if (args.out.empty()) {
    std::cout << text;
  } else {
    write_text(args.out, text);
  }
  return ok ? kExitOk : kExitBadInput;
}

}  // namespace i2preg::cli
