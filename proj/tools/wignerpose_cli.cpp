#include <fstream>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "wignerpose/criteria.hpp"
#include "wignerpose/harness.hpp"

using namespace wignerpose;

namespace {

RunConfig load_config(const std::string& path) {
  if (path.empty()) return RunConfig{};
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config " + path);
  return run_config_from_json(json::parse(is));
}

void write_json(const json& j, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << "\n";
    return;
  }
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  os << j.dump(2) << "\n";
}

// Rotation representations as JSON arrays: matrix [[r00,r01,r02],...], quaternion [w,x,y,z],
// euler [alpha,beta,gamma] (ZYZ, radians), axis_angle [x,y,z,angle].
RotationMatrix<double> rotation_from_json(const std::string& rep, const json& v) {
  if (rep == "matrix") {
    Eigen::Matrix3d m;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) m(i, j) = v.at(i).at(j).get<double>();
    if (!is_rotation(m, 1e-6)) throw std::invalid_argument("convert: matrix is not a rotation");
    return m;
  }
  const auto a = v.get<std::vector<double>>();
  if (rep == "quaternion" && a.size() == 4) return quat_to_matrix(UnitQuaternion<double>(a[0], a[1], a[2], a[3]));
  if (rep == "euler" && a.size() == 3) return euler_to_matrix<double>({a[0], a[1], a[2]});
  if (rep == "axis_angle" && a.size() == 4)
    return axis_angle_to_matrix<double>({Eigen::Vector3d(a[0], a[1], a[2]), a[3]});
  throw std::invalid_argument("convert: bad value for representation " + rep);
}

json rotation_to_json(const std::string& rep, const RotationMatrix<double>& r) {
  if (rep == "matrix") return {{r(0, 0), r(0, 1), r(0, 2)}, {r(1, 0), r(1, 1), r(1, 2)}, {r(2, 0), r(2, 1), r(2, 2)}};
  if (rep == "quaternion") {
    const auto q = matrix_to_quat(r);
    return {q.w, q.x, q.y, q.z};
  }
  if (rep == "euler") {
    const auto e = matrix_to_euler(r);
    return {e.alpha, e.beta, e.gamma};
  }
  if (rep == "axis_angle") {
    const auto a = matrix_to_axis_angle(r);
    return {a.axis.x(), a.axis.y(), a.axis.z(), a.angle};
  }
  throw std::invalid_argument("convert: unknown representation " + rep);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wigner-D harmonic pose estimation toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", library_version());

  std::string config_path, data_path, ckpt_path, out_path, csv_path, log_path, cache_dir;
  bool print_config = false;
  auto add_config = [&](CLI::App* c) {
    c->add_option("--config", config_path, "JSON run config (missing keys take defaults)")->check(CLI::ExistingFile);
    c->add_flag("--print-config", print_config, "print the effective config and exit");
  };

  auto* gen = app.add_subcommand("gen-dataset", "generate a synthetic template dataset");
  add_config(gen);
  gen->add_option("--out", out_path, "dataset file");

  auto* tr = app.add_subcommand("train", "train the toy model");
  add_config(tr);
  int eval_every = 0;
  tr->add_option("--data", data_path, "dataset file (generated from the config when omitted)");
  tr->add_option("--out", ckpt_path, "checkpoint file");
  tr->add_option("--log", log_path, "training log JSON");
  tr->add_option("--eval-every", eval_every, "test metrics every N epochs");

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  add_config(ev);
  bool train_split = false;
  ev->add_option("--data", data_path, "dataset file (generated from the config when omitted)");
  ev->add_option("--checkpoint", ckpt_path, "checkpoint file")->check(CLI::ExistingFile);
  ev->add_option("--csv", csv_path, "per-sample CSV");
  ev->add_option("--json", out_path, "metrics JSON (stdout when omitted)");
  ev->add_flag("--train-split", train_split, "evaluate the training split");

  auto* gr = app.add_subcommand("grids", "generate an SO(3) grid");
  int level = 2;
  std::string kind = "healpix";
  std::size_t count = 0;
  std::uint64_t grid_seed = 7;
  bool allow_large = false;
  int psi_bandlimit = -1;
  gr->add_option("--level", level, "HEALPix level r (size 72 * 8^r)")->check(CLI::Range(0, 5));
  gr->add_option("--kind", kind, "healpix, random or super_fibonacci");
  gr->add_option("--count", count, "size of random / super-Fibonacci grids (default 72 * 8^level)");
  gr->add_option("--seed", grid_seed, "seed of random grids");
  gr->add_flag("--allow-large", allow_large, "permit the r = 5 grid");
  gr->add_option("--psi", psi_bandlimit, "attach a harmonic-vector table of this band limit");
  gr->add_option("--out", out_path, "binary grid file");
  gr->add_option("--json", log_path, "grid summary JSON (stdout when omitted)");

  auto* cv = app.add_subcommand("convert", "convert rotations read as JSON from stdin");
  std::string from, to;
  cv->add_option("--from", from, "matrix, quaternion, euler or axis_angle")->required();
  cv->add_option("--to", to, "matrix, quaternion, euler or axis_angle")->required();

  auto* ab = app.add_subcommand("ablate", "run an ablation table");
  add_config(ab);
  std::string ablation;
  std::vector<std::string> variants;
  ab->add_option("--kind", ablation, "parametrization, loss, grid_type, grid_size or bandlimit");
  ab->add_option("--variants", variants, "subset of variants");
  ab->add_option("--cache", cache_dir, "result cache directory");
  ab->add_option("--out", out_path, "comparison JSON (stdout when omitted)");

  auto* ck = app.add_subcommand("check", "run the acceptance property suites");
  std::vector<int> ids;
  bool large = false;
  ck->add_option("criteria", ids, "criterion numbers (default all)")->check(CLI::Range(1, kCriterionCount));
  ck->add_flag("--large", large, "include the r = 5 inference run");
  ck->add_option("--cache", cache_dir, "trained-model cache directory");

  CLI11_PARSE(app, argc, argv);

  try {
    const RunConfig cfg = load_config(config_path);
    if (print_config) {
      std::cout << to_json(cfg).dump(2) << "\n";
      return 0;
    }
    auto require = [](const std::string& v, const char* flag) {
      if (v.empty()) throw std::invalid_argument(std::string(flag) + " is required");
    };
    if (*gen) require(out_path, "--out");
    if (*tr) require(ckpt_path, "--out");
    if (*ev) require(ckpt_path, "--checkpoint");
    if (*ab) require(ablation, "--kind");
    auto dataset = [&]() { return data_path.empty() ? gen_dataset(cfg.data, cfg.seeds.data) : load_dataset(data_path); };

    if (*gen) {
      save_dataset(gen_dataset(cfg.data, cfg.seeds.data), out_path);
    } else if (*tr) {
      const SyntheticDataset d = dataset();
      const TrainResult r = train(cfg, d, eval_every, [](const EpochLog& l) {
        std::cerr << "epoch " << l.epoch << " lr " << l.lr << " loss " << l.loss;
        if (l.test) std::cerr << " test median " << l.test->median_error_deg << " acc@15 " << l.test->acc15;
        std::cerr << "\n";
      });
      save_checkpoint(r.model, ckpt_path);
      if (!log_path.empty()) {
        const json c = to_json(cfg);
        json log = {{"config_hash", config_hash(c)},
                    {"library_version", library_version()},
                    {"seeds", c.at("seeds")},
                    {"epochs", json::array()}};
        for (const auto& e : r.log) {
          json row = {{"epoch", e.epoch}, {"lr", e.lr}, {"loss", e.loss}};
          if (e.test) row["test"] = metrics_json(*e.test);
          log["epochs"].push_back(row);
        }
        write_json(log, log_path);
      }
    } else if (*ev) {
      const SyntheticDataset d = dataset();
      const EvalReport rep = evaluate(load_checkpoint(ckpt_path), cfg, d, !train_split);
      if (!csv_path.empty()) {
        std::ofstream os(csv_path);
        if (!os) throw std::runtime_error("cannot open " + csv_path);
        write_samples_csv(rep, os);
      }
      write_json(report_json(rep, cfg), out_path);
    } else if (*gr) {
      InferenceConfig ic;
      ic.grid_kind = so3_grid_kind_from_string(kind);
      ic.level = level;
      ic.count = count;
      ic.grid_seed = grid_seed;
      ic.allow_large = allow_large;
      SO3Grid g = make_inference_grid(ic, 0);
      if (psi_bandlimit >= 0) attach_psi_table(g, psi_bandlimit);
      if (!out_path.empty()) save_grid(g, out_path);
      write_json({{"kind", to_string(g.kind)},
                  {"level", g.level},
                  {"size", g.size()},
                  {"nominal_resolution_deg", g.nominal_resolution},
                  {"seed", g.seed},
                  {"library_version", library_version()}},
                 log_path);
    } else if (*cv) {
      const json in = json::parse(std::cin);
      // A single value or a list of values; a matrix is itself a list, so it is told apart by nesting depth.
      const bool single = from == "matrix" ? !(in.is_array() && !in.empty() && in[0].is_array() && in[0][0].is_array())
                                           : !(in.is_array() && !in.empty() && in[0].is_array());
      if (single) {
        std::cout << rotation_to_json(to, rotation_from_json(from, in)).dump() << "\n";
      } else {
        json out = json::array();
        for (const auto& v : in) out.push_back(rotation_to_json(to, rotation_from_json(from, v)));
        std::cout << out.dump() << "\n";
      }
    } else if (*ab) {
      const AblationKind k = ablation_kind_from_string(ablation);
      const auto rows = run_ablation(k, cfg, cache_dir, variants);
      write_json(ablation_json(k, rows, cfg), out_path);
    } else if (*ck) {
      if (ids.empty()) {
        ids.resize(kCriterionCount);
        std::iota(ids.begin(), ids.end(), 1);
      }
      CriteriaOptions opt;
      opt.large = large;
      opt.cache_dir = cache_dir;
      int failed = 0;
      for (int id : ids) {
        const CriterionResult r = check_criterion(id, opt);
        std::cout << format_result(r) << std::endl;
        failed += !r.pass;
      }
      return failed ? 1 : 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
