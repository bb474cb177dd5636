// ckasens: command-line driver for CKA comparisons and sensitivity experiments.
//
// Exit codes: 0 success, 1 other failure, 2 parse error, 3 shape mismatch,
// 4 manipulation stalled.

#include "ckasens/ckasens.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using namespace ckasens;
using nlohmann::json;

struct CommonOptions {
  std::uint64_t seed = 0;
  std::string out;
  std::string format = "csv";
  std::vector<std::string> kernels;
  bool full = false;
};

struct DatasetOptions {
  std::string input;
  std::string mask;
  std::string kind = "two-cubes";
  Eigen::Index points_per_cube = 2000;
  Eigen::Index dims = 100;
  double offset = 1.1;
  Eigen::Index rows = 1000;
  Eigen::Index cols = 50;
};

struct Dataset {
  RepresentationMatrix x;
  std::optional<SubsetMask> mask;
  std::optional<Hyperplane> separator;
  json provenance;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool with_kernels) {
  cmd->add_option("--seed", o.seed, "Random seed");
  cmd->add_option("--out", o.out, "Output path (stdout when omitted)");
  cmd->add_option("--format", o.format, "Matrix output format")->check(CLI::IsMember({"csv", "binary"}));
  if (with_kernels) {
    cmd->add_option("--kernel", o.kernels, "linear or rbf:<fraction>; repeatable");
  }
  cmd->add_flag("--full", o.full, "Full-scale synthetic data (10000 points per cube, 1000 dims)");
}

void add_dataset(CLI::App* cmd, DatasetOptions& d, const std::string& default_kind) {
  d.kind = default_kind;
  cmd->add_option("--input", d.input, "Matrix file (CSV or RSM1 binary)");
  cmd->add_option("--mask", d.mask, "Subset mask sidecar (one CSV row of 0/1)");
  cmd->add_option("--dataset", d.kind, "Synthetic dataset when no --input is given")
      ->check(CLI::IsMember({"two-cubes", "gaussian"}));
  cmd->add_option("--points-per-cube", d.points_per_cube);
  cmd->add_option("--dims", d.dims);
  cmd->add_option("--offset", d.offset, "Second cube shift along the first axis");
  cmd->add_option("--rows", d.rows, "Gaussian cloud rows");
  cmd->add_option("--cols", d.cols, "Gaussian cloud columns");
}

KernelSpec parse_kernel(const std::string& text) {
  if (text == "linear") return KernelSpec::linear();
  if (text.rfind("rbf:", 0) == 0) {
    try {
      std::size_t used = 0;
      const double f = std::stod(text.substr(4), &used);
      if (used == text.size() - 4) return KernelSpec::rbf(f);
    } catch (const std::logic_error&) {
    }
  }
  throw Error(ErrorCode::Parse, "kernel must be 'linear' or 'rbf:<fraction>', got '" + text + "'");
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::Parse, "bad number '" + item + "' in list '" + text + "'");
    }
  }
  if (out.empty()) throw Error(ErrorCode::Parse, "empty list");
  return out;
}

Dataset load_dataset(const DatasetOptions& d, const CommonOptions& c) {
  if (!d.input.empty()) {
    const std::string bytes = io::read_file_bytes(d.input);
    Dataset out{RepresentationMatrix(io::parse_matrix(bytes)), std::nullopt, std::nullopt, json::object()};
    out.provenance = {{"input", d.input}, {"fnv1a64", harness::hex64(harness::fnv1a64(bytes))}};
    if (!d.mask.empty()) {
      const std::string mask_bytes = io::read_file_bytes(d.mask);
      out.mask = io::parse_mask(mask_bytes);
      out.provenance["mask"] = d.mask;
      out.provenance["mask_fnv1a64"] = harness::hex64(harness::fnv1a64(mask_bytes));
    }
    return out;
  }
  if (d.kind == "gaussian") {
    Dataset out{gaussian_cloud(d.rows, d.cols, c.seed), std::nullopt, std::nullopt, json::object()};
    out.provenance = {{"generated", "gaussian"}, {"rows", d.rows}, {"cols", d.cols}, {"seed", c.seed}};
    return out;
  }
  TwoCubeConfig cfg{d.points_per_cube, d.dims, d.offset, c.seed};
  if (c.full) {
    cfg.points_per_cube = 10000;
    cfg.dims = 1000;
  }
  auto cubes = two_cubes(cfg);
  if (cubes.overlap_warning) {
    std::cerr << "warning: offset <= 1, the cubes overlap and may not be separable\n";
  }
  Dataset out{std::move(cubes.x), std::move(cubes.cube1), std::move(cubes.separator), json::object()};
  out.provenance = {{"generated", "two-cubes"},
                    {"points_per_cube", cfg.points_per_cube},
                    {"dims", cfg.dims},
                    {"offset", cfg.offset},
                    {"seed", cfg.seed}};
  return out;
}

void emit(const CommonOptions& c, const std::string& text) {
  if (c.out.empty()) {
    std::cout << text;
  } else {
    io::write_file_bytes(c.out, text);
  }
}

void write_manifest(const CommonOptions& c, const std::vector<std::string>& argv, const json& dataset,
                    json extra, double seconds) {
  if (c.out.empty()) return;
  json m = {{"tool", "ckasens"},
            {"version", harness::kToolVersion},
            {"command_line", argv},
            {"seed", c.seed},
            {"dataset", dataset},
            {"wall_time_seconds", seconds}};
  for (auto& [key, value] : extra.items()) m[key] = value;
  io::write_file_bytes(c.out + ".manifest.json", m.dump(2) + "\n");
}

std::vector<double> sweep_grid(const std::string& list, double lo, double hi, int points) {
  return list.empty() ? harness::geometric_grid(lo, hi, points) : parse_list(list);
}

std::vector<double> rbf_fractions(const std::vector<std::string>& kernels) {
  std::vector<double> out;
  for (const auto& k : kernels) {
    const auto spec = parse_kernel(k);
    if (spec.kind == KernelKind::Rbf) out.push_back(spec.median_fraction);
  }
  return out;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::Parse: return 2;
    case ErrorCode::ShapeMismatch: return 3;
    case ErrorCode::Stalled: return 4;
    default: return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);
  const auto started = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  };

  CLI::App app{"CKA similarity and sensitivity experiments"};
  app.require_subcommand(1);

  CommonOptions common;
  DatasetOptions data;

  // cka
  std::string cka_a, cka_b, estimator = "biased";
  Eigen::Index batch_size = 0;
  auto* cmd_cka = app.add_subcommand("cka", "CKA between two matrix files");
  cmd_cka->add_option("first", cka_a)->required();
  cmd_cka->add_option("second", cka_b)->required();
  cmd_cka->add_option("--estimator", estimator)->check(CLI::IsMember({"biased", "minibatch"}));
  cmd_cka->add_option("--batch-size", batch_size, "Minibatch size (minibatch estimator)");
  add_common(cmd_cka, common, true);

  // sweep / outlier share grid options
  std::string direction = "random", distances, rbf_mode = "per-representation";
  double grid_min = 0.1, grid_max = 1e4;
  int grid_points = 20;
  auto add_grid = [&](CLI::App* cmd) {
    cmd->add_option("--distances", distances, "Comma-separated distances in RMS units");
    cmd->add_option("--grid-min", grid_min);
    cmd->add_option("--grid-max", grid_max);
    cmd->add_option("--grid-points", grid_points);
    cmd->add_option("--rbf-bandwidth", rbf_mode, "Bandwidth of the translated set")
        ->check(CLI::IsMember({"per-representation", "reference"}));
  };

  auto* cmd_sweep = app.add_subcommand("sweep", "CKA versus subset translation distance");
  cmd_sweep->add_option("--direction", direction)->check(CLI::IsMember({"random", "margin-preserving"}));
  add_grid(cmd_sweep);
  add_dataset(cmd_sweep, data, "two-cubes");
  add_common(cmd_sweep, common, true);

  Eigen::Index outlier_index = 0;
  auto* cmd_outlier = app.add_subcommand("outlier", "CKA versus distance of a single translated row");
  cmd_outlier->add_option("--index", outlier_index, "Row that moves");
  add_grid(cmd_outlier);
  add_dataset(cmd_outlier, data, "gaussian");
  add_common(cmd_outlier, common, true);

  std::string mu_list = "0,0.1,0.5,1", sigma_list = "0.1,0.5,1";
  int repeats = 10;
  auto* cmd_invmap = app.add_subcommand("invmap", "Linear CKA under random invertible Gaussian maps");
  cmd_invmap->add_option("--mu", mu_list, "Comma-separated means");
  cmd_invmap->add_option("--sigma", sigma_list, "Comma-separated standard deviations");
  cmd_invmap->add_option("--repeats", repeats)->check(CLI::PositiveNumber);
  add_dataset(cmd_invmap, data, "two-cubes");
  add_common(cmd_invmap, common, false);

  std::string y0_path, constraint = "orthogonal", normal_list;
  double target = 0.05, plane_offset = 0.0, moved_fraction = 0.05, step_size = 1.0, tolerance = 1e-3;
  Eigen::Index max_iters = 5000;
  auto* cmd_manip = app.add_subcommand("manipulate", "Drive linear CKA to a target by translating rows");
  cmd_manip->add_option("--y0", y0_path, "Starting representation (defaults to X)");
  cmd_manip->add_option("--target", target)->check(CLI::Range(0.0, 1.0));
  cmd_manip->add_option("--constraint", constraint)->check(CLI::IsMember({"none", "orthogonal"}));
  cmd_manip->add_option("--normal", normal_list, "Hyperplane normal, comma separated");
  cmd_manip->add_option("--hyperplane-offset", plane_offset);
  cmd_manip->add_option("--moved-fraction", moved_fraction, "Leading fraction of rows that move");
  cmd_manip->add_option("--step-size", step_size);
  cmd_manip->add_option("--max-iters", max_iters);
  cmd_manip->add_option("--tolerance", tolerance);
  add_dataset(cmd_manip, data, "two-cubes");
  add_common(cmd_manip, common, false);

  auto* cmd_gen = app.add_subcommand("gen", "Export a synthetic dataset");
  add_dataset(cmd_gen, data, "two-cubes");
  add_common(cmd_gen, common, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (cmd_cka->parsed()) {
      const auto x = io::read_matrix(cka_a);
      const auto y = io::read_matrix(cka_b);
      if (x.rows() != y.rows()) {
        throw Error(ErrorCode::ShapeMismatch, "row counts differ: " + std::to_string(x.rows()) + " vs " +
                                                  std::to_string(y.rows()));
      }
      if (common.kernels.empty()) common.kernels.push_back("linear");
      std::ostringstream text;
      text << std::fixed << std::setprecision(12);
      for (const auto& k : common.kernels) {
        const auto spec = parse_kernel(k);
        CkaResult r;
        if (estimator == "minibatch") {
          SeededRng rng(common.seed, 0);
          r = minibatch_cka(x, y, spec, batch_size > 0 ? batch_size : x.rows(), rng);
        } else {
          r = cka(x, y, spec);
        }
        if (common.kernels.size() > 1) text << spec.label() << '\t';
        text << r.value << '\n';
      }
      emit(common, text.str());
      return 0;
    }

    const Dataset ds = load_dataset(data, common);

    if (cmd_gen->parsed()) {
      if (common.out.empty()) throw Error(ErrorCode::Parse, "gen requires --out");
      io::write_matrix(common.out, ds.x.data(), common.format == "csv" ? io::MatrixFormat::Csv
                                                                      : io::MatrixFormat::Binary);
      json extra = json::object();
      if (ds.mask) io::write_file_bytes(common.out + ".mask.csv", io::format_mask(*ds.mask));
      if (ds.separator) {
        extra["hyperplane"] = {{"normal", std::vector<double>(ds.separator->normal.data(),
                                                              ds.separator->normal.data() +
                                                                  ds.separator->normal.size())},
                               {"offset", ds.separator->offset}};
      }
      write_manifest(common, args, ds.provenance, extra, elapsed());
      return 0;
    }

    if (cmd_sweep->parsed() || cmd_outlier->parsed()) {
      harness::SweepConfig cfg;
      cfg.distances = sweep_grid(distances, grid_min, grid_max, grid_points);
      cfg.rbf_fractions = rbf_fractions(common.kernels);
      cfg.rbf_bandwidth = rbf_mode == "reference" ? harness::RbfBandwidth::Reference
                                                  : harness::RbfBandwidth::PerRepresentation;
      cfg.seed = common.seed;
      cfg.hyperplane = ds.separator;
      harness::SweepResult result;
      if (cmd_sweep->parsed()) {
        if (!ds.mask) throw Error(ErrorCode::Parse, "sweep over an input file needs --mask");
        cfg.subset = *ds.mask;
        cfg.direction_mode = direction == "margin-preserving" ? harness::DirectionMode::MarginPreserving
                                                              : harness::DirectionMode::Random;
        result = harness::run_sweep(ds.x, cfg);
      } else {
        cfg.hyperplane.reset();
        result = harness::run_outlier_sweep(ds.x, outlier_index, cfg);
      }
      emit(common, harness::format_sweep_csv(result));
      if (!common.out.empty()) io::write_file_bytes(common.out + ".limit.csv", harness::format_limit_csv(result.limit));
      write_manifest(common, args, ds.provenance,
                     {{"distances", cfg.distances},
                      {"distance_unit", "rms_row_norm"},
                      {"rms_row_norm", result.rms_norm},
                      {"rbf_bandwidth", rbf_mode}},
                     elapsed());
      return 0;
    }

    if (cmd_invmap->parsed()) {
      const auto rows = harness::run_invmap(ds.x, parse_list(mu_list), parse_list(sigma_list), repeats,
                                            common.seed);
      emit(common, harness::format_invmap_csv(rows));
      write_manifest(common, args, ds.provenance, {{"repeats", repeats}}, elapsed());
      return 0;
    }

    if (cmd_manip->parsed()) {
      const auto x = center_columns(ds.x);
      const auto y0 = y0_path.empty() ? x : io::read_matrix(y0_path);
      ManipulationConfig cfg;
      cfg.target_cka = target;
      cfg.step_size = step_size;
      cfg.max_iters = max_iters;
      cfg.tolerance = tolerance;
      cfg.seed = common.seed;
      if (constraint == "orthogonal") {
        cfg.constraint = TranslationConstraint::OrthogonalToHyperplane;
        if (!normal_list.empty()) {
          const auto w = parse_list(normal_list);
          cfg.hyperplane = Hyperplane{Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size())),
                                      plane_offset};
        } else if (ds.separator) {
          cfg.hyperplane = ds.separator;
        } else {
          throw Error(ErrorCode::Parse, "orthogonal constraint needs --normal for input files");
        }
      }
      SubsetMask moved;
      if (ds.mask && !data.input.empty()) {
        moved = *ds.mask;
      } else {
        const auto n = static_cast<std::size_t>(y0.rows());
        const auto k = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(moved_fraction * n)));
        moved = SubsetMask::first_k(n, std::min(k, n - 1));
      }

      ManipulationResult result{y0, Vector(), {}, ManipulationStatus::Converged};
      int code = 0;
      try {
        result = manipulate_to_target(x, y0, cfg, moved);
      } catch (const StalledError& e) {
        result = e.partial();
        code = 4;
      }
      emit(common, format_trace_csv(result.trace));

      std::ostringstream summary;
      summary << std::setprecision(12) << "final_cka " << result.final_cka() << '\n'
              << "translation_norm " << result.translation.norm() << '\n'
              << "iterations " << (result.trace.empty() ? 0 : result.trace.back().iter) << '\n';
      if (cfg.hyperplane) {
        const Vector& w = cfg.hyperplane->normal;
        const double change = (result.y.data() * w - y0.data() * w).cwiseAbs().maxCoeff();
        const double bound = 1e-9 * w.norm() * (1.0 + result.translation.norm());
        summary << "max_projection_change " << change << '\n'
                << "margins_preserved " << (change <= bound ? "true" : "false") << '\n';
      }
      const char* status = result.status == ManipulationStatus::Converged       ? "converged"
                           : result.status == ManipulationStatus::MaxIterations ? "max_iterations"
                                                                                : "stalled";
      summary << "status " << status << '\n';
      (common.out.empty() ? std::cerr : std::cout) << summary.str();
      write_manifest(common, args, ds.provenance, {{"target", target}, {"status", status}}, elapsed());
      if (code == 0 && result.status == ManipulationStatus::MaxIterations) code = 1;
      return code;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
