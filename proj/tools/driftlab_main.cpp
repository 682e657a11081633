// driftlab: experiment runner for prototype drift-compensation studies.
//
// Subcommands:
//   run      full class-incremental experiment from a JSON config
//   toy      2D drift scenario, SDC vs LDC mean estimation
//   ablate   sweeps: projector-arch | nme-memory | feature-bank | label-fraction
//   analyze  cosine-distance histograms from a report.jsonl
//
// Exit codes: 0 ok, 2 config/usage error, 3 invariant violation.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "driftlab/driftlab.hpp"

namespace {

using namespace driftlab;

std::string resolve_out_dir(const std::string& configured) {
  if (const char* env = std::getenv("DRIFTLAB_OUT"); env && *env) return env;
  return configured;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

int cmd_run(const std::string& config_path) {
  const ExperimentConfig cfg = load_config(config_path);
  const std::string out = resolve_out_dir(cfg.out_dir);
  const ExperimentResult res = run_experiment(cfg);
  write_report(res, out);
  std::ofstream cfg_out(out + "/config.json", std::ios::binary);
  cfg_out << serialize_config(cfg);
  std::cout << "wrote " << out << "/report.jsonl and " << out << "/summary.csv"
            << " (config " << res.hash << ")\n";
  for (const std::string& m : cfg.methods)
    std::printf("  %-12s mean final A_last = %.4f\n", m.c_str(),
                mean_final_accuracy(res, m));
  return 0;
}

int cmd_toy(double theta, double scale, double tx, double ty, std::uint64_t seed,
            double sdc_sigma, int samples, const std::string& out_dir) {
  if (scale == 0.0) throw ParameterError("toy: --scale must be nonzero");
  const DriftScenario2D scenario =
      default_toy_scenario(seed, theta, scale, {tx, ty}, samples);
  const ToyResult res = run_toy(scenario, {1, 2}, 0, sdc_sigma, toy_ldc_config(), seed);

  const std::string out = resolve_out_dir(out_dir);
  std::filesystem::create_directories(out);
  {
    std::ofstream f(out + "/toy_samples.csv", std::ios::binary);
    f << "class,epoch,x,y\n";
    char buf[96];
    for (std::size_t c = 0; c < scenario.classes.size(); ++c) {
      const auto& cd = scenario.classes[c];
      for (std::size_t i = 0; i < cd.before.rows; ++i) {
        std::snprintf(buf, sizeof buf, "%zu,t1,%.9g,%.9g", c, cd.before(i, 0), cd.before(i, 1));
        f << buf << '\n';
        std::snprintf(buf, sizeof buf, "%zu,t2,%.9g,%.9g", c, cd.after(i, 0), cd.after(i, 1));
        f << buf << '\n';
      }
    }
  }
  {
    std::ofstream f(out + "/toy_result.csv", std::ios::binary);
    f << "quantity,x,y,error\n";
    char buf[128];
    std::snprintf(buf, sizeof buf, "true_mean,%.9g,%.9g,0", res.true_mean[0], res.true_mean[1]);
    f << buf << '\n';
    std::snprintf(buf, sizeof buf, "sdc,%.9g,%.9g,%.9g", res.sdc_estimate[0],
                  res.sdc_estimate[1], res.sdc_error);
    f << buf << '\n';
    std::snprintf(buf, sizeof buf, "ldc,%.9g,%.9g,%.9g", res.ldc_estimate[0],
                  res.ldc_estimate[1], res.ldc_error);
    f << buf << '\n';
  }
  std::printf("true mean  (%.6f, %.6f)\n", res.true_mean[0], res.true_mean[1]);
  std::printf("sdc        (%.6f, %.6f)  error %.3e\n", res.sdc_estimate[0],
              res.sdc_estimate[1], res.sdc_error);
  std::printf("ldc        (%.6f, %.6f)  error %.3e\n", res.ldc_estimate[0],
              res.ldc_estimate[1], res.ldc_error);
  std::cout << "wrote " << out << "/toy_samples.csv and " << out << "/toy_result.csv\n";
  return 0;
}

int cmd_ablate(const std::string& kind, const std::string& config_path,
               std::vector<double> points) {
  ExperimentConfig base = load_config(config_path);
  const std::string out = resolve_out_dir(base.out_dir);
  std::filesystem::create_directories(out);
  std::ofstream csv(out + "/sweep_" + kind + ".csv", std::ios::binary);
  csv << "kind,point,seed,a_last,a_inc\n";
  char buf[128];

  struct Point {
    std::string label;
    ExperimentConfig cfg;
    std::string method;  // method whose accuracy is reported
  };
  std::vector<Point> sweep;

  auto ensure_method = [](ExperimentConfig& c, const std::string& m) {
    for (const std::string& s : c.methods)
      if (s == m) return;
    c.methods.push_back(m);
  };

  if (kind == "projector-arch") {
    for (ProjectorArch a : {ProjectorArch::Linear, ProjectorArch::LinearBias,
                            ProjectorArch::LinearRelu, ProjectorArch::Mlp}) {
      ExperimentConfig c = base;
      c.ldc.arch = a;
      ensure_method(c, "ldc");
      sweep.push_back({to_string(a), std::move(c), "ldc"});
    }
  } else if (kind == "nme-memory") {
    if (points.empty()) points = {5, 10, 20};
    for (double n : points) {
      ExperimentConfig c = base;
      c.nme_exemplars = static_cast<std::size_t>(n);
      ensure_method(c, "nme");
      sweep.push_back({std::to_string(static_cast<int>(n)), std::move(c), "nme"});
    }
  } else if (kind == "feature-bank") {
    if (points.empty()) points = {5, 50, 100};
    for (double n : points) {
      ExperimentConfig c = base;
      c.feature_bank_size = static_cast<std::size_t>(n);
      ensure_method(c, "feature-bank");
      sweep.push_back({std::to_string(static_cast<int>(n)), std::move(c), "feature-bank"});
    }
  } else if (kind == "label-fraction") {
    if (points.empty()) points = {0.008, 0.05, 0.25};
    for (double fr : points) {
      ExperimentConfig c = base;
      c.label_fraction = fr;
      ensure_method(c, "ldc");
      std::snprintf(buf, sizeof buf, "%g", fr);
      sweep.push_back({buf, std::move(c), "ldc"});
    }
  } else {
    throw ParameterError("ablate: unknown sweep kind " + kind);
  }

  for (const Point& pt : sweep) {
    const ExperimentResult res = run_experiment(pt.cfg);
    const int last = pt.cfg.stream.num_tasks;
    std::vector<double> finals;
    for (const SeedResult& s : res.seeds) {
      const TaskRecord& r = s.record(last, pt.method);
      std::snprintf(buf, sizeof buf, "%s,%s,%llu,%.6f,%.6f", kind.c_str(), pt.label.c_str(),
                    static_cast<unsigned long long>(s.seed), r.a_last, r.a_inc);
      csv << buf << '\n';
      finals.push_back(r.a_last);
    }
    std::snprintf(buf, sizeof buf, "%s,%s,mean,%.6f,", kind.c_str(), pt.label.c_str(),
                  mean_of(finals));
    csv << buf << '\n';
    std::snprintf(buf, sizeof buf, "%s,%s,std,%.6f,", kind.c_str(), pt.label.c_str(),
                  std_of(finals));
    csv << buf << '\n';
    std::printf("%s=%s  a_last %.4f +- %.4f\n", kind.c_str(), pt.label.c_str(),
                mean_of(finals), std_of(finals));
  }
  std::cout << "wrote " << out << "/sweep_" << kind << ".csv\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"driftlab: prototype drift-compensation workbench"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "run an experiment from a JSON config");
  run->add_option("--config", config_path, "config file")->required();

  double theta = 0.0, scale = 1.0, tx = 0.0, ty = 0.0, sdc_sigma = 1.0;
  std::uint64_t toy_seed = 1;
  int toy_samples = 200;
  std::string toy_out = "out";
  auto* toy = app.add_subcommand("toy", "2D drift scenario, SDC vs LDC");
  toy->add_option("--theta", theta, "rotation angle in radians");
  toy->add_option("--scale", scale, "scale factor");
  toy->add_option("--tx", tx, "translation x");
  toy->add_option("--ty", ty, "translation y");
  toy->add_option("--seed", toy_seed, "scenario seed");
  toy->add_option("--sdc-sigma", sdc_sigma, "SDC kernel width");
  toy->add_option("--samples", toy_samples, "samples per class");
  toy->add_option("--out", toy_out, "output directory");

  std::string ablate_kind, ablate_config;
  std::vector<double> ablate_points;
  auto* ablate = app.add_subcommand("ablate", "parameter sweeps");
  ablate->add_option("--kind", ablate_kind,
                     "projector-arch | nme-memory | feature-bank | label-fraction")
      ->required();
  ablate->add_option("--config", ablate_config, "base config file")->required();
  ablate->add_option("--points", ablate_points, "sweep points (numeric kinds)");

  std::string report_path, analyze_out = "out";
  std::size_t bins = 20;
  auto* analyze = app.add_subcommand("analyze", "cosine-distance histograms from report.jsonl");
  analyze->add_option("--report", report_path, "report.jsonl path")->required();
  analyze->add_option("--out", analyze_out, "output directory");
  analyze->add_option("--bins", bins, "histogram bin count");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run->parsed()) return cmd_run(config_path);
    if (toy->parsed())
      return cmd_toy(theta, scale, tx, ty, toy_seed, sdc_sigma, toy_samples, toy_out);
    if (ablate->parsed()) return cmd_ablate(ablate_kind, ablate_config, ablate_points);
    if (analyze->parsed()) {
      driftlab::analyze_report(report_path, resolve_out_dir(analyze_out), bins);
      std::cout << "wrote histograms to " << resolve_out_dir(analyze_out) << "\n";
      return 0;
    }
  } catch (const driftlab::ParameterError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const driftlab::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
