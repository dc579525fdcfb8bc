#include "gddsg/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "gddsg/binary_io.hpp"
#include "gddsg/errors.hpp"
#include "gddsg/experiment.hpp"
#include "gddsg/theory.hpp"

namespace gddsg::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void setup_logging() {
  static const auto logger = [] {
    auto l = spdlog::stderr_color_mt("gddsg");
    spdlog::set_default_logger(l);
    return l;
  }();
  const char* env = std::getenv("GDDSG_LOG");
  logger->set_level(env ? spdlog::level::from_str(env) : spdlog::level::warn);
}

// Model knobs shared by train and orders.
struct ModelFlags {
  std::uint64_t seed = 0;
  std::size_t proj_dim = 1000;
  std::vector<double> lambda_pool = default_lambda_pool();
  std::size_t reservoir = 20;
  std::size_t knn = 11;
  std::string vote = "distance_weighted";
  std::string policy = "maxdist";
  std::string metric = "euclidean";
  std::string activation = "relu";
  std::string centroid_space = "projected";
  bool no_grouping = false;
  bool joint_argmax = false;
  std::size_t threads = 1;

  void attach(CLI::App* app) {
    app->add_option("--seed", seed, "Projection / reservoir seed");
    app->add_option("--proj-dim", proj_dim, "Expanded feature dimension M");
    app->add_option("--lambda-pool", lambda_pool, "Comma-separated ridge candidates")->delimiter(',');
    app->add_option("--reservoir", reservoir, "Stored samples per class");
    app->add_option("--knn", knn, "Neighbours for group identification (odd)");
    app->add_option("--vote", vote, "majority | distance_weighted");
    app->add_option("--policy", policy, "Group choice: maxdist | eq5");
    app->add_option("--metric", metric, "euclidean | manhattan | cosine");
    app->add_option("--activation", activation, "relu | identity");
    app->add_option("--centroid-space", centroid_space, "projected | raw");
    app->add_flag("--no-grouping", no_grouping, "Put every class in one shared group");
    app->add_flag("--joint-argmax", joint_argmax, "Experimental: argmax over all groups");
    app->add_option("--threads", threads, "Worker threads for per-group updates");
  }

  GddsgConfig config() const {
    GddsgConfig c;
    c.seed = seed;
    c.proj_dim = proj_dim;
    c.lambda_pool = lambda_pool;
    c.reservoir_cap = reservoir;
    c.k_neighbors = knn;
    c.vote = parse_vote_rule(vote);
    c.policy = parse_group_choice_policy(policy);
    c.metric = parse_distance_metric(metric);
    c.activation = parse_activation(activation);
    c.centroid_space = parse_centroid_space(centroid_space);
    c.grouping_enabled = !no_grouping;
    c.joint_argmax = joint_argmax;
    c.threads = threads;
    c.validate();
    return c;
  }
};

void write_json(const fs::path& path, const json& j) { binio::write_file(path, j.dump(2) + "\n"); }

void write_group_counts(const fs::path& path, const std::vector<std::size_t>& counts) {
  std::ostringstream out;
  out << "task,num_groups\n";
  for (std::size_t t = 0; t < counts.size(); ++t) out << t << ',' << counts[t] << '\n';
  binio::write_file(path, out.str());
}

json train_summary(const StreamRun& run, std::size_t num_tasks) {
  json report = metrics_report(run.ledger, num_tasks);
  report["group_counts"] = run.group_counts;
  report["num_groups"] = run.state.table.num_groups();
  report["tasks_seen"] = run.state.tasks_seen;
  return report;
}

void save_run(const StreamRun& run, const fs::path& out) {
  save_state(run.state, out);
  write_json(out / "ledger.json", {{"ledger", run.ledger.to_json()}, {"group_counts", run.group_counts}});
}

StreamRun resume_run(const fs::path& dir, std::size_t threads) {
  GddsgState state = load_state(dir);
  state.config.threads = threads;
  json doc;
  try {
    doc = json::parse(binio::read_file(dir / "ledger.json"));
  } catch (const json::parse_error& e) {
    throw FormatError("ledger.json: " + std::string(e.what()));
  }
  StreamRun run{std::move(state), AccuracyLedger::from_json(doc.at("ledger")),
                doc.at("group_counts").get<std::vector<std::size_t>>()};
  if (run.ledger.num_tasks() != run.state.tasks_seen) {
    throw ConsistencyError("ledger.json and state disagree on the number of tasks");
  }
  return run;
}

std::vector<std::pair<ClassId, ClassId>> parse_pairs(const std::vector<std::string>& items) {
  std::vector<std::pair<ClassId, ClassId>> out;
  for (const auto& item : items) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ArgumentError("similar pair '" + item + "' must look like a:b");
    try {
      out.emplace_back(static_cast<ClassId>(std::stoul(item.substr(0, colon))),
                       static_cast<ClassId>(std::stoul(item.substr(colon + 1))));
    } catch (const std::logic_error&) {
      throw ArgumentError("similar pair '" + item + "' is not numeric");
    }
  }
  return out;
}

TheoryParams theory_from_json(const json& j) {
  TheoryParams tp;
  try {
    tp.n = j.at("n").get<std::size_t>();
    tp.p = j.at("p").get<std::size_t>();
    tp.sigma = j.at("sigma").get<double>();
    for (const auto& w : j.at("w_stars")) {
      const auto v = w.get<std::vector<double>>();
      tp.w_stars.push_back(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
    }
  } catch (const json::exception& e) {
    throw ArgumentError(std::string("theory params: ") + e.what());
  }
  return tp;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  setup_logging();

  CLI::App app{"Graph-driven class grouping for class-incremental learning"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic Gaussian-cluster task stream");
  SyntheticSpec spec;
  std::vector<std::string> pair_items;
  fs::path synth_out;
  synth->add_option("--classes", spec.num_classes, "Number of classes")->required();
  synth->add_option("--tasks", spec.num_tasks, "Number of tasks")->required();
  synth->add_option("--dim", spec.dim, "Embedding dimension L")->required();
  synth->add_option("--per-class", spec.per_class_samples, "Training samples per class");
  synth->add_option("--test-per-class", spec.test_per_class, "Held-out samples per class");
  synth->add_option("--center-scale", spec.center_scale, "Radius of the centre sphere");
  synth->add_option("--within-std", spec.within_std, "Within-class standard deviation");
  synth->add_option("--similar-pairs", pair_items, "Comma-separated a:b pairs with overlapping clusters")
      ->delimiter(',');
  synth->add_option("--similar-offset", spec.similar_offset, "Pair centre offset / within-std (< 1)");
  synth->add_option("--seed", spec.seed, "Generator seed");
  synth->add_option("--out", synth_out, "Output directory")->required();

  // train
  auto* train = app.add_subcommand("train", "Train over a manifest and report CIL metrics");
  fs::path manifest_path, train_out, resume_dir;
  ModelFlags train_flags;
  train->add_option("--manifest", manifest_path, "Task manifest JSON")->required();
  train->add_option("--out", train_out, "State / report directory");
  train->add_option("--resume", resume_dir, "Continue from a saved state directory");
  train_flags.attach(train);

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a saved state on a manifest's held-out splits");
  fs::path eval_state, eval_manifest;
  eval->add_option("--state", eval_state, "State directory")->required();
  eval->add_option("--manifest", eval_manifest, "Task manifest JSON")->required();

  // orders
  auto* orders = app.add_subcommand("orders", "Class-order robustness (OPD / MOPD / AOPD)");
  fs::path orders_manifest, orders_out;
  std::size_t num_orders = 0;
  std::vector<std::uint64_t> order_seeds;
  ModelFlags order_flags;
  orders->add_option("--manifest", orders_manifest, "Task manifest JSON")->required();
  orders->add_option("--orders", num_orders, "Number of random class orders R");
  orders->add_option("--order-seeds", order_seeds, "Explicit comma-separated order seeds")->delimiter(',');
  orders->add_option("--out", orders_out, "Directory for orders.json / orders.csv");
  order_flags.attach(orders);

  // theory
  auto* theory = app.add_subcommand("theory", "Evaluate the order-sensitivity expectations");
  fs::path params_path;
  std::size_t rand_tasks = 0, rand_n = 10, rand_p = 20, samples = 0, max_exhaustive = 6;
  double rand_sigma = 0.0, rand_scale = 1.0;
  std::uint64_t theory_seed = 0;
  std::size_t brooks_n = 0;
  double brooks_p = -1.0;
  theory->add_option("--params", params_path, "JSON {n, p, sigma, w_stars}");
  theory->add_option("--random-tasks", rand_tasks, "Draw T random w* instead of reading --params");
  theory->add_option("--n", rand_n, "Samples per task (random mode)");
  theory->add_option("--p", rand_p, "Parameter count (random mode)");
  theory->add_option("--sigma", rand_sigma, "Noise level (random mode)");
  theory->add_option("--scale", rand_scale, "Std of w* entries (random mode)");
  theory->add_option("--seed", theory_seed, "Seed for random w* and sampled orders");
  theory->add_option("--samples", samples, "Sampled permutations instead of exhaustive");
  theory->add_option("--max-exhaustive", max_exhaustive, "Largest T enumerated exhaustively");
  theory->add_option("--brooks-n", brooks_n, "Also evaluate the Brooks probability for N classes");
  theory->add_option("--brooks-p", brooks_p, "Similarity probability for --brooks-n");

  // inspect
  auto* inspect = app.add_subcommand("inspect", "Summarize a saved state");
  fs::path inspect_state, simgraph_out, meta_csv;
  inspect->add_option("--state", inspect_state, "State directory")->required();
  inspect->add_option("--simgraph", simgraph_out, "Write the SimGraph over all classes as JSON");
  inspect->add_option("--meta-csv", meta_csv, "Write the meta-feature dataset as CSV");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << json{{"error", "usage"}, {"message", e.what()}}.dump() << '\n';
    return 2;
  }

  try {
    if (*synth) {
      spec.similarity_pairs = parse_pairs(pair_items);
      const auto m = generate_synthetic(spec, synth_out);
      std::cout << json{{"manifest", (synth_out / "manifest.json").string()},
                        {"tasks", m.tasks.size()},
                        {"classes", m.num_classes()}}
                       .dump()
                << '\n';
    } else if (*train) {
      const TaskManifest manifest = load_manifest(manifest_path);
      const TaskStream stream = load_stream(manifest);
      if (train_out.empty()) train_out = resume_dir;
      if (train_out.empty()) throw ArgumentError("train needs --out or --resume");
      StreamRun run = resume_dir.empty() ? StreamRun{GddsgState(train_flags.config(), stream.dim), {}, {}}
                                         : resume_run(resume_dir, train_flags.threads);
      if (run.state.input_dim() != stream.dim) {
        throw DimensionMismatchError("state input dim differs from manifest dim");
      }
      if (run.state.tasks_seen > stream.num_tasks()) {
        throw ConsistencyError("state has seen more tasks than the manifest holds");
      }
      fs::create_directories(train_out);
      continue_stream(run, stream, [&](std::size_t t, const TaskTrainReport& rep, const StreamRun& r) {
        spdlog::info("task {}: {} groups, mean accuracy {:.2f}", t, rep.num_groups, r.ledger.mean_accuracy(t));
        save_run(r, train_out);
      });
      if (resume_dir.empty() || train_out != resume_dir) save_run(run, train_out);
      const json report = train_summary(run, stream.num_tasks());
      write_json(train_out / "metrics.json", report);
      write_group_counts(train_out / "groups.csv", run.group_counts);
      std::cout << report.dump() << '\n';
    } else if (*eval) {
      const GddsgState state = load_state(eval_state);
      const TaskStream stream = load_stream(load_manifest(eval_manifest));
      std::vector<ClassId> labels;
      std::vector<const Matrix*> parts;
      for (std::size_t t = 0; t < stream.num_tasks(); ++t) {
        for (std::size_t i = 0; i < stream.test_y[t].size(); ++i) {
          if (!state.table.contains(stream.test_y[t][i])) {
            throw ArgumentError("eval: class " + std::to_string(stream.test_y[t][i]) +
                                " is unknown to the model");
          }
        }
        parts.push_back(&stream.test_x[t]);
        labels.insert(labels.end(), stream.test_y[t].begin(), stream.test_y[t].end());
      }
      Matrix x(static_cast<Eigen::Index>(labels.size()), static_cast<Eigen::Index>(stream.dim));
      Eigen::Index at = 0;
      for (const Matrix* m : parts) {
        x.middleRows(at, m->rows()) = *m;
        at += m->rows();
      }
      const auto acc = per_class_accuracy(state, x, labels);
      json per_class = json::object();
      double mean = 0.0;
      for (const auto& [c, a] : acc) {
        per_class[std::to_string(c)] = a;
        mean += a;
      }
      std::cout << json{{"mean_class_accuracy", 100.0 * mean / static_cast<double>(acc.size())},
                        {"per_class", per_class}}
                       .dump()
                << '\n';
    } else if (*orders) {
      if (order_seeds.empty()) {
        if (num_orders < 2) throw ArgumentError("orders needs --orders R with R >= 2");
        for (std::size_t r = 0; r < num_orders; ++r) order_seeds.push_back(order_flags.seed + r);
      } else if (order_seeds.size() < 2) {
        throw ArgumentError("orders needs at least two order seeds");
      }
      const TaskStream stream = load_stream(load_manifest(orders_manifest));
      const auto result = run_orders(stream, order_flags.config(), order_seeds);
      json out = result.report.to_json();
      out["order_seeds"] = order_seeds;
      out["final_accuracy"] = result.final_accuracy;
      out["curves"] = result.runs.curves;
      if (!orders_out.empty()) {
        fs::create_directories(orders_out);
        write_json(orders_out / "orders.json", out);
        result.runs.write_csv(orders_out / "orders.csv");
      }
      std::cout << out.dump() << '\n';
    } else if (*theory) {
      TheoryParams tp;
      if (!params_path.empty()) {
        try {
          tp = theory_from_json(json::parse(binio::read_file(params_path)));
        } catch (const json::parse_error& e) {
          throw ArgumentError(std::string("theory params: ") + e.what());
        }
      } else if (rand_tasks > 0) {
        std::mt19937_64 rng(theory_seed);
        std::normal_distribution<double> normal(0.0, rand_scale);
        tp.n = rand_n;
        tp.p = rand_p;
        tp.sigma = rand_sigma;
        for (std::size_t t = 0; t < rand_tasks; ++t) {
          Vector w(static_cast<Eigen::Index>(rand_p));
          for (auto& v : w) v = normal(rng);
          tp.w_stars.push_back(std::move(w));
        }
      } else {
        throw ArgumentError("theory needs --params or --random-tasks");
      }
      json out;
      out["E_G"] = expected_generalization(tp);
      out["E_F"] = tp.num_tasks() >= 2 ? json(expected_forgetting(tp)) : json(nullptr);
      out["sum_sq_distances"] = sum_sq_distances(tp.w_stars);
      if (tp.num_tasks() >= 2) {
        StudyOptions opts;
        opts.max_exhaustive_tasks = max_exhaustive;
        opts.seed = theory_seed;
        if (samples > 0) opts.samples = samples;
        out["variance"] = permutation_variance_study(tp, opts).to_json();
      }
      if (brooks_n > 0) {
        out["brooks_probability"] = brooks_probability({brooks_n, brooks_p});
      }
      std::cout << out.dump() << '\n';
    } else if (*inspect) {
      const GddsgState state = load_state(inspect_state);
      json groups = json::array();
      for (const auto& [g, members] : state.table.members) {
        groups.push_back({{"id", g}, {"classes", members}, {"lambda", state.models.at(g).lambda()},
                          {"samples", state.models.at(g).sample_count()}});
      }
      if (!simgraph_out.empty()) {
        std::vector<ClassStats> stats;
        for (const auto& [c, s] : state.class_stats) stats.push_back(s);
        write_json(simgraph_out, build_simgraph(stats, state.config.metric).to_json());
      }
      if (!meta_csv.empty()) state.identifier.data().write_csv(meta_csv);
      std::cout << json{{"tasks_seen", state.tasks_seen},
                        {"classes", state.table.group_of.size()},
                        {"num_groups", state.table.num_groups()},
                        {"config", to_json(state.config)},
                        {"groups", groups}}
                       .dump()
                << '\n';
    }
  } catch (const Error& e) {
    std::cerr << json{{"error", e.kind()}, {"message", e.what()}}.dump() << '\n';
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << json{{"error", "io"}, {"message", e.what()}}.dump() << '\n';
    return 2;
  }
  return 0;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace gddsg::cli
