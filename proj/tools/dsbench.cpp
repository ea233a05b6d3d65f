// dsbench: data generation, index building and query workloads from the
// command line. See README.md for the CSV schema.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "dsidx/datagen.hpp"
#include "dsidx/io.hpp"
#include "dsidx/metrics.hpp"
#include "dsidx/persist.hpp"
#include "dsidx/search.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace dsidx;

namespace {

constexpr int kExitIo = 1;
constexpr int kExitUsage = 2;

// Relative paths resolve against $DSBENCH_DATA_DIR when it is set.
fs::path resolve(const std::string& p) {
  fs::path path(p);
  if (path.is_absolute()) return path;
  if (const char* base = std::getenv("DSBENCH_DATA_DIR"); base != nullptr && *base != '\0') {
    return fs::path(base) / path;
  }
  return path;
}

void print_error(std::string_view category, std::string_view kind, std::string_view message) {
  nlohmann::json j{{"error", category}, {"kind", kind}, {"message", message}};
  std::cerr << j.dump() << '\n';
}

// ---------------------------------------------------------------------------
// Run configuration

struct Point {
  SearchMode mode;
  std::size_t k;
  double epsilon;
  double delta;
  std::size_t nprobe;  // 0 = all
};

struct RunOptions {
  std::string index_dir;
  std::string queries;
  std::string ground_truth;
  std::string out;
  std::vector<std::string> modes{"exact"};
  std::vector<std::size_t> ks{10};
  std::vector<double> epsilons{0.0};
  std::vector<double> deltas{1.0};
  std::vector<std::string> nprobes{"1"};
  std::size_t threads = 1;
  std::size_t f_sample = 1000;
  std::size_t f_pairs = 100000;
  std::uint64_t seed = 0;
  bool first_neighbor_re = false;
};

std::vector<Point> expand(const RunOptions& o) {
  std::vector<Point> points;
  for (const auto& m : o.modes) {
    for (std::size_t k : o.ks) {
      if (m == "exact") {
        points.push_back({SearchMode::kExact, k, 0.0, 1.0, 0});
      } else if (m == "ng") {
        for (const auto& np : o.nprobes) {
          std::size_t v = 0;
          if (np != "all") {
            try {
              v = std::stoul(np);
            } catch (const std::exception&) {
              throw PreconditionError("nprobe must be a positive integer or 'all': " + np);
            }
            if (v == 0) throw PreconditionError("nprobe must be >= 1");
          }
          points.push_back({SearchMode::kNg, k, 0.0, 1.0, v});
        }
      } else {
        for (double e : o.epsilons) {
          for (double d : o.deltas) points.push_back({SearchMode::kGuaranteed, k, e, d, 0});
        }
      }
    }
  }
  return points;
}

// shortest representation that round-trips
std::string fmt_double(double v) { return fmt::format("{}", v); }

const char* kCsvHeader =
    "row,mode,k,epsilon,delta,nprobe,query_id,recall,ap,re,raw_compared,leaves_visited,bytes_read,seeks,"
    "elapsed_ns,early_exit,queries,avg_recall,map,mre,re_excluded,throughput_qpm,pct_data_accessed,mean_seeks,"
    "mean_leaves_visited,mean_raw_compared,dataset_bytes";

std::string point_columns(std::string_view mode, std::size_t k, double eps, double delta, std::size_t nprobe) {
  return fmt::format("{},{},{},{},{}", mode, k, fmt_double(eps), fmt_double(delta), nprobe);
}

std::string aggregate_columns(const WorkloadReport& r, std::uint64_t dataset_bytes) {
  return fmt::format("{},{},{},{},{},{},{},{},{},{},{}", r.queries, fmt_double(r.avg_recall), fmt_double(r.map),
                     fmt_double(r.mre), r.re_excluded, fmt_double(r.throughput_qpm),
                     fmt_double(r.pct_data_accessed), fmt_double(r.mean_seeks), fmt_double(r.mean_leaves_visited),
                     fmt_double(r.mean_raw_compared), dataset_bytes);
}

int cmd_run(const RunOptions& o) {
  const auto index = load_index(resolve(o.index_dir));
  auto queries = read_dataset(resolve(o.queries));
  if (queries.length() != index->length()) throw PreconditionError("query length differs from the index");
  if (index->params().normalized) queries = z_normalize(queries);
  const auto truth = read_ground_truth(resolve(o.ground_truth));
  if (truth.rows.size() != queries.size()) throw PreconditionError("ground truth row count differs from the queries");
  if (o.threads < 1) throw PreconditionError("threads must be >= 1");

  const auto points = expand(o);
  for (const auto& p : points) {
    if (p.k > truth.k) throw PreconditionError(fmt::format("k={} exceeds ground-truth k={}", p.k, truth.k));
  }

  std::optional<DistanceDistribution> f;
  const bool need_f = std::any_of(points.begin(), points.end(), [](const Point& p) {
    return p.mode == SearchMode::kGuaranteed && p.delta < 1.0;
  });
  if (need_f) {
    f = estimate_distance_distribution(index->storage(), std::min(o.f_sample, index->size()), o.f_pairs, o.seed);
  }

  const std::size_t all_probe = index->kind() == IndexKind::kVaFile ? index->size() : index->leaf_count();
  const std::uint64_t dataset_bytes = index->storage().bytes();
  const auto denom = o.first_neighbor_re ? ReDenominator::kFirstNeighbor : ReDenominator::kRankMatched;

  const auto out_path = resolve(o.out);
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw FormatError(FormatErrorKind::kIo, "cannot open " + out_path.string());
  out << kCsvHeader << '\n';

  for (const auto& p : points) {
    const std::size_t nprobe = p.nprobe == 0 ? all_probe : p.nprobe;
    SearchParams sp{p.k, p.mode, nprobe, p.epsilon, p.delta};
    sp.validate();

    std::vector<QueryRecord> records(queries.size());
    std::vector<EarlyExit> exits(queries.size(), EarlyExit::kNone);
    auto run_one = [&](std::size_t q) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto r = search(*index, queries.series(q), sp, f ? &*f : nullptr);
      const auto t1 = std::chrono::steady_clock::now();
      std::vector<SeriesId> truth_ids;
      std::vector<double> exact_d;
      for (std::size_t i = 0; i < p.k; ++i) {
        truth_ids.push_back(truth.rows[q][i].id);
        exact_d.push_back(truth.rows[q][i].distance);
      }
      // ground truth stores float32 distances; compare at the same precision
      std::vector<double> got_d;
      for (const auto& n : r.result.neighbors) got_d.push_back(static_cast<float>(n.distance));
      const auto ids = r.result.ids();
      auto& rec = records[q];
      rec.query_id = q;
      rec.recall = recall(ids, truth_ids);
      rec.average_precision = average_precision(ids, truth_ids, p.k);
      rec.relative_error = relative_error(got_d, exact_d, denom);
      rec.stats = r.stats;
      rec.elapsed_ns = static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count());
      exits[q] = r.guarantee.exit;
    };

    if (o.threads == 1) {
      for (std::size_t q = 0; q < queries.size(); ++q) run_one(q);
    } else {
      std::vector<std::thread> pool;
      std::atomic<std::size_t> next{0};
      std::exception_ptr failure;
      std::mutex failure_mu;
      for (std::size_t t = 0; t < o.threads; ++t) {
        pool.emplace_back([&] {
          try {
            for (std::size_t q = next++; q < queries.size(); q = next++) run_one(q);
          } catch (...) {
            std::lock_guard lock(failure_mu);
            if (!failure) failure = std::current_exception();
          }
        });
      }
      for (auto& th : pool) th.join();
      if (failure) std::rethrow_exception(failure);
    }

    const auto cols = point_columns(to_string(p.mode), p.k, p.epsilon, p.delta, sp.mode == SearchMode::kNg ? nprobe : 0);
    for (const auto& rec : records) {
      const auto& s = rec.stats;
      out << fmt::format("query,{},{},{},{},{},{},{},{},{},{},{},,,,,,,,,,,\n", cols, rec.query_id,
                         fmt_double(rec.recall), fmt_double(rec.average_precision),
                         rec.relative_error ? fmt_double(*rec.relative_error) : std::string(), s.raw_compared,
                         s.leaves_visited, s.bytes_read, s.random_seeks, rec.elapsed_ns,
                         to_string(exits[rec.query_id]));
    }
    const auto report = aggregate(records, dataset_bytes);
    out << fmt::format("aggregate,{},,,,,,,,,,,{}\n", cols, aggregate_columns(report, dataset_bytes));
    std::cout << fmt::format("{} k={} eps={} delta={} nprobe={}: recall={:.4f} map={:.4f} mre={:.4g} qpm={:.1f}\n",
                             to_string(p.mode), p.k, p.epsilon, p.delta, sp.mode == SearchMode::kNg ? nprobe : 0,
                             report.avg_recall, report.map, report.mre, report.throughput_qpm);
  }
  if (!out) throw FormatError(FormatErrorKind::kIo, "write failed: " + out_path.string());
  return 0;
}

// ---------------------------------------------------------------------------
// report: recompute aggregates from per-query rows

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

int cmd_report(const std::string& in_path, const std::string& out_path) {
  const auto path = resolve(in_path);
  std::ifstream in(path);
  if (!in) throw FormatError(FormatErrorKind::kMissingFile, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw FormatError(FormatErrorKind::kInvalid, "unexpected CSV header");
  const auto header = split_csv(kCsvHeader);
  auto col = [&](std::string_view name) {
    return static_cast<std::size_t>(std::find(header.begin(), header.end(), name) - header.begin());
  };

  using Key = std::string;  // mode,k,epsilon,delta,nprobe as written
  std::map<Key, std::vector<QueryRecord>> groups;
  std::map<Key, std::vector<std::string>> stored;
  std::vector<Key> order;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) throw FormatError(FormatErrorKind::kInvalid, "bad CSV row: " + line);
    const Key key = fmt::format("{},{},{},{},{}", cells[1], cells[2], cells[3], cells[4], cells[5]);
    if (cells[0] == "query") {
      if (!groups.count(key)) order.push_back(key);
      QueryRecord r;
      r.query_id = std::stoul(cells[col("query_id")]);
      r.recall = std::stod(cells[col("recall")]);
      r.average_precision = std::stod(cells[col("ap")]);
      if (!cells[col("re")].empty()) r.relative_error = std::stod(cells[col("re")]);
      r.stats.raw_compared = std::stoull(cells[col("raw_compared")]);
      r.stats.leaves_visited = std::stoull(cells[col("leaves_visited")]);
      r.stats.bytes_read = std::stoull(cells[col("bytes_read")]);
      r.stats.random_seeks = std::stoull(cells[col("seeks")]);
      r.elapsed_ns = std::stoull(cells[col("elapsed_ns")]);
      groups[key].push_back(r);
    } else if (cells[0] == "aggregate") {
      stored[key] = cells;
    } else {
      throw FormatError(FormatErrorKind::kInvalid, "unknown row type: " + cells[0]);
    }
  }

  std::ostringstream out;
  out << "mode,k,epsilon,delta,nprobe,queries,avg_recall,map,mre,re_excluded,throughput_qpm,pct_data_accessed,"
         "mean_seeks,mean_leaves_visited,mean_raw_compared,dataset_bytes,matches_stored\n";
  bool all_match = true;
  for (const auto& key : order) {
    const auto it = stored.find(key);
    if (it == stored.end()) throw FormatError(FormatErrorKind::kInvalid, "no aggregate row for " + key);
    const std::uint64_t bytes = std::stoull(it->second[col("dataset_bytes")]);
    const auto r = aggregate(groups[key], bytes);
    const double recomputed[] = {r.avg_recall, r.map, r.mre, r.throughput_qpm, r.pct_data_accessed, r.mean_seeks,
                                 r.mean_leaves_visited, r.mean_raw_compared};
    const char* names[] = {"avg_recall",         "map",        "mre",
                           "throughput_qpm",     "pct_data_accessed", "mean_seeks",
                           "mean_leaves_visited", "mean_raw_compared"};
    bool match = std::stoul(it->second[col("queries")]) == r.queries &&
                 std::stoul(it->second[col("re_excluded")]) == r.re_excluded;
    for (std::size_t i = 0; i < std::size(names); ++i) {
      const double s = std::stod(it->second[col(names[i])]);
      match &= std::abs(s - recomputed[i]) <= 1e-9 * std::max(1.0, std::abs(s));
    }
    all_match &= match;
    out << key << ',' << aggregate_columns(r, bytes) << ',' << (match ? "yes" : "no") << '\n';
  }

  if (out_path.empty()) {
    std::cout << out.str();
  } else {
    const auto s = out.str();
    write_file(resolve(out_path), std::vector<std::uint8_t>(s.begin(), s.end()));
  }
  if (!all_match) {
    print_error("report", "mismatch", "stored aggregates differ from recomputed values");
    return kExitIo;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dsbench: data-series similarity search benchmark"};
  app.set_config("--config", "", "Read options from a config file (key = flag name)");
  app.require_subcommand(1);
  app.fallthrough();

  // gen-data
  GeneratorSpec gen;
  std::string data_out;
  auto* gen_data = app.add_subcommand("gen-data", "Generate a random-walk dataset (DSBIN1)");
  gen_data->add_option("--count", gen.count, "Number of series")->required()->check(CLI::PositiveNumber);
  gen_data->add_option("--length", gen.length, "Series length")->required()->check(CLI::PositiveNumber);
  gen_data->add_option("--seed", gen.seed, "Generator seed")->capture_default_str();
  gen_data->add_option("--out", data_out, "Output file")->required();

  // gen-queries
  QueryWorkloadSpec qspec;
  std::string q_dataset, q_out;
  auto* gen_q = app.add_subcommand("gen-queries", "Generate noise-perturbed queries from a dataset");
  gen_q->add_option("--dataset", q_dataset, "Source dataset")->required();
  gen_q->add_option("--count", qspec.count, "Number of queries")->capture_default_str()->check(CLI::PositiveNumber);
  gen_q->add_option("--noise", qspec.noise_levels, "Noise standard deviations, assigned round-robin")
      ->delimiter(',')
      ->capture_default_str();
  gen_q->add_option("--seed", qspec.seed, "Generator seed")->capture_default_str();
  gen_q->add_option("--out", q_out, "Output file")->required();

  // ground-truth
  std::string gt_dataset, gt_queries, gt_out;
  std::size_t gt_k = 10;
  bool gt_raw = false;
  auto* gt = app.add_subcommand("ground-truth", "Compute exact k-NN answers by brute force");
  gt->add_option("--dataset", gt_dataset, "Dataset file")->required();
  gt->add_option("--queries", gt_queries, "Query file")->required();
  gt->add_option("--k", gt_k, "Neighbors per query")->capture_default_str()->check(CLI::PositiveNumber);
  gt->add_flag("--raw", gt_raw, "Skip z-normalization of data and queries");
  gt->add_option("--out", gt_out, "Output file")->required();

  // build
  std::string b_dataset, b_out, b_kind;
  IndexParams params;
  bool b_raw = false;
  auto* build = app.add_subcommand("build", "Build and persist an index");
  build->add_option("--dataset", b_dataset, "Dataset file")->required();
  build->add_option("--kind", b_kind, "Index kind")
      ->required()
      ->check(CLI::IsMember({"isax", "eapca-tree", "vafile"}));
  build->add_option("--out", b_out, "Index directory")->required();
  build->add_option("--leaf-capacity", params.leaf_capacity)->capture_default_str();
  build->add_option("--segments", params.segments, "iSAX PAA segments")->capture_default_str();
  build->add_option("--base-bits", params.base_bits, "iSAX root bits per symbol")->capture_default_str();
  build->add_option("--eapca-segments", params.eapca_initial_segments, "Initial EAPCA segments")
      ->capture_default_str();
  build->add_option("--dft-coefficients", params.dft_coefficients)->capture_default_str();
  build->add_option("--va-bits", params.va_total_bits, "VA+ total bit budget")->capture_default_str();
  build->add_option("--buffer-bytes", params.buffer_bytes, "Leaf staging buffer")->capture_default_str();
  build->add_flag("--raw", b_raw, "Index the data without z-normalization");

  // run
  RunOptions run;
  auto* run_cmd = app.add_subcommand("run", "Run a query workload and write a CSV report");
  run_cmd->add_option("--index", run.index_dir, "Index directory")->required();
  run_cmd->add_option("--queries", run.queries, "Query file")->required();
  run_cmd->add_option("--ground-truth", run.ground_truth, "Ground-truth file")->required();
  run_cmd->add_option("--out", run.out, "CSV output")->required();
  run_cmd->add_option("--mode", run.modes, "Modes: exact, ng, guaranteed")
      ->delimiter(',')
      ->check(CLI::IsMember({"exact", "ng", "guaranteed"}))
      ->capture_default_str();
  run_cmd->add_option("--k", run.ks, "k values")->delimiter(',')->capture_default_str();
  run_cmd->add_option("--epsilon", run.epsilons, "epsilon values (guaranteed)")->delimiter(',')->capture_default_str();
  run_cmd->add_option("--delta", run.deltas, "delta values (guaranteed)")->delimiter(',')->capture_default_str();
  run_cmd->add_option("--nprobe", run.nprobes, "nprobe values or 'all' (ng)")->delimiter(',')->capture_default_str();
  run_cmd->add_option("--threads", run.threads, "Concurrent queries")->capture_default_str();
  run_cmd->add_option("--f-sample", run.f_sample, "Series sampled for the distance distribution")
      ->capture_default_str();
  run_cmd->add_option("--f-pairs", run.f_pairs, "Pairs drawn for the distance distribution")->capture_default_str();
  run_cmd->add_option("--seed", run.seed, "Seed for the distance distribution")->capture_default_str();
  run_cmd->add_flag("--re-first-neighbor", run.first_neighbor_re,
                    "Divide every rank's error by the exact 1-NN distance");

  // report
  std::string r_in, r_out;
  auto* report = app.add_subcommand("report", "Recompute aggregate rows from a run CSV");
  report->add_option("--in", r_in, "CSV written by run")->required();
  report->add_option("--out", r_out, "Output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::Error& e) {
    print_error("usage", e.get_name(), e.what());
    return kExitUsage;
  }

  try {
    if (*gen_data) {
      write_dataset(resolve(data_out), gen_random_walk(gen));
    } else if (*gen_q) {
      const auto w = gen_queries(read_dataset(resolve(q_dataset)), qspec);
      write_dataset(resolve(q_out), w.queries);
    } else if (*gt) {
      auto data = read_dataset(resolve(gt_dataset));
      auto queries = read_dataset(resolve(gt_queries));
      if (!gt_raw) {
        data = z_normalize(data);
        queries = z_normalize(queries);
      }
      write_ground_truth(resolve(gt_out), gen_ground_truth(data, queries, gt_k));
    } else if (*build) {
      params.normalized = !b_raw;
      auto data = read_dataset(resolve(b_dataset));
      if (params.normalized) data = z_normalize(data);
      const auto t0 = std::chrono::steady_clock::now();
      const auto index = build_index(parse_index_kind(b_kind), data, params);
      const auto t1 = std::chrono::steady_clock::now();
      persist(*index, resolve(b_out));
      nlohmann::json info{{"kind", b_kind},
                          {"build_seconds", std::chrono::duration<double>(t1 - t0).count()},
                          {"summary_bytes", index->summary_bytes()},
                          {"leaves", index->leaf_count()},
                          {"nodes", index->node_count()},
                          {"overflow_leaves", index->overflow_leaves()}};
      std::cout << info.dump() << '\n';
    } else if (*run_cmd) {
      return cmd_run(run);
    } else if (*report) {
      return cmd_report(r_in, r_out);
    }
  } catch (const PreconditionError& e) {
    print_error("usage", "precondition", e.what());
    return kExitUsage;
  } catch (const FormatError& e) {
    print_error("io", to_string(e.kind()), e.what());
    return kExitIo;
  } catch (const std::exception& e) {
    print_error("io", "other", e.what());
    return kExitIo;
  }
  return 0;
}
