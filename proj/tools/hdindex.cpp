/*
 * Copyright 2026 The hdindex Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Command-line driver: build an index, compute ground truth, run batched
// queries, and score results. Every run writes a JSON manifest capturing the
// resolved configuration, input/output checksums and timings, so any reported
// number can be reproduced from the manifest alone.

#include <sys/resource.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "hdindex/hdindex.hpp"
#include "json.hpp"

using namespace hdindex;
using nlohmann::json;

namespace {

using clock_type = std::chrono::steady_clock;

auto seconds_since(clock_type::time_point start) -> double {
  return std::chrono::duration<double>(clock_type::now() - start).count();
}

auto peak_rss_kb() -> long {
  struct rusage ru {};
  getrusage(RUSAGE_SELF, &ru);
  return ru.ru_maxrss;
}

auto hex64(u64 v) -> std::string {
  char buf[19];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(v));
  return buf;
}

auto file_entry(const std::string& path) -> json {
  return {{"path", path},
          {"bytes", std::filesystem::file_size(path)},
          {"checksum", hex64(fnv1a64_file(path))}};
}

void write_manifest(const std::string& path, const json& manifest) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_io("cannot write manifest: " + path);
  out << manifest.dump(2) << "\n";
}

/// Default manifest location: next to the command's primary output.
auto manifest_path(const std::string& flag_value, const std::string& out_path) -> std::string {
  return flag_value.empty() ? out_path + ".manifest.json" : flag_value;
}

/*--------------------------------- build -----------------------------------*/

struct BuildArgs {
  std::string data, kind = "fvecs", out, manifest;
  u32 tau = 0, omega = 0, m = 10, page_size = 4096, pair_budget = 1000;
  double f = 0.3, scale = 0.0, lo = 0.0, hi = 0.0;
  std::string method = "sss";
  u64 seed = 42;
  bool dedup = false;
};

auto cmd_build(const BuildArgs& a) -> int {
  const auto t0 = clock_type::now();
  const ElementKind kind = parse_element_kind(a.kind);

  auto data = read_vecs(a.data, kind, a.lo, a.hi);
  if (a.dedup) {
    const u64 before = data.size();
    data = deduplicate(data);
    if (data.size() != before) {
      std::printf("deduplicated: %llu of %llu records kept\n",
                  static_cast<unsigned long long>(data.size()),
                  static_cast<unsigned long long>(before));
    }
  }
  if (a.scale != 0.0) data = scale_to_integer(data, a.scale);
  const double read_s = seconds_since(t0);

  IndexConfig cfg;
  cfg.tau = a.tau;
  cfg.omega = a.omega;
  cfg.m = a.m;
  cfg.page_size = a.page_size;
  cfg.f = a.f;
  cfg.method = parse_selection_method(a.method);
  cfg.seed = a.seed;
  cfg.scale = a.scale;
  cfg.pair_budget = a.pair_budget;

  const auto t1 = clock_type::now();
  auto idx = HDIndex::build(data, kind, cfg, a.data);
  idx.persist(a.out);
  const double build_s = seconds_since(t1);

  const IndexMeta& meta = idx.meta();
  std::printf("built %s: n=%llu nu=%u tau=%u omega=%u m=%u, %.3f s, %llu bytes\n", a.out.c_str(),
              static_cast<unsigned long long>(idx.object_count()), meta.nu, meta.tau, meta.omega,
              meta.m_eff, build_s, static_cast<unsigned long long>(idx.file_bytes()));

  json manifest = {
      {"command", "build"},
      {"config",
       {{"kind", element_kind_name(meta.kind)},
        {"nu", meta.nu},
        {"tau", meta.tau},
        {"eta", meta.eta},
        {"omega", meta.omega},
        {"m_requested", meta.m_requested},
        {"m", meta.m_eff},
        {"page_size", meta.page_size},
        {"f", meta.f},
        {"method", selection_method_name(meta.method)},
        {"scale", meta.scale},
        {"domain", {meta.lo, meta.hi}},
        {"dedup", a.dedup}}},
      {"seed", a.seed},
      {"inputs", {{"dataset", file_entry(a.data)}}},
      {"outputs", {{"index", file_entry(a.out)}}},
      {"objects", idx.object_count()},
      {"timings", {{"read_seconds", read_s}, {"build_seconds", build_s}}},
      {"peak_rss_kb", peak_rss_kb()},
  };
  write_manifest(manifest_path(a.manifest, a.out), manifest);
  return 0;
}

/*--------------------------------- gtruth ----------------------------------*/

struct GtruthArgs {
  std::string data, kind = "fvecs", queries, qkind = "fvecs", out, manifest;
  u64 k = 100;
  double scale = 0.0;
};

auto cmd_gtruth(const GtruthArgs& a) -> int {
  const auto t0 = clock_type::now();
  const u64 data_checksum = fnv1a64_file(a.data);

  // The output doubles as a cache: if it already matches this dataset and k,
  // the exact scan is skipped entirely.
  bool cache_hit = false;
  if (std::filesystem::exists(a.out)) {
    try {
      auto cached = read_result_file(a.out, kGroundTruthMagic);
      cache_hit = cached.dataset_checksum == data_checksum && cached.k == a.k;
    } catch (const error&) {
      cache_hit = false;  // unreadable or foreign file: recompute below
    }
  }

  u64 n_queries = 0;
  if (!cache_hit) {
    auto data = read_vecs(a.data, parse_element_kind(a.kind));
    auto queries = read_vecs(a.queries, parse_element_kind(a.qkind));
    if (a.scale != 0.0) data = scale_to_integer(data, a.scale);
    require(queries.size() == 0 || a.k <= data.size(), errc::config,
            "gtruth: k exceeds the collection size");
    std::vector<ResultSet> truth;
    truth.reserve(queries.size());
    std::vector<double> probe;
    for (u64 qi = 0; qi < queries.size(); ++qi) {
      probe.assign(queries[qi].begin(), queries[qi].end());
      if (a.scale != 0.0) {
        // queries scale linearly; rounding them would shift every distance
        for (auto& v : probe) v *= a.scale;
      }
      truth.push_back(exact_knn(data, probe, a.k));
    }
    write_result_file(a.out, kGroundTruthMagic, data_checksum, a.k, truth);
    n_queries = queries.size();
  } else {
    n_queries = read_result_file(a.out, kGroundTruthMagic).queries.size();
  }

  const double total_s = seconds_since(t0);
  std::printf("ground truth %s: %llu queries, k=%llu%s, %.3f s\n", a.out.c_str(),
              static_cast<unsigned long long>(n_queries), static_cast<unsigned long long>(a.k),
              cache_hit ? " (cached)" : "", total_s);

  json manifest = {
      {"command", "gtruth"},
      {"config", {{"k", a.k}, {"scale", a.scale}}},
      {"inputs", {{"dataset", file_entry(a.data)}, {"queries", file_entry(a.queries)}}},
      {"outputs", {{"gtruth", file_entry(a.out)}}},
      {"cache_hit", cache_hit},
      {"timings", {{"total_seconds", total_s}}},
      {"peak_rss_kb", peak_rss_kb()},
  };
  write_manifest(manifest_path(a.manifest, a.out), manifest);
  return 0;
}

/*--------------------------------- query -----------------------------------*/

struct QueryArgs {
  std::string index, data, queries, qkind = "fvecs", out, manifest, filter = "triangular";
  u64 k = 100, alpha = 0, beta = 0, gamma = 0;
  u32 threads = 0;
};

auto cmd_query(const QueryArgs& a) -> int {
  const auto t0 = clock_type::now();
  auto idx = HDIndex::load(a.index, a.data);
  auto queries = read_vecs(a.queries, parse_element_kind(a.qkind));
  const FilterMode mode = parse_filter_mode(a.filter);

  QueryParams params;
  params.k = a.k;
  params.alpha = a.alpha;
  params.beta = a.beta;
  params.gamma = a.gamma;
  const QueryParams resolved = params.resolved_for(idx.object_count());

  // Indexes built with a scale factor hold round(value * scale); queries move
  // to the same space so distances are comparable.
  const double scale = idx.meta().scale;
  std::vector<std::vector<double>> probes(queries.size());
  for (u64 qi = 0; qi < queries.size(); ++qi) {
    probes[qi].assign(queries[qi].begin(), queries[qi].end());
    if (scale != 0.0) {
      for (auto& v : probes[qi]) v *= scale;
    }
  }

  u32 threads = a.threads != 0 ? a.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<u32>(std::min<u64>(threads, std::max<u64>(1, probes.size())));

  std::vector<ResultSet> results(probes.size());
  std::vector<double> per_query_ms(probes.size(), 0.0);
  const auto t1 = clock_type::now();
  if (threads <= 1) {
    for (std::size_t qi = 0; qi < probes.size(); ++qi) {
      const auto q0 = clock_type::now();
      results[qi] = knn(idx, probes[qi], params, mode);
      per_query_ms[qi] = seconds_since(q0) * 1e3;
    }
  } else {
    // Workers own separate index handles: handles carry per-query scratch
    // state, and the mmap/file descriptors are cheap to duplicate.
    std::vector<std::thread> pool;
    for (u32 w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        auto local = HDIndex::load(a.index, a.data);
        for (std::size_t qi = w; qi < probes.size(); qi += threads) {
          const auto q0 = clock_type::now();
          results[qi] = knn(local, probes[qi], params, mode);
          per_query_ms[qi] = seconds_since(q0) * 1e3;
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  const double search_s = seconds_since(t1);

  write_result_file(a.out, kResultMagic, idx.dataset_checksum(), resolved.k, results);

  double mean_ms = 0.0;
  for (double ms : per_query_ms) mean_ms += ms;
  mean_ms = probes.empty() ? 0.0 : mean_ms / static_cast<double>(probes.size());
  std::printf("queried %llu probes: k=%llu alpha=%llu beta=%llu gamma=%llu %s, mean %.3f ms\n",
              static_cast<unsigned long long>(probes.size()),
              static_cast<unsigned long long>(resolved.k),
              static_cast<unsigned long long>(resolved.alpha),
              static_cast<unsigned long long>(resolved.beta),
              static_cast<unsigned long long>(resolved.gamma), filter_mode_name(mode).c_str(),
              mean_ms);

  json manifest = {
      {"command", "query"},
      {"config",
       {{"k", resolved.k},
        {"alpha", resolved.alpha},
        {"beta", resolved.beta},
        {"gamma", resolved.gamma},
        {"filter", filter_mode_name(mode)},
        {"threads", threads}}},
      {"seed", idx.meta().seed},
      {"inputs", {{"index", file_entry(a.index)}, {"queries", file_entry(a.queries)}}},
      {"outputs", {{"results", file_entry(a.out)}}},
      {"timings",
       {{"total_seconds", seconds_since(t0)},
        {"search_seconds", search_s},
        {"mean_query_ms", mean_ms},
        {"per_query_ms", per_query_ms}}},
      {"peak_rss_kb", peak_rss_kb()},
  };
  write_manifest(manifest_path(a.manifest, a.out), manifest);
  return 0;
}

/*---------------------------------- eval -----------------------------------*/

struct EvalArgs {
  std::string results, gtruth, out, manifest;
  u64 k = 0;  // 0: use the k the files carry
};

auto cmd_eval(const EvalArgs& a) -> int {
  const auto t0 = clock_type::now();
  auto res = read_result_file(a.results, kResultMagic);
  auto truth = read_result_file(a.gtruth, kGroundTruthMagic);
  require(res.dataset_checksum == truth.dataset_checksum, errc::data,
          "eval: results and ground truth were computed against different datasets");

  u64 k = a.k != 0 ? a.k : std::min(res.k, truth.k);
  require(k <= res.k && k <= truth.k, errc::config,
          "eval: k=" + std::to_string(k) + " exceeds a file's depth (results " +
              std::to_string(res.k) + ", ground truth " + std::to_string(truth.k) + ")");

  auto report = evaluate(res.queries, truth.queries, k);
  std::printf("queries: %zu  k: %llu\n", truth.queries.size(), static_cast<unsigned long long>(k));
  std::printf("MAP@%llu: %.4f\n", static_cast<unsigned long long>(k), report.map);
  std::printf("mean ratio: %.4f\n", report.mean_ratio);

  json metrics = {{"k", k},
                  {"queries", truth.queries.size()},
                  {"map", report.map},
                  {"mean_ratio", report.mean_ratio},
                  {"ap", report.ap},
                  {"ratio", report.ratio}};
  if (!a.out.empty()) {
    std::ofstream out(a.out, std::ios::binary);
    if (!out) throw_io("cannot write report: " + a.out);
    out << metrics.dump(2) << "\n";
  }

  json manifest = {
      {"command", "eval"},
      {"config", {{"k", k}}},
      {"inputs", {{"results", file_entry(a.results)}, {"gtruth", file_entry(a.gtruth)}}},
      {"metrics", metrics},
      {"timings", {{"total_seconds", seconds_since(t0)}}},
      {"peak_rss_kb", peak_rss_kb()},
  };
  write_manifest(manifest_path(a.manifest, a.out.empty() ? a.results + ".eval" : a.out), manifest);
  return 0;
}

}  // namespace

auto main(int argc, char** argv) -> int {
  CLI::App app{"disk-based approximate nearest-neighbor search over Hilbert-keyed trees"};
  app.require_subcommand(1);

  BuildArgs b;
  auto* build = app.add_subcommand("build", "build an index from a vecs file");
  build->add_option("--data", b.data, "dataset vecs file")->required();
  build->add_option("--kind", b.kind, "dataset element kind: fvecs|bvecs|ivecs");
  build->add_option("--out", b.out, "index file to write")->required();
  build->add_option("--tau", b.tau, "number of trees (0: auto)");
  build->add_option("--omega", b.omega, "curve order in bits: 8|16|32 (0: auto)");
  build->add_option("--m", b.m, "reference count");
  build->add_option("--f", b.f, "sparse-selection radius factor");
  build->add_option("--method", b.method, "reference selection: sss|sss-dyn|random");
  build->add_option("--page-size", b.page_size, "tree page size in bytes");
  build->add_option("--seed", b.seed, "selection seed");
  build->add_option("--scale", b.scale, "store round(value * scale) instead of raw values");
  build->add_option("--pair-budget", b.pair_budget, "sss-dyn evaluation pairs");
  build->add_option("--lo", b.lo, "domain lower bound (with --hi; default: scan the data)");
  build->add_option("--hi", b.hi, "domain upper bound");
  build->add_flag("--dedup", b.dedup, "drop duplicate records before indexing");
  build->add_option("--manifest", b.manifest, "manifest path (default: <out>.manifest.json)");

  GtruthArgs g;
  auto* gtruth = app.add_subcommand("gtruth", "exact k-nearest-neighbor ground truth");
  gtruth->add_option("--data", g.data, "dataset vecs file")->required();
  gtruth->add_option("--kind", g.kind, "dataset element kind");
  gtruth->add_option("--queries", g.queries, "query vecs file")->required();
  gtruth->add_option("--qkind", g.qkind, "query element kind");
  gtruth->add_option("--k", g.k, "neighbors per query");
  gtruth->add_option("--out", g.out, "ground-truth file (reused as cache when valid)")->required();
  gtruth->add_option("--scale", g.scale, "match a build's --scale");
  gtruth->add_option("--manifest", g.manifest, "manifest path");

  QueryArgs q;
  auto* query = app.add_subcommand("query", "batched approximate search");
  query->add_option("--index", q.index, "index file")->required();
  query->add_option("--data", q.data, "dataset file override (default: path stored in index)");
  query->add_option("--queries", q.queries, "query vecs file")->required();
  query->add_option("--qkind", q.qkind, "query element kind");
  query->add_option("--k", q.k, "neighbors per query");
  query->add_option("--alpha", q.alpha, "per-tree candidates (0: default)");
  query->add_option("--beta", q.beta, "first-filter survivors (0: default)");
  query->add_option("--gamma", q.gamma, "per-tree survivors (0: default)");
  query->add_option("--filter", q.filter, "lower-bound chain: triangular|combined");
  query->add_option("--threads", q.threads, "worker threads (0: all cores)");
  query->add_option("--out", q.out, "results file to write")->required();
  query->add_option("--manifest", q.manifest, "manifest path");

  EvalArgs e;
  auto* eval = app.add_subcommand("eval", "score results against ground truth");
  eval->add_option("--results", e.results, "results file")->required();
  eval->add_option("--gtruth", e.gtruth, "ground-truth file")->required();
  eval->add_option("--k", e.k, "evaluation depth (default: the files' k)");
  eval->add_option("--out", e.out, "machine-readable report path");
  eval->add_option("--manifest", e.manifest, "manifest path");

  try {
    app.parse(argc, argv);
    if (build->parsed()) return cmd_build(b);
    if (gtruth->parsed()) return cmd_gtruth(g);
    if (query->parsed()) return cmd_query(q);
    if (eval->parsed()) return cmd_eval(e);
  } catch (const CLI::ParseError& pe) {
    return app.exit(pe) == 0 ? 0 : 1;  // prints usage; 0 only for --help
  } catch (const error& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    switch (err.kind()) {
      case errc::config: return 1;
      case errc::io:
      case errc::data: return 2;
      case errc::internal: return 3;
    }
    return 3;
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 3;
  }
  return 0;
}
