#include "cli.hpp"

#include <chrono>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "smart/config.hpp"
#include "smart/corpus.hpp"
#include "smart/engine.hpp"
#include "smart/error.hpp"
#include "smart/service.hpp"

namespace smart::cli {
namespace {

constexpr int kOk = 0;
constexpr int kRuntime = 1;
constexpr int kUsage = 2;

int serve(const std::string& config_path, const std::string& host, std::ostream& out,
          std::ostream& err) {
  Config config;
  try {
    config = load_config(config_path);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  try {
    Engine engine(config);
    for (const auto& w : engine.load_warnings()) err << "warning: " << w << "\n";
    Service service(engine);
    int port = service.bind(host, config.port);
    out << "listening on http://" << host << ":" << port << " (posts=" << engine.post_count()
        << " filters=" << engine.filters().size() << ")" << std::endl;

    std::atomic<bool> done{false};
    std::thread waiter([&] {
      timespec tick{0, 200'000'000};
      while (!done) {
        if (sigtimedwait(&signals, nullptr, &tick) > 0) {
          service.stop();
          return;
        }
      }
    });
    service.run();
    done = true;
    waiter.join();
    engine.save_snapshots();
    out << "stopped" << std::endl;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::kInvalidConfig ? kUsage : kRuntime;
  }
  return kOk;
}

void print_report(const IngestReport& r, std::ostream& out) {
  out << "accepted=" << r.accepted << " rejected=" << r.rejected << "\n";
  for (const auto& e : r.errors) {
    if (e.line > 0) {
      out << "  line " << e.line << ": " << e.reason << "\n";
    } else {
      out << "  " << e.reason << "\n";
    }
  }
}

struct ReplayArgs {
  std::string file;
  std::optional<double> rate;
  std::string target;
  std::string data_dir;
};

int replay_to_target(const ReplayArgs& a, std::ostream& out, std::ostream& err) {
  httplib::Client client(a.target);
  client.set_connection_timeout(5);
  client.set_read_timeout(60);
  if (!client.Get("/health")) {
    err << "error: cannot reach " << a.target << "\n";
    return kRuntime;
  }
  std::string batch;
  std::size_t batch_n = 0;
  std::size_t server_rejected = 0;
  std::vector<IngestError> server_errors;
  bool failed = false;
  auto flush = [&] {
    if (batch_n == 0 || failed) return;
    auto res = client.Post("/ingest", batch, "application/x-ndjson");
    if (!res || res->status != 200) {
      failed = true;
      return;
    }
    auto body = nlohmann::json::parse(res->body, nullptr, false);
    if (body.is_object()) {
      server_rejected += body.value("rejected", std::size_t{0});
      for (const auto& e : body.value("errors", nlohmann::json::array())) {
        server_errors.push_back({0, "server: " + e.value("reason", std::string())});
      }
    }
    batch.clear();
    batch_n = 0;
  };
  const std::size_t batch_size = a.rate ? 1 : 500;
  IngestReport report;
  try {
    report = replay(a.file, ReplayOptions{a.rate}, [&](Post p) {
      batch += serialize_post(p);
      batch += '\n';
      if (++batch_n >= batch_size) flush();
    });
    flush();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  }
  if (failed) {
    err << "error: ingest request to " << a.target << " failed\n";
    return kRuntime;
  }
  report.accepted -= server_rejected;
  report.rejected += server_rejected;
  report.errors.insert(report.errors.end(), server_errors.begin(), server_errors.end());
  print_report(report, out);
  return kOk;
}

int replay_cmd(const ReplayArgs& a, std::ostream& out, std::ostream& err) {
  if (a.rate && !(*a.rate > 0)) {
    err << "error: --rate must be > 0\n";
    return kUsage;
  }
  if (!a.target.empty()) return replay_to_target(a, out, err);
  try {
    auto started = std::chrono::steady_clock::now();
    IngestReport report;
    if (!a.data_dir.empty()) {
      Config config;
      config.data_dir = a.data_dir;
      Engine engine(config);
      for (const auto& w : engine.load_warnings()) err << "warning: " << w << "\n";
      report = replay(a.file, ReplayOptions{a.rate}, [&](Post p) { engine.add_post(std::move(p)); });
    } else {
      report = replay(a.file, ReplayOptions{a.rate}, [](Post) {});
    }
    print_report(report, out);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    err << "elapsed_s=" << secs << "\n";
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kOk;
}

struct GenArgs {
  std::size_t posts = 5000;
  double relevant_frac = 0.5;
  std::uint64_t seed = 1;
  std::string out;
  std::vector<double> bbox;
};

int gen_corpus_cmd(const GenArgs& a, std::ostream& err) {
  CorpusOptions options;
  options.posts = a.posts;
  options.relevant_frac = a.relevant_frac;
  options.seed = a.seed;
  if (!a.bbox.empty()) {
    if (a.bbox.size() != 4) {
      err << "error: --bbox takes lat_min,lon_min,lat_max,lon_max\n";
      return kUsage;
    }
    options.bbox = BoundingBox{a.bbox[0], a.bbox[1], a.bbox[2], a.bbox[3]};
  }
  std::vector<GoldPost> corpus;
  try {
    corpus = generate_corpus(options);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
  std::ofstream file(a.out, std::ios::binary | std::ios::trunc);
  if (!file) {
    err << "error: cannot write " << a.out << "\n";
    return kRuntime;
  }
  write_corpus(file, corpus);
  file.flush();
  if (!file) {
    err << "error: write failed for " << a.out << "\n";
    return kRuntime;
  }
  return kOk;
}

struct EvalArgs {
  std::string corpus;
  std::vector<std::size_t> budgets{10, 50, 200};
  std::size_t seeds = 5;
  std::string out;
};

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

int eval_cmd(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  std::vector<GoldPost> corpus;
  try {
    corpus = load_gold_corpus(a.corpus);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::kFileNotFound ? kRuntime : kUsage;
  }
  if (a.seeds == 0) {
    err << "error: --seeds must be >= 1\n";
    return kUsage;
  }
  std::map<std::size_t, std::vector<CurvePoint>> by_budget;
  std::ostringstream csv;
  csv << "budget,seed,accuracy\n";
  try {
    for (std::uint64_t seed = 1; seed <= a.seeds; ++seed) {
      for (const auto& p : eval_curve(corpus, a.budgets, seed)) {
        csv << p.budget << "," << seed << "," << fixed(p.accuracy) << "\n";
        by_budget[p.budget].push_back(p);
      }
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::kBudgetExceedsPool ? kUsage : kRuntime;
  }
  for (std::size_t b : a.budgets) {
    const auto& pts = by_budget[b];
    double acc = 0, recall = 0;
    for (const auto& p : pts) {
      acc += p.accuracy;
      recall += p.top_half_recall;
    }
    acc /= static_cast<double>(pts.size());
    recall /= static_cast<double>(pts.size());
    csv << b << ",mean," << fixed(acc) << "\n";
    err << "budget=" << b << " mean_accuracy=" << fixed(acc) << " mean_top_half_recall=" << fixed(recall)
        << "\n";
  }
  if (a.out.empty() || a.out == "-") {
    out << csv.str();
    return kOk;
  }
  std::ofstream file(a.out, std::ios::binary | std::ios::trunc);
  file << csv.str();
  if (!file.flush()) {
    err << "error: cannot write " << a.out << "\n";
    return kRuntime;
  }
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Geovisual situational-awareness analytics service", "smart"};
  app.require_subcommand(1);

  std::string config_path, host = "127.0.0.1";
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
  serve_cmd->add_option("--config", config_path, "JSON config file")->required();
  serve_cmd->add_option("--host", host, "Address to bind");

  ReplayArgs replay_args;
  auto* replay_sub = app.add_subcommand("replay", "Stream an NDJSON file into a service or a data directory");
  replay_sub->add_option("--file", replay_args.file, "NDJSON posts")->required();
  replay_sub->add_option("--rate", replay_args.rate, "Posts per second (default: as fast as possible)");
  auto* target = replay_sub->add_option("--target", replay_args.target, "Service base URL");
  auto* data_dir = replay_sub->add_option("--data-dir", replay_args.data_dir, "Data directory");
  target->excludes(data_dir);

  GenArgs gen;
  auto* gen_sub = app.add_subcommand("gen-corpus", "Write a synthetic labeled corpus");
  gen_sub->add_option("--posts", gen.posts, "Number of posts")->required();
  gen_sub->add_option("--relevant-frac", gen.relevant_frac, "Fraction of relevant posts")->required();
  gen_sub->add_option("--seed", gen.seed, "Generator seed")->required();
  gen_sub->add_option("--out", gen.out, "Output path")->required();
  gen_sub->add_option("--bbox", gen.bbox, "lat_min,lon_min,lat_max,lon_max")->delimiter(',');

  EvalArgs eval;
  auto* eval_sub = app.add_subcommand("eval-learner", "Accuracy curve over labeling budgets");
  eval_sub->add_option("--corpus", eval.corpus, "Labeled NDJSON corpus")->required();
  eval_sub->add_option("--budgets", eval.budgets, "Comma-separated label budgets")->delimiter(',');
  eval_sub->add_option("--seeds", eval.seeds, "Number of seeds (1..N)");
  eval_sub->add_option("--out", eval.out, "CSV output path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    auto subs = app.get_subcommands();
    out << (subs.empty() ? app.help() : subs.back()->help());
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    for (auto* sub : app.get_subcommands()) err << sub->help();
    if (app.get_subcommands().empty()) err << app.help();
    return kUsage;
  }

  if (serve_cmd->parsed()) return serve(config_path, host, out, err);
  if (replay_sub->parsed()) return replay_cmd(replay_args, out, err);
  if (gen_sub->parsed()) return gen_corpus_cmd(gen, err);
  if (eval_sub->parsed()) return eval_cmd(eval, out, err);
  return kUsage;
}

}  // namespace smart::cli
