#include "dslite/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include "dslite/audio.hpp"
#include "dslite/bench.hpp"
#include "dslite/csv.hpp"
#include "dslite/dataset.hpp"
#include "dslite/error.hpp"
#include "dslite/eval.hpp"
#include "dslite/frontend.hpp"
#include "dslite/image.hpp"
#include "dslite/model_store.hpp"
#include "dslite/nn/predict.hpp"
#include "dslite/protocol.hpp"
#include "dslite/run_config.hpp"

namespace dslite::cli {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::vector<std::string> configs;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> precision;
  std::optional<std::string> manifest;
  std::optional<double> hop;
  bool dump = false;

  std::string model;
  bool fuse = false;
  std::vector<std::string> audio;
  std::string fixture;
  int reps = kBenchReps;
  int warmup = kBenchWarmup;
};

// First config file is the base; later ones only matter for the eval grid.
RunConfig with_overrides(RunConfig c, const Options& o) {
  if (o.seed) c.train.seed = *o.seed;
  if (o.out) c.out = *o.out;
  if (o.precision) c.precision = *o.precision;
  if (o.manifest) c.manifest = *o.manifest;
  if (o.hop) c.hop_s = *o.hop;
  return c;
}

std::vector<RunConfig> load_configs(const Options& o) {
  std::vector<RunConfig> out;
  for (const auto& path : o.configs) out.push_back(with_overrides(load_config(path), o));
  if (out.empty()) out.push_back(with_overrides(RunConfig{}, o));
  return out;
}

fs::path out_dir(const RunConfig& c) {
  fs::create_directories(c.out);
  return c.out;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw DataError("cannot write " + path.string());
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

struct Data {
  Manifest manifest;
  std::vector<std::string> labels;
  std::vector<ManifestEntry> train, dev, test;
};

Data read_data(const RunConfig& c) {
  if (c.manifest.empty()) throw ConfigError("no manifest given (config key 'manifest' or --manifest)");
  Data d;
  d.manifest = read_manifest(c.manifest);
  d.labels = d.manifest.labels();
  d.train = d.manifest.partition("train");
  d.dev = d.manifest.partition("dev");
  d.test = d.manifest.partition("test");
  const std::vector<std::span<const ManifestEntry>> parts{d.train, d.dev, d.test};
  require_disjoint(parts);
  return d;
}

nn::Model metadata(const RunConfig& c, const std::vector<std::string>& labels, const Frontend& fe) {
  nn::Model meta;
  meta.class_labels = labels;
  meta.fingerprint = fe.fingerprint();
  meta.config_hash = config_hash(c);
  return meta;
}

ProtocolConfig protocol_config(const RunConfig& c) { return {c.out, c.arch, c.train, c.augment}; }

nn::Model load_checked(const std::string& path, const Frontend& fe) {
  if (path.empty()) throw ConfigError("no model archive given (--model)");
  nn::Model m = load_model(path);
  nn::require_fingerprint(m, fe);
  return m;
}

std::string prob_header(const std::vector<std::string>& labels) {
  std::string h;
  for (const auto& l : labels) h += ",prob_" + csv::quote(l);
  return h;
}

std::string prob_fields(const std::vector<double>& p) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (double v : p) os << ',' << v;
  return os.str();
}

int cmd_train(const Options& o, std::ostream& out) {
  const RunConfig c = load_configs(o).front();
  c.validate();
  const Data d = read_data(c);
  if (d.train.empty()) throw DataError("manifest has no 'train' partition");
  const Frontend fe;
  const auto train = load_samples(d.train, d.labels, fe, c.train.chunk_len_s, c.train.chunk_len_s);
  const auto dev = load_samples(d.dev, d.labels, fe, c.train.chunk_len_s, c.train.chunk_len_s);

  std::vector<nn::HistoryRow> history;
  const nn::Model m = train_config(protocol_config(c), train, dev, metadata(c, d.labels, fe), &history);

  const fs::path dir = out_dir(c);
  save_model(m, dir / "model.dsl", parse_precision(c.precision));
  nn::write_history_csv((dir / "history.csv").string(), history);
  write_file(dir / "config.cfg", dump_config(c));
  out << "trained " << history.size() << " epochs on " << train.size() << " chunks\n";
  if (!history.empty() && std::isfinite(history.back().dev_uar)) {
    out << "final dev UAR " << fmt(history.back().dev_uar) << '\n';
  } else {
    out << "final dev UAR n/a (no dev partition)\n";
  }
  out << "wrote " << (dir / "model.dsl").string() << '\n';
  return 0;
}

int cmd_eval(const Options& o, std::ostream& out) {
  const std::vector<RunConfig> grid_cfg = load_configs(o);
  const RunConfig& c = grid_cfg.front();
  for (const auto& g : grid_cfg) g.validate();
  const Data d = read_data(c);
  const Frontend fe;
  const fs::path dir = out_dir(c);

  EvalReport report;
  PredictionSet preds;
  std::vector<std::string> labels;
  if (o.fuse) {
    if (!o.model.empty()) throw ConfigError("--fuse trains its own model; drop --model");
    auto render = [&](const std::vector<ManifestEntry>& e) {
      return load_samples(e, d.labels, fe, c.train.chunk_len_s, c.train.chunk_len_s);
    };
    const auto train = render(d.train), dev = render(d.dev), test = render(d.test);
    std::vector<ProtocolConfig> grid;
    for (const auto& g : grid_cfg) grid.push_back(protocol_config(g));
    const ProtocolOptions popt{c.n_bootstrap, c.confidence, c.bootstrap_seed, true};
    ProtocolResult r = run_protocol(train, dev, test, grid, metadata(c, d.labels, fe), popt);
    r.model.config_hash = config_hash(grid_cfg[r.best]);

    std::ostringstream g;
    g << "index,config,dev_uar,selected\n" << std::setprecision(17);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const std::string name = i < o.configs.size() ? o.configs[i] : "defaults";
      g << i << ',' << csv::quote(name) << ',' << r.dev_uars[i] << ',' << (i == r.best ? 1 : 0) << '\n';
      out << "config " << i << " (" << name << "): dev UAR " << fmt(r.dev_uars[i]) << (i == r.best ? "  <- selected" : "")
          << '\n';
    }
    write_file(dir / "grid.csv", g.str());
    save_model(r.model, dir / "model.dsl", parse_precision(c.precision));
    nn::write_history_csv((dir / "history.csv").string(), r.history);
    out << "retrained config " << r.best << " on train + dev\n";
    report = r.test_report;
    preds = std::move(r.test_predictions);
    labels = d.labels;
  } else {
    const nn::Model m = load_checked(o.model, fe);
    if (d.test.empty()) throw DataError("manifest has no 'test' partition");
    const auto test = load_samples(d.test, m.class_labels, fe, c.train.chunk_len_s, c.train.chunk_len_s);
    preds = nn::predict_items(m, test);
    report = evaluate(preds, c.n_bootstrap, c.confidence, c.bootstrap_seed);
    labels = m.class_labels;
  }
  write_predictions_csv((dir / "predictions.csv").string(), preds);
  const std::string text = report_text(report, labels);
  write_file(dir / "report.txt", text);
  write_file(dir / "report.json", report_json(report, labels));
  out << text;
  return 0;
}

int cmd_infer(const Options& o, std::ostream& out) {
  const RunConfig c = load_configs(o).front();
  const Frontend fe;
  const nn::Model m = load_checked(o.model, fe);
  std::ostringstream csv_out;
  csv_out << "path,label" << prob_header(m.class_labels) << '\n';
  for (const auto& path : o.audio) {
    const auto fp = nn::predict_file(m, fe, path, c.train.chunk_len_s, c.train.chunk_len_s);
    const std::string& label = m.class_labels[static_cast<std::size_t>(fp.label)];
    out << path << ": " << label;
    for (std::size_t k = 0; k < fp.probs.size(); ++k) out << "  " << m.class_labels[k] << '=' << fmt(fp.probs[k]);
    out << '\n';
    csv_out << csv::quote(path) << ',' << csv::quote(label) << prob_fields(fp.probs) << '\n';
  }
  if (o.out) write_file(out_dir(c) / "infer.csv", csv_out.str());
  return 0;
}

int cmd_stream(const Options& o, std::ostream& out) {
  const RunConfig c = load_configs(o).front();
  if (!(c.hop_s > 0.0)) throw ConfigError("--hop must be positive");
  const Frontend fe;
  const nn::Model m = load_checked(o.model, fe);
  const auto fp = nn::predict_file(m, fe, o.audio.front(), c.train.chunk_len_s, c.hop_s);
  std::ostringstream csv_out;
  csv_out << "start_s,label" << prob_header(m.class_labels) << '\n';
  for (std::size_t i = 0; i < fp.chunk_probs.size(); ++i) {
    const auto& p = fp.chunk_probs[i];
    const std::string& label = m.class_labels[static_cast<std::size_t>(nn::argmax(p))];
    out << "t=" << fmt(fp.chunk_starts_s[i], 2) << "s " << label;
    for (std::size_t k = 0; k < p.size(); ++k) out << "  " << m.class_labels[k] << '=' << fmt(p[k]);
    out << '\n';
    csv_out << std::setprecision(17) << fp.chunk_starts_s[i] << ',' << csv::quote(label) << prob_fields(p) << '\n';
  }
  if (o.out) write_file(out_dir(c) / "stream.csv", csv_out.str());
  return 0;
}

int cmd_bench(const Options& o, std::ostream& out) {
  const RunConfig c = load_configs(o).front();
  if (o.model.empty()) throw ConfigError("no model archive given (--model)");
  if (o.fixture.empty()) throw ConfigError("no audio fixture given (--fixture)");
  const BenchReport r = bench_pipeline(o.model, o.fixture, o.reps, o.warmup, c.train.chunk_len_s);
  const fs::path dir = out_dir(c);
  const std::string text = bench_text(r);
  write_file(dir / "bench.txt", text);
  write_file(dir / "bench.json", bench_json(r));
  out << text;
  return 0;
}

int cmd_render(const Options& o, std::ostream& out) {
  const RunConfig c = load_configs(o).front();
  const Frontend fe;
  const fs::path dir = out_dir(c);
  for (const auto& path : o.audio) {
    const auto chunks = chunk_signal(load_wav(path), c.train.chunk_len_s, c.train.chunk_len_s);
    const std::string stem = fs::path(path).stem().string();
    for (std::size_t i = 0; i < chunks.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "_%03zu.png", i);
      export_png(fe.render_raw(chunks[i]), dir / (stem + name));
    }
    out << path << ": " << chunks.size() << " chunk image" << (chunks.size() == 1 ? "" : "s") << '\n';
  }
  return 0;
}

int cmd_features(const Options& o, std::ostream& out) {
  const RunConfig c = load_configs(o).front();
  const Frontend fe;
  const nn::Model m = load_checked(o.model, fe);
  const Data d = read_data(c);
  const fs::path dir = out_dir(c);
  std::ofstream f(dir / "features.csv");
  const int width = m.feature_width();
  f << "path,partition,label,start_s";
  for (int k = 0; k < width; ++k) f << ",f" << k;
  f << '\n' << std::setprecision(9);
  std::size_t rows = 0;
  for (const auto& e : d.manifest.entries) {
    for (const auto& ch : chunk_signal(load_wav(e.path), c.train.chunk_len_s, c.train.chunk_len_s)) {
      f << csv::quote(e.path) << ',' << csv::quote(e.partition) << ',' << csv::quote(e.label) << ',' << ch.start_s;
      for (double v : nn::extract_features(m, fe.render_chunk(ch))) f << ',' << v;
      f << '\n';
      ++rows;
    }
  }
  if (!f) throw DataError("cannot write " + (dir / "features.csv").string());
  out << rows << " feature rows of width " << width << " -> " << (dir / "features.csv").string() << '\n';
  return 0;
}

int cmd_describe(const Options& o, std::ostream& out) {
  if (o.model.empty()) throw ConfigError("no model archive given");
  out << describe_archive(inspect_archive(o.model));
  return 0;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spectrogram-image audio classification toolkit", "dslite"};
  app.require_subcommand(0, 1);
  app.fallthrough();
  Options o;
  app.add_option("--config", o.configs, "Run configuration file (repeat for an eval grid)")->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, "Override the training seed");
  app.add_option("--out", o.out, "Output directory");
  app.add_option("--precision", o.precision, "Archive precision")->check(CLI::IsMember({"f32", "f16"}));
  app.add_option("--manifest", o.manifest, "Dataset manifest (path,label,partition)");
  app.add_flag("--dump-config", o.dump, "Print the effective configuration and exit");

  auto* train = app.add_subcommand("train", "Two-phase training; writes model.dsl and history.csv");
  auto* eval = app.add_subcommand("eval", "Score the test partition, or run the grid protocol with --fuse");
  eval->add_option("--model", o.model, "Model archive");
  eval->add_flag("--fuse", o.fuse, "Select on dev, retrain on train + dev, then test");
  auto* infer = app.add_subcommand("infer", "File-level prediction");
  infer->add_option("--model", o.model, "Model archive")->required();
  infer->add_option("audio", o.audio, "WAV files")->required();
  auto* stream = app.add_subcommand("stream", "Sliding-window predictions over one file");
  stream->add_option("--model", o.model, "Model archive")->required();
  stream->add_option("--hop", o.hop, "Window hop in seconds");
  stream->add_option("audio", o.audio, "WAV file")->required()->expected(1);
  auto* bench = app.add_subcommand("bench", "Time preprocessing and inference");
  bench->add_option("--model", o.model, "Model archive")->required();
  bench->add_option("--fixture", o.fixture, "WAV file to benchmark on")->required();
  bench->add_option("--reps", o.reps, "Timed repetitions")->check(CLI::PositiveNumber);
  bench->add_option("--warmup", o.warmup, "Discarded warmup runs")->check(CLI::NonNegativeNumber);
  auto* render = app.add_subcommand("render", "Write the chunk images of audio files as PNG");
  render->add_option("audio", o.audio, "WAV files")->required();
  auto* features = app.add_subcommand("features", "Export penultimate-layer features for a manifest");
  features->add_option("--model", o.model, "Model archive")->required();
  auto* describe = app.add_subcommand("describe", "Print an archive header");
  describe->add_option("model", o.model, "Model archive")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  if (o.dump) {
    out << dump_config(load_configs(o).front());
    return 0;
  }
  if (*train) return cmd_train(o, out);
  if (*eval) return cmd_eval(o, out);
  if (*infer) return cmd_infer(o, out);
  if (*stream) return cmd_stream(o, out);
  if (*bench) return cmd_bench(o, out);
  if (*render) return cmd_render(o, out);
  if (*features) return cmd_features(o, out);
  if (*describe) return cmd_describe(o, out);
  out << app.help();
  return 1;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    return dispatch(args, out, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return 3;
  }
}

}  // namespace dslite::cli
