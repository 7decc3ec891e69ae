#include "conflens/cli.hpp"

#include <filesystem>
#include <iostream>
#include <optional>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>

#include "conflens/confusion.hpp"
#include "conflens/manifest.hpp"
#include "conflens/metrics.hpp"
#include "conflens/parallel.hpp"
#include "conflens/priors.hpp"
#include "conflens/refinement.hpp"
#include "conflens/rng.hpp"
#include "conflens/synth.hpp"

namespace conflens::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct ConfusionArgs {
  std::string manifest;
  int radius = kDefaultBorderRadius;
  double floor = kDefaultConfusionFloor;
  std::string out;
};

struct PriorArgs {
  std::string manifest;
  std::string kind;
  std::string confusion;
  std::string solver_opts;
  bool exclude_borders = false;
  int radius = kDefaultBorderRadius;
  std::size_t max_samples = 100000;
  std::uint64_t seed = 0;
  std::string out;
};

struct RefineArgs {
  std::string manifest;
  std::string confusion;
  std::string priors;
  std::string out;
};

struct EvalArgs {
  std::string pred_dir;
  std::string manifest;
  bool exclude_borders = false;
  int radius = kDefaultBorderRadius;
  std::string out;
};

struct RenderArgs {
  std::string matrix;
  std::string out;
  double gamma = 0.5;
  std::size_t block = 1;
};

struct SynthArgs {
  std::string spec;
  std::string out_dir;
};

void ensure_parent(const fs::path& file) {
  const auto parent = file.parent_path();
  if (parent.empty()) return;
  std::error_code ec;
  fs::create_directories(parent, ec);
  if (ec) throw io_error("cannot create " + parent.string() + ": " + ec.message());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw io_error("cannot create " + dir.string() + ": " + ec.message());
}

std::vector<const ManifestRecord*> require_split(const Manifest& m, Split split) {
  auto records = m.split(split);
  if (records.empty()) throw data_error("no " + to_string(split) + " records in the manifest");
  return records;
}

fs::path pred_path(const fs::path& dir, const std::string& id) { return dir / (id + ".pred.segt"); }
fs::path refined_path(const fs::path& dir, const std::string& id) { return dir / (id + ".probs.segt"); }

// ---------------------------------------------------------------- confusion

void cmd_confusion(const ConfusionArgs& a, std::size_t threads, std::ostream& out) {
  if (a.radius < 0) throw usage_error("--radius must be >= 0");
  if (!(a.floor > 0.0)) throw usage_error("--floor must be > 0");
  const auto manifest = load_manifest(a.manifest);
  const auto records = require_split(manifest, Split::Estimation);

  std::vector<CountMatrix> partial(records.size());
  parallel_for(records.size(), threads, [&](std::size_t i) {
    const auto img = load_image(manifest, *records[i]);
    const auto pred = argmax_labels(img.probs);
    partial[i] = accumulate_counts(img.gt, pred, border_mask(img.gt, a.radius), manifest.labels);
  });
  CountMatrix counts(manifest.labels.size());
  for (const auto& p : partial) counts = merge_counts(counts, p);

  const auto model = normalize_confusion(counts, a.floor);
  const ConfusionProvenance prov{a.floor, a.radius, records.size(), total_count(counts)};
  ensure_parent(a.out);
  save_confusion(a.out, model, prov);
  out << "confusion: " << records.size() << " images, " << prov.n_pixels << " pixels -> "
      << a.out << "\n";
}

// ---------------------------------------------------------------- prior

SolverOptions parse_solver_options(const std::string& text) {
  if (text.empty()) return {};
  std::string body = text;
  if (body.front() != '{') body = read_text_file(body);
  try {
    return SolverOptions::from_json(json::parse(body));
  } catch (const json::exception& e) {
    throw usage_error(std::string("--solver-opts: ") + e.what());
  }
}

void cmd_prior(const PriorArgs& a, std::size_t threads, std::ostream& out) {
  const auto kind = parse_prior_kind(a.kind);
  if (kind == PriorKind::Unconstrained && a.confusion.empty()) {
    throw usage_error("--kind unconstrained requires --confusion");
  }
  if (a.radius < 0) throw usage_error("--radius must be >= 0");
  const auto opts = parse_solver_options(a.solver_opts);
  const auto manifest = load_manifest(a.manifest);
  const auto records = require_split(manifest, Split::Evaluation);
  const auto& labels = manifest.labels;

  PriorBank bank;
  bank.kind = kind;
  for (const auto* r : records) bank.ids.push_back(r->id);

  switch (kind) {
    case PriorKind::Uniform:
      bank.priors.assign(records.size(), uniform_prior(labels));
      break;
    case PriorKind::Global:
      bank.priors.assign(records.size(), global_prior(manifest, Split::Estimation));
      break;
    case PriorKind::Binary:
    case PriorKind::Histogram: {
      std::vector<std::optional<Prior>> rows(records.size());
      parallel_for(records.size(), threads, [&](std::size_t i) {
        const auto gt = load_ground_truth(manifest, *records[i]);
        rows[i] = kind == PriorKind::Binary ? binary_prior(gt, labels) : histogram_prior(gt, labels);
      });
      for (auto& r : rows) bank.priors.push_back(std::move(*r));
      break;
    }
    case PriorKind::Unconstrained: {
      const auto confusion = load_confusion(a.confusion);
      if (confusion.size() != labels.size()) {
        throw data_error("confusion size does not match the label set");
      }
      std::vector<std::optional<SolverResult>> results(records.size());
      parallel_for(records.size(), threads, [&](std::size_t i) {
        const auto img = load_image(manifest, *records[i]);
        const auto mask = a.exclude_borders ? border_mask(img.gt, a.radius)
                                            : PixelMask::full(img.gt.height(), img.gt.width());
        const auto samples = collect_samples(img.probs, img.gt, mask, labels, a.max_samples,
                                             derive_seed(a.seed, {i}));
        if (samples.empty()) {
          throw data_error("record '" + records[i]->id + "' has no usable sites for the solver");
        }
        results[i] = solve_unconstrained_prior(confusion, samples, opts);
      });
      json losses = json::array(), hist = json::array(), uni = json::array(),
           iters = json::array();
      for (auto& r : results) {
        losses.push_back(r->loss);
        hist.push_back(r->histogram_loss);
        uni.push_back(r->uniform_loss);
        iters.push_back(r->iterations);
        bank.priors.push_back(r->prior);
      }
      auto solver = opts.to_json();
      solver["exclude_borders"] = a.exclude_borders;
      solver["radius"] = a.radius;
      solver["max_samples"] = a.max_samples;
      solver["seed"] = a.seed;
      solver["losses"] = losses;
      solver["histogram_losses"] = hist;
      solver["uniform_losses"] = uni;
      solver["iterations"] = iters;
      bank.solver = solver;
      break;
    }
  }
  ensure_parent(a.out);
  save_prior_bank(a.out, bank);
  out << "prior: " << to_string(kind) << " for " << records.size() << " images -> " << a.out
      << "\n";
}

// ---------------------------------------------------------------- refine

struct RefinedImage {
  LabelMap pred;
  std::optional<ProbabilityMap> probs;
};

void write_refined(const fs::path& out_dir, const std::vector<const ManifestRecord*>& records,
                   const std::vector<std::optional<RefinedImage>>& results) {
  ensure_dir(out_dir);
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (results[i]->probs) store_tensor(refined_path(out_dir, records[i]->id), results[i]->probs->to_tensor());
    store_tensor(pred_path(out_dir, records[i]->id), results[i]->pred.to_tensor());
  }
}

void check_bank(const PriorBank& bank, const std::vector<const ManifestRecord*>& records,
                std::size_t n) {
  for (const auto* r : records) {
    if (bank.for_image(r->id).size() != n) {
      throw data_error("prior for '" + r->id + "' does not match the label set");
    }
  }
}

void cmd_refine(const RefineArgs& a, std::size_t threads, std::ostream& out) {
  const auto manifest = load_manifest(a.manifest);
  const auto records = require_split(manifest, Split::Evaluation);
  const std::size_t n = manifest.labels.size();
  const auto confusion =
      a.confusion == "identity" ? ConfusionModel::identity(n) : load_confusion(a.confusion);
  if (confusion.size() != n) throw data_error("confusion size does not match the label set");
  const auto bank = load_prior_bank(a.priors);
  check_bank(bank, records, n);

  std::vector<std::optional<RefinedImage>> results(records.size());
  parallel_for(records.size(), threads, [&](std::size_t i) {
    const auto img = load_image(manifest, *records[i]);
    const auto R = build_refinement_matrix(confusion, bank.for_image(records[i]->id));
    auto refined = refine_map(R, img.probs);
    auto pred = argmax_labels(refined);
    results[i] = RefinedImage{std::move(pred), std::move(refined)};
  });
  write_refined(a.out, records, results);
  out << "refine: " << records.size() << " images -> " << a.out << "\n";
}

void cmd_labelbank(const RefineArgs& a, std::size_t threads, std::ostream& out) {
  const auto manifest = load_manifest(a.manifest);
  const auto records = require_split(manifest, Split::Evaluation);
  const auto bank = load_prior_bank(a.priors);
  check_bank(bank, records, manifest.labels.size());

  std::vector<std::optional<RefinedImage>> results(records.size());
  parallel_for(records.size(), threads, [&](std::size_t i) {
    const auto img = load_image(manifest, *records[i]);
    const auto support = bank.for_image(records[i]->id).support();
    auto masked = labelbank_mask(img.probs, std::set<Label>(support.begin(), support.end()));
    auto pred = argmax_labels(masked);
    results[i] = RefinedImage{std::move(pred), std::move(masked)};
  });
  write_refined(a.out, records, results);
  out << "labelbank: " << records.size() << " images -> " << a.out << "\n";
}

// ---------------------------------------------------------------- eval

void cmd_eval(const EvalArgs& a, std::size_t threads, std::ostream& out) {
  if (a.radius < 0) throw usage_error("--radius must be >= 0");
  const auto manifest = load_manifest(a.manifest);
  const auto records = require_split(manifest, Split::Evaluation);
  const auto& labels = manifest.labels;

  std::vector<std::optional<EvalTally>> tallies(records.size());
  parallel_for(records.size(), threads, [&](std::size_t i) {
    const auto gt = load_ground_truth(manifest, *records[i]);
    const auto pred = LabelMap::from_tensor(load_tensor(pred_path(a.pred_dir, records[i]->id)));
    EvalTally t(labels.size());
    if (a.exclude_borders) {
      const auto mask = border_mask(gt, a.radius);
      t.add(pred, gt, labels, &mask);
    } else {
      t.add(pred, gt, labels);
    }
    tallies[i] = std::move(t);
  });
  EvalTally total(labels.size());
  for (const auto& t : tallies) total.merge(*t);
  const auto report = EvalReport::from_tally(total);
  ensure_parent(a.out);
  write_text_file(a.out, report.to_json());
  out << "eval: pixel_accuracy " << report.pixel_accuracy << ", mean_iou " << report.mean_iou
      << " over " << report.n_pixels_scored << " pixels -> " << a.out << "\n";
}

// ---------------------------------------------------------------- render

void cmd_render(const RenderArgs& a, std::ostream& out) {
  if (!(a.gamma > 0.0)) throw usage_error("--gamma must be > 0");
  if (a.block == 0) throw usage_error("--block must be >= 1");
  const auto matrix = tensor_to_matrix(load_tensor(a.matrix));
  const auto bytes = encode_matrix_heatmap(matrix, a.gamma, a.block);
  ensure_parent(a.out);
  write_file_bytes(a.out, bytes);
  out << "render: " << matrix.size() << "x" << matrix.size() << " -> " << a.out << "\n";
}

// ---------------------------------------------------------------- synth

void cmd_synth(const SynthArgs& a, std::size_t threads, std::ostream& out) {
  json doc;
  try {
    doc = json::parse(read_text_file(a.spec));
  } catch (const json::exception& e) {
    throw usage_error(a.spec + ": " + e.what());
  }
  const auto spec = SynthSpec::from_json(doc);
  const auto manifest = generate_dataset(spec, a.out_dir, threads);
  out << "synth: " << manifest.records.size() << " images -> " << a.out_dir << "\n";
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Usage: return kUsage;
    case ErrorKind::Io: return kIo;
    case ErrorKind::Data:
    case ErrorKind::Internal: return kData;
  }
  return kData;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"conflens: confusion-aware refinement of segmentation label probabilities"};
  app.require_subcommand(1);
  std::optional<std::size_t> threads;
  auto add_threads = [&](CLI::App* sub) {
    sub->add_option("--threads", threads, "worker cap (default: CONFLENS_THREADS or all cores)");
  };

  ConfusionArgs conf;
  auto* c = app.add_subcommand("confusion", "estimate P(C=c|l) from the estimation split");
  c->add_option("manifest", conf.manifest, "dataset manifest")->required();
  c->add_option("--radius", conf.radius, "border dilation radius (pixels)")->capture_default_str();
  c->add_option("--floor", conf.floor, "value substituted for zero counts")->capture_default_str();
  c->add_option("--out", conf.out, "output SEGT path (sidecar: <out>.json)")->required();
  add_threads(c);

  PriorArgs pri;
  auto* p = app.add_subcommand("prior", "build per-image priors for the evaluation split");
  p->add_option("manifest", pri.manifest, "dataset manifest")->required();
  p->add_option("--kind", pri.kind, "uniform|global|binary|histogram|unconstrained")->required();
  p->add_option("--confusion", pri.confusion, "confusion SEGT (unconstrained only)");
  p->add_option("--solver-opts", pri.solver_opts, "solver options as inline JSON or a JSON file");
  p->add_flag("--exclude-borders", pri.exclude_borders, "drop border sites from solver samples");
  p->add_option("--radius", pri.radius, "border radius for --exclude-borders")->capture_default_str();
  p->add_option("--max-samples", pri.max_samples, "solver sites per image")->capture_default_str();
  p->add_option("--seed", pri.seed, "subsampling seed")->capture_default_str();
  p->add_option("--out", pri.out, "output SEGT path (sidecar: <out>.json)")->required();
  add_threads(p);

  RefineArgs ref;
  auto* r = app.add_subcommand("refine", "apply R = f(confusion, prior) to every evaluation image");
  r->add_option("manifest", ref.manifest, "dataset manifest")->required();
  r->add_option("--confusion", ref.confusion, "confusion SEGT, or 'identity'")->required();
  r->add_option("--priors", ref.priors, "prior bank SEGT")->required();
  r->add_option("--out", ref.out, "output directory")->required();
  add_threads(r);

  RefineArgs lb;
  auto* l = app.add_subcommand("labelbank", "mask outputs to each image's prior support");
  l->add_option("manifest", lb.manifest, "dataset manifest")->required();
  l->add_option("--priors", lb.priors, "prior bank SEGT (support = present classes)")->required();
  l->add_option("--out", lb.out, "output directory")->required();
  add_threads(l);

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "pixel accuracy and mean IoU over the evaluation split");
  e->add_option("--pred-dir", ev.pred_dir, "directory of <id>.pred.segt files")->required();
  e->add_option("--manifest", ev.manifest, "dataset manifest")->required();
  e->add_flag("--exclude-borders", ev.exclude_borders, "skip pixels near ground-truth borders");
  e->add_option("--radius", ev.radius, "border radius for --exclude-borders")->capture_default_str();
  e->add_option("--out", ev.out, "report JSON path")->required();
  add_threads(e);

  RenderArgs ren;
  auto* h = app.add_subcommand("render", "write a matrix as a grayscale PGM heatmap");
  h->add_option("--matrix", ren.matrix, "square 2-D f32 SEGT")->required();
  h->add_option("--out", ren.out, "output PGM path")->required();
  h->add_option("--gamma", ren.gamma, "intensity exponent")->capture_default_str();
  h->add_option("--block", ren.block, "pixels per matrix cell")->capture_default_str();

  SynthArgs syn;
  auto* s = app.add_subcommand("synth", "generate a synthetic dataset from a JSON spec");
  s->add_option("--spec", syn.spec, "synth spec JSON")->required();
  s->add_option("--out-dir", syn.out_dir, "output directory")->required();
  add_threads(s);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& pe) {
    err << "conflens: " << pe.what() << "\n";
    return kUsage;
  }

  try {
    const std::size_t workers = resolve_thread_count(threads);
    if (c->parsed()) cmd_confusion(conf, workers, out);
    else if (p->parsed()) cmd_prior(pri, workers, out);
    else if (r->parsed()) cmd_refine(ref, workers, out);
    else if (l->parsed()) cmd_labelbank(lb, workers, out);
    else if (e->parsed()) cmd_eval(ev, workers, out);
    else if (h->parsed()) cmd_render(ren, out);
    else if (s->parsed()) cmd_synth(syn, workers, out);
    return kOk;
  } catch (const Error& ex) {
    err << "conflens: " << ex.what() << "\n";
    return exit_code_for(ex.kind());
  } catch (const std::exception& ex) {
    err << "conflens: " << ex.what() << "\n";
    return kData;
  }
}

}  // namespace conflens::cli
