// plateforge: corpus synthesis and evaluation from the command line.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "plateforge/augmentation.hpp"
#include "plateforge/corpus.hpp"
#include "plateforge/ganprep.hpp"
#include "plateforge/geometry.hpp"
#include "plateforge/harness.hpp"
#include "plateforge/image.hpp"
#include "plateforge/jsonl.hpp"
#include "plateforge/parallel.hpp"
#include "plateforge/synth_permute.hpp"
#include "plateforge/synth_template.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace plateforge;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  bool seed_given = false;
  unsigned workers = 1;
  bool workers_given = false;
  std::optional<fs::path> config;
  bool quiet = false;
};

void silent(std::string_view) {}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << text;
}

// Relative image paths are stored relative to the file holding them; moving
// annotations into another file rewrites them.
void rebase_image_path(LpAnnotation& a, const fs::path& from_file, const fs::path& to_file) {
  if (!a.image_path) return;
  const fs::path p(*a.image_path);
  if (p.is_absolute()) return;
  const fs::path abs = fs::absolute(from_file).parent_path() / p;
  a.image_path = abs.lexically_normal().lexically_relative(fs::absolute(to_file).parent_path().lexically_normal()).generic_string();
}

std::vector<LayoutSpec> specs_from(const std::optional<fs::path>& dir, GlyphAtlas& atlas) {
  if (dir) return load_layout_specs(*dir, &atlas);
  atlas = builtin_glyph_atlas();
  return builtin_layout_specs();
}

ClassPalette palette_for(const std::optional<fs::path>& file, const std::vector<LayoutSpec>& specs,
                         std::uint64_t seed, double black_exclusion) {
  if (file) return palette_from_json(read_json(*file));
  std::vector<LayoutClass> layouts;
  for (const auto& s : specs) layouts.push_back(s.layout);
  for (const auto& l : builtin_layouts())
    if (std::find(layouts.begin(), layouts.end(), l) == layouts.end()) layouts.push_back(l);
  return generate_palette(palette_keys(layouts), seed, black_exclusion);
}

ReportFormat format_for(const std::string& format, const fs::path& out) {
  if (!format.empty()) return report_format_from_string(format);
  const auto ext = out.extension().string();
  if (ext == ".csv") return ReportFormat::Csv;
  if (ext == ".md") return ReportFormat::Markdown;
  return ReportFormat::Json;
}

ExperimentConfig experiment_config(const Globals& g) {
  if (!g.config) throw Error(Errc::InvalidArgument, "--config <experiment.json> is required");
  auto cfg = load_experiment_config(*g.config);
  if (g.workers_given) cfg.workers = g.workers;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"plateforge: synthetic license-plate corpora and ALPR evaluation"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  auto* seed_opt = app.add_option("--seed", g.seed, "Master seed");
  auto* workers_opt = app.add_option("--workers", g.workers, "Worker threads")->check(CLI::PositiveNumber);
  std::string config_path;
  app.add_option("--config", config_path, "Config file for the subcommand");
  app.add_flag("--quiet", g.quiet, "Suppress warnings");

  std::function<void()> action;

  // split
  std::vector<std::string> split_inputs;
  std::string split_out;
  std::size_t balance_target = 0;
  bool allow_downsample = false;
  double train_fraction = 1.0;
  auto* split = app.add_subcommand("split", "Assign annotations to train/val/test (--config: split protocol)");
  split->add_option("--annotations", split_inputs, "Annotation JSONL files")->required();
  split->add_option("--out", split_out, "Output manifest")->required();
  split->add_option("--balance", balance_target, "Duplicate train entries up to this many per dataset");
  split->add_flag("--allow-downsample", allow_downsample, "Subsample datasets above the balance target");
  split->add_option("--train-fraction", train_fraction, "Keep this nested fraction of each train partition")
      ->check(CLI::Range(0.0, 1.0));
  split->callback([&] {
    action = [&] {
      if (!g.config) throw Error(Errc::InvalidArgument, "split needs --config <protocol.json>");
      const auto protocol = load_split_protocol(*g.config);
      std::vector<LpAnnotation> anns;
      for (const auto& f : split_inputs)
        for (auto a : load_annotations(f)) {
          rebase_image_path(a, f, split_out);
          anns.push_back(std::move(a));
        }
      auto manifest = apply_split(anns, protocol);
      if (train_fraction < 1.0) manifest = reduce_training_fraction(manifest, train_fraction, g.seed);
      if (balance_target)
        manifest = balance_by_augmentation(manifest, balance_target, AugmentationConfig::defaults(g.seed),
                                           allow_downsample);
      save_manifest(split_out, manifest);
      std::cout << "split " << anns.size() << " plates into " << split_out << "\n";
    };
  });

  // init-specs
  std::string specs_out;
  auto* init = app.add_subcommand("init-specs", "Write the built-in layout specs to a directory for editing");
  init->add_option("--out", specs_out, "Output directory")->required();
  init->callback([&] {
    action = [&] {
      save_layout_specs(specs_out, builtin_layout_specs(), builtin_glyph_atlas());
      std::cout << "wrote " << builtin_layout_specs().size() << " layout specs to " << specs_out << "\n";
    };
  });

  // gen-templates
  std::size_t tpl_total = 0;
  std::string tpl_out, tpl_dataset = "synthetic-template";
  std::optional<std::string> specs_dir;
  bool no_augment = false;
  auto* tpl = app.add_subcommand("gen-templates", "Render template plates (--config: augmentation JSON)");
  tpl->add_option("--total", tpl_total, "Plates to render")->required();
  tpl->add_option("--out", tpl_out, "Output directory")->required();
  tpl->add_option("--specs", specs_dir, "Layout spec directory (default: built-in layouts)");
  tpl->add_option("--dataset", tpl_dataset, "Dataset id of the generated plates");
  tpl->add_flag("--no-augment", no_augment, "Skip augmentation");
  tpl->callback([&] {
    action = [&] {
      GlyphAtlas atlas;
      const auto specs = specs_from(specs_dir ? std::optional<fs::path>(*specs_dir) : std::nullopt, atlas);
      TemplateCorpusOptions opt;
      opt.total = tpl_total;
      opt.workers = g.workers;
      opt.dataset_id = tpl_dataset;
      opt.augmentation = no_augment ? AugmentationConfig::identity(g.seed) : AugmentationConfig::defaults(g.seed);
      if (g.config) {
        opt.augmentation = augmentation_from_json(read_json(*g.config));
        if (g.seed_given) opt.augmentation.master_seed = g.seed;
      }
      const auto m = generate_template_corpus(specs, atlas, opt, tpl_out);
      std::cout << "rendered " << m.entries.size() << " template plates into " << tpl_out << "\n";
    };
  });

  // gen-permute
  std::string perm_manifest, perm_out, perm_dataset = "synthetic-permuted";
  std::size_t perm_total = 0;
  auto* perm = app.add_subcommand("gen-permute", "Permute character patches of train plates (--config: policy JSON)");
  perm->add_option("--manifest", perm_manifest, "Source manifest")->required();
  perm->add_option("--total", perm_total, "Plates to generate")->required();
  perm->add_option("--out", perm_out, "Output directory")->required();
  perm->add_option("--dataset", perm_dataset, "Dataset id of the generated plates");
  perm->callback([&] {
    action = [&] {
      const PermutationPolicy policy = g.config ? permutation_policy_from_json(read_json(*g.config)) : PermutationPolicy{};
      PermutedCorpusOptions opt;
      opt.total = perm_total;
      opt.seed = g.seed;
      opt.workers = g.workers;
      opt.dataset_id = perm_dataset;
      const auto m = generate_permuted_corpus(load_manifest(perm_manifest), perm_manifest, policy, opt, perm_out);
      std::cout << "generated " << m.entries.size() << " permuted plates into " << perm_out << "\n";
    };
  });

  // Shared mask options.
  std::optional<std::string> palette_file;
  double black_exclusion = 20.0;
  PairOptions pair_opt;
  auto mask_options = [&](CLI::App* sub) {
    sub->add_option("--palette", palette_file, "Palette JSON (default: generated from --seed)");
    sub->add_option("--black-exclusion", black_exclusion, "Minimum Lab distance of generated colors from black");
    sub->add_option("--width", pair_opt.width, "Canvas width")->check(CLI::PositiveNumber);
    sub->add_option("--height", pair_opt.height, "Canvas height")->check(CLI::PositiveNumber);
    sub->add_option("--margin", pair_opt.margin, "Crop margin around the plate box")->check(CLI::Range(0.0, 1.0));
  };

  // gen-masks
  std::size_t mask_total = 0;
  std::string mask_out;
  auto* masks = app.add_subcommand("gen-masks", "Sample segmentation masks for a trained generator");
  masks->add_option("--total", mask_total, "Masks to sample")->required();
  masks->add_option("--out", mask_out, "Output directory")->required();
  masks->add_option("--specs", specs_dir, "Layout spec directory (default: built-in layouts)");
  mask_options(masks);
  masks->callback([&] {
    action = [&] {
      GlyphAtlas atlas;
      const auto specs = specs_from(specs_dir ? std::optional<fs::path>(*specs_dir) : std::nullopt, atlas);
      const auto palette = palette_for(palette_file ? std::optional<fs::path>(*palette_file) : std::nullopt, specs,
                                       g.seed, black_exclusion);
      pair_opt.workers = g.workers;
      const auto n = sample_generation_masks(specs, palette, mask_total, g.seed, mask_out, pair_opt);
      write_text(fs::path(mask_out) / "palette.json", to_json(palette).dump(2) + "\n");
      std::cout << "sampled " << n << " masks into " << mask_out << "\n";
    };
  });

  // export-pairs
  std::string pairs_manifest, pairs_out;
  auto* pairs = app.add_subcommand("export-pairs", "Write side-by-side mask/plate training pairs");
  pairs->add_option("--manifest", pairs_manifest, "Manifest with char boxes")->required();
  pairs->add_option("--out", pairs_out, "Output directory")->required();
  mask_options(pairs);
  pairs->callback([&] {
    action = [&] {
      const auto palette = palette_for(palette_file ? std::optional<fs::path>(*palette_file) : std::nullopt,
                                       builtin_layout_specs(), g.seed, black_exclusion);
      pair_opt.workers = g.workers;
      const auto n = export_pairs(load_manifest(pairs_manifest), pairs_manifest, palette, pairs_out, pair_opt);
      write_text(fs::path(pairs_out) / "palette.json", to_json(palette).dump(2) + "\n");
      std::cout << "exported " << n << " pairs into " << pairs_out << "\n";
    };
  });

  // filter-gan
  std::string cand_file, cand_out;
  std::size_t top_n = 0;
  bool allow_mismatch = false;
  auto* filt = app.add_subcommand("filter-gan", "Keep the N most confident generated plates per layout");
  filt->add_option("--candidates", cand_file, "Candidate JSONL")->required();
  filt->add_option("--n", top_n, "Plates kept per layout")->required();
  filt->add_option("--out", cand_out, "Output JSONL")->required();
  filt->add_flag("--allow-mismatch", allow_mismatch, "Keep candidates whose OCR text differs from the intended text");
  filt->callback([&] {
    action = [&] {
      const auto kept = filter_top_n(load_gan_candidates(cand_file), top_n, !allow_mismatch);
      save_gan_candidates(cand_out, kept);
      std::cout << "kept " << kept.size() << " candidates in " << cand_out << "\n";
    };
  });

  // rectify
  std::string rect_manifest, rect_out, rect_split = "test";
  auto* rect = app.add_subcommand("rectify", "Warp every annotated plate to a frontal view");
  rect->add_option("--manifest", rect_manifest, "Manifest")->required();
  rect->add_option("--out", rect_out, "Output directory")->required();
  rect->add_option("--split", rect_split, "Split to rectify (train, val, test or all)");
  rect->callback([&] {
    action = [&] {
      const auto manifest = load_manifest(rect_manifest);
      std::vector<const ManifestEntry*> entries;
      for (const auto& e : manifest.entries)
        if (rect_split == "all" || to_string(e.split) == rect_split) entries.push_back(&e);
      std::vector<json> rows(entries.size());
      const fs::path out(rect_out);
      fs::create_directories(out / "rectified");
      parallel_for(entries.size(), g.workers, [&](std::size_t i) {
        const auto& ann = entries[i]->annotation;
        const Image img = to_rgb(read_image(resolve_image_path(rect_manifest, ann)));
        const Image plate = rectify(img, ann.corners);
        char name[32];
        std::snprintf(name, sizeof name, "plate_%06zu.png", i);
        write_png(out / "rectified" / name, plate);
        rows[i] = {{"image", std::string("rectified/") + name},
                   {"source", ann.key()},
                   {"text", ann.text},
                   {"width", plate.width()},
                   {"height", plate.height()}};
      });
      write_jsonl(out / "index.jsonl", rows);
      std::cout << "rectified " << rows.size() << " plates into " << rect_out << "\n";
    };
  });

  // eval / ablation / reduced-data
  std::string report_out, report_format, eval_kind;
  auto report_options = [&](CLI::App* sub) {
    sub->add_option("--out", report_out, "Report file")->required();
    sub->add_option("--format", report_format, "csv, markdown or json (default: from the extension)");
  };
  auto run_and_emit = [&](std::optional<TableKind> expect) {
    auto cfg = experiment_config(g);
    if (!eval_kind.empty()) cfg.kind = table_kind_from_string(eval_kind);
    if (expect && cfg.kind != *expect)
      throw Error(Errc::InvalidArgument, "config kind is '" + std::string(to_string(cfg.kind)) + "'");
    if (!expect && (cfg.kind == TableKind::Ablation || cfg.kind == TableKind::ReducedData))
      throw Error(Errc::InvalidArgument, "use the " + std::string(to_string(cfg.kind)) + " subcommand");
    const auto report = run_experiment(cfg);
    emit_report(report, format_for(report_format, report_out), report_out);
    std::cout << "wrote " << to_string(cfg.kind) << " report (" << report.rows.size() << " rows) to " << report_out
              << "\n";
  };
  auto* eval = app.add_subcommand("eval", "Score prediction files (--config: experiment JSON)");
  eval->add_option("--kind", eval_kind, "Override the table kind")
      ->check(CLI::IsMember({"intra", "cross", "detection", "corner", "speed-accuracy"}));
  report_options(eval);
  eval->callback([&] { action = [&] { run_and_emit(std::nullopt); }; });
  auto* abl = app.add_subcommand("ablation", "Training-source ablation table (--config: experiment JSON)");
  report_options(abl);
  abl->callback([&] { action = [&] { run_and_emit(TableKind::Ablation); }; });
  auto* red = app.add_subcommand("reduced-data", "Reduced training data grid (--config: experiment JSON)");
  report_options(red);
  red->callback([&] { action = [&] { run_and_emit(TableKind::ReducedData); }; });

  // report
  std::string report_in;
  auto* rep = app.add_subcommand("report", "Re-render a JSON report as csv, markdown or json");
  rep->add_option("--input", report_in, "JSON report")->required();
  report_options(rep);
  rep->callback([&] {
    action = [&] {
      const auto report = report_from_json(read_json(report_in));
      emit_report(report, format_for(report_format, report_out), report_out);
      std::cout << "wrote " << report_out << "\n";
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  g.seed_given = seed_opt->count() > 0;
  g.workers_given = workers_opt->count() > 0;
  if (!config_path.empty()) g.config = config_path;
  if (g.quiet) set_warning_sink(&silent);

  try {
    action();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
