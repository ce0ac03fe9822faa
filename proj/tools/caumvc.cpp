#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "caumvc/pipeline.hpp"

namespace fs = std::filesystem;
using namespace caumvc;

namespace {

template <typename T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = detail::trim(item);
    if (item.empty()) continue;
    out.push_back(detail::parse_number<T>(what, item, 0));
  }
  if (out.empty()) throw ArgumentError(std::string("empty list for --") + what);
  return out;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

void write_assignments(const fs::path& path, const ClusterAssignment& a) { write_label_file(path, a.hard); }

std::string report_row(const MetricReport& r) {
  return format_double(r.acc) + "," + format_double(r.nmi) + "," + format_double(r.pur);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Causal multi-view clustering on partially aligned data"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a labeled Gaussian-mixture multi-view dataset");
  SyntheticSpec spec;
  std::string synth_out, synth_dims = "10,10,10";
  synth->add_option("--out", synth_out)->required();
  synth->add_option("--n", spec.n);
  synth->add_option("--k", spec.k);
  synth->add_option("--views", spec.views);
  synth->add_option("--dims", synth_dims);
  synth->add_option("--separation", spec.separation);
  synth->add_option("--noise", spec.noise);
  synth->add_option("--seed", spec.seed);

  // inject
  auto* inject = app.add_subcommand("inject", "shuffle cross-view correspondences for a fraction of samples");
  std::string inj_data, inj_out;
  double inj_ratio = 0.5;
  std::uint64_t inj_seed = 0;
  inject->add_option("--data", inj_data)->required();
  inject->add_option("--out", inj_out)->required();
  inject->add_option("--ratio", inj_ratio)->required();
  inject->add_option("--seed", inj_seed);

  // train
  auto* trn = app.add_subcommand("train", "pretrain + joint training, writes checkpoint and history");
  std::string tr_data, tr_config, tr_out, tr_ablation;
  trn->add_option("--data", tr_data)->required();
  trn->add_option("--config", tr_config)->required();
  trn->add_option("--out", tr_out)->required();
  trn->add_option("--ablation", tr_ablation)->check(CLI::IsMember({"full", "no_cau", "no_con", "no_cau_con"}));

  // infer
  auto* inf = app.add_subcommand("infer", "post-intervention clustering with a trained checkpoint");
  std::string inf_ck, inf_data, inf_out;
  inf->add_option("--checkpoint", inf_ck)->required();
  inf->add_option("--data", inf_data)->required();
  inf->add_option("--out", inf_out)->required();

  // eval
  auto* ev = app.add_subcommand("eval", "score an assignment file against labels");
  std::string ev_pred, ev_labels;
  ev->add_option("--pred", ev_pred)->required();
  ev->add_option("--labels", ev_labels)->required();

  // sweep
  auto* sw = app.add_subcommand("sweep", "metrics across aligned ratios");
  std::string sw_data, sw_config, sw_ratios, sw_out;
  sw->add_option("--data", sw_data)->required();
  sw->add_option("--config", sw_config)->required();
  sw->add_option("--ratios", sw_ratios)->required();
  sw->add_option("--out", sw_out)->required();

  // ablate
  auto* ab = app.add_subcommand("ablate", "full / no_cau / no_con / no_cau_con on a shared misaligned split");
  std::string ab_data, ab_config, ab_out;
  double ab_ratio = 0.5;
  ab->add_option("--data", ab_data)->required();
  ab->add_option("--config", ab_config)->required();
  ab->add_option("--out", ab_out)->required();
  ab->add_option("--ratio", ab_ratio, "aligned ratio of the evaluation split")->capture_default_str();

  // export-embeddings
  auto* ex = app.add_subcommand("export-embeddings", "write [e_va | e_in | label] rows for plotting");
  std::string ex_ck, ex_data, ex_out;
  ex->add_option("--checkpoint", ex_ck)->required();
  ex->add_option("--data", ex_data)->required();
  ex->add_option("--out", ex_out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      spec.dims = parse_list<std::size_t>(synth_dims, "dims");
      const MultiViewDataset ds = make_synthetic(spec);
      save_dataset(ds, synth_out);
      std::cout << "wrote " << ds.num_samples() << " samples x " << ds.num_views() << " views to " << synth_out << '\n';
    } else if (*inject) {
      const MultiViewDataset ds = load_dataset(inj_data);
      const auto [shifted, map] = inject_misalignment(ds, inj_ratio, inj_seed);
      save_dataset(shifted, inj_out);
      save_alignment(map, fs::path(inj_out) / "alignment.json");
      std::cout << "aligned " << aligned_count(ds.num_samples(), inj_ratio) << " of " << ds.num_samples() << '\n';
    } else if (*trn) {
      TrainConfig cfg = load_config(tr_config);
      if (!tr_ablation.empty()) cfg.ablation = parse_ablation(tr_ablation);
      const MultiViewDataset ds = load_dataset(tr_data);
      const TrainResult run = train(ds, cfg);
      ensure_dir(tr_out);
      const fs::path out(tr_out);
      save_checkpoint({run.config, run.model}, out / "checkpoint.bin");
      write_text(out / "history.csv", format_history(run.history));
      write_assignments(out / "assignments.txt", run.assignment);
      if (ds.labels) {
        const MetricReport r = evaluate(run.assignment, ds.labels);
        write_metrics_file(out / "metrics.txt", r, run.config);
        std::cout << format_metrics(r);
      } else {
        write_text(out / "metrics.txt", format_config(run.config));
      }
    } else if (*inf) {
      const Checkpoint ck = load_checkpoint(inf_ck);
      const MultiViewDataset ds = load_dataset(inf_data);
      const ClusterAssignment a = infer(ck, ds);
      ensure_dir(inf_out);
      write_assignments(fs::path(inf_out) / "assignments.txt", a);
      if (ds.labels) {
        const MetricReport r = evaluate(a, ds.labels);
        write_metrics_file(fs::path(inf_out) / "metrics.txt", r, ck.config);
        std::cout << format_metrics(r);
      }
    } else if (*ev) {
      const std::vector<int> pred = read_label_file(ev_pred);
      const std::vector<int> truth = read_label_file(ev_labels);
      std::cout << format_metrics(metric_report(truth, pred));
    } else if (*sw) {
      const TrainConfig cfg = load_config(sw_config);
      const auto ratios = parse_list<double>(sw_ratios, "ratios");
      const auto rows = ratio_sweep(load_dataset(sw_data), ratios, cfg);
      std::ostringstream os;
      os << "ratio,acc,nmi,pur\n";
      for (const auto& r : rows) os << format_double(r.ratio) << ',' << report_row(r.report) << '\n';
      ensure_dir(sw_out);
      write_text(fs::path(sw_out) / "sweep.csv", os.str());
      std::cout << os.str();
    } else if (*ab) {
      const TrainConfig cfg = load_config(ab_config);
      const auto rows = ablate(load_dataset(ab_data), cfg, ab_ratio);
      std::ostringstream os;
      os << "mode,acc,nmi,pur\n";
      for (const auto& r : rows) os << ablation_name(r.mode) << ',' << report_row(r.report) << '\n';
      ensure_dir(ab_out);
      write_text(fs::path(ab_out) / "ablation.csv", os.str());
      std::cout << os.str();
    } else if (*ex) {
      export_embeddings(load_checkpoint(ex_ck), load_dataset(ex_data), ex_out);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
