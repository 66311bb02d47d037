#include <chrono>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "attnlab/approximator.hpp"
#include "attnlab/attention.hpp"
#include "attnlab/errors.hpp"
#include "attnlab/memorizer.hpp"
#include "attnlab/report.hpp"
#include "attnlab/sequences.hpp"
#include "attnlab/serialize.hpp"
#include "attnlab/suites.hpp"
#include "attnlab/training.hpp"

namespace {

using namespace attnlab;
using Clock = std::chrono::steady_clock;

LabeledDataset load_any(const std::string& path) {
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".txt") == 0) {
    return load_dataset_text(path);
  }
  return load_dataset_json(path);
}

void save_any(const LabeledDataset& ds, const std::string& path) {
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".txt") == 0) {
    save_dataset_text(ds, path);
  } else {
    save_dataset_json(ds, path);
  }
}

CheckResult simple_check(const std::string& name, bool passed, double measured, double bound,
                         const std::string& comparison, const std::string& bound_ref,
                         const std::string& scale = "linear", const std::string& note = "") {
  CheckResult c;
  c.name = name;
  c.passed = passed;
  c.measured = measured;
  c.bound = bound;
  c.comparison = comparison;
  c.bound_ref = bound_ref;
  c.scale = scale;
  c.note = note;
  return c;
}

std::vector<CheckResult> separation_checks(const SeparationReport& rep,
                                           const SeparationParams& p) {
  return {
      simple_check("token-norms-above-inner-shell", rep.min_norm > p.r_min, rep.min_norm,
                   p.r_min, "measured > bound", "token-shell-constraint"),
      simple_check("token-norms-below-outer-shell", rep.max_norm < p.r_max, rep.max_norm,
                   p.r_max, "measured < bound", "token-shell-constraint"),
      simple_check("distinct-token-spacing", rep.min_pair_dist > p.eps, rep.min_pair_dist,
                   p.eps, "measured > bound", "token-spacing-constraint", "linear",
                   std::to_string(rep.violations.size()) + " violations"),
  };
}

std::vector<CheckResult> cm_checks(const CMReport& rep) {
  const double log_gap =
      rep.min_distinct_gap > 0 ? std::log(rep.min_distinct_gap)
                               : -std::numeric_limits<double>::infinity();
  return {
      simple_check("outputs-in-ball", rep.passes_cond1, rep.max_out_norm, rep.r_bound,
                   "measured < bound", "output-ball-bound"),
      simple_check("distinct-context-gap", rep.passes_cond2, log_gap, rep.delta_theory_log,
                   "measured > bound", "distinct-context-gap-formula", "log",
                   std::to_string(rep.pairs_checked) + " pairs, max |logit| " +
                       std::to_string(rep.max_abs_logit)),
  };
}

int finish(RunReport& rep, const std::string& out_path, Clock::time_point t0) {
  rep.wall_ms =
      std::chrono::duration_cast<std::chrono::duration<double, std::milli>>(Clock::now() - t0)
          .count();
  const nlohmann::ordered_json j = rep.to_json();
  std::cout << j.dump(2) << "\n";
  if (!out_path.empty()) write_json_file(j, out_path);
  return rep.all_passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"attnlab: rank-1 softmax attention constructions and their checks"};
  app.require_subcommand(1);
  int rc = 0;

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a separated token dataset");
  struct {
    std::string out;
    int n_seqs = 8, seq_len = 4, dim = 4, shared_vocab = 0, classes = 0;
    double r_min = 0.5, r_max = 1.0, eps = 0.1;
    bool allow_dups = false;
    std::uint64_t seed = 1;
    std::string report_out;
  } g;
  gen->add_option("--out", g.out, "Dataset path (.txt for text, else JSON)")->required();
  gen->add_option("--n-seqs", g.n_seqs, "Number of sequences");
  gen->add_option("--seq-len", g.seq_len, "Tokens per sequence");
  gen->add_option("--dim", g.dim, "Embedding dimension");
  gen->add_option("--r-min", g.r_min, "Inner shell radius");
  gen->add_option("--r-max", g.r_max, "Outer shell radius");
  gen->add_option("--eps", g.eps, "Minimum spacing between distinct tokens");
  gen->add_option("--shared-vocab", g.shared_vocab,
                  "Draw sequences from a shared pool of this many tokens (0 = fresh tokens)");
  gen->add_flag("--allow-dups", g.allow_dups,
                "Allow bitwise token reuse inside and across sequences");
  gen->add_option("--classes", g.classes, "Attach consistent random labels with this many classes");
  gen->add_option("--seed", g.seed, "RNG seed");
  gen->add_option("--report-out", g.report_out, "Write the JSON report here too");
  gen->callback([&]() {
    const auto t0 = Clock::now();
    const SeparationParams p{g.r_min, g.r_max, g.eps};
    LabeledDataset ds =
        g.shared_vocab > 0
            ? gen_shared_vocab_dataset(g.n_seqs, g.seq_len, g.dim, g.shared_vocab, p, g.seed)
            : gen_separated_dataset(g.n_seqs, g.seq_len, g.dim, p, !g.allow_dups, g.seed);
    if (g.classes > 0) assign_consistent_random_labels(ds, g.classes, g.seed + 1);
    save_any(ds, g.out);
    RunReport rep;
    rep.command = "gen-data";
    rep.seed = g.seed;
    rep.config = {{"out", g.out},           {"n_seqs", g.n_seqs},
                  {"seq_len", g.seq_len},   {"dim", g.dim},
                  {"r_min", g.r_min},       {"r_max", g.r_max},
                  {"eps", g.eps},           {"shared_vocab", g.shared_vocab},
                  {"allow_dups", g.allow_dups}, {"classes", g.classes}};
    rep.checks = separation_checks(check_separated(ds, p), p);
    rc = finish(rep, g.report_out, t0);
  });

  // check-sep
  auto* chk = app.add_subcommand("check-sep", "Check shell and spacing constraints of a dataset");
  struct {
    std::string in, out;
    double r_min = 0.5, r_max = 1.0, eps = 0.1;
  } c;
  chk->add_option("--in", c.in, "Dataset path")->required();
  chk->add_option("--r-min", c.r_min, "Inner shell radius");
  chk->add_option("--r-max", c.r_max, "Outer shell radius");
  chk->add_option("--eps", c.eps, "Minimum spacing between distinct tokens");
  chk->add_option("--report-out", c.out, "Write the JSON report here too");
  chk->callback([&]() {
    const auto t0 = Clock::now();
    const LabeledDataset ds = load_any(c.in);
    const SeparationParams p{c.r_min, c.r_max, c.eps};
    RunReport rep;
    rep.command = "check-sep";
    rep.seed = ds.seed;
    rep.config = {{"in", c.in}, {"r_min", c.r_min}, {"r_max", c.r_max}, {"eps", c.eps}};
    rep.checks = separation_checks(check_separated(ds, p), p);
    rc = finish(rep, c.out, t0);
  });

  // boltz-verify
  auto* bv = app.add_subcommand("boltz-verify",
                                "Verify the Boltzmann gap bound and derivative formulas");
  struct {
    int pairs = 1000, points = 10000;
    std::uint64_t seed = 1;
    std::string out;
  } b;
  bv->add_option("--pairs", b.pairs, "Randomized separated pairs for the gap bound");
  bv->add_option("--points", b.points, "Random points for the derivative checks");
  bv->add_option("--seed", b.seed, "RNG seed");
  bv->add_option("--report-out", b.out, "Write the JSON report here too");
  bv->callback([&]() {
    const auto t0 = Clock::now();
    if (b.pairs < 1 || b.points < 10) {
      throw std::invalid_argument("boltz-verify: need --pairs >= 1 and --points >= 10");
    }
    RunReport rep;
    rep.command = "boltz-verify";
    rep.seed = b.seed;
    rep.config = {{"pairs", b.pairs}, {"points", b.points}};
    rep.checks = run_boltz_separation_suite(b.seed, b.pairs);
    for (auto& chk2 : run_boltz_calculus_suite(b.seed + 1, b.points)) {
      rep.checks.push_back(chk2);
    }
    rc = finish(rep, b.out, t0);
  });

  // build-cm
  auto* bc = app.add_subcommand("build-cm", "Build a contextual map for a dataset and verify it");
  struct {
    std::string in, weights_out, out, mode = "scaled";
    double beta = 0.0, r_min = 0.5, r_max = 1.0, eps = 0.1;
    int s = 1;
    std::uint64_t seed = 1;
  } m;
  bc->add_option("--in", m.in, "Dataset path")->required();
  bc->add_option("--mode", m.mode, "Scale choice: closed-form or scaled (auto-tuned)")
      ->check(CLI::IsMember({"closed-form", "scaled"}));
  bc->add_option("--beta", m.beta, "Explicit scale for scaled mode (<= 0 tunes automatically)");
  bc->add_option("--s", m.s, "Inner width of the value/output factors");
  bc->add_option("--r-min", m.r_min, "Inner shell radius");
  bc->add_option("--r-max", m.r_max, "Outer shell radius");
  bc->add_option("--eps", m.eps, "Minimum spacing between distinct tokens");
  bc->add_option("--seed", m.seed, "RNG seed for the projection direction");
  bc->add_option("--weights-out", m.weights_out, "Save the attention factors as JSON");
  bc->add_option("--report-out", m.out, "Write the JSON report here too");
  bc->callback([&]() {
    const auto t0 = Clock::now();
    const LabeledDataset ds = load_any(m.in);
    const SeparationParams p{m.r_min, m.r_max, m.eps};
    const CMMode mode = m.mode == "closed-form" ? CMMode::closed_form : CMMode::scaled;
    const ContextualMap cm = build_contextual_map(ds, p, mode, m.beta, m.s, m.seed);
    if (!m.weights_out.empty()) write_json_file(attention_to_json(cm.w), m.weights_out);
    const CMReport rep_cm = verify_contextual_map(cm.w, ds, p);
    RunReport rep;
    rep.command = "build-cm";
    rep.seed = m.seed;
    rep.config = {{"in", m.in},     {"mode", m.mode}, {"beta", m.beta},
                  {"s", m.s},       {"r_min", m.r_min}, {"r_max", m.r_max},
                  {"eps", m.eps},   {"beta_used", cm.beta_used}};
    rep.checks = cm_checks(rep_cm);
    rc = finish(rep, m.out, t0);
  });

  // verify-cm
  auto* vc = app.add_subcommand("verify-cm", "Verify saved attention weights against a dataset");
  struct {
    std::string in, weights, out;
    double r_min = 0.5, r_max = 1.0, eps = 0.1;
  } v;
  vc->add_option("--in", v.in, "Dataset path")->required();
  vc->add_option("--weights", v.weights, "Attention factors JSON")->required();
  vc->add_option("--r-min", v.r_min, "Inner shell radius");
  vc->add_option("--r-max", v.r_max, "Outer shell radius");
  vc->add_option("--eps", v.eps, "Minimum spacing between distinct tokens");
  vc->add_option("--report-out", v.out, "Write the JSON report here too");
  vc->callback([&]() {
    const auto t0 = Clock::now();
    const LabeledDataset ds = load_any(v.in);
    const AttentionWeights w = attention_from_json(read_json_file(v.weights));
    const SeparationParams p{v.r_min, v.r_max, v.eps};
    const CMReport rep_cm = verify_contextual_map(w, ds, p);
    RunReport rep;
    rep.command = "verify-cm";
    rep.seed = ds.seed;
    rep.config = {{"in", v.in}, {"weights", v.weights}, {"r_min", v.r_min},
                  {"r_max", v.r_max}, {"eps", v.eps}};
    rep.checks = cm_checks(rep_cm);
    rc = finish(rep, v.out, t0);
  });

  // hardmax-demo
  auto* hd = app.add_subcommand("hardmax-demo",
                                "Show hardmax attention collapsing contexts softmax separates");
  struct {
    int dim = 3, trials = 100;
    std::uint64_t seed = 1;
    std::string out;
  } h;
  hd->add_option("--dim", h.dim, "Embedding dimension");
  hd->add_option("--trials", h.trials, "Random weight draws per head count");
  hd->add_option("--seed", h.seed, "RNG seed");
  hd->add_option("--report-out", h.out, "Write the JSON report here too");
  hd->callback([&]() {
    const auto t0 = Clock::now();
    const HardmaxDemoReport demo = hardmax_collision_demo(h.dim, h.seed, h.trials);
    double min_rate = 1.0;
    for (double r : demo.collision_rates) min_rate = std::min(min_rate, r);
    RunReport rep;
    rep.command = "hardmax-demo";
    rep.seed = h.seed;
    rep.config = {{"dim", h.dim}, {"trials", h.trials}};
    rep.checks = {
        simple_check("hardmax-collision-rate", min_rate == 1.0, min_rate, 1.0,
                     "measured == bound", "hardmax-context-collision", "linear",
                     "head counts 1, 2, 4; bitwise output comparison"),
        simple_check("softmax-separates-same-pairs", demo.softmax_distinct_rate == 1.0,
                     demo.softmax_distinct_rate, 1.0, "measured == bound",
                     "softmax-context-separation"),
    };
    rc = finish(rep, h.out, t0);
  });

  // memorize
  auto* mem = app.add_subcommand("memorize",
                                 "Build a one-layer model memorizing a labeled dataset");
  struct {
    std::string in, model_out, out, mode = "scaled";
    double beta = 0.0, r_min = 0.5, r_max = 1.0, eps = 0.1;
    bool pos_enc = false;
    std::uint64_t seed = 1;
  } me;
  mem->add_option("--in", me.in, "Labeled dataset path")->required();
  mem->add_option("--mode", me.mode, "Scale choice: closed-form or scaled")
      ->check(CLI::IsMember({"closed-form", "scaled"}));
  mem->add_option("--beta", me.beta, "Explicit scale for scaled mode");
  mem->add_flag("--pos-enc", me.pos_enc, "Add the positional encoding (required for duplicates)");
  mem->add_option("--r-min", me.r_min, "Inner shell radius");
  mem->add_option("--r-max", me.r_max, "Outer shell radius");
  mem->add_option("--eps", me.eps, "Minimum spacing between distinct tokens");
  mem->add_option("--seed", me.seed, "RNG seed");
  mem->add_option("--model-out", me.model_out, "Save the model as JSON");
  mem->add_option("--report-out", me.out, "Write the JSON report here too");
  mem->callback([&]() {
    const auto t0 = Clock::now();
    const LabeledDataset ds = load_any(me.in);
    const SeparationParams p{me.r_min, me.r_max, me.eps};
    const CMMode mode = me.mode == "closed-form" ? CMMode::closed_form : CMMode::scaled;
    const TransformerModel model =
        build_one_layer_memorizer(ds, p, mode, me.beta, me.pos_enc, me.seed);
    if (!me.model_out.empty()) write_json_file(model_to_json(model, ds.n), me.model_out);
    const MemorizationReport mr = eval_memorization(model, ds);
    RunReport rep;
    rep.command = "memorize";
    rep.seed = me.seed;
    rep.config = {{"in", me.in},   {"mode", me.mode},        {"beta", me.beta},
                  {"pos_enc", me.pos_enc}, {"r_min", me.r_min}, {"r_max", me.r_max},
                  {"eps", me.eps}, {"tokens", mr.total_tokens}};
    rep.checks = {
        simple_check("exact-match-rate", mr.exact_match_rate == 1.0, mr.exact_match_rate, 1.0,
                     "measured == bound", "memorization-exactness", "linear",
                     std::to_string(mr.matched_tokens) + "/" +
                         std::to_string(mr.total_tokens) + " tokens"),
        simple_check("parameter-budget", mr.param_count <= mr.param_bound, mr.param_count,
                     static_cast<double>(mr.param_bound), "measured <= bound",
                     "memorization-parameter-budget"),
        simple_check("decode-residual", mr.max_residual < 0.5, mr.max_residual, 0.5,
                     "measured < bound", "label-decode-margin"),
    };
    rc = finish(rep, me.out, t0);
  });

  // approximate
  auto* ap = app.add_subcommand(
      "approximate", "Approximate the mean-of-entries target on the unit cube by a grid pipeline");
  struct {
    int grid = 4, dim = 1, seq_len = 2, samples = 20000;
    double bump_scale = 0.0;
    std::uint64_t seed = 1;
    std::string out;
  } a;
  ap->add_option("--grid", a.grid, "Cells per coordinate");
  ap->add_option("--bump-scale", a.bump_scale, "Readout sharpness R (0 = 8 * grid)");
  ap->add_option("--dim", a.dim, "Embedding dimension");
  ap->add_option("--seq-len", a.seq_len, "Tokens per sequence");
  ap->add_option("--samples", a.samples, "Monte Carlo samples for the distance estimate");
  ap->add_option("--seed", a.seed, "RNG seed");
  ap->add_option("--report-out", a.out, "Write the JSON report here too");
  ap->callback([&]() {
    const auto t0 = Clock::now();
    const double R = a.bump_scale > 0 ? a.bump_scale : 8.0 * a.grid;
    const auto target = [](const Mat& Z) { return Z.mean(); };
    const ApproxPipeline pipe = build_two_layer_approximator(
        target, a.grid, R, SeparationParams{0, 0, 0}, a.dim, a.seq_len, a.seed);
    const auto target_field = [&](const Mat& Z) {
      return Mat::Constant(Z.rows(), Z.cols(), Z.mean()).eval();
    };
    const ApproxReport est =
        estimate_dist_p([&](const Mat& Z) { return approx_eval(pipe, Z); }, target_field, 1.0,
                        a.dim, a.seq_len, a.samples, a.seed + 1);
    RunReport rep;
    rep.command = "approximate";
    rep.seed = a.seed;
    rep.config = {{"grid", a.grid},       {"bump_scale", R},
                  {"dim", a.dim},         {"seq_len", a.seq_len},
                  {"samples", a.samples}, {"beta_used", pipe.beta_used}};
    rep.checks = {
        simple_check("grid-key-exactness", pipe.max_key_error < 2.0 / R, pipe.max_key_error,
                     2.0 / R, "measured < bound", "bump-readout-key-tolerance"),
        simple_check("distance-estimate", est.dist_estimate >= 0.0, est.dist_estimate, 0.0,
                     "measured >= bound", "monte-carlo-distance", "linear",
                     "standard error " + std::to_string(est.standard_error)),
    };
    rc = finish(rep, a.out, t0);
  });

  // train
  auto* tr = app.add_subcommand("train", "Train the rank-1 block stack on a labeled task");
  struct {
    std::string in, csv, out;
    int n_seqs = 256, seq_len = 8, vocab = 32, classes = 4, dim = 16;
    int depth = 1, width = 32, epochs = 400, batch = 32;
    double lr = 0.05, momentum = 0.9, require_acc = -1.0;
    std::uint64_t seed = 1;
  } t;
  tr->add_option("--in", t.in, "Labeled dataset path (omit to generate the synthetic task)");
  tr->add_option("--n-seqs", t.n_seqs, "Synthetic task: number of sequences");
  tr->add_option("--seq-len", t.seq_len, "Synthetic task: tokens per sequence");
  tr->add_option("--vocab", t.vocab, "Synthetic task: vocabulary size");
  tr->add_option("--classes", t.classes, "Synthetic task: number of classes");
  tr->add_option("--dim", t.dim, "Synthetic task: embedding dimension");
  tr->add_option("--depth", t.depth, "Number of blocks");
  tr->add_option("--width", t.width, "Feed-forward hidden width");
  tr->add_option("--epochs", t.epochs, "Epoch budget");
  tr->add_option("--batch", t.batch, "Batch size");
  tr->add_option("--lr", t.lr, "Learning rate");
  tr->add_option("--momentum", t.momentum, "Momentum");
  tr->add_option("--require-acc", t.require_acc,
                 "Fail unless training accuracy reaches this (also stops early)");
  tr->add_option("--seed", t.seed, "RNG seed");
  tr->add_option("--csv", t.csv, "Per-epoch metrics CSV path");
  tr->add_option("--report-out", t.out, "Write the JSON report here too");
  tr->callback([&]() {
    const auto t0 = Clock::now();
    const LabeledDataset ds =
        t.in.empty()
            ? gen_synthetic_task(t.n_seqs, t.seq_len, t.vocab, t.classes, t.dim, t.seed)
            : load_any(t.in);
    if (!ds.labeled()) throw std::invalid_argument("train: dataset has no labels");
    Rank1Model model = init_rank1_model(ds.d, t.depth, t.width, ds.num_classes, t.seed + 1);
    TrainConfig cfg;
    cfg.epochs = t.epochs;
    cfg.batch_size = t.batch;
    cfg.learning_rate = t.lr;
    cfg.momentum = t.momentum;
    cfg.seed = t.seed + 2;
    cfg.stop_accuracy = t.require_acc;
    cfg.csv_path = t.csv;
    const TrainMetrics metrics = train(model, ds, cfg);
    const double final_acc = metrics.accuracy.empty() ? 0.0 : metrics.accuracy.back();
    RunReport rep;
    rep.command = "train";
    rep.seed = t.seed;
    rep.config = {{"depth", t.depth},   {"width", t.width},   {"epochs", t.epochs},
                  {"batch", t.batch},   {"lr", t.lr},         {"momentum", t.momentum},
                  {"sequences", ds.size()}, {"classes", ds.num_classes}, {"dim", ds.d},
                  {"epochs_run", metrics.epochs_run}};
    if (t.require_acc > 0) {
      const int reached = metrics.epochs_to(t.require_acc);
      rep.checks = {simple_check(
          "accuracy-reaches-bar", reached > 0, final_acc, t.require_acc, "measured >= bound",
          "trainability-within-budget", "linear",
          reached > 0 ? "reached at epoch " + std::to_string(reached) : "never reached")};
    } else {
      rep.checks = {simple_check("final-accuracy", true, final_acc, 0.0, "measured >= bound",
                                 "training-progress", "linear",
                                 std::to_string(metrics.epochs_run) + " epochs run")};
    }
    rc = finish(rep, t.out, t0);
  });

  // grad-check
  auto* gc = app.add_subcommand("grad-check",
                                "Compare analytic gradients against central differences");
  struct {
    int configs = 20;
    std::uint64_t seed = 1;
    std::string out;
  } gr;
  gc->add_option("--configs", gr.configs, "Random model/batch configurations");
  gc->add_option("--seed", gr.seed, "RNG seed");
  gc->add_option("--report-out", gr.out, "Write the JSON report here too");
  gc->callback([&]() {
    const auto t0 = Clock::now();
    if (gr.configs < 1) throw std::invalid_argument("grad-check: need --configs >= 1");
    RunReport rep;
    rep.command = "grad-check";
    rep.seed = gr.seed;
    rep.config = {{"configs", gr.configs}};
    rep.checks = run_grad_check_suite(gr.seed, gr.configs);
    rc = finish(rep, gr.out, t0);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return 3;
  } catch (const BudgetExhaustedError& e) {
    std::cerr << "budget exhausted: " << e.what() << "\n";
    return 3;
  } catch (const InconsistentLabelsError& e) {
    std::cerr << "inconsistent labels: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return rc;
}
