#include "moodminer/cli.hpp"

#include <iostream>

#include <CLI11.hpp>

#include "moodminer/errors.hpp"
#include "moodminer/pipeline.hpp"

namespace moodminer::cli {

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
};

void add_common(CLI::App* sub, CommonArgs& args) {
  sub->add_option("--config", args.config_path, "flat key = value config file");
  sub->add_option("--out", args.out_dir, "output directory")->required();
  sub->add_option("--seed", args.seed, "master seed (default 0)");
}

pipeline::RunContext make_context(const std::string& name, const CommonArgs& args,
                                  std::vector<std::string> inputs) {
  pipeline::RunContext ctx;
  ctx.subcommand = name;
  ctx.out_dir = args.out_dir;
  ctx.seed = args.seed;
  if (!args.config_path.empty()) ctx.config = pipeline::load_config(args.config_path);
  ctx.inputs = std::move(inputs);
  return ctx;
}

}  // namespace

int cli_dispatch(int argc, const char* const* argv) {
  CLI::App app{"engagement-mood decoding and dropout prediction for question "
               "pool submission logs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", pipeline::tool_version());

  CommonArgs sim_args, ing_args, fit_args, sel_args, dec_args, chr_args,
      mis_args, dp_args, abl_args, rep_args;
  std::string ing_input, ing_split = "equal_halves";
  std::string fit_students, sel_students, dec_students, dec_model;
  std::string chr_decoded, mis_decoded, dp_decoded, abl_students, rep_dir;

  auto* sim = app.add_subcommand("simulate", "generate a synthetic population");
  add_common(sim, sim_args);

  auto* ing = app.add_subcommand("ingest", "parse a CSV log into student records");
  add_common(ing, ing_args);
  ing->add_option("--input", ing_input, "event log CSV")->required();
  ing->add_option("--split", ing_split,
                  "equal_halves (default) or at:<ISO-8601|epoch>");

  auto* fit = app.add_subcommand("fit-hmm", "fit the mood model by multistart EM");
  add_common(fit, fit_args);
  fit->add_option("--students", fit_students, "students.json")->required();

  auto* sel = app.add_subcommand("select-k", "state-count selection by AIC/BIC");
  add_common(sel, sel_args);
  sel->add_option("--students", sel_students, "students.json")->required();

  auto* dec = app.add_subcommand("decode", "most probable mood path per student");
  add_common(dec, dec_args);
  dec->add_option("--students", dec_students, "students.json")->required();
  dec->add_option("--model", dec_model, "hmm.json")->required();

  auto* chr = app.add_subcommand("characterize",
                                 "state profiles, labels, transitions");
  add_common(chr, chr_args);
  chr->add_option("--decoded", chr_decoded, "decoded.json")->required();

  auto* mis = app.add_subcommand("mismatch",
                                 "question associativity and dropout regression");
  add_common(mis, mis_args);
  mis->add_option("--decoded", mis_decoded, "decoded.json")->required();

  auto* dpc = app.add_subcommand("train-dp", "train the dropout classifier");
  add_common(dpc, dp_args);
  dpc->add_option("--decoded", dp_decoded, "decoded.json")->required();

  auto* abl = app.add_subcommand("ablate", "cross-validated ablation table");
  add_common(abl, abl_args);
  abl->add_option("--students", abl_students, "students.json")->required();

  auto* rep = app.add_subcommand("report", "summarize a run directory");
  add_common(rep, rep_args);
  rep->add_option("--run", rep_dir, "directory with pipeline outputs")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help() << std::endl;
    return 0;
  } catch (const CLI::CallForVersion&) {
    std::cout << pipeline::tool_version() << std::endl;
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << std::endl;
    return 1;
  }

  try {
    pipeline::Summary summary;
    if (sim->parsed()) {
      summary = pipeline::run_simulate(make_context("simulate", sim_args, {}));
    } else if (ing->parsed()) {
      auto ctx = make_context("ingest", ing_args, {ing_input});
      summary = pipeline::run_ingest(ctx, ing_input, ing_split);
    } else if (fit->parsed()) {
      auto ctx = make_context("fit-hmm", fit_args, {fit_students});
      summary = pipeline::run_fit_hmm(ctx, fit_students);
    } else if (sel->parsed()) {
      auto ctx = make_context("select-k", sel_args, {sel_students});
      summary = pipeline::run_select_k(ctx, sel_students);
    } else if (dec->parsed()) {
      auto ctx = make_context("decode", dec_args, {dec_students, dec_model});
      summary = pipeline::run_decode(ctx, dec_students, dec_model);
    } else if (chr->parsed()) {
      auto ctx = make_context("characterize", chr_args, {chr_decoded});
      summary = pipeline::run_characterize(ctx, chr_decoded);
    } else if (mis->parsed()) {
      auto ctx = make_context("mismatch", mis_args, {mis_decoded});
      summary = pipeline::run_mismatch(ctx, mis_decoded);
    } else if (dpc->parsed()) {
      auto ctx = make_context("train-dp", dp_args, {dp_decoded});
      summary = pipeline::run_train_dp(ctx, dp_decoded);
    } else if (abl->parsed()) {
      auto ctx = make_context("ablate", abl_args, {abl_students});
      summary = pipeline::run_ablate(ctx, abl_students);
    } else if (rep->parsed()) {
      auto ctx = make_context("report", rep_args, {});
      summary = pipeline::run_report(ctx, rep_dir);
    }
    std::cout << summary.dump(1) << std::endl;
    return 0;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << std::endl;
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << std::endl;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  }
}

int cli_dispatch(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("moodminer");
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli_dispatch(static_cast<int>(argv.size()), argv.data());
}

}  // namespace moodminer::cli
