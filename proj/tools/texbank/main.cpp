#include "commands.hpp"

#include "texbank/types.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <cstdlib>
#include <exception>

namespace {

int run(int argc, char** argv) {
  using namespace texbank::cli;
  Globals g;
  std::string out = ".";
  bool verbose = false;

  CLI::App app{"Texture description pipeline: extract, fit-vocab, encode, train, predict, evaluate, segment, annosim",
               "texbank"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "TOML file; options of a subcommand go in a table named after it");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--jobs", g.jobs, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--out", out, "Output directory")->capture_default_str();
  app.add_flag("--allow-lineage-mismatch", g.allow_lineage_mismatch,
               "Warn instead of failing when inputs come from different pipelines");
  app.add_flag("-v,--verbose", verbose, "Log progress to stderr");

  std::vector<Command> commands = {add_extract(app, g), add_fit_vocab(app, g), add_encode(app, g),
                                   add_train(app, g),   add_predict(app, g),   add_evaluate(app, g),
                                   add_segment(app, g), add_annosim(app, g)};
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  auto logger = spdlog::stderr_color_st("texbank");
  spdlog::set_default_logger(logger);
  spdlog::set_level(verbose ? spdlog::level::info : spdlog::level::warn);

  g.out = out;
  std::error_code ec;
  fs::create_directories(g.out, ec);
  if (ec) throw UserError("cannot create output directory " + out + ": " + ec.message());
  for (auto& c : commands)
    if (c.app->parsed()) c.run();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const texbank::cli::UserError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const texbank::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 2;
  } catch (...) {
    std::fprintf(stderr, "internal error: unknown exception\n");
    return 2;
  }
}
