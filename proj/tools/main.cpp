// hazeval command line: generate, evaluate, report, agree, serve.
#include <csignal>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "hazeval/annotation_server.hpp"
#include "hazeval/error.hpp"
#include "hazeval/pipeline.hpp"

namespace {

using namespace hazeval;

int cmd_agree(const std::filesystem::path& config_path) {
  const Study study = Study::open(StudyConfig::load(config_path));
  AnnotationStore store(study.config.log, study.tasks);
  const auto report = agreement_report(store.tasks(), store.snapshot(), study.automated);
  write_json(study.config.agreement_output, report);
  std::ofstream(study.config.export_output) << export_annotations(store);
  std::cout << report.dump(2) << "\n";
  return kExitOk;
}

int cmd_serve(const std::filesystem::path& config_path, bool print_codes) {
  const Study study = Study::open(StudyConfig::load(config_path));
  TokenSigner signer = TokenSigner::from_env(study.config.secret_env, std::chrono::seconds(study.config.token_ttl_seconds));
  if (print_codes) {
    for (const auto& a : study.config.annotators) std::cout << a << "\t" << signer.study_code(a) << "\n";
    return kExitOk;
  }
  AnnotationStore store(study.config.log, study.tasks);

  // Block the stop signals before any server thread exists so only sigwait sees them.
  sigset_t stop_signals;
  sigemptyset(&stop_signals);
  sigaddset(&stop_signals, SIGINT);
  sigaddset(&stop_signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);

  AnnotationServer server(study, store, std::move(signer));
  const int port = server.bind(study.config.host, study.config.port);
  server.start();
  std::cerr << "serving study '" << study.config.name << "' on http://" << study.config.host << ":" << port << "\n";
  int sig = 0;
  sigwait(&stop_signals, &sig);
  server.stop();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reference-free evaluation of retrieval-augmented answers"};
  app.require_subcommand(1);
  std::string config;
  bool print_codes = false;

  auto add = [&](const char* name, const char* help) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config, "JSON config file")->required()->check(CLI::ExistingFile);
    return sub;
  };
  auto* generate = add("generate", "Build the question/answer dataset");
  auto* evaluate = add("evaluate", "Score the dataset (generating it first if missing)");
  auto* report = add("report", "Recompute the aggregate and CSV from existing rows");
  auto* agree = add("agree", "Agreement report from a study's annotation log");
  auto* serve = add("serve", "Run the annotation service");
  serve->add_flag("--print-codes", print_codes, "Print each annotator's study code and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (generate->parsed()) return run_generate(RunConfig::load(config));
    if (evaluate->parsed()) return run_evaluate(RunConfig::load(config));
    if (report->parsed()) return run_report(RunConfig::load(config));
    if (agree->parsed()) return cmd_agree(config);
    if (serve->parsed()) return cmd_serve(config, print_codes);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
