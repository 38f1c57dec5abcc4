// Copyright 2026 The dialogue-debias Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line entry point: one subcommand per pipeline stage plus `run`.
// Exit codes: 0 ok, 1 usage or configuration error, 2 stage failure.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "debias/adversarial_filter.hpp"
#include "debias/contrastive.hpp"
#include "debias/corpus.hpp"
#include "debias/entity_predictor.hpp"
#include "debias/evalkit.hpp"
#include "debias/ngram_stats.hpp"
#include "debias/pipeline.hpp"
#include "debias/resplit.hpp"
#include "debias/rng.hpp"
#include "debias/serialize.hpp"
#include "debias/synth.hpp"

namespace fs = std::filesystem;
using namespace debias;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitFailure = 2;

struct Common {
  uint64_t seed = 0;
  std::string schema = "generic";
};

std::vector<std::string> labels_of(const std::vector<TimestepInstance>& instances) {
  std::vector<std::string> labels;
  labels.reserve(instances.size());
  for (const TimestepInstance& inst : instances) labels.push_back(inst.label.key());
  return labels;
}

Featurizer bag_featurizer(const std::vector<TimestepInstance>& instances, size_t order) {
  std::vector<TokenSeq> contexts;
  for (const TimestepInstance& inst : instances) contexts.push_back(inst.context);
  return Featurizer(NgramVocab::build(contexts, order));
}

ArtifactMeta cli_meta(const std::string& command, uint64_t seed) {
  return {sha256_hex(command), seed};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dataset debiasing toolkit for entity-labeled dialogue corpora"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--seed", common.seed, "Master seed")->capture_default_str();
  app.add_option("--schema", common.schema, "Corpus schema: generic, synthetic, multiwoz")
      ->capture_default_str();

  // synth
  SyntheticBenchSpec synth_spec;
  std::string synth_out;
  bool synth_no_decorrelate = false;
  auto* synth = app.add_subcommand("synth", "Generate the synthetic cue-bias benchmark");
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--entities", synth_spec.num_entities)->capture_default_str();
  synth->add_option("--skew", synth_spec.head_skew, "Zipf exponent")->capture_default_str();
  synth->add_option("--cue-strength", synth_spec.cue_strength)->capture_default_str();
  synth->add_option("--content-noise", synth_spec.content_noise)->capture_default_str();
  synth->add_option("--train-size", synth_spec.train_size)->capture_default_str();
  synth->add_option("--test-size", synth_spec.test_size)->capture_default_str();
  synth->add_option("--openers", synth_spec.num_openers)->capture_default_str();
  synth->add_option("--niche-fraction", synth_spec.niche_fraction)->capture_default_str();
  synth->add_option("--niches", synth_spec.num_niches)->capture_default_str();
  synth->add_option("--adjectives", synth_spec.num_adjectives)->capture_default_str();
  synth->add_option("--nouns", synth_spec.num_nouns)->capture_default_str();
  synth->add_option("--opener-length", synth_spec.opener_length)->capture_default_str();
  synth->add_option("--closings", synth_spec.num_closings)->capture_default_str();
  synth->add_option("--closing-length", synth_spec.closing_length)->capture_default_str();
  synth->add_flag("--no-decorrelate", synth_no_decorrelate, "Keep the cue correlation in the extra test set");

  // analyze
  std::string an_corpus, an_out;
  size_t an_n = 3, an_head_k = 10;
  auto* analyze = app.add_subcommand("analyze", "Entity histogram and n-gram profile");
  analyze->add_option("--corpus", an_corpus)->required()->check(CLI::ExistingFile);
  analyze->add_option("--out", an_out, "Output directory")->required();
  analyze->add_option("--n", an_n)->capture_default_str();
  analyze->add_option("--head-k", an_head_k)->capture_default_str();

  // bias-id
  std::string bi_corpus, bi_out, bi_criterion = "freq";
  size_t bi_n = 3;
  double bi_cutoff = 0.10;
  auto* bias_id = app.add_subcommand("bias-id", "Rank cue n-grams and keep the top fraction");
  bias_id->add_option("--corpus", bi_corpus)->required()->check(CLI::ExistingFile);
  bias_id->add_option("--criterion", bi_criterion)
      ->check(CLI::IsMember({"freq", "mi", "jsd"}))
      ->capture_default_str();
  bias_id->add_option("--n", bi_n)->capture_default_str();
  bias_id->add_option("--cutoff", bi_cutoff)->capture_default_str();
  bias_id->add_option("--out", bi_out, "Biased-set JSON")->required();

  // pairs
  std::string pa_corpus, pa_biased, pa_out;
  auto* pairs = app.add_subcommand("pairs", "Build (original, debiased) context pairs");
  pairs->add_option("--corpus", pa_corpus)->required()->check(CLI::ExistingFile);
  pairs->add_option("--biased", pa_biased)->required()->check(CLI::ExistingFile);
  pairs->add_option("--out", pa_out, "Pairs JSONL")->required();

  // pretrain
  std::string pt_pairs, pt_out;
  TrainConfig pt_cfg;
  auto* pretrain = app.add_subcommand("pretrain", "Contrastive encoder pre-training");
  pretrain->add_option("--pairs", pt_pairs)->required()->check(CLI::ExistingFile);
  pretrain->add_option("--out", pt_out, "Output directory")->required();
  pretrain->add_option("--epochs", pt_cfg.epochs)->capture_default_str();
  pretrain->add_option("--lr", pt_cfg.learning_rate)->capture_default_str();
  pretrain->add_option("--batch-size", pt_cfg.batch_size)->capture_default_str();
  pretrain->add_option("--temperature", pt_cfg.temperature)->capture_default_str();
  pretrain->add_option("--dim", pt_cfg.dim)->capture_default_str();
  pretrain->add_option("--val-fraction", pt_cfg.validation_fraction)->capture_default_str();

  // af
  std::string af_corpus, af_encoder, af_out, af_denominator = "evaluators";
  size_t af_bag_order = 1;
  FilterConfig af_cfg;
  auto* af = app.add_subcommand("af", "Adversarial filtering of easy instances");
  af->add_option("--corpus", af_corpus)->required()->check(CLI::ExistingFile);
  af->add_option("--encoder", af_encoder, "Encoder features; bag-of-n-grams when omitted")
      ->check(CLI::ExistingFile);
  af->add_option("--bag-order", af_bag_order)->capture_default_str();
  af->add_option("--out", af_out, "Output directory")->required();
  af->add_option("--learners", af_cfg.num_learners)->capture_default_str();
  af->add_option("--train-fraction", af_cfg.train_fraction)->capture_default_str();
  af->add_option("--threshold", af_cfg.accuracy_threshold)->capture_default_str();
  af->add_option("--min-filtered", af_cfg.min_filtered)->capture_default_str();
  af->add_option("--max-iterations", af_cfg.max_iterations)->capture_default_str();
  af->add_option("--denominator", af_denominator)
      ->check(CLI::IsMember({"evaluators", "all_learners"}))
      ->capture_default_str();

  // finetune
  std::string ft_corpus, ft_encoder, ft_retained, ft_out;
  size_t ft_bag_order = 1;
  ClassifierConfig ft_cfg;
  auto* finetune = app.add_subcommand("finetune", "Train the linear entity head on frozen features");
  finetune->add_option("--corpus", ft_corpus)->required()->check(CLI::ExistingFile);
  finetune->add_option("--encoder", ft_encoder, "Encoder features; bag-of-n-grams when omitted")
      ->check(CLI::ExistingFile);
  finetune->add_option("--bag-order", ft_bag_order)->capture_default_str();
  finetune->add_option("--retained", ft_retained, "Retained-ids file from af")->check(CLI::ExistingFile);
  finetune->add_option("--out", ft_out, "Classifier JSON")->required();
  finetune->add_option("--epochs", ft_cfg.epochs)->capture_default_str();
  finetune->add_option("--lr", ft_cfg.learning_rate)->capture_default_str();
  finetune->add_option("--l2", ft_cfg.l2)->capture_default_str();

  // resplit
  std::vector<std::string> rs_corpora;
  std::string rs_out, rs_weighting = "occurrence";
  ResplitConfig rs_cfg;
  auto* resplit_cmd = app.add_subcommand("resplit", "Frequency-partitioned unseen-utterance split");
  resplit_cmd->add_option("--corpus", rs_corpora, "One or more corpus files")
      ->required()
      ->check(CLI::ExistingFile);
  resplit_cmd->add_option("--out", rs_out, "Split JSON")->required();
  resplit_cmd->add_option("--n", rs_cfg.n)->capture_default_str();
  resplit_cmd->add_option("--min-freq", rs_cfg.min_freq)->capture_default_str();
  resplit_cmd->add_option("--train-share", rs_cfg.train_share)->capture_default_str();
  resplit_cmd->add_option("--baseline-splits", rs_cfg.baseline_splits)->capture_default_str();
  resplit_cmd->add_option("--weighting", rs_weighting)
      ->check(CLI::IsMember({"occurrence", "type"}))
      ->capture_default_str();

  // perturb
  std::string pe_corpus, pe_kind, pe_lexicon, pe_distractors, pe_out;
  double pe_rate = 0.3;
  auto* perturb_cmd = app.add_subcommand("perturb", "Adversarial test set from user-turn perturbations");
  perturb_cmd->add_option("--corpus", pe_corpus)->required()->check(CLI::ExistingFile);
  perturb_cmd->add_option("--kind", pe_kind)->required()->check(CLI::IsMember({"wp", "wd", "sp", "si"}));
  perturb_cmd->add_option("--rate", pe_rate)->capture_default_str();
  perturb_cmd->add_option("--lexicon", pe_lexicon)->check(CLI::ExistingFile);
  perturb_cmd->add_option("--distractors", pe_distractors)->check(CLI::ExistingFile);
  perturb_cmd->add_option("--out", pe_out, "Corpus JSONL")->required();

  // evaluate
  std::string ev_corpus, ev_classifier, ev_encoder, ev_out, ev_predictions;
  auto* evaluate = app.add_subcommand("evaluate", "Entity F1 and BLEU of a trained classifier");
  evaluate->add_option("--corpus", ev_corpus)->required()->check(CLI::ExistingFile);
  evaluate->add_option("--classifier", ev_classifier)->required()->check(CLI::ExistingFile);
  evaluate->add_option("--encoder", ev_encoder)->check(CLI::ExistingFile);
  evaluate->add_option("--out", ev_out, "Eval report JSON")->required();
  evaluate->add_option("--predictions", ev_predictions, "Prediction JSONL");

  // probe
  std::string pr_train, pr_test, pr_out;
  size_t pr_n = 3, pr_bag_order = 1;
  double pr_cutoff = 0.10;
  auto* probe = app.add_subcommand("probe", "Full input vs frequent-phrases-only probe");
  probe->add_option("--train", pr_train)->required()->check(CLI::ExistingFile);
  probe->add_option("--test", pr_test)->required()->check(CLI::ExistingFile);
  probe->add_option("--out", pr_out)->required();
  probe->add_option("--n", pr_n)->capture_default_str();
  probe->add_option("--cutoff", pr_cutoff)->capture_default_str();
  probe->add_option("--bag-order", pr_bag_order)->capture_default_str();

  // report
  std::string rp_dir, rp_config;
  auto* report = app.add_subcommand("report", "Summarize the artifacts of a run directory");
  report->add_option("--dir", rp_dir)->required()->check(CLI::ExistingDirectory);
  report->add_option("--config", rp_config)->check(CLI::ExistingFile);

  // run
  std::string run_config, run_out;
  std::vector<std::string> run_stages;
  std::optional<uint64_t> run_seed;
  auto* run = app.add_subcommand("run", "Run the configured pipeline stages");
  run->add_option("--config", run_config, "JSON config")->required()->check(CLI::ExistingFile);
  run->add_option("--out", run_out, "Override output_dir");
  run->add_option("--stages", run_stages, "Override the stage list")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  const bool seed_given = app.get_option("--seed")->count() > 0;
  if (seed_given) run_seed = common.seed;
  const CorpusSchema schema = [&] {
    try {
      return schema_by_id(common.schema);
    } catch (const Error& e) {
      std::cerr << "error: " << e.what() << "\n";
      std::exit(kExitUsage);
    }
  }();

  try {
    if (*synth) {
      synth_spec.seed = common.seed;
      synth_spec.decorrelate_test = !synth_no_decorrelate;
      write_synthetic(synth_out, generate_synthetic(synth_spec));
      std::cerr << "wrote synthetic benchmark to " << synth_out << "\n";
    } else if (*analyze) {
      const auto dialogues = load_corpus(an_corpus, schema);
      const auto instances = build_corpus_instances(dialogues);
      const ArtifactMeta meta = cli_meta("analyze", common.seed);
      const EntityHistogram h = entity_histogram(dialogues);
      write_json(fs::path(an_out) / "histogram.json",
                 Json{{"histogram", to_json(h, an_head_k)}, {"meta", meta_json(meta)}});
      write_json(fs::path(an_out) / "profile.json",
                 Json{{"profile", profile_summary_json(build_profile(instances, an_n), 50)},
                      {"meta", meta_json(meta)}});
      write_file(fs::path(an_out) / "instances.jsonl", instances_to_jsonl(instances));
      std::cout << "dialogues " << dialogues.size() << ", instances " << instances.size()
                << ", head_share(" << an_head_k << ") " << h.head_share(an_head_k) << "\n";
    } else if (*bias_id) {
      const auto instances = build_corpus_instances(load_corpus(bi_corpus, schema));
      const BiasedTokenSet set = identify_biased(instances, parse_criterion(bi_criterion), bi_n, bi_cutoff);
      write_json(bi_out, to_json(set));
      std::cout << set.entries.size() << " biased " << bi_n << "-grams (" << bi_criterion << ")\n";
    } else if (*pairs) {
      const auto instances = build_corpus_instances(load_corpus(pa_corpus, schema));
      const BiasedTokenSet set = biased_set_from_json(read_json(pa_biased));
      const auto built = build_positive_pairs(instances, set);
      write_file(pa_out, pairs_to_jsonl(built));
      std::cout << built.size() << " pairs\n";
    } else if (*pretrain) {
      pt_cfg.seed = derive_seed(common.seed, "contrastive");
      const auto loaded = pairs_from_jsonl(read_file(pt_pairs));
      const ContrastiveResult r = train_contrastive(loaded, pt_cfg);
      write_json(fs::path(pt_out) / "encoder.json", to_json(r.model));
      write_file(fs::path(pt_out) / "loss_curve.csv", loss_curve_csv(r.curve));
      std::cout << "best epoch " << r.best_epoch << ", held-out cosine "
                << mean_pair_cosine(r.initial, loaded, r.validation_indices) << " -> "
                << mean_pair_cosine(r.model, loaded, r.validation_indices) << "\n";
    } else if (*af) {
      const auto instances = build_corpus_instances(load_corpus(af_corpus, schema));
      std::optional<EncoderModel> enc;
      if (!af_encoder.empty()) enc = encoder_from_json(read_json(af_encoder));
      const Featurizer featurizer = enc ? Featurizer(*enc) : bag_featurizer(instances, af_bag_order);
      af_cfg.seed = derive_seed(common.seed, "af");
      af_cfg.denominator = af_denominator == "evaluators" ? EasinessDenominator::kEvaluators
                                                          : EasinessDenominator::kAllLearners;
      const FilterResult r = af_lite(featurizer.matrix(instances), labels_of(instances), af_cfg);
      Json j = to_json(r.report);
      j["trajectory"] = to_json(entity_trajectory(r.report, 10));
      write_json(fs::path(af_out) / "filter_report.json", j);
      write_file(fs::path(af_out) / "retained_ids.tsv", retained_ids_text(instances, r.retained));
      std::cout << r.report.iterations.size() << " iterations, " << r.retained.size() << " of "
                << instances.size() << " retained (" << termination_name(r.report.termination) << ")\n";
    } else if (*finetune) {
      const auto instances = build_corpus_instances(load_corpus(ft_corpus, schema));
      std::optional<EncoderModel> enc;
      if (!ft_encoder.empty()) enc = encoder_from_json(read_json(ft_encoder));
      const Featurizer featurizer = enc ? Featurizer(*enc) : bag_featurizer(instances, ft_bag_order);
      std::vector<size_t> kept;
      if (!ft_retained.empty()) {
        kept = retained_from_text(instances, read_file(ft_retained));
      } else {
        for (size_t i = 0; i < instances.size(); ++i) kept.push_back(i);
      }
      ft_cfg.seed = derive_seed(common.seed, "classifier");
      const LinearClassifier clf = finetune_on_retained(featurizer, instances, kept, ft_cfg);
      write_json(ft_out, to_json(clf, featurizer));
      std::cout << "trained on " << kept.size() << " instances, " << clf.classes.size() << " classes\n";
    } else if (*resplit_cmd) {
      std::vector<Dialogue> all;
      for (const std::string& path : rs_corpora) {
        auto part = load_corpus(path, schema);
        all.insert(all.end(), part.begin(), part.end());
      }
      rs_cfg.seed = derive_seed(common.seed, "resplit");
      rs_cfg.weighting = rs_weighting == "type" ? OverlapWeighting::kType : OverlapWeighting::kOccurrence;
      const ResplitResult r = resplit(all, rs_cfg);
      write_json(rs_out, to_json(r));
      std::cout << "overlap " << r.report.overlap_after << " (random baseline "
                << r.report.overlap_random_baseline << "), " << r.report.train_dialogues << "/"
                << r.report.test_dialogues << " dialogues\n";
    } else if (*perturb_cmd) {
      PerturbConfig pc;
      pc.kind = parse_perturb_kind(pe_kind);
      pc.rate = pe_rate;
      pc.seed = derive_seed(common.seed, "perturb", static_cast<uint64_t>(pc.kind));
      if (!pe_lexicon.empty()) pc.lexicon = load_lexicon(pe_lexicon);
      if (!pe_distractors.empty()) pc.distractors = load_distractors(pe_distractors);
      validate(pc);
      save_corpus(pe_out, make_adversarial_testset(load_corpus(pe_corpus, schema), pc));
    } else if (*evaluate) {
      const Json cj = read_json(ev_classifier);
      const LinearClassifier clf = classifier_from_json(cj);
      std::optional<EncoderModel> enc;
      if (!ev_encoder.empty()) enc = encoder_from_json(read_json(ev_encoder));
      const Featurizer featurizer = featurizer_from_json(cj, enc ? &*enc : nullptr);
      const CorpusEvaluation ev = evaluate_dialogues(clf, featurizer, load_corpus(ev_corpus, schema));
      write_json(ev_out, Json{{"report", to_json(ev.report)},
                              {"classifier", ev_classifier},
                              {"corpus", ev_corpus}});
      if (!ev_predictions.empty()) write_file(ev_predictions, predictions_to_jsonl(ev.predictions));
      std::cout << "entity F1 " << ev.report.entity_f1 << ", BLEU " << ev.report.bleu << "\n";
    } else if (*probe) {
      const auto train = load_corpus(pr_train, schema);
      ProbeConfig pc;
      pc.frequent_set = rank_frequency(build_profile(build_corpus_instances(train), pr_n), pr_cutoff);
      pc.bag_order = pr_bag_order;
      pc.classifier.seed = derive_seed(common.seed, "probe");
      const ProbeResult r = run_probe(train, load_corpus(pr_test, schema), pc);
      write_json(pr_out, Json{{"full", to_json(r.full)},
                              {"frequent_only", to_json(r.frequent_only)},
                              {"gap_points", r.gap_points}});
      std::cout << "full F1 " << r.full.entity_f1 << ", frequent-only F1 " << r.frequent_only.entity_f1
                << ", gap " << r.gap_points << " points\n";
    } else if (*report) {
      PipelineConfig cfg;
      if (!rp_config.empty()) cfg = load_pipeline_config(rp_config);
      cfg.output_dir = rp_dir;
      cfg.stages = {"report"};
      const RunOutcome outcome = run_pipeline(cfg);
      if (!outcome.ok) throw Error(outcome.error);
      std::cout << read_json(fs::path(rp_dir) / "report.json")["summary"].dump(2) << "\n";
    } else if (*run) {
      PipelineConfig cfg = load_pipeline_config(run_config);
      if (run_seed) cfg.seed = *run_seed;
      if (!run_out.empty()) cfg.output_dir = run_out;
      if (!run_stages.empty()) {
        for (const std::string& s : run_stages) {
          if (std::find(kAllStages.begin(), kAllStages.end(), s) == kAllStages.end()) {
            throw ConfigError("unknown stage '" + s + "'");
          }
        }
        cfg.stages = run_stages;
      }
      const RunOutcome outcome = run_pipeline(cfg);
      if (!outcome.ok) {
        std::cerr << "stage " << outcome.failed_stage << " failed: " << outcome.error << "\n";
        return kExitFailure;
      }
      std::cerr << "wrote " << outcome.artifacts.size() << " artifacts to " << cfg.output_dir.string()
                << "\n";
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}
