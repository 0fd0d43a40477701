#include "commands.hpp"

#include <fmt/format.h>

#include <CLI11.hpp>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>

#include "gradspec/dataset.hpp"
#include "gradspec/error.hpp"
#include "gradspec/model.hpp"
#include "gradspec/record.hpp"
#include "gradspec/spectrum.hpp"
#include "gradspec/synthetic.hpp"
#include "gradspec/trace.hpp"
#include "gradspec/transform.hpp"

namespace gradspec::cli {

namespace {

using nlohmann::json;

constexpr int kReportVersion = 1;

struct GlobalOptions {
  std::uint64_t seed = 0;
  double alpha = 0.05;
  std::size_t k_powerlaw = 1000;
  std::size_t k_gauss = 100;
  std::optional<std::size_t> workers;
  std::string output;
  std::string format = "csv";
};

struct ModelOptions {
  int classes = 4;
  std::size_t dim = 10;
  std::size_t samples = 1000;
  double separation = 3.0;
  std::vector<std::size_t> hidden{16};
  bool batch_norm = false;
  bool freeze_batchnorm = false;
  std::size_t pretrain_epochs = 0;
  double eta = 0.1;
  std::size_t pretrain_batch = 32;
  double label_noise = 0.0;
  bool random_labels = false;
  std::string idx_images;
  std::string idx_labels;
};

struct GenerateOptions {
  std::string source;
  std::size_t n = 2000;
  std::size_t T = 5000;
  double s = 1.3;
  double lambda_1 = 1.0;
  bool rotate = false;
  std::optional<double> alpha_stable;
  double scale = 1.0;
  std::size_t batch = 1;
  bool replacement = false;
  std::string transform = "identity";
  double noise_sd = 1.0;
};

struct AnalyzeOptions {
  std::string trace;
  std::string axis = "both";
  std::size_t max_slices = 5000;
};

struct SpectrumOptions {
  std::string trace;
  bool uncentered = false;
};

struct CompareOptions {
  bool quadratic = false;
  std::size_t n = 50;
  double s = 1.0;
  std::size_t batch = 1;
  std::size_t T = 5000;
  bool replacement = true;
  std::size_t top = 20;
  double h = 1e-4;
  double noise_sd = 1.0;
};

struct RobustnessOptions {
  std::string trace;
  std::size_t k = 1;
  double eps = 1e-3;
  std::size_t trials = 100;
  bool uncentered = false;
};

std::string number(double v) {
  if (std::isnan(v)) return "nan";
  return fmt::format("{:.6f}", v);
}

json json_number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json verdict_json(const TestVerdict& v) {
  json out = {{"accepted", v.accepted},   {"untestable", v.untestable},
              {"small_tail", v.small_tail}, {"tail_size", v.tail_size},
              {"d_ks", nullptr},          {"d_c", nullptr},
              {"beta_hat", nullptr},      {"s_hat", nullptr},
              {"lambda_min", nullptr}};
  if (!v.untestable) {
    out["d_ks"] = v.statistic;
    out["d_c"] = v.threshold_or_p;
  }
  if (v.fit) {
    out["beta_hat"] = v.fit->beta_hat;
    out["s_hat"] = v.fit->s_hat;
    out["lambda_min"] = v.fit->lambda_min;
  }
  return out;
}

void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream file(path, std::ios::trunc);
  if (!file) throw FormatError("cannot open " + path + " for writing");
  file << text;
  if (!file) throw FormatError("failed writing " + path);
}

TestSettings settings_from(const GlobalOptions& g) {
  TestSettings s;
  s.seed = g.seed;
  s.alpha = g.alpha;
  s.k_powerlaw = g.k_powerlaw;
  s.k_gauss = g.k_gauss;
  s.workers = resolve_workers(g.workers);
  validate(s);
  return s;
}

ToyDataset build_dataset(const ModelOptions& m, std::uint64_t seed) {
  ToyDataset ds;
  if (!m.idx_images.empty() || !m.idx_labels.empty()) {
    if (m.idx_images.empty() || m.idx_labels.empty()) {
      throw ValidationError("--idx-images and --idx-labels go together");
    }
    ds = load_idx(m.idx_images, m.idx_labels);
  } else {
    ds = make_blobs(m.classes, m.dim, m.samples, m.separation, seed);
  }
  if (m.random_labels) ds = randomize_labels(ds, seed + 1);
  if (m.label_noise > 0.0) ds = corrupt_labels(ds, m.label_noise, seed + 2);
  validate(ds);
  return ds;
}

ToyModel build_model(const ModelOptions& m, const ToyDataset& ds, std::uint64_t seed) {
  auto model = ToyModel::mlp(ds.dim(), m.hidden, ds.classes, m.batch_norm, seed + 3);
  if (m.pretrain_epochs > 0) {
    model = pretrain(model, ds, m.pretrain_epochs, m.eta, std::min(m.pretrain_batch, ds.size()),
                     seed + 4);
  }
  if (m.freeze_batchnorm && model.has_batchnorm()) model.freeze_batchnorm(ds);
  return model;
}

json model_json(const ModelOptions& m, const ToyDataset& ds, const ToyModel& model) {
  return {{"classes", ds.classes},
          {"dim", ds.dim()},
          {"samples", ds.size()},
          {"hidden", m.hidden},
          {"batchnorm", model.has_batchnorm()},
          {"batchnorm_frozen", model.batchnorm_frozen()},
          {"pretrain_epochs", m.pretrain_epochs},
          {"dataset", to_string(ds.provenance)},
          {"label_noise", ds.noise_rate},
          {"parameters", model.parameter_count()}};
}

void add_model_options(CLI::App* cmd, ModelOptions& m) {
  cmd->add_option("--classes", m.classes, "Number of classes for blob data");
  cmd->add_option("--dim", m.dim, "Input dimension for blob data");
  cmd->add_option("--samples", m.samples, "Dataset size N for blob data");
  cmd->add_option("--separation", m.separation, "Distance of class means from the origin");
  cmd->add_option("--hidden", m.hidden, "Hidden layer widths")->expected(0, -1);
  cmd->add_flag("--batch-norm", m.batch_norm, "Insert BatchNorm after each hidden Linear");
  cmd->add_flag("--freeze-batchnorm", m.freeze_batchnorm,
                "Normalise with full-dataset statistics instead of batch statistics");
  cmd->add_option("--pretrain-epochs", m.pretrain_epochs, "Epochs of SGD before recording");
  cmd->add_option("--eta", m.eta, "Pretraining learning rate");
  cmd->add_option("--pretrain-batch", m.pretrain_batch, "Pretraining batch size");
  cmd->add_option("--label-noise", m.label_noise, "Fraction of labels flipped");
  cmd->add_flag("--random-labels", m.random_labels, "Shuffle all labels");
  cmd->add_option("--idx-images", m.idx_images, "IDX image file instead of blobs");
  cmd->add_option("--idx-labels", m.idx_labels, "IDX label file instead of blobs");
}

// ---------------------------------------------------------------- generate

int cmd_generate(const GlobalOptions& g, const GenerateOptions& o, const ModelOptions& m,
                 std::ostream& out) {
  if (g.output.empty()) throw ValidationError("generate needs --output");
  std::string source = o.source;
  if (source.empty()) source = o.alpha_stable ? "alpha-stable" : "gaussian-zipf";

  std::optional<GradientHistoryMatrix> trace;
  if (source == "gaussian-zipf") {
    SpectrumSpec spec{ZipfSpectrum{o.lambda_1, o.s}, o.rotate};
    trace = gen_synthetic_gaussian(o.n, o.T, spec, std::nullopt, g.seed);
  } else if (source == "alpha-stable") {
    const double a = o.alpha_stable.value_or(1.5);
    if (!(a > 0.0 && a <= 2.0)) throw ValidationError("alpha out of range (0, 2]");
    trace = gen_alpha_stable(o.n, o.T, a, o.scale, g.seed);
  } else if (source == "toy-mlp") {
    const auto ds = build_dataset(m, g.seed);
    const auto model = build_model(m, ds, g.seed);
    trace = record_trace(model, ds, o.batch, o.T, o.replacement,
                         GradientTransform::parse(o.transform), g.seed);
  } else if (source == "quadratic") {
    SpectrumSpec spec{ZipfSpectrum{o.lambda_1, o.s}, false};
    const auto lambda = prescribed_eigenvalues(spec, o.n);
    QuadraticObjective q{Eigen::VectorXd::Map(lambda.data(), static_cast<Eigen::Index>(o.n)).asDiagonal(),
                         o.noise_sd};
    Eigen::VectorXd theta = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(o.n));
    trace = record_quadratic_trace(q, theta, o.batch, o.T, g.seed);
  } else {
    throw ValidationError("unknown source '" + source + "'");
  }
  save_trace(*trace, g.output);
  out << fmt::format("n={} T={} B={} seed={}\n", trace->n(), trace->T(), trace->batch_size(), g.seed);
  return kOk;
}

// ----------------------------------------------------------------- analyze

json rate_json(const RateSummary& r) {
  return {{"axis", to_string(r.axis)},
          {"tested", r.tested},
          {"untestable", r.untestable},
          {"mean_dks", json_number(r.mean_dks)},
          {"d_c", json_number(r.d_c)},
          {"powerlaw_rate", r.powerlaw_rate},
          {"mean_p", json_number(r.mean_p)},
          {"gaussian_rate", r.gaussian_rate},
          {"slices_total", r.slices_total},
          {"slices_selected", r.slices_selected},
          {"powerlaw_untestable", r.powerlaw_untestable},
          {"gauss_untestable", r.gauss_untestable}};
}

int cmd_analyze(const GlobalOptions& g, const AnalyzeOptions& o, std::ostream& out,
                std::ostream& err) {
  auto settings = settings_from(g);
  settings.max_slices = o.max_slices;
  validate(settings);
  const auto trace = load_trace(o.trace);
  std::vector<Axis> axes;
  if (o.axis == "both" || o.axis == "dimension") axes.push_back(Axis::DimensionWise);
  if (o.axis == "both" || o.axis == "iteration") axes.push_back(Axis::IterationWise);
  if (axes.empty()) throw ValidationError("--axis must be both, dimension or iteration");

  std::vector<RateSummary> rows;
  for (Axis axis : axes) {
    rows.push_back(analyze_axis(trace, axis, settings));
    const auto& r = rows.back();
    if (r.slices_selected < r.slices_total) {
      err << fmt::format("note: {}-wise slices capped at {} of {}\n", to_string(axis),
                         r.slices_selected, r.slices_total);
    }
  }
  if (g.format == "json") {
    json report = {{"version", kReportVersion},
                   {"settings",
                    {{"seed", settings.seed},
                     {"alpha", settings.alpha},
                     {"k_powerlaw", settings.k_powerlaw},
                     {"k_gauss", settings.k_gauss},
                     {"max_slices", settings.max_slices}}},
                   {"trace", {{"n", trace.n()}, {"T", trace.T()}, {"B", trace.batch_size()}}},
                   {"rows", json::array()}};
    for (const auto& r : rows) report["rows"].push_back(rate_json(r));
    emit(report.dump(2) + "\n", g.output, out);
  } else {
    emit(rates_csv(rows), g.output, out);
  }
  return kOk;
}

// ---------------------------------------------------------------- spectrum

std::string two_column(const json& header, const std::vector<double>& values) {
  std::string text = "# " + header.dump() + "\n";
  for (std::size_t k = 0; k < values.size(); ++k) {
    text += fmt::format("{}\t{:.17g}\n", k + 1, values[k]);
  }
  return text;
}

int cmd_spectrum(const GlobalOptions& g, const SpectrumOptions& o, std::ostream& out) {
  const auto settings = settings_from(g);
  const auto trace = load_trace(o.trace);
  const bool centered = !o.uncentered;
  const auto spec = covariance_spectrum(trace, centered);
  const auto verdict = test_spectrum_power_law(spec, settings.k_powerlaw, settings.alpha);
  TestVerdict gap_verdict;
  gap_verdict.untestable = true;
  if (!spec.eigengaps().empty()) {
    gap_verdict = try_test_power_law(spec.eigengaps(), settings.k_powerlaw, settings.alpha);
  }

  json line = nullptr;
  try {
    const auto top = select_top_k(spec.eigenvalues(), settings.k_powerlaw);
    const auto fit = loglog_line(top);
    line = {{"slope", fit.slope}, {"intercept", fit.intercept}};
  } catch (const Error&) {
  }

  json report = {{"version", kReportVersion},
                 {"centered", centered},
                 {"n", trace.n()},
                 {"T", trace.T()},
                 {"route", spec.gram_route() ? "gram" : "dense"},
                 {"trace", spec.trace()},
                 {"rank", spec.rank()},
                 {"eigenvalues", spec.eigenvalues().size()},
                 {"powerlaw", verdict_json(verdict)},
                 {"eigengap_powerlaw", verdict_json(gap_verdict)},
                 {"loglog", line}};
  if (!g.output.empty()) {
    json header = {{"kind", "eigenvalues"},
                   {"trace", spec.trace()},
                   {"rank", spec.rank()},
                   {"centered", centered},
                   {"fit", report["powerlaw"]}};
    emit(two_column(header, spec.eigenvalues()), g.output + ".eig.tsv", out);
    header["kind"] = "eigengaps";
    header["fit"] = report["eigengap_powerlaw"];
    emit(two_column(header, spec.eigengaps()), g.output + ".gaps.tsv", out);
    emit(report.dump(2) + "\n", g.output + ".json", out);
  }
  out << report.dump(2) << "\n";
  return kOk;
}

// --------------------------------------------------------- compare-hessian

int cmd_compare_hessian(const GlobalOptions& g, const CompareOptions& o, const ModelOptions& m,
                        std::ostream& out) {
  const auto settings = settings_from(g);
  Eigen::MatrixXd hessian;
  std::optional<GradientHistoryMatrix> trace;
  json model_info;
  std::vector<double> injected;

  if (o.quadratic) {
    if (o.n > kMaxHessianDimension) throw ValidationError("model too large for the Hessian (n > 2000)");
    SpectrumSpec spec{ZipfSpectrum{1.0, o.s}, false};
    injected = prescribed_eigenvalues(spec, o.n);
    QuadraticObjective q{Eigen::VectorXd::Map(injected.data(), static_cast<Eigen::Index>(o.n)).asDiagonal(),
                         o.noise_sd};
    const Eigen::VectorXd theta = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(o.n));
    hessian = hessian_fd([&](const Eigen::VectorXd& x) { return q.gradient(x); }, theta, o.h);
    trace = record_quadratic_trace(q, theta, o.batch, o.T, g.seed);
    model_info = {{"kind", "quadratic"}, {"parameters", o.n}, {"s", o.s}, {"noise_sd", o.noise_sd}};
  } else {
    const auto ds = build_dataset(m, g.seed);
    const auto model = build_model(m, ds, g.seed);
    if (model.parameter_count() > kMaxHessianDimension) {
      throw ValidationError("model too large for the Hessian (n > 2000)");
    }
    if (model.has_batchnorm() && !model.batchnorm_frozen()) {
      throw ValidationError("BatchNorm models need --freeze-batchnorm for the Hessian");
    }
    hessian = hessian_fd(model, ds, o.h);
    trace = record_trace(model, ds, o.batch, o.T, o.replacement, GradientTransform::identity(), g.seed);
    model_info = model_json(m, ds, model);
    model_info["kind"] = "mlp";
  }

  const auto h_values = symmetric_eigenvalues(hessian);
  std::vector<double> h_positive;
  std::copy_if(h_values.begin(), h_values.end(), std::back_inserter(h_positive), [](double v) { return v > 0.0; });
  const auto h_spec = SpectrumResult::from_eigenvalues(h_positive, false);
  const auto c_spec = covariance_spectrum(*trace, true);
  const double B = static_cast<double>(o.batch);
  const std::size_t rows = std::min({o.top, h_values.size(), c_spec.eigenvalues().size()});

  json table = json::array();
  for (std::size_t k = 0; k < rows; ++k) {
    const double h = h_values[k];
    const double c = B * c_spec.eigenvalues()[k];
    json row = {{"rank", k + 1}, {"hessian", h}, {"scaled_covariance", c},
                {"ratio", h != 0.0 ? json_number(c / h) : json(nullptr)}};
    if (!injected.empty()) row["injected"] = injected[k];
    table.push_back(row);
  }
  std::vector<double> c_scaled(c_spec.eigenvalues());
  for (double& v : c_scaled) v *= B;
  const auto c_scaled_spec = SpectrumResult::from_eigenvalues(c_scaled, true);

  json report = {{"version", kReportVersion},
                 {"model", model_info},
                 {"batch", o.batch},
                 {"T", o.T},
                 {"top", rows},
                 {"rows", table},
                 {"hessian_min_eigenvalue", h_values.back()},
                 {"hessian_negative_count", std::count_if(h_values.begin(), h_values.end(),
                                                          [](double v) { return v < 0.0; })},
                 {"hessian_powerlaw", verdict_json(test_spectrum_power_law(
                                          h_spec, settings.k_powerlaw, settings.alpha))},
                 {"covariance_powerlaw", verdict_json(test_spectrum_power_law(
                                             c_scaled_spec, settings.k_powerlaw, settings.alpha))}};
  emit(report.dump(2) + "\n", g.output, out);
  return kOk;
}

// -------------------------------------------------------------- robustness

int cmd_robustness(const GlobalOptions& g, const RobustnessOptions& o, std::ostream& out) {
  const auto settings = settings_from(g);
  const auto trace = load_trace(o.trace);
  if (trace.n() > kMaxDenseDimension) {
    throw ValidationError("robustness needs n <= " + std::to_string(kMaxDenseDimension));
  }
  if (o.trials < 1) throw ValidationError("--trials must be >= 1");
  const bool centered = !o.uncentered;
  const Eigen::MatrixXd cov = covariance_matrix(trace, centered);
  const auto spec = symmetric_spectrum(cov, centered);
  if (o.k < 1 || o.k > spec.rank()) {
    throw ValidationError("--k must lie in [1, rank] (rank " + std::to_string(spec.rank()) + ")");
  }
  std::vector<RobustnessReport> reports(o.trials);
  parallel_for(o.trials, settings.workers, [&](std::size_t t) {
    Rng rng(slice_seed(g.seed, 3, t));
    reports[t] = perturb_and_measure(cov, spec, o.k, o.eps, rng);
  });

  const auto fit = test_spectrum_power_law(spec, settings.k_powerlaw, settings.alpha);
  const bool zipf_like = fit.fit && fit.fit->s_hat >= 0.8 && fit.fit->s_hat <= 1.2;

  double max_sin = 0.0, min_bound = std::numeric_limits<double>::infinity(), max_bound = 0.0, mean_norm = 0.0;
  double zipf_bound = std::numeric_limits<double>::infinity();
  std::size_t violations = 0;
  for (const auto& r : reports) {
    max_sin = std::max(max_sin, r.empirical_sin);
    min_bound = std::min(min_bound, r.bound);
    max_bound = std::max(max_bound, r.bound);
    mean_norm += r.op_norm / static_cast<double>(reports.size());
    violations += r.violated ? 1 : 0;
    if (zipf_like) {
      zipf_bound = std::min(zipf_bound, zipf_robustness_bound(spec.eigenvalues().front(), o.k,
                                                              fit.fit->s_hat, o.eps * r.op_norm));
    }
  }
  json report = {{"version", kReportVersion},
                 {"k", o.k},
                 {"eps", o.eps},
                 {"trials", o.trials},
                 {"centered", centered},
                 {"gap_min", json_number(reports.front().gap_min)},
                 {"op_norm_mean", mean_norm},
                 {"max_sin", max_sin},
                 {"min_bound", json_number(min_bound)},
                 {"max_bound", json_number(max_bound)},
                 {"violations", violations},
                 {"s_hat", fit.fit ? json(fit.fit->s_hat) : json(nullptr)},
                 {"zipf_bound", zipf_like ? json_number(zipf_bound) : json(nullptr)}};
  emit(report.dump(2) + "\n", g.output, out);
  return kOk;
}

}  // namespace

std::string rates_csv(const std::vector<RateSummary>& rows) {
  std::string text;
  for (std::size_t c = 0; c < std::size(kRateColumns); ++c) {
    text += (c ? "," : "") + std::string(kRateColumns[c]);
  }
  text += "\n";
  for (const auto& r : rows) {
    text += fmt::format("{},{},{},{},{},{},{},{}\n", to_string(r.axis), r.tested, r.untestable,
                        number(r.mean_dks), number(r.d_c), number(r.powerlaw_rate),
                        number(r.mean_p), number(r.gaussian_rate));
  }
  return text;
}

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, out, err);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gradient-noise statistics: trace generation, slice tests and spectra", "gradspec"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--seed", g.seed, "Root seed");
  app.add_option("--alpha", g.alpha, "Significance level");
  app.add_option("--k-powerlaw", g.k_powerlaw, "Tail size for KS power-law tests");
  app.add_option("--k-gauss", g.k_gauss, "Subsample size for normality tests");
  app.add_option("--workers", g.workers, "Worker threads (fallback: GRADSPEC_WORKERS)");
  app.add_option("-o,--output", g.output, "Output path (prefix for spectrum)");
  app.add_option("--format", g.format, "Report format")->check(CLI::IsMember({"csv", "json"}));

  GenerateOptions gen;
  ModelOptions gen_model;
  auto* generate = app.add_subcommand("generate", "Write a gradient history trace");
  generate->add_option("--source", gen.source, "gaussian-zipf | alpha-stable | toy-mlp | quadratic");
  generate->add_option("--n", gen.n, "Parameter count n");
  generate->add_option("--T", gen.T, "Iteration count T");
  generate->add_option("--s", gen.s, "Zipf exponent of the prescribed spectrum");
  generate->add_option("--lambda1", gen.lambda_1, "Largest prescribed eigenvalue");
  generate->add_flag("--rotate", gen.rotate, "Random orthogonal eigenbasis");
  generate->add_option("--alpha-stable", gen.alpha_stable, "Stability index in (0, 2]");
  generate->add_option("--scale", gen.scale, "Alpha-stable scale");
  generate->add_option("--batch", gen.batch, "Minibatch size B");
  generate->add_flag("--replacement", gen.replacement, "Sample minibatches with replacement");
  generate->add_option("--transform", gen.transform, "identity | clip:TAU | momentum:B1 | adam[:B1[:B2[:EPS]]] | weight-decay:L");
  generate->add_option("--noise-sd", gen.noise_sd, "Gradient noise level of the quadratic source");
  add_model_options(generate, gen_model);

  AnalyzeOptions an;
  auto* analyze = app.add_subcommand("analyze", "Power-law and normality rates over trace slices");
  analyze->add_option("trace", an.trace, "Trace file")->required();
  analyze->add_option("--axis", an.axis, "both | dimension | iteration");
  analyze->add_option("--max-slices", an.max_slices, "Slice cap for axes beyond 20000 slices");

  SpectrumOptions sp;
  auto* spectrum = app.add_subcommand("spectrum", "Covariance spectrum, eigengaps and verdicts");
  spectrum->add_option("trace", sp.trace, "Trace file")->required();
  spectrum->add_flag("--uncentered,!--centered", sp.uncentered, "Second moment instead of covariance");

  CompareOptions cmp;
  ModelOptions cmp_model;
  cmp_model.pretrain_epochs = 20;
  auto* compare = app.add_subcommand("compare-hessian", "Hessian vs batch-scaled covariance spectra");
  compare->add_flag("--quadratic", cmp.quadratic, "Injected quadratic loss with isotropic noise");
  compare->add_option("--n", cmp.n, "Dimension of the quadratic loss");
  compare->add_option("--s", cmp.s, "Zipf exponent of the quadratic loss");
  compare->add_option("--batch", cmp.batch, "Minibatch size B");
  compare->add_option("--T", cmp.T, "Iterations recorded for the covariance");
  compare->add_flag("--replacement,!--no-replacement", cmp.replacement, "Sampling mode");
  compare->add_option("--top", cmp.top, "Eigenvalues listed side by side");
  compare->add_option("--fd-step", cmp.h, "Finite-difference step");
  compare->add_option("--noise-sd", cmp.noise_sd, "Noise level of the quadratic loss");
  add_model_options(compare, cmp_model);

  RobustnessOptions rb;
  auto* robustness = app.add_subcommand("robustness", "Eigenvector perturbation vs Davis-Kahan bound");
  robustness->add_option("trace", rb.trace, "Trace file")->required();
  robustness->add_option("--k", rb.k, "Eigenvector rank (1-based)");
  robustness->add_option("--eps", rb.eps, "Perturbation size");
  robustness->add_option("--trials", rb.trials, "Seeded trials");
  robustness->add_flag("--uncentered,!--centered", rb.uncentered, "Second moment instead of covariance");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (generate->parsed()) return cmd_generate(g, gen, gen_model, out);
    if (analyze->parsed()) return cmd_analyze(g, an, out, err);
    if (spectrum->parsed()) return cmd_spectrum(g, sp, out);
    if (compare->parsed()) return cmd_compare_hessian(g, cmp, cmp_model, out);
    if (robustness->parsed()) return cmd_robustness(g, rb, out);
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}

}  // namespace gradspec::cli
