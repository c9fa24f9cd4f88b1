// nowag: compress weight matrices (vector quantization or pruning), inspect
// and evaluate the archives, and run compressed-form matvecs.
//
// Exit codes: 0 success, 2 usage or input validation failure, 1 internal.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "nowag/calibration.hpp"
#include "nowag/normalization.hpp"
#include "nowag/pruner.hpp"
#include "nowag/runtime.hpp"
#include "nowag/scoring.hpp"
#include "nowag/tensor_io.hpp"
#include "nowag/types.hpp"
#include "nowag/vq.hpp"

namespace {

using nlohmann::ordered_json;

struct Report {
  std::string command;
  bool as_json = false;
  ordered_json inputs = ordered_json::object();
  ordered_json metrics = ordered_json::object();
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  void emit() const {
    double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                          start)
                    .count();
    if (as_json) {
      ordered_json j;
      j["command"] = command;
      j["inputs"] = inputs;
      j["metrics"] = metrics;
      j["timings_ms"] = ordered_json{{"total", ms}};
      std::cout << j.dump(2) << "\n";
      return;
    }
    for (auto it = metrics.begin(); it != metrics.end(); ++it) {
      std::cout << it.key() << ": "
                << (it.value().is_string() ? it.value().get<std::string>() : it.value().dump())
                << "\n";
    }
    std::printf("time: %.3f ms\n", ms);
  }
};

nowag::HessianDiagonal load_hessian(const std::string& path, std::size_t expected_dim) {
  nowag::DenseVector v = nowag::load_vector(path);
  nowag::HessianDiagonal h(v.len);
  for (std::size_t j = 0; j < v.len; ++j) h.weights[j] = v.data[j];
  nowag::validate_hessian_diag(h, expected_dim);
  return h;
}

double max_abs_error(const nowag::DenseMatrix& a, const nowag::DenseMatrix& b) {
  double worst = 0.0;
  for (std::size_t p = 0; p < a.data.size(); ++p) {
    worst = std::max(worst, std::fabs(static_cast<double>(a.data[p]) -
                                      static_cast<double>(b.data[p])));
  }
  return worst;
}

std::string pattern_to_string(const nowag::SparsityPattern& p) {
  if (p.kind == nowag::SparsityPattern::Kind::kUnstructured) {
    return "unstructured(" + std::to_string(p.sparsity) + ")";
  }
  return std::to_string(p.keep_n) + ":" + std::to_string(p.group_m);
}

nowag::SparsityPattern parse_nm(const std::string& text) {
  std::size_t colon = text.find(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 >= text.size()) {
    throw nowag::ValidationError("--nm expects N:M, e.g. 2:4, got '" + text + "'");
  }
  std::size_t used_n = 0;
  std::size_t used_m = 0;
  unsigned long n = 0;
  unsigned long m = 0;
  try {
    n = std::stoul(text.substr(0, colon), &used_n);
    m = std::stoul(text.substr(colon + 1), &used_m);
  } catch (const std::exception&) {
    throw nowag::ValidationError("--nm expects N:M with integer N and M, got '" + text + "'");
  }
  if (used_n != colon || used_m != text.size() - colon - 1) {
    throw nowag::ValidationError("--nm expects N:M with integer N and M, got '" + text + "'");
  }
  return nowag::SparsityPattern::semi_structured(static_cast<std::uint32_t>(n),
                                                 static_cast<std::uint32_t>(m));
}

void add_ratio_metrics(Report& r, const nowag::CompressedArchive& a) {
  nowag::CompressionRatio cr = nowag::compression_ratio_breakdown(a);
  r.metrics["compression_ratio_net"] = cr.net;
  r.metrics["compression_ratio_gross"] = cr.gross;
}

void cmd_stats(Report& r, const std::string& acts_path, const std::string& out_path) {
  nowag::ActivationBatch acts(nowag::load_matrix(acts_path));
  nowag::HessianDiagonal h = nowag::compute_hessian_diag(acts);
  nowag::DenseVector out(h.dim);
  for (std::size_t j = 0; j < h.dim; ++j) out.data[j] = static_cast<float>(h.weights[j]);
  nowag::save_tensor(out_path, out);

  double lo = h.dim ? h.weights[0] : 0.0;
  double hi = lo;
  for (double w : h.weights) {
    lo = std::min(lo, w);
    hi = std::max(hi, w);
  }
  r.metrics["samples"] = acts.samples;
  r.metrics["dim"] = acts.dim;
  r.metrics["h_min"] = lo;
  r.metrics["h_max"] = hi;
  r.metrics["out"] = out_path;
}

void cmd_quantize(Report& r, const std::string& weights_path, const std::string& hessian_path,
                  const std::string& out_path, const nowag::VQConfig& cfg, double eps) {
  nowag::DenseMatrix w = nowag::load_matrix(weights_path);
  nowag::HessianDiagonal h = load_hessian(hessian_path, w.cols);
  nowag::QuantizeResult qr = nowag::quantize(w, h, cfg, eps);

  nowag::CompressedArchive archive;
  archive.payload = std::move(qr.qm);
  nowag::save_archive(out_path, archive);

  const nowag::QuantizedMatrix& qm = archive.quantized();
  r.metrics["rows"] = qm.rows;
  r.metrics["cols"] = qm.cols;
  r.metrics["padded_cols"] = qm.padded_cols;
  r.metrics["subvec_dim"] = qm.subvec_dim;
  r.metrics["k"] = qm.codebook.k;
  r.metrics["n_subvectors"] = qm.assignments.count;
  r.metrics["iterations"] = qr.iterations;
  r.metrics["objective"] = qr.objective;
  r.metrics["bits_per_value"] = nowag::bits_per_value(qm);
  add_ratio_metrics(r, archive);
  r.metrics["out"] = out_path;
}

void cmd_prune(Report& r, const std::string& weights_path, const std::string& hessian_path,
               const std::string& out_path, const nowag::SparsityPattern& pattern,
               const std::string& score_kind, double eps) {
  nowag::DenseMatrix w = nowag::load_matrix(weights_path);
  nowag::HessianDiagonal h = load_hessian(hessian_path, w.cols);

  nowag::NormalizeResult norm = nowag::normalize(w, eps);
  nowag::PrunedMatrix pm;
  if (score_kind == "wanda") {
    nowag::ScoreMatrix s = nowag::wanda_scores(w, h);
    pm = nowag::prune_with_scores(s, w, pattern);
  } else {
    pm = nowag::prune(w, h, pattern, eps);
  }

  // Loss in the normalized frame: zeroing entry (i,j) of the normalized
  // matrix costs normalized[i,j]^2 * h[j].
  nowag::DenseMatrix masked_norm = norm.normalized;
  for (std::size_t p = 0; p < masked_norm.data.size(); ++p) {
    if (!pm.mask.bits[p]) masked_norm.data[p] = 0.0f;
  }
  double loss = nowag::proxy_loss_diag(norm.normalized, masked_norm, h);

  nowag::CompressedArchive archive;
  archive.payload = std::move(pm);
  nowag::save_archive(out_path, archive);

  const nowag::PrunedMatrix& saved = archive.pruned();
  r.metrics["rows"] = saved.values.rows;
  r.metrics["cols"] = saved.values.cols;
  r.metrics["pattern"] = pattern_to_string(pattern);
  r.metrics["score"] = score_kind;
  r.metrics["zero_count"] = saved.mask.zero_count();
  r.metrics["kept_count"] = saved.mask.kept_count();
  r.metrics["proxy_loss_diag"] = loss;
  add_ratio_metrics(r, archive);
  r.metrics["out"] = out_path;
}

void cmd_eval(Report& r, const std::string& weights_path, const std::string& archive_path,
              const std::string& hessian_path, const std::string& full_hessian_path,
              double eps) {
  nowag::DenseMatrix w = nowag::load_matrix(weights_path);
  nowag::CompressedArchive archive = nowag::load_archive(archive_path);
  if (archive.rows() != w.rows || archive.cols() != w.cols) {
    throw nowag::ValidationError("eval: archive shape " + std::to_string(archive.rows()) + "x" +
                                 std::to_string(archive.cols()) + " != weights shape " +
                                 std::to_string(w.rows) + "x" + std::to_string(w.cols));
  }
  nowag::HessianDiagonal h = load_hessian(hessian_path, w.cols);

  nowag::DenseMatrix normalized;
  nowag::DenseMatrix recon_norm;
  nowag::DenseMatrix recon_raw;
  if (archive.is_quantized()) {
    const nowag::QuantizedMatrix& qm = archive.quantized();
    // The archive carries its normalization, so compare in its frame.
    normalized = nowag::renormalize(w, qm.scales);
    recon_norm = nowag::dequantize(qm, false);
    recon_raw = nowag::dequantize(qm, true);
  } else {
    const nowag::PrunedMatrix& pm = archive.pruned();
    nowag::NormalizeResult norm = nowag::normalize(w, eps);
    normalized = std::move(norm.normalized);
    recon_norm = normalized;
    for (std::size_t p = 0; p < recon_norm.data.size(); ++p) {
      if (!pm.mask.bits[p]) recon_norm.data[p] = 0.0f;
    }
    recon_raw = pm.values;
  }

  r.metrics["kind"] = archive.is_quantized() ? "quantized" : "pruned";
  r.metrics["proxy_loss_diag"] = nowag::proxy_loss_diag(normalized, recon_norm, h);
  if (!full_hessian_path.empty()) {
    nowag::DenseMatrix full = nowag::load_matrix(full_hessian_path);
    r.metrics["proxy_loss_full"] = nowag::proxy_loss_full(w, recon_raw, full);
  }
  r.metrics["max_abs_error"] = max_abs_error(w, recon_raw);
  add_ratio_metrics(r, archive);
}

void cmd_reconstruct(Report& r, const std::string& archive_path, const std::string& out_path) {
  nowag::CompressedArchive archive = nowag::load_archive(archive_path);
  nowag::DenseMatrix dense = archive.is_quantized()
                                 ? nowag::dequantize(archive.quantized(), true)
                                 : archive.pruned().values;
  nowag::save_tensor(out_path, dense);
  r.metrics["rows"] = dense.rows;
  r.metrics["cols"] = dense.cols;
  r.metrics["kind"] = archive.is_quantized() ? "quantized" : "pruned";
  r.metrics["out"] = out_path;
}

void cmd_info(Report& r, const std::string& archive_path) {
  nowag::CompressedArchive archive = nowag::load_archive(archive_path);
  nowag::validate_archive(archive);
  r.metrics["kind"] = archive.is_quantized() ? "quantized" : "pruned";
  r.metrics["version"] = archive.format_version;
  r.metrics["rows"] = archive.rows();
  r.metrics["cols"] = archive.cols();
  if (archive.is_quantized()) {
    const nowag::QuantizedMatrix& qm = archive.quantized();
    r.metrics["padded_cols"] = qm.padded_cols;
    r.metrics["subvec_dim"] = qm.subvec_dim;
    r.metrics["k"] = qm.codebook.k;
    r.metrics["n_subvectors"] = qm.assignments.count;
    r.metrics["bits_per_value"] = nowag::bits_per_value(qm);
  } else {
    const nowag::PrunedMatrix& pm = archive.pruned();
    r.metrics["pattern"] = pattern_to_string(pm.mask.pattern);
    r.metrics["zero_count"] = pm.mask.zero_count();
    r.metrics["kept_count"] = pm.mask.kept_count();
  }
  add_ratio_metrics(r, archive);
  r.metrics["validation"] = "ok";
}

void cmd_scores(Report& r, const std::string& weights_path, const std::string& hessian_path,
                const std::string& csv_path, const std::string& score_kind, double eps) {
  nowag::DenseMatrix w = nowag::load_matrix(weights_path);
  nowag::HessianDiagonal h = load_hessian(hessian_path, w.cols);
  nowag::ScoreMatrix s;
  if (score_kind == "wanda") {
    s = nowag::wanda_scores(w, h);
  } else {
    nowag::NormalizeResult norm = nowag::normalize(w, eps);
    s = nowag::nowag_scores(norm.normalized, h);
  }

  std::FILE* f = std::fopen(csv_path.c_str(), "w");
  if (!f) {
    throw nowag::ValidationError("cannot open " + csv_path + " for writing");
  }
  for (std::size_t i = 0; i < s.rows; ++i) {
    for (std::size_t j = 0; j < s.cols; ++j) {
      std::fprintf(f, j + 1 == s.cols ? "%.9g\n" : "%.9g,", s.at(i, j));
    }
  }
  std::fclose(f);

  double lo = s.size() ? s.scores[0] : 0.0;
  double hi = lo;
  for (double v : s.scores) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  r.metrics["rows"] = s.rows;
  r.metrics["cols"] = s.cols;
  r.metrics["score"] = score_kind;
  r.metrics["score_min"] = lo;
  r.metrics["score_max"] = hi;
  r.metrics["csv"] = csv_path;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"matrix compression: two-sided normalization, data-weighted vector "
               "quantization, and saliency pruning"};
  app.require_subcommand(1);

  Report report;
  int rc = 0;

  // stats
  auto* stats = app.add_subcommand("stats", "accumulate per-channel activation statistics");
  std::string st_acts, st_out;
  bool st_json = false;
  stats->add_option("--acts", st_acts, "activation batch, 2-D tensor file")->required();
  stats->add_option("--out", st_out, "output 1-D tensor of per-channel weights")->required();
  stats->add_flag("--json", st_json, "emit a JSON report");
  stats->callback([&] {
    report.command = "stats";
    report.as_json = st_json;
    report.inputs = {{"acts", st_acts}, {"out", st_out}};
    cmd_stats(report, st_acts, st_out);
  });

  // quantize
  auto* quant = app.add_subcommand("quantize", "compress with a weighted vector quantizer");
  std::string q_weights, q_hessian, q_out;
  nowag::VQConfig q_cfg;
  double q_eps = nowag::kDefaultEpsilon;
  bool q_json = false;
  quant->add_option("--weights", q_weights, "weight matrix, 2-D tensor file")->required();
  quant->add_option("--hessian", q_hessian, "per-channel weights, 1-D tensor file")->required();
  quant->add_option("--out", q_out, "output archive path")->required();
  quant->add_option("--dim", q_cfg.subvec_dim, "subvector length")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  quant->add_option("--bits", q_cfg.bits_target, "index bits per value")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  quant->add_option("--iters", q_cfg.n_iter, "k-means iteration budget")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  quant->add_option("--seed", q_cfg.seed, "rng seed")->capture_default_str();
  quant->add_option("--subsample", q_cfg.init_subsample, "seeding candidate pool cap")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  quant->add_option("--eps", q_eps, "normalization epsilon")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  quant->add_flag("--json", q_json, "emit a JSON report");
  quant->callback([&] {
    report.command = "quantize";
    report.as_json = q_json;
    report.inputs = {{"weights", q_weights}, {"hessian", q_hessian},   {"out", q_out},
                     {"dim", q_cfg.subvec_dim}, {"bits", q_cfg.bits_target},
                     {"iters", q_cfg.n_iter},   {"seed", q_cfg.seed},
                     {"subsample", q_cfg.init_subsample}, {"eps", q_eps}};
    cmd_quantize(report, q_weights, q_hessian, q_out, q_cfg, q_eps);
  });

  // prune
  auto* prune = app.add_subcommand("prune", "zero low-saliency weights");
  std::string p_weights, p_hessian, p_out, p_nm, p_score = "nowag";
  double p_sparsity = 0.0, p_eps = nowag::kDefaultEpsilon;
  bool p_json = false;
  prune->add_option("--weights", p_weights, "weight matrix, 2-D tensor file")->required();
  prune->add_option("--hessian", p_hessian, "per-channel weights, 1-D tensor file")->required();
  prune->add_option("--out", p_out, "output archive path")->required();
  auto* p_s_opt = prune->add_option("--sparsity", p_sparsity, "fraction of entries to zero")
                      ->check(CLI::Range(0.0, 1.0));
  auto* p_nm_opt = prune->add_option("--nm", p_nm, "semi-structured pattern N:M");
  p_s_opt->excludes(p_nm_opt);
  p_nm_opt->excludes(p_s_opt);
  prune->add_option("--score", p_score, "selection score")
      ->check(CLI::IsMember({"nowag", "wanda"}))
      ->capture_default_str();
  prune->add_option("--eps", p_eps, "normalization epsilon")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  prune->add_flag("--json", p_json, "emit a JSON report");
  prune->callback([&] {
    nowag::SparsityPattern pattern;
    if (p_s_opt->count()) {
      pattern = nowag::SparsityPattern::unstructured(p_sparsity);
    } else if (p_nm_opt->count()) {
      pattern = parse_nm(p_nm);
    } else {
      throw nowag::ValidationError("prune: exactly one of --sparsity or --nm is required");
    }
    report.command = "prune";
    report.as_json = p_json;
    report.inputs = {{"weights", p_weights}, {"hessian", p_hessian}, {"out", p_out},
                     {"pattern", pattern_to_string(pattern)},        {"score", p_score},
                     {"eps", p_eps}};
    cmd_prune(report, p_weights, p_hessian, p_out, pattern, p_score, p_eps);
  });

  // eval
  auto* eval = app.add_subcommand("eval", "compare an archive against the original weights");
  std::string e_weights, e_archive, e_hessian, e_full;
  double e_eps = nowag::kDefaultEpsilon;
  bool e_json = false;
  eval->add_option("--weights", e_weights, "original weight matrix")->required();
  eval->add_option("--archive", e_archive, "compressed archive")->required();
  eval->add_option("--hessian", e_hessian, "per-channel weights, 1-D tensor file")->required();
  eval->add_option("--full-hessian", e_full, "full second-moment matrix, 2-D tensor file");
  eval->add_option("--eps", e_eps, "normalization epsilon (pruned archives)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  eval->add_flag("--json", e_json, "emit a JSON report");
  eval->callback([&] {
    report.command = "eval";
    report.as_json = e_json;
    report.inputs = {{"weights", e_weights},
                     {"archive", e_archive},
                     {"hessian", e_hessian},
                     {"full_hessian", e_full},
                     {"eps", e_eps}};
    cmd_eval(report, e_weights, e_archive, e_hessian, e_full, e_eps);
  });

  // reconstruct
  auto* recon = app.add_subcommand("reconstruct", "decode an archive to a dense tensor file");
  std::string r_archive, r_out;
  bool r_json = false;
  recon->add_option("--archive", r_archive, "compressed archive")->required();
  recon->add_option("--out", r_out, "output 2-D tensor file")->required();
  recon->add_flag("--json", r_json, "emit a JSON report");
  recon->callback([&] {
    report.command = "reconstruct";
    report.as_json = r_json;
    report.inputs = {{"archive", r_archive}, {"out", r_out}};
    cmd_reconstruct(report, r_archive, r_out);
  });

  // info
  auto* info = app.add_subcommand("info", "print archive header fields and validation status");
  std::string i_archive;
  bool i_json = false;
  info->add_option("--archive", i_archive, "compressed archive")->required();
  info->add_flag("--json", i_json, "emit a JSON report");
  info->callback([&] {
    report.command = "info";
    report.as_json = i_json;
    report.inputs = {{"archive", i_archive}};
    cmd_info(report, i_archive);
  });

  // scores
  auto* scores = app.add_subcommand("scores", "dump per-entry saliency scores as CSV");
  std::string sc_weights, sc_hessian, sc_csv, sc_score = "nowag";
  double sc_eps = nowag::kDefaultEpsilon;
  bool sc_json = false;
  scores->add_option("--weights", sc_weights, "weight matrix, 2-D tensor file")->required();
  scores->add_option("--hessian", sc_hessian, "per-channel weights, 1-D tensor file")->required();
  scores->add_option("--csv", sc_csv, "output CSV path")->required();
  scores->add_option("--score", sc_score, "score kind")
      ->check(CLI::IsMember({"nowag", "wanda"}))
      ->capture_default_str();
  scores->add_option("--eps", sc_eps, "normalization epsilon")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  scores->add_flag("--json", sc_json, "emit a JSON report");
  scores->callback([&] {
    report.command = "scores";
    report.as_json = sc_json;
    report.inputs = {{"weights", sc_weights}, {"hessian", sc_hessian}, {"csv", sc_csv},
                     {"score", sc_score},     {"eps", sc_eps}};
    cmd_scores(report, sc_weights, sc_hessian, sc_csv, sc_score, sc_eps);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const nowag::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }

  report.emit();
  return rc;
}
