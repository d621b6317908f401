// SPDX-License-Identifier: Apache-2.0

#include "xlmimo/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>

#include "xlmimo/channel.hpp"
#include "xlmimo/rng.hpp"

namespace xlm {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::vector<float> pack_interleaved(const CMat& m) {
  std::vector<float> out(2 * m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    out[2 * i] = static_cast<float>(m.a[i].real());
    out[2 * i + 1] = static_cast<float>(m.a[i].imag());
  }
  return out;
}

std::string format_cell(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

double position_error(double x_hat, double y_hat, double x_true,
                      double y_true) {
  return std::hypot(x_hat - x_true, y_hat - y_true);
}

double nmse_ratio(const CMat& h_hat, const CMat& h_true) {
  if (h_hat.rows != h_true.rows || h_hat.cols != h_true.cols)
    throw EvalError("nmse: shape mismatch");
  if (h_true.size() == 0) throw EvalError("nmse: empty truth");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < h_true.size(); ++i) {
    num += std::norm(h_hat.a[i] - h_true.a[i]);
    den += std::norm(h_true.a[i]);
  }
  if (den <= 0.0) throw EvalError("nmse: zero-norm truth");
  return num / den;
}

LsEstimator::LsEstimator(const CombinerSet& cs, double min_pivot)
    : w_(cs.stacked), chol_([&] {
        const int m = cs.rows();
        if (m < 1 || cs.n_ant < 1)
          throw InvalidParameter("ls: empty combiner");
        CMat gram(m, m);
        for (int r = 0; r < m; ++r)
          for (int c = 0; c < m; ++c) {
            cdouble acc = 0.0;
            for (int t = 0; t < cs.n_ant; ++t)
              acc += w_.at(r, t) * std::conj(w_.at(c, t));
            gram.at(r, c) = acc;
          }
        return CholeskyHerm(gram, min_pivot);
      }()) {}

CMat LsEstimator::estimate(const CMat& y) const {
  if (y.cols != w_.rows)
    throw InvalidParameter("ls: observation width does not match combiner");
  CMat h(y.rows, w_.cols);
  std::vector<cdouble> b(static_cast<std::size_t>(y.cols));
  for (int k = 0; k < y.rows; ++k) {
    for (int m = 0; m < y.cols; ++m) b[static_cast<std::size_t>(m)] = y.at(k, m);
    const std::vector<cdouble> z = chol_.solve(b);
    for (int t = 0; t < w_.cols; ++t) {
      cdouble acc = 0.0;
      for (int m = 0; m < w_.rows; ++m) acc += std::conj(w_.at(m, t)) * z[m];
      h.at(k, t) = acc;
    }
  }
  return h;
}

void GridSpec::validate() const {
  if (n_r < 1 || n_theta < 1)
    throw InvalidParameter("grid: point counts must be >= 1");
  if (!(r_min > 0.0) || !(r_max >= r_min))
    throw InvalidParameter("grid: need 0 < r_min <= r_max");
  if (!(theta_max >= theta_min))
    throw InvalidParameter("grid: need theta_min <= theta_max");
}

double GridLocalizer::radius_at(int i) const {
  if (i < 0 || i >= spec_.n_r) throw InvalidParameter("grid: radius index");
  if (spec_.n_r == 1) return spec_.r_min;
  const double t = static_cast<double>(i) / (spec_.n_r - 1);
  return spec_.r_min * std::pow(spec_.r_max / spec_.r_min, t);
}

double GridLocalizer::theta_at(int j) const {
  if (j < 0 || j >= spec_.n_theta) throw InvalidParameter("grid: angle index");
  if (spec_.n_theta == 1) return spec_.theta_min;
  const double t = static_cast<double>(j) / (spec_.n_theta - 1);
  return spec_.theta_min + (spec_.theta_max - spec_.theta_min) * t;
}

GridLocalizer::GridLocalizer(const CombinerSet& cs, const ArrayLayout& layout,
                             const CarrierConfig& carrier,
                             const GridSpec& spec)
    : spec_(spec), k_(carrier.n_sc), m_(cs.rows()) {
  spec_.validate();
  if (cs.n_ant != layout.n())
    throw InvalidParameter("grid: combiner width does not match array");
  const std::size_t per_point = 2u * static_cast<std::size_t>(k_) * m_;
  dict_.assign(static_cast<std::size_t>(spec_.n_r) * spec_.n_theta * per_point,
               0.0f);
  for (int i = 0; i < spec_.n_r; ++i) {
    const double r = radius_at(i);
    for (int j = 0; j < spec_.n_theta; ++j) {
      const double th = theta_at(j);
      float* dst =
          dict_.data() +
          (static_cast<std::size_t>(i) * spec_.n_theta + j) * per_point;
      for (int k = 0; k < k_; ++k) {
        const double f = subcarrier_freq(carrier, k);
        const std::vector<cdouble> a = steering_vector(layout, r, th, f);
        std::vector<cdouble> v = matvec(cs.stacked, a);
        double nrm = 0.0;
        for (const cdouble& e : v) nrm += std::norm(e);
        nrm = std::sqrt(nrm);
        const double s = nrm > 0.0 ? 1.0 / nrm : 0.0;
        for (int m = 0; m < m_; ++m) {
          dst[2 * (static_cast<std::size_t>(k) * m_ + m)] =
              static_cast<float>(v[static_cast<std::size_t>(m)].real() * s);
          dst[2 * (static_cast<std::size_t>(k) * m_ + m) + 1] =
              static_cast<float>(v[static_cast<std::size_t>(m)].imag() * s);
        }
      }
    }
  }
}

Polar GridLocalizer::localize(const CMat& y) const {
  if (y.rows != k_ || y.cols != m_)
    throw InvalidParameter("grid: observation shape mismatch");
  const std::vector<float> yf = pack_interleaved(y);
  const std::size_t n_points =
      static_cast<std::size_t>(spec_.n_r) * spec_.n_theta;
  const std::size_t per_point = 2u * static_cast<std::size_t>(k_) * m_;
  std::vector<double> score(n_points, 0.0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < static_cast<std::ptrdiff_t>(n_points); ++p) {
    const float* d = dict_.data() + static_cast<std::size_t>(p) * per_point;
    double s = 0.0;
    for (int k = 0; k < k_; ++k) {
      double re = 0.0, im = 0.0;
      const float* dk = d + 2 * static_cast<std::size_t>(k) * m_;
      const float* yk = yf.data() + 2 * static_cast<std::size_t>(k) * m_;
      for (int m = 0; m < m_; ++m) {
        // conj(dict) * y accumulated in double
        const double dr = dk[2 * m], di = dk[2 * m + 1];
        const double yr = yk[2 * m], yi = yk[2 * m + 1];
        re += dr * yr + di * yi;
        im += dr * yi - di * yr;
      }
      s += std::hypot(re, im);
    }
    score[static_cast<std::size_t>(p)] = s;
  }
  // Serial argmax with strict >: the first best point in (radius, angle)
  // order wins, i.e. ties prefer the smallest radius, then angle.
  std::size_t best = 0;
  for (std::size_t p = 1; p < n_points; ++p)
    if (score[p] > score[best]) best = p;
  const int ri = static_cast<int>(best) / spec_.n_theta;
  const int tj = static_cast<int>(best) % spec_.n_theta;
  return Polar{radius_at(ri), theta_at(tj)};
}

std::vector<SweepRow> run_sweep(const Dataset& ds,
                                const std::vector<std::uint32_t>& test_idx,
                                const SweepModels& models,
                                const SweepConfig& sc) {
  if (test_idx.empty()) throw EvalError("sweep: empty test split");
  if (sc.snr_db.empty()) throw EvalError("sweep: no SNR points");
  if (sc.methods.empty()) throw EvalError("sweep: no methods");

  bool want_cpm = false, want_oracle = false, want_ls = false,
       want_grid = false;
  for (const auto& m : sc.methods) {
    if (m == "cpmamba") want_cpm = true;
    else if (m == "cpmamba-oracle") want_oracle = true;
    else if (m == "ls") want_ls = true;
    else if (m == "grid") want_grid = true;
    else if (m != "oracle") throw EvalError("sweep: unknown method '" + m + "'");
  }
  if (want_cpm && (!models.stage1 || !models.stage2))
    throw EvalError("sweep: cpmamba needs both trained stages");
  if (want_oracle && !models.stage2)
    throw EvalError("sweep: cpmamba-oracle needs the trained second stage");

  const int k = ds.n_sc(), n = ds.n_ant();
  std::unique_ptr<LsEstimator> ls;
  if (want_ls) ls = std::make_unique<LsEstimator>(ds.combiner);
  std::unique_ptr<GridLocalizer> grid;
  if (want_grid)
    grid = std::make_unique<GridLocalizer>(ds.combiner, ds.layout,
                                           ds.cfg.carrier, sc.grid);

  const std::size_t n_m = sc.methods.size(), n_s = sc.snr_db.size();
  std::vector<double> pe_sum(n_m * n_s, 0.0), nm_sum(n_m * n_s, 0.0);

  ad::Tape<float> tape;
  for (std::size_t si = 0; si < n_s; ++si) {
    const double snr = sc.snr_db[si];
    for (const auto idx : test_idx) {
      const SampleRecord& rec = ds.samples.at(idx);
      const CMat h = to_cmat(rec.h, k, n);
      Rng noise_rng(substream(rec.seed, sc.noise_tag + si));
      const PilotObservation obs = observe(ds.combiner, h, snr, noise_rng);

      for (std::size_t mi = 0; mi < n_m; ++mi) {
        const std::string& method = sc.methods[mi];
        double pe = 0.0, nm = 0.0;
        if (method == "cpmamba") {
          const std::vector<float> yf = pack_interleaved(obs.y);
          const InferenceResult res =
              infer_sample(*models.stage1, *models.stage2, models.scales,
                           ds.layout, ds.cfg.carrier, ds.cfg.ue.r_min, yf, k,
                           n);
          pe = position_error(res.x_hat, res.y_hat, rec.x, rec.y);
          nm = nmse_ratio(res.h_hat, h);
        } else if (method == "cpmamba-oracle") {
          const CMat prior = los_channel(ds.layout, ds.cfg.carrier,
                                         Polar{rec.r, rec.theta});
          auto img = prior_image(prior, rec.x, rec.y, models.scales);
          auto out = ad::net_forward(tape, *models.stage2, img);
          tape.clear();
          CMat h_hat(k, n);
          const std::size_t plane = static_cast<std::size_t>(k) * n;
          for (std::size_t t = 0; t < plane; ++t)
            h_hat.a[t] = prior.a[t] +
                         cdouble(models.scales.h_rms * out->val[t],
                                 models.scales.h_rms * out->val[plane + t]);
          pe = 0.0;
          nm = nmse_ratio(h_hat, h);
        } else if (method == "oracle") {
          // Returns the truth itself; anchors the metric zero points.
          pe = 0.0;
          nm = 0.0;
        } else if (method == "ls") {
          pe = kNan;
          nm = nmse_ratio(ls->estimate(obs.y), h);
        } else {  // grid
          const Polar p = grid->localize(obs.y);
          pe = position_error(p.x(), p.y(), rec.x, rec.y);
          nm = kNan;
        }
        pe_sum[mi * n_s + si] += pe;
        nm_sum[mi * n_s + si] += nm;
      }
    }
  }

  std::vector<SweepRow> rows;
  rows.reserve(n_m * n_s);
  const double cnt = static_cast<double>(test_idx.size());
  for (std::size_t mi = 0; mi < n_m; ++mi)
    for (std::size_t si = 0; si < n_s; ++si) {
      SweepRow row;
      row.method = sc.methods[mi];
      row.snr_db = sc.snr_db[si];
      row.mpe_m = pe_sum[mi * n_s + si] / cnt;
      row.nmse = nm_sum[mi * n_s + si] / cnt;
      row.n = static_cast<int>(test_idx.size());
      rows.push_back(std::move(row));
    }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "method,snr_db,mpe_m,nmse,nmse_db,n\n";
  for (const auto& r : rows) {
    const double nmse_db =
        std::isfinite(r.nmse) && r.nmse > 0.0 ? 10.0 * std::log10(r.nmse)
                                              : kNan;
    out += r.method;
    out += ',';
    out += format_cell(r.snr_db);
    out += ',';
    out += format_cell(r.mpe_m);
    out += ',';
    out += format_cell(r.nmse);
    out += ',';
    out += format_cell(nmse_db);
    out += ',';
    out += std::to_string(r.n);
    out += '\n';
  }
  return out;
}

std::vector<SweepRow> parse_sweep_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "method,snr_db,mpe_m,nmse,nmse_db,n")
    throw EvalError("csv: missing or wrong header");
  std::vector<SweepRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != 6)
      throw EvalError("csv: expected 6 cells, got " +
                      std::to_string(cells.size()) + " in: " + line);
    SweepRow r;
    r.method = cells[0];
    try {
      r.snr_db = std::stod(cells[1]);
      r.mpe_m = cells[2] == "nan" ? kNan : std::stod(cells[2]);
      r.nmse = cells[3] == "nan" ? kNan : std::stod(cells[3]);
      r.n = std::stoi(cells[5]);
    } catch (const std::exception&) {
      throw EvalError("csv: malformed numeric cell in: " + line);
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<SweepRow> read_sweep_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw EvalError("csv: cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_sweep_csv(ss.str());
}

void write_sweep_csv(const std::string& path,
                     const std::vector<SweepRow>& rows) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw EvalError("cannot open CSV for writing: " + path);
  const std::string body = sweep_csv(rows);
  f.write(body.data(), static_cast<std::streamsize>(body.size()));
  f.flush();
  if (!f) throw EvalError("failed writing CSV: " + path);
}

}  // namespace xlm
