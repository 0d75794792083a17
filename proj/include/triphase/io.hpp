#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "triphase/harness.hpp"
#include "triphase/smc.hpp"

namespace triphase {

/// Shortest round-trip decimal representation of a double.
inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Write via a temp file in the same directory, then rename, so readers
/// never observe a half-written output.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << content;
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

/// Posterior snapshot: one particle per row (phi1, phi2, weight).
inline std::string cloud_csv(const ParticleCloud& cloud) {
  std::ostringstream out;
  out << "phi1,phi2,weight\n";
  for (std::size_t i = 0; i < cloud.size(); ++i)
    out << fmt_double(cloud.particles[i].phi1) << ',' << fmt_double(cloud.particles[i].phi2)
        << ',' << fmt_double(cloud.weights[i]) << '\n';
  return out.str();
}

/// Per-probe record of a single estimation run.
inline std::string trace_csv(const EstimationTrace& trace) {
  std::ostringstream out;
  out << "step,control1,control2,outcome,mean1,mean2,cov11,cov12,cov22,"
         "loss,wrapped_loss\n";
  for (const auto& s : trace.steps)
    out << s.step << ',' << fmt_double(s.controls.phi1) << ',' << fmt_double(s.controls.phi2)
        << ',' << s.outcome << ',' << fmt_double(s.mean.phi1) << ',' << fmt_double(s.mean.phi2)
        << ',' << fmt_double(s.covariance.xx) << ',' << fmt_double(s.covariance.xy) << ','
        << fmt_double(s.covariance.yy) << ',' << fmt_double(s.loss_unwrapped) << ','
        << fmt_double(s.loss_wrapped) << '\n';
  return out.str();
}

/// Campaign aggregates, one row per probe count N.
inline std::string campaign_csv(const CampaignResult& r) {
  std::ostringstream out;
  out << "N,loss,loss1,loss2,cross,wrapped_loss,wrapped_loss1,wrapped_loss2,"
         "wrapped_cross,cov_trace,crb\n";
  for (int k = 0; k < r.probes; ++k)
    out << (k + 1) << ',' << fmt_double(r.loss[k]) << ',' << fmt_double(r.loss1[k]) << ','
        << fmt_double(r.loss2[k]) << ',' << fmt_double(r.cross[k]) << ','
        << fmt_double(r.wrapped_loss[k]) << ',' << fmt_double(r.wrapped_loss1[k]) << ','
        << fmt_double(r.wrapped_loss2[k]) << ',' << fmt_double(r.wrapped_cross[k]) << ','
        << fmt_double(r.cov_trace[k]) << ',' << fmt_double(r.crb[k]) << '\n';
  return out.str();
}

}  // namespace triphase
