#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "bifkit/config.hpp"
#include "bifkit/detect.hpp"
#include "bifkit/flow.hpp"

namespace bifkit {

namespace detail {

// FNV-1a over the canonical (key-sorted) dump of the config.
inline std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 1469598103934665603ull;
  for (const unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[19];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Reports must not contain NaN or infinities; clamp to the largest finite
// double with the original sign so failed residuals stay conspicuous.
inline double finite(double x) {
  if (std::isnan(x)) return 0.0;
  if (std::isinf(x))
    return x > 0 ? std::numeric_limits<double>::max()
                 : std::numeric_limits<double>::lowest();
  return x;
}

inline json vec_json(const Vec& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(finite(v[i]));
  return a;
}

inline json mat_json(const Mat& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(finite(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline void atomic_write(const std::filesystem::path& path,
                         const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
    if (!out.flush()) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", finite(x));
  return buf;
}

} // namespace detail

inline std::string config_hash(const json& cfg) {
  return detail::fnv1a_hex(cfg.dump());
}

inline json report_to_json(const BifurcationReport& rep, const RunConfig& cfg,
                           const std::string& timestamp) {
  using detail::finite;
  json j;
  j["schema"] = schema_tag;
  j["tool_version"] = version_string;
  j["timestamp"] = timestamp;
  j["config_hash"] = config_hash(cfg.raw);
  j["mode"] =
      rep.mode == MFirstTerm::Consistent ? "consistent" : "literal";

  json jm;
  jm["name"] = rep.model_name;
  jm["n"] = rep.n;
  jm["k"] = rep.k;
  jm["period"] = finite(rep.period);
  json jp = json::object();
  for (const auto& [key, val] : cfg.params) jp[key] = finite(val);
  jm["params"] = std::move(jp);
  jm["chart"] = {{"h0", detail::vec_json(rep.h0)}, {"r0", finite(rep.r0)}};
  j["model"] = std::move(jm);

  json checks = json::array();
  for (const auto& c : rep.assumption_checks) {
    checks.push_back({{"name", c.name},
                      {"residual", finite(c.residual)},
                      {"threshold", finite(c.threshold)},
                      {"pass", c.pass},
                      {"note", c.note}});
  }
  j["assumption_checks"] = std::move(checks);

  json zeros = json::array();
  for (const auto& z : rep.zeros) {
    json jz;
    jz["h"] = detail::vec_json(z.h);
    jz["m_norm"] = finite(z.m_norm);
    jz["jacobian"] = detail::mat_json(z.jacobian);
    if (z.index) {
      jz["index"] = {{"value", z.index->value},
                     {"method", degree_method_name(z.index->method)},
                     {"certified", z.index->certified},
                     {"samples_used", z.index->samples_used}};
    } else {
      jz["index"] = nullptr;
    }
    if (!z.index_note.empty()) jz["index_note"] = z.index_note;
    jz["verdict"] = verdict_name(z.verdict);
    if (!z.note.empty()) jz["note"] = z.note;
    zeros.push_back(std::move(jz));
  }
  j["zeros"] = std::move(zeros);

  json rej = json::array();
  for (const auto& r : rep.rejected) {
    rej.push_back({{"h", detail::vec_json(r.h)},
                   {"residual", finite(r.residual)},
                   {"reason", r.reason}});
  }
  j["rejected_candidates"] = std::move(rej);

  json conts = json::array();
  for (const auto& rec : rep.continuations) {
    json jr;
    jr["h_star"] = detail::vec_json(rec.h_star);
    json entries = json::array();
    for (const auto& e : rec.entries) {
      json je;
      je["eps"] = finite(e.eps);
      je["seed_used_correction"] = e.seed_used_correction;
      je["converged"] = e.converged;
      je["iterations"] = e.iterations;
      je["displacement_norm"] = finite(e.displacement_norm);
      je["distance"] = finite(e.distance);
      if (e.naive_iterations >= 0) je["plain_seed_iterations"] = e.naive_iterations;
      if (!e.note.empty()) je["note"] = e.note;
      entries.push_back(std::move(je));
    }
    jr["entries"] = std::move(entries);
    conts.push_back(std::move(jr));
  }
  j["continuations"] = std::move(conts);

  json necs = json::array();
  for (const auto& nresult : rep.necessity) {
    json jn;
    jn["pass"] = nresult.pass;
    jn["h_limit"] = detail::vec_json(nresult.h_limit);
    jn["m_norm"] = finite(nresult.m_norm);
    if (!nresult.note.empty()) jn["note"] = nresult.note;
    necs.push_back(std::move(jn));
  }
  j["necessity"] = std::move(necs);

  j["grid"] = {{"points", rep.m_grid.size()},
               {"failures", rep.grid_failures},
               {"note", rep.grid_note}};
  j["summary"] = rep.summary;
  return j;
}

inline std::string m_grid_csv(const BifurcationReport& rep) {
  std::string out;
  for (Index i = 0; i < rep.k; ++i)
    out += "h" + std::to_string(i + 1) + ",";
  for (Index i = 0; i < rep.k; ++i) {
    out += "M" + std::to_string(i + 1);
    out += (i + 1 < rep.k) ? "," : "\n";
  }
  for (const auto& s : rep.m_grid) {
    for (Index i = 0; i < s.h.size(); ++i) out += detail::g17(s.h[i]) + ",";
    for (Index i = 0; i < s.M.size(); ++i) {
      out += detail::g17(s.M[i]);
      out += (i + 1 < s.M.size()) ? "," : "\n";
    }
  }
  return out;
}

inline std::string continuation_csv(const BifurcationReport& rep) {
  std::string out = "zero,eps,converged,iterations,displacement_norm,distance\n";
  for (std::size_t z = 0; z < rep.continuations.size(); ++z) {
    for (const auto& e : rep.continuations[z].entries) {
      out += std::to_string(z) + "," + detail::g17(e.eps) + "," +
             (e.converged ? "1" : "0") + "," + std::to_string(e.iterations) +
             "," + detail::g17(e.displacement_norm) + "," +
             detail::g17(e.distance) + "\n";
    }
  }
  return out;
}

inline std::string trajectory_csv(const Trajectory& traj) {
  std::string out = "t";
  const Index n = traj.x.empty() ? 0 : traj.x.front().size();
  for (Index i = 0; i < n; ++i) out += ",x" + std::to_string(i + 1);
  out += "\n";
  for (std::size_t i = 0; i < traj.t.size(); ++i) {
    out += detail::g17(traj.t[i]);
    for (Index c = 0; c < n; ++c) out += "," + detail::g17(traj.x[i][c]);
    out += "\n";
  }
  return out;
}

// Writes report.json, m_grid.csv, and continuation.csv under out_dir.
inline void write_report_files(const BifurcationReport& rep,
                               const RunConfig& cfg,
                               const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  const json j = report_to_json(rep, cfg, detail::utc_timestamp());
  detail::atomic_write(out_dir / "report.json", j.dump(2) + "\n");
  detail::atomic_write(out_dir / "m_grid.csv", m_grid_csv(rep));
  detail::atomic_write(out_dir / "continuation.csv", continuation_csv(rep));
}

} // namespace bifkit
