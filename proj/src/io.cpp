#include "pdd/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "pdd/error.hpp"

namespace pdd::io {

namespace {

json complex_to_json(const Complex& c) { return json::array({c.real(), c.imag()}); }

Complex complex_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2) throw InvalidInput("expected a complex number as [re, im]");
  return {j[0].get<double>(), j[1].get<double>()};
}

const json& field(const json& j, const char* name) {
  if (!j.contains(name)) throw InvalidInput(std::string("missing field '") + name + "'");
  return j.at(name);
}

std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw std::runtime_error("cannot open " + path.string() + " for reading");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

template <class T>
void put_le(std::ostream& out, T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto* p = reinterpret_cast<unsigned char*>(&v);
    std::reverse(p, p + sizeof(T));
  }
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get_le(std::istream& in) {
  T v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw InvalidInput("truncated binary matrix file");
  if constexpr (std::endian::native == std::endian::big) {
    auto* p = reinterpret_cast<unsigned char*>(&v);
    std::reverse(p, p + sizeof(T));
  }
  return v;
}

}  // namespace

json complex_vector_to_json(const ComplexVector& v) {
  json j = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(complex_to_json(v(i)));
  return j;
}

ComplexVector complex_vector_from_json(const json& j) {
  if (!j.is_array()) throw InvalidInput("expected an array of complex numbers");
  ComplexVector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = complex_from_json(j[i]);
  return v;
}

json complex_matrix_to_json(const ComplexMatrix& m) {
  json j = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) j.push_back(complex_vector_to_json(m.row(r).transpose()));
  return j;
}

ComplexMatrix complex_matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw InvalidInput("expected a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  ComplexMatrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const ComplexVector row = complex_vector_from_json(j[r]);
    if (row.size() != cols) throw InvalidInput("ragged complex matrix");
    m.row(r) = row.transpose();
  }
  return m;
}

json real_matrix_to_json(const RealMatrix& m) {
  json j = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    j.push_back(std::move(row));
  }
  return j;
}

RealMatrix real_matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw InvalidInput("expected a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  RealMatrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(j[r].size()) != cols) throw InvalidInput("ragged real matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

json real_vector_to_json(const RealVector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

RealVector real_vector_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const RealVector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json read_json(const std::filesystem::path& path) {
  auto in = open_in(path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidInput(path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

json to_json(const multicast::MulticastInstance& inst) {
  json channels = json::array();
  for (const auto& h : inst.channels) channels.push_back(complex_vector_to_json(h));
  return {{"N_t", inst.n_t},
          {"groups", inst.groups},
          {"channels", channels},
          {"sigma2", real_vector_to_json(inst.sigma2)},
          {"P_BS", inst.p_bs}};
}

multicast::MulticastInstance multicast_from_json(const json& j) {
  std::vector<ComplexVector> channels;
  for (const auto& c : field(j, "channels")) channels.push_back(complex_vector_from_json(c));
  return multicast::build_instance(field(j, "N_t").get<int>(), field(j, "groups").get<std::vector<std::vector<int>>>(),
                                   std::move(channels), real_vector_from_json(field(j, "sigma2")),
                                   field(j, "P_BS").get<double>());
}

json to_json(const multicast::MulticastResult& r) {
  return {{"w", complex_vector_to_json(r.w_scaled)},
          {"min_rate_bits", r.min_rate_bits},
          {"kkt_residual", r.kkt_residual},
          {"feasibility_gap", r.feasibility_gap},
          {"iterations", r.iterations},
          {"converged", r.converged}};
}

json to_json(const relay::RelayInstance& inst) {
  json g = json::array();
  for (int k = 0; k < inst.k; ++k) g.push_back(complex_vector_to_json(inst.g.col(k)));
  return {{"N_s", inst.n_s},
          {"N_r", inst.n_r},
          {"K", inst.k},
          {"H", complex_matrix_to_json(inst.h)},
          {"g", g},
          {"sigma_R2", inst.sigma_r2},
          {"sigma2", real_vector_to_json(inst.sigma2)},
          {"P_S", inst.p_s},
          {"P_R", inst.p_r},
          {"alpha", real_vector_to_json(inst.alpha)}};
}

relay::RelayInstance relay_from_json(const json& j) {
  const int n_s = field(j, "N_s").get<int>();
  const int n_r = field(j, "N_r").get<int>();
  const int k = field(j, "K").get<int>();
  ComplexMatrix h = complex_matrix_from_json(field(j, "H"));
  if (h.rows() != n_r || h.cols() != n_s) throw InvalidInput("relay: H must be N_r x N_s");
  const json& gj = field(j, "g");
  if (static_cast<int>(gj.size()) != k) throw InvalidInput("relay: g needs K vectors");
  ComplexMatrix g(n_r, k);
  for (int i = 0; i < k; ++i) {
    const ComplexVector gi = complex_vector_from_json(gj[i]);
    if (gi.size() != n_r) throw InvalidInput("relay: each g_k needs N_r entries");
    g.col(i) = gi;
  }
  RealVector alpha = j.contains("alpha") ? real_vector_from_json(j["alpha"]) : RealVector::Ones(k);
  return relay::build_instance(std::move(h), std::move(g), field(j, "sigma_R2").get<double>(),
                               real_vector_from_json(field(j, "sigma2")), field(j, "P_S").get<double>(),
                               field(j, "P_R").get<double>(), std::move(alpha));
}

json to_json(const relay::RelayResult& r) {
  return {{"V", complex_matrix_to_json(r.v)},
          {"F", complex_matrix_to_json(r.f)},
          {"sum_rate_nats", r.sum_rate_nats},
          {"feasibility_gap", r.feasibility_gap},
          {"repair_scale", {{"V", r.repair_scale_v}, {"F", r.repair_scale_f}}},
          {"iterations", r.iterations},
          {"converged", r.converged}};
}

void write_matrix_csv(const std::filesystem::path& path, const RealMatrix& m) {
  auto out = open_out(path);
  char buf[32];
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", m(r, c));
      if (c) out << ',';
      out << buf;
    }
    out << '\n';
  }
}

RealMatrix read_matrix_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        throw InvalidInput(path.string() + ": non-numeric CSV cell '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows[0].size()) throw InvalidInput(path.string() + ": ragged CSV");
    rows.push_back(std::move(row));
  }
  if (rows.empty() || rows[0].empty()) throw InvalidInput(path.string() + ": empty CSV");
  RealMatrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(Eigen::Index(r), Eigen::Index(c)) = rows[r][c];
  return m;
}

void write_matrix_binary(const std::filesystem::path& path, const RealMatrix& m) {
  if (m.rows() > std::numeric_limits<std::uint32_t>::max() || m.cols() > std::numeric_limits<std::uint32_t>::max())
    throw InvalidInput("matrix too large for the binary format");
  auto out = open_out(path, std::ios::binary);
  out.write("VMIN", 4);
  put_le(out, static_cast<std::uint32_t>(m.rows()));
  put_le(out, static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) put_le(out, m(r, c));
}

RealMatrix read_matrix_binary(const std::filesystem::path& path) {
  auto in = open_in(path, std::ios::binary);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "VMIN", 4) != 0) throw InvalidInput(path.string() + ": bad magic");
  const auto n = get_le<std::uint32_t>(in);
  const auto l = get_le<std::uint32_t>(in);
  RealMatrix m(n, l);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = get_le<double>(in);
  return m;
}

RealMatrix read_matrix(const std::filesystem::path& path) {
  char magic[4] = {};
  {
    auto in = open_in(path, std::ios::binary);
    in.read(magic, 4);
  }
  return std::memcmp(magic, "VMIN", 4) == 0 ? read_matrix_binary(path) : read_matrix_csv(path);
}

json to_json(const volmin::GroundTruth& gt) {
  json j = {{"X", real_matrix_to_json(gt.x)}, {"S", real_matrix_to_json(gt.s)}, {"gamma", gt.gamma}};
  j["snr_db"] = std::isfinite(gt.snr_db) ? json(gt.snr_db) : json("inf");
  return j;
}

volmin::GroundTruth ground_truth_from_json(const json& j) {
  volmin::GroundTruth gt;
  gt.x = real_matrix_from_json(field(j, "X"));
  if (j.contains("S")) gt.s = real_matrix_from_json(j["S"]);
  gt.gamma = j.value("gamma", 1.0);
  const json& snr = j.contains("snr_db") ? j["snr_db"] : json("inf");
  gt.snr_db = snr.is_string() ? std::numeric_limits<double>::infinity() : snr.get<double>();
  return gt;
}

json to_json(const volmin::VolMinResult& r, const volmin::GroundTruth* truth) {
  json j = {{"X", real_matrix_to_json(r.x)},
            {"S", real_matrix_to_json(r.s)},
            {"feasibility_gap", r.feasibility_gap},
            {"relative_error", r.relative_error},
            {"f_eps", r.f_eps},
            {"restarts_used", r.restarts_used},
            {"iterations", r.iterations},
            {"converged", r.converged}};
  if (r.prescale_factor != 1.0) j["prescale_factor"] = r.prescale_factor;
  if (truth) j["mse_db"] = volmin::mse_metric(r.x, truth->x);
  return j;
}

}  // namespace pdd::io
