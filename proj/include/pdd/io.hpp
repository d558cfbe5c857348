#pragma once

// File formats. Complex numbers are [re, im] pairs; complex matrices are
// arrays of rows.

#include <filesystem>
#include <string>

#include "json.hpp"
#include "pdd/multicast.hpp"
#include "pdd/relay.hpp"
#include "pdd/volmin.hpp"

namespace pdd::io {

using nlohmann::json;

json complex_vector_to_json(const ComplexVector& v);
ComplexVector complex_vector_from_json(const json& j);
json complex_matrix_to_json(const ComplexMatrix& m);
ComplexMatrix complex_matrix_from_json(const json& j);
json real_matrix_to_json(const RealMatrix& m);
RealMatrix real_matrix_from_json(const json& j);
json real_vector_to_json(const RealVector& v);
RealVector real_vector_from_json(const json& j);

json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const json& j);

// multicast: {N_t, groups, channels, sigma2, P_BS}
json to_json(const multicast::MulticastInstance& inst);
multicast::MulticastInstance multicast_from_json(const json& j);
json to_json(const multicast::MulticastResult& r);

// relay: {N_s, N_r, K, H, g, sigma_R2, sigma2, P_S, P_R, alpha}
json to_json(const relay::RelayInstance& inst);
relay::RelayInstance relay_from_json(const json& j);
json to_json(const relay::RelayResult& r);

// volmin data matrix: CSV (one row per line) or binary ("VMIN", u32 N, u32 L,
// then N*L little-endian float64 in row-major order).
void write_matrix_csv(const std::filesystem::path& path, const RealMatrix& m);
RealMatrix read_matrix_csv(const std::filesystem::path& path);
void write_matrix_binary(const std::filesystem::path& path, const RealMatrix& m);
RealMatrix read_matrix_binary(const std::filesystem::path& path);
/// Dispatches on the magic bytes.
RealMatrix read_matrix(const std::filesystem::path& path);

json to_json(const volmin::GroundTruth& gt);
volmin::GroundTruth ground_truth_from_json(const json& j);
/// mse_db is written only when a ground truth is supplied.
json to_json(const volmin::VolMinResult& r, const volmin::GroundTruth* truth);

}  // namespace pdd::io
