#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "brief/arch.hpp"

namespace brief {

inline constexpr std::int64_t kBytesPerMiB = 1 << 20;
inline constexpr std::int64_t kBytesPerKiB = 1 << 10;

struct SizeOptions {
  int bytes_per_scalar = 4;
  std::int64_t overhead = 0;
};

struct BlockSize {
  std::size_t block_id = 0;
  std::int64_t params = 0;
  std::int64_t buffers = 0;
  std::int64_t bytes = 0;

  friend bool operator==(const BlockSize&, const BlockSize&) = default;
};

/// Storage cost of a model: the rate term R(n').
///
/// size_bytes = (parameter_count + buffer_count) * bytes_per_scalar + overhead.
/// Layers outside every macroblock (the classification head) are reported
/// in head_params / head_buffers so that the breakdown adds up to the total.
struct SizeReport {
  std::int64_t parameter_count = 0;
  std::int64_t buffer_count = 0;
  std::int64_t size_bytes = 0;
  std::vector<BlockSize> per_block_breakdown;
  std::int64_t head_params = 0;
  std::int64_t head_buffers = 0;

  std::int64_t stored_scalars() const { return parameter_count + buffer_count; }

  friend bool operator==(const SizeReport&, const SizeReport&) = default;
};

/// Learnable scalars contributed by each layer kind:
///   conv       kh*kw*in*out (kh*kw*out when depthwise), +out with bias
///   batchnorm  2*ch, plus 2*ch running-statistic buffers
///   fc         in*out, +out with bias
///   pooling    0
SizeReport count_parameters(const ModelSpec& spec, const SizeOptions& options = {});

/// Convenience: count_parameters(spec.with_channels(config)).
SizeReport count_parameters(const ModelSpec& spec, const ChannelConfig& config, const SizeOptions& options = {});

std::int64_t model_size_bytes(std::int64_t stored_scalars, int bytes_per_scalar = 4, std::int64_t overhead = 0);
std::int64_t model_size_bytes(const ModelSpec& spec, int bytes_per_scalar = 4, std::int64_t overhead = 0);

/// 100 * (1 - reduced / base) on size_bytes. Throws on a zero base.
double saving_percent(const SizeReport& base, const SizeReport& reduced);
double saving_percent(double base_size, double reduced_size);

/// Flat record: parameter_count,buffer_count,size_bytes,per_block_breakdown
/// where the breakdown is "id:params:bytes" joined with ';'.
std::string size_report_csv_header();
std::string size_report_csv_row(const SizeReport& report);
SizeReport parse_size_report_csv_row(const std::string& row);

}  // namespace brief
