#include "brief/accounting.hpp"

#include <sstream>
#include <stdexcept>

namespace brief {

SizeReport count_parameters(const ModelSpec& spec, const SizeOptions& options) {
  if (options.bytes_per_scalar < 1) throw std::invalid_argument("bytes_per_scalar must be >= 1");
  if (options.overhead < 0) throw std::invalid_argument("overhead must be >= 0");
  const MacroblockPartition partition = partition_macroblocks(spec);

  SizeReport report;
  for (const auto& b : partition.blocks) report.per_block_breakdown.push_back(BlockSize{b.id, 0, 0, 0});

  std::size_t block = 0;
  for (std::size_t idx = 0; idx < spec.layers.size(); ++idx) {
    while (block < partition.size() && idx >= partition.blocks[block].end_layer) ++block;
    const bool inside = block < partition.size() && idx >= partition.blocks[block].first_layer;

    std::int64_t params = 0;
    std::int64_t buffers = 0;
    const Layer& layer = spec.layers[idx];
    if (const auto* c = std::get_if<ConvLayer>(&layer)) {
      const std::int64_t taps = std::int64_t{c->kernel_h} * c->kernel_w;
      params = c->depthwise ? taps * c->out_ch : taps * c->in_ch * c->out_ch;
      if (c->has_bias) params += c->out_ch;
    } else if (const auto* bn = std::get_if<BatchNormLayer>(&layer)) {
      params = 2 * std::int64_t{bn->channels};
      buffers = 2 * std::int64_t{bn->channels};
    } else if (const auto* fc = std::get_if<FullyConnectedLayer>(&layer)) {
      params = std::int64_t{fc->in_features} * fc->out_features;
      if (fc->has_bias) params += fc->out_features;
    }

    report.parameter_count += params;
    report.buffer_count += buffers;
    if (inside) {
      auto& slot = report.per_block_breakdown[block];
      slot.params += params;
      slot.buffers += buffers;
    } else {
      report.head_params += params;
      report.head_buffers += buffers;
    }
  }

  for (auto& b : report.per_block_breakdown) b.bytes = (b.params + b.buffers) * options.bytes_per_scalar;
  report.size_bytes = model_size_bytes(report.stored_scalars(), options.bytes_per_scalar, options.overhead);
  return report;
}

SizeReport count_parameters(const ModelSpec& spec, const ChannelConfig& config, const SizeOptions& options) {
  return count_parameters(spec.with_channels(config), options);
}

std::int64_t model_size_bytes(std::int64_t stored_scalars, int bytes_per_scalar, std::int64_t overhead) {
  if (bytes_per_scalar < 1) throw std::invalid_argument("bytes_per_scalar must be >= 1");
  if (stored_scalars < 0 || overhead < 0) throw std::invalid_argument("scalar count and overhead must be >= 0");
  return stored_scalars * bytes_per_scalar + overhead;
}

std::int64_t model_size_bytes(const ModelSpec& spec, int bytes_per_scalar, std::int64_t overhead) {
  return count_parameters(spec, SizeOptions{bytes_per_scalar, overhead}).size_bytes;
}

double saving_percent(double base_size, double reduced_size) {
  if (!(base_size > 0)) throw std::invalid_argument("saving_percent needs a positive base size");
  return 100.0 * (1.0 - reduced_size / base_size);
}

double saving_percent(const SizeReport& base, const SizeReport& reduced) {
  return saving_percent(static_cast<double>(base.size_bytes), static_cast<double>(reduced.size_bytes));
}

std::string size_report_csv_header() { return "parameter_count,buffer_count,size_bytes,per_block_breakdown"; }

std::string size_report_csv_row(const SizeReport& report) {
  std::ostringstream out;
  out << report.parameter_count << ',' << report.buffer_count << ',' << report.size_bytes << ',';
  for (std::size_t i = 0; i < report.per_block_breakdown.size(); ++i) {
    const auto& b = report.per_block_breakdown[i];
    if (i) out << ';';
    out << b.block_id << ':' << b.params << ':' << b.bytes;
  }
  return out.str();
}

SizeReport parse_size_report_csv_row(const std::string& row) {
  SizeReport report;
  std::istringstream in(row);
  std::string field;
  auto next_int = [&](const char* what) {
    if (!std::getline(in, field, ',')) throw std::invalid_argument(std::string("size report row lacks ") + what);
    return std::stoll(field);
  };
  report.parameter_count = next_int("parameter_count");
  report.buffer_count = next_int("buffer_count");
  report.size_bytes = next_int("size_bytes");
  std::string breakdown;
  std::getline(in, breakdown);
  std::istringstream blocks(breakdown);
  std::string item;
  while (std::getline(blocks, item, ';')) {
    if (item.empty()) continue;
    BlockSize b;
    char sep1 = 0, sep2 = 0;
    std::istringstream one(item);
    if (!(one >> b.block_id >> sep1 >> b.params >> sep2 >> b.bytes) || sep1 != ':' || sep2 != ':')
      throw std::invalid_argument("malformed block breakdown '" + item + "'");
    report.per_block_breakdown.push_back(b);
  }
  return report;
}

}  // namespace brief
