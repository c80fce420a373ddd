// Copyright 2026 The H-FL Simulator Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "hfl/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

#include "hfl/error.hpp"

namespace hfl {

namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset, const char* what) {
  if (offset + 4 > bytes.size()) {
    throw DataError(std::string("truncated idx header while reading ") + what, bytes.size());
  }
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::size_t resolve_classes(std::span<const int> labels, std::size_t declared, std::size_t offset) {
  int max_label = -1;
  for (int y : labels) {
    if (y < 0) throw DataError("negative label " + std::to_string(y), offset);
    max_label = std::max(max_label, y);
  }
  if (declared == 0) return static_cast<std::size_t>(max_label + 1);
  if (static_cast<std::size_t>(max_label) >= declared) {
    throw DataError("class count mismatch: label " + std::to_string(max_label) +
                        " with declared num_classes " + std::to_string(declared),
                    offset);
  }
  return declared;
}

}  // namespace

void Dataset::validate() const {
  if (labels.empty()) throw DataError("dataset is empty");
  if (examples.cols() != labels.size()) {
    throw DataError("dataset has " + std::to_string(examples.cols()) + " examples but " +
                    std::to_string(labels.size()) + " labels");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
      throw DataError("label " + std::to_string(y) + " outside [0, " + std::to_string(num_classes) + ")");
    }
  }
  if (!all_finite(examples)) throw DataError("dataset features contain non-finite values");
}

Dataset Dataset::select(std::span<const std::size_t> indices) const {
  Dataset out;
  out.num_classes = num_classes;
  out.examples = Matrix(examples.rows(), indices.size());
  out.labels.reserve(indices.size());
  for (std::size_t j = 0; j < indices.size(); ++j) {
    const std::size_t src = indices[j];
    for (std::size_t r = 0; r < examples.rows(); ++r) out.examples(r, j) = examples(r, src);
    out.labels.push_back(labels[src]);
  }
  return out;
}

DatasetFormat parse_dataset_format(const std::string& name) {
  if (name == "idx-ubyte" || name == "idx") return DatasetFormat::kIdxUbyte;
  if (name == "csv") return DatasetFormat::kCsv;
  if (name == "synthetic" || name == "synthetic-spec") return DatasetFormat::kSynthetic;
  throw ConfigError("dataset_format", name, "idx-ubyte | csv | synthetic");
}

std::string to_string(DatasetFormat format) {
  switch (format) {
    case DatasetFormat::kIdxUbyte: return "idx-ubyte";
    case DatasetFormat::kCsv: return "csv";
    case DatasetFormat::kSynthetic: return "synthetic";
  }
  return "unknown";
}

SyntheticSpec parse_synthetic_spec(const std::string& text) {
  SyntheticSpec spec;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw DataError("synthetic spec line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    try {
      if (key == "classes") spec.classes = std::stoul(value);
      else if (key == "points") spec.points = std::stoul(value);
      else if (key == "dim") spec.dim = std::stoul(value);
      else if (key == "cluster_std") spec.cluster_std = std::stod(value);
      else if (key == "seed") spec.seed = std::stoull(value);
      else throw DataError("synthetic spec line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    } catch (const std::logic_error&) {
      throw DataError("synthetic spec line " + std::to_string(line_no) + ": bad value '" + value + "'");
    }
  }
  return spec;
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.classes < 1 || spec.points < 1 || spec.dim < 1 || !(spec.cluster_std >= 0.0)) {
    throw DataError("synthetic spec needs classes, points, dim >= 1 and cluster_std >= 0");
  }
  Rng rng(spec.seed);
  Matrix centres(spec.dim, spec.classes);
  for (double& v : centres.data()) v = rng.uniform(-1.0, 1.0);
  Dataset ds;
  ds.num_classes = spec.classes;
  ds.examples = Matrix(spec.dim, spec.points);
  ds.labels.resize(spec.points);
  for (std::size_t i = 0; i < spec.points; ++i) {
    const std::size_t y = i % spec.classes;
    ds.labels[i] = static_cast<int>(y);
    for (std::size_t r = 0; r < spec.dim; ++r)
      ds.examples(r, i) = centres(r, y) + spec.cluster_std * rng.normal();
  }
  return ds;
}

Dataset parse_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels,
                  std::size_t num_classes) {
  const std::uint32_t magic = read_be32(images, 0, "image magic");
  if (magic != kIdxImagesMagic) throw DataError("bad idx image magic number", 0);
  const std::size_t count = read_be32(images, 4, "image count");
  const std::size_t rows = read_be32(images, 8, "image rows");
  const std::size_t cols = read_be32(images, 12, "image cols");
  const std::size_t pixels = rows * cols;
  if (count == 0 || pixels == 0) throw DataError("idx image file declares no data", 4);
  if (images.size() != 16 + count * pixels) {
    throw DataError("idx image payload is " + std::to_string(images.size() - 16) + " bytes, header implies " +
                        std::to_string(count * pixels),
                    std::min(images.size(), 16 + count * pixels));
  }
  const std::uint32_t lmagic = read_be32(labels, 0, "label magic");
  if (lmagic != kIdxLabelsMagic) throw DataError("bad idx label magic number", 0);
  const std::size_t lcount = read_be32(labels, 4, "label count");
  if (lcount != count) {
    throw DataError("label file has " + std::to_string(lcount) + " entries, image file " + std::to_string(count), 4);
  }
  if (labels.size() != 8 + count) {
    throw DataError("idx label payload is " + std::to_string(labels.size() - 8) + " bytes, expected " +
                        std::to_string(count),
                    std::min(labels.size(), 8 + count));
  }

  Dataset ds;
  ds.examples = Matrix(pixels, count);
  ds.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint8_t* src = images.data() + 16 + i * pixels;
    for (std::size_t p = 0; p < pixels; ++p) ds.examples(p, i) = src[p] / 255.0;
    ds.labels[i] = labels[8 + i];
  }
  ds.num_classes = resolve_classes(ds.labels, num_classes, 8);
  return ds;
}

Dataset parse_csv(const std::string& text, std::size_t num_classes) {
  std::size_t pos = 0;
  std::size_t line_no = 0;
  std::size_t width = 0;
  std::vector<double> values;
  std::vector<int> labels;
  while (pos < text.size()) {
    const std::size_t line_start = pos;
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    const std::string line = trim(std::string_view(text).substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');) fields.push_back(trim(f));
    if (width == 0) {
      if (fields.size() < 2) throw DataError("csv header needs at least one feature and a label column", line_start);
      width = fields.size();
      continue;
    }
    if (fields.size() != width) {
      throw DataError("csv line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                          " fields, header has " + std::to_string(width),
                      line_start);
    }
    for (std::size_t f = 0; f + 1 < width; ++f) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(fields[f].data(), fields[f].data() + fields[f].size(), v);
      if (ec != std::errc() || ptr != fields[f].data() + fields[f].size() || !std::isfinite(v)) {
        throw DataError("csv line " + std::to_string(line_no) + ": bad numeric field '" + fields[f] + "'", line_start);
      }
      values.push_back(v);
    }
    int y = 0;
    const std::string& lf = fields.back();
    const auto [ptr, ec] = std::from_chars(lf.data(), lf.data() + lf.size(), y);
    if (ec != std::errc() || ptr != lf.data() + lf.size()) {
      throw DataError("csv line " + std::to_string(line_no) + ": bad integer label '" + lf + "'", line_start);
    }
    labels.push_back(y);
  }
  if (labels.empty()) throw DataError("csv contains no data rows", text.size());
  const std::size_t dim = width - 1;
  Dataset ds;
  ds.examples = Matrix(dim, labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    for (std::size_t r = 0; r < dim; ++r) ds.examples(r, i) = values[i * dim + r];
  ds.labels = std::move(labels);
  ds.num_classes = resolve_classes(ds.labels, num_classes, 0);
  return ds;
}

Dataset load_dataset(const DatasetSource& source) {
  Dataset ds;
  switch (source.format) {
    case DatasetFormat::kIdxUbyte: {
      if (source.labels_path.empty()) throw DataError("idx-ubyte dataset needs a labels file");
      const auto images = read_file(source.path);
      const auto labels = read_file(source.labels_path);
      ds = parse_idx(images, labels, source.num_classes);
      break;
    }
    case DatasetFormat::kCsv: {
      const auto bytes = read_file(source.path);
      ds = parse_csv(std::string(bytes.begin(), bytes.end()), source.num_classes);
      break;
    }
    case DatasetFormat::kSynthetic: {
      const auto bytes = read_file(source.path);
      ds = generate_synthetic(parse_synthetic_spec(std::string(bytes.begin(), bytes.end())));
      if (source.num_classes != 0 && source.num_classes != ds.num_classes) {
        throw DataError("class count mismatch: synthetic spec has " + std::to_string(ds.num_classes) +
                        " classes, declared " + std::to_string(source.num_classes));
      }
      break;
    }
  }
  ds.validate();
  return ds;
}

std::vector<double> label_distribution(std::span<const int> labels, std::size_t num_classes) {
  if (labels.empty()) throw DataError("label distribution of an empty set");
  std::vector<double> p(num_classes, 0.0);
  for (int y : labels) p.at(static_cast<std::size_t>(y)) += 1.0;
  for (double& v : p) v /= static_cast<double>(labels.size());
  return p;
}

std::vector<double> label_distribution(const Dataset& ds, const ClientShard& shard) {
  std::vector<int> labels;
  labels.reserve(shard.size());
  for (std::size_t i : shard.indices) labels.push_back(ds.labels[i]);
  return label_distribution(labels, ds.num_classes);
}

std::vector<ClientShard> partition_noniid(const Dataset& ds, std::size_t num_clients,
                                          std::size_t classes_per_client, std::uint64_t seed) {
  const std::size_t classes = ds.num_classes;
  if (num_clients == 0 || classes_per_client == 0 || classes_per_client > classes) {
    throw Error("data", "infeasible partition: " + std::to_string(num_clients) + " clients with " +
                            std::to_string(classes_per_client) + " of " + std::to_string(classes) +
                            " classes each");
  }
  Rng rng(derive_seed(seed, {0x5041525449ULL}));

  std::vector<std::vector<std::size_t>> by_class(classes);
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);
  for (auto& members : by_class) rng.shuffle(std::span(members));

  const std::size_t total_shards = num_clients * classes_per_client;
  std::vector<std::size_t> shards_per_class(classes, total_shards / classes);
  std::vector<std::size_t> class_order(classes);
  std::iota(class_order.begin(), class_order.end(), 0);
  rng.shuffle(std::span(class_order));
  for (std::size_t i = 0; i < total_shards % classes; ++i) ++shards_per_class[class_order[i]];

  std::vector<std::vector<std::size_t>> shards;
  shards.reserve(total_shards);
  std::size_t retained = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    const std::size_t count = shards_per_class[c];
    if (count == 0) continue;
    const std::size_t shard_size = by_class[c].size() / count;
    if (shard_size == 0) {
      throw Error("data", "infeasible partition: class " + std::to_string(c) + " has " +
                              std::to_string(by_class[c].size()) + " examples for " + std::to_string(count) +
                              " shards");
    }
    for (std::size_t s = 0; s < count; ++s) {
      const auto begin = by_class[c].begin() + static_cast<std::ptrdiff_t>(s * shard_size);
      shards.emplace_back(begin, begin + static_cast<std::ptrdiff_t>(shard_size));
      retained += shard_size;
    }
  }
  if (static_cast<double>(retained) < 0.95 * static_cast<double>(ds.size())) {
    throw Error("data", "infeasible partition: equal-size shards would keep only " + std::to_string(retained) +
                            " of " + std::to_string(ds.size()) + " examples (< 95%)");
  }
  rng.shuffle(std::span(shards));

  std::vector<ClientShard> out(num_clients);
  for (std::size_t client = 0; client < num_clients; ++client) {
    ClientShard& shard = out[client];
    shard.client_id = client;
    for (std::size_t s = 0; s < classes_per_client; ++s) {
      const auto& src = shards[client * classes_per_client + s];
      shard.indices.insert(shard.indices.end(), src.begin(), src.end());
    }
    std::sort(shard.indices.begin(), shard.indices.end());
    shard.distribution = label_distribution(ds, shard);
  }
  return out;
}

std::vector<ClientShard> partition_dirichlet(const Dataset& ds, std::size_t num_clients, double alpha,
                                             std::uint64_t seed) {
  if (num_clients == 0 || num_clients > ds.size() || !(alpha > 0.0)) {
    throw Error("data", "infeasible Dirichlet partition: " + std::to_string(num_clients) + " clients, alpha " +
                            to_text(alpha));
  }
  Rng rng(derive_seed(seed, {0x4449524943ULL}));
  std::vector<std::vector<std::size_t>> members(num_clients);
  std::vector<std::vector<std::size_t>> by_class(ds.num_classes);
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);
  for (auto& idx : by_class) {
    rng.shuffle(std::span(idx));
    std::vector<double> weights(num_clients);
    double total = 0.0;
    for (double& w : weights) total += (w = rng.gamma(alpha));
    std::size_t start = 0;
    double cumulative = 0.0;
    for (std::size_t client = 0; client < num_clients; ++client) {
      cumulative += weights[client] / total;
      const std::size_t end = client + 1 == num_clients
                                  ? idx.size()
                                  : std::min(idx.size(), static_cast<std::size_t>(std::floor(cumulative * static_cast<double>(idx.size()))));
      for (std::size_t i = start; i < std::max(start, end); ++i) members[client].push_back(idx[i]);
      start = std::max(start, end);
    }
  }
  // Every client needs at least one example; take from the currently largest shard.
  for (auto& m : members) {
    if (!m.empty()) continue;
    auto donor = std::max_element(members.begin(), members.end(),
                                  [](const auto& a, const auto& b) { return a.size() < b.size(); });
    m.push_back(donor->back());
    donor->pop_back();
  }
  std::vector<ClientShard> out(num_clients);
  for (std::size_t client = 0; client < num_clients; ++client) {
    out[client].client_id = client;
    out[client].indices = std::move(members[client]);
    std::sort(out[client].indices.begin(), out[client].indices.end());
    out[client].distribution = label_distribution(ds, out[client]);
  }
  return out;
}

std::vector<double> retained_distribution(std::span<const ClientShard> shards, std::size_t num_classes) {
  std::vector<double> p(num_classes, 0.0);
  double total = 0.0;
  for (const ClientShard& s : shards) {
    const auto n = static_cast<double>(s.size());
    for (std::size_t c = 0; c < num_classes; ++c) p[c] += n * s.distribution[c];
    total += n;
  }
  if (total > 0.0)
    for (double& v : p) v /= total;
  return p;
}

std::uint64_t partition_hash(std::span<const ClientShard> shards) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  };
  for (const ClientShard& s : shards) {
    feed(s.client_id);
    feed(s.indices.size());
    for (std::size_t i : s.indices) feed(i);
  }
  return h;
}

std::size_t minibatch_size(std::size_t shard_size, double s) {
  const auto n = static_cast<std::size_t>(std::llround(s * static_cast<double>(shard_size)));
  return std::clamp<std::size_t>(n, 1, shard_size);
}

ClientBatch sample_minibatch_of_size(const Dataset& ds, const ClientShard& shard, std::size_t size,
                                     Rng& rng) {
  if (shard.indices.empty()) throw Error("data", "cannot sample from an empty shard");
  if (size == 0 || size > shard.size()) {
    throw Error("data", "batch size " + std::to_string(size) + " outside [1, " + std::to_string(shard.size()) + "]");
  }
  std::vector<std::size_t> order = shard.indices;
  rng.shuffle(std::span(order));
  order.resize(size);
  ClientBatch batch;
  batch.client_id = shard.client_id;
  batch.x = Matrix(ds.feature_dim(), size);
  batch.labels.reserve(size);
  for (std::size_t j = 0; j < size; ++j) {
    const std::size_t src = order[j];
    for (std::size_t r = 0; r < ds.feature_dim(); ++r) batch.x(r, j) = ds.examples(r, src);
    batch.labels.push_back(ds.labels[src]);
  }
  batch.indices = std::move(order);
  return batch;
}

ClientBatch sample_minibatch(const Dataset& ds, const ClientShard& shard, double s, Rng& rng) {
  if (!(s > 0.0) || s > 1.0) throw Error("data", "example sampling probability must be in (0, 1]");
  if (shard.indices.empty()) throw Error("data", "cannot sample from an empty shard");
  return sample_minibatch_of_size(ds, shard, minibatch_size(shard.size(), s), rng);
}

TrainTestSplit holdout_split(const Dataset& ds, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0) || !(test_fraction < 1.0)) {
    throw Error("data", "holdout fraction must be in (0, 1)");
  }
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, {0x484f4c44ULL}));
  rng.shuffle(std::span(order));
  const auto n_test = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(ds.size()))), 1, ds.size() - 1);
  std::span<const std::size_t> all(order);
  return {ds.select(all.subspan(n_test)), ds.select(all.first(n_test))};
}

}  // namespace hfl
