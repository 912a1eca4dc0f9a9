// Copyright 2026 The binxform Authors
// SPDX-License-Identifier: Apache-2.0

#include "bxf/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "bxf/error.hpp"
#include "bxf/rng.hpp"

namespace bxf {

const char* split_name(Split s) noexcept {
  switch (s) {
    case Split::all: return "all";
    case Split::train: return "train";
    case Split::test: return "test";
  }
  return "?";
}

void Dataset::validate() const {
  require(features.rank() == 2, ErrorCode::dimension, "dataset features must be a matrix");
  require(features.rows() == labels.size(), ErrorCode::dimension,
          "dataset has " + std::to_string(features.rows()) + " rows but " +
              std::to_string(labels.size()) + " labels");
  features.validate("dataset features");
  for (std::size_t i = 0; i < labels.size(); ++i)
    require(labels[i] >= 0 && static_cast<std::size_t>(labels[i]) < num_classes, ErrorCode::domain,
            "label " + std::to_string(labels[i]) + " at row " + std::to_string(i) +
                " outside [0, " + std::to_string(num_classes) + ")");
}

Dataset Dataset::subset(std::span<const std::size_t> index) const {
  Dataset out;
  out.features = gather_rows(features, index);
  out.labels.reserve(index.size());
  for (std::size_t i : index) out.labels.push_back(labels.at(i));
  out.num_classes = num_classes;
  out.split = split;
  out.provenance = provenance;
  out.image_shape = image_shape;
  return out;
}

Dataset make_gaussians(const GaussianSpec& spec, std::uint64_t seed) {
  require(spec.n > 0 && spec.dim > 0 && spec.classes >= 2, ErrorCode::argument,
          "synthetic-gaussians needs n > 0, dim > 0, classes >= 2");
  require(spec.informative >= 1 && spec.informative <= spec.dim, ErrorCode::argument,
          "synthetic-gaussians: informative must lie in [1, dim]");
  Rng rng = make_rng(seed, "dataset");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> means(spec.classes, std::vector<double>(spec.informative));
  for (auto& m : means)
    for (double& v : m) v = spec.separation * normal(rng);

  Dataset d;
  d.features = Tensor::matrix(spec.n, spec.dim);
  d.labels.resize(spec.n);
  d.num_classes = spec.classes;
  d.provenance = "synthetic-gaussians";
  for (std::size_t i = 0; i < spec.n; ++i) {
    const auto c = static_cast<int>(i % spec.classes);
    d.labels[i] = c;
    for (std::size_t j = 0; j < spec.dim; ++j) {
      d.features(i, j) = j < spec.informative ? means[c][j] + spec.noise * normal(rng)
                                              : spec.low_std * normal(rng);
    }
  }
  return d;
}

Dataset make_moons(const MoonsSpec& spec, std::uint64_t seed) {
  require(spec.n >= 2, ErrorCode::argument, "synthetic-moons needs n >= 2");
  Rng rng = make_rng(seed, "dataset");
  std::normal_distribution<double> normal(0.0, spec.noise);
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
  Dataset d;
  d.features = Tensor::matrix(spec.n, 2);
  d.labels.resize(spec.n);
  d.num_classes = 2;
  d.provenance = "synthetic-moons";
  for (std::size_t i = 0; i < spec.n; ++i) {
    const int c = static_cast<int>(i % 2);
    const double t = angle(rng);
    const double x = c == 0 ? std::cos(t) : 1.0 - std::cos(t);
    const double y = c == 0 ? std::sin(t) : 0.5 - std::sin(t);
    d.features(i, 0) = x + normal(rng);
    d.features(i, 1) = y + normal(rng);
    d.labels[i] = c;
  }
  return d;
}

namespace {

std::vector<std::string> split_fields(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char ch) { return !std::isspace(ch); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

double parse_number(const std::string& text, const std::string& where) {
  const std::string t = trim(text);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    fail(ErrorCode::parse, where + ": '" + t + "' is not a number");
  }
  require(used == t.size(), ErrorCode::parse, where + ": trailing characters in '" + t + "'");
  return v;
}

std::ifstream open_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::io, "cannot open " + path);
  return in;
}

}  // namespace

Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::io, "cannot open " + path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::parse, path + ": missing header line");
  const std::size_t cols = split_fields(line, ',').size();
  require(cols >= 2, ErrorCode::parse, path + ":1: header needs at least one feature and a label");

  std::vector<double> values;
  std::vector<int> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line, ',');
    const std::string where = path + ":" + std::to_string(line_no);
    require(fields.size() == cols, ErrorCode::parse,
            where + ": expected " + std::to_string(cols) + " fields, found " +
                std::to_string(fields.size()));
    for (std::size_t j = 0; j + 1 < cols; ++j) values.push_back(parse_number(fields[j], where));
    const double label = parse_number(fields.back(), where);
    require(label >= 0 && label == std::floor(label) && label < 1e9, ErrorCode::parse,
            where + ": label must be a non-negative integer");
    labels.push_back(static_cast<int>(label));
  }
  require(!labels.empty(), ErrorCode::parse, path + ": no data rows");
  Dataset d;
  d.features = Tensor({labels.size(), cols - 1}, std::move(values));
  d.num_classes = static_cast<std::size_t>(*std::max_element(labels.begin(), labels.end())) + 1;
  d.labels = std::move(labels);
  d.provenance = "csv";
  d.validate();
  return d;
}

IdxArray read_idx(const std::string& path) {
  std::ifstream in = open_binary(path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  require(bytes.size() >= 4, ErrorCode::parse, path + ": offset 0: file shorter than IDX magic");
  require(bytes[0] == 0 && bytes[1] == 0, ErrorCode::parse,
          path + ": offset 0: IDX magic must start with two zero bytes");
  IdxArray out;
  out.type_code = bytes[2];
  const std::size_t rank = bytes[3];
  std::size_t width = 0;
  switch (out.type_code) {
    case 0x08: case 0x09: width = 1; break;
    case 0x0B: width = 2; break;
    case 0x0C: case 0x0D: width = 4; break;
    case 0x0E: width = 8; break;
    default:
      fail(ErrorCode::parse, path + ": offset 2: unknown IDX type code " + std::to_string(out.type_code));
  }
  require(rank >= 1, ErrorCode::parse, path + ": offset 3: IDX rank must be >= 1");
  require(bytes.size() >= 4 + 4 * rank, ErrorCode::parse, path + ": offset 4: truncated dimension table");
  auto be = [&](std::size_t off, std::size_t n) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < n; ++i) v = (v << 8) | bytes[off + i];
    return v;
  };
  std::size_t count = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    out.dims.push_back(static_cast<std::size_t>(be(4 + 4 * i, 4)));
    count *= out.dims.back();
  }
  const std::size_t data_off = 4 + 4 * rank;
  require(bytes.size() == data_off + count * width, ErrorCode::parse,
          path + ": offset " + std::to_string(data_off) + ": expected " +
              std::to_string(count * width) + " payload bytes, found " +
              std::to_string(bytes.size() - data_off));
  out.values.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t off = data_off + i * width;
    const std::uint64_t raw = be(off, width);
    double v = 0.0;
    switch (out.type_code) {
      case 0x08: v = static_cast<double>(raw); break;
      case 0x09: v = static_cast<std::int8_t>(raw); break;
      case 0x0B: v = static_cast<std::int16_t>(raw); break;
      case 0x0C: v = static_cast<std::int32_t>(raw); break;
      case 0x0D: v = std::bit_cast<float>(static_cast<std::uint32_t>(raw)); break;
      case 0x0E: v = std::bit_cast<double>(raw); break;
    }
    out.values[i] = v;
  }
  return out;
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  IdxArray images = read_idx(images_path);
  IdxArray labels = read_idx(labels_path);
  require(labels.dims.size() == 1 && labels.type_code == 0x08, ErrorCode::parse,
          labels_path + ": label file must be a u8 vector");
  const std::size_t n = images.dims[0];
  require(labels.dims[0] == n, ErrorCode::dimension,
          "IDX image count " + std::to_string(n) + " differs from label count " +
              std::to_string(labels.dims[0]));
  require(n > 0, ErrorCode::parse, images_path + ": no samples");
  const std::size_t d = images.values.size() / n;
  if (images.type_code == 0x08)
    for (double& v : images.values) v /= 255.0;
  Dataset out;
  out.features = Tensor({n, d}, std::move(images.values));
  out.labels.resize(n);
  int max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    out.labels[i] = static_cast<int>(labels.values[i]);
    max_label = std::max(max_label, out.labels[i]);
  }
  out.num_classes = static_cast<std::size_t>(max_label) + 1;
  out.provenance = "idx";
  if (images.dims.size() == 3) out.image_shape = {1, images.dims[1], images.dims[2]};
  if (images.dims.size() == 4) out.image_shape = {images.dims[1], images.dims[2], images.dims[3]};
  out.validate();
  return out;
}

namespace {

template <typename Apply>
void parse_options(const std::string& generator, const std::string& opts, Apply apply) {
  if (opts.empty()) return;
  for (const std::string& kv : split_fields(opts, ',')) {
    const auto eq = kv.find('=');
    require(eq != std::string::npos, ErrorCode::argument,
            generator + ": option '" + kv + "' is not key=value");
    const std::string key = trim(kv.substr(0, eq));
    const double value = parse_number(kv.substr(eq + 1), generator + " option " + key);
    if (!apply(key, value)) fail(ErrorCode::argument, generator + ": unknown option '" + key + "'");
  }
}

std::size_t as_count(double v, const std::string& key) {
  require(v >= 0 && v == std::floor(v), ErrorCode::argument, key + " must be a non-negative integer");
  return static_cast<std::size_t>(v);
}

}  // namespace

Dataset load_dataset(const std::string& spec, std::uint64_t seed) {
  const auto colon = spec.find(':');
  const std::string head = spec.substr(0, colon);
  const std::string rest = colon == std::string::npos ? "" : spec.substr(colon + 1);
  if (head == "synthetic-gaussians") {
    GaussianSpec g;
    parse_options(head, rest, [&](const std::string& k, double v) {
      if (k == "n") g.n = as_count(v, k);
      else if (k == "dim") g.dim = as_count(v, k);
      else if (k == "classes") g.classes = as_count(v, k);
      else if (k == "informative") g.informative = as_count(v, k);
      else if (k == "separation") g.separation = v;
      else if (k == "noise") g.noise = v;
      else if (k == "low_std") g.low_std = v;
      else return false;
      return true;
    });
    return make_gaussians(g, seed);
  }
  if (head == "synthetic-moons") {
    MoonsSpec m;
    parse_options(head, rest, [&](const std::string& k, double v) {
      if (k == "n") m.n = as_count(v, k);
      else if (k == "noise") m.noise = v;
      else return false;
      return true;
    });
    return make_moons(m, seed);
  }
  if (head == "csv") return load_csv(rest);
  if (head == "idx") {
    const auto comma = rest.find(',');
    require(comma != std::string::npos, ErrorCode::argument, "idx dataset spec is idx:<images>,<labels>");
    return load_idx(rest.substr(0, comma), rest.substr(comma + 1));
  }
  if (spec.size() > 4 && spec.ends_with(".csv")) return load_csv(spec);
  fail(ErrorCode::argument, "unrecognized dataset spec '" + spec + "'");
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double train_fraction,
                                          std::uint64_t seed) {
  require(train_fraction > 0.0 && train_fraction < 1.0, ErrorCode::argument,
          "train fraction must lie in (0, 1)");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(seed, "split");
  std::shuffle(order.begin(), order.end(), rng);
  const auto cut = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(data.size())));
  require(cut > 0 && cut < data.size(), ErrorCode::argument, "split leaves an empty part");
  Dataset train = data.subset(std::span(order).first(cut));
  Dataset test = data.subset(std::span(order).subspan(cut));
  train.split = Split::train;
  test.split = Split::test;
  return {std::move(train), std::move(test)};
}

}  // namespace bxf
