#include "segadv/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "segadv/errors.hpp"
#include "segadv/json_io.hpp"

namespace segadv::uncertainty {

DispersionMaps dispersion_maps(const ProbabilityMap& probs) {
  const std::size_t h = probs.height(), w = probs.width(), c = probs.classes();
  DispersionMaps maps{Tensor({h, w}), Tensor({h, w}), Tensor({h, w})};
  for (std::size_t p = 0; p < probs.pixels(); ++p) {
    auto row = probs.pixel(p);
    double sum = 0.0, entropy = 0.0;
    double top = -1.0, second = -1.0;
    for (std::size_t y = 0; y < c; ++y) {
      const double v = row[y];
      sum += v;
      if (v > 0.0) entropy -= v * std::log(v);
      if (v > top) {
        second = top;
        top = v;
      } else if (v > second) {
        second = v;
      }
    }
    if (std::fabs(sum - 1.0) > 1e-4) {
      throw InputError("probability row at pixel " + std::to_string(p) + " sums to " + std::to_string(sum));
    }
    if (c < 2) second = 0.0;
    maps.entropy[p] = static_cast<float>(entropy);
    maps.variation_ratio[p] = static_cast<float>(1.0 - top);
    maps.margin[p] = static_cast<float>(1.0 - top + second);
  }
  return maps;
}

FeatureVector feature_vector(const ProbabilityMap& probs, std::string id, SampleLabel label, std::string attack) {
  const std::size_t c = probs.classes();
  const std::size_t n = probs.pixels();
  if (n == 0) throw InputError("feature vector of an empty probability map");

  // Accumulated in double from the per-pixel double values, not from the
  // float maps, so the features are as exact as the probabilities allow.
  double e_sum = 0.0, v_sum = 0.0, m_sum = 0.0;
  std::vector<double> class_sum(c, 0.0);
  for (std::size_t p = 0; p < n; ++p) {
    auto row = probs.pixel(p);
    double sum = 0.0, entropy = 0.0, top = -1.0, second = -1.0;
    for (std::size_t y = 0; y < c; ++y) {
      const double v = row[y];
      sum += v;
      class_sum[y] += v;
      if (v > 0.0) entropy -= v * std::log(v);
      if (v > top) {
        second = top;
        top = v;
      } else if (v > second) {
        second = v;
      }
    }
    if (std::fabs(sum - 1.0) > 1e-4) {
      throw InputError("probability row at pixel " + std::to_string(p) + " sums to " + std::to_string(sum));
    }
    if (c < 2) second = 0.0;
    e_sum += entropy;
    v_sum += 1.0 - top;
    m_sum += 1.0 - top + second;
  }

  FeatureVector f;
  f.id = std::move(id);
  f.label = label;
  f.attack = std::move(attack);
  const double inv = 1.0 / static_cast<double>(n);
  f.values = {e_sum * inv, v_sum * inv, m_sum * inv};
  for (double s : class_sum) f.values.push_back(s * inv);
  return f;
}

namespace {

std::string format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::string features_to_csv(std::span<const FeatureVector> features) {
  std::vector<const FeatureVector*> rows;
  rows.reserve(features.size());
  for (const auto& f : features) rows.push_back(&f);
  std::stable_sort(rows.begin(), rows.end(), [](const auto* a, const auto* b) { return a->id < b->id; });

  const std::size_t c = features.empty() ? 0 : features.front().classes();
  std::string out = "id,label,attack,E,V,M";
  for (std::size_t y = 0; y < c; ++y) out += ",P" + std::to_string(y);
  out += '\n';
  for (const auto* f : rows) {
    if (f->values.size() != c + 3) throw InputError("feature rows disagree on the class count");
    out += f->id;
    out += f->label == SampleLabel::Clean ? ",clean," : ",attacked,";
    out += f->attack;
    for (double v : f->values) out += "," + format_value(v);
    out += '\n';
  }
  return out;
}

std::vector<FeatureVector> features_from_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw InputError("feature CSV is empty");
  const auto header = split_line(line);
  if (header.size() < 6 || header[0] != "id" || header[1] != "label" || header[2] != "attack" || header[3] != "E" ||
      header[4] != "V" || header[5] != "M") {
    throw InputError("feature CSV header must start with id,label,attack,E,V,M");
  }
  const std::size_t width = header.size();
  std::vector<FeatureVector> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != width) throw InputError("feature CSV row has " + std::to_string(cells.size()) + " cells");
    FeatureVector f;
    f.id = cells[0];
    if (cells[1] == "clean") {
      f.label = SampleLabel::Clean;
    } else if (cells[1] == "attacked") {
      f.label = SampleLabel::Attacked;
    } else {
      throw InputError("unknown feature label '" + cells[1] + "'");
    }
    f.attack = cells[2];
    for (std::size_t k = 3; k < width; ++k) {
      try {
        f.values.push_back(std::stod(cells[k]));
      } catch (const std::exception&) {
        throw InputError("bad number '" + cells[k] + "' in feature CSV");
      }
    }
    out.push_back(std::move(f));
  }
  return out;
}

void write_features_csv(const std::filesystem::path& path, std::span<const FeatureVector> features) {
  io::write_text(path, features_to_csv(features));
}

std::vector<FeatureVector> read_features_csv(const std::filesystem::path& path) {
  return features_from_csv(io::read_text(path));
}

}  // namespace segadv::uncertainty
