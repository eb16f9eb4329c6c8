#include "pukit/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "pukit/errors.hpp"

namespace pukit {

std::string csv_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, r.ptr);
}

namespace {

std::string fmt_double(double v) { return csv_double(v); }

double parse_double(std::string_view field, std::size_t line_no) {
  double v = 0.0;
  auto r = std::from_chars(field.data(), field.data() + field.size(), v);
  if (r.ec != std::errc{} || r.ptr != field.data() + field.size())
    fail(ErrorKind::Parse,
         "csv: malformed numeric field '" + std::string(field) + "' on line " +
             std::to_string(line_no));
  return v;
}

long parse_int(std::string_view field, std::size_t line_no) {
  long v = 0;
  auto r = std::from_chars(field.data(), field.data() + field.size(), v);
  if (r.ec != std::errc{} || r.ptr != field.data() + field.size())
    fail(ErrorKind::Parse,
         "csv: malformed integer field '" + std::string(field) + "' on line " +
             std::to_string(line_no));
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Config, "cannot open file: " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  if (lines.empty()) fail(ErrorKind::Parse, "csv: empty file: " + path.string());
  return lines;
}

// Header must be f0..f{d-1} followed by the given tail columns.
std::size_t feature_count(const std::vector<std::string>& header,
                          std::size_t tail_min, std::size_t tail_max,
                          const std::filesystem::path& path) {
  std::size_t d = 0;
  while (d < header.size() && header[d] == "f" + std::to_string(d)) ++d;
  std::size_t tail = header.size() - d;
  if (d == 0 || tail < tail_min || tail > tail_max)
    fail(ErrorKind::Schema, "csv: unexpected header in " + path.string());
  return d;
}

}  // namespace

std::span<const double> LabeledDataset::row(std::size_t i) const {
  return std::span<const double>(features).subspan(i * d, d);
}

std::span<const double> PUDataset::row(std::size_t i) const {
  return std::span<const double>(features).subspan(i * d, d);
}

std::size_t PUDataset::count_labeled() const {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), std::uint8_t{1}));
}

std::size_t PUDataset::count_unlabeled() const { return n - count_labeled(); }

void PUDataset::validate() const {
  if (n < 1 || d < 1) fail(ErrorKind::Contract, "pu dataset: empty dataset");
  if (features.size() != n * d || s.size() != n)
    fail(ErrorKind::Shape, "pu dataset: inconsistent storage sizes");
  if (!(c > 0.0 && c <= 1.0))
    fail(ErrorKind::Contract, "pu dataset: label frequency c must lie in (0, 1]");
  if (y_true) {
    if (y_true->size() != n)
      fail(ErrorKind::Shape, "pu dataset: y_true length mismatch");
    std::size_t unl = 0, unl_pos = 0;
    for (std::size_t i = 0; i < n; ++i) {
      int y = (*y_true)[i];
      if (y != 1 && y != -1)
        fail(ErrorKind::Contract, "pu dataset: y_true values must be +1 or -1");
      if (s[i] == 1 && y != 1)
        fail(ErrorKind::Contract, "pu dataset: labeled rows must be true positives");
      if (s[i] == 0) {
        ++unl;
        if (y == 1) ++unl_pos;
      }
    }
    double expect = unl == 0 ? 0.0 : static_cast<double>(unl_pos) / unl;
    if (std::abs(expect - pi_true) > 1e-12)
      fail(ErrorKind::Contract, "pu dataset: pi_true is inconsistent with labels");
  }
}

Ratio Ratio::parse(const std::string& text) {
  auto colon = text.find(':');
  if (colon == std::string::npos)
    fail(ErrorKind::Config, "ratio: expected 'num:den', got '" + text + "'");
  Ratio r;
  r.num = static_cast<std::uint64_t>(parse_int(text.substr(0, colon), 0));
  r.den = static_cast<std::uint64_t>(parse_int(text.substr(colon + 1), 0));
  if (r.num == 0 || r.den == 0)
    fail(ErrorKind::Config, "ratio: both sides must be positive");
  return r;
}

std::string Ratio::str() const {
  return std::to_string(num) + ":" + std::to_string(den);
}

PUDataset scar_label_split(const LabeledDataset& src, const SplitSpec& spec) {
  if (src.n < 1 || src.class_ids.size() != src.n)
    fail(ErrorKind::Contract, "scar_label_split: malformed source dataset");
  if (spec.positive_class_ids.empty())
    fail(ErrorKind::Config, "scar_label_split: no positive classes declared");
  if (!(spec.label_frequency <= 1.0))
    fail(ErrorKind::Config, "scar_label_split: label frequency c must be <= 1");

  std::set<int> pos_set(spec.positive_class_ids.begin(), spec.positive_class_ids.end());
  std::set<int> all_classes(src.class_ids.begin(), src.class_ids.end());
  for (int cid : pos_set)
    if (!all_classes.count(cid))
      fail(ErrorKind::Config, "scar_label_split: positive class " + std::to_string(cid) +
                                  " not present in the source");
  if (pos_set.size() >= all_classes.size())
    fail(ErrorKind::Config, "scar_label_split: positive classes must be a strict subset");

  std::vector<std::size_t> pos_idx, neg_idx;
  for (std::size_t i = 0; i < src.n; ++i) {
    if (pos_set.count(src.class_ids[i])) pos_idx.push_back(i);
    else neg_idx.push_back(i);
  }
  const std::size_t n_neg = neg_idx.size();
  const auto target = static_cast<std::size_t>(std::llround(
      static_cast<double>(n_neg) * static_cast<double>(spec.target_pn_ratio.num) /
      static_cast<double>(spec.target_pn_ratio.den)));
  if (target < 1 || target > pos_idx.size())
    fail(ErrorKind::Config,
         "scar_label_split: target ratio " + spec.target_pn_ratio.str() +
             " is unachievable (needs " + std::to_string(target) + " positives, has " +
             std::to_string(pos_idx.size()) + ")");

  Rng rng(spec.seed);
  Rng down_rng = rng.child(0);
  Rng label_rng = rng.child(1);
  Rng order_rng = rng.child(2);

  down_rng.shuffle(pos_idx);
  pos_idx.resize(target);

  const auto n_label =
      static_cast<long long>(std::llround(spec.label_frequency * static_cast<double>(target)));
  if (n_label < 1) fail(ErrorKind::Degenerate, "scar_label_split: no labeled positives");

  label_rng.shuffle(pos_idx);  // SCAR: labeled subset uniform among kept positives

  struct RowRef { std::size_t src_row; std::uint8_t s; int y; };
  std::vector<RowRef> rows;
  rows.reserve(target + n_neg);
  for (std::size_t i = 0; i < pos_idx.size(); ++i)
    rows.push_back({pos_idx[i], static_cast<std::uint8_t>(i < static_cast<std::size_t>(n_label) ? 1 : 0), +1});
  for (std::size_t i : neg_idx) rows.push_back({i, 0, -1});
  order_rng.shuffle(rows);

  PUDataset out;
  out.n = rows.size();
  out.d = src.d;
  out.features.resize(out.n * out.d);
  out.s.resize(out.n);
  out.y_true = std::vector<int>(out.n);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto r = src.row(rows[i].src_row);
    std::copy(r.begin(), r.end(), out.features.begin() + i * out.d);
    out.s[i] = rows[i].s;
    (*out.y_true)[i] = rows[i].y;
  }
  const std::size_t unl_pos = target - static_cast<std::size_t>(n_label);
  out.pi_true = static_cast<double>(unl_pos) / static_cast<double>(unl_pos + n_neg);
  out.c = spec.label_frequency;
  out.validate();
  return out;
}

LabeledDataset gaussian_mixture(std::size_t n, std::size_t d, Ratio pn_ratio,
                                double class_separation, std::uint64_t seed) {
  if (n < 2 || d < 1) fail(ErrorKind::Config, "gaussian_mixture: need n >= 2 and d >= 1");
  if (!(class_separation > 0.0))
    fail(ErrorKind::Config, "gaussian_mixture: separation must be positive");
  const auto n_pos = static_cast<std::size_t>(std::llround(
      static_cast<double>(n) * static_cast<double>(pn_ratio.num) /
      static_cast<double>(pn_ratio.num + pn_ratio.den)));
  if (n_pos == 0 || n_pos == n)
    fail(ErrorKind::Config, "gaussian_mixture: ratio " + pn_ratio.str() +
                                " yields an empty class at n=" + std::to_string(n));
  LabeledDataset out;
  out.n = n;
  out.d = d;
  out.name = "gaussian-mixture";
  out.features.resize(n * d);
  out.class_ids.resize(n);
  Rng rng(seed);
  const double shift = class_separation / 2.0;
  for (std::size_t i = 0; i < n; ++i) {
    bool positive = i < n_pos;
    out.class_ids[i] = positive ? 1 : 0;
    for (std::size_t j = 0; j < d; ++j) {
      double v = rng.normal();
      if (j == 0) v += positive ? shift : -shift;
      out.features[i * d + j] = v;
    }
  }
  return out;
}

void save_dataset(const LabeledDataset& data, const std::filesystem::path& path) {
  std::ofstream outf(path, std::ios::binary);
  if (!outf) fail(ErrorKind::Config, "cannot write file: " + path.string());
  for (std::size_t j = 0; j < data.d; ++j) outf << 'f' << j << ',';
  outf << "class\n";
  for (std::size_t i = 0; i < data.n; ++i) {
    auto r = data.row(i);
    for (double v : r) outf << fmt_double(v) << ',';
    outf << data.class_ids[i] << '\n';
  }
}

void save_dataset(const PUDataset& data, const std::filesystem::path& path) {
  std::ofstream outf(path, std::ios::binary);
  if (!outf) fail(ErrorKind::Config, "cannot write file: " + path.string());
  for (std::size_t j = 0; j < data.d; ++j) outf << 'f' << j << ',';
  outf << 's';
  if (data.y_true) outf << ",y";
  outf << '\n';
  for (std::size_t i = 0; i < data.n; ++i) {
    auto r = data.row(i);
    for (double v : r) outf << fmt_double(v) << ',';
    outf << int(data.s[i]);
    if (data.y_true) outf << ',' << (*data.y_true)[i];
    outf << '\n';
  }
}

LabeledDataset load_labeled_csv(const std::filesystem::path& path) {
  auto lines = read_lines(path);
  auto header = split_csv_line(lines[0]);
  std::size_t d = feature_count(header, 1, 1, path);
  if (header[d] != "class")
    fail(ErrorKind::Schema, "csv: expected 'class' column in " + path.string());
  LabeledDataset out;
  out.d = d;
  out.name = path.stem().string();
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (lines[li].empty() && li + 1 == lines.size()) break;
    auto fields = split_csv_line(lines[li]);
    if (fields.size() != d + 1)
      fail(ErrorKind::Parse, "csv: wrong field count on line " + std::to_string(li + 1));
    for (std::size_t j = 0; j < d; ++j)
      out.features.push_back(parse_double(fields[j], li + 1));
    out.class_ids.push_back(static_cast<int>(parse_int(fields[d], li + 1)));
    ++out.n;
  }
  if (out.n == 0) fail(ErrorKind::Parse, "csv: no data rows in " + path.string());
  return out;
}

PUDataset load_pu_csv(const std::filesystem::path& path) {
  auto lines = read_lines(path);
  auto header = split_csv_line(lines[0]);
  std::size_t d = feature_count(header, 1, 2, path);
  if (header[d] != "s")
    fail(ErrorKind::Schema, "csv: missing 's' column in " + path.string());
  bool has_y = header.size() == d + 2;
  if (has_y && header[d + 1] != "y")
    fail(ErrorKind::Schema, "csv: unexpected trailing column in " + path.string());

  PUDataset out;
  out.d = d;
  if (has_y) out.y_true = std::vector<int>{};
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (lines[li].empty() && li + 1 == lines.size()) break;
    auto fields = split_csv_line(lines[li]);
    if (fields.size() != d + (has_y ? 2 : 1))
      fail(ErrorKind::Parse, "csv: wrong field count on line " + std::to_string(li + 1));
    for (std::size_t j = 0; j < d; ++j)
      out.features.push_back(parse_double(fields[j], li + 1));
    long sv = parse_int(fields[d], li + 1);
    if (sv != 0 && sv != 1)
      fail(ErrorKind::Schema, "csv: s must be 0 or 1 on line " + std::to_string(li + 1));
    out.s.push_back(static_cast<std::uint8_t>(sv));
    if (has_y) {
      long yv = parse_int(fields[d + 1], li + 1);
      if (yv != 1 && yv != -1)
        fail(ErrorKind::Schema, "csv: y must be +1 or -1 on line " + std::to_string(li + 1));
      out.y_true->push_back(static_cast<int>(yv));
    }
    ++out.n;
  }
  if (out.n == 0) fail(ErrorKind::Parse, "csv: no data rows in " + path.string());

  // c and pi_true are not part of the wire schema; reconstruct what the
  // labels imply (pi_true exactly, c as the empirical labeling rate).
  if (out.y_true) {
    std::size_t unl = 0, unl_pos = 0, pos_total = 0, labeled = 0;
    for (std::size_t i = 0; i < out.n; ++i) {
      if ((*out.y_true)[i] == 1) ++pos_total;
      if (out.s[i] == 1) ++labeled;
      else {
        ++unl;
        if ((*out.y_true)[i] == 1) ++unl_pos;
      }
    }
    out.pi_true = unl == 0 ? 0.0 : static_cast<double>(unl_pos) / unl;
    out.c = pos_total == 0 ? 1.0 : static_cast<double>(labeled) / pos_total;
    if (out.c <= 0.0) out.c = 1.0;  // fully unlabeled file: c is unknowable
  } else {
    out.pi_true = 0.0;
    out.c = 1.0;
  }
  out.validate();
  return out;
}

std::variant<LabeledDataset, PUDataset> load_dataset(const std::filesystem::path& path,
                                                     DatasetFormat format) {
  if (format == DatasetFormat::labeled) return load_labeled_csv(path);
  return load_pu_csv(path);
}

bool AugmentationPolicy::needs_raster() const {
  for (const auto& t : transforms)
    if (std::holds_alternative<CropResize>(t.op) ||
        std::holds_alternative<HorizontalFlip>(t.op) ||
        std::holds_alternative<BrightnessContrast>(t.op))
      return true;
  return false;
}

void AugmentationPolicy::validate(std::size_t d) const {
  if (transforms.empty())
    fail(ErrorKind::Config, "augmentation policy: at least one transform required");
  for (const auto& t : transforms) {
    if (!(t.probability >= 0.0 && t.probability <= 1.0))
      fail(ErrorKind::Config, "augmentation policy: probabilities must lie in [0, 1]");
    if (const auto* gn = std::get_if<GaussianNoise>(&t.op)) {
      if (gn->sigma < 0.0) fail(ErrorKind::Config, "augmentation policy: negative noise sigma");
    } else if (const auto* cm = std::get_if<CoordinateMask>(&t.op)) {
      if (!(cm->rate >= 0.0 && cm->rate <= 1.0))
        fail(ErrorKind::Config, "augmentation policy: mask rate must lie in [0, 1]");
    } else if (const auto* gs = std::get_if<GlobalScale>(&t.op)) {
      if (!(gs->lo <= gs->hi)) fail(ErrorKind::Config, "augmentation policy: bad scale range");
    } else if (const auto* cr = std::get_if<CropResize>(&t.op)) {
      if (!(cr->min_scale > 0.0 && cr->min_scale <= cr->max_scale && cr->max_scale <= 1.0))
        fail(ErrorKind::Config, "augmentation policy: bad crop range");
    }
  }
  if (needs_raster() && raster_width * raster_height != d)
    fail(ErrorKind::Config,
         "augmentation policy: raster transforms need raster_width*raster_height == d");
}

AugmentationPolicy AugmentationPolicy::vector_default() {
  AugmentationPolicy p;
  p.transforms.push_back({1.0, GaussianNoise{0.1}});
  p.transforms.push_back({1.0, CoordinateMask{0.1}});
  p.transforms.push_back({1.0, GlobalScale{0.9, 1.1}});
  return p;
}

namespace {

void apply_crop_resize(std::vector<double>& x, std::size_t w, std::size_t h,
                       const CropResize& cr, Rng& rng) {
  double scale = rng.uniform(cr.min_scale, cr.max_scale);
  auto cw = static_cast<std::size_t>(std::llround(static_cast<double>(w) * scale));
  auto ch = static_cast<std::size_t>(std::llround(static_cast<double>(h) * scale));
  cw = std::max<std::size_t>(1, std::min(cw, w));
  ch = std::max<std::size_t>(1, std::min(ch, h));
  std::size_t x0 = static_cast<std::size_t>(rng.below(w - cw + 1));
  std::size_t y0 = static_cast<std::size_t>(rng.below(h - ch + 1));
  std::vector<double> out(w * h);
  for (std::size_t r = 0; r < h; ++r) {
    double sy = static_cast<double>(y0) +
                (static_cast<double>(r) + 0.5) * static_cast<double>(ch) / static_cast<double>(h) - 0.5;
    sy = std::clamp(sy, static_cast<double>(y0), static_cast<double>(y0 + ch - 1));
    auto ry = static_cast<std::size_t>(sy);
    std::size_t ry1 = std::min(ry + 1, y0 + ch - 1);
    double fy = sy - static_cast<double>(ry);
    for (std::size_t cidx = 0; cidx < w; ++cidx) {
      double sx = static_cast<double>(x0) +
                  (static_cast<double>(cidx) + 0.5) * static_cast<double>(cw) / static_cast<double>(w) - 0.5;
      sx = std::clamp(sx, static_cast<double>(x0), static_cast<double>(x0 + cw - 1));
      auto rx = static_cast<std::size_t>(sx);
      std::size_t rx1 = std::min(rx + 1, x0 + cw - 1);
      double fx = sx - static_cast<double>(rx);
      double top = x[ry * w + rx] * (1.0 - fx) + x[ry * w + rx1] * fx;
      double bot = x[ry1 * w + rx] * (1.0 - fx) + x[ry1 * w + rx1] * fx;
      out[r * w + cidx] = top * (1.0 - fy) + bot * fy;
    }
  }
  x = std::move(out);
}

}  // namespace

std::vector<std::vector<double>> augment_views(std::span<const double> x,
                                               const AugmentationPolicy& policy,
                                               std::size_t m, Rng& rng) {
  if (m < 2) fail(ErrorKind::Contract, "augment_views: need at least 2 views");
  policy.validate(x.size());
  std::vector<std::vector<double>> views;
  views.reserve(m);
  for (std::size_t v = 0; v < m; ++v) {
    std::vector<double> cur(x.begin(), x.end());
    for (const auto& t : policy.transforms) {
      bool apply = rng.uniform01() < t.probability;
      if (!apply) continue;
      if (const auto* gn = std::get_if<GaussianNoise>(&t.op)) {
        for (double& c : cur) c += gn->sigma * rng.normal();
      } else if (const auto* cm = std::get_if<CoordinateMask>(&t.op)) {
        for (double& c : cur)
          if (rng.uniform01() < cm->rate) c = 0.0;
      } else if (const auto* gs = std::get_if<GlobalScale>(&t.op)) {
        double f = rng.uniform(gs->lo, gs->hi);
        for (double& c : cur) c *= f;
      } else if (const auto* cr = std::get_if<CropResize>(&t.op)) {
        apply_crop_resize(cur, policy.raster_width, policy.raster_height, *cr, rng);
      } else if (std::holds_alternative<HorizontalFlip>(t.op)) {
        std::size_t w = policy.raster_width;
        for (std::size_t r = 0; r < policy.raster_height; ++r)
          std::reverse(cur.begin() + r * w, cur.begin() + (r + 1) * w);
      } else if (const auto* bc = std::get_if<BrightnessContrast>(&t.op)) {
        double bright = rng.uniform(-bc->max_brightness, bc->max_brightness);
        double contrast = rng.uniform(1.0 - bc->max_contrast, 1.0 + bc->max_contrast);
        double mu = 0.0;
        for (double c : cur) mu += c;
        mu /= static_cast<double>(cur.size());
        for (double& c : cur) c = (c - mu) * contrast + mu + bright;
      }
    }
    views.push_back(std::move(cur));
  }
  return views;
}

std::vector<std::size_t> sample_minibatch(const PUDataset& data,
                                          std::size_t batch_size, Rng& rng,
                                          bool require_both_kinds) {
  if (batch_size == 0 || batch_size > data.n)
    fail(ErrorKind::Contract, "sample_minibatch: batch size must lie in [1, n]");
  if (require_both_kinds) {
    std::size_t labeled = data.count_labeled();
    if (labeled == 0 || labeled == data.n)
      fail(ErrorKind::Composition,
           "sample_minibatch: dataset lacks one of the label kinds");
    if (batch_size < 2)
      fail(ErrorKind::Composition,
           "sample_minibatch: batch of one cannot hold both label kinds");
  }
  for (;;) {
    auto idx = rng.sample_without_replacement(data.n, batch_size);
    if (!require_both_kinds) return idx;
    bool has_pos = false, has_unl = false;
    for (std::size_t i : idx) {
      if (data.s[i] == 1) has_pos = true;
      else has_unl = true;
    }
    if (has_pos && has_unl) return idx;
  }
}

}  // namespace pukit
