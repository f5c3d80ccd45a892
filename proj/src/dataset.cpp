#include "cactus/dataset.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "cactus/binio.hpp"

#include "cactus/text.hpp"

namespace cactus {

const char* split_name(Split s) {
  switch (s) {
    case Split::MetaTrain:
      return "meta-train";
    case Split::MetaVal:
      return "meta-val";
    case Split::MetaTest:
      return "meta-test";
  }
  return "?";
}

Split parse_split(const std::string& name) {
  if (name == "meta-train" || name == "train") return Split::MetaTrain;
  if (name == "meta-val" || name == "val") return Split::MetaVal;
  if (name == "meta-test" || name == "test") return Split::MetaTest;
  throw ConfigError("unknown split \"" + name + "\"");
}

std::size_t DataSet::num_classes() const {
  if (!labels || labels->empty()) return 0;
  return static_cast<std::size_t>(*std::max_element(labels->begin(), labels->end())) + 1;
}

std::vector<std::size_t> DataSet::indices_in(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split.size(); ++i)
    if (split[i] == s) out.push_back(i);
  return out;
}

void DataSet::validate() const {
  const std::size_t n = raw.rows();
  if (embeddings && embeddings->rows() != n)
    throw DataError("row-count mismatch: embeddings have " + std::to_string(embeddings->rows()) + " rows, raw has " +
                    std::to_string(n));
  if (labels) {
    if (labels->size() != n) throw DataError("row-count mismatch: " + std::to_string(labels->size()) + " labels for " +
                                             std::to_string(n) + " rows");
    for (std::size_t i = 0; i < n; ++i)
      if ((*labels)[i] < 0)
        throw DataError("label out of range at row " + std::to_string(i) + ": " + std::to_string((*labels)[i]));
  }
  if (attributes) {
    if (attributes->rows() != n) throw DataError("row-count mismatch: attribute rows differ from raw rows");
    for (auto v : attributes->data())
      if (v > 1) throw DataError("attribute entries must be 0 or 1");
  }
  if (split.size() != n) throw DataError("split tag count does not match row count");
  auto check_finite = [](const Mat& m, const char* what) {
    for (double v : m.data())
      if (!std::isfinite(v)) throw DataError(std::string("non-finite value in ") + what);
  };
  check_finite(raw, "raw");
  if (embeddings) check_finite(*embeddings, "embeddings");
}

// ---------------------------------------------------------------- binary

void write_dataset(std::ostream& os, const DataSet& ds) {
  const std::size_t n = ds.size();
  const std::size_t d_z = ds.embeddings ? ds.embeddings->cols() : 0;
  const std::size_t a = ds.attributes ? ds.attributes->cols() : 0;
  binio::put_magic(os, "EMB1");
  binio::put_u32(os, static_cast<std::uint32_t>(n));
  binio::put_u32(os, static_cast<std::uint32_t>(ds.raw.cols()));
  binio::put_u32(os, static_cast<std::uint32_t>(d_z));
  binio::put_u32(os, static_cast<std::uint32_t>(a));
  binio::put_u8(os, ds.labels ? 1 : 0);
  for (double v : ds.raw.data()) binio::put_f64(os, v);
  if (ds.embeddings)
    for (double v : ds.embeddings->data()) binio::put_f64(os, v);
  if (ds.labels)
    for (int l : *ds.labels) binio::put_i32(os, l);
  if (ds.attributes) {
    const std::size_t bytes = (a + 7) / 8;
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t b = 0; b < bytes; ++b) {
        std::uint8_t packed = 0;
        for (std::size_t bit = 0; bit < 8 && b * 8 + bit < a; ++bit)
          if ((*ds.attributes)(r, b * 8 + bit)) packed |= static_cast<std::uint8_t>(1u << bit);
        binio::put_u8(os, packed);
      }
    }
  }
}

DataSet read_dataset(std::istream& is) {
  try {
    binio::expect_magic(is, "EMB1");
  } catch (const DataError&) {
    throw DataError("malformed header: missing EMB1 magic");
  }
  const std::size_t n = binio::get_u32(is, "header n");
  const std::size_t d_in = binio::get_u32(is, "header d_in");
  const std::size_t d_z = binio::get_u32(is, "header d_z");
  const std::size_t a = binio::get_u32(is, "header A");
  const std::uint8_t flags = binio::get_u8(is, "header flags");
  if (flags > 1) throw DataError("malformed header: unknown flag bits");
  if (n == 0 || d_in == 0) throw DataError("malformed header: empty dataset");

  DataSet ds;
  ds.raw = Mat(n, d_in);
  try {
    for (auto& v : ds.raw.data()) v = binio::get_f64(is, "raw");
    if (d_z > 0) {
      ds.embeddings = Mat(n, d_z);
      for (auto& v : ds.embeddings->data()) v = binio::get_f64(is, "embeddings");
    }
    if (flags & 1) {
      ds.labels = std::vector<int>(n);
      for (auto& l : *ds.labels) l = binio::get_i32(is, "labels");
    }
    if (a > 0) {
      ds.attributes = Matrix<std::uint8_t>(n, a);
      const std::size_t bytes = (a + 7) / 8;
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t b = 0; b < bytes; ++b) {
          const std::uint8_t packed = binio::get_u8(is, "attributes");
          for (std::size_t bit = 0; bit < 8 && b * 8 + bit < a; ++bit)
            (*ds.attributes)(r, b * 8 + bit) = (packed >> bit) & 1u;
        }
    }
  } catch (const DataError& e) {
    throw DataError(std::string("row-count mismatch: ") + e.what());
  }
  if (is.peek() != std::char_traits<char>::eof()) throw DataError("row-count mismatch: trailing bytes after payload");
  ds.split.assign(n, Split::MetaTrain);
  ds.validate();
  return ds;
}

// ---------------------------------------------------------------- csv

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, std::size_t line) {
  double v = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  while (begin < end && *begin == ' ') ++begin;
  auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc() || res.ptr != end)
    throw DataError("unparseable number \"" + s + "\" on line " + std::to_string(line));
  return v;
}

// Parses "<prefix><index>" and returns the index, or -1.
long column_index(const std::string& name, const std::string& prefix) {
  if (name.size() <= prefix.size() || name.compare(0, prefix.size(), prefix) != 0) return -1;
  long idx = 0;
  auto res = std::from_chars(name.data() + prefix.size(), name.data() + name.size(), idx);
  if (res.ec != std::errc() || res.ptr != name.data() + name.size() || idx < 0) return -1;
  return idx;
}

}  // namespace

void write_dataset_csv(std::ostream& os, const DataSet& ds) {
  std::vector<std::string> header;
  for (std::size_t j = 0; j < ds.raw.cols(); ++j) header.push_back("raw_" + std::to_string(j));
  if (ds.embeddings)
    for (std::size_t j = 0; j < ds.embeddings->cols(); ++j) header.push_back("emb_" + std::to_string(j));
  if (ds.labels) header.emplace_back("label");
  if (ds.attributes)
    for (std::size_t j = 0; j < ds.attributes->cols(); ++j) header.push_back("attr_" + std::to_string(j));
  for (std::size_t j = 0; j < header.size(); ++j) os << (j ? "," : "") << header[j];
  os << '\n';
  for (std::size_t r = 0; r < ds.size(); ++r) {
    bool first = true;
    auto emit = [&](const std::string& s) {
      if (!first) os << ',';
      os << s;
      first = false;
    };
    for (double v : ds.raw.row(r)) emit(format_double(v));
    if (ds.embeddings)
      for (double v : ds.embeddings->row(r)) emit(format_double(v));
    if (ds.labels) emit(std::to_string((*ds.labels)[r]));
    if (ds.attributes)
      for (auto v : ds.attributes->row(r)) emit(std::to_string(static_cast<int>(v)));
    os << '\n';
  }
}

DataSet read_dataset_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw DataError("malformed header: empty CSV");
  const auto names = split_csv_line(line);
  std::vector<std::size_t> raw_cols, emb_cols, attr_cols;
  std::vector<long> raw_idx, emb_idx, attr_idx;
  long label_col = -1;
  std::set<std::string> seen;
  for (std::size_t c = 0; c < names.size(); ++c) {
    const auto& name = names[c];
    if (!seen.insert(name).second) throw DataError("malformed header: duplicate column \"" + name + "\"");
    if (name == "label") {
      label_col = static_cast<long>(c);
    } else if (long i = column_index(name, "raw_"); i >= 0) {
      raw_cols.push_back(c);
      raw_idx.push_back(i);
    } else if (long e = column_index(name, "emb_"); e >= 0) {
      emb_cols.push_back(c);
      emb_idx.push_back(e);
    } else if (long a = column_index(name, "attr_"); a >= 0) {
      attr_cols.push_back(c);
      attr_idx.push_back(a);
    } else {
      throw DataError("malformed header: unknown column \"" + name + "\"");
    }
  }
  if (raw_cols.empty()) throw DataError("malformed header: no raw_ columns");
  // Columns may appear in any order but each family must be exactly 0..d-1.
  auto order = [](std::vector<std::size_t>& cols, std::vector<long>& idx, const char* family) {
    std::vector<std::size_t> perm(cols.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::sort(perm.begin(), perm.end(), [&](auto a, auto b) { return idx[a] < idx[b]; });
    std::vector<std::size_t> sorted(cols.size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
      if (idx[perm[i]] != static_cast<long>(i))
        throw DataError(std::string("malformed header: ") + family + " columns are not numbered 0.." +
                        std::to_string(cols.size() - 1));
      sorted[i] = cols[perm[i]];
    }
    cols = std::move(sorted);
  };
  order(raw_cols, raw_idx, "raw_");
  order(emb_cols, emb_idx, "emb_");
  order(attr_cols, attr_idx, "attr_");

  std::vector<double> raw, emb;
  std::vector<int> labels;
  std::vector<std::uint8_t> attrs;
  std::size_t n = 0;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != names.size())
      throw DataError("row-count mismatch: line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                      " fields, header has " + std::to_string(names.size()));
    for (auto c : raw_cols) raw.push_back(parse_double(fields[c], line_no));
    for (auto c : emb_cols) emb.push_back(parse_double(fields[c], line_no));
    if (label_col >= 0) {
      const double l = parse_double(fields[static_cast<std::size_t>(label_col)], line_no);
      if (l < 0 || l != std::floor(l) || l > 2147483647.0)
        throw DataError("label out of range on line " + std::to_string(line_no) + ": " + fields[static_cast<std::size_t>(label_col)]);
      labels.push_back(static_cast<int>(l));
    }
    for (auto c : attr_cols) {
      const double v = parse_double(fields[c], line_no);
      if (v != 0.0 && v != 1.0) throw DataError("attribute on line " + std::to_string(line_no) + " is not 0/1");
      attrs.push_back(static_cast<std::uint8_t>(v));
    }
    ++n;
  }
  if (n == 0) throw DataError("row-count mismatch: CSV has a header but no rows");
  DataSet ds;
  ds.raw = Mat(n, raw_cols.size(), std::move(raw));
  if (!emb_cols.empty()) ds.embeddings = Mat(n, emb_cols.size(), std::move(emb));
  if (label_col >= 0) ds.labels = std::move(labels);
  if (!attr_cols.empty()) ds.attributes = Matrix<std::uint8_t>(n, attr_cols.size(), std::move(attrs));
  ds.split.assign(n, Split::MetaTrain);
  ds.validate();
  return ds;
}

DataFormat format_for_path(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? DataFormat::Csv : DataFormat::Binary;
}

DataSet load_dataset(const std::filesystem::path& path, DataFormat format) {
  std::ifstream is(path, format == DataFormat::Binary ? std::ios::binary : std::ios::in);
  if (!is) throw DataError("cannot open dataset " + path.string());
  return format == DataFormat::Binary ? read_dataset(is) : read_dataset_csv(is);
}

DataSet load_dataset(const std::filesystem::path& path) { return load_dataset(path, format_for_path(path)); }

void save_dataset(const std::filesystem::path& path, const DataSet& ds, DataFormat format) {
  std::ofstream os(path, format == DataFormat::Binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  if (format == DataFormat::Binary)
    write_dataset(os, ds);
  else
    write_dataset_csv(os, ds);
  if (!os) throw DataError("write failed: " + path.string());
}

// ---------------------------------------------------------------- splits

namespace {

void fraction_split(DataSet& ds, const std::array<double, 3>& fr, Rng& rng) {
  for (double f : fr)
    if (f < 0.0) throw ConfigError("split fractions must be nonnegative");
  const double total = fr[0] + fr[1] + fr[2];
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
  const std::size_t n = ds.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(fr[0] * static_cast<double>(n)));
  const auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::llround(fr[1] * static_cast<double>(n))));
  for (std::size_t i = 0; i < n; ++i) {
    Split s = Split::MetaTest;
    if (i < n_train)
      s = Split::MetaTrain;
    else if (i < n_train + n_val)
      s = Split::MetaVal;
    ds.split[order[i]] = s;
  }
}

}  // namespace

DataSet split_dataset(DataSet ds, const SplitSpec& spec, Rng& rng) {
  ds.split.assign(ds.size(), Split::MetaTrain);
  switch (spec.mode) {
    case SplitSpec::Mode::ByFraction:
      fraction_split(ds, spec.fractions, rng);
      break;
    case SplitSpec::Mode::ByClass: {
      if (!ds.labels) throw ConfigError("by_class split needs labels");
      std::vector<int> owner(ds.num_classes(), -1);
      for (int s = 0; s < 3; ++s)
        for (int c : spec.classes[static_cast<std::size_t>(s)]) {
          if (c < 0) throw ConfigError("negative class index in split spec");
          if (static_cast<std::size_t>(c) >= owner.size()) owner.resize(static_cast<std::size_t>(c) + 1, -1);
          if (owner[static_cast<std::size_t>(c)] >= 0)
            throw ConfigError("class " + std::to_string(c) + " listed in more than one split");
          owner[static_cast<std::size_t>(c)] = s;
        }
      for (std::size_t i = 0; i < ds.size(); ++i) {
        const int o = owner[static_cast<std::size_t>((*ds.labels)[i])];
        if (o < 0) throw ConfigError("class " + std::to_string((*ds.labels)[i]) + " is not assigned to any split");
        ds.split[i] = static_cast<Split>(o);
      }
      break;
    }
    case SplitSpec::Mode::ByAttributeRange: {
      if (!ds.attributes) throw ConfigError("by_attribute_range split needs attributes");
      std::set<int> used;
      for (const auto& list : spec.attributes)
        for (int a : list) {
          if (a < 0 || static_cast<std::size_t>(a) >= ds.attributes->cols())
            throw ConfigError("attribute index " + std::to_string(a) + " out of range");
          if (!used.insert(a).second) throw ConfigError("attribute " + std::to_string(a) + " listed in more than one split");
        }
      fraction_split(ds, spec.fractions, rng);
      break;
    }
  }
  return ds;
}

// ---------------------------------------------------------------- whitening

DataSet pca_whiten(const DataSet& ds, std::size_t d_out, const WhitenOptions& opts) {
  if (!ds.embeddings) throw DataError("pca_whiten needs embeddings");
  const Mat& emb = *ds.embeddings;
  const std::size_t d = emb.cols();
  if (d_out == 0 || d_out > d) throw ContractError("d_out must be in [1, d_z]");

  std::vector<std::size_t> fit_rows;
  if (opts.fit_on_meta_train && ds.split.size() == ds.size())
    fit_rows = ds.indices_in(Split::MetaTrain);
  else {
    fit_rows.resize(ds.size());
    std::iota(fit_rows.begin(), fit_rows.end(), 0);
  }
  if (fit_rows.size() <= d_out)
    throw ContractError("need more than d_out rows to fit whitening, have " + std::to_string(fit_rows.size()));

  Eigen::MatrixXd x(static_cast<Eigen::Index>(fit_rows.size()), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < fit_rows.size(); ++i)
    for (std::size_t j = 0; j < d; ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = emb(fit_rows[i], j);
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(fit_rows.size() - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw NumericError("covariance eigendecomposition failed");
  // Eigen returns ascending eigenvalues; take the top d_out.
  Eigen::MatrixXd proj(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d_out));
  for (std::size_t k = 0; k < d_out; ++k) {
    const auto col = static_cast<Eigen::Index>(d - 1 - k);
    const double lambda = eig.eigenvalues()(col);
    if (!(lambda > opts.eigenvalue_floor)) {
      std::ostringstream msg;
      msg << "degenerate direction: principal component " << k << " has eigenvalue " << lambda
          << " at or below the floor " << opts.eigenvalue_floor;
      throw DataError(msg.str());
    }
    Eigen::VectorXd v = eig.eigenvectors().col(col);
    // Deterministic sign: largest-magnitude entry positive.
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    proj.col(static_cast<Eigen::Index>(k)) = v / std::sqrt(lambda);
  }

  DataSet out = ds;
  Mat white(ds.size(), d_out);
  for (std::size_t r = 0; r < ds.size(); ++r) {
    Eigen::RowVectorXd row(static_cast<Eigen::Index>(d));
    for (std::size_t j = 0; j < d; ++j) row(static_cast<Eigen::Index>(j)) = emb(r, j) - mean(static_cast<Eigen::Index>(j));
    const Eigen::RowVectorXd z = row * proj;
    for (std::size_t k = 0; k < d_out; ++k) white(r, k) = z(static_cast<Eigen::Index>(k));
  }
  out.embeddings = std::move(white);
  return out;
}

// ---------------------------------------------------------------- synthesis

DataSet synth_mixture(const SynthConfig& cfg) {
  if (cfg.num_classes == 0 || cfg.per_class == 0 || cfg.d_in == 0 || cfg.d_z == 0)
    throw ContractError("synth_mixture counts must be positive");
  if (cfg.noise < 0.0) throw ContractError("noise must be nonnegative");
  const std::size_t latent = cfg.latent_dim == 0 ? std::min(cfg.d_in, cfg.d_z) : cfg.latent_dim;
  if (latent > cfg.d_in) throw ContractError("latent_dim cannot exceed d_in");
  const double emb_noise = cfg.embedding_noise < 0.0 ? 0.5 * cfg.noise : cfg.embedding_noise;

  Rng rng(derive_seed(cfg.seed, 0x5eed));
  std::normal_distribution<double> normal(0.0, 1.0);

  // Orthonormal basis of the latent subspace inside raw space.
  Eigen::MatrixXd g(static_cast<Eigen::Index>(cfg.d_in), static_cast<Eigen::Index>(latent));
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  const Eigen::MatrixXd basis =
      qr.householderQ() * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(cfg.d_in), static_cast<Eigen::Index>(latent));

  // Embedding map: project onto the latent basis, then random mixing into d_z.
  Eigen::MatrixXd mix(static_cast<Eigen::Index>(cfg.d_z), static_cast<Eigen::Index>(latent));
  for (Eigen::Index i = 0; i < mix.size(); ++i) mix.data()[i] = normal(rng) / std::sqrt(static_cast<double>(latent));
  if (cfg.d_z >= latent) mix.topRows(static_cast<Eigen::Index>(latent)).setIdentity();
  const Eigen::MatrixXd to_emb = mix * basis.transpose();  // d_z x d_in

  std::vector<Eigen::VectorXd> codes(cfg.num_classes);
  for (auto& c : codes) {
    c.resize(static_cast<Eigen::Index>(latent));
    for (Eigen::Index j = 0; j < c.size(); ++j) c(j) = cfg.center_scale * normal(rng);
  }
  Eigen::MatrixXd attr_dirs;
  if (cfg.num_attributes > 0) {
    attr_dirs.resize(static_cast<Eigen::Index>(cfg.num_attributes), static_cast<Eigen::Index>(latent));
    for (Eigen::Index i = 0; i < attr_dirs.size(); ++i) attr_dirs.data()[i] = normal(rng);
  }

  const std::size_t n = cfg.num_classes * cfg.per_class;
  DataSet ds;
  ds.raw = Mat(n, cfg.d_in);
  ds.embeddings = Mat(n, cfg.d_z);
  ds.labels = std::vector<int>(n);
  if (cfg.num_attributes > 0) ds.attributes = Matrix<std::uint8_t>(n, cfg.num_attributes);
  Eigen::VectorXd x(static_cast<Eigen::Index>(cfg.d_in));
  for (std::size_t c = 0; c < cfg.num_classes; ++c) {
    const Eigen::VectorXd center = basis * codes[c];
    for (std::size_t s = 0; s < cfg.per_class; ++s) {
      const std::size_t r = c * cfg.per_class + s;
      for (Eigen::Index j = 0; j < x.size(); ++j) x(j) = center(j) + cfg.noise * normal(rng);
      const Eigen::VectorXd z = to_emb * x;
      for (std::size_t j = 0; j < cfg.d_in; ++j) ds.raw(r, j) = x(static_cast<Eigen::Index>(j));
      for (std::size_t j = 0; j < cfg.d_z; ++j) (*ds.embeddings)(r, j) = z(static_cast<Eigen::Index>(j)) + emb_noise * normal(rng);
      (*ds.labels)[r] = static_cast<int>(c);
      if (cfg.num_attributes > 0) {
        const Eigen::VectorXd proj = attr_dirs * codes[c];
        for (std::size_t a = 0; a < cfg.num_attributes; ++a)
          (*ds.attributes)(r, a) = proj(static_cast<Eigen::Index>(a)) > 0.0 ? 1 : 0;
      }
    }
  }
  ds.split.assign(n, Split::MetaTrain);
  return ds;
}

}  // namespace cactus
