#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cactus/matrix.hpp"
#include "cactus/rng.hpp"

namespace cactus {

enum class Split : std::uint8_t { MetaTrain = 0, MetaVal = 1, MetaTest = 2 };

const char* split_name(Split s);
Split parse_split(const std::string& name);

struct DataSet {
  Mat raw;                                      // n x d_in
  std::optional<Mat> embeddings;                // n x d_z
  std::optional<std::vector<int>> labels;       // n
  std::optional<Matrix<std::uint8_t>> attributes;  // n x A, entries 0/1
  std::vector<Split> split;                     // n, defaults to meta-train

  std::size_t size() const noexcept { return raw.rows(); }
  std::size_t num_classes() const;
  std::vector<std::size_t> indices_in(Split s) const;
  // Throws DataError naming the first violated invariant.
  void validate() const;

  bool operator==(const DataSet&) const = default;
};

enum class DataFormat { Binary, Csv };

// "EMB1" binary layout: magic, u32 n, u32 d_in, u32 d_z, u32 A, u8 flags (bit 0: labels);
// raw then embeddings as row-major little-endian f64; labels as i32; attributes packed
// LSB-first, ceil(A/8) bytes per row. Split tags are not stored.
void write_dataset(std::ostream& os, const DataSet& ds);
DataSet read_dataset(std::istream& is);

// CSV with a mandatory header naming raw_<j>, emb_<j>, label, attr_<j> columns.
void write_dataset_csv(std::ostream& os, const DataSet& ds);
DataSet read_dataset_csv(std::istream& is);

DataFormat format_for_path(const std::filesystem::path& path);
DataSet load_dataset(const std::filesystem::path& path, DataFormat format);
DataSet load_dataset(const std::filesystem::path& path);
void save_dataset(const std::filesystem::path& path, const DataSet& ds, DataFormat format);

struct SplitSpec {
  enum class Mode { ByClass, ByFraction, ByAttributeRange };
  Mode mode = Mode::ByFraction;
  std::array<std::vector<int>, 3> classes;     // ByClass: label lists per split
  std::array<double, 3> fractions{1.0, 0.0, 0.0};  // ByFraction / ByAttributeRange row split
  std::array<std::vector<int>, 3> attributes;  // ByAttributeRange: attribute indices per split
};

// Assigns split tags. Rows are shuffled by `rng` for fractional splits.
DataSet split_dataset(DataSet ds, const SplitSpec& spec, Rng& rng);

struct WhitenOptions {
  // Fit the mean and covariance on meta-train rows only; false uses every row.
  bool fit_on_meta_train = true;
  double eigenvalue_floor = 1e-10;
};

// Projects embeddings onto the top d_out principal axes and scales each to unit variance.
DataSet pca_whiten(const DataSet& ds, std::size_t d_out, const WhitenOptions& opts = {});

struct SynthConfig {
  std::size_t num_classes = 10;
  std::size_t per_class = 20;
  std::size_t d_in = 16;
  std::size_t d_z = 8;
  double noise = 0.1;
  std::uint64_t seed = 0;
  // Class centers live in a latent subspace of this many raw dimensions (0 = min(d_in, d_z)).
  std::size_t latent_dim = 0;
  double center_scale = 1.0;
  // Extra noise added after the linear map to the embedding space (<0 = noise / 2).
  double embedding_noise = -1.0;
  // Class-level binary attributes, each the sign of a random projection of the class code.
  std::size_t num_attributes = 0;
};

// Gaussian mixture stand-in for an image dataset: raw = center + noise, embeddings =
// linear map of raw + independent noise, labels = generating component. Rows are class-major.
DataSet synth_mixture(const SynthConfig& cfg);

}  // namespace cactus
