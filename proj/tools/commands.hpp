#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "cactus/config.hpp"
#include "cactus/dataset.hpp"
#include "cactus/error.hpp"
#include "cactus/partition.hpp"

namespace cactus::cli {

// Defaults for every key a subcommand accepts. Unknown keys are rejected against this.
RunConfig defaults_for(const std::string& command);

int cmd_synth(const RunConfig& cfg, std::ostream& out);
int cmd_partition(const RunConfig& cfg, std::ostream& out);
int cmd_gen_tasks(const RunConfig& cfg, std::ostream& out);
int cmd_meta_train(const RunConfig& cfg, std::ostream& out);
int cmd_evaluate(const RunConfig& cfg, std::ostream& out);
int cmd_compare(const RunConfig& cfg, const std::vector<std::string>& reports, std::ostream& out);

// Dataset plus split tags from the "<path>.split" sidecar when present.
DataSet load_tagged_dataset(const std::filesystem::path& path);
void save_split_sidecar(const std::filesystem::path& dataset_path, const DataSet& ds,
                        const std::vector<std::string>& header);

// Partition list written by `partition`: one line per file, paths relative to the list.
std::vector<Partition> load_partition_list(const std::filesystem::path& list);

int exit_code_for(ErrorKind kind);

}  // namespace cactus::cli
