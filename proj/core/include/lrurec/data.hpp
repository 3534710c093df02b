#pragma once

#include <cstdint>
#include <istream>
#include <string>
#include <unordered_map>
#include <vector>

#include "lrurec/model.hpp"
#include "lrurec/rng.hpp"
#include "lrurec/tensor.hpp"

namespace lrurec {

struct Interaction {
  std::string user;
  std::string item;
  long long ts = 0;
};

struct ParseOptions {
  std::string delimiter = ",";
  int user_col = 0;
  int item_col = 1;
  int time_col = 2;
};

// Order-preserving parse; malformed lines raise with their line number.
std::vector<Interaction> parse_interactions(std::istream& in,
                                            const ParseOptions& opt = {});

// Single pass, not iterated to a fixpoint: drop interactions of items seen
// fewer than min_count times, then drop users left with fewer than
// min_count interactions.
std::vector<Interaction> filter_min_interactions(
    const std::vector<Interaction>& log, int min_count = 5);

struct UserSplit {
  std::vector<int> train;  // chronological, all but the last two items
  int val = 0;             // second most recent item
  int test = 0;            // most recent item
};

// Leave-last-out split with contiguous item re-indexing (0 = pad).
struct SplitDataset {
  std::vector<std::string> users;
  std::vector<UserSplit> seqs;
  std::vector<std::string> item_of_id;  // index 1..item_count; [0] unused
  std::unordered_map<std::string, int> id_of_item;
  int max_len = 50;

  int item_count() const { return static_cast<int>(item_of_id.size()) - 1; }
  int user_count() const { return static_cast<int>(users.size()); }
  std::uint64_t vocab_hash() const;
};

SplitDataset build_split(const std::vector<Interaction>& log, int max_len);

void save_split(const SplitDataset& ds, const std::string& manifest_path,
                const std::string& idmap_path, const std::string& header);
SplitDataset load_split(const std::string& manifest_path,
                        const std::string& idmap_path);

struct Batch {
  IdMatrix ids;
  PadMask mask;
  IdMatrix targets;  // 0 = ignore
  std::vector<int> true_len;
};

// One shuffled epoch of left-padded batches; within each batch inputs are
// the train sequence minus its last item and targets the next items.
std::vector<Batch> make_batches(const std::vector<std::vector<int>>& train_seqs,
                                int batch_size, int max_len, Rng& rng);

std::uint64_t fnv1a64(const void* data, size_t n, std::uint64_t seed);

}  // namespace lrurec
